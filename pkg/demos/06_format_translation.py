"""Per-chain transaction formats and translation along a ring."""
# %%
from crosschain.formats import (
    canonical_projection,
    encode,
    make_transaction,
    registry_for,
    transf_along,
    variant_spec,
)
from crosschain.topology import build_topology, data_route

ids = [1, 2, 3, 4, 5]
g = build_topology("ring", ids)
specs = {i: variant_spec(i) for i in ids}
reg = registry_for(g, specs)
print(f"{len(g.nodes)} chains, {len(reg)} translators (one per edge)")

# %%
tx = make_transaction(specs[1], "u1-00", "u1-01", 7, origin_chain=1)
print("on chain 1:", encode(tx, specs[1]).decode()[:90], "...")
route = data_route(g, 1, 3)
copy = transf_along(tx, route, reg)
print("route:", route)
print("on chain 3:", encode(copy, specs[3]).decode()[:90], "...")
print("same content:", canonical_projection(copy) == canonical_projection(tx))
