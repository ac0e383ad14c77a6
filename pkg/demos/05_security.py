"""Fake and detection probabilities as more chains hold a copy."""
# %%
import numpy as np

from crosschain.security import (
    detect_probability,
    fake_probability,
    log10_fake_probability,
    verify_detection_by_sampling,
)

ps = {c: 0.1 for c in range(1, 9)}
print(" n        pb        pf")
for n in range(1, 9):
    chains = list(range(1, n + 1))
    print(f"{n:>2} {fake_probability(ps, chains):>9.2e} {detect_probability(ps, chains):>9.4f}")

# %% closed form against sampling for a mixed vector
rng = np.random.default_rng(3)
mixed = {c: float(p) for c, p in enumerate(rng.random(5), start=1)}
est = verify_detection_by_sampling(mixed, trials=100_000, seed=4)
print(f"pf closed form {detect_probability(mixed):.4f}, sampled {est:.4f}")

# %% many chains: the product is kept in log space
many = {c: 0.5 for c in range(60)}
print("60 chains at 0.5: log10 pb =", round(log10_fake_probability(many), 3))
