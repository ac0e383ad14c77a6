"""Multi-blockchain simulator for strongly connected topologies and
confirmation-based cross-chain propagation."""

from .chain import Block, ChainState, Transaction, TxKind, select_main_chain
from .consensus import ConsensusConfig, ConsensusKind, pos_select, pow_mine, pow_verify
from .formats import FormatSpec, TransformRegistry, registry_for, transf
from .metrics import MetricsLog, PropagationEvent
from .propagation import World, propagate_tick, settle_dependencies
from .security import confirmation_depth, detect_probability, fake_probability
from .sim import Scenario, Workload, run, simulate, summarize
from .topology import (
    ConnectionType,
    TopologyGraph,
    build_topology,
    classify_connection,
    is_strongly_connected,
    propagation_path,
)

__version__ = "0.1.0"
