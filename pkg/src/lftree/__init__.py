"""Lock-free k-ary leaf-oriented concurrent search tree.

Keys live only in leaves; internal nodes route by separator. Search and
remove take a key range and favor its smallest member; results follow
interval-set contracts rather than linearizability, checked by the
conservative history checker in verify. Rebalancing is cooperative: any
thread can finish any advertised rebalance, and structural replacement is
a single CAS of a child link.
"""

from .harness import RunConfig, StressResult, run_bench, run_stress
from .keyspace import MAX_KEY, MIN_KEY, pack, unpack
from .nodes import TreeConfig
from .tree import LeafTree
from .verify import (OpRecord, SetOracle, Violation, check_history,
                     progress_audit, read_trace, snapshot_consistent,
                     write_trace)

__all__ = [
    "LeafTree", "TreeConfig", "RunConfig", "StressResult",
    "run_stress", "run_bench",
    "SetOracle", "OpRecord", "Violation", "check_history",
    "snapshot_consistent", "progress_audit", "read_trace", "write_trace",
    "pack", "unpack", "MIN_KEY", "MAX_KEY",
]

__version__ = "0.1.0"
