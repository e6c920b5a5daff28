"""Threaded stress runs, quiesce checks, and throughput measurement.

A stress run builds a tree, gives each real thread its own seeded
workload, runs to quiesce, and then verifies everything that is checkable
after the fact: recorded history against the interval contracts, the
final snapshot against the net insert/remove balance, and the structural
invariants. Workloads are pregenerated so the timed loop does nothing but
operations and record appends; with a duration set, each thread cycles
its workload until the deadline.

Single-thread runs use a logical clock starting at zero, so the same seed
produces byte-identical traces. Multi-thread runs use the monotonic clock
with a per-thread strictly-increasing fixup; the checker never compares
timestamps across threads beyond interval overlap, which monotonic_ns
supports. The interpreter switch interval is dropped to 10 microseconds
during multi-thread runs to force heavy preemption.
"""

from __future__ import annotations

import gc
import random
import sys
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass

from .nodes import TreeConfig
from .tree import LeafTree
from .verify import (INSERT, REMOVE, SEARCH, OpRecord, Violation,
                     check_history, snapshot_consistent)

_SWITCH_INTERVAL = 1e-5


@contextmanager
def _no_gc():
    """Cyclic GC off for the timed section. A generation-2 collection over
    a multi-million record heap stops every thread for seconds, which the
    progress audit would blame on the tree; refcounting still reclaims the
    acyclic garbage."""
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


@dataclass(frozen=True)
class RunConfig:
    order: int = 32
    leaf_capacity: int = 32
    min_size: int = 8
    threads: int = 8
    ops_per_thread: int = 100_000
    key_range: int = 1 << 16
    mix: tuple = (0.5, 0.25, 0.25)   # search, insert, remove weights
    seed: int = 0
    duration: float = 0.0       # > 0: repeat the workload until the deadline
    reclaim: str = "never"
    trace: str = ""             # empty: no trace file

    def __post_init__(self):
        TreeConfig(self.order, self.leaf_capacity, self.min_size)
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1: {self.threads}")
        if self.ops_per_thread < 1:
            raise ValueError(f"ops per thread must be >= 1: "
                             f"{self.ops_per_thread}")
        if self.key_range < 4:
            raise ValueError(f"key range must be >= 4: {self.key_range}")
        if len(self.mix) != 3 or min(self.mix) < 0 or sum(self.mix) <= 0:
            raise ValueError(f"mix needs three non-negative weights: "
                             f"{self.mix}")
        if self.duration < 0:
            raise ValueError(f"duration must be >= 0: {self.duration}")

    def tree_config(self) -> TreeConfig:
        return TreeConfig(self.order, self.leaf_capacity, self.min_size)


def parse_mix(text: str) -> tuple:
    """'50:25:25' -> (0.5, 0.25, 0.25)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"mix must be search:insert:remove, got {text!r}")
    try:
        weights = [float(p) for p in parts]
    except ValueError:
        raise ValueError(f"mix weights must be numbers: {text!r}") from None
    total = sum(weights)
    if total <= 0 or min(weights) < 0:
        raise ValueError(f"mix weights must be non-negative and sum > 0: "
                         f"{text!r}")
    return tuple(w / total for w in weights)


def make_ops(cfg: RunConfig, tid: int, count: int = None) -> list:
    """Seeded per-thread workload of (kind, e1, e2) tuples."""
    if count is None:
        count = cfg.ops_per_thread
    rng = random.Random(cfg.seed * 7919 + tid * 104729 + 1)
    ws, wi, _ = (w / sum(cfg.mix) for w in cfg.mix)
    top = cfg.key_range
    span_max = max(1, top >> 8)
    ops = []
    for _ in range(count):
        r = rng.random()
        if r < ws:
            e1 = rng.randint(1, top)
            ops.append((SEARCH, e1, min(top, e1 + rng.randint(0, span_max))))
        elif r < ws + wi:
            e = rng.randint(1, top)
            ops.append((INSERT, e, e))
        else:
            e1 = rng.randint(1, top)
            ops.append((REMOVE, e1, min(top, e1 + rng.randint(0, span_max))))
    return ops


@dataclass
class StressResult:
    config: RunConfig
    records: list[OpRecord]
    snapshot: list[int]
    structure_violations: list[str]
    history_violations: list[Violation]
    balance_problems: list[str]
    elapsed: float
    stats: dict
    retired: int
    reclaimed: int

    @property
    def ok(self) -> bool:
        return not (self.structure_violations or self.history_violations
                    or self.balance_problems)

    def summary(self) -> str:
        n = len(self.records)
        rate = n / self.elapsed if self.elapsed > 0 else 0.0
        return (f"{n} ops, {self.config.threads} threads, "
                f"{self.elapsed:.2f}s ({rate:,.0f} ops/s), "
                f"{len(self.snapshot)} keys left, "
                f"{self.stats['link_swaps']} rebalances, "
                f"violations: {len(self.structure_violations)} structure / "
                f"{len(self.history_violations)} history / "
                f"{len(self.balance_problems)} balance")


def run_stress(cfg: RunConfig, check: bool = True) -> StressResult:
    tree = LeafTree(cfg.tree_config(), reclaim=cfg.reclaim)
    workloads = [make_ops(cfg, tid) for tid in range(cfg.threads)]
    buckets: list[list[OpRecord]] = [[] for _ in range(cfg.threads)]

    start = time.perf_counter()
    with _no_gc():
        if cfg.threads == 1:
            _run_logical(tree, 0, workloads[0], buckets[0], cfg.duration)
        else:
            _run_threads(tree, workloads, buckets, cfg.duration)
    elapsed = time.perf_counter() - start

    records = [r for bucket in buckets for r in bucket]
    records.sort(key=lambda r: (r.t1, r.t2, r.tid))

    structure = tree.check_structure()
    try:
        snapshot = tree.snapshot()
    except ValueError as exc:
        snapshot = []
        structure.append(str(exc))
    history = check_history(records) if check else []
    balance = snapshot_consistent(records, snapshot) if check else []
    return StressResult(cfg, records, snapshot, structure, history, balance,
                        elapsed, tree.stats.snapshot(),
                        tree.bin.retired, tree.bin.reclaimed)


def _run_logical(tree: LeafTree, tid: int, ops, out: list,
                 duration: float = 0.0) -> None:
    t = 0
    deadline = time.perf_counter() + duration if duration > 0 else None
    while True:
        for kind, e1, e2 in ops:
            res = _apply(tree, kind, e1, e2)
            out.append(OpRecord(tid, kind, e1, e2, t, t + 1, res))
            t += 2
            if (deadline is not None and t % 1024 == 0
                    and time.perf_counter() >= deadline):
                return
        if deadline is None or time.perf_counter() >= deadline:
            return


def _run_threads(tree: LeafTree, workloads, buckets,
                 duration: float = 0.0) -> None:
    gate = threading.Barrier(len(workloads))

    def work(tid: int):
        out = buckets[tid]
        ops = workloads[tid]
        mono = time.monotonic_ns
        append = out.append
        last = 0
        deadline = (time.perf_counter() + duration) if duration > 0 else None
        gate.wait()
        n = 0
        while True:
            for kind, e1, e2 in ops:
                t1 = mono()
                if t1 <= last:
                    t1 = last + 1
                res = _apply(tree, kind, e1, e2)
                t2 = mono()
                if t2 <= t1:
                    t2 = t1 + 1
                last = t2
                append(OpRecord(tid, kind, e1, e2, t1, t2, res))
                n += 1
                if (deadline is not None and n % 512 == 0
                        and time.perf_counter() >= deadline):
                    return
            if deadline is None or time.perf_counter() >= deadline:
                return

    old = sys.getswitchinterval()
    sys.setswitchinterval(_SWITCH_INTERVAL)
    try:
        threads = [threading.Thread(target=work, args=(tid,), daemon=True)
                   for tid in range(len(workloads))]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
    finally:
        sys.setswitchinterval(old)


def _apply(tree: LeafTree, kind: str, e1: int, e2: int) -> int:
    if kind == SEARCH:
        return tree.search(e1, e2)
    if kind == REMOVE:
        return tree.remove(e1, e2)
    return 1 if tree.insert(e1) else 0


def run_bench(cfg: RunConfig) -> dict:
    """Throughput only: no recording; the workload repeats until the
    configured duration elapses."""
    if cfg.duration <= 0:
        raise ValueError("bench needs a positive duration")
    tree = LeafTree(cfg.tree_config(), reclaim=cfg.reclaim)
    workloads = [make_ops(cfg, tid) for tid in range(cfg.threads)]
    done = [0] * cfg.threads
    gate = threading.Barrier(cfg.threads)

    def work(tid: int):
        ops = workloads[tid]
        n = 0
        gate.wait()
        deadline = time.perf_counter() + cfg.duration
        while time.perf_counter() < deadline:
            for kind, e1, e2 in ops:
                _apply(tree, kind, e1, e2)
                n += 1
                if n % 256 == 0 and time.perf_counter() >= deadline:
                    break
        done[tid] = n

    old = sys.getswitchinterval()
    sys.setswitchinterval(_SWITCH_INTERVAL)
    start = time.perf_counter()
    try:
        with _no_gc():
            if cfg.threads == 1:
                work(0)
            else:
                threads = [threading.Thread(target=work, args=(tid,),
                                            daemon=True)
                           for tid in range(cfg.threads)]
                for th in threads:
                    th.start()
                for th in threads:
                    th.join()
    finally:
        sys.setswitchinterval(old)
    elapsed = time.perf_counter() - start
    total = sum(done)
    return {
        "threads": cfg.threads,
        "ops": total,
        "elapsed": elapsed,
        "ops_per_sec": total / elapsed if elapsed > 0 else 0.0,
        "structure_violations": len(tree.check_structure()),
    }
