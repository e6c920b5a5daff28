"""Deterministic scheduling of operation generators.

The tree's operation cores yield before every shared-cell access, so a
scheduler that picks which generator to advance at each yield controls the
interleaving completely. `explore` enumerates interleavings exhaustively:
at every step within the step bound where two or more threads are runnable
the scheduler branches over all of them; past the bound (or once only one
thread remains) it drains deterministically, lowest index first. With no
bound the enumeration is complete. State is rebuilt from scratch per
schedule via the setup callback, so schedules replay bit-identically.
`run_seeded` drives the same setup/check pair through pseudo-random
schedules instead, for thread counts where enumeration is too wide.

A Clock counts scheduler steps; operation wrappers stamp their records with
it, giving small-model histories integer timestamps the history checker can
consume directly.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Optional

from .verify import INSERT, REMOVE, SEARCH, OpRecord


class Clock:
    __slots__ = ("t",)

    def __init__(self):
        self.t = 0


class SimThread:
    __slots__ = ("gen", "done", "result")

    def __init__(self, gen):
        self.gen = gen
        self.done = False
        self.result = None


def step(thread: SimThread, clock: Optional[Clock] = None) -> None:
    if clock is not None:
        clock.t += 1
    try:
        next(thread.gen)
    except StopIteration as stop:
        thread.done = True
        thread.result = stop.value


def run(gen):
    """Drive one generator to completion, no interleaving."""
    th = SimThread(gen)
    while not th.done:
        step(th)
    return th.result


def run_round_robin(gens, clock: Optional[Clock] = None):
    """One step per runnable thread, cycling until all finish."""
    threads = [SimThread(g) for g in gens]
    while True:
        alive = [th for th in threads if not th.done]
        if not alive:
            return [th.result for th in threads]
        for th in alive:
            if not th.done:
                step(th, clock)


def run_until(thread: SimThread, pred: Callable[[], bool],
              clock: Optional[Clock] = None, limit: int = 1_000_000) -> int:
    """Advance one thread until pred() holds or it finishes. Returns the
    number of steps taken."""
    steps = 0
    while not thread.done and not pred():
        step(thread, clock)
        steps += 1
        if steps >= limit:
            raise RuntimeError(f"run_until: no progress in {limit} steps")
    return steps


class ExploreReport(NamedTuple):
    schedules: int                 # complete schedules enumerated
    failures: list                 # (schedule, problems) per failing schedule


def explore(setup, check=None, bound: Optional[int] = None,
            max_schedules: Optional[int] = None) -> ExploreReport:
    """Exhaustively enumerate interleavings up to a step bound.

    setup(clock) -> (ctx, gens): build fresh state and the thread
        generators; called once per schedule (replay from scratch).
    check(ctx, threads, schedule) -> list of problem strings (or None);
        called after each complete schedule. AssertionErrors are captured
        as problems too.

    Every step counts toward `bound`, forced or not; branching happens at
    steps with two or more runnable threads. bound=None enumerates every
    complete schedule. A schedule is the tuple of thread indices chosen at
    the branch points, which replays the run exactly.
    """
    failures = []
    count = 0
    stack: list[tuple[int, ...]] = [()]
    while stack:
        prefix = stack.pop()
        clock = Clock()
        ctx, gens = setup(clock)
        threads = [SimThread(g) for g in gens]
        steps = 0
        it = iter(prefix)
        pending = next(it, None)
        branched = False
        while True:
            alive = [i for i, th in enumerate(threads) if not th.done]
            if not alive:
                break
            if len(alive) == 1:
                pick = alive[0]
            elif pending is not None:
                pick = pending
                pending = next(it, None)
            elif bound is None or steps < bound:
                for i in reversed(alive):
                    stack.append(prefix + (i,))
                branched = True
                break
            else:
                pick = alive[0]  # past the bound: drain lowest index first
            step(threads[pick], clock)
            steps += 1
        if branched:
            continue

        count += 1
        if max_schedules is not None and count > max_schedules:
            raise RuntimeError(f"explore: more than {max_schedules} schedules")
        if check is not None:
            try:
                problems = check(ctx, threads, prefix)
            except AssertionError as exc:
                problems = [f"assertion: {exc}"]
            if problems:
                failures.append((prefix, list(problems)))
    return ExploreReport(count, failures)


def run_seeded(setup, check=None, seed: int = 0,
               runs: int = 1000) -> ExploreReport:
    """Drive `runs` pseudo-random schedules from one seed.

    Same setup/check contract as explore. The recorded schedule is the
    full pick sequence, so a failure replays without the rng.
    """
    import random

    rng = random.Random(seed)
    failures = []
    for _ in range(runs):
        clock = Clock()
        ctx, gens = setup(clock)
        threads = [SimThread(g) for g in gens]
        picks = []
        while True:
            alive = [i for i, th in enumerate(threads) if not th.done]
            if not alive:
                break
            pick = alive[rng.randrange(len(alive))] if len(alive) > 1 else alive[0]
            picks.append(pick)
            step(threads[pick], clock)
        if check is not None:
            try:
                problems = check(ctx, threads, tuple(picks))
            except AssertionError as exc:
                problems = [f"assertion: {exc}"]
            if problems:
                failures.append((tuple(picks), list(problems)))
    return ExploreReport(runs, failures)


def op_thread(tree, clock: Clock, tid: int, ops, out: list):
    """Generator running a list of (kind, e1, e2) ops against the tree,
    appending clock-stamped records to `out`."""
    def runner():
        for kind, e1, e2 in ops:
            t1 = clock.t
            if kind == SEARCH:
                r = yield from tree.search_gen(e1, e2)
            elif kind == REMOVE:
                r = yield from tree.remove_gen(e1, e2)
            elif kind == INSERT:
                r = 1 if (yield from tree.insert_gen(e1)) else 0
            else:
                raise ValueError(f"unknown op kind: {kind!r}")
            out.append(OpRecord(tid, kind, e1, e2, t1, clock.t, r))
    return runner()
