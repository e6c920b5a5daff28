"""Sequential oracle, conservative history checker, and trace files.

The tree's range operations are not linearizable; their contracts are
stated over the interval a call occupies. For a call over [a, b):

  O(a, b) = keys continuously present from a to b
  U(a, b) = keys present at some instant in [a, b)

  search = 0   requires  O(a, b) has no key in [e1, e2]
  search = e   requires  e in [e1, e2] and e in U(a, b)
  remove = 0   requires  O(a, b) has no key in [e1, e2]
  remove = e   requires  e in [e1, e2], e in U(a, b), and e <= every key
               of O(a, b) in [e1, e2]
  insert true  requires  e not continuously present
  insert false requires  e in U(a, b)

The checker cannot know O and U exactly from a concurrent history, so it
brackets them: certainly_present(e, a, b) under-approximates "e in O",
possibly_present(e, a, b) over-approximates "e in U". Both are computed
from successful inserts and removes of e alone, so every violation the
checker reports is a real contract violation; races it cannot decide pass.

  certainly_present: some successful insert of e responded before a, and
      every remove returning e either responded before that insert was
      invoked or was invoked after b.
  possibly_present: more successful inserts of e invoked before b than
      removes of e responded before a.

Removal lifetimes must also pair off: sorting the removes of e by response
time, the i-th (1-based) needs at least i successful inserts invoked before
it responded. This catches duplicated removes that per-interval bounds
would miss.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable, Optional

SEARCH = "SEARCH"
REMOVE = "REMOVE"
INSERT = "INSERT"
KINDS = (SEARCH, REMOVE, INSERT)


@dataclass(frozen=True)
class OpRecord:
    tid: int
    kind: str
    e1: int
    e2: int
    t1: int      # invocation timestamp (ns or scheduler steps)
    t2: int      # response timestamp
    result: int  # found/removed key, 0 for none; insert: 1 added, 0 present

    def line(self) -> str:
        return (f"{self.tid}\t{self.kind}\t{self.e1}\t{self.e2}"
                f"\t{self.t1}\t{self.t2}\t{self.result}")


@dataclass(frozen=True)
class Violation:
    rule: str
    record: Optional[OpRecord]
    detail: str

    def __str__(self):
        loc = f" [{self.record.line()}]" if self.record else ""
        return f"{self.rule}: {self.detail}{loc}"


class SetOracle:
    """Sequential reference semantics: a sorted set of keys where
    search/remove answer the smallest key in range."""

    def __init__(self, keys: Iterable[int] = ()):
        self._keys = sorted(set(keys))

    def search(self, e1: int, e2: Optional[int] = None) -> int:
        e2 = e1 if e2 is None else e2
        j = bisect_left(self._keys, e1)
        if j < len(self._keys) and self._keys[j] <= e2:
            return self._keys[j]
        return 0

    def remove(self, e1: int, e2: Optional[int] = None) -> int:
        e2 = e1 if e2 is None else e2
        j = bisect_left(self._keys, e1)
        if j < len(self._keys) and self._keys[j] <= e2:
            return self._keys.pop(j)
        return 0

    def insert(self, e: int) -> bool:
        j = bisect_left(self._keys, e)
        if j < len(self._keys) and self._keys[j] == e:
            return False
        self._keys.insert(j, e)
        return True

    def apply(self, kind: str, e1: int, e2: int) -> int:
        if kind == SEARCH:
            return self.search(e1, e2)
        if kind == REMOVE:
            return self.remove(e1, e2)
        if kind == INSERT:
            return 1 if self.insert(e1) else 0
        raise ValueError(f"unknown op kind: {kind!r}")

    def keys(self) -> list[int]:
        return list(self._keys)


# --- history checking -------------------------------------------------------


class _KeyEvents:
    __slots__ = ("ins", "rem")

    def __init__(self):
        self.ins: list[tuple[int, int]] = []  # (t1, t2) successful inserts
        self.rem: list[tuple[int, int]] = []  # (t1, t2) removes returning key


class HistoryIndex:
    """Per-key successful inserts and removes, plus the sorted key list,
    ready for the presence bounds."""

    def __init__(self, records: Iterable[OpRecord]):
        self.by_key: dict[int, _KeyEvents] = {}
        for r in records:
            if r.kind == INSERT and r.result == 1:
                self._events(r.e1).ins.append((r.t1, r.t2))
            elif r.kind == REMOVE and r.result > 0:
                self._events(r.result).rem.append((r.t1, r.t2))
        for ev in self.by_key.values():
            ev.ins.sort()
            ev.rem.sort()
        self.inserted_keys = sorted(
            k for k, ev in self.by_key.items() if ev.ins)

    def _events(self, key: int) -> _KeyEvents:
        ev = self.by_key.get(key)
        if ev is None:
            ev = self.by_key[key] = _KeyEvents()
        return ev

    def certainly_present(self, e: int, a: int, b: int) -> bool:
        ev = self.by_key.get(e)
        if ev is None or not ev.ins:
            return False
        for it1, it2 in ev.ins:
            if it2 > a:
                continue
            if all(rt2 <= it1 or rt1 >= b for rt1, rt2 in ev.rem):
                return True
        return False

    def possibly_present(self, e: int, a: int, b: int) -> bool:
        ev = self.by_key.get(e)
        if ev is None:
            return False
        started = sum(1 for it1, _ in ev.ins if it1 < b)
        finished = sum(1 for _, rt2 in ev.rem if rt2 <= a)
        return started > finished

    def certain_in_range(self, e1: int, e2: int, a: int, b: int) -> int:
        """Smallest key in [e1, e2] certainly present over (a, b), else 0."""
        keys = self.inserted_keys
        j = bisect_left(keys, e1)
        while j < len(keys) and keys[j] <= e2:
            if self.certainly_present(keys[j], a, b):
                return keys[j]
            j += 1
        return 0


def check_history(records: list[OpRecord]) -> list[Violation]:
    """Conservative contract check. Empty list = no provable violation.
    Malformed records are reported as violations, never raised."""
    out: list[Violation] = []
    sane: list[OpRecord] = []

    for r in records:
        bad = _malformed(r)
        if bad:
            out.append(Violation("malformed-record", r, bad))
        else:
            sane.append(r)

    by_tid: dict[int, list[OpRecord]] = {}
    for r in sane:
        by_tid.setdefault(r.tid, []).append(r)
    for tid, rs in by_tid.items():
        rs.sort(key=lambda r: (r.t1, r.t2))
        for prev, cur in zip(rs, rs[1:]):
            if cur.t1 < prev.t2:
                out.append(Violation(
                    "overlapping-thread-ops", cur,
                    f"thread {tid} invoked at {cur.t1} before "
                    f"{prev.kind} responded at {prev.t2}"))

    idx = HistoryIndex(sane)

    for r in sane:
        a, b = r.t1, r.t2
        if r.kind == SEARCH:
            if r.result == 0:
                hit = idx.certain_in_range(r.e1, r.e2, a, b)
                if hit:
                    out.append(Violation(
                        "failed-search-certain-match", r,
                        f"{hit} was present throughout the call"))
            else:
                if not r.e1 <= r.result <= r.e2:
                    out.append(Violation(
                        "result-outside-range", r,
                        f"returned {r.result}"))
                elif not idx.possibly_present(r.result, a, b):
                    out.append(Violation(
                        "search-result-never-present", r,
                        f"{r.result} could not have been in the tree"))
        elif r.kind == REMOVE:
            if r.result == 0:
                hit = idx.certain_in_range(r.e1, r.e2, a, b)
                if hit:
                    out.append(Violation(
                        "failed-remove-certain-match", r,
                        f"{hit} was present throughout the call"))
            else:
                if not r.e1 <= r.result <= r.e2:
                    out.append(Violation(
                        "result-outside-range", r,
                        f"returned {r.result}"))
                    continue
                if not idx.possibly_present(r.result, a, b):
                    out.append(Violation(
                        "remove-result-never-present", r,
                        f"{r.result} could not have been in the tree"))
                if r.result > r.e1:
                    hit = idx.certain_in_range(r.e1, r.result - 1, a, b)
                    if hit:
                        out.append(Violation(
                            "remove-not-minimal", r,
                            f"{hit} < {r.result} was present throughout"))
        else:  # INSERT
            if r.result == 1:
                if idx.certainly_present(r.e1, a, b):
                    out.append(Violation(
                        "insert-over-certain-present", r,
                        f"{r.e1} was present throughout the call"))
            else:
                if not idx.possibly_present(r.e1, a, b):
                    out.append(Violation(
                        "failed-insert-never-present", r,
                        f"{r.e1} was never there to collide with"))

    # removal lifetimes must pair off with distinct insert lifetimes
    for key, ev in idx.by_key.items():
        starts = sorted(t1 for t1, _ in ev.ins)
        for i, (rt1, rt2) in enumerate(sorted(ev.rem, key=lambda x: x[1])):
            available = bisect_left(starts, rt2)
            if available < i + 1:
                out.append(Violation(
                    "remove-unpaired", None,
                    f"{i + 1} removes of {key} responded by {rt2} but only "
                    f"{available} inserts were invoked"))
                break
    return out


def _malformed(r: OpRecord) -> str:
    if r.kind not in KINDS:
        return f"unknown kind {r.kind!r}"
    if r.t2 <= r.t1:
        return f"response {r.t2} not after invocation {r.t1}"
    if r.e1 < 1 or r.e2 < r.e1:
        return f"bad key range [{r.e1}, {r.e2}]"
    if r.kind == INSERT:
        if r.e1 != r.e2:
            return "insert must have e1 == e2"
        if r.result not in (0, 1):
            return f"insert result must be 0 or 1, got {r.result}"
    elif r.result < 0:
        return f"negative result {r.result}"
    return ""


def snapshot_consistent(records: list[OpRecord],
                        snapshot: list[int]) -> list[str]:
    """After quiesce, with the complete history: key in snapshot iff its
    successful inserts outnumber its removes by exactly one."""
    net: dict[int, int] = {}
    for r in records:
        if r.kind == INSERT and r.result == 1:
            net[r.e1] = net.get(r.e1, 0) + 1
        elif r.kind == REMOVE and r.result > 0:
            net[r.result] = net.get(r.result, 0) - 1
    problems = []
    snap = set(snapshot)
    if len(snap) != len(snapshot):
        problems.append("snapshot contains duplicates")
    for key, n in sorted(net.items()):
        if n not in (0, 1):
            problems.append(f"key {key}: {n} net inserts")
        elif n == 1 and key not in snap:
            problems.append(f"key {key} inserted but missing from snapshot")
        elif n == 0 and key in snap:
            problems.append(f"key {key} removed but still in snapshot")
    for key in sorted(snap):
        if key not in net:
            problems.append(f"key {key} in snapshot but never inserted")
    return problems


def progress_audit(records: list[OpRecord], window: int) -> list[str]:
    """Starvation screen: flag ops that ran longer than `window` and spans
    longer than `window` during which ops were in flight but none
    responded."""
    reports = []
    for r in records:
        if r.t2 - r.t1 > window:
            reports.append(
                f"op ran {r.t2 - r.t1} > {window}: {r.line()}")
    responses = sorted(r.t2 for r in records)
    spans = sorted((r.t1, r.t2) for r in records)
    for a, b in zip(responses, responses[1:]):
        if b - a <= window:
            continue
        if any(t1 <= a and t2 >= b for t1, t2 in spans):
            reports.append(f"no response between {a} and {b}")
    return reports


# --- trace files -------------------------------------------------------------

_TRACE_COLUMNS = 7


class TraceError(ValueError):
    pass


def write_trace(path, records: Iterable[OpRecord], comment: str = "") -> None:
    """Tab-separated rows: tid, kind, e1, e2, t1, t2, result."""
    with open(path, "w", encoding="ascii") as f:
        if comment:
            f.write(f"# {comment}\n")
        for r in records:
            f.write(r.line() + "\n")


def read_trace(path) -> list[OpRecord]:
    records = []
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != _TRACE_COLUMNS:
                raise TraceError(
                    f"{path}:{lineno}: expected {_TRACE_COLUMNS} columns, "
                    f"got {len(parts)}")
            try:
                records.append(OpRecord(
                    int(parts[0]), parts[1], int(parts[2]), int(parts[3]),
                    int(parts[4]), int(parts[5]), int(parts[6])))
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from None
    return records
