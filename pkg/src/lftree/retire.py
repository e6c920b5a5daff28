"""Epoch-based retirement of replaced nodes.

CPython's GC already prevents use-after-free, so reclamation here is about
observability and about modeling the discipline: replaced nodes go on a
retire list stamped with the current epoch and are dropped once every
registered thread has moved past that epoch. Mode "never" keeps everything
(the verification default: retired nodes stay inspectable); mode "epoch"
drains eagerly and counts what it freed.
"""

from __future__ import annotations

import threading


class RetireBin:
    def __init__(self, mode: str = "never"):
        if mode not in ("never", "epoch"):
            raise ValueError(f"unknown reclaim mode: {mode!r}")
        self.mode = mode
        self.tracking = mode == "epoch"
        self._lock = threading.Lock()
        self._epoch = 0
        self._active: dict[int, int] = {}  # thread id -> epoch it entered at
        self._pending: list[tuple[int, object]] = []
        self.retired = 0
        self.reclaimed = 0

    def enter(self):
        tid = threading.get_ident()
        self._active[tid] = self._epoch

    def exit(self):
        tid = threading.get_ident()
        self._active.pop(tid, None)

    def retire(self, node) -> None:
        with self._lock:
            self.retired += 1
            if self.mode == "never":
                self._pending.append((self._epoch, node))
                return
            self._epoch += 1
            self._pending.append((self._epoch, node))
            if len(self._pending) >= 64:
                self._drain()

    def _drain(self):
        # safe to drop anything older than the oldest active reader's epoch
        floor = min(self._active.values(), default=self._epoch)
        keep = []
        for epoch, node in self._pending:
            if epoch < floor:
                self.reclaimed += 1
            else:
                keep.append((epoch, node))
        self._pending = keep

    def pending_count(self) -> int:
        with self._lock:
            return len(self._pending)
