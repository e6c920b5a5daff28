"""Shared mutable cells with compare-and-set.

Every mutable location in the tree (leaf slot, child link, status field) is
a Cell. Loads are plain attribute reads; CAS takes a lock from a small
striped pool so that compare and set are atomic with respect to other CAS
calls. Under CPython any single attribute read or write is atomic already;
the stripes make the read-compare-write of cas() indivisible.

Comparison uses ==, which is identity for node objects (no __eq__) and
value equality for the int words and status tuples stored here.
"""

from __future__ import annotations

import threading
from typing import Any

_STRIPES = 64
_MASK = _STRIPES - 1
_LOCKS = tuple(threading.Lock() for _ in range(_STRIPES))


class Cell:
    __slots__ = ("value",)

    def __init__(self, value: Any):
        self.value = value

    def load(self) -> Any:
        return self.value

    def cas(self, expected: Any, new: Any) -> bool:
        with _LOCKS[id(self) & _MASK]:
            cur = self.value
            if cur is expected or cur == expected:
                self.value = new
                return True
            return False

    def __repr__(self):
        return f"Cell({self.value!r})"
