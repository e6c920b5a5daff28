"""Node types, configuration, and the status field.

The tree is leaf-oriented: all keys live in leaves, internal nodes hold
separators and child links only. A leaf owns a fixed array of D slot cells
holding 64-bit words (see keyspace). An internal node owns an immutable
tuple of separators, a list of child-link cells, and a status cell that
serializes rebalancing among its grandchildren.

Status field: a 4-tuple (parent_key, unbalanced_key, seq, step).
  step IDLE   - no rebalance pending; parent_key/unbalanced_key are 0.
  step PREP   - a rebalance is advertised: any thread may help by freezing
                the named nodes and building the replacement.
  step SWAP   - freezing is done; the only remaining write is one child-link
                CAS from the old parent to its replacement, then the clear.
  step FROZEN - terminal; the node's links and status never change again.
seq increments on every clear, so stale helpers fail their CASes.

Child j of an internal node covers keys in (separators[j-1], separators[j]],
with the missing end separators meaning 0 and MAX_KEY. Equal keys go left.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass

from .cells import Cell
from .keyspace import EMPTY

IDLE = 0
PREP = 1
SWAP = 2
FROZEN = 3

STATUS_IDLE = (0, 0, 0, IDLE)
FROZEN_STATUS = (0, 0, 0, FROZEN)


@dataclass(frozen=True)
class TreeConfig:
    """Structural parameters: K-ary internal nodes, D-slot leaves, sparsity S.

    order          max children per internal node (K), >= 3
    leaf_capacity  slots per leaf (D), >= 4
    min_size       sparsity threshold (S): a leaf at <= S live keys after a
                   remove, or an internal node under S children, gets
                   merged or redistributed; 2 <= S <= D/2
    """

    order: int = 32
    leaf_capacity: int = 32
    min_size: int = 8

    def __post_init__(self):
        if self.order < 3:
            raise ValueError(f"order must be >= 3: {self.order}")
        if self.leaf_capacity < 4:
            raise ValueError(f"leaf_capacity must be >= 4: {self.leaf_capacity}")
        if not 2 <= self.min_size <= self.leaf_capacity // 2:
            raise ValueError(
                f"min_size must be in [2, leaf_capacity/2]: {self.min_size}"
            )


class LeafNode:
    __slots__ = ("slots",)

    def __init__(self, capacity: int, words=()):
        cells = [Cell(EMPTY) for _ in range(capacity)]
        for i, w in enumerate(words):
            cells[i].value = w
        self.slots = cells

    def __repr__(self):
        return f"<LeafNode {[c.value for c in self.slots]}>"


class InternalNode:
    __slots__ = ("separators", "children", "status")

    def __init__(self, children, separators=()):
        assert len(separators) == len(children) - 1
        self.separators = tuple(separators)
        self.children = [Cell(c) for c in children]
        self.status = Cell(STATUS_IDLE)

    def __repr__(self):
        return f"<InternalNode seps={self.separators} n={len(self.children)}>"


def node_search(separators: tuple, key: int) -> int:
    """Index of the child covering `key`. Equal keys go left: the child at
    index j holds keys in (separators[j-1], separators[j]]."""
    return bisect_left(separators, key)


def new_tree_root(config: TreeConfig) -> InternalNode:
    """Permanent root -> one internal child -> one empty leaf.

    The root is never replaced or frozen; height changes swing the root's
    single child link. The child starts as an internal node so every leaf
    always has both a parent and a grandparent.
    """
    leaf = LeafNode(config.leaf_capacity)
    inner = InternalNode([leaf])
    return InternalNode([inner])
