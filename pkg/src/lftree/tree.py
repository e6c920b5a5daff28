"""Lock-free k-ary leaf-oriented search tree with range operations.

All keys live in leaves; internal nodes route. The root is a permanent
internal node with exactly one child link, and that child is always an
internal node, so every leaf has a parent and a grandparent and height
changes are a single link swing at the root.

Operations are written as generator cores that yield before every shared
cell access. The public methods drive a core to completion in a tight loop;
the schedule explorer (sim.py) drives the same cores step by step to
enumerate interleavings. Semantics are the interval-set contracts checked
by verify.py: a search/remove over [e1, e2] returns the smallest key that
was continuously present, or some key that was present at some point during
the call; 0 means no key was continuously present.

Removal tombstones the slot (read-only empty word) instead of zeroing it:
the number of writable empty slots in a leaf only ever decreases, so two
concurrent inserts of the same key always contend on the same slot and
duplicates cannot form. Dead slots are compacted by a rebuild rebalance
when an insert finds the leaf clogged.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

from . import rebalance as rb
from .keyspace import DEAD, EMPTY, MAX_KEY, PAYLOAD_MASK, RO_BIT, encode
from .nodes import (FROZEN, IDLE, PREP, SWAP, InternalNode, LeafNode,
                    TreeConfig, new_tree_root, node_search)
from .retire import RetireBin


class AccessPath:
    """Route taken to a leaf: (node, child index) per internal level, the
    leaf, and the key interval (lo, hi] the leaf covers."""

    __slots__ = ("entries", "leaf", "lo", "hi")

    def __init__(self, entries, leaf, lo, hi):
        self.entries = entries
        self.leaf = leaf
        self.lo = lo
        self.hi = hi

    @property
    def parent(self) -> InternalNode:
        return self.entries[-1][0]

    @property
    def grand(self) -> InternalNode:
        return self.entries[-2][0]


class ScanResult(NamedTuple):
    best_slot: int   # slot of the smallest in-range live key, -1 if none
    best_word: int
    empty_slot: int  # first writable empty slot, -1 if none
    live: int        # live keys in the leaf, frozen or not


class LeafTree:
    def __init__(self, config: Optional[TreeConfig] = None,
                 reclaim: str = "never"):
        self.config = config or TreeConfig()
        self.root = new_tree_root(self.config)
        self.stats = rb.RebalanceStats()
        self.bin = RetireBin(reclaim)

    # -- public API ----------------------------------------------------------

    def search(self, e1: int, e2: Optional[int] = None) -> int:
        """Smallest key in [e1, e2] continuously present, else a key present
        at some point, else 0."""
        return self._run(self.search_gen(e1, e2))

    def remove(self, e1: int, e2: Optional[int] = None) -> int:
        """Remove and return one key from [e1, e2] (0 if none found). The
        result is no larger than any key continuously present in range."""
        return self._run(self.remove_gen(e1, e2))

    def insert(self, e: int) -> bool:
        """Add e; False if it was already present."""
        return self._run(self.insert_gen(e))

    def _run(self, gen):
        if not self.bin.tracking:
            return _drive(gen)
        self.bin.enter()
        try:
            return _drive(gen)
        finally:
            self.bin.exit()

    def search_gen(self, e1: int, e2: Optional[int] = None):
        e1, e2 = _range_args(e1, e2)
        return self._search(e1, e2)

    def remove_gen(self, e1: int, e2: Optional[int] = None):
        e1, e2 = _range_args(e1, e2)
        return self._remove(e1, e2)

    def insert_gen(self, e: int):
        return self._insert(encode(e))

    # -- generator cores -----------------------------------------------------

    def _search(self, e1, e2):
        key = e1
        while True:
            path = yield from self._descend(key)
            res = yield from self._scan(path.leaf, e1, e2)
            if res.best_slot >= 0:
                # a frozen match still proves presence during the call
                return res.best_word & PAYLOAD_MASK
            if path.hi >= e2:
                return 0
            key = path.hi + 1

    def _remove(self, e1, e2):
        key = e1
        while True:
            path = yield from self._descend(key)
            while True:
                res = yield from self._scan(path.leaf, e1, e2)
                if res.best_slot < 0:
                    if path.hi >= e2:
                        return 0
                    key = path.hi + 1
                    break
                if res.best_word & RO_BIT:
                    # frozen candidate: finish the rebalance holding it,
                    # then retry the same spot on fresh nodes
                    yield from rb.trigger(self, path.grand,
                                          res.best_word & PAYLOAD_MASK)
                    break
                cell = path.leaf.slots[res.best_slot]
                yield
                if cell.cas(res.best_word, DEAD):
                    e = res.best_word
                    if (res.live - 1 <= self.config.min_size
                            and len(path.parent.children) >= 2):
                        yield from rb.trigger(self, path.grand, e)
                    return e
                # slot changed under us: rescan

    def _insert(self, word):
        e = word
        while True:
            path = yield from self._descend(e)
            while True:
                res = yield from self._scan(path.leaf, e, e)
                if res.best_slot >= 0:
                    return False
                if res.empty_slot < 0:
                    # no writable empty slot: full, clogged with dead
                    # slots, or frozen mid-rebalance
                    yield from rb.trigger(self, path.grand, e)
                    break
                cell = path.leaf.slots[res.empty_slot]
                yield
                if cell.cas(EMPTY, word):
                    return True
                # lost the slot: rescan

    def _descend(self, key):
        """Walk to the leaf covering `key`, helping pending rebalances,
        repairing frozen nodes, and triggering shape fixes on the way."""
        cfg = self.config
        while True:
            node = self.root
            entries = []
            lo, hi = 0, MAX_KEY
            restart = False
            while isinstance(node, InternalNode):
                yield
                st = node.status.load()
                if st[3] in (PREP, SWAP):
                    yield from rb.execute(self, node, st, helped=True)
                    continue
                if st[3] == FROZEN:
                    yield from self._repair(entries, key)
                    restart = True
                    break
                n = len(node.children)
                if node is self.root:
                    pass
                elif len(entries) == 1:
                    # the root's only child owns the grow/shrink shapes
                    if n > cfg.order:
                        yield from rb.trigger(self, self.root, key)
                        restart = True
                        break
                    if n == 1:
                        yield
                        c0 = node.children[0].load()
                        if isinstance(c0, InternalNode):
                            yield from rb.trigger(self, self.root, key)
                            restart = True
                            break
                elif n > cfg.order or n < cfg.min_size:
                    yield from rb.trigger(self, entries[-2][0], key)
                    restart = True
                    break
                j = node_search(node.separators, key)
                if j > 0:
                    lo = node.separators[j - 1]
                if j < len(node.separators):
                    hi = node.separators[j]
                yield
                child = node.children[j].load()
                entries.append((node, j))
                node = child
            if restart:
                continue
            return AccessPath(entries, node, lo, hi)

    def _repair(self, entries, key):
        """A frozen node is still linked (its rebalance completed between a
        helper's guard check and freeze CAS). Replace it by running a
        rebalance over it; finding it pre-frozen just skips the freezing."""
        assert entries, "the root is never frozen"
        grand = self.root if len(entries) == 1 else entries[-2][0]
        yield from rb.trigger(self, grand, key)

    def _scan(self, leaf, e1, e2):
        best_slot, best_word, best_key = -1, 0, 0
        empty_slot = -1
        live = 0
        for i, cell in enumerate(leaf.slots):
            yield
            w = cell.load()
            p = w & PAYLOAD_MASK
            if p:
                live += 1
                if e1 <= p <= e2 and (best_slot < 0 or p < best_key):
                    best_slot, best_word, best_key = i, w, p
            elif not w and empty_slot < 0:
                empty_slot = i
        return ScanResult(best_slot, best_word, empty_slot, live)

    # -- quiescent inspection (plain reads, no concurrency) -------------------

    def leaves(self):
        """All reachable leaves, left to right, with their (lo, hi] bounds."""
        out = []

        def walk(node, lo, hi):
            if isinstance(node, LeafNode):
                out.append((node, lo, hi))
                return
            seps = node.separators
            for j, cell in enumerate(node.children):
                clo = seps[j - 1] if j > 0 else lo
                chi = seps[j] if j < len(seps) else hi
                walk(cell.value, clo, chi)

        walk(self.root, 0, MAX_KEY)
        return out

    def snapshot(self) -> list[int]:
        """Sorted live keys. Raises if any key appears twice."""
        keys = []
        for leaf, _, _ in self.leaves():
            for cell in leaf.slots:
                p = cell.value & PAYLOAD_MASK
                if p:
                    keys.append(p)
        keys.sort()
        for i in range(1, len(keys)):
            if keys[i] == keys[i - 1]:
                raise ValueError(f"duplicate key in tree: {keys[i]}")
        return keys

    def check_structure(self) -> list[str]:
        """Structural invariant violations (empty list = healthy). Size
        bands are not structural: transient over/underfull nodes are legal
        and may persist until the next descent notices them."""
        cfg = self.config
        bad: list[str] = []
        seen: set[int] = set()
        seen_keys: set[int] = set()
        leaf_depths: set[int] = set()

        root = self.root
        if len(root.children) != 1 or root.separators:
            bad.append("root must have exactly one child and no separators")
        if not isinstance(root.children[0].value, InternalNode):
            bad.append("root's child must be an internal node")

        def walk(node, lo, hi, depth):
            if id(node) in seen:
                bad.append(f"node reached twice: {node!r}")
                return
            seen.add(id(node))
            if isinstance(node, LeafNode):
                leaf_depths.add(depth)
                if len(node.slots) != cfg.leaf_capacity:
                    bad.append(f"leaf has {len(node.slots)} slots")
                local: set[int] = set()
                for cell in node.slots:
                    w = cell.value
                    p = w & PAYLOAD_MASK
                    if w & RO_BIT and p:
                        bad.append(f"frozen key {p} in a reachable leaf")
                    if not p:
                        continue
                    if not lo < p <= hi:
                        bad.append(f"key {p} outside its leaf range "
                                   f"({lo}, {hi}]")
                    if p in local:
                        bad.append(f"key {p} twice in one leaf")
                    local.add(p)
                    if p in seen_keys:
                        bad.append(f"key {p} in two leaves")
                    seen_keys.add(p)
                return
            st = node.status.value
            if st[3] != IDLE:
                bad.append(f"non-idle status at quiesce: {st}")
            seps = node.separators
            n = len(node.children)
            if n != len(seps) + 1:
                bad.append(f"{n} children with {len(seps)} separators")
            if n < 1:
                bad.append("internal node with no children")
            for j in range(len(seps)):
                s = seps[j]
                if not lo < s < hi:
                    bad.append(f"separator {s} outside ({lo}, {hi})")
                if j > 0 and seps[j - 1] >= s:
                    bad.append(f"separators not increasing: {seps}")
            kinds = {isinstance(c.value, LeafNode) for c in node.children}
            if len(kinds) > 1:
                bad.append("mixed leaf and internal children")
            for j, cell in enumerate(node.children):
                clo = seps[j - 1] if j > 0 else lo
                chi = seps[j] if j < len(seps) else hi
                walk(cell.value, clo, chi, depth + 1)

        walk(root, 0, MAX_KEY, 0)
        if len(leaf_depths) > 1:
            bad.append(f"leaves at different depths: {sorted(leaf_depths)}")
        return bad

    def height(self) -> int:
        """Internal levels above the leaves (>= 2: root and its child)."""
        h = 0
        node = self.root
        while isinstance(node, InternalNode):
            h += 1
            node = node.children[0].value
        return h


def _drive(gen):
    """Run a generator core to completion and return its value."""
    try:
        while True:
            next(gen)
    except StopIteration as stop:
        return stop.value


def _range_args(e1, e2):
    if e2 is None:
        e2 = e1
    encode(e1)
    encode(e2)
    if e1 > e2:
        raise ValueError(f"empty range: [{e1}, {e2}]")
    return e1, e2
