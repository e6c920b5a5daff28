"""Cooperative rebalancing: advertise, freeze, replace, clear.

A rebalance is advertised on the grandparent of the unbalanced node by
CASing the grandparent's status from (0, 0, seq, IDLE) to
(parent_key, unbalanced_key, seq, PREP). From that point any thread can
drive it to completion by replaying `execute`, which is a deterministic
function of the status tuple and the frozen content it finds:

  1. locate the parent by parent_key and freeze it (an internal node with
     its own pending rebalance is helped to completion first; freezing is a
     one-way status CAS, leaf slots are frozen word by word),
  2. locate the unbalanced node by unbalanced_key inside the frozen parent,
     freeze it, pick and freeze a sibling if the action needs one,
  3. build a replacement parent from the frozen content (pure computation,
     so every helper builds the same thing),
  4. advance the status PREP -> SWAP,
  5. CAS the grandparent's child link from the old parent to the
     replacement; object identity guarantees at most one such CAS ever
     succeeds, because a replaced parent object is never linked again,
  6. CAS the status to (0, 0, seq + 1, IDLE).

Between a helper's status check and its freeze CAS the rebalance may
complete; the guard re-reads the status immediately before every freeze CAS
to narrow that window, and descent-side orphan repair (tree.py) makes the
residual case harmless. A helper that observes step SWAP but finds the
child link already pointing at an unfrozen node knows the swap happened and
only attempts the clear.

Plan records and retirement are the duty of the link-swap winner, which is
unique; status clearing may be done by anyone.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .keyspace import PAYLOAD_MASK, RO_BIT, encode, payload
from .nodes import FROZEN, IDLE, PREP, SWAP, InternalNode, LeafNode, node_search

SPLIT = "split"
MERGE = "merge"
REDISTRIBUTE = "redistribute"
REBUILD = "rebuild"
GROW = "grow"
SHRINK = "shrink"


@dataclass(frozen=True)
class RebalanceRecord:
    kind: str            # "leaf" | "internal" | "root"
    action: str
    inputs: tuple
    outputs: tuple
    final: bool          # replacement parent has a single child
    preserved: bool      # input key multiset == output key multiset
    clean: bool          # inputs consistent with an uncontended trigger


class RebalanceStats:
    def __init__(self):
        self.lock = threading.Lock()
        self.begins = 0
        self.link_swaps = 0
        self.clears = 0
        self.helper_clears = 0
        self.records: list[RebalanceRecord] = []

    def snapshot(self) -> dict:
        with self.lock:
            return {
                "begins": self.begins,
                "link_swaps": self.link_swaps,
                "clears": self.clears,
                "helper_clears": self.helper_clears,
                "records": list(self.records),
            }


@dataclass
class _Plan:
    new_parent: InternalNode
    record: RebalanceRecord
    retire: list = field(default_factory=list)


def live_keys(words) -> list[int]:
    """Sorted payloads of the non-empty words, read-only or not."""
    return sorted(w & PAYLOAD_MASK for w in words if w & PAYLOAD_MASK)


# --- generator phases -------------------------------------------------------
# Every shared-cell access is preceded by a bare yield so a scheduler (real
# driver or the schedule explorer) can interleave at each one.


def begin(tree, grand, parent_key: int, unbalanced_key: int):
    """Advertise a rebalance at `grand`. True iff this thread installed it."""
    yield
    st = grand.status.load()
    if st[3] != IDLE:
        return False
    new = (parent_key, unbalanced_key, st[2], PREP)
    yield
    if grand.status.cas(st, new):
        with tree.stats.lock:
            tree.stats.begins += 1
        return True
    return False


def trigger(tree, grand, key: int):
    """Begin-or-help. Ensures one rebalance completes at `grand`: our own if
    the status was idle, else the pending one. Returns True iff we began."""
    won = yield from begin(tree, grand, key, key)
    yield
    st = grand.status.load()
    if st[3] in (PREP, SWAP):
        yield from execute(tree, grand, st, helped=not won)
    return won


def help_pending(tree, node) -> bool:
    """Drive any rebalance advertised at `node` to completion."""
    yield
    st = node.status.load()
    if st[3] in (PREP, SWAP):
        yield from execute(tree, node, st, helped=True)
        return True
    return False


def freeze_internal(tree, grand, live, node):
    """One-way freeze of an internal node's status. Helps the node's own
    pending rebalance first: a frozen node's links must never change, so its
    last rebalance has to finish before the freeze lands. False = the
    rebalance named by `live` is over, caller must abandon."""
    while True:
        yield
        st = node.status.load()
        if st[3] == FROZEN:
            return True
        if st[3] in (PREP, SWAP):
            yield from execute(tree, node, st, helped=True)
            continue
        yield
        cur = grand.status.load()
        if cur not in live:
            return False
        yield
        node.status.cas(st, (0, 0, st[2], FROZEN))


def freeze_leaf(tree, grand, live, leaf):
    """Set the read-only bit on every slot. Returns the frozen words, or
    None if the rebalance completed under us. Idempotent: replaying helpers
    find the bits already set and just collect."""
    words = []
    for cell in leaf.slots:
        while True:
            yield
            w = cell.load()
            if w & RO_BIT:
                words.append(w)
                break
            yield
            cur = grand.status.load()
            if cur not in live:
                return None
            yield
            if cell.cas(w, w | RO_BIT):
                words.append(w | RO_BIT)
                break
    return words


def execute(tree, grand, st, helped: bool = False):
    """Drive the rebalance advertised by status tuple `st` to completion."""
    pk, uk, seq, step = st
    if step not in (PREP, SWAP):
        return
    live = ((pk, uk, seq, PREP), (pk, uk, seq, SWAP))

    jp = node_search(grand.separators, pk)
    pcell = grand.children[jp]
    yield
    parent = pcell.load()
    assert isinstance(parent, InternalNode), "parent level holds internals only"

    yield
    cur = grand.status.load()
    if cur not in live:
        return
    if cur[3] == SWAP:
        # an unfrozen child at step SWAP means the link swap already
        # happened; the only duty left is the clear
        yield
        pst = parent.status.load()
        if pst[3] != FROZEN:
            yield from _clear(tree, grand, live[1], helped)
            return

    ok = yield from freeze_internal(tree, grand, live, parent)
    if not ok:
        return

    plan = yield from _build_plan(tree, grand, live, parent, uk)
    if plan is None:
        return

    yield
    cur = grand.status.load()
    if cur == live[0]:
        yield
        grand.status.cas(cur, live[1])
        yield
        cur = grand.status.load()
    if cur != live[1]:
        return

    yield
    if pcell.load() is parent:
        yield
        if pcell.cas(parent, plan.new_parent):
            with tree.stats.lock:
                tree.stats.link_swaps += 1
                tree.stats.records.append(plan.record)
            for node in plan.retire:
                tree.bin.retire(node)

    yield from _clear(tree, grand, live[1], helped)


def _clear(tree, grand, swap_status, helped):
    pk, uk, seq, _ = swap_status
    yield
    if grand.status.cas(swap_status, (0, 0, seq + 1, IDLE)):
        with tree.stats.lock:
            tree.stats.clears += 1
            if helped:
                tree.stats.helper_clears += 1


# --- plan construction ------------------------------------------------------


def _build_plan(tree, grand, live, parent, uk):
    """Freeze the remaining targets and build the replacement parent.

    Deterministic given the frozen content, so concurrent executors build
    content-identical plans and the single link-swap winner may install any
    of them. Returns None if the rebalance completed while freezing."""
    cfg = tree.config
    K, D, S = cfg.order, cfg.leaf_capacity, cfg.min_size

    if grand is tree.root:
        n = len(parent.children)
        if n > K:
            return (yield from _plan_grow(tree, grand, live, parent))
        if n == 1:
            yield
            only = parent.children[0].load()
            if isinstance(only, InternalNode):
                return (yield from _plan_shrink(tree, grand, live, parent, only))
            # single leaf child: fall through, uk names the leaf

    pvals = []
    for c in parent.children:
        yield
        pvals.append(c.load())

    ju = node_search(parent.separators, uk)
    unb = pvals[ju]

    if isinstance(unb, LeafNode):
        return (yield from _plan_leaf(tree, grand, live, parent, pvals, ju))
    return (yield from _plan_internal(tree, grand, live, parent, pvals, ju))


def _plan_leaf(tree, grand, live, parent, pvals, ju):
    cfg = tree.config
    D, S = cfg.leaf_capacity, cfg.min_size
    band_min = min(2 * S, D // 2)
    unb = pvals[ju]

    words = yield from freeze_leaf(tree, grand, live, unb)
    if words is None:
        return None
    keys = live_keys(words)
    a = len(keys)

    if a == D:
        h = (a + 1) // 2
        left, right = keys[:h], keys[h:]
        new = [_leaf(D, left), _leaf(D, right)]
        children = pvals[:ju] + new + pvals[ju + 1:]
        seps = _insert_sep(parent.separators, ju, left[-1])
        rec = _rec("leaf", SPLIT, (a,), (h, a - h), len(children) == 1,
                   _leaves_hold(new, keys), True)
        return _finish(parent, [unb], children, seps, rec)

    if a <= S and len(pvals) >= 2:
        js = ju + 1 if ju + 1 < len(pvals) else ju - 1
        sib = pvals[js]
        swords = yield from freeze_leaf(tree, grand, live, sib)
        if swords is None:
            return None
        skeys = live_keys(swords)
        b = len(skeys)
        combined = sorted(keys + skeys)
        t = a + b
        lo, hi = min(ju, js), max(ju, js)
        clean = b >= S and (a == S or (a == S - 1 and band_min == S))
        if t <= D - 1:
            new = [_leaf(D, combined)]
            children = pvals[:lo] + new + pvals[hi + 1:]
            seps = _remove_sep(parent.separators, lo)
            rec = _rec("leaf", MERGE, (a, b), (t,), len(children) == 1,
                       _leaves_hold(new, combined), clean)
        else:
            h = (t + 1) // 2
            left, right = combined[:h], combined[h:]
            new = [_leaf(D, left), _leaf(D, right)]
            children = list(pvals)
            children[lo], children[hi] = new
            seps = _replace_sep(parent.separators, lo, left[-1])
            rec = _rec("leaf", REDISTRIBUTE, (a, b), (h, t - h), False,
                       _leaves_hold(new, combined), clean)
        return _finish(parent, [unb, sib], children, seps, rec)

    # raced trigger, dead-slot compaction, or sparse sole child: copy live
    # keys into a fresh writable leaf
    new = [_leaf(D, keys)]
    children = list(pvals)
    children[ju] = new[0]
    rec = _rec("leaf", REBUILD, (a,), (a,), len(children) == 1,
               _leaves_hold(new, keys), False)
    return _finish(parent, [unb], children, parent.separators, rec)


def _plan_internal(tree, grand, live, parent, pvals, ju):
    cfg = tree.config
    K, S = cfg.order, cfg.min_size
    unb = pvals[ju]

    ok = yield from freeze_internal(tree, grand, live, unb)
    if not ok:
        return None
    uvals = []
    for c in unb.children:
        yield
        uvals.append(c.load())
    c_n = len(uvals)

    if c_n > K:
        h = (c_n + 1) // 2
        lnode = InternalNode(uvals[:h], unb.separators[:h - 1])
        rnode = InternalNode(uvals[h:], unb.separators[h:])
        children = pvals[:ju] + [lnode, rnode] + pvals[ju + 1:]
        seps = _insert_sep(parent.separators, ju, unb.separators[h - 1])
        rec = _rec("internal", SPLIT, (c_n,), (h, c_n - h),
                   len(children) == 1, _nodes_hold([lnode, rnode], uvals), False)
        return _finish(parent, [unb], children, seps, rec)

    if c_n < S and len(pvals) >= 2:
        js = ju + 1 if ju + 1 < len(pvals) else ju - 1
        sib = pvals[js]
        ok = yield from freeze_internal(tree, grand, live, sib)
        if not ok:
            return None
        svals = []
        for c in sib.children:
            yield
            svals.append(c.load())
        lo, hi = min(ju, js), max(ju, js)
        lvals, rvals = (uvals, svals) if ju == lo else (svals, uvals)
        lseps = unb.separators if ju == lo else sib.separators
        rseps = sib.separators if ju == lo else unb.separators
        demoted = parent.separators[lo]
        allvals = lvals + rvals
        allseps = lseps + (demoted,) + rseps
        t = len(allvals)
        if t <= K:
            merged = InternalNode(allvals, allseps)
            children = pvals[:lo] + [merged] + pvals[hi + 1:]
            seps = _remove_sep(parent.separators, lo)
            rec = _rec("internal", MERGE, (c_n, len(svals)), (t,),
                       len(children) == 1, _nodes_hold([merged], allvals), False)
        else:
            h = (t + 1) // 2
            lnode = InternalNode(allvals[:h], allseps[:h - 1])
            rnode = InternalNode(allvals[h:], allseps[h:])
            children = list(pvals)
            children[lo], children[hi] = lnode, rnode
            seps = _replace_sep(parent.separators, lo, allseps[h - 1])
            rec = _rec("internal", REDISTRIBUTE, (c_n, len(svals)), (h, t - h),
                       False, _nodes_hold([lnode, rnode], allvals), False)
        return _finish(parent, [unb, sib], children, seps, rec)

    rebuilt = InternalNode(uvals, unb.separators)
    children = list(pvals)
    children[ju] = rebuilt
    rec = _rec("internal", REBUILD, (c_n,), (c_n,), len(children) == 1,
               _nodes_hold([rebuilt], uvals), False)
    return _finish(parent, [unb], children, parent.separators, rec)


def _plan_grow(tree, grand, live, parent):
    """Root's child has too many children: push a level down."""
    pvals = []
    for c in parent.children:
        yield
        pvals.append(c.load())
    n = len(pvals)
    h = (n + 1) // 2
    lnode = InternalNode(pvals[:h], parent.separators[:h - 1])
    rnode = InternalNode(pvals[h:], parent.separators[h:])
    top = InternalNode([lnode, rnode], (parent.separators[h - 1],))
    rec = _rec("root", GROW, (n,), (h, n - h), False,
               _nodes_hold([lnode, rnode], pvals), False)
    return _Plan(top, rec, [parent])


def _plan_shrink(tree, grand, live, parent, only):
    """Root's child has a single internal child: drop a level."""
    ok = yield from freeze_internal(tree, grand, live, only)
    if not ok:
        return None
    vals = []
    for c in only.children:
        yield
        vals.append(c.load())
    dropped = InternalNode(vals, only.separators)
    rec = _rec("root", SHRINK, (1, len(vals)), (len(vals),), False,
               _nodes_hold([dropped], vals), False)
    return _Plan(dropped, rec, [parent, only])


# --- small pure helpers -----------------------------------------------------


def _leaf(capacity: int, keys) -> LeafNode:
    return LeafNode(capacity, [encode(k) for k in keys])


def _leaves_hold(leaves, expected_keys) -> bool:
    """Read-back check: the fresh leaves carry exactly the planned keys."""
    held = []
    for lf in leaves:
        held.extend(c.value & PAYLOAD_MASK for c in lf.slots
                    if c.value & PAYLOAD_MASK)
    return sorted(held) == list(expected_keys)


def _nodes_hold(nodes, expected_vals) -> bool:
    """Read-back check: the fresh internals link exactly the planned
    children, compared by object identity."""
    held = []
    for nd in nodes:
        held.extend(id(c.value) for c in nd.children)
    return sorted(held) == sorted(id(v) for v in expected_vals)


def _insert_sep(seps: tuple, j: int, value: int) -> tuple:
    return seps[:j] + (value,) + seps[j:]

def _remove_sep(seps: tuple, j: int) -> tuple:
    return seps[:j] + seps[j + 1:]

def _replace_sep(seps: tuple, j: int, value: int) -> tuple:
    return seps[:j] + (value,) + seps[j + 1:]


def _rec(kind, action, inputs, outputs, final, preserved, clean):
    return RebalanceRecord(kind, action, tuple(inputs), tuple(outputs),
                           final, preserved, clean)


def _finish(parent, frozen, children, seps, rec) -> _Plan:
    new_parent = InternalNode(children, seps)
    return _Plan(new_parent, rec, [parent] + frozen)
