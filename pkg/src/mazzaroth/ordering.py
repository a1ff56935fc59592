"""Linear ordering of a blockDAG and the head-chain metrics built on it.

Each non-genesis block's *head* is its largest parent (by size, ties to the
smallest id). Following heads from any block walks a path to genesis, so the
head relation is a tree rooted at genesis. ``link`` is a root path in that
tree and ``agree`` of a set of blocks is the lowest common ancestor of their
heads, answered with binary lifting.

The ordering of ``past(b) + [b]`` is the ordering of ``head(b)`` followed by
a *segment*: the blocks b can see that its head cannot, then b itself.
Segments are memoized per block, so ordering never recurses.
"""

from __future__ import annotations

import weakref

from .dag import BlockId, DagStore, DagError, EmptyStore, iter_bits


class GenesisHasNoHead(DagError):
    pass


class _HeadIndex:
    """Per-store derived tables, extended lazily in insertion order.

    Parents always have lower insertion indices than their children, so
    filling the tables up to ``len(store)`` never needs recursion.
    """

    def __init__(self, store: DagStore):
        self.store = store
        self.head: list[int] = []
        self.depth: list[int] = []
        self.up: list[list[int]] = []
        self.segments: dict[int, tuple[int, ...]] = {}
        self.dist: dict[int, int] = {}

    def sync(self) -> None:
        st = self.store
        for i in range(len(self.head), len(st)):
            parents = st.parents_at(i)
            if not parents:
                self.head.append(-1)
                self.depth.append(0)
                self.up.append([])
                continue
            h = _best(st, parents)
            self.head.append(h)
            self.depth.append(self.depth[h] + 1)
            jumps = [h]
            k = 0
            while k < len(self.up[jumps[k]]):
                jumps.append(self.up[jumps[k]][k])
                k += 1
            self.up.append(jumps)

    def ancestor_at_depth(self, i: int, d: int) -> int:
        diff = self.depth[i] - d
        k = 0
        while diff:
            if diff & 1:
                i = self.up[i][k]
            diff >>= 1
            k += 1
        return i

    def lca(self, a: int, b: int) -> int:
        if self.depth[a] > self.depth[b]:
            a = self.ancestor_at_depth(a, self.depth[b])
        elif self.depth[b] > self.depth[a]:
            b = self.ancestor_at_depth(b, self.depth[a])
        if a == b:
            return a
        for k in range(len(self.up[a]) - 1, -1, -1):
            if k < len(self.up[a]) and self.up[a][k] != self.up[b][k]:
                a, b = self.up[a][k], self.up[b][k]
        return self.head[a]

    def segment(self, i: int) -> tuple[int, ...]:
        seg = self.segments.get(i)
        if seg is None:
            st = self.store
            h = self.head[i]
            if h < 0:
                seg = (i,)
            else:
                left = st.ancestors_at(i) & ~(st.ancestors_at(h) | (1 << h))
                # size strictly grows along every edge, so (size, id) order
                # is already a topological order of the leftover blocks
                rest = sorted(iter_bits(left), key=lambda j: (st.size_at(j), st.id_at(j)))
                seg = (*rest, i)
            self.segments[i] = seg
        return seg


_INDEXES: "weakref.WeakKeyDictionary[DagStore, _HeadIndex]" = weakref.WeakKeyDictionary()


def head_index(store: DagStore) -> _HeadIndex:
    hi = _INDEXES.get(store)
    if hi is None:
        hi = _INDEXES[store] = _HeadIndex(store)
    hi.sync()
    return hi


def _best(store: DagStore, idx) -> int:
    return min(idx, key=lambda p: (-store.size_at(p), store.id_at(p)))


# -- head chain metrics ------------------------------------------------------


def head_of(store: DagStore, b: BlockId) -> BlockId:
    i = store.index_of(b)
    h = head_index(store).head[i]
    if h < 0:
        raise GenesisHasNoHead(b.hex())
    return store.id_at(h)


def link_of(store: DagStore, b: BlockId) -> list[BlockId]:
    """Head chain ``[head(b), head(head(b)), ..., genesis]``; empty for genesis."""
    hi = head_index(store)
    out = []
    i = hi.head[store.index_of(b)]
    while i >= 0:
        out.append(store.id_at(i))
        i = hi.head[i]
    return out


def agree_indices(store: DagStore, idx) -> int:
    hi = head_index(store)
    acc = None
    for i in idx:
        h = hi.head[i]
        if h < 0:
            return 0
        acc = h if acc is None else hi.lca(acc, h)
    if acc is None:
        raise ValueError("agree needs at least one block")
    return acc


def agree(store: DagStore, blocks) -> BlockId:
    """Largest block shared by the head chains of all of ``blocks``.

    Genesis is returned when any argument is genesis, and is the answer that
    signals a consensus split.
    """
    return store.id_at(agree_indices(store, [store.index_of(b) for b in blocks]))


def distance_at(store: DagStore, i: int) -> int:
    hi = head_index(store)
    d = hi.dist.get(i)
    if d is None:
        parents = store.parents_at(i)
        d = store.size_at(i) - store.size_at(agree_indices(store, parents)) if parents else 0
        hi.dist[i] = d
    return d


def distance(store: DagStore, b: BlockId) -> int:
    return distance_at(store, store.index_of(b))


# -- ordering ----------------------------------------------------------------


def _order_indices(store: DagStore, i: int) -> list[int]:
    hi = head_index(store)
    chain = []
    while i >= 0:
        chain.append(i)
        i = hi.head[i]
    out: list[int] = []
    for j in reversed(chain):
        out.extend(hi.segment(j))
    return out


def order_from(store: DagStore, b: BlockId) -> list[BlockId]:
    """Order ``past(b)`` followed by ``b``; the result is topological."""
    return [store.id_at(i) for i in _order_indices(store, store.index_of(b))]


def state_set(store: DagStore, b: BlockId) -> list[BlockId]:
    return order_from(store, b)


def order_full(store: DagStore) -> list[BlockId]:
    """Order the whole store as if a virtual block referenced every tip."""
    if not len(store):
        raise EmptyStore()
    h = _best(store, store.tip_indices())
    out = _order_indices(store, h)
    seen = store.ancestors_at(h) | (1 << h)
    left = ((1 << len(store)) - 1) & ~seen
    out.extend(sorted(iter_bits(left), key=lambda j: (store.size_at(j), store.id_at(j))))
    return [store.id_at(i) for i in out]
