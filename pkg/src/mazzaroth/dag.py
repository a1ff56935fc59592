"""Append-only blockDAG store.

Every block gets a dense insertion index. Ancestry is kept as one Python
integer per block used as a bitset over those indices, so ``past`` is a
bitwise OR of the parents' sets taken once at insertion. Because a block can
only be added after all of its parents, neither its past nor its size can
change afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

BlockId = bytes

ID_LEN = 32


class DagError(Exception):
    pass


class UnknownBlock(DagError, KeyError):
    pass


class UnknownParent(DagError):
    pass


class DuplicateBlock(DagError):
    pass


class SecondGenesis(DagError):
    pass


class InvalidBlock(DagError):
    pass


class EmptyStore(DagError):
    pass


@dataclass(frozen=True)
class Block:
    id: BlockId
    parents: tuple[BlockId, ...] = ()
    nonce: int = 0
    transactions: tuple = ()
    # PoW thresholds the block was mined under (None outside adaptive runs)
    target1: Optional[int] = None
    target2: Optional[int] = None
    miner_tag: object = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.id) != ID_LEN:
            raise InvalidBlock(f"block id must be {ID_LEN} bytes, got {len(self.id)}")
        if len(set(self.parents)) != len(self.parents):
            raise InvalidBlock(f"duplicate parent in {self.id.hex()}")
        if self.id in self.parents:
            raise InvalidBlock(f"block {self.id.hex()} references itself")
        if not 0 <= self.nonce < 2**64:
            raise InvalidBlock("nonce must be a 64-bit unsigned integer")

    @property
    def is_genesis(self) -> bool:
        return not self.parents


def iter_bits(bits: int) -> Iterator[int]:
    """Yield the positions of set bits, lowest first."""
    while bits:
        low = bits & -bits
        yield low.bit_length() - 1
        bits ^= low


class DagStore:
    """Single-writer DAG with cached sizes and bitset reachability.

    Set-valued queries return lists sorted by block id (byte order), which
    is the tie-break order used everywhere else in the package.
    """

    def __init__(self, blocks: Iterable[Block] = ()):
        self._blocks: dict[BlockId, Block] = {}
        self._index: dict[BlockId, int] = {}
        self._ids: list[BlockId] = []
        self._parents: list[tuple[int, ...]] = []
        self._children: list[list[int]] = []
        self._anc: list[int] = []
        self._size: list[int] = []
        self._tips: set[int] = set()
        for b in blocks:
            self.add(b)

    # -- insertion ---------------------------------------------------------

    def add(self, block: Block) -> BlockId:
        if block.id in self._index:
            raise DuplicateBlock(block.id.hex())
        if block.is_genesis and self._ids:
            raise SecondGenesis(block.id.hex())
        if not block.is_genesis and not self._ids:
            raise UnknownParent("store is empty; genesis must come first")
        try:
            pidx = tuple(self._index[p] for p in block.parents)
        except KeyError as e:
            raise UnknownParent(e.args[0].hex()) from None

        anc = 0
        for p in pidx:
            anc |= self._anc[p] | (1 << p)
        i = len(self._ids)
        self._blocks[block.id] = block
        self._index[block.id] = i
        self._ids.append(block.id)
        self._parents.append(pidx)
        self._children.append([])
        self._anc.append(anc)
        self._size.append(anc.bit_count() + 1)
        for p in pidx:
            self._children[p].append(i)
            self._tips.discard(p)
        self._tips.add(i)
        return block.id

    # -- id/index plumbing -------------------------------------------------

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, b: BlockId) -> bool:
        return b in self._index

    def __iter__(self) -> Iterator[BlockId]:
        return iter(self._ids)

    def __getitem__(self, b: BlockId) -> Block:
        try:
            return self._blocks[b]
        except KeyError:
            raise UnknownBlock(b.hex()) from None

    def blocks(self) -> list[Block]:
        """All blocks in insertion order."""
        return [self._blocks[b] for b in self._ids]

    def index_of(self, b: BlockId) -> int:
        try:
            return self._index[b]
        except KeyError:
            raise UnknownBlock(b.hex() if isinstance(b, bytes) else repr(b)) from None

    def id_at(self, i: int) -> BlockId:
        return self._ids[i]

    def size_at(self, i: int) -> int:
        return self._size[i]

    def ancestors_at(self, i: int) -> int:
        """Bitset of past(block i) over insertion indices."""
        return self._anc[i]

    def parents_at(self, i: int) -> tuple[int, ...]:
        return self._parents[i]

    def children_at(self, i: int) -> list[int]:
        return self._children[i]

    def tip_indices(self) -> list[int]:
        return sorted(self._tips)

    @property
    def genesis(self) -> BlockId:
        if not self._ids:
            raise EmptyStore()
        return self._ids[0]

    def _sorted_ids(self, idx: Iterable[int]) -> list[BlockId]:
        return sorted(self._ids[i] for i in idx)

    # -- set primitives ----------------------------------------------------

    def parents(self, b: BlockId) -> list[BlockId]:
        return self._sorted_ids(self._parents[self.index_of(b)])

    def children(self, b: BlockId) -> list[BlockId]:
        return self._sorted_ids(self._children[self.index_of(b)])

    def past(self, b: BlockId) -> list[BlockId]:
        return self._sorted_ids(iter_bits(self._anc[self.index_of(b)]))

    def size_of(self, b: BlockId) -> int:
        return self._size[self.index_of(b)]

    def anticone(self, b: BlockId) -> list[BlockId]:
        i = self.index_of(b)
        everything = (1 << len(self._ids)) - 1
        rest = everything & ~(self._anc[i] | (1 << i))
        # descendants of b are not in its past either; they stay in the anticone
        return self._sorted_ids(iter_bits(rest))

    def tips(self) -> list[BlockId]:
        if not self._ids:
            raise EmptyStore()
        return self._sorted_ids(self._tips)

    def is_ancestor(self, a: BlockId, b: BlockId) -> bool:
        ia, ib = self.index_of(a), self.index_of(b)
        return bool((self._anc[ib] >> ia) & 1)


def add_block(store: DagStore, block: Block) -> BlockId:
    return store.add(block)
