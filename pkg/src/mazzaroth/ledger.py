"""Balance-claim transactions, reversible application and state roots.

A transaction names the exact balance it expects each input account to hold
and the balance every touched account should hold afterwards. An account
that is only listed among the outputs implicitly claims a zero balance.
Since both sides are exact, running a transaction backwards is the precise
inverse of running it forwards:

* forward is accepted when the current balances equal the input claims,
* backward is accepted when the current balances equal the outputs.

Transactions that are not accepted are ignored and leave the state as is.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from .dag import BlockId, DagStore
from .ordering import order_from

AccountId = bytes

MAX_AMOUNT = 2**64 - 1


class LedgerError(Exception):
    pass


class MalformedTransaction(LedgerError):
    pass


class StateMismatch(LedgerError):
    pass


def _pairs(entries) -> tuple[tuple[AccountId, int], ...]:
    if isinstance(entries, Mapping):
        entries = entries.items()
    return tuple((bytes(a), v) for a, v in entries)


@dataclass(frozen=True)
class Transaction:
    inputs: tuple[tuple[AccountId, int], ...] = ()
    outputs: tuple[tuple[AccountId, int], ...] = ()
    signatures: frozenset = frozenset()

    @classmethod
    def make(cls, inputs=(), outputs=(), signatures=()) -> "Transaction":
        return cls(_pairs(inputs), _pairs(outputs), frozenset(bytes(s) for s in signatures))

    def claims(self) -> dict[AccountId, int]:
        """Expected pre-balance of every output account."""
        ins = dict(self.inputs)
        return {a: ins.get(a, 0) for a, _ in self.outputs}

    def decreased(self) -> list[AccountId]:
        claims = self.claims()
        return [a for a, v in self.outputs if v < claims[a]]


def tx_well_formed(tx: Transaction) -> bool:
    ins, outs = tx.inputs, tx.outputs
    for a, v in (*ins, *outs):
        if len(a) != 32 or not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= MAX_AMOUNT:
            return False
    in_accts = [a for a, _ in ins]
    out_accts = [a for a, _ in outs]
    if len(set(in_accts)) != len(in_accts) or len(set(out_accts)) != len(out_accts):
        return False
    if not set(in_accts) <= set(out_accts):
        return False
    if sum(v for _, v in ins) != sum(v for _, v in outs):
        return False
    return set(tx.decreased()) <= tx.signatures


SignatureCheck = Callable[[Transaction, AccountId], bool]


def signed_structurally(tx: Transaction, account: AccountId) -> bool:
    """Default test scheme: a listed signature is taken at face value."""
    return account in tx.signatures


@dataclass(frozen=True)
class LedgerState:
    """Immutable balance map; zero entries are dropped to keep it canonical."""

    balances: Mapping[AccountId, int] = field(default_factory=dict)
    min_receive: Mapping[AccountId, int] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("balances", "min_receive"):
            m = getattr(self, name)
            if any(v < 0 for v in m.values()):
                raise ValueError(f"negative entry in {name}")
            object.__setattr__(self, name, {bytes(a): v for a, v in m.items() if v})

    def balance(self, a: AccountId) -> int:
        return self.balances.get(a, 0)

    def min_receive_of(self, a: AccountId) -> int:
        return self.min_receive.get(a, 0)

    def with_balances(self, updates: Iterable[tuple[AccountId, int]]) -> "LedgerState":
        b = dict(self.balances)
        b.update(updates)
        return LedgerState(b, self.min_receive)

    def total(self) -> int:
        return sum(self.balances.values())


def apply_forward(
    state: LedgerState, tx: Transaction, check: SignatureCheck = signed_structurally
) -> tuple[LedgerState, bool]:
    if not tx_well_formed(tx):
        raise MalformedTransaction(repr(tx))
    claims = tx.claims()
    for a, v in tx.outputs:
        prev = state.balance(a)
        if prev != claims[a]:
            return state, False
        floor = state.min_receive_of(a)
        if v > prev and floor and v - prev < floor:
            return state, False
        if v < prev and not check(tx, a):
            return state, False
    return state.with_balances(tx.outputs), True


def apply_backward(state: LedgerState, tx: Transaction) -> tuple[LedgerState, bool]:
    if not tx_well_formed(tx):
        raise MalformedTransaction(repr(tx))
    for a, v in tx.outputs:
        if state.balance(a) != v:
            return state, False
    return state.with_balances(tx.claims().items()), True


# -- state root --------------------------------------------------------------


def _sha(b: bytes) -> bytes:
    return hashlib.sha256(b).digest()


def state_leaves(state: LedgerState) -> list[bytes]:
    accts = sorted(set(state.balances) | set(state.min_receive))
    out = []
    for a in accts:
        bal, floor = state.balance(a), state.min_receive_of(a)
        out.append(a + bal.to_bytes(8, "big") + floor.to_bytes(8, "big"))
    return out


def merkle_root(leaves: list[bytes]) -> bytes:
    if not leaves:
        return _sha(b"")
    level = [_sha(x) for x in leaves]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [_sha(level[k] + level[k + 1]) for k in range(0, len(level), 2)]
    return level[0]


def state_root(state: LedgerState) -> bytes:
    return merkle_root(state_leaves(state))


# -- DAG traversal -----------------------------------------------------------


def ordered_transactions(store: DagStore, b: BlockId) -> list[Transaction]:
    return [tx for blk in order_from(store, b) for tx in store[blk].transactions]


def replay(
    store: DagStore,
    b: BlockId,
    genesis_state: LedgerState,
    check: SignatureCheck = signed_structurally,
) -> tuple[LedgerState, list[bool]]:
    """Apply every transaction of ``state_set(b)`` and record which were accepted."""
    state = genesis_state
    receipts = []
    for tx in ordered_transactions(store, b):
        state, ok = apply_forward(state, tx, check)
        receipts.append(ok)
    return state, receipts


def compute_state(
    store: DagStore,
    b: BlockId,
    genesis_state: LedgerState,
    check: SignatureCheck = signed_structurally,
) -> tuple[LedgerState, bytes]:
    state, _ = replay(store, b, genesis_state, check)
    return state, state_root(state)


def _common_prefix(p: list, q: list) -> int:
    n = 0
    for x, y in zip(p, q):
        if x != y:
            break
        n += 1
    return n


def transition_state(
    store: DagStore,
    src: BlockId,
    dst: BlockId,
    src_state: LedgerState,
    receipts: Optional[list[bool]] = None,
    genesis_state: Optional[LedgerState] = None,
    check: SignatureCheck = signed_structurally,
) -> tuple[LedgerState, bytes]:
    """Move a computed state from block ``src`` to block ``dst``.

    Transactions after the common prefix of the two orderings are rolled
    back newest first, then the target's remaining transactions are played
    forward. Without ``receipts`` every rolled-back transaction is judged by
    the output-match rule alone, which can wrongly revert a transaction that
    was ignored going forward if its outputs happen to match the state.
    Passing the receipts from :func:`replay` of ``src`` rolls back exactly
    the accepted ones.

    When ``genesis_state`` is given the result is checked against a direct
    computation of ``dst`` and :class:`StateMismatch` is raised on any
    difference.
    """
    p, q = order_from(store, src), order_from(store, dst)
    k = _common_prefix(p, q)
    skip = sum(len(store[blk].transactions) for blk in p[:k])
    undo = [tx for blk in p[k:] for tx in store[blk].transactions]
    if receipts is not None and len(receipts) != skip + len(undo):
        raise ValueError("receipts do not match the source ordering")

    state = src_state
    for j in range(len(undo) - 1, -1, -1):
        if receipts is not None and not receipts[skip + j]:
            continue
        state, ok = apply_backward(state, undo[j])
        if receipts is not None and not ok:
            raise StateMismatch(f"accepted transaction {j} did not roll back")
    for blk in q[k:]:
        for tx in store[blk].transactions:
            state, _ = apply_forward(state, tx, check)
    root = state_root(state)

    if genesis_state is not None:
        direct, direct_root = compute_state(store, dst, genesis_state, check)
        if direct != state or direct_root != root:
            raise StateMismatch(f"{src.hex()[:12]} -> {dst.hex()[:12]}")
    return state, root
