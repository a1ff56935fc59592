"""Deterministic multi-miner blockDAG simulation.

Blocks arrive as one memoryless process and are handed to miners in
proportion to hashrate. A miner references every tip of its *local view*:
its own blocks immediately, a block from another miner once the broadcast
has reached it. Delay between two fast miners is ``D'``; anything involving
a slow miner takes ``slow_delay_multiplier * D'``.

Deliveries are not queued individually. With two delay classes the arrival
time of block ``x`` at miner ``m`` is a closed form of x's creation time, so
a view is evaluated on demand over the *frontier*: blocks not yet known to
have a child that every miner has received. Only frontier blocks can be tips
of any view.

In adaptive mode per-miner block rates depend on each miner's own target2,
so arrivals are generated by thinning: proposals are drawn at a rate that
bounds every miner's rate and accepted with probability
``min(target1, target2) / bound``.
"""

from __future__ import annotations

import hashlib
import math
import random
import statistics
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from itertools import accumulate
from typing import Optional, Sequence

import numpy as np

from .dag import Block, DagStore
from .difficulty import (
    LITERAL,
    MAX_TARGET,
    CalibrationTable,
    DifficultyConfig,
    clamp_target,
    next_target1,
    next_target2,
)
from .ledger import LedgerState, Transaction
from .ordering import agree_indices, distance_at, head_index

FIXED = "fixed"
ADAPTIVE = "adaptive"

METRICS_HEADER = (
    "bpd_setpoint", "bpd_measured", "dis_mean", "dis_p95", "dis_max",
    "agree_gap_mean", "split_fraction", "blocks",
)


class InvalidConfig(ValueError):
    pass


class EmptyLog(ValueError):
    pass


@dataclass
class SimConfig:
    n_miners: int = 100
    n_fast: int = 90
    slow_delay_multiplier: float = 3.0
    d_prime: float = 1.0
    total_blocks: int = 10_000
    seed: int = 0
    mode: str = FIXED
    bpd: float = 4.0
    difficulty: Optional[DifficultyConfig] = None
    table: Optional[CalibrationTable] = None
    # hash attempts per unit time summed over miners (adaptive mode)
    total_hashrate: float = 1e6
    hashrate_weights: Optional[Sequence[float]] = None
    sample_every: int = 10
    tx_per_block: int = 0
    n_accounts: int = 20
    initial_balance: int = 1000

    def weights(self) -> list[float]:
        if self.hashrate_weights is None:
            return [1.0] * self.n_miners
        return [float(w) for w in self.hashrate_weights]

    def validate(self) -> None:
        if self.n_miners < 1:
            raise InvalidConfig("n_miners must be positive")
        if not 0 <= self.n_fast <= self.n_miners:
            raise InvalidConfig("n_fast must lie in [0, n_miners]")
        if not self.slow_delay_multiplier > 1:
            raise InvalidConfig("slow_delay_multiplier must exceed 1")
        if not self.d_prime > 0:
            raise InvalidConfig("d_prime must be positive")
        if self.total_blocks < 1:
            raise InvalidConfig("total_blocks must be positive")
        if self.sample_every < 1:
            raise InvalidConfig("sample_every must be positive")
        w = self.weights()
        if len(w) != self.n_miners or any(not x > 0 for x in w):
            raise InvalidConfig("need one positive hashrate weight per miner")
        if self.mode == FIXED:
            if not self.bpd > 0:
                raise InvalidConfig("fixed-rate mode needs a positive BPD setpoint")
        elif self.mode == ADAPTIVE:
            if self.difficulty is None or self.table is None or not self.table.knots:
                raise InvalidConfig("adaptive mode needs a difficulty config and a calibration table")
            if min(self.table.bpd) <= 0:
                raise InvalidConfig("calibration table BPD values must be positive")
            if not self.total_hashrate > 0:
                raise InvalidConfig("total_hashrate must be positive")
        else:
            raise InvalidConfig(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class Disturbance:
    kind: str  # "hashrate" or "delay"
    scale: float
    at_block: int

    def __post_init__(self):
        if self.kind not in ("hashrate", "delay"):
            raise InvalidConfig(f"unknown disturbance {self.kind!r}")
        if not self.scale > 0:
            raise InvalidConfig("disturbance scale must be positive")


@dataclass
class MetricsRow:
    bpd_setpoint: float
    bpd_measured: float
    dis_mean: float
    dis_p95: float
    dis_max: float
    agree_gap_mean: float
    split_fraction: float
    blocks: int

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, k) for k in METRICS_HEADER)


@dataclass(frozen=True)
class SimEvent:
    index: int
    time: float
    miner: int
    d_prime: float


@dataclass
class SimResult:
    config: SimConfig
    store: DagStore
    metrics: MetricsRow
    # (block_index, dis, agree_gap or None when not sampled)
    series: list[tuple[int, int, Optional[int]]]
    events: list[SimEvent]
    genesis_state: LedgerState = field(default_factory=LedgerState)
    fast: list[bool] = field(default_factory=list)


def derive_seed(seed: int, *tags) -> int:
    h = hashlib.sha256(repr((seed, *tags)).encode()).digest()
    return int.from_bytes(h[:8], "big")


def block_id(seed: int, counter: int, parent_ids: Sequence[bytes]) -> bytes:
    h = hashlib.sha256()
    h.update((seed % 2**64).to_bytes(8, "big"))
    h.update(counter.to_bytes(8, "big"))
    for p in sorted(parent_ids):
        h.update(p)
    return h.digest()


def _account(k: int) -> bytes:
    return hashlib.sha256(b"account" + k.to_bytes(4, "big")).digest()


class _Wallets:
    """Client-side balance beliefs used to generate plausible transfers.

    Clients spend from what they last saw, so concurrent blocks can carry
    conflicting claims; the ordering decides which ones apply.
    """

    def __init__(self, cfg: SimConfig, rng: random.Random):
        self.rng = rng
        self.accounts = [_account(k) for k in range(cfg.n_accounts)]
        self.belief = {a: cfg.initial_balance for a in self.accounts}

    def genesis_state(self) -> LedgerState:
        return LedgerState(dict(self.belief))

    def transfer(self) -> Transaction:
        a, b = self.rng.sample(self.accounts, 2)
        ba, bb = self.belief[a], self.belief[b]
        x = self.rng.randint(0, ba) if ba else 0
        tx = Transaction.make({a: ba, b: bb}, {a: ba - x, b: bb + x}, [a])
        self.belief[a], self.belief[b] = ba - x, bb + x
        return tx


class _Network:
    def __init__(self, cfg: SimConfig, store: DagStore):
        self.cfg = cfg
        self.store = store
        self.n_fast = cfg.n_fast
        self.mult = cfg.slow_delay_multiplier
        self.d_prime = cfg.d_prime
        self.time: list[float] = [0.0]
        self.miner: list[int] = [-1]
        self.dp: list[float] = [0.0]
        # delivery time of block x to every fast / slow miner
        self.to_fast: list[float] = [0.0]
        self.to_slow: list[float] = [0.0]
        # earliest time some child of x reached all fast / all slow miners
        self.kid_fast: list[float] = [math.inf]
        self.kid_slow: list[float] = [math.inf]
        self.kid_miners: list[set[int]] = [set()]
        self.frontier: list[int] = [0]

    def is_fast(self, m: int) -> bool:
        return m < self.n_fast

    def view_tips(self, m: int, t: float) -> list[int]:
        fast = m < self.n_fast
        deliv = self.to_fast if fast else self.to_slow
        kid = self.kid_fast if fast else self.kid_slow
        miner, kid_miners = self.miner, self.kid_miners
        return [
            x for x in self.frontier
            if (deliv[x] <= t or miner[x] == m) and not (kid[x] <= t or m in kid_miners[x])
        ]

    def record(self, i: int, m: int, t: float, parents: Sequence[int]) -> None:
        fast = m < self.n_fast
        dp = self.d_prime
        to_fast = t + (dp if fast else dp * self.mult)
        to_slow = t + dp * self.mult
        self.time.append(t)
        self.miner.append(m)
        self.dp.append(dp)
        self.to_fast.append(to_fast)
        self.to_slow.append(to_slow)
        self.kid_fast.append(math.inf)
        self.kid_slow.append(math.inf)
        self.kid_miners.append(set())
        for p in parents:
            if to_fast < self.kid_fast[p]:
                self.kid_fast[p] = to_fast
            if to_slow < self.kid_slow[p]:
                self.kid_slow[p] = to_slow
            self.kid_miners[p].add(m)
        self.frontier = [
            x for x in self.frontier if not (self.kid_fast[x] <= t and self.kid_slow[x] <= t)
        ]
        self.frontier.append(i)


def run(config: SimConfig, disturbance: Optional[Disturbance] = None) -> SimResult:
    """Simulate ``config.total_blocks`` blocks and collect DIS metrics."""
    config.validate()
    cfg = config
    rng = random.Random(cfg.seed)
    store = DagStore()
    gid = hashlib.sha256(b"genesis" + (cfg.seed % 2**64).to_bytes(8, "big")).digest()
    adaptive = cfg.mode == ADAPTIVE
    dcfg, table = cfg.difficulty, cfg.table

    if adaptive:
        t0 = cfg.difficulty.pbpd / cfg.d_prime * 2**256 / cfg.total_hashrate
        default_t = clamp_target(int(t0))
        target1 = dcfg.initial_target1 if dcfg.initial_target1 != MAX_TARGET else default_t
        genesis_t2 = dcfg.initial_target2 if dcfg.initial_target2 != MAX_TARGET else default_t
        if dcfg.mode == LITERAL:
            ratio = max(table.bpd) / dcfg.pbpd
        else:
            ratio = dcfg.pbpd / min(table.bpd)
        store.add(Block(gid, target1=target1, target2=genesis_t2))
    else:
        target1 = genesis_t2 = None
        store.add(Block(gid))

    net = _Network(cfg, store)
    weights = cfg.weights()
    cum = list(accumulate(weights))
    hashrate = cfg.total_hashrate
    wallets = _Wallets(cfg, random.Random(derive_seed(cfg.seed, "tx"))) if cfg.tx_per_block else None

    events = [SimEvent(0, 0.0, -1, 0.0)]
    series: list[tuple[int, int, Optional[int]]] = []
    dis_all: list[int] = []
    gaps: list[int] = []
    splits = 0
    hi = head_index(store)

    t = 0.0
    for n in range(1, cfg.total_blocks + 1):
        if disturbance is not None and n == disturbance.at_block:
            if disturbance.kind == "hashrate":
                hashrate *= disturbance.scale
            else:
                net.d_prime *= disturbance.scale

        if adaptive:
            t2_cap = max(store[store.id_at(x)].target2 for x in net.frontier)
            bound = min(target1, clamp_target(int(t2_cap * ratio) + 1))
            lam = hashrate * (bound / 2**256)
            while True:
                t += rng.expovariate(lam)
                m = bisect_right(cum, rng.random() * cum[-1])
                tips = net.view_tips(m, t)
                pids = [store.id_at(x) for x in tips]
                t2 = next_target2(store, pids, table, dcfg, genesis_t2)
                if rng.random() * bound < min(target1, t2):
                    break
        else:
            t += rng.expovariate(cfg.bpd / net.d_prime)
            m = bisect_right(cum, rng.random() * cum[-1])
            tips = net.view_tips(m, t)
            pids = [store.id_at(x) for x in tips]
            t2 = None

        txs = tuple(wallets.transfer() for _ in range(cfg.tx_per_block)) if wallets else ()
        bid = block_id(cfg.seed, n, pids)
        store.add(Block(bid, tuple(sorted(pids)), nonce=n, transactions=txs,
                        target1=target1, target2=t2, miner_tag=m))
        net.record(n, m, t, tips)
        events.append(SimEvent(n, t, m, net.d_prime))

        hi.sync()
        dis = distance_at(store, n)
        dis_all.append(dis)
        gap = None
        if n % cfg.sample_every == 0:
            tip_idx = store.tip_indices()
            a = agree_indices(store, tip_idx)
            gap = max(store.size_at(x) for x in tip_idx) - store.size_at(a)
            gaps.append(gap)
            splits += a == 0
        series.append((n, dis, gap))

        if adaptive and n % dcfg.window1 == 0:
            window = [store.id_at(i) for i in range(n - dcfg.window1 + 1, n + 1)]
            target1 = next_target1(window, store, table, dcfg, target1)

    arr = np.asarray(dis_all, dtype=float)
    metrics = MetricsRow(
        bpd_setpoint=cfg.bpd if cfg.mode == FIXED else cfg.difficulty.pbpd,
        bpd_measured=measure_bpd(events, cfg.d_prime),
        dis_mean=float(arr.mean()),
        dis_p95=float(np.percentile(arr, 95)),
        dis_max=float(arr.max()),
        agree_gap_mean=statistics.fmean(gaps) if gaps else 0.0,
        split_fraction=splits / len(gaps) if gaps else 0.0,
        blocks=cfg.total_blocks,
    )
    gstate = wallets.genesis_state() if wallets else LedgerState()
    return SimResult(cfg, store, metrics, series, events, gstate,
                     [net.is_fast(m) for m in range(cfg.n_miners)])


def measure_bpd(events: Sequence[SimEvent], d_prime: float, since: Optional[float] = None) -> float:
    """Blocks created per ``d_prime`` of simulated time.

    Counts mined blocks with creation time after ``since`` (default: the
    first logged event, normally genesis at time 0) up to the last one.
    """
    mined = [e for e in events if e.miner >= 0]
    if not mined:
        raise EmptyLog()
    start = events[0].time if since is None else since
    mined = [e for e in mined if e.time > start]
    if not mined:
        raise EmptyLog()
    span = mined[-1].time - start
    return len(mined) / (span / d_prime)


def sweep(base: SimConfig, bpd_grid: Sequence[float]) -> list[MetricsRow]:
    if not bpd_grid:
        raise InvalidConfig("empty BPD grid")
    rows = []
    for k, s in enumerate(bpd_grid):
        cfg = replace(base, mode=FIXED, bpd=float(s), seed=derive_seed(base.seed, "sweep", k))
        rows.append(run(cfg).metrics)
    return rows


@dataclass
class StepPoint:
    block_index: int
    bpd_measured: float
    target1: int
    target2: int


def step_response(config: SimConfig, disturbance: Disturbance, every: int = 100) -> tuple[SimResult, list[StepPoint]]:
    """Adaptive run with a disturbance applied at ``disturbance.at_block``.

    Each trajectory point reports BPD over the preceding ``every`` blocks,
    measured against the delay in force at that point.
    """
    if config.mode != ADAPTIVE:
        raise InvalidConfig("step response needs adaptive mode")
    res = run(config, disturbance)
    ev = res.events
    out = []
    for n in range(every, len(ev), every):
        seg = ev[n - every : n + 1]
        span = seg[-1].time - seg[0].time
        bpd = (len(seg) - 1) / (span / ev[n].d_prime) if span > 0 else math.inf
        blk = res.store[res.store.id_at(n)]
        out.append(StepPoint(n, bpd, blk.target1, blk.target2))
    return res, out


def final_quarter_bpd(res: SimResult) -> float:
    ev = res.events
    start = ev[len(ev) - 1 - (len(ev) - 1) // 4].time
    return measure_bpd(ev, ev[-1].d_prime, since=start)
