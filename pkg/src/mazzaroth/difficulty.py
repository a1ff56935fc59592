"""Dual-target proof of work and DIS-driven difficulty control.

A block hash (as a 256-bit big-endian integer) must be below both the
long-term ``target1`` and the per-block ``target2``. Both are retargeted from
observed DIS through a fitted curve ``f(DIS) = BPD``::

    literal:      target = previous * f(DIS) / PBPD
    stabilizing:  target = previous * PBPD / f(DIS)

With ``hash < target`` semantics a larger target means easier blocks, so
the literal rule speeds block production up when it is already too fast.
The stabilizing rule is the default.
"""

from __future__ import annotations

import bisect
import math
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import isotonic_regression

from .dag import BlockId, DagStore
from .ordering import distance_at

MAX_TARGET = 2**256 - 1

LITERAL = "literal"
STABILIZING = "stabilizing"


class DifficultyError(Exception):
    pass


class EmptyTable(DifficultyError):
    pass


class ZeroDenominator(DifficultyError):
    pass


class WrongWindowSize(DifficultyError):
    pass


class NonMonotoneUnrecoverable(DifficultyError):
    pass


class SimulationFailed(DifficultyError):
    pass


def clamp_target(t: int) -> int:
    return min(max(int(t), 1), MAX_TARGET)


@dataclass(frozen=True)
class CalibrationTable:
    """Monotone piecewise-linear ``f: DIS -> BPD``, clamped at both ends."""

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ks = tuple((float(d), float(b)) for d, b in self.knots)
        object.__setattr__(self, "knots", ks)
        for (d0, b0), (d1, b1) in zip(ks, ks[1:]):
            if not d1 > d0:
                raise ValueError("DIS knots must be strictly increasing")
            if b1 < b0:
                raise ValueError("BPD knots must be non-decreasing")

    @property
    def dis(self) -> list[float]:
        return [d for d, _ in self.knots]

    @property
    def bpd(self) -> list[float]:
        return [b for _, b in self.knots]

    def __call__(self, dis: float) -> float:
        return f_eval(self, dis)

    # file format: "dis,bpd" header, then ascending rows
    def dumps(self) -> str:
        rows = ["dis,bpd"] + [f"{d!r},{b!r}" for d, b in self.knots]
        return "\n".join(rows) + "\n"

    @classmethod
    def loads(cls, text: str) -> "CalibrationTable":
        knots = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            d, b = (x.strip() for x in line.split(","))
            try:
                knots.append((float(d), float(b)))
            except ValueError:
                if knots:
                    raise
                continue  # header row
        return cls(tuple(knots))


def f_eval(table: CalibrationTable, dis: float) -> float:
    ks = table.knots
    if not ks:
        raise EmptyTable()
    xs = table.dis
    if dis <= xs[0]:
        return ks[0][1]
    if dis >= xs[-1]:
        return ks[-1][1]
    j = bisect.bisect_right(xs, dis)
    (d0, b0), (d1, b1) = ks[j - 1], ks[j]
    return b0 + (dis - d0) / (d1 - d0) * (b1 - b0)


@dataclass
class DifficultyConfig:
    pbpd: float = 4.0
    window1: int = 1000
    mode: str = STABILIZING
    initial_target1: int = MAX_TARGET
    initial_target2: int = MAX_TARGET

    def __post_init__(self):
        if not self.pbpd > 0:
            raise ValueError("PBPD must be positive")
        if self.window1 < 1:
            raise ValueError("window1 must be at least 1")
        if self.mode not in (LITERAL, STABILIZING):
            raise ValueError(f"unknown controller mode {self.mode!r}")


def adjust_target(previous: int | Fraction, dis_observed: float, table: CalibrationTable,
                  config: DifficultyConfig) -> int:
    f = Fraction(f_eval(table, dis_observed))
    pbpd = Fraction(config.pbpd)
    prev = Fraction(previous)
    if config.mode == LITERAL:
        if pbpd == 0:
            raise ZeroDenominator("PBPD is zero")
        t = prev * f / pbpd
    else:
        if f == 0:
            raise ZeroDenominator("f(DIS) evaluated to zero")
        t = prev * pbpd / f
    return clamp_target(math.floor(t))


def _mean(values: Sequence[int]) -> Fraction:
    return Fraction(sum(values), len(values))


def next_target2(store: DagStore, parents: Iterable[BlockId], table: CalibrationTable,
                 config: DifficultyConfig, current2: int) -> int:
    """Per-block target from the parents' mean DIS and mean target2.

    Parents mined outside adaptive mode carry no target2; ``current2``
    stands in for them.
    """
    idx = [store.index_of(p) for p in parents]
    if not idx:
        return current2
    dis = statistics.fmean(distance_at(store, i) for i in idx)
    prev = []
    for i in idx:
        t = store[store.id_at(i)].target2
        prev.append(current2 if t is None else t)
    return adjust_target(_mean(prev), dis, table, config)


def next_target1(window_blocks: Sequence[BlockId], store: DagStore, table: CalibrationTable,
                 config: DifficultyConfig, current1: int) -> int:
    """Long-term target from mean DIS and mean target1 over one window."""
    if len(window_blocks) != config.window1:
        raise WrongWindowSize(f"expected {config.window1} blocks, got {len(window_blocks)}")
    idx = [store.index_of(b) for b in window_blocks]
    dis = statistics.fmean(distance_at(store, i) for i in idx)
    prev = []
    for i in idx:
        t = store[store.id_at(i)].target1
        prev.append(current1 if t is None else t)
    return adjust_target(_mean(prev), dis, table, config)


def hash_value(h: BlockId) -> int:
    return int.from_bytes(h, "big")


def check_pow(header_hash: BlockId | int, target1: int, target2: int) -> bool:
    h = header_hash if isinstance(header_hash, int) else hash_value(header_hash)
    return h < target1 and h < target2


def calibrate(sim_runner: Callable, grid: Sequence[float], config=None) -> CalibrationTable:
    """Fit ``f: DIS -> BPD`` from fixed-rate runs at each BPD setpoint.

    ``sim_runner(setpoint)`` returns an object with ``dis_mean`` and
    ``bpd_measured``. The measured BPD is used for the knots.
    """
    if not grid or any(not s > 0 for s in grid):
        raise ValueError("grid must be non-empty with positive setpoints")
    samples = []
    for s in grid:
        try:
            row = sim_runner(s)
        except Exception as e:
            raise SimulationFailed(f"setpoint {s}: {e}") from e
        samples.append((float(row.dis_mean), float(row.bpd_measured)))
    return fit_table(samples)


def fit_table(samples: Sequence[tuple[float, float]]) -> CalibrationTable:
    """Isotonic fit of BPD against DIS, with equal-DIS samples merged."""
    if len(samples) == 1:
        return CalibrationTable((samples[0],))
    if len({d for d, _ in samples}) == 1:
        raise NonMonotoneUnrecoverable("all samples share one DIS value")
    by_dis: dict[float, list[float]] = {}
    for d, b in samples:
        by_dis.setdefault(d, []).append(b)
    xs = sorted(by_dis)
    ys = np.array([statistics.fmean(by_dis[x]) for x in xs])
    w = np.array([len(by_dis[x]) for x in xs], dtype=float)
    fitted = isotonic_regression(ys, weights=w, increasing=True).x
    return CalibrationTable(tuple(zip(xs, (float(v) for v in fitted))))
