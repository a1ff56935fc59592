"""Command line entry point.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import formats
from .dag import DagError
from .difficulty import (
    LITERAL,
    STABILIZING,
    CalibrationTable,
    DifficultyConfig,
    DifficultyError,
    SimulationFailed,
    calibrate,
)
from .ledger import compute_state
from .ordering import order_full
from .simnet import (
    ADAPTIVE,
    FIXED,
    Disturbance,
    InvalidConfig,
    SimConfig,
    derive_seed,
    run,
    step_response,
    sweep,
)

log = logging.getLogger("mazzaroth")

DEFAULT_GRID = "0.5,1,2,4,8,16"


class UsageError(Exception):
    pass


def _grid(s: Optional[str]) -> list[float]:
    if s is None or not s.strip():
        raise UsageError("BPD grid must be a non-empty comma-separated list")
    try:
        grid = [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad BPD grid {s!r}") from None
    if not grid or any(not g > 0 for g in grid):
        raise UsageError("BPD grid values must be positive")
    return grid


def _net_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value simulation config file")
    p.add_argument("--miners", type=int)
    p.add_argument("--fast", type=int, help="miners synchronized within D' (default 90%% of miners)")
    p.add_argument("--slow-mult", type=float, dest="slow_mult")
    p.add_argument("--dprime", type=float)
    p.add_argument("--blocks", type=int)
    p.add_argument("--seed", type=int)


def _diff_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pbpd", type=float)
    p.add_argument("--window1", type=int)
    p.add_argument("--controller", choices=[STABILIZING, LITERAL])
    p.add_argument("--table", help="calibration table file (dis,bpd rows)")


def _base_config(a) -> SimConfig:
    cfg = formats.load_config(a.config) if a.config else SimConfig()
    kw = {}
    if a.miners is not None:
        kw["n_miners"] = a.miners
        kw["n_fast"] = a.fast if a.fast is not None else round(0.9 * a.miners)
    elif a.fast is not None:
        kw["n_fast"] = a.fast
    for flag, key in (("slow_mult", "slow_delay_multiplier"), ("dprime", "d_prime"),
                      ("blocks", "total_blocks"), ("seed", "seed")):
        v = getattr(a, flag)
        if v is not None:
            kw[key] = v
    cfg = dataclasses.replace(cfg, **kw)

    if hasattr(a, "pbpd"):
        dc = cfg.difficulty or DifficultyConfig()
        dkw = {}
        if a.pbpd is not None:
            dkw["pbpd"] = a.pbpd
        if a.window1 is not None:
            dkw["window1"] = a.window1
        if a.controller is not None:
            dkw["mode"] = a.controller
        cfg = dataclasses.replace(cfg, difficulty=dataclasses.replace(dc, **dkw))
        if a.table:
            cfg = dataclasses.replace(cfg, table=CalibrationTable.loads(Path(a.table).read_text()))
    return cfg


def _calibrate(cfg: SimConfig, grid: Sequence[float]) -> CalibrationTable:
    calls = iter(range(len(grid)))

    def runner(s):
        k = next(calls)
        sub = dataclasses.replace(cfg, mode=FIXED, bpd=s, seed=derive_seed(cfg.seed, "calibrate", k))
        return run(sub).metrics

    return calibrate(runner, list(grid), cfg)


def cmd_simulate(a) -> int:
    cfg = _base_config(a)
    if a.adaptive:
        cfg = dataclasses.replace(cfg, mode=ADAPTIVE)
        if cfg.table is None:
            cfg = dataclasses.replace(cfg, table=_calibrate(cfg, _grid(a.calibration_grid)))
    elif a.bpd is not None:
        cfg = dataclasses.replace(cfg, mode=FIXED, bpd=a.bpd)
    cfg.validate()
    res = run(cfg)
    Path(a.out).write_text(formats.metrics_csv([res.metrics]))
    if a.series:
        Path(a.series).write_text(formats.series_csv(res.series))
    if a.dag_out:
        formats.save_dag(a.dag_out, res.store, res.genesis_state)
    return 0


def cmd_sweep(a) -> int:
    grid = _grid(a.bpd)
    cfg = _base_config(a)
    cfg.validate()
    rows = sweep(cfg, grid)
    Path(a.out).write_text(formats.metrics_csv(rows))
    for r in rows:
        log.info("bpd=%g dis_mean=%.2f split=%.3f", r.bpd_setpoint, r.dis_mean, r.split_fraction)
    return 0


def cmd_calibrate(a) -> int:
    grid = _grid(a.bpd)
    cfg = _base_config(a)
    cfg.validate()
    table = _calibrate(cfg, grid)
    Path(a.out).write_text(table.dumps())
    return 0


def cmd_step(a) -> int:
    cfg = dataclasses.replace(_base_config(a), mode=ADAPTIVE)
    if a.at_block is None:
        a.at_block = cfg.total_blocks // 2
    if cfg.table is None:
        cfg = dataclasses.replace(cfg, table=_calibrate(cfg, _grid(a.calibration_grid)))
    cfg.validate()
    dist = Disturbance(a.disturbance, a.magnitude, a.at_block)
    _, traj = step_response(cfg, dist, every=a.every)
    Path(a.out).write_text(formats.trajectory_csv(traj))
    return 0


def cmd_order(a) -> int:
    store, _ = formats.load_dag(a.dag)
    sys.stdout.write("".join(b.hex() + "\n" for b in order_full(store)))
    return 0


def cmd_stateroot(a) -> int:
    store, gstate = formats.load_dag(a.dag)
    try:
        bid = bytes.fromhex(a.block)
    except ValueError:
        raise UsageError(f"bad block id {a.block!r}") from None
    if bid not in store:
        raise UsageError(f"unknown block {a.block}")
    _, root = compute_state(store, bid, gstate)
    sys.stdout.write(root.hex() + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mazzaroth", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one simulation")
    _net_args(s)
    _diff_args(s)
    s.add_argument("--bpd", type=float, help="fixed-rate BPD setpoint")
    s.add_argument("--adaptive", action="store_true", help="mine under the difficulty controller")
    s.add_argument("--calibration-grid", default=DEFAULT_GRID, dest="calibration_grid")
    s.add_argument("--out", required=True, help="metrics CSV")
    s.add_argument("--series", help="per-block series CSV")
    s.add_argument("--dag-out", dest="dag_out", help="dump the DAG as JSON")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="fixed-rate runs over a BPD grid")
    _net_args(s)
    s.add_argument("--bpd", required=True, help="comma-separated BPD grid")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("calibrate", help="fit f(DIS) = BPD and write the table")
    _net_args(s)
    s.add_argument("--bpd", default=DEFAULT_GRID, help="comma-separated BPD grid")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("step", help="adaptive step-response run")
    _net_args(s)
    _diff_args(s)
    s.add_argument("--disturbance", choices=["hashrate", "delay"], required=True)
    s.add_argument("--magnitude", type=float, required=True, help="multiplicative scale applied")
    s.add_argument("--at-block", type=int, dest="at_block")
    s.add_argument("--every", type=int, default=100, help="trajectory sampling period in blocks")
    s.add_argument("--calibration-grid", default=DEFAULT_GRID, dest="calibration_grid")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_step)

    s = sub.add_parser("order", help="print the full-DAG ordering")
    s.add_argument("dag")
    s.set_defaults(func=cmd_order)

    s = sub.add_parser("stateroot", help="print the state root at a block")
    s.add_argument("dag")
    s.add_argument("block", help="64-hex-char block id")
    s.set_defaults(func=cmd_stateroot)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return a.func(a)
    except (formats.FormatError, SimulationFailed, OSError, DagError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (UsageError, InvalidConfig, DifficultyError, ValueError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
