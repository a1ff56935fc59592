"""Adaptive run with a midpoint hashrate or delay step; prints the BPD trajectory.

    python3 scripts/step_response.py --kind hashrate --scale 4
"""

import argparse
from dataclasses import replace
from pathlib import Path

from mazzaroth.difficulty import DifficultyConfig, calibrate
from mazzaroth.formats import load_config, trajectory_csv
from mazzaroth.simnet import ADAPTIVE, Disturbance, SimConfig, derive_seed, final_quarter_bpd, run, step_response


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config")
    ap.add_argument("--kind", choices=["hashrate", "delay"], default="hashrate")
    ap.add_argument("--scale", type=float, default=4.0)
    ap.add_argument("--blocks", type=int, default=20_000)
    ap.add_argument("--pbpd", type=float, default=4.0)
    ap.add_argument("--window1", type=int, default=1000)
    ap.add_argument("--out", default="trajectory.csv")
    a = ap.parse_args()

    base = load_config(a.config) if a.config else SimConfig(seed=7)
    calib = replace(base, total_blocks=3000)
    seeds = iter(range(100))
    table = calibrate(lambda s: run(replace(calib, bpd=s, seed=derive_seed(base.seed, "calibrate", next(seeds)))).metrics,
                      [0.5, 1, 2, 4, 8, 16])
    print("f(DIS) knots:", ", ".join(f"{d:.1f}->{b:.2f}" for d, b in table.knots))

    cfg = replace(base, mode=ADAPTIVE, table=table, total_blocks=a.blocks,
                  difficulty=DifficultyConfig(pbpd=a.pbpd, window1=a.window1))
    res, traj = step_response(cfg, Disturbance(a.kind, a.scale, a.blocks // 2), every=a.blocks // 40)
    Path(a.out).write_text(trajectory_csv(traj))
    for p in traj:
        print(f"{p.block_index:7d} {p.bpd_measured:7.3f}  t1=2^{p.target1.bit_length() - 1} t2=2^{p.target2.bit_length() - 1}")
    print(f"final-quarter BPD {final_quarter_bpd(res):.3f} (PBPD {a.pbpd:g})")


if __name__ == "__main__":
    main()
