"""DIS and split fraction against BPD setpoint.

    python3 scripts/dis_sweep.py --config configs/desk.cfg --out sweep.csv [--plot sweep.png]
"""

import argparse
import time
from pathlib import Path

from mazzaroth.formats import load_config, metrics_csv
from mazzaroth.simnet import SimConfig, sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config")
    ap.add_argument("--grid", default="1,2,4,8,12,16,20")
    ap.add_argument("--out", default="sweep.csv")
    ap.add_argument("--plot", help="optional PNG (needs matplotlib)")
    a = ap.parse_args()

    cfg = load_config(a.config) if a.config else SimConfig()
    grid = [float(x) for x in a.grid.split(",")]
    t0 = time.perf_counter()
    rows = sweep(cfg, grid)
    Path(a.out).write_text(metrics_csv(rows))
    print(f"{'bpd':>6} {'measured':>9} {'dis_mean':>9} {'dis_p95':>8} {'gap':>8} {'split':>6}")
    for r in rows:
        print(f"{r.bpd_setpoint:6g} {r.bpd_measured:9.3f} {r.dis_mean:9.1f} {r.dis_p95:8.0f} "
              f"{r.agree_gap_mean:8.1f} {r.split_fraction:6.3f}")
    print(f"{len(rows)} points in {time.perf_counter() - t0:.1f}s -> {a.out}")

    if a.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
        ax1.plot(grid, [r.dis_mean for r in rows], "o-")
        ax1.set(xlabel="BPD", ylabel="mean DIS")
        ax2.plot(grid, [r.split_fraction for r in rows], "o-")
        ax2.set(xlabel="BPD", ylabel="fraction of samples with agree = genesis", ylim=(0, 1))
        fig.tight_layout()
        fig.savefig(a.plot, dpi=120)


if __name__ == "__main__":
    main()
