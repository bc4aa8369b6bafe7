"""Rate study on LAD regression: runs demos/configs/lad_rates.json and fits
log-log slopes to the recorded traces.

    python demos/lad_rates.py [--out results/lad_rates]
"""

import argparse
import json
from pathlib import Path

from pdsplit.diagnostics import InsufficientData, IterationTrace, fit_rate
from pdsplit.experiments import run_experiment

CONFIG = Path(__file__).parent / "configs" / "lad_rates.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/lad_rates")
    ap.add_argument("--threads", type=int, default=3)
    args = ap.parse_args()
    config = json.loads(CONFIG.read_text())
    summary = run_experiment(config, output_dir=args.out, threads=args.threads)
    for cell in summary["cells"]:
        if cell["status"] != "ok":
            print(f"{cell['instance']} / {cell['label']}: {cell['error']}")
            continue
        tr = IterationTrace.read_csv(Path(args.out) / cell["csv"])
        hi = int(tr.last["k"])
        fits = []
        for field in ("feasibility", "objective_residual", "lagrangian_gap"):
            try:
                r = fit_rate(tr, field, (min(100, hi // 10), hi))
                fits.append(f"{field} {r.slope:+.2f} (r2 {r.r_squared:.2f})")
            except InsufficientData:
                fits.append(f"{field} n/a")
        print(f"{cell['instance']:>9s} / {cell['label']:<12s} " + ", ".join(fits))


if __name__ == "__main__":
    main()
