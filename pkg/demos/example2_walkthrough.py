"""Three-dimensional l1-l1 example: value 6, minimal-norm limit, and what the
Tikhonov term changes.

    python demos/example2_walkthrough.py [--iters 100000]
"""

import argparse

import numpy as np

from pdsplit.experiments import L1L1Config, gen_l1l1_instance, l1l1_saddle, l1l1_start
from pdsplit.solvers import run

CASES = {"I": dict(p=2.0, q=3.0, r=1.0, lambda_l1=3.0, d=2.0),
         "II": dict(p=1.0, q=1.0, r=2.0, lambda_l1=2.0, d=2.0)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, default=100_000)
    args = ap.parse_args()
    np.set_printoptions(precision=4, suppress=True)
    for name, case in CASES.items():
        for mode in (("strong", 1.0, -0.5), "none"):
            cfg = L1L1Config(**case, epsilon_mode=mode)
            p = gen_l1l1_instance(cfg)
            x0, y0, l0 = l1l1_start(cfg)
            stride = max(args.iters // 5, 1)
            tr = run("split", p, cfg.schedule(), args.iters, x0, y0, l0, saddle=l1l1_saddle(cfg),
                     stride=stride)
            label = "eps_k = 1/sqrt(k)" if mode != "none" else "eps_k = 0"
            print(f"case {name}, {label}")
            for r in tr.rows:
                print(f"  k={r['k']:>7d}  phi={r['objective']:.8f}  |(x,y)|={r['iterate_norm']:.3e}"
                      f"  feas={r['feasibility']:.2e}")
            st = tr.final_state
            print(f"  final x={st.x}  y={st.y}\n")


if __name__ == "__main__":
    main()
