"""Splitting algorithm next to ADMM, Chambolle-Pock and its accelerated
variant on one small LAD-Elastic-Net instance, at equal iteration budgets.

    python demos/baselines_compare.py [--iters 5000]
"""

import argparse

from pdsplit.baselines import BaselineConfig, reference_solution, run_baseline
from pdsplit.experiments import LadConfig, gen_lad_instance
from pdsplit.schedules import strongly_convex_rate_schedule
from pdsplit.solvers import run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, default=5_000)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    p, _ = gen_lad_instance(LadConfig(m=30, n=200, mu_l2=0.2, seed=args.seed))
    ref = reference_solution(p, tol=1e-11)
    print(f"reference value {ref.phi_star:.10f} (KKT {ref.kkt:.1e})")
    stride = max(args.iters // 5, 1)
    traces = {"split": run("split", p, strongly_convex_rate_schedule(p.mu_g, p.B.norm()), args.iters,
                           saddle=ref, stride=stride)}
    for method in ("admm", "cp", "cp_scvx"):
        traces[method] = run_baseline(p, BaselineConfig(method), args.iters, saddle=ref, stride=stride)
    print(f"{'k':>7s}" + "".join(f"{m:>22s}" for m in traces))
    for i, row in enumerate(traces["split"].rows):
        cells = "".join(f"{t.rows[i]['objective_residual']:>11.2e}/{t.rows[i]['feasibility']:<10.2e}"
                        for t in traces.values())
        print(f"{row['k']:>7d}" + cells)
    print("(each cell: objective residual / feasibility)")


if __name__ == "__main__":
    main()
