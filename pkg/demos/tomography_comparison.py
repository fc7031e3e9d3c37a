"""Compare LSQR, LSLU and sketched LSLU on a parallel-beam tomography scan.

The rectangular system (1728 rays, 2304 pixels) is solved matrix free.
The sketched solver draws its pivots from a 25-entry sample and still
lands within a few percent of the LSQR error at LSQR's best iteration.
"""

import numpy as np

from hessketch.hessenberg import PivotStrategy
from hessketch.problems import make_tomography
from hessketch.solvers import SolverConfig, lslu, lsqr, slslu

problem = make_tomography(48, 36, noise_level=0.01, seed=0)
print(f"operator: {problem.operator.rows} rays x {problem.operator.cols} pixels")

pivot = PivotStrategy.sampled(25, seed=1)
runs = {
    "lsqr": lsqr(
        problem.operator, problem.b, SolverConfig(maxiter=30), x_true=problem.x_true
    ),
    "lslu": lslu(
        problem.operator,
        problem.b,
        SolverConfig(maxiter=30, pivot=pivot),
        x_true=problem.x_true,
    ),
    "slslu": slslu(
        problem.operator,
        problem.b,
        SolverConfig(maxiter=30, pivot=pivot, seed=0),
        x_true=problem.x_true,
    ),
}

ref_errs = np.array(runs["lsqr"].trace.column("rel_err"))
kstar = int(ref_errs.argmin())
print(f"lsqr reaches its best error {ref_errs[kstar]:.4f} at iteration {kstar + 1}\n")

print(f"{'solver':>6}  {'min err':>8}  {'at iter':>7}  {'err@k*':>8}  {'dots':>5}")
for name, run in runs.items():
    errs = np.array(run.trace.column("rel_err"))
    print(
        f"{name:>6}  {errs.min():>8.4f}  {errs.argmin() + 1:>7}  "
        f"{errs[kstar]:>8.4f}  {run.trace.final().dots:>5}"
    )

print()
print("per-iteration relative errors (every 4th):")
print(f"{'iter':>4}  " + "  ".join(f"{name:>8}" for name in runs))
for k in range(0, 30, 4):
    errs = [run.trace.records[k].rel_err for run in runs.values()]
    print(f"{k + 1:>4}  " + "  ".join(f"{e:>8.4f}" for e in errs))
