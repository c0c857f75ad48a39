"""Compare convergence of the cut distances on Example 2 under the L1, L2 and LInf norms.

Each run performs a fixed number of cuts, fits log d_k against log k after a 20% burn-in,
and compares the slope with the rate exponent that applies to the norm (2/(1-q) for the
Euclidean norm and 1/(1-q) otherwise). Pass a number of cuts on the command line to change
the default of 120.

    python demos/norm_rates.py [n_cuts]
"""

import sys
import time

from cvop.algorithm import RunConfig, run
from cvop.metrics import fit_slope, theoretical_exponent
from cvop.problem import builtin

n_cuts = int(sys.argv[1]) if len(sys.argv) > 1 else 120
print(f"{'norm':5s} {'slope':>8s} {'bound':>7s} {'final d':>10s} {'vertices':>9s} {'time':>7s}")
for norm in ("l2", "l1", "linf"):
    inst = builtin("example2").with_norm(norm)
    t0 = time.perf_counter()
    res = run(inst, RunConfig.indefinite(n_cuts))
    fit = fit_slope(res.log, 0.2)
    bound = theoretical_exponent(inst.q, norm == "l2")
    last = res.log[-1]
    print(f"{norm:5s} {fit.slope:8.3f} {bound:7.2f} {last.max_dist:10.2e} {last.n_vertices:9d} "
          f"{time.perf_counter() - t0:6.1f}s")
