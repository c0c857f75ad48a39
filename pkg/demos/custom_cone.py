"""Solve a hand-written problem under a non-orthant ordering cone and verify the result.

Two quadratic objectives are ordered by the cone generated by (2, -1) and (-1, 2), which is
wider than the quadrant. Wider cones make more points comparable, so fewer points are
minimal and the front is shorter. The problem is written as TOML, parsed, solved, and
checked by the same invariants the `verify` command reports.

    python demos/custom_cone.py
"""

import numpy as np

from cvop.algorithm import RunConfig, run, sandwich_distances
from cvop.problem import parse_problem, serialize_problem

TOML = """
name = "two_centres_wide_cone"
n = 2
q = 2

[cone]
# the dual cone is spanned by (1, 2) and (2, 1), so C is spanned by (2, -1) and (-1, 2)
dual_generators = [[1.0, 2.0], [2.0, 1.0]]

[[objective]]
kind = "sq_dist"
center = [0.0, 0.0]

[[objective]]
kind = "sq_dist"
center = [2.0, 1.0]

[[constraints]]
kind = "norm2"
center = [1.0, 0.5]
rhs = 1.5

[box]
lower = [-1.0, -1.0]
upper = [3.0, 2.0]
"""

inst = parse_problem(TOML)
print("primal generators of C:\n", inst.cone.primal_generators)

res = run(inst, RunConfig(epsilon=0.02))
d = sandwich_distances(res, inst, tol=0.02 + 1e-6)
print(f"wide cone: {res.status.value} after {res.k} cuts, {len(res.minimizers)} minimizers, "
      f"max outer-to-inner distance {d.max():.4f}")
imgs = res.images[np.argsort(res.images[:, 0])]
print("  front from", imgs[0].round(3), "to", imgs[-1].round(3))

# the same objectives under the usual quadrant order give a longer front
quadrant = parse_problem(TOML.replace("[[1.0, 2.0], [2.0, 1.0]]", "[[1.0, 0.0], [0.0, 1.0]]"))
res = run(quadrant, RunConfig(epsilon=0.02))
imgs = res.images[np.argsort(res.images[:, 0])]
print(f"quadrant: {res.k} cuts, front from", imgs[0].round(3), "to", imgs[-1].round(3))

print("\nround-tripped file:\n" + serialize_problem(inst)[:200] + "...")
