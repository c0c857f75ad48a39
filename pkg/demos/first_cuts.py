"""Walk through the first few iterations on the unit-ball problem in the plane.

The upper image of Example 1 (q = 2) is the disc of radius 1 around (1, 1) plus the
nonnegative quadrant. Its closest point to the origin is (1 - 1/sqrt 2)(1, 1), so the first
vertex to be cut sits at distance sqrt 2 - 1 and the first normal is the diagonal.

    python demos/first_cuts.py
"""

import numpy as np

from cvop.algorithm import RunConfig, StepOutcome, initialize, run, sandwich_distances, step
from cvop.problem import builtin

np.set_printoptions(precision=5, suppress=True)

inst = builtin("example1_q2")
cfg = RunConfig(epsilon=0.01, threads=1)

state = initialize(inst, cfg)
print(f"beta = {state.beta:.6f}, gamma = {state.gamma:.6f}, w_bar = {state.w_bar}")
print("initial vertices:\n", state.vrep.vertices)

for _ in range(4):
    state, outcome, cut = step(state, inst, cfg)
    if outcome is not StepOutcome.CUT:
        break
    h = cut.halfspace
    print(f"\ncut {cut.k}: vertex {cut.vertex}, distance {cut.distance:.8f}")
    print(f"  normal {h.normal}, offset {h.offset:.6f}, {len(state.vrep)} vertices now")

print(f"\nanalytic first distance sqrt(2) - 1 = {np.sqrt(2) - 1:.8f}")

# run to termination and check that every outer vertex is eps-close to the inner hull
res = run(inst, cfg)
d = sandwich_distances(res, inst, tol=cfg.epsilon + 1e-6)
print(f"\nconverged after {res.k} cuts with {len(res.minimizers)} minimizers")
print(f"largest outer-to-inner distance {d.max():.5f} (eps = {cfg.epsilon})")
