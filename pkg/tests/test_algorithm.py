import numpy as np
import pytest

import cvop.algorithm as algo
from cvop.algorithm import (Mode, RunConfig, Status, StepOutcome, initialize, outer_violation, run,
                            sandwich_distances, step)
from cvop.geometry import Halfspace, PolyCone
from cvop.metrics import hausdorff_consecutive
from cvop.problem import Affine, CvopInstance, ProblemError, builtin

S2 = np.sqrt(2.0)


def test_initialize_ball_q2():
    inst = builtin("example1_q2")
    s = initialize(inst, RunConfig(epsilon=0.01))
    np.testing.assert_allclose(s.w_bar, np.ones(2) / S2)
    assert s.beta >= S2 + 1
    assert s.gamma > s.beta + (S2 - 1)
    assert s.gamma == pytest.approx(s.beta + (S2 - 1), abs=1e-5 * (1 + s.beta))
    corner = s.gamma * S2
    np.testing.assert_allclose(s.vrep.vertices, [[0, 0], [0, corner], [corner, 0]], atol=1e-8)
    np.testing.assert_allclose(s.minimizers, [[0, 1], [1, 0]], atol=1e-6)


def test_initialize_ball_q3():
    s = initialize(builtin("example1_q3"), RunConfig(epsilon=0.01))
    assert any(np.allclose(v, 0, atol=1e-9) for v in s.vrep.vertices)
    assert len(s.vrep) == 4


def test_collapsed_box_rejected_before_solving(monkeypatch):
    calls = []
    monkeypatch.setattr(algo, "solve_weighted_sum", lambda *a, **k: calls.append(a))
    with pytest.raises(ProblemError):
        CvopInstance(2, 2, [Affine([1, 0]), Affine([0, 1])], [], [0.0, 1.0], [1.0, 1.0],
                     PolyCone.orthant(2))
    assert calls == []


def test_first_cut_ball_q2():
    inst = builtin("example1_q2")
    cfg = RunConfig(epsilon=0.01)
    s = initialize(inst, cfg)
    n_before = len(s.vrep)
    s, outcome, cut = step(s, inst, cfg)
    assert outcome is StepOutcome.CUT
    np.testing.assert_allclose(cut.vertex, [0, 0], atol=1e-12)
    np.testing.assert_allclose(cut.halfspace.normal, np.ones(2) / S2, atol=1e-6)
    np.testing.assert_allclose(cut.solution.y, (1 - 1 / S2) * np.ones(2), atol=1e-6)
    assert cut.distance == pytest.approx(S2 - 1, abs=1e-6)
    assert len(s.vrep) == n_before + 1
    # the cut line meets the axes at 2 - sqrt(2)
    a = 2 - S2
    for p in ([0, a], [a, 0]):
        assert np.min(np.linalg.norm(s.vrep.vertices - p, axis=1)) <= 1e-6
    assert not any(np.allclose(v, 0, atol=1e-9) for v in s.vrep.vertices)


def test_large_epsilon_gives_no_cuts():
    res = run(builtin("example1_q2"), RunConfig(epsilon=1.0))
    assert res.status is Status.CONVERGED
    assert res.cuts == [] and res.k == 0
    assert len(res.log) == 1
    assert len(res.minimizers) >= 2


def test_converged_step_leaves_outer_unchanged():
    inst = builtin("example1_q2")
    cfg = RunConfig(epsilon=0.5)
    s = initialize(inst, cfg)
    before = s.vrep.vertices.copy()
    s, outcome, cut = step(s, inst, cfg)
    assert outcome is StepOutcome.CONVERGED and cut is None
    np.testing.assert_array_equal(s.vrep.vertices, before)


def test_cache_prevents_resolving(monkeypatch):
    inst = builtin("example1_q2")
    cfg = RunConfig(epsilon=1e-3)
    s = initialize(inst, cfg)
    seen = []
    real = algo.solve_modified

    def spy(inst_, v, *a, **k):
        seen.append(s.key(v))
        return real(inst_, v, *a, **k)

    monkeypatch.setattr(algo, "solve_modified", spy)
    for _ in range(8):
        cached = set(s.v_known) | set(s.v_known2)
        n_seen = len(seen)
        s, outcome, _ = step(s, inst, cfg)
        new_keys = seen[n_seen:]
        assert not cached.intersection(new_keys)
        rec = s.log[-1]
        assert rec.n_solves == len(new_keys)
        assert rec.n_cache_hits == rec.n_vertices - rec.n_solves
    assert any(r.n_cache_hits > 0 for r in s.log[1:])
    assert s.v_known2


def test_tie_break_picks_lexicographically_smallest(monkeypatch):
    inst = builtin("example1_q2")
    cfg = RunConfig(epsilon=1e-3)
    s = initialize(inst, cfg)
    real = algo.solve_modified

    def flat(inst_, v, *a, **k):
        sol = real(inst_, v, *a, **k)
        sol.objective_value = 1.0
        return sol

    monkeypatch.setattr(algo, "solve_modified", flat)
    # every vertex reports the same distance; (0, 0) is the smallest of the three
    s, _, cut = step(s, inst, cfg)
    np.testing.assert_allclose(cut.vertex, [0, 0], atol=1e-12)


def test_indefinite_mode_counts_and_nesting():
    inst = builtin("example1_q2")
    res = run(inst, RunConfig.indefinite(20, keep_history=True, track_hausdorff=True))
    assert res.status is Status.CUTS_DONE
    assert len(res.cuts) == 20 and len(res.log) == 20
    assert [r.k for r in res.log] == list(range(20))
    hist = res.state.history
    assert len(hist) == 21
    for a, b in zip(hist, hist[1:]):
        hausdorff_consecutive(a, b, prev_h=None)
    for r in res.log:
        d = r.max_dist
        assert abs(r.hausdorff_consecutive - d) <= 1e-5 * (1 + d)


def test_indefinite_mode_stops_on_polyhedral_image():
    # linear objectives over a box: the upper image is an orthant translate, already P_0
    inst = CvopInstance(2, 2, [Affine([1, 0]), Affine([0, 1])], [], [0.0, 0.0], [1.0, 1.0],
                        PolyCone.orthant(2))
    res = run(inst, RunConfig.indefinite(5))
    assert res.status is Status.POLYHEDRAL
    assert res.cuts == []


def test_iteration_cap():
    res = run(builtin("example1_q2"), RunConfig(epsilon=1e-6, max_iters=3))
    assert res.status is Status.CAP
    assert res.k == 3


def test_threads_do_not_change_result():
    inst = builtin("example2")
    a = run(inst, RunConfig.indefinite(6, threads=1))
    b = run(inst, RunConfig.indefinite(6, threads=3))
    np.testing.assert_array_equal(a.vertices.vertices, b.vertices.vertices)
    assert [r.max_dist for r in a.log] == [r.max_dist for r in b.log]


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        RunConfig(epsilon=0.1, mode=Mode.INDEFINITE)
    with pytest.raises(ValueError):
        RunConfig(epsilon=0.1, threads=0)


def test_small_run_sandwich_and_cut_validity():
    inst = builtin("example1_q2")
    res = run(inst, RunConfig(epsilon=0.05))
    assert res.status is Status.CONVERGED
    d = sandwich_distances(res, inst)
    assert d.max() <= 0.05 + 1e-6
    d_fast = sandwich_distances(res, inst, tol=0.05 + 1e-6)
    assert d_fast.max() <= 0.05 + 1e-6
    xs = inst.sample_feasible(300, np.random.default_rng(0))
    Y = np.array([inst.gamma_map(x) for x in xs])
    assert outer_violation([c.halfspace for c in res.cuts], Y, inst.norm) <= 1e-6
    assert outer_violation([Halfspace([1, 1], 100.0)], Y, inst.norm) > 1


def test_minimizers_are_feasible_and_images_match():
    inst = builtin("example2")
    res = run(inst, RunConfig(epsilon=0.5))
    for x, y in zip(res.minimizers, res.images):
        assert inst.is_feasible(x, 1e-7)
        np.testing.assert_allclose(inst.gamma_map(x), y)
