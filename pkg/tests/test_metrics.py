import math

import numpy as np
import pytest
from scipy.spatial import distance

from cvop.geometry import Halfspace, NormSpec
from cvop.metrics import (CSV_HEADER, InsufficientData, IterationRecord, LogFormatError,
                          fit_power_law, fit_slope, hausdorff_after_cut, hausdorff_consecutive,
                          log_to_csv, min_enclosing_ball, rate_constants, read_log_csv,
                          theoretical_curve, theoretical_exponent, unit_ball_volume,
                          write_log_csv)
from cvop.vertex_enum import HPolytope, cut_update, enumerate_brute

S2 = math.sqrt(2.0)


def square():
    return HPolytope([Halfspace([1, 0], 0), Halfspace([0, 1], 0),
                      Halfspace([-1, 0], -1), Halfspace([0, -1], -1)])


def _records(ds, start=0):
    return [IterationRecord(k, d, 4, 1, 3, d) for k, d in enumerate(ds, start=start)]


def test_hausdorff_identical_is_zero():
    v = enumerate_brute(square())
    assert hausdorff_consecutive(v, v) == 0.0


@pytest.mark.parametrize("cut,expected", [(Halfspace([1, 1], 0.5), 0.5 / S2), (Halfspace([1, 0], 0.25), 0.25)])
def test_hausdorff_square_cuts(cut, expected):
    p = square()
    v0 = enumerate_brute(p)
    v1, p1 = cut_update(v0, p, cut)
    assert hausdorff_consecutive(v0, v1) == pytest.approx(expected, abs=1e-8)
    assert hausdorff_consecutive(v0, v1, prev_h=p) == pytest.approx(expected, abs=1e-8)
    assert hausdorff_after_cut(v0, p1, v1) == pytest.approx(expected, abs=1e-8)


def test_hausdorff_other_norms():
    p = square()
    v0 = enumerate_brute(p)
    v1, p1 = cut_update(v0, p, Halfspace([1, 1], 0.5))
    # distance from the origin to the line y1 + y2 = 0.5
    assert hausdorff_after_cut(v0, p1, v1, NormSpec.L1) == pytest.approx(0.5, abs=1e-8)
    assert hausdorff_after_cut(v0, p1, v1, NormSpec.LINF) == pytest.approx(0.25, abs=1e-8)
    assert hausdorff_consecutive(v0, v1, NormSpec.LINF) == pytest.approx(0.25, abs=1e-8)


def test_hausdorff_rejects_non_nested():
    v0 = enumerate_brute(square())
    shifted = enumerate_brute(HPolytope([Halfspace([1, 0], 0.5), Halfspace([0, 1], 0),
                                         Halfspace([-1, 0], -1.5), Halfspace([0, -1], -1)]))
    with pytest.raises(ValueError, match="nested"):
        hausdorff_consecutive(v0, shifted)
    with pytest.raises(ValueError, match="nested"):
        hausdorff_consecutive(v0, shifted, prev_h=square())


def test_hausdorff_random_cuts_against_sampling():
    # brute force: max over a fine sample of prev of the distance to cur (exact for 2-D via vertices)
    rng = np.random.default_rng(4)
    for _ in range(5):
        p = square()
        v0 = enumerate_brute(p)
        w = rng.normal(size=2)
        h = Halfspace(w, float(w @ (rng.dirichlet(np.ones(4)) @ v0.vertices)))
        v1, p1 = cut_update(v0, p, h)
        # nearest point of a convex polygon: check every edge of cur
        from scipy.spatial import ConvexHull
        hull = ConvexHull(v1.vertices) if len(v1) >= 3 else None
        edges = ([(v1.vertices[a], v1.vertices[b]) for a, b in hull.simplices] if hull is not None
                 else [(v1.vertices[0], v1.vertices[-1])])
        ref = 0.0
        for y in v0.vertices:
            if np.all(p1.A @ y - p1.b >= -1e-12):
                continue
            best = np.inf
            for a, b in edges:
                t = np.clip((y - a) @ (b - a) / max((b - a) @ (b - a), 1e-300), 0, 1)
                best = min(best, np.linalg.norm(y - (a + t * (b - a))))
            ref = max(ref, best)
        assert hausdorff_after_cut(v0, p1, v1) == pytest.approx(ref, abs=1e-7)


@pytest.mark.parametrize("pts,center,radius", [
    ([[0, 0], [2, 0]], [1, 0], 1.0),
    ([[0, 0], [1, 0], [0, 1], [1, 1]], [0.5, 0.5], S2 / 2),
    ([[3, 4]], [3, 4], 0.0),
])
def test_min_enclosing_ball_examples(pts, center, radius):
    b = min_enclosing_ball(pts)
    np.testing.assert_allclose(b.center, center, atol=1e-6)
    assert b.radius == pytest.approx(radius, abs=1e-9)


def test_min_enclosing_ball_vs_brute_force():
    # for a planar set the optimal circle is fixed by 2 or 3 of the points
    rng = np.random.default_rng(8)
    for _ in range(10):
        P = rng.normal(size=(7, 2))
        best = np.inf
        for i in range(7):
            for j in range(i + 1, 7):
                c = 0.5 * (P[i] + P[j])
                r = np.linalg.norm(P - c, axis=1).max()
                best = min(best, r)
                for k in range(j + 1, 7):
                    a, b2, c3 = P[i], P[j], P[k]
                    M = 2 * np.array([b2 - a, c3 - a])
                    if abs(np.linalg.det(M)) < 1e-12:
                        continue
                    cc = np.linalg.solve(M, [b2 @ b2 - a @ a, c3 @ c3 - a @ a])
                    best = min(best, np.linalg.norm(P - cc, axis=1).max())
        got = min_enclosing_ball(P)
        assert got.radius == pytest.approx(best, abs=1e-8)
        assert distance.cdist([got.center], P).max() <= got.radius + 1e-12


def test_rate_constants():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert unit_ball_volume(1) == pytest.approx(2.0)
    rc = rate_constants([[0, 0], [1, 0], [0, 1], [1, 1]])
    assert rc.R == pytest.approx(S2 / 2, abs=1e-9)
    assert rc.theoretical_exponent == -2.0
    assert rc.lambda_bar == pytest.approx(16 * rc.R * (2 * math.pi / 2) ** 2)
    assert rc.R_is_upper_bound
    with pytest.raises(ValueError):
        rate_constants([[1.0, 1.0]])


def test_theoretical_exponent_and_curve():
    assert theoretical_exponent(2, True) == -2.0
    assert theoretical_exponent(3, False) == -0.5
    with pytest.raises(ValueError):
        theoretical_exponent(1, True)
    assert theoretical_curve(2, True, 1.5, [2])[0] == pytest.approx(0.375)
    assert theoretical_curve(3, True, 2.5, [5])[0] == pytest.approx(0.5)
    assert theoretical_curve(4, True, 4.0, [8])[0] == pytest.approx(1.0)


def test_fit_exact_power_law():
    ks = np.arange(0, 200)
    fit = fit_slope(_records(1.5 * np.maximum(ks, 1) ** -2.0))
    assert fit.slope == pytest.approx(-2.0, abs=1e-9)
    assert fit.intercept == pytest.approx(math.log(1.5), abs=1e-9)
    assert fit.r2 == pytest.approx(1.0)
    # k = 0 dropped, then 20% of the 199 usable records
    assert fit.n_used == 199 - 39


def test_fit_noisy_power_law():
    rng = np.random.default_rng(0)
    ks = np.arange(1, 301)
    ds = 25.0 / ks * (1 + 0.01 * rng.normal(size=ks.size))
    fit = fit_power_law(ks, ds)
    assert fit.slope == pytest.approx(-1.0, abs=0.02)


def test_fit_insufficient_data():
    with pytest.raises(InsufficientData):
        fit_slope(_records(np.zeros(50)))
    with pytest.raises(InsufficientData):
        fit_slope(_records(np.ones(9), start=1))
    with pytest.raises(ValueError):
        fit_power_law(np.arange(1, 20), np.ones(19), burn_in=1.0)


def test_csv_round_trip(tmp_path):
    log = [IterationRecord(0, 0.1, 4, 4, 0, 0.1, 0.05, 0.0123),
           IterationRecord(1, 1 / 3, 5, 2, 3, 1 / 3, None, 1e-5)]
    text = log_to_csv(log)
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert "0.33333333333333331" in text
    path = tmp_path / "log.csv"
    write_log_csv(path, log)
    assert path.read_bytes() == text.encode()
    back = read_log_csv(path)
    assert back[1].max_dist == 1 / 3
    assert back[1].hausdorff_consecutive is None
    assert back[0].hausdorff_consecutive == 0.05
    assert back[0].wall_time == pytest.approx(0.0123)
    assert log_to_csv(back) == text


@pytest.mark.parametrize("content,match", [
    ("", "header"),
    (",".join(CSV_HEADER) + "\n", "no records"),
    ("k,foo\n1,2\n", "header"),
    (",".join(CSV_HEADER) + "\n1,2,3\n", "fields"),
    (",".join(CSV_HEADER) + "\n1,abc,,4,1,3,0.1\n", "line 2"),
])
def test_read_log_errors(tmp_path, content, match):
    path = tmp_path / "log.csv"
    path.write_text(content)
    with pytest.raises(LogFormatError, match=match):
        read_log_csv(path)
    with pytest.raises(LogFormatError):
        read_log_csv(tmp_path / "absent.csv")
