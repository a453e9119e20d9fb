import math

import numpy as np
import pytest

from risisac.geometry import (
    circle_circle_intersect,
    cross2,
    ellipse_line_intersect,
    unit,
)
from risisac.positioning import (
    DegenerateAnchorsError,
    PositioningFailureError,
    _circle_pair_grid,
    _ellipse_line_grid,
    _ray,
    los_pose,
    solve_ris_orientation,
    tdfs,
    tdfs_paths,
)


def _nlos_scene(rng, n_paths=6, candidate_pairs=True):
    """Exact NLoS measurement set for a random BS-facing node pose.

    Scatterers sit on BS-side rays well inside the array's field of view;
    the returned per-path AoA candidate sets optionally include the wrapped
    alternative that a doubled-angle estimate cannot distinguish.
    """
    r = rng.uniform(20.0, 40.0)
    az = math.radians(rng.uniform(-55.0, 55.0))
    p = r * np.array([math.sin(az), math.cos(az)])
    tilt = math.radians(rng.uniform(-25.0, 25.0))
    rot = np.array([[math.cos(tilt), -math.sin(tilt)],
                    [math.sin(tilt), math.cos(tilt)]])
    q = rot @ unit(-p)

    aods, cands, ranges, gains, scats = [], [], [], [], []
    for _ in range(n_paths):
        for _try in range(200):
            rad = rng.uniform(8.0, 45.0)
            saz = math.radians(rng.uniform(-55.0, 55.0))
            s = rad * np.array([math.sin(saz), math.cos(saz)])
            to_p = p - s
            if np.dot(unit(to_p), q) > -0.1:  # in front of the node array
                break
        aod = math.sin(saz)
        phi = cross2(unit(s - p), q)
        length = rad + float(np.linalg.norm(to_p))
        aods.append(aod)
        cands.append([phi, phi - 1.0 if phi > 0 else phi + 1.0]
                     if candidate_pairs else [phi])
        ranges.append(length)
        gains.append((1.0 / length) * np.exp(1j * rng.uniform(0, 2 * np.pi)))
        scats.append(s)
    return p, q, aods, cands, ranges, gains, scats


# -- closed-form LoS pose ------------------------------------------------------


def test_los_pose_inverts_scene_geometry():
    rng = np.random.default_rng(0)
    for _ in range(50):
        r = rng.uniform(10.0, 100.0)
        az = math.radians(rng.uniform(-60.0, 60.0))
        p = r * np.array([math.sin(az), math.cos(az)])
        tilt = math.radians(rng.uniform(-45.0, 45.0))
        rot = np.array([[math.cos(tilt), -math.sin(tilt)],
                        [math.sin(tilt), math.cos(tilt)]])
        q = rot @ unit(-p)
        aod = math.sin(az)
        aoa = cross2(unit(-p), q)
        est = los_pose(r, aod, aoa)
        assert np.linalg.norm(est.position - p) < 1e-9
        assert np.linalg.norm(est.orientation - q) < 1e-9


def test_los_pose_without_aoa_and_bad_range():
    est = los_pose(30.0, 0.5)
    assert est.orientation is None
    assert np.allclose(est.position, 30.0 * _ray(0.5))
    with pytest.raises(ValueError):
        los_pose(0.0, 0.1)


# -- orientation solve ---------------------------------------------------------


def test_solve_ris_orientation_recovers_normal():
    rng = np.random.default_rng(1)
    for _ in range(50):
        ang = rng.uniform(0, 2 * np.pi)
        q = np.array([math.cos(ang), math.sin(ang)])
        a1, a2 = rng.uniform(0, 2 * np.pi, 2)
        l1 = np.array([math.cos(a1), math.sin(a1)])
        l2 = np.array([math.cos(a2), math.sin(a2)])
        if abs(cross2(l1, l2)) < 1e-3:
            continue
        q_hat, res = solve_ris_orientation(l1, l2, cross2(l1, q), cross2(l2, q))
        assert res < 1e-18
        assert min(np.linalg.norm(q_hat - q), np.linalg.norm(q_hat + q)) < 1e-9


def test_solve_ris_orientation_sensitivity_is_linear():
    l1 = np.array([1.0, 0.0])
    l2 = np.array([0.0, 1.0])
    q = unit(np.array([0.6, 0.8]))
    base, _ = solve_ris_orientation(l1, l2, cross2(l1, q), cross2(l2, q))
    for eps in (1e-6, 1e-4):
        pert, _ = solve_ris_orientation(l1, l2, cross2(l1, q) + eps,
                                        cross2(l2, q))
        assert np.linalg.norm(pert - base) < 5.0 * eps


def test_solve_ris_orientation_degenerate_anchors():
    l = np.array([0.6, 0.8])
    with pytest.raises(DegenerateAnchorsError):
        solve_ris_orientation(l, l, 0.1, 0.2)


# -- vectorized grid primitives vs scalar geometry -----------------------------


def test_circle_pair_grid_matches_scalar_intersection():
    rng = np.random.default_rng(2)
    c1 = rng.uniform(-5, 5, (4, 4, 2))
    c2 = rng.uniform(-5, 5, (4, 4, 2))
    r1 = rng.uniform(0.5, 6.0, (4, 4))
    r2 = rng.uniform(0.5, 6.0, (4, 4))
    pts, ok = _circle_pair_grid(c1, r1, c2, r2)
    for i in range(4):
        for j in range(4):
            ref = circle_circle_intersect(c1[i, j], r1[i, j],
                                          c2[i, j], r2[i, j])
            if not ref:
                assert not ok[i, j]
                continue
            assert ok[i, j]
            for k in range(2):
                d = min(np.linalg.norm(pts[k, i, j] - r) for r in ref)
                assert d < 1e-9


def test_ellipse_line_grid_matches_scalar_intersection():
    rng = np.random.default_rng(3)
    p_r = rng.uniform(-10, 10, (5, 5, 2))
    direction = 0.3
    sum_dist = 30.0
    t_pos, t_neg, ok = _ellipse_line_grid(p_r, sum_dist, direction)
    ray = _ray(direction)
    for i in range(5):
        for j in range(5):
            if not ok[i, j]:
                continue
            ref = ellipse_line_intersect(np.zeros(2), p_r[i, j], sum_dist, ray)
            ts = sorted(float(np.dot(pt, ray)) for pt in ref)
            assert sorted([t_pos[i, j], t_neg[i, j]]) == pytest.approx(
                ts, abs=1e-9)


# -- TDFS ----------------------------------------------------------------------


def test_tdfs_input_validation():
    with pytest.raises(ValueError):
        tdfs([0.1], [[0.2]], [10.0], [1.0])
    with pytest.raises(ValueError):
        tdfs([0.1, 0.2], [[0.1], [0.2]], [10.0, 12.0], [1, 1], b=2)
    with pytest.raises(ValueError):
        tdfs([0.1, 0.2], [[0.1], [0.2]], [10.0, 12.0], [1, 1], i_max=0)


def test_tdfs_infeasible_everywhere():
    with pytest.raises(PositioningFailureError):
        tdfs([0.1, 0.3], [[0.2], [0.1]], [10.0, 0.0], [1.0, 1.0], b=20,
             i_max=1)


def test_tdfs_two_paths_reaches_consistent_configuration():
    """With two paths the problem is underdetermined: the search must find a
    configuration that reproduces the measurements (near-zero cost), even
    though the position itself is not identifiable."""
    rng = np.random.default_rng(4)
    p, q, aods, cands, ranges, gains, scats = _nlos_scene(rng, n_paths=2,
                                                          candidate_pairs=False)
    res = tdfs(aods, cands, ranges, gains, b=80, i_max=4)
    assert res.pose.cost < 1e-8
    # the returned configuration reproduces every measurement
    for u in range(2):
        s = res.scatterers[u]
        assert float(np.dot(s, _ray(aods[u]))) == pytest.approx(
            np.linalg.norm(s), rel=1e-6)
        total = np.linalg.norm(s) + np.linalg.norm(res.pose.position - s)
        assert total == pytest.approx(ranges[u], abs=0.05)
        l_u = unit(s - res.pose.position)
        assert cross2(l_u, res.pose.orientation) == pytest.approx(
            cands[u][0], abs=1e-3)


@pytest.mark.parametrize("seed", [1, 11, 30])
def test_tdfs_recovers_pose_from_exact_six_path_scene(seed):
    rng = np.random.default_rng(seed)
    p, q, aods, cands, ranges, gains, scats = _nlos_scene(rng)
    res = tdfs(aods, cands, ranges, gains)
    assert np.linalg.norm(res.pose.position - p) < 0.5
    assert min(np.linalg.norm(res.pose.orientation - q),
               np.linalg.norm(res.pose.orientation + q)) < 0.05
    assert len(res.scatterers) == 6


def test_tdfs_candidate_test_counter_bound():
    rng = np.random.default_rng(12)
    _, _, aods, cands, ranges, gains, _ = _nlos_scene(rng)
    b, i_max = 100, 5
    res = tdfs(aods, cands, ranges, gains, b=b, i_max=i_max)
    assert res.tests <= 4 * i_max * b * b * len(aods)


def test_tdfs_cost_history_monotone():
    rng = np.random.default_rng(12)
    _, _, aods, cands, ranges, gains, _ = _nlos_scene(rng)
    res = tdfs(aods, cands, ranges, gains)
    assert len(res.cost_history) == 5
    assert all(b <= a + 1e-15 for a, b in zip(res.cost_history,
                                              res.cost_history[1:]))


def test_tdfs_pose_invariant_to_gain_scale():
    rng = np.random.default_rng(12)
    _, _, aods, cands, ranges, gains, _ = _nlos_scene(rng)
    r1 = tdfs(aods, cands, ranges, gains)
    r2 = tdfs(aods, cands, ranges, [g * 250.0 for g in gains])
    assert np.allclose(r1.pose.position, r2.pose.position)


def test_tdfs_paths_adapter():
    class Rec:
        def __init__(self, aod, cands, r, g):
            self.aod = aod
            self.aoa_candidates = cands
            self.range_m = r
            self.gain = g

    rng = np.random.default_rng(30)
    p, _, aods, cands, ranges, gains, _ = _nlos_scene(rng)
    recs = [Rec(a, c, r, g) for a, c, r, g in zip(aods, cands, ranges, gains)]
    res = tdfs_paths(recs)
    assert np.linalg.norm(res.pose.position - p) < 0.5
