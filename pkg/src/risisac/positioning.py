"""Positioning and array-orientation estimation from training results.

LoS links position a node in closed form from the first path's direction and
range.  NLoS links use an iterative bracketed grid search over the ranges of
two anchor scatterers; every other unknown (the node position, its
orientation, the remaining scatterers) is resolved geometrically per grid
cell, so each cell costs a fixed small number of candidate tests.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import (
    DegenerateGeometryError,
    circle_circle_intersect,
    cross2,
    ellipse_line_intersect,
    unit,
)


class DegenerateAnchorsError(ValueError):
    """The two anchor directions are parallel; orientation is unobservable."""


class PositioningFailureError(RuntimeError):
    """No geometrically feasible candidate anywhere on the search grid."""


@dataclass
class PoseEstimate:
    """Estimated 2-D position, unit array normal, and final objective value."""

    position: np.ndarray
    orientation: np.ndarray | None
    cost: float


@dataclass
class TdfsResult:
    pose: PoseEstimate
    scatterers: list
    tests: int                    # instrumented candidate-test count
    cost_history: list            # best-so-far cost after each iteration


def _ray(direction: float) -> np.ndarray:
    """Unit vector at spatial direction ``direction`` off the BS normal."""
    return np.array([direction, np.sqrt(max(0.0, 1.0 - direction**2))])


def los_pose(range_m: float, aod: float, aoa: float | None = None) -> PoseEstimate:
    """Closed-form pose of a node seen through a line-of-sight first path.

    Position is ``range_m`` along the BS-side direction ``aod``; when the
    node-side arrival direction ``aoa`` is given, the array normal is the
    BS-pointing unit vector rotated by asin(aoa).
    """
    if range_m <= 0:
        raise ValueError(f"range must be positive, got {range_m}")
    p = range_m * _ray(aod)
    q = None
    if aoa is not None:
        c = np.sqrt(max(0.0, 1.0 - aoa**2))
        rot = np.array([[c, -aoa], [aoa, c]])
        q = rot @ (-p / np.linalg.norm(p))
    return PoseEstimate(p, q, 0.0)


def solve_ris_orientation(l1: np.ndarray, l2: np.ndarray, phi1: float,
                          phi2: float, weights=(1.0, 1.0),
                          tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Unit array normal from two scatterer directions and their arrival angles.

    Solves the 2x2 linear system cross(l_u, q) = phi_u, normalizes, and
    returns (q_hat, weighted residual of the angle fit at q_hat).
    """
    l1 = np.asarray(l1, float)
    l2 = np.asarray(l2, float)
    det = cross2(l1, l2)
    if abs(det) < tol:
        raise DegenerateAnchorsError("parallel anchor directions")
    qx = (phi1 * l2[0] - phi2 * l1[0]) / det
    qy = (phi1 * l2[1] - phi2 * l1[1]) / det
    q = np.array([qx, qy])
    nrm = np.linalg.norm(q)
    if nrm < tol:
        # both angles zero: the normal lies along either solution of the
        # homogeneous system; pick the bisector-orthogonal convention
        q = unit(l1 + l2)
        nrm = 1.0
    q = q / np.linalg.norm(q)
    res = (weights[0] * abs(phi1 - cross2(l1, q)) ** 2
           + weights[1] * abs(phi2 - cross2(l2, q)) ** 2)
    return q, float(res)


# -- vectorized grid-cell primitives (cross-checked against the scalar
#    intersection operations in the tests) ---------------------------------


def _circle_pair_grid(c1, r1, c2, r2, tol=1e-9):
    """Both intersection points for a (B, B) grid of circle pairs.

    Returns (points, feasible) with points shape (2, B, B, 2); infeasible
    cells are flagged False and their points are NaN.
    """
    d = np.hypot(c2[..., 0] - c1[..., 0], c2[..., 1] - c1[..., 1])
    ok = (d > tol) & (d <= r1 + r2 + tol) & (d >= np.abs(r1 - r2) - tol)
    with np.errstate(invalid="ignore", divide="ignore"):
        a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
        h2 = r1 * r1 - a * a
        h = np.sqrt(np.clip(h2, 0.0, None))
        ux = (c2[..., 0] - c1[..., 0]) / d
        uy = (c2[..., 1] - c1[..., 1]) / d
    base_x = c1[..., 0] + a * ux
    base_y = c1[..., 1] + a * uy
    pts = np.full((2,) + d.shape + (2,), np.nan)
    pts[0, ..., 0] = base_x - h * uy
    pts[0, ..., 1] = base_y + h * ux
    pts[1, ..., 0] = base_x + h * uy
    pts[1, ..., 1] = base_y - h * ux
    ok = ok & (h2 >= -tol)
    return pts, ok


def _orientation_grid(l1, l2, phi1, phi2, w1, w2, tol=1e-9):
    """Vectorized form of solve_ris_orientation on stacked unit directions."""
    det = l1[..., 0] * l2[..., 1] - l1[..., 1] * l2[..., 0]
    ok = np.abs(det) > tol
    safe = np.where(ok, det, 1.0)
    qx = (phi1 * l2[..., 0] - phi2 * l1[..., 0]) / safe
    qy = (phi1 * l2[..., 1] - phi2 * l1[..., 1]) / safe
    nrm = np.hypot(qx, qy)
    ok = ok & (nrm > tol)
    nrm = np.where(ok, nrm, 1.0)
    qx, qy = qx / nrm, qy / nrm
    c1 = l1[..., 0] * qy - l1[..., 1] * qx
    c2 = l2[..., 0] * qy - l2[..., 1] * qx
    res = w1 * (phi1 - c1) ** 2 + w2 * (phi2 - c2) ** 2
    res = np.where(ok, res, np.inf)
    return qx, qy, res


def _ellipse_line_grid(p_r, sum_dist, direction, tol=1e-9):
    """Intersections of the line t * ray(direction) with ellipses of foci
    (origin, p_r) and focal sum ``sum_dist``, vectorized over p_r grids.

    Returns (t_pos, t_neg, feasible): the nonnegative and nonpositive line
    parameters (closed form specializing to a focus-anchored line).
    """
    ray = _ray(direction)
    g = p_r[..., 0] * ray[0] + p_r[..., 1] * ray[1]
    psq = p_r[..., 0] ** 2 + p_r[..., 1] ** 2
    r = sum_dist
    ok = r * r > psq + tol
    with np.errstate(invalid="ignore", divide="ignore"):
        t_pos = (r * r - psq) / (2.0 * (r - g))
        t_neg = (psq - r * r) / (2.0 * (r + g))
    return t_pos, t_neg, ok


def tdfs(aods, aoa_candidate_sets, ranges, gains, b: int = 100, i_max: int = 5
         ) -> TdfsResult:
    """Two-anchor bracketed grid search for an NLoS node pose.

    Parameters are per detected path: BS-side directions, sets of <=2
    node-side direction candidates, total polyline ranges, and complex gains
    (used as squared-magnitude weights).  The first two paths anchor the
    search; per grid cell the node position comes from a circle-circle
    intersection, the orientation from the two-anchor linear solve, and each
    remaining scatterer from an ellipse-line intersection.
    """
    l_hat = len(aods)
    if l_hat < 2:
        raise ValueError("need at least two paths to anchor the search")
    if b < 3 or i_max < 1:
        raise ValueError("grid size must be >= 3 and iterations >= 1")
    aods = np.asarray(aods, float)
    ranges = np.asarray(ranges, float)
    w = np.abs(np.asarray(gains)) ** 2
    cand = [np.asarray(c, float) for c in aoa_candidate_sets]

    ray1, ray2 = _ray(aods[0]), _ray(aods[1])
    rl1, rr1 = 0.0, ranges[0]
    rl2, rr2 = 0.0, ranges[1]

    tests = 0
    best = None  # (cost, position, orientation, s1, s2)
    history = []

    for _ in range(i_max):
        psi1 = np.linspace(rl1, rr1, b)
        psi2 = np.linspace(rl2, rr2, b)
        s1 = psi1[:, None, None] * ray1[None, None, :]          # (B,1,2)
        s2 = psi2[None, :, None] * ray2[None, None, :]          # (1,B,2)
        rs1 = (ranges[0] - psi1)[:, None]
        rs2 = (ranges[1] - psi2)[None, :]
        feas = (rs1 > 0) & (rs2 > 0) & (psi1[:, None] > 0) & (psi2[None, :] > 0)

        c1 = np.broadcast_to(s1, (b, b, 2))
        c2 = np.broadcast_to(s2, (b, b, 2))
        pts, ok = _circle_pair_grid(c1, np.broadcast_to(rs1, (b, b)),
                                    c2, np.broadcast_to(rs2, (b, b)))
        feas = feas & ok

        h_cell = np.full((b, b), np.inf)
        qx_cell = np.zeros((b, b))
        qy_cell = np.zeros((b, b))
        px_cell = np.full((b, b), np.nan)
        py_cell = np.full((b, b), np.nan)
        for pi in range(2):
            p = pts[pi]
            with np.errstate(invalid="ignore", divide="ignore"):
                d1 = c1 - p
                d2 = c2 - p
                l1 = d1 / np.linalg.norm(d1, axis=-1, keepdims=True)
                l2 = d2 / np.linalg.norm(d2, axis=-1, keepdims=True)
            for phi1 in cand[0]:
                for phi2 in cand[1]:
                    qx, qy, res = _orientation_grid(l1, l2, phi1, phi2,
                                                    w[0], w[1])
                    res = np.where(feas, res, np.inf)
                    tests += int(np.count_nonzero(feas))
                    upd = res < h_cell
                    h_cell = np.where(upd, res, h_cell)
                    qx_cell = np.where(upd, qx, qx_cell)
                    qy_cell = np.where(upd, qy, qy_cell)
                    px_cell = np.where(upd, p[..., 0], px_cell)
                    py_cell = np.where(upd, p[..., 1], py_cell)

        cell_ok = np.isfinite(h_cell)
        total = h_cell.copy()
        p_grid = np.stack([px_cell, py_cell], axis=-1)
        best_su = []
        for u in range(2, l_hat):
            t_pos, t_neg, e_ok = _ellipse_line_grid(p_grid, ranges[u], aods[u])
            ray_u = _ray(aods[u])
            h_u = np.full((b, b), np.inf)
            su_x = np.full((b, b), np.nan)
            su_y = np.full((b, b), np.nan)
            for t in (t_pos, t_neg):
                su = t[..., None] * ray_u[None, None, :]
                with np.errstate(invalid="ignore", divide="ignore"):
                    du = su - p_grid
                    lu = du / np.linalg.norm(du, axis=-1, keepdims=True)
                phi_t = lu[..., 0] * qy_cell - lu[..., 1] * qx_cell
                for phi_u in cand[u]:
                    res = w[u] * (phi_u - phi_t) ** 2
                    res = np.where(cell_ok & e_ok, res, np.inf)
                    tests += int(np.count_nonzero(cell_ok & e_ok))
                    upd = res < h_u
                    h_u = np.where(upd, res, h_u)
                    su_x = np.where(upd, su[..., 0], su_x)
                    su_y = np.where(upd, su[..., 1], su_y)
            total = total + h_u
            best_su.append((su_x, su_y))

        if np.all(np.isinf(total)):
            history.append(np.inf if best is None else best[0])
            # keep shrinking around the previous best if one exists
            if best is None:
                raise PositioningFailureError(
                    "no feasible candidate anywhere on the search grid")
            continue
        bi, di = np.unravel_index(int(np.argmin(total)), total.shape)
        cost = float(total[bi, di])
        if best is None or cost < best[0]:
            scat = [psi1[bi] * ray1, psi2[di] * ray2]
            scat += [np.array([sx[bi, di], sy[bi, di]]) for sx, sy in best_su]
            best = (cost, np.array([px_cell[bi, di], py_cell[bi, di]]),
                    np.array([qx_cell[bi, di], qy_cell[bi, di]]), scat)
        history.append(best[0])
        lo1, hi1 = max(bi - 1, 0), min(bi + 1, b - 1)
        lo2, hi2 = max(di - 1, 0), min(di + 1, b - 1)
        rl1, rr1 = psi1[lo1], psi1[hi1]
        rl2, rr2 = psi2[lo2], psi2[hi2]

    cost, pos, q, scat = best
    return TdfsResult(PoseEstimate(pos, q / np.linalg.norm(q), cost),
                      scat, tests, history)


def tdfs_paths(paths, b: int = 100, i_max: int = 5) -> TdfsResult:
    """Run :func:`tdfs` on a list of estimated path records.

    Each record needs ``aod``, ``aoa_candidates``, ``range_m``, and ``gain``
    attributes (duck typed, so training-result dataclasses plug in directly).
    """
    return tdfs([p.aod for p in paths],
                [p.aoa_candidates for p in paths],
                [p.range_m for p in paths],
                [p.gain for p in paths], b=b, i_max=i_max)
