"""2-D scene construction and the geometric primitives used by positioning.

The BS sits at the origin with its array along the x-axis and array normal
+y.  Spatial directions are sines of angles off an array's normal; for a unit
ray ``d`` leaving an array with unit normal ``q`` the spatial direction is the
2-D cross product d_x*q_y - d_y*q_x, which is the convention every other
module relies on.
"""

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

C_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Raised when a scene configuration violates its invariants."""


class GenerationError(RuntimeError):
    """Raised when a feasible random scene cannot be drawn."""


class DegenerateGeometryError(ValueError):
    """Raised for degenerate intersection problems (e.g. concentric circles)."""


class InvalidEllipseError(ValueError):
    """Raised when the focal-sum constant does not define an ellipse."""


def cross2(a, b) -> float:
    """z-component of the 2-D cross product a x b."""
    return a[0] * b[1] - a[1] * b[0]


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def spatial_direction(origin: np.ndarray, normal: np.ndarray, target: np.ndarray) -> float:
    """Spatial direction (sine off broadside) of the ray origin -> target."""
    d = unit(np.asarray(target, float) - np.asarray(origin, float))
    return float(cross2(d, normal))


@dataclass(frozen=True)
class Pose:
    """Position (meters) and unit array-normal orientation of a node."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(2)
        q = np.asarray(self.orientation, dtype=float).reshape(2)
        nq = np.linalg.norm(q)
        if not math.isclose(nq, 1.0, abs_tol=1e-9):
            q = q / nq
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)


@dataclass
class SceneConfig:
    """Flat scene/system configuration.

    Powers in dBm, frequencies in Hz, distances in meters.  ``noise_power_dbm``
    of None means a noiseless simulation.  ``case`` follows the eight-way
    LoS/NLoS taxonomy: (BS-UT, BS-RIS, RIS-UT) are LoS for cases
    (1-4, 1/2/5/6, odd) respectively.
    """

    n_t: int = 64
    n_r: int = 16
    n_ris: int = 128
    n_ut: int = 16
    m: int = 128
    delta_f: float = 120e3
    f_c: float = 26.5e9
    t_s: float | None = None  # defaults to 1/delta_f
    tx_power_dbm: float = 50.0
    noise_power_dbm: float | None = -103.0
    l_br: int = 3
    l_bu: int = 3
    l_ru: int = 1
    n_targets: int = 6
    case: int = 1
    r_br_min: float = 20.0
    r_br_max: float = 40.0
    r_bu_min: float = 50.0
    r_bu_max: float = 150.0
    r_tar_min: float = 50.0
    r_tar_max: float = 150.0
    rcs_min_dbsm: float = -15.0
    rcs_max_dbsm: float = 10.0
    v_min: float = 10.0
    v_max: float = 30.0
    seed: int = 0

    @property
    def wavelength(self) -> float:
        return C_LIGHT / self.f_c

    @property
    def symbol_duration(self) -> float:
        return self.t_s if self.t_s is not None else 1.0 / self.delta_f

    def los_flags(self) -> tuple[bool, bool, bool]:
        """(BS-UT, BS-RIS, RIS-UT) LoS presence for this case id."""
        c = self.case
        return (c in (1, 2, 3, 4), c in (1, 2, 5, 6), c % 2 == 1)

    def validate(self) -> None:
        if not 1 <= self.case <= 8:
            raise ConfigError(f"case must be in 1..8, got {self.case}")
        for name in ("n_t", "n_r", "n_ris", "n_ut", "l_br", "l_bu", "l_ru"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_targets < 0:
            raise ConfigError(f"n_targets must be >= 0, got {self.n_targets}")
        if self.m < 2:
            raise ConfigError(f"m must be >= 2, got {self.m}")
        if self.n_ris < self.n_ut + 2:
            raise ConfigError(
                f"n_ris must be >= n_ut + 2 (got n_ris={self.n_ris}, n_ut={self.n_ut})"
            )
        if self.delta_f <= 0 or self.f_c <= 0:
            raise ConfigError("delta_f and f_c must be positive")

    # -- plain-text key-value serialization ------------------------------

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'' if v is None else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SceneConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for ln, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"line {ln}: unknown key {key!r}")
            kwargs[key] = _parse_value(known[key].type, val)
        return cls(**kwargs)

    def to_file(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_file(cls, path) -> "SceneConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())


def _parse_value(ftype: str, val: str):
    if val == "":
        return None
    if "int" in str(ftype):
        return int(val)
    return float(val)


@dataclass
class PathParams:
    """One propagation path of a point-to-point link."""

    gain: complex
    delay: float  # seconds, one-way polyline length / c
    aod: float  # spatial direction at the link's source array
    aoa: float  # spatial direction at the link's destination array
    scatterer: np.ndarray | None = None  # None for the LoS path
    length: float = 0.0  # polyline length in meters

    @property
    def is_los(self) -> bool:
        return self.scatterer is None


@dataclass
class TargetParams:
    gain: complex
    range_m: float
    velocity: float  # radial, positive toward the BS
    angle: float  # spatial direction seen from the BS
    doppler: float  # 2 v / lambda, Hz

    @property
    def position(self) -> np.ndarray:
        t = self.angle
        return self.range_m * np.array([t, math.sqrt(1.0 - t * t)])

    @property
    def delay(self) -> float:
        return 2.0 * self.range_m / C_LIGHT


@dataclass
class Scene:
    """Ground-truth scene: poses, per-link paths, and targets."""

    cfg: SceneConfig
    bs: Pose
    ris: Pose
    ut: Pose
    bs_ris: list[PathParams]
    bs_ut: list[PathParams]
    ris_ut: list[PathParams]
    targets: list[TargetParams]

    @property
    def wavelength(self) -> float:
        return self.cfg.wavelength


def min_delay_separation_m(cfg: SceneConfig) -> float:
    """Minimum path-length separation enforced at synthesis (two delay cells)."""
    return C_LIGHT / (2.0 * cfg.m * cfg.delta_f)


def _draw_pose(rng, r_lo, r_hi, max_boresight_deg=60.0, tilt_deg=50.0):
    r = rng.uniform(r_lo, r_hi)
    az = math.radians(rng.uniform(-max_boresight_deg, max_boresight_deg))
    p = r * np.array([math.sin(az), math.cos(az)])
    toward_bs = unit(-p)
    tilt = math.radians(rng.uniform(-tilt_deg, tilt_deg))
    rot = np.array([[math.cos(tilt), -math.sin(tilt)], [math.sin(tilt), math.cos(tilt)]])
    return Pose(p, rot @ toward_bs), r


def _friis_amplitude(length: float, lam: float) -> float:
    return lam / (4.0 * math.pi * length)


def _radar_amplitude(r: float, lam: float, rcs: float) -> float:
    return math.sqrt(lam**2 * rcs / ((4.0 * math.pi) ** 3 * r**4))


def _draw_scatterer_path(rng, src: Pose, dst: Pose, used_lengths, min_sep,
                         max_tries=1000):
    """Scatterer for one NLoS path of the src->dst link.

    The scatterer must be in front of both arrays and the polyline length
    must clear every already-used length of the link by ``min_sep``.
    """
    d_direct = float(np.linalg.norm(dst.position - src.position))
    for _ in range(max_tries):
        rad = rng.uniform(0.15 * d_direct, 1.5 * d_direct)
        az = rng.uniform(-math.pi, math.pi)
        s = src.position + rad * np.array([math.cos(az), math.sin(az)])
        to_s_src = s - src.position
        to_s_dst = s - dst.position
        if np.linalg.norm(to_s_src) < 1.0 or np.linalg.norm(to_s_dst) < 1.0:
            continue
        if np.dot(unit(to_s_src), src.orientation) < 0.2:
            continue
        if np.dot(unit(to_s_dst), dst.orientation) < 0.2:
            continue
        length = float(np.linalg.norm(to_s_src) + np.linalg.norm(to_s_dst))
        if any(abs(length - u) < min_sep for u in used_lengths):
            continue
        # keep every spatial direction comfortably inside (-1, 1)
        aod = float(cross2(unit(to_s_src), src.orientation))
        aoa = float(cross2(unit(to_s_dst), dst.orientation))
        if abs(aod) > 0.98 or abs(aoa) > 0.98:
            continue
        return s, length, aod, aoa
    raise GenerationError("could not place a scatterer with feasible geometry")


def _link_paths(rng, src: Pose, dst: Pose, n_paths, has_los, lam, min_sep,
                aperture: float = 1.0):
    paths = []
    used = []
    d_direct = float(np.linalg.norm(dst.position - src.position))
    nlos_scale = 0.1 if has_los else 1.0  # -20 dB below the LoS path power
    if has_los:
        aod = spatial_direction(src.position, src.orientation, dst.position)
        aoa = spatial_direction(dst.position, dst.orientation, src.position)
        amp = aperture * _friis_amplitude(d_direct, lam)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        paths.append(PathParams(amp * np.exp(1j * phase), d_direct / C_LIGHT,
                                aod, aoa, None, d_direct))
        used.append(d_direct)
    n_scatter = n_paths - len(paths)
    for _ in range(n_scatter):
        s, length, aod, aoa = _draw_scatterer_path(rng, src, dst, used, min_sep)
        used.append(length)
        amp = aperture * _friis_amplitude(length, lam) * nlos_scale
        phase = rng.uniform(0.0, 2.0 * math.pi)
        paths.append(PathParams(amp * np.exp(1j * phase), length / C_LIGHT,
                                aod, aoa, s, length))
    if not has_los:
        # shortest (strongest) scatterer path first: downstream anchors use it
        paths.sort(key=lambda p: p.length)
    return paths


def synthesize_scene(cfg: SceneConfig, rng: np.random.Generator | None = None) -> Scene:
    """Draw a random scene consistent with the configuration.

    All path angles/delays follow from the drawn geometry so that a perfect
    estimator can invert them exactly.
    """
    cfg.validate()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    lam = cfg.wavelength
    min_sep = min_delay_separation_m(cfg)
    los_bu, los_br, los_ru = cfg.los_flags()

    for _ in range(1000):
        try:
            bs = Pose(np.zeros(2), np.array([0.0, 1.0]))
            ris, _ = _draw_pose(rng, cfg.r_br_min, cfg.r_br_max)
            ut, _ = _draw_pose(rng, cfg.r_bu_min, cfg.r_bu_max)
            # paths touching the RIS carry the sqrt(N_RIS) aperture factor:
            # the normalized RIS sweep response peaks at 1, so the coherent
            # element sum must live in the per-path gain
            ap = math.sqrt(cfg.n_ris)
            bs_ris = _link_paths(rng, bs, ris, cfg.l_br, los_br, lam, min_sep,
                                 aperture=ap)
            bs_ut = _link_paths(rng, bs, ut, cfg.l_bu, los_bu, lam, min_sep)
            ris_ut = _link_paths(rng, ris, ut, cfg.l_ru, los_ru, lam, min_sep,
                                 aperture=ap)
        except GenerationError:
            continue

        targets = []
        used_r = []
        ok = True
        for _ in range(cfg.n_targets):
            for _try in range(1000):
                r = rng.uniform(cfg.r_tar_min, cfg.r_tar_max)
                if all(abs(r - u) >= min_sep for u in used_r):
                    break
            else:
                ok = False
                break
            used_r.append(r)
            ang = rng.uniform(-0.8, 0.8)
            v = rng.uniform(cfg.v_min, cfg.v_max)
            rcs = 10.0 ** (rng.uniform(cfg.rcs_min_dbsm, cfg.rcs_max_dbsm) / 10.0)
            amp = _radar_amplitude(r, lam, rcs)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            targets.append(TargetParams(amp * np.exp(1j * phase), r, v, ang,
                                        2.0 * v / lam))
        if not ok:
            continue
        return Scene(cfg, bs, ris, ut, bs_ris, bs_ut, ris_ut, targets)
    raise GenerationError("no feasible scene after 1000 redraws")


# -- intersection primitives ---------------------------------------------


def circle_circle_intersect(c1, r1, c2, r2, tol: float = 1e-9) -> list[np.ndarray]:
    """Intersection points of two circles; tangency returns one point.

    Raises DegenerateGeometryError for (near-)concentric equal circles.
    """
    if r1 <= 0 or r2 <= 0:
        raise ValueError("circle radii must be positive")
    c1 = np.asarray(c1, float)
    c2 = np.asarray(c2, float)
    d = float(np.linalg.norm(c2 - c1))
    if d < tol:
        if abs(r1 - r2) < tol:
            raise DegenerateGeometryError("concentric equal circles intersect everywhere")
        return []
    if d > r1 + r2 + tol or d < abs(r1 - r2) - tol:
        return []
    a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
    h2 = r1 * r1 - a * a
    e = (c2 - c1) / d
    perp = np.array([-e[1], e[0]])
    base = c1 + a * e
    if h2 <= tol * max(r1, r2):
        return [base]
    h = math.sqrt(max(h2, 0.0))
    return [base + h * perp, base - h * perp]


def ellipse_line_intersect(f1, f2, sum_dist, line_dir, tol: float = 1e-9) -> list[np.ndarray]:
    """Points on the origin line t*line_dir with |x-f1| + |x-f2| = sum_dist."""
    f1 = np.asarray(f1, float)
    f2 = np.asarray(f2, float)
    u = unit(np.asarray(line_dir, float))
    focal = float(np.linalg.norm(f2 - f1))
    if sum_dist <= focal + tol:
        raise InvalidEllipseError(
            f"sum of distances {sum_dist} does not exceed focal distance {focal}"
        )
    center = (f1 + f2) / 2.0
    a = sum_dist / 2.0
    b2 = a * a - (focal / 2.0) ** 2
    if focal < tol:
        e1 = np.array([1.0, 0.0])
    else:
        e1 = (f2 - f1) / focal
    e2 = np.array([-e1[1], e1[0]])
    # line point t*u in ellipse coordinates
    p1, q1 = float(np.dot(u, e1)), float(np.dot(center, e1))
    p2, q2 = float(np.dot(u, e2)), float(np.dot(center, e2))
    A = p1 * p1 / (a * a) + p2 * p2 / b2
    B = -2.0 * (p1 * q1 / (a * a) + p2 * q2 / b2)
    Cc = q1 * q1 / (a * a) + q2 * q2 / b2 - 1.0
    disc = B * B - 4.0 * A * Cc
    if disc < -tol:
        return []
    if disc <= tol:
        return [(-B / (2.0 * A)) * u]
    sq = math.sqrt(max(disc, 0.0))
    t1 = (-B + sq) / (2.0 * A)
    t2 = (-B - sq) / (2.0 * A)
    return [t1 * u, t2 * u]
