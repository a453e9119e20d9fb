"""Iterative detect-estimate-remove parameter estimation on observation stacks.

The BS echo stacks are examined in two transform domains: RIS beam-training
echoes concentrate in the angle-delay domain, moving-target echoes in the
Doppler-delay domain.  Each iteration detects the globally strongest
component in either domain, estimates its parameters with off-grid
refinement, fits its complex amplitude by least squares and subtracts the
rank-1 model from the raw stacks.  A separate-domain baseline and the UT-side
training (with the direct/reflected probe classifier) live here as well.
"""

from dataclasses import dataclass

import numpy as np

from .arraymath import (
    NoPeakError,
    dirichlet,
    offgrid_estimate,
    steering,
    to_angle_delay,
    to_doppler_delay,
    wrap_direction,
)
from .geometry import C_LIGHT


class WrappedDelayError(ValueError):
    """Estimated delay falls outside the unambiguous window."""


class AliasedDopplerError(ValueError):
    """Doppler shift at or beyond the +-1/(2 T_s) alias boundary."""


class ConvergenceError(RuntimeError):
    """Detection budget not met within the iteration cap."""


class DegenerateTemplateError(ValueError):
    """Removal template has zero norm."""


class DetectionExhaustedError(RuntimeError):
    """Exclusion sets cover the whole detection grid."""


# -- estimate records ------------------------------------------------------


@dataclass
class RisPathEstimate:
    """One RIS beam-training echo component."""

    aod: float                      # BS-side direction theta
    two_way_aoa: float              # summed RIS-side direction (period 2)
    aoa_candidates: tuple           # <=2 possible one-way RIS-side directions
    delay: float                    # one-way seconds
    range_m: float                  # one-way meters
    gain: complex
    indices: tuple                  # detection (n, s, m), 0-based


@dataclass
class TargetEstimate:
    """One moving-target echo component."""

    angle: float
    range_m: float
    velocity: float
    doppler: float                  # Hz
    gain: complex
    indices: tuple


@dataclass
class UtPathEstimate:
    """One detected component of the UT receptions."""

    aod: float
    aoa: float
    delay: float
    range_m: float
    gain: complex
    reflected: bool
    indices: tuple                  # detection (n, t, m), 0-based


@dataclass(frozen=True)
class Template:
    """Rank-1 stack model t[n, s, m] = beam[n] * sweep[s] * subc[m]."""

    beam: np.ndarray
    sweep: np.ndarray
    subc: np.ndarray

    def norm_sq(self) -> float:
        return float(
            np.sum(np.abs(self.beam) ** 2)
            * np.sum(np.abs(self.sweep) ** 2)
            * np.sum(np.abs(self.subc) ** 2)
        )


# -- detection -------------------------------------------------------------


def _peak(a: np.ndarray) -> tuple[float, tuple]:
    mags = np.abs(a)
    idx = np.unravel_index(int(np.argmax(mags)), a.shape)
    return float(mags[idx]), idx


def domain_maxima(y: np.ndarray) -> tuple[float, float, tuple, tuple]:
    """Global peak magnitudes of the two transform domains of the BS stacks.

    Returns (Q_c, Q_r, angle-delay argmax, Doppler-delay argmax); indices are
    0-based (beam, sweep-or-Doppler bin, delay bin).
    """
    y_ad = to_angle_delay(y)
    q_c, idx_c = _peak(y_ad)
    q_r, idx_r = _peak(to_doppler_delay(y_ad))
    return q_c, q_r, idx_c, idx_r


# -- closed-form parameter extraction ---------------------------------------


def estimate_aoa_candidates(theta_two_way: float) -> tuple[float, float]:
    """The <=2 one-way directions consistent with a two-way (doubled) AoA."""
    t = float(theta_two_way)
    if not -1.0 <= t <= 1.0:
        raise ValueError(f"two-way AoA {t} outside [-1, 1]")
    if t <= 0.0:
        return (t / 2.0 + 1.0, t / 2.0)
    return (t / 2.0 - 1.0, t / 2.0)


def psi_from_direction(psi_true: float, m: int) -> float:
    """Convert a delay-axis direction to the shifted convention of
    ``estimate_delay_range`` (which anchors zero delay at -1 + 2/M)."""
    return wrap_direction(psi_true - 1.0 + 2.0 / m)


def estimate_delay_range(psi: float, m: int, delta_f: float,
                         slope: float = 4.0) -> tuple[float, float]:
    """Delay and one-way range from a shifted delay-axis estimate.

    tau = (1 + psi - 2/M) / (slope * delta_f).  Slope 4 covers the double
    RIS traversal and the target round trip (both give one-way range
    directly); slope 2 covers one-way BS-UT paths.
    """
    if not -1.0 <= psi <= 1.0:
        raise ValueError(f"delay estimate {psi} outside [-1, 1]")
    tau = (1.0 + psi - 2.0 / m) / (slope * delta_f)
    if tau < 0.0:
        raise WrappedDelayError(f"negative delay {tau} (wrapped past the window)")
    return tau, tau * C_LIGHT


def estimate_doppler_velocity(doppler_column: np.ndarray, t_s: float,
                              wavelength: float) -> tuple[float, float, float]:
    """Velocity from the Doppler-bin profile at a detected delay bin.

    Returns (v_hat m/s, f_hat Hz, doppler direction).  The direction is
    2 f T_s; shifts at the alias boundary |direction| = 1 are rejected.
    """
    if t_s <= 0 or wavelength <= 0:
        raise ValueError("symbol duration and wavelength must be positive")
    theta = offgrid_estimate(np.asarray(doppler_column))
    if abs(theta) >= 1.0:
        raise AliasedDopplerError("Doppler at the +-1/(2 T_s) alias boundary")
    f_hat = theta / (2.0 * t_s)
    return f_hat * wavelength / 2.0, f_hat, theta


def _three_beam_response(theta, n_peak: int, n_t: int, n_r: int | None):
    """Model response of beams n_peak-1, n_peak, n_peak+1 (cyclic, 0-based).

    With ``n_r`` set this is the monostatic two-way pattern (transmit beam
    times locked receive beam); without it the one-way transmit pattern.
    """
    d = 2.0 * (np.array([n_peak - 1, n_peak, n_peak + 1]) % n_t) / n_t
    resp = dirichlet(n_t, np.pi * (d - theta)) / n_t
    if n_r is not None:
        resp = resp * dirichlet(n_r, np.pi * (theta - d)) / n_r
    return resp


def estimate_aod_ls(y3: np.ndarray, n_peak: int, n_t: int,
                    n_r: int | None = None, n_grid: int = 512,
                    golden_steps: int = 20) -> float:
    """Least-squares BS-side direction from three adjacent beam observations.

    Maximizes |y^H y_model(theta)| / ||y_model(theta)|| over the one-beam
    bracket around beam ``n_peak`` (0-based) with a uniform grid followed by
    golden-section refinement.  Scale-invariant in ``y3``.
    """
    y3 = np.asarray(y3)
    if y3.shape != (3,):
        raise ValueError("need exactly three beam observations")
    if not np.any(np.abs(y3) > 0):
        raise NoPeakError("all-zero beam observations")

    def objective(theta):
        model = _three_beam_response(theta, n_peak, n_t, n_r)
        nrm = np.linalg.norm(model)
        if nrm == 0.0:
            return 0.0
        return abs(np.vdot(y3, model)) / nrm

    center = 2.0 * n_peak / n_t
    lo, hi = center - 1.0 / n_t, center + 1.0 / n_t
    grid = np.linspace(lo, hi, n_grid)
    vals = [objective(t) for t in grid]
    k = int(np.argmax(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, n_grid - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(golden_steps):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = objective(d)
    return float(wrap_direction((a + b) / 2.0))


# -- templates and removal ---------------------------------------------------


def _bs_two_way_beam(cfg, theta: float) -> np.ndarray:
    d_n = 2.0 * np.arange(cfg.n_t) / cfg.n_t
    rx = dirichlet(cfg.n_r, np.pi * (theta - d_n)) / cfg.n_r
    tx = dirichlet(cfg.n_t, np.pi * (d_n - theta)) / cfg.n_t
    return rx * tx


def ris_template(cfg, two_way_aoa: float, tau: float, aod: float) -> Template:
    """Stack model of one RIS echo component (static, double traversal)."""
    sweep = cfg.n_ris * np.fft.ifft(steering(cfg.n_ris, two_way_aoa))
    subc = np.exp(-4j * np.pi * np.arange(cfg.m) * tau * cfg.delta_f)
    return Template(_bs_two_way_beam(cfg, aod), sweep, subc)


def target_template(cfg, angle: float, range_m: float, f_hat: float) -> Template:
    """Stack model of one target echo, including the cross-stack Doppler
    phase carried between consecutive RIS sweeps."""
    t_s = cfg.symbol_duration
    beam = _bs_two_way_beam(cfg, angle)
    beam = beam * np.exp(2j * np.pi * np.arange(cfg.n_t) * cfg.n_ris * f_hat * t_s)
    sweep = np.exp(2j * np.pi * np.arange(cfg.n_ris) * f_hat * t_s)
    tau_rt = 2.0 * range_m / C_LIGHT
    subc = np.exp(-2j * np.pi * np.arange(cfg.m) * tau_rt * cfg.delta_f)
    return Template(beam, sweep, subc)


def ut_template(cfg, aod: float, aoa: float, tau: float) -> Template:
    """UT-stack model of one direct BS-UT path."""
    d_n = 2.0 * np.arange(cfg.n_t) / cfg.n_t
    beam = dirichlet(cfg.n_t, np.pi * (d_n - aod)) / cfg.n_t
    d_t = 2.0 * np.arange(cfg.n_ut) / cfg.n_ut
    comb = dirichlet(cfg.n_ut, np.pi * (aoa - d_t)) / cfg.n_ut
    subc = np.exp(-2j * np.pi * np.arange(cfg.m) * tau * cfg.delta_f)
    return Template(beam, comb, subc)


def remove_contribution(y: np.ndarray, t: Template) -> tuple[np.ndarray, complex, complex]:
    """Least-squares fit and subtraction of one rank-1 component.

    Returns (residual stacks, beta, g_hat) with beta = t^H y / t^H t over
    the whole stack and g_hat = sqrt(beta / sqrt(M)) (principal root).
    """
    nsq = t.norm_sq()
    if nsq == 0.0:
        raise DegenerateTemplateError("zero-norm removal template")
    proj = np.einsum("n,s,m,nsm->", t.beam.conj(), t.sweep.conj(),
                     t.subc.conj(), y, optimize=True)
    beta = complex(proj / nsq)
    model = np.einsum("n,s,m->nsm", t.beam, t.sweep, t.subc, optimize=True)
    g_hat = complex(np.sqrt(beta / np.sqrt(y.shape[-1])))
    return y - beta * model, beta, g_hat


# -- iterative estimation -----------------------------------------------------


def _cyclic3(n: int, n_total: int) -> list[int]:
    return [(n - 1) % n_total, n, (n + 1) % n_total]


def _estimate_ris_path(y_ad: np.ndarray, idx: tuple, cfg) -> tuple[dict, Template]:
    n, s, m = idx
    # the sweep-axis column peaks at the negated summed two-way direction
    two_way = wrap_direction(-offgrid_estimate(y_ad[n, :, m]))
    psi = psi_from_direction(offgrid_estimate(y_ad[n, s, :]), cfg.m)
    tau, r = estimate_delay_range(psi, cfg.m, cfg.delta_f, slope=4.0)
    y3 = y_ad[_cyclic3(n, cfg.n_t), s, m]
    aod = estimate_aod_ls(y3, n, cfg.n_t, cfg.n_r)
    params = dict(aod=aod, two_way_aoa=two_way,
                  aoa_candidates=estimate_aoa_candidates(two_way),
                  delay=tau, range_m=r, indices=(n, s, m))
    return params, ris_template(cfg, two_way, tau, aod)


def _estimate_target(y_dd: np.ndarray, idx: tuple, cfg) -> tuple[dict, Template]:
    n, s, m = idx
    t_s = cfg.symbol_duration
    v, f_hat, _ = estimate_doppler_velocity(y_dd[n, :, m], t_s, cfg.wavelength)
    psi = psi_from_direction(offgrid_estimate(y_dd[n, s, :]), cfg.m)
    tau, r = estimate_delay_range(psi, cfg.m, cfg.delta_f, slope=4.0)
    # derotate the per-sweep Doppler carry before the three-beam fit
    rows = _cyclic3(n, cfg.n_t)
    carry = np.exp(-2j * np.pi * np.array(rows) * cfg.n_ris * f_hat * t_s)
    y3 = y_dd[rows, s, m] * carry
    angle = estimate_aod_ls(y3, n, cfg.n_t, cfg.n_r)
    params = dict(angle=angle, range_m=r, velocity=v, doppler=f_hat,
                  indices=(n, s, m))
    return params, target_template(cfg, angle, r, f_hat)


def run_ipebtts(y: np.ndarray, cfg, l_br_hat: int, t_hat: int,
                verbose: bool = False) -> tuple[list[RisPathEstimate], list[TargetEstimate]]:
    """Iterative cross-domain detect-estimate-remove on the BS echo stacks.

    Alternates between the angle-delay and Doppler-delay domains by peak
    magnitude until ``l_br_hat`` RIS components and ``t_hat`` targets are
    estimated, each subtracted from the raw stacks before the next pass.
    """
    if l_br_hat < 0 or t_hat < 0:
        raise ValueError("budgets must be nonnegative")
    y = np.array(y, dtype=complex)
    ris: list[RisPathEstimate] = []
    targets: list[TargetEstimate] = []
    max_iter = l_br_hat + t_hat + 5
    iters = 0
    while len(ris) < l_br_hat or len(targets) < t_hat:
        if iters >= max_iter:
            raise ConvergenceError(
                f"budgets ({l_br_hat}, {t_hat}) not met in {max_iter} iterations")
        iters += 1
        y_ad = to_angle_delay(y)
        y_dd = to_doppler_delay(y_ad)
        q_c, idx_c = _peak(y_ad)
        q_r, idx_r = _peak(y_dd)
        take_ris = q_c >= q_r
        if len(ris) >= l_br_hat:
            take_ris = False
        elif len(targets) >= t_hat:
            take_ris = True
        if verbose:
            import sys
            print(f"iter {iters}: branch={'ris' if take_ris else 'target'} "
                  f"Qc={q_c:.3e}@{idx_c} Qr={q_r:.3e}@{idx_r}", file=sys.stderr)
        if take_ris:
            params, tmpl = _estimate_ris_path(y_ad, idx_c, cfg)
            y, _, g_hat = remove_contribution(y, tmpl)
            ris.append(RisPathEstimate(gain=g_hat, **params))
        else:
            params, tmpl = _estimate_target(y_dd, idx_r, cfg)
            y, _, g_hat = remove_contribution(y, tmpl)
            targets.append(TargetEstimate(gain=g_hat, **params))
    return ris, targets


def run_spebtts(y: np.ndarray, cfg, l_br_hat: int, t_hat: int
                ) -> tuple[list[RisPathEstimate], list[TargetEstimate]]:
    """Separate-domain baseline: RIS components from the angle-delay domain
    and targets from the Doppler-delay domain, each starting from the
    original stacks with per-domain removal only."""
    if l_br_hat < 0 or t_hat < 0:
        raise ValueError("budgets must be nonnegative")
    ris: list[RisPathEstimate] = []
    targets: list[TargetEstimate] = []

    y_c = np.array(y, dtype=complex)
    for _ in range(l_br_hat):
        y_ad = to_angle_delay(y_c)
        _, idx = _peak(y_ad)
        params, tmpl = _estimate_ris_path(y_ad, idx, cfg)
        y_c, _, g_hat = remove_contribution(y_c, tmpl)
        ris.append(RisPathEstimate(gain=g_hat, **params))

    y_r = np.array(y, dtype=complex)
    for _ in range(t_hat):
        y_dd = to_doppler_delay(to_angle_delay(y_r))
        _, idx = _peak(y_dd)
        params, tmpl = _estimate_target(y_dd, idx, cfg)
        y_r, _, g_hat = remove_contribution(y_r, tmpl)
        targets.append(TargetEstimate(gain=g_hat, **params))
    return ris, targets


def run_ut_training(z: np.ndarray, cfg, probe, l_bu_hat: int,
                    rho_threshold: float = 0.5) -> list[UtPathEstimate]:
    """Iterative UT-side path detection with direct/reflected classification.

    ``probe`` is a callable (n_idx, t_idx, s_idx) -> length-M reception used
    to re-issue the detected symbol with the RIS codeword shifted by two.
    A magnitude ratio above ``rho_threshold`` (strictly) keeps the pick as a
    direct path; otherwise its index neighborhoods are blacklisted on all
    three axes and detection repeats.  Direct picks are refined off-grid and
    subtracted; the returned list carries every classified pick.
    """
    if l_bu_hat < 0:
        raise ValueError("budget must be nonnegative")
    z = np.array(z, dtype=complex)
    n_t, n_ut, m = z.shape
    ok_n = np.ones(n_t, bool)
    ok_t = np.ones(n_ut, bool)
    ok_m = np.ones(m, bool)
    out: list[UtPathEstimate] = []
    n_direct = 0
    picks = 0
    while n_direct < l_bu_hat:
        if picks >= l_bu_hat + 5:
            raise ConvergenceError(
                f"budget {l_bu_hat} not met in {picks} picks")
        mask = ok_n[:, None, None] & ok_t[None, :, None] & ok_m[None, None, :]
        if not mask.any():
            raise DetectionExhaustedError("exclusion sets cover the whole grid")
        picks += 1
        z_ad = to_angle_delay(z)
        mags = np.where(mask, np.abs(z_ad), -1.0)
        n, t, k = np.unravel_index(int(np.argmax(mags)), mags.shape)
        aligned = probe(n, t, t)
        shifted = probe(n, t, (t + 2) % cfg.n_ris)
        denom = float(np.mean(np.abs(aligned)))
        rho = float(np.mean(np.abs(shifted))) / denom if denom > 0 else 0.0
        if rho > rho_threshold:
            aod = offgrid_estimate(z_ad[:, t, k])
            aoa = offgrid_estimate(z_ad[n, :, k])
            psi = psi_from_direction(offgrid_estimate(z_ad[n, t, :]), m)
            tau, r = estimate_delay_range(psi, m, cfg.delta_f, slope=2.0)
            tmpl = ut_template(cfg, aod, aoa, tau)
            z, beta, _ = remove_contribution(z, tmpl)
            out.append(UtPathEstimate(aod=aod, aoa=aoa, delay=tau, range_m=r,
                                      gain=beta, reflected=False,
                                      indices=(n, t, k)))
            n_direct += 1
        else:
            for i in _cyclic3(n, n_t):
                ok_n[i] = False
            for i in _cyclic3(t, n_ut):
                ok_t[i] = False
            for i in _cyclic3(k, m):
                ok_m[i] = False
            out.append(UtPathEstimate(aod=2.0 * n / n_t, aoa=2.0 * t / n_ut,
                                      delay=0.0, range_m=0.0, gain=0.0,
                                      reflected=True, indices=(n, t, k)))
    return out
