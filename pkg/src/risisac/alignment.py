"""Beam alignment from estimated geometry, plus the sweep baseline.

Once the training stage has produced node positions and array orientations,
the reflected-link angles follow from plane geometry and the three beams
(BS, RIS, UT) can be pointed without any further sweeping.  The exhaustive
codebook sweep is kept as the reference baseline.
"""

from dataclasses import dataclass

import numpy as np

from .airlink import _cnoise, dbm_to_watt, noise_sigma2
from .arraymath import offgrid_estimate, steering
from .channels import Codebooks
from .geometry import Scene, cross2, unit


@dataclass
class AlignmentResult:
    """Reflected-link pointing angles and the bookkeeping around them."""

    theta_ru: float           # RIS-side direction toward the UT
    phi_ru: float             # UT-side direction toward the RIS
    phi_br: float | None      # resolved RIS-side direction toward the BS
    q_ris: np.ndarray | None  # resolved RIS array normal
    overhead: int             # training symbols consumed
    case: int


@dataclass
class SweepResult:
    """Winning codeword triple of an exhaustive (or restricted) beam sweep."""

    f: np.ndarray
    ris_phases: np.ndarray
    w: np.ndarray
    indices: tuple
    gain: float
    overhead: int


def ru_angles(p_ris, q_ris, p_ut, q_ut) -> tuple[float, float]:
    """Spatial directions of the RIS-UT line at both arrays.

    Evaluated from the unit vector k pointing from the UT to the RIS; the
    closed form divides by [k]_1, so near-vertical links fall back to the
    algebraically identical cross-product form.
    """
    p_ris = np.asarray(p_ris, float)
    p_ut = np.asarray(p_ut, float)
    diff = p_ris - p_ut
    nrm = np.linalg.norm(diff)
    if nrm < 1e-12:
        raise ValueError("RIS and UT positions coincide")
    k = diff / nrm
    q_ris = np.asarray(q_ris, float)
    q_ut = np.asarray(q_ut, float)
    if abs(k[0]) >= 1e-9:
        theta_ru = -(q_ris[1] - k[1] * (k @ q_ris)) / k[0]
        phi_ru = (q_ut[1] - k[1] * (k @ q_ut)) / k[0]
    else:
        theta_ru = -cross2(k, q_ris)
        phi_ru = cross2(k, q_ut)
    return float(theta_ru), float(phi_ru)


def resolve_los_ambiguity(phi_br_cands, theta_ru_cands, probe) -> int:
    """Pick between the two BS-RIS arrival-direction hypotheses.

    ``probe(ris_direction)`` issues one uplink pilot with the RIS pointed at
    ``ris_direction`` and returns the received samples.  Two pilots are
    spent, one per hypothesis; returns 1 if the first is at least as strong,
    else 2.
    """
    if len(phi_br_cands) != 2 or len(theta_ru_cands) != 2:
        raise ValueError("exactly two hypotheses expected")
    mags = []
    for phi, theta in zip(phi_br_cands, theta_ru_cands):
        y = np.asarray(probe(-phi - theta))
        mags.append(np.linalg.norm(y))
    return 1 if mags[0] >= mags[1] else 2


def overhead_for_case(case: int, n_t: int, n_ris: int, n_ut: int) -> int:
    """Training-symbol count to establish the BS-RIS-UT link per case."""
    if case in (1, 5):
        return n_t * n_ris + 2
    if case in (3, 7):
        return n_t * n_ris
    if case in (2, 4, 6, 8):
        return n_t * n_ris + n_ris * n_ut
    raise ValueError(f"case must be 1..8, got {case}")


def _cascade_subcarriers(scene: Scene, f, ris_phases, w) -> np.ndarray:
    """Per-subcarrier scalar w^H H_ru,m diag(r) G_bt,m f, factored by path."""
    cfg = scene.cfg
    m_idx = np.arange(cfg.m)
    s = np.zeros(cfg.m, complex)
    for q in scene.ris_ut:
        ut_fac = np.vdot(w, steering(cfg.n_ut, q.aoa))
        a_q = steering(cfg.n_ris, q.aod)
        for l in scene.bs_ris:
            bs_fac = np.vdot(steering(cfg.n_t, l.aod), f)
            ris_fac = np.sum(a_q * ris_phases * steering(cfg.n_ris, l.aoa))
            ramp = np.exp(-2j * np.pi * m_idx * (q.delay + l.delay) * cfg.delta_f)
            s += q.gain * l.gain * ut_fac * ris_fac * bs_fac * ramp
    return s


def _accumulated_magnitude(s: np.ndarray) -> float:
    """max over the per-subcarrier phase slope of |sum_m e^{j(m-1)w} s_m|."""
    spec = np.fft.fft(s)
    best = float(np.max(np.abs(spec)))
    # one off-grid refinement around the winning bin
    try:
        direction = offgrid_estimate(spec)
    except ValueError:
        return best
    m_idx = np.arange(s.shape[0])
    refined = abs(np.sum(s * np.exp(-1j * np.pi * m_idx * direction)))
    return max(best, float(refined))


def beamforming_gain(scene: Scene, f, ris_phases, w) -> float:
    """Normalized reflected-link array gain of a beam triple.

    The raw accumulated magnitude is scaled so a perfectly aligned
    single-path cascade scores sqrt(N_T * N_UT) * N_RIS regardless of the
    channel gains.
    """
    cfg = scene.cfg
    f = np.asarray(f)
    w = np.asarray(w)
    ris_phases = np.asarray(ris_phases)
    if abs(np.linalg.norm(f) - 1.0) > 1e-6 or abs(np.linalg.norm(w) - 1.0) > 1e-6:
        raise ValueError("beamformers must be unit norm")
    if np.max(np.abs(np.abs(ris_phases) - 1.0)) > 1e-6:
        raise ValueError("RIS phases must be unit modulus")
    s = _cascade_subcarriers(scene, f, ris_phases, w)
    raw = _accumulated_magnitude(s)
    ref = cfg.m * abs(scene.ris_ut[0].gain * scene.bs_ris[0].gain)
    return raw * np.sqrt(cfg.n_t * cfg.n_ut) * cfg.n_ris / ref


def aligned_beams(scene: Scene, theta_br: float, phi_br: float,
                  theta_ru: float, phi_ru: float) -> tuple:
    """Beam triple pointing the full BS -> RIS -> UT cascade.

    ``theta_br``/``phi_br`` are the BS-side and RIS-side directions of the
    BS-RIS path; ``theta_ru``/``phi_ru`` those of the RIS-UT link.  The RIS
    profile compensates the sum of its arrival and departure directions.
    """
    cfg = scene.cfg
    f = steering(cfg.n_t, theta_br)
    w = steering(cfg.n_ut, phi_ru)
    k = np.arange(cfg.n_ris)
    ris_phases = np.exp(-1j * np.pi * k * (phi_br + theta_ru))
    return f, ris_phases, w


def beam_sweep_baseline(scene: Scene, books: Codebooks, p_t_dbm: float,
                        rng: np.random.Generator,
                        f_fixed: np.ndarray | None = None) -> SweepResult:
    """Exhaustive noisy codebook sweep over (f, RIS profile, w).

    With ``f_fixed`` the BS beam is pinned (reflected-link-only sweep) and
    only the RIS and UT codebooks are scanned.  The winner is scored with
    the noiseless :func:`beamforming_gain`.
    """
    cfg = scene.cfg
    amp = np.sqrt(dbm_to_watt(p_t_dbm))
    sigma2 = noise_sigma2(scene)
    m_idx = np.arange(cfg.m)

    # factored per-path building blocks
    bs_list, ru_list = scene.bs_ris, scene.ris_ut
    if f_fixed is None:
        bs_fac = np.array([[np.vdot(steering(cfg.n_t, l.aod), b)
                            for l in bs_list] for b in books.b])  # (n_t, L)
    else:
        bs_fac = np.array([[np.vdot(steering(cfg.n_t, l.aod), f_fixed)
                            for l in bs_list]])                   # (1, L)
    ut_fac = np.array([[np.vdot(u, steering(cfg.n_ut, q.aoa))
                        for q in ru_list] for u in books.u])      # (n_ut, L')
    # RIS response of codeword s to the direction sum of each path pair
    pair_dirs = np.array([q.aod + l.aoa for q in ru_list for l in bs_list])
    k = np.arange(cfg.n_ris)
    a_mat = np.exp(1j * np.pi * np.outer(k, pair_dirs)) / np.sqrt(cfg.n_ris)
    ris_fac = (books.r @ a_mat) / np.sqrt(cfg.n_ris)              # (n_ris, K)
    pair_gain = np.array([q.gain * l.gain for q in ru_list for l in bs_list])
    pair_delay = np.array([q.delay + l.delay for q in ru_list for l in bs_list])
    ramps = np.exp(-2j * np.pi * np.outer(m_idx, pair_delay) * cfg.delta_f)

    n_beams = bs_fac.shape[0]
    l_of_pair = np.tile(np.arange(len(bs_list)), len(ru_list))
    q_of_pair = np.repeat(np.arange(len(ru_list)), len(bs_list))
    best_metric = -np.inf
    best_idx = (0, 0, 0)
    for t in range(cfg.n_ut):
        coef = (pair_gain * ut_fac[t, q_of_pair])[None, :] * bs_fac[:, l_of_pair]
        y = amp * np.einsum("nk,sk,mk->nsm", coef, ris_fac, ramps)
        y = y + _cnoise(rng, y.shape, sigma2)
        metric = np.max(np.abs(np.fft.fft(y, axis=-1)), axis=-1)  # (n,s)
        s_flat = int(np.argmax(metric))
        n_i, s_i = np.unravel_index(s_flat, metric.shape)
        if metric[n_i, s_i] > best_metric:
            best_metric = float(metric[n_i, s_i])
            best_idx = (int(n_i), int(s_i), t)

    n_i, s_i, t_i = best_idx
    f = books.b[n_i] if f_fixed is None else f_fixed
    ris_phases = books.r[s_i]
    w = books.u[t_i]
    gain = beamforming_gain(scene, f, ris_phases, w)
    overhead = n_beams * cfg.n_ris * cfg.n_ut
    return SweepResult(f, ris_phases, w, best_idx, gain, overhead)
