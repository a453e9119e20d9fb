"""Observation-stack generation for the BS echo receiver and the UT.

Every stack entry is assembled from factored per-path scalars (beam response
x RIS sweep response x subcarrier phase ramp); no channel matrix is ever
formed, which keeps a full sweep at O(N_T * N_RIS * M * (L^2 + T)).
"""

import struct

import numpy as np

from .arraymath import dirichlet, steering
from .channels import Codebooks
from .geometry import Scene


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def noise_sigma2(scene: Scene) -> float:
    """Per-entry complex noise variance in watts (0.0 for noiseless scenes)."""
    dbm = scene.cfg.noise_power_dbm
    return 0.0 if dbm is None else dbm_to_watt(dbm)


def _cnoise(rng: np.random.Generator, shape, sigma2: float) -> np.ndarray:
    if sigma2 == 0.0:
        return np.zeros(shape, complex)
    s = np.sqrt(sigma2 / 2.0)
    return rng.normal(scale=s, size=shape) + 1j * rng.normal(scale=s, size=shape)


def bs_two_way_response(cfg, theta: float) -> np.ndarray:
    """Per-transmit-beam scalar v_n^H a(N_R, theta) a(N_T, theta)^H b_n.

    The receive beam is locked to the transmit beam's spatial direction
    (2n-2)/N_T on the echo array.
    """
    d_n = Codebooks.directions(cfg.n_t)
    rx = dirichlet(cfg.n_r, np.pi * (theta - d_n)) / cfg.n_r
    tx = dirichlet(cfg.n_t, np.pi * (d_n - theta)) / cfg.n_t
    return rx * tx


def _ris_sweep_response(books: Codebooks, direction_sum: np.ndarray) -> np.ndarray:
    """r_s^T alpha(N_RIS, phi + theta) / sqrt(N_RIS) for all codewords s.

    ``direction_sum`` holds the summed spatial directions of the incident and
    reflected rays, one per path term; returns shape (n_ris, len(direction_sum)).
    """
    n_ris = books.r.shape[0]
    k = np.arange(n_ris)
    alpha = np.exp(1j * np.pi * np.outer(k, direction_sum)) / np.sqrt(n_ris)
    return (books.r @ alpha) / np.sqrt(n_ris)


def _delay_ramp(delays: np.ndarray, m: int, delta_f: float) -> np.ndarray:
    m_idx = np.arange(m)
    return np.exp(-2j * np.pi * np.outer(delays, m_idx) * delta_f)


def simulate_bs_stacks(scene: Scene, books: Codebooks, p_t_dbm: float | None = None,
                       rng: np.random.Generator | None = None) -> np.ndarray:
    """BS echo stacks Y, shape (N_T, N_RIS, M).

    Row s of Y[n] is the reception with transmit beam b_{n+1}, RIS codeword
    r_{s+1} (symbol p = n*N_RIS + s + 1) and the locked receive beam; the
    pilot symbol is 1 and the transmit amplitude is sqrt(P_t).
    """
    cfg = scene.cfg
    if p_t_dbm is None:
        p_t_dbm = cfg.tx_power_dbm
    amp = np.sqrt(dbm_to_watt(p_t_dbm))
    if rng is None:
        rng = np.random.default_rng(cfg.seed + 1)

    y = np.zeros((cfg.n_t, cfg.n_ris, cfg.m), complex)

    paths = scene.bs_ris
    if paths:
        L = len(paths)
        d_n = Codebooks.directions(cfg.n_t)
        rx = np.empty((cfg.n_t, L), complex)
        tx = np.empty((cfg.n_t, L), complex)
        for i, p in enumerate(paths):
            rx[:, i] = dirichlet(cfg.n_r, np.pi * (p.aod - d_n)) / cfg.n_r
            tx[:, i] = dirichlet(cfg.n_t, np.pi * (d_n - p.aod)) / cfg.n_t
        # all (r, u) path pairs of the double RIS traversal
        gains = np.array([p.gain for p in paths])
        aoas = np.array([p.aoa for p in paths])
        delays = np.array([p.delay for p in paths])
        pair_dirs = np.add.outer(aoas, aoas).ravel()
        pair_delay = np.add.outer(delays, delays).ravel()
        c_nk = rx[:, :, None] * tx[:, None, :]  # (n, r, u)
        c_nk = (c_nk * np.outer(gains, gains)[None]).reshape(cfg.n_t, L * L)
        s_sk = _ris_sweep_response(books, pair_dirs)
        e_km = _delay_ramp(pair_delay, cfg.m, cfg.delta_f)
        y += np.einsum("nk,sk,km->nsm", c_nk, s_sk, e_km, optimize=True)

    if scene.targets:
        t_s = cfg.symbol_duration
        T = len(scene.targets)
        base = np.empty((cfg.n_t, T), complex)
        dop = np.empty((cfg.n_ris, T), complex)
        dele = np.empty((T, cfg.m), complex)
        s_idx = np.arange(cfg.n_ris)
        for i, t in enumerate(scene.targets):
            carry = np.exp(2j * np.pi * np.arange(cfg.n_t) * cfg.n_ris * t.doppler * t_s)
            base[:, i] = t.gain * bs_two_way_response(cfg, t.angle) * carry
            dop[:, i] = np.exp(2j * np.pi * s_idx * t.doppler * t_s)
            dele[i] = _delay_ramp(np.array([t.delay]), cfg.m, cfg.delta_f)[0]
        y += np.einsum("nk,sk,km->nsm", base, dop, dele, optimize=True)

    y *= amp
    y += _cnoise(rng, y.shape, noise_sigma2(scene))
    return y


def _ut_signal(scene: Scene, books: Codebooks, t_rows: np.ndarray) -> np.ndarray:
    """Noiseless UT receptions, shape (N_T, len(t_rows), M).

    ``t_rows`` are 0-based combiner indices; row i uses combiner u_{t_rows[i]+1}
    and RIS codeword r_{t_rows[i]+1} (the UT sweep rides the first N_UT
    symbols of each RIS sweep).
    """
    cfg = scene.cfg
    n_rows = len(t_rows)
    z = np.zeros((cfg.n_t, n_rows, cfg.m), complex)
    d_n = Codebooks.directions(cfg.n_t)
    u_rows = books.u[t_rows]  # (rows, n_ut)

    if scene.bs_ut:
        L = len(scene.bs_ut)
        tx = np.empty((cfg.n_t, L), complex)
        rx = np.empty((n_rows, L), complex)
        dele = np.empty((L, cfg.m), complex)
        for i, p in enumerate(scene.bs_ut):
            tx[:, i] = p.gain * dirichlet(cfg.n_t, np.pi * (d_n - p.aod)) / cfg.n_t
            rx[:, i] = u_rows.conj() @ steering(cfg.n_ut, p.aoa)
            dele[i] = _delay_ramp(np.array([p.delay]), cfg.m, cfg.delta_f)[0]
        z += np.einsum("nk,tk,km->ntm", tx, rx, dele, optimize=True)

    if scene.ris_ut and scene.bs_ris:
        pairs = [(pr, pb) for pr in scene.ris_ut for pb in scene.bs_ris]
        K = len(pairs)
        tx = np.empty((cfg.n_t, K), complex)
        rx = np.empty((n_rows, K), complex)
        sweep = np.empty((n_rows, K), complex)
        dele = np.empty((K, cfg.m), complex)
        dirs = np.array([pr.aod + pb.aoa for pr, pb in pairs])
        sweep_full = _ris_sweep_response(books, dirs)  # (n_ris, K)
        for i, (pr, pb) in enumerate(pairs):
            tx[:, i] = pb.gain * dirichlet(cfg.n_t, np.pi * (d_n - pb.aod)) / cfg.n_t
            rx[:, i] = pr.gain * (u_rows.conj() @ steering(cfg.n_ut, pr.aoa))
            dele[i] = _delay_ramp(np.array([pr.delay + pb.delay]), cfg.m, cfg.delta_f)[0]
        sweep = sweep_full[t_rows]
        z += np.einsum("nk,tk,tk,km->ntm", tx, rx, sweep, dele, optimize=True)
    return z


def simulate_ut_stacks(scene: Scene, books: Codebooks, p_t_dbm: float | None = None,
                       rng: np.random.Generator | None = None) -> np.ndarray:
    """UT reception stacks Z, shape (N_T, N_UT, M)."""
    cfg = scene.cfg
    cfg.validate()
    if p_t_dbm is None:
        p_t_dbm = cfg.tx_power_dbm
    amp = np.sqrt(dbm_to_watt(p_t_dbm))
    if rng is None:
        rng = np.random.default_rng(cfg.seed + 2)
    z = amp * _ut_signal(scene, books, np.arange(cfg.n_ut))
    z += _cnoise(rng, z.shape, noise_sigma2(scene))
    return z


def ut_probe(scene: Scene, books: Codebooks, n_idx: int, t_idx: int, s_idx: int,
             p_t_dbm: float | None = None,
             rng: np.random.Generator | None = None) -> np.ndarray:
    """One extra downlink symbol at the UT: beam b_n, combiner u_t, RIS r_s.

    Indices are 0-based.  Used by the direct/reflected classifier, where the
    RIS codeword index is shifted off the combiner index.
    """
    cfg = scene.cfg
    if not (0 <= n_idx < cfg.n_t and 0 <= t_idx < cfg.n_ut and 0 <= s_idx < cfg.n_ris):
        raise IndexError("probe beam index out of range")
    if p_t_dbm is None:
        p_t_dbm = cfg.tx_power_dbm
    amp = np.sqrt(dbm_to_watt(p_t_dbm))
    if rng is None:
        rng = np.random.default_rng(cfg.seed + 3)

    d_n = Codebooks.directions(cfg.n_t)[n_idx]
    u_t = books.u[t_idx]
    z = np.zeros(cfg.m, complex)
    for p in scene.bs_ut:
        tx = p.gain * complex(dirichlet(cfg.n_t, np.pi * (d_n - p.aod))) / cfg.n_t
        rx = np.vdot(u_t, steering(cfg.n_ut, p.aoa))
        z += tx * rx * _delay_ramp(np.array([p.delay]), cfg.m, cfg.delta_f)[0]
    if scene.ris_ut and scene.bs_ris:
        for pr in scene.ris_ut:
            for pb in scene.bs_ris:
                tx = pb.gain * complex(dirichlet(cfg.n_t, np.pi * (d_n - pb.aod))) / cfg.n_t
                rx = pr.gain * np.vdot(u_t, steering(cfg.n_ut, pr.aoa))
                sw = _ris_sweep_response(books, np.array([pr.aod + pb.aoa]))[s_idx, 0]
                z += tx * rx * sw * _delay_ramp(
                    np.array([pr.delay + pb.delay]), cfg.m, cfg.delta_f)[0]
    z *= amp
    z += _cnoise(rng, z.shape, noise_sigma2(scene))
    return z


def uplink_probe(scene: Scene, books: Codebooks, ris_direction: float,
                 ut_tx_direction: float, bs_rx_direction: float,
                 p_t_dbm: float | None = None,
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """Uplink pilot: UT transmits, RIS reflects, BS transceiver receives.

    The RIS applies the unit-modulus profile sqrt(N_RIS)*alpha(N_RIS,
    ``ris_direction``); uplink channels are the downlink transposes, so the
    UT and BS beams are the conjugated steering vectors and the direction
    arguments keep their downlink (physical) sign: the BS combiner peaks
    when ``bs_rx_direction`` equals the BS-side path direction, and likewise
    for the UT.  Returns the per-subcarrier reception (length M).
    """
    cfg = scene.cfg
    if p_t_dbm is None:
        p_t_dbm = cfg.tx_power_dbm
    amp = np.sqrt(dbm_to_watt(p_t_dbm))
    if rng is None:
        rng = np.random.default_rng(cfg.seed + 4)

    w = steering(cfg.n_ut, ut_tx_direction).conj()
    f = steering(cfg.n_t, bs_rx_direction).conj()
    phi = np.sqrt(cfg.n_ris) * steering(cfg.n_ris, ris_direction)

    y = np.zeros(cfg.m, complex)
    k = np.arange(cfg.n_ris)
    for pb in scene.bs_ris:
        # f^H conj(alpha(N_T, theta_BR)) for the transposed BS-RIS channel
        bs_side = np.vdot(f, steering(cfg.n_t, pb.aod).conj())
        for pr in scene.ris_ut:
            ut_side = steering(cfg.n_ut, pr.aoa) @ w
            a_sum = np.exp(1j * np.pi * k * (pb.aoa + pr.aod)) / cfg.n_ris
            ris_side = phi @ a_sum
            gain = pb.gain * pr.gain * bs_side * ut_side * ris_side
            y += gain * _delay_ramp(np.array([pb.delay + pr.delay]), cfg.m, cfg.delta_f)[0]
    y *= amp
    y += _cnoise(rng, y.shape, noise_sigma2(scene))
    return y


# -- binary stack dump ----------------------------------------------------

_MAGIC = b"RISY"


def save_stacks(path, stacks: np.ndarray, seed: int = 0) -> None:
    """Dump stacks as: magic, ndim, dims (int64), seed (uint64), complex64 data."""
    arr = np.ascontiguousarray(stacks.astype(np.complex64))
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<B", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
        fh.write(struct.pack("<Q", seed))
        arr.tofile(fh)


def load_stacks(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a stack dump file")
        (ndim,) = struct.unpack("<B", fh.read(1))
        shape = struct.unpack(f"<{ndim}q", fh.read(8 * ndim))
        (seed,) = struct.unpack("<Q", fh.read(8))
        data = np.fromfile(fh, dtype=np.complex64).reshape(shape)
    return data, seed
