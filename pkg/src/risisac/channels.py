"""Frequency-domain channel matrices per subcarrier/symbol and DFT codebooks.

Channels are sums of rank-1 steering outer products.  The full matrices are
only materialized here for tests and small scenes; the airlink simulator
works with factored per-path scalars instead and never forms them.
"""

from dataclasses import dataclass

import numpy as np

from .arraymath import steering
from .geometry import Scene


@dataclass(frozen=True)
class Codebooks:
    """DFT beam codebooks for the BS transceiver, the RIS, and the UT.

    ``b`` and ``u`` rows are unit-norm steering vectors; ``r`` rows have
    unit-modulus entries (norm sqrt(N_RIS)).  Row k sweeps spatial direction
    (2k-2)/N of the respective array.
    """

    b: np.ndarray  # (n_t, n_t)
    r: np.ndarray  # (n_ris, n_ris)
    u: np.ndarray  # (n_ut, n_ut)

    @staticmethod
    def directions(n: int) -> np.ndarray:
        return (2.0 * np.arange(n)) / n


def build_codebooks(n_t: int, n_ris: int, n_ut: int) -> Codebooks:
    def bank(n, scale):
        dirs = Codebooks.directions(n)
        k = np.arange(n)
        return scale * np.exp(1j * np.pi * np.outer(dirs, k)) / np.sqrt(n)

    return Codebooks(bank(n_t, 1.0), bank(n_ris, np.sqrt(n_ris)), bank(n_ut, 1.0))


@dataclass(frozen=True)
class ChannelSet:
    """Channel matrices evaluated at one (subcarrier, symbol) point."""

    g_t: np.ndarray  # (n_ris, n_t)    BS -> RIS
    g_r: np.ndarray  # (n_r, n_ris)    RIS -> BS receiver
    h_c: np.ndarray  # (n_ut, n_t)     BS -> UT
    h_c_ris: np.ndarray  # (n_ut, n_ris)  RIS -> UT
    h_r: np.ndarray  # (n_r, n_t)      target echoes (symbol-dependent)


def _phase_delay(gain, delay, m_idx, delta_f):
    return gain * np.exp(-2j * np.pi * (m_idx - 1) * delay * delta_f)


def channels_at(scene: Scene, m_idx: int, p_idx: int) -> ChannelSet:
    """Evaluate every channel matrix at subcarrier ``m_idx``, symbol ``p_idx``.

    Indices are 1-based to match the airlink's symbol counter.
    """
    cfg = scene.cfg
    if not 1 <= m_idx <= cfg.m:
        raise IndexError(f"subcarrier index {m_idx} out of range 1..{cfg.m}")
    if p_idx < 1:
        raise IndexError(f"symbol index {p_idx} must be >= 1")

    g_t = np.zeros((cfg.n_ris, cfg.n_t), complex)
    g_r = np.zeros((cfg.n_r, cfg.n_ris), complex)
    for p in scene.bs_ris:
        zeta = _phase_delay(p.gain, p.delay, m_idx, cfg.delta_f)
        a_ris = steering(cfg.n_ris, p.aoa)
        g_t += zeta * np.outer(a_ris, steering(cfg.n_t, p.aod).conj())
        # reciprocity: transpose (not conjugate) on the RIS-side steering
        g_r += zeta * np.outer(steering(cfg.n_r, p.aod), a_ris)

    h_c = np.zeros((cfg.n_ut, cfg.n_t), complex)
    for p in scene.bs_ut:
        chi = _phase_delay(p.gain, p.delay, m_idx, cfg.delta_f)
        h_c += chi * np.outer(steering(cfg.n_ut, p.aoa), steering(cfg.n_t, p.aod).conj())

    h_c_ris = np.zeros((cfg.n_ut, cfg.n_ris), complex)
    for p in scene.ris_ut:
        chi = _phase_delay(p.gain, p.delay, m_idx, cfg.delta_f)
        h_c_ris += chi * np.outer(steering(cfg.n_ut, p.aoa), steering(cfg.n_ris, p.aod))

    t_s = cfg.symbol_duration
    h_r = np.zeros((cfg.n_r, cfg.n_t), complex)
    for t in scene.targets:
        gamma = _phase_delay(t.gain, t.delay, m_idx, cfg.delta_f)
        gamma *= np.exp(2j * np.pi * (p_idx - 1) * t.doppler * t_s)
        h_r += gamma * np.outer(steering(cfg.n_r, t.angle), steering(cfg.n_t, t.angle).conj())

    return ChannelSet(g_t, g_r, h_c, h_c_ris, h_r)
