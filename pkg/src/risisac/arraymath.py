"""Steering vectors, DFT conventions, domain transforms, off-grid estimation.

Spatial directions are unitless values in [-1, 1]: the sine of the physical
angle off the array broadside for a half-wavelength ULA.  All transforms are
defined by explicit matrix conventions (``idft_matrix`` / ``dft_matrix``) and
implemented with FFTs that must agree with the dense products to 1e-9.
"""

import numpy as np


class InvalidDimensionError(ValueError):
    """Raised when an array size or shape precondition is violated."""


class NoPeakError(ValueError):
    """Raised when a detection input carries no signal (all zeros)."""


def steering(n: int, theta: float) -> np.ndarray:
    """Unit-norm ULA steering vector alpha(n, theta).

    Entry k (1-based) is e^{j*pi*(k-1)*theta} / sqrt(n).

    Parameters
    ----------
    n : int
        Number of array elements, >= 1.
    theta : float
        Spatial direction (sine of the physical angle), periodic with
        period 2; values outside [-1, 1] alias.
    """
    if n < 1:
        raise InvalidDimensionError(f"steering vector length must be >= 1, got {n}")
    k = np.arange(n)
    return np.exp(1j * np.pi * k * theta) / np.sqrt(n)


def dirichlet(n: int, psi: float | np.ndarray) -> complex | np.ndarray:
    """Dirichlet kernel G_n(psi) = e^{j(n-1)psi/2} sin(n psi/2) / sin(psi/2).

    Equals the geometric sum sum_{k=0}^{n-1} e^{j k psi}; returns n at
    psi == 0 (mod 2*pi) by the continuous limit.
    """
    if n < 1:
        raise InvalidDimensionError(f"kernel order must be >= 1, got {n}")
    psi = np.asarray(psi, dtype=float)
    half = psi / 2.0
    denom = np.sin(half)
    # evaluate the limit where sin(psi/2) vanishes
    near_zero = np.isclose(denom, 0.0, atol=1e-12)
    safe = np.where(near_zero, 1.0, denom)
    val = np.exp(1j * (n - 1) * half) * np.sin(n * half) / safe
    val = np.where(near_zero, complex(n), val)
    if val.ndim == 0:
        return complex(val)
    return val


def idft_matrix(m: int) -> np.ndarray:
    """IDFT matrix F_m with column k = sqrt(m) * alpha(m, (2k-2)/m).

    Entries have unit modulus; F_m equals m times the numpy ifft matrix.
    """
    if m < 1:
        raise InvalidDimensionError(f"matrix size must be >= 1, got {m}")
    k = np.arange(m)
    return np.exp(2j * np.pi * np.outer(k, k) / m)


def dft_matrix(n: int) -> np.ndarray:
    """DFT matrix W_n with column k = alpha(n, (2-2k)/n).

    Columns are unit norm (entries have modulus 1/sqrt(n)), which makes
    W_n^T F_n / sqrt(n) = I_n hold exactly.
    """
    if n < 1:
        raise InvalidDimensionError(f"matrix size must be >= 1, got {n}")
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def to_angle_delay(y: np.ndarray, m: int | None = None) -> np.ndarray:
    """Post-multiply by F_M: accumulate subcarriers into delay bins.

    Computed as M * ifft along the last axis; equal to ``y @ idft_matrix(M)``
    to 1e-9 relative error.

    Parameters
    ----------
    y : ndarray
        Stack with subcarriers on the last axis.
    m : int, optional
        Expected subcarrier count; mismatch raises InvalidDimensionError.
    """
    y = np.asarray(y)
    if m is not None and y.shape[-1] != m:
        raise InvalidDimensionError(
            f"expected {m} subcarrier columns, got {y.shape[-1]}"
        )
    return y.shape[-1] * np.fft.ifft(y, axis=-1)


def to_doppler_delay(y_tilde: np.ndarray) -> np.ndarray:
    """Pre-multiply by dft_matrix(N)^T: accumulate sweep rows into Doppler bins.

    Computed as fft along the row axis divided by sqrt(N); equal to
    ``dft_matrix(N).T @ y_tilde`` to 1e-9 relative error.  Composition with
    an IDFT-swept input recovers it scaled: to_doppler_delay(F_N @ X) equals
    sqrt(N) * X.  For stacks with more than two axes the sweep axis is -2.
    """
    y_tilde = np.asarray(y_tilde)
    n = y_tilde.shape[-2]
    return np.fft.fft(y_tilde, axis=-2) / np.sqrt(n)


def wrap_direction(theta: float | np.ndarray) -> float | np.ndarray:
    """Wrap a spatial direction into [-1, 1] (period 2)."""
    out = np.mod(np.asarray(theta, dtype=float) + 1.0, 2.0) - 1.0
    if out.ndim == 0:
        return float(out)
    return out


def offgrid_estimate(g_hat: np.ndarray, n: int | None = None) -> float:
    """Two-bin off-grid direction estimate from a DFT-domain vector.

    ``g_hat`` is the image of (approximately) a single steering vector under
    the ``dft_matrix`` convention, i.e. bin i (1-based) peaks at direction
    (2i-2)/n.  The estimate refines the peak bin with its stronger cyclic
    neighbor and is exact on noiseless inputs.

    Returns the spatial direction wrapped into [-1, 1].
    """
    g_hat = np.asarray(g_hat)
    if n is None:
        n = g_hat.shape[0]
    if n < 2 or g_hat.shape[0] != n:
        raise InvalidDimensionError(f"need a length-{n} vector with n >= 2")
    mags = np.abs(g_hat)
    if not np.any(mags > 0):
        raise NoPeakError("all-zero input, no spectral peak to refine")
    i_star = int(np.argmax(mags))
    up = mags[(i_star + 1) % n]
    down = mags[(i_star - 1) % n]
    # tie resolved toward the higher-index neighbor
    side = 1 if up >= down else -1
    m_star = mags[i_star]
    m_nb = up if side == 1 else down
    denom = m_star**2 + m_nb**2
    gamma = side * (m_star**2 - m_nb**2) / denom
    delta = np.pi / n
    sd, cd = np.sin(delta), np.cos(delta)
    num = gamma * sd - gamma * np.sqrt(max(0.0, 1.0 - gamma**2)) * sd * cd
    den = sd**2 + gamma**2 * cd**2
    correction = np.arcsin(np.clip(num / den, -1.0, 1.0)) / np.pi
    midpoint = (2.0 * i_star + side) / n  # between bins i* and i*+side (0-based)
    return wrap_direction(midpoint - correction)
