import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risisac.arraymath import (
    InvalidDimensionError,
    NoPeakError,
    dft_matrix,
    dirichlet,
    idft_matrix,
    offgrid_estimate,
    steering,
    to_angle_delay,
    to_doppler_delay,
    wrap_direction,
)


def test_steering_unit_norm_and_entries():
    v = steering(16, 0.3)
    assert np.isclose(np.linalg.norm(v), 1.0)
    k = np.arange(16)
    assert np.allclose(v, np.exp(1j * np.pi * k * 0.3) / 4.0)


def test_steering_rejects_empty():
    with pytest.raises(InvalidDimensionError):
        steering(0, 0.1)


@given(st.floats(-1, 1), st.integers(1, 64))
def test_steering_periodic_in_direction(theta, n):
    assert np.allclose(steering(n, theta), steering(n, theta + 2.0))


def test_dirichlet_matches_geometric_sum():
    psi = np.linspace(-3.0, 3.0, 41)
    k = np.arange(8)
    brute = np.array([np.sum(np.exp(1j * k * p)) for p in psi])
    assert np.allclose(dirichlet(8, psi), brute)


def test_dirichlet_limit_at_zero():
    assert dirichlet(32, 0.0) == pytest.approx(32.0)
    assert dirichlet(32, 2.0 * np.pi) == pytest.approx(32.0)


@pytest.mark.parametrize("n", [4, 16, 128])
def test_transform_identity(n):
    prod = dft_matrix(n).T @ idft_matrix(n) / np.sqrt(n)
    assert np.max(np.abs(prod - np.eye(n))) < 1e-10


def test_idft_columns_are_scaled_steering():
    m = 8
    f = idft_matrix(m)
    for k in range(m):
        col = np.sqrt(m) * steering(m, 2.0 * k / m)
        assert np.allclose(f[:, k], col)


def test_angle_delay_matches_dense_product():
    rng = np.random.default_rng(5)
    for _ in range(20):
        y = rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32))
        dense = y @ idft_matrix(32)
        rel = np.max(np.abs(to_angle_delay(y) - dense)) / np.max(np.abs(dense))
        assert rel < 1e-9


def test_doppler_delay_matches_dense_product():
    rng = np.random.default_rng(6)
    y = rng.normal(size=(16, 32)) + 1j * rng.normal(size=(16, 32))
    dense = dft_matrix(16).T @ y
    assert np.allclose(to_doppler_delay(y), dense, atol=1e-12)


def test_doppler_delay_inverts_idft_sweep():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(16, 8)) + 1j * rng.normal(size=(16, 8))
    swept = idft_matrix(16) @ x
    assert np.allclose(to_doppler_delay(swept), np.sqrt(16) * x)


def test_to_angle_delay_checks_subcarrier_count():
    with pytest.raises(InvalidDimensionError):
        to_angle_delay(np.zeros((4, 8)), m=16)


def test_transforms_apply_to_stacks():
    rng = np.random.default_rng(8)
    y = rng.normal(size=(4, 6, 8)) + 1j * rng.normal(size=(4, 6, 8))
    ad = to_angle_delay(y)
    for n in range(4):
        assert np.allclose(ad[n], to_angle_delay(y[n]))
    dd = to_doppler_delay(ad)
    for n in range(4):
        assert np.allclose(dd[n], to_doppler_delay(ad[n]))


@given(st.floats(-10, 10))
def test_wrap_direction_range_and_congruence(theta):
    w = wrap_direction(theta)
    assert -1.0 <= w <= 1.0
    assert abs((theta - w) % 2.0) < 1e-9 or abs((theta - w) % 2.0 - 2.0) < 1e-9


@pytest.mark.parametrize("n", [16, 128])
def test_offgrid_estimate_exact_on_steering_vectors(n):
    rng = np.random.default_rng(42)
    w = dft_matrix(n)
    worst = 0.0
    for _ in range(1000):
        theta = rng.uniform(-1.0, 1.0)
        g_hat = w.T @ steering(n, theta)
        err = abs(wrap_direction(offgrid_estimate(g_hat) - theta))
        worst = max(worst, err)
    assert worst < 1e-6


def test_offgrid_estimate_rejects_zeros():
    with pytest.raises(NoPeakError):
        offgrid_estimate(np.zeros(8, complex))
    with pytest.raises(InvalidDimensionError):
        offgrid_estimate(np.zeros(1, complex))


@settings(max_examples=50)
@given(st.floats(-0.99, 0.99), st.floats(0.0, 2 * np.pi))
def test_offgrid_estimate_phase_invariant(theta, phase):
    n = 32
    g_hat = dft_matrix(n).T @ steering(n, theta) * np.exp(1j * phase)
    assert abs(wrap_direction(offgrid_estimate(g_hat) - theta)) < 1e-6
