import numpy as np
import pytest

from risisac.airlink import (
    dbm_to_watt,
    load_stacks,
    noise_sigma2,
    save_stacks,
    simulate_bs_stacks,
    simulate_ut_stacks,
    uplink_probe,
    ut_probe,
)
from risisac.channels import Codebooks, build_codebooks, channels_at
from risisac.geometry import SceneConfig, synthesize_scene, spatial_direction


def _small_scene(case=1, seed=2, n_targets=2):
    cfg = SceneConfig(n_t=8, n_r=4, n_ris=16, n_ut=8, m=64, case=case,
                      l_br=2, l_bu=2, l_ru=1, n_targets=n_targets,
                      noise_power_dbm=None)
    return synthesize_scene(cfg, np.random.default_rng(seed))


def test_dbm_conversions():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert dbm_to_watt(0.0) == pytest.approx(1e-3)


def test_noise_sigma2_noiseless_scene():
    assert noise_sigma2(_small_scene()) == 0.0


def test_bs_stacks_match_dense_channel_oracle():
    scene = _small_scene()
    cfg = scene.cfg
    books = build_codebooks(cfg.n_t, cfg.n_ris, cfg.n_ut)
    y = simulate_bs_stacks(scene, books, p_t_dbm=30.0)
    amp = 1.0  # 30 dBm = 1 W

    d_n = Codebooks.directions(cfg.n_t)
    worst = 0.0
    for m in range(cfg.m):
        for n in range(cfg.n_t):
            b = books.b[n]
            v = np.sqrt(cfg.n_r) * np.exp(
                1j * np.pi * np.arange(cfg.n_r) * d_n[n]) / cfg.n_r
            for s in range(cfg.n_ris):
                ch = channels_at(scene, m + 1, n * cfg.n_ris + s + 1)
                cascade = v.conj() @ ch.g_r @ np.diag(books.r[s]) @ ch.g_t @ b
                echo = v.conj() @ ch.h_r @ b
                ref = amp * (cascade + echo)
                worst = max(worst, abs(y[n, s, m] - ref))
    assert worst < 1e-12 * np.max(np.abs(y))


def test_ut_stacks_match_dense_channel_oracle():
    scene = _small_scene()
    cfg = scene.cfg
    books = build_codebooks(cfg.n_t, cfg.n_ris, cfg.n_ut)
    z = simulate_ut_stacks(scene, books, p_t_dbm=30.0)
    worst = 0.0
    for m in range(cfg.m):
        for t in range(cfg.n_ut):
            ch = channels_at(scene, m + 1, t + 1)
            for n in range(cfg.n_t):
                direct = books.u[t].conj() @ ch.h_c @ books.b[n]
                casc = (books.u[t].conj() @ ch.h_c_ris
                        @ np.diag(books.r[t]) @ ch.g_t @ books.b[n])
                ref = direct + casc
                worst = max(worst, abs(z[n, t, m] - ref))
    assert worst < 1e-12 * np.max(np.abs(z))


def test_stack_shapes_and_determinism():
    scene = _small_scene()
    cfg = scene.cfg
    cfg.noise_power_dbm = -103.0
    books = build_codebooks(cfg.n_t, cfg.n_ris, cfg.n_ut)
    y1 = simulate_bs_stacks(scene, books, rng=np.random.default_rng(5))
    y2 = simulate_bs_stacks(scene, books, rng=np.random.default_rng(5))
    assert y1.shape == (cfg.n_t, cfg.n_ris, cfg.m)
    assert np.array_equal(y1, y2)
    z = simulate_ut_stacks(scene, books, rng=np.random.default_rng(5))
    assert z.shape == (cfg.n_t, cfg.n_ut, cfg.m)


def test_ut_probe_reproduces_stack_column():
    scene = _small_scene()
    cfg = scene.cfg
    books = build_codebooks(cfg.n_t, cfg.n_ris, cfg.n_ut)
    z = simulate_ut_stacks(scene, books)
    # with s_idx == t_idx the probe repeats a stack entry exactly
    col = ut_probe(scene, books, 3, 2, 2)
    assert np.allclose(col, z[3, 2], atol=1e-12 * np.max(np.abs(z)))
    with pytest.raises(IndexError):
        ut_probe(scene, books, cfg.n_t, 0, 0)


def test_uplink_probe_peaks_at_physical_directions():
    """The matched uplink configuration must beat mirrored pointings."""
    scene = _small_scene(seed=6, n_targets=0)
    books = build_codebooks(8, 16, 8)
    pb = scene.bs_ris[0]
    pr = scene.ris_ut[0]
    theta_br, phi_br = pb.aod, pb.aoa
    theta_ru, phi_ru = pr.aod, pr.aoa

    def power(ris_dir, ut_dir, bs_dir):
        y = uplink_probe(scene, books, ris_dir, ut_dir, bs_dir)
        return np.linalg.norm(y)

    aligned = power(-(phi_br + theta_ru), phi_ru, theta_br)
    assert aligned > power(-(phi_br + theta_ru), -phi_ru, theta_br)
    assert aligned > power(-(phi_br + theta_ru), phi_ru, -theta_br)
    assert aligned > power(phi_br + theta_ru, phi_ru, theta_br)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    stacks = (rng.normal(size=(4, 5, 6))
              + 1j * rng.normal(size=(4, 5, 6))).astype(np.complex64)
    path = tmp_path / "stacks.bin"
    save_stacks(path, stacks, seed=12)
    again, seed = load_stacks(path)
    assert seed == 12
    assert np.array_equal(again, stacks)
