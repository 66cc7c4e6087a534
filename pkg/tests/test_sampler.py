import io
import math

import numpy as np
import pytest
from scipy import stats

from ncbm.core import PointMeasure, WeylVector
from ncbm.errors import OrderViolation, SizeMismatch, StepFailure
from ncbm.kernels import kernel_finite
from ncbm.sampler import (
    SamplePath,
    SdeConfig,
    entrance_step,
    read_path_binary,
    read_paths_csv,
    sample_fixed_time,
    simulate_ensemble,
    simulate_sde,
    write_path_binary,
    write_paths_csv,
)

# Tracy-Widom (beta = 2) mean, for the edge-corrected GUE oracle
TW2_MEAN = -1.7710868074


# -- configuration types ----------------------------------------------------------------


def test_sde_config_validation():
    with pytest.raises(ValueError):
        SdeConfig(dt_max=0.0)
    with pytest.raises(ValueError):
        SdeConfig(t_end=-1.0)
    with pytest.raises(ValueError):
        SdeConfig(t_end=1.0, record_times=(0.5, 0.2))
    with pytest.raises(ValueError):
        SdeConfig(drift="other")
    assert SdeConfig(t_end=2.0).records() == (2.0,)


def test_sample_path_validation():
    with pytest.raises(OrderViolation):
        SamplePath(np.array([0.0, 1.0]), np.array([[0.0, 1.0], [1.0, 0.5]]), 1, "euler-maruyama")
    with pytest.raises(OrderViolation):
        SamplePath(np.array([1.0, 1.0]), np.array([[0.0, 1.0], [0.0, 1.0]]), 1, "euler-maruyama")
    with pytest.raises(SizeMismatch):
        SamplePath(np.array([0.0]), np.array([[0.0, 1.0], [0.0, 2.0]]), 1, "euler-maruyama")
    p = SamplePath(np.array([0.5]), np.array([[0.0, 1.0]]), 3, "matrix-model")
    assert p.n == 2 and p.at(0) == WeylVector((0.0, 1.0))


# -- matrix model --------------------------------------------------------------------------


def test_fixed_time_single_and_batch():
    w = sample_fixed_time((0.0, 1.0), 1.0, seed=3)
    assert isinstance(w, WeylVector) and len(w) == 2
    arr = sample_fixed_time((0.0, 1.0), 1.0, seed=3, n_samples=5)
    assert arr.shape == (5, 2)
    assert np.all(np.diff(arr, axis=1) > 0)
    np.testing.assert_array_equal(arr, sample_fixed_time((0.0, 1.0), 1.0, seed=3, n_samples=5))


def test_fixed_time_chunks_are_independent_of_batch_size():
    # each chunk of paths owns its own stream, so a full first chunk is reused
    a = sample_fixed_time((0.0, 1.0), 1.0, seed=8, n_samples=1024)
    b = sample_fixed_time((0.0, 1.0), 1.0, seed=8, n_samples=1500)
    np.testing.assert_array_equal(a, b[:1024])


def test_fixed_time_size_mismatch():
    with pytest.raises(SizeMismatch):
        sample_fixed_time((0.0, 1.0), 1.0, N=3)


def test_one_particle_matrix_model_is_gaussian():
    nu, t = 0.7, 1.8
    x = sample_fixed_time([nu], t, seed=5, n_samples=20_000)[:, 0]
    assert stats.kstest(x, "norm", args=(nu * t, math.sqrt(t))).pvalue > 0.01


def test_gue_edge_scaling():
    n, samples = 50, 2000
    top = sample_fixed_time(np.zeros(n), 1.0, seed=11, n_samples=samples)[:, -1]
    expected = 2 * math.sqrt(n) + TW2_MEAN * n ** (-1 / 6)
    assert abs(top.mean() - expected) < 0.1
    assert 0.9 < top.mean() / (2 * math.sqrt(n)) < 1.0
    # diffusive scaling in t
    top4 = sample_fixed_time(np.zeros(n), 4.0, seed=11, n_samples=samples)[:, -1]
    np.testing.assert_allclose(top4, 2 * top, rtol=1e-12)


def test_one_point_histogram_matches_kernel_diagonal():
    nu, t, n_samples = (0.0, 1.0), 1.0, 100_000
    pts = sample_fixed_time(nu, t, seed=17, n_samples=n_samples).ravel()
    edges = np.linspace(-3.5, 4.5, 41)
    counts, _ = np.histogram(pts, edges)
    g, w = np.polynomial.legendre.leggauss(12)
    expected = []
    for a, b in zip(edges[:-1], edges[1:]):
        z = 0.5 * (b - a) * g + 0.5 * (a + b)
        expected.append(0.5 * (b - a) * (w * kernel_finite(nu, t, z, t, z)).sum() * n_samples)
    expected = np.array(expected)
    # Poisson-scale bands per bin, with a Bonferroni-style 4.5 sigma margin
    assert np.all(np.abs(counts - expected) <= 4.5 * np.sqrt(expected) + 1)


def test_entrance_collapses():
    spreads = [np.abs(entrance_step((0.0, 1.0, 2.0), t0, seed=2, n_samples=500)).max() for t0 in (1e-2, 1e-4, 1e-6)]
    assert spreads[0] > spreads[1] > spreads[2]
    assert spreads[2] < 1e-2


def test_one_particle_entrance_is_gaussian():
    x = entrance_step([2.0], 1e-3, seed=4, n_samples=5000)[:, 0]
    assert stats.kstest(x, "norm", args=(2e-3, math.sqrt(1e-3))).pvalue > 0.01


def test_long_time_limit():
    nu = np.array([0.0, 1.0])
    rms, means = [], []
    for t in (4.0, 16.0, 64.0):
        x = sample_fixed_time(nu, t, seed=21, n_samples=10_000) / t
        dev = x - nu
        rms.append(np.sqrt((dev**2).mean()))
        means.append(np.abs(dev.mean(axis=0)).max())
        # fluctuations are O(t^{-1/2})
        assert 0.7 < rms[-1] * math.sqrt(t) < 1.4
    assert rms[0] > rms[1] > rms[2]
    assert means[0] > means[2]


# -- Euler-Maruyama --------------------------------------------------------------------------


def test_one_particle_sde_moments():
    cfg = SdeConfig(t_end=1.0, dt_max=1e-2)
    nu = 0.6
    _, pos = simulate_ensemble(PointMeasure.from_points([0.0]), [nu], cfg, 10_000, seed=1)
    x = pos[:, -1, 0]
    se = 1 / math.sqrt(len(x))
    assert abs(x.mean() - nu) < 3 * se
    assert abs(x.var() - 1.0) < 3 * math.sqrt(2) * se


def test_sde_keeps_order_at_every_record():
    grid = tuple(np.round(np.arange(1, 101) * 0.01, 10))
    cfg = SdeConfig(t_end=1.0, record_times=grid)
    times, pos = simulate_ensemble(PointMeasure.from_points([-1.0, 1.0]), (0.0, 0.0), cfg, 200, seed=2)
    assert times[0] == 0.0 and len(times) == 101
    assert np.all(np.diff(pos, axis=-1) > 0)


def test_sde_seed_determinism():
    cfg = SdeConfig(t_end=0.2, record_times=(0.1, 0.2))
    a = simulate_sde(PointMeasure.delta(3), (0.0, 0.5, 1.0), cfg, seed=9)
    b = simulate_sde(PointMeasure.delta(3), (0.0, 0.5, 1.0), cfg, seed=9)
    c = simulate_sde(PointMeasure.delta(3), (0.0, 0.5, 1.0), cfg, seed=10)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.times, b.times)
    assert not np.array_equal(a.positions, c.positions)
    assert a.times[0] == cfg.t0


def test_sde_rejects_bad_starts():
    cfg = SdeConfig(t_end=0.1)
    with pytest.raises(ValueError):
        simulate_sde(PointMeasure.from_atoms([(1.0, 2)]), (0.0, 1.0), cfg)
    with pytest.raises(ValueError):
        simulate_sde(PointMeasure.from_atoms([(0.0, 2), (1.0, 1)]), (0.0, 1.0, 2.0), cfg)
    with pytest.raises(SizeMismatch):
        simulate_sde(PointMeasure.from_points([0.0, 1.0]), (0.0, 1.0, 2.0), cfg)


def test_step_failure_is_reported():
    # no room for halving: the first rejected proposal must raise
    cfg = SdeConfig(t_end=0.05, c=1.0, dt_min=0.99)
    with pytest.raises(StepFailure):
        simulate_ensemble(PointMeasure.from_points([-0.1, 0.1]), (0.0, 0.0), cfg, 500, seed=3)


def test_exact_drift_matches_matrix_model_and_literal_does_not():
    nu, n_paths = (0.0, 2.0), 2000
    ref = sample_fixed_time(nu, 1.0, seed=50, n_samples=20_000)
    exact = simulate_ensemble(PointMeasure.delta(2), nu, SdeConfig(), n_paths, seed=51)[1][:, -1]
    literal = simulate_ensemble(PointMeasure.delta(2), nu, SdeConfig(drift="literal"), n_paths, seed=51)[1][:, -1]
    p_exact = min(stats.ks_2samp(exact[:, j], ref[:, j]).pvalue for j in range(2))
    p_literal = min(stats.ks_2samp(literal[:, j], ref[:, j]).pvalue for j in range(2))
    assert p_exact > 0.01
    assert p_literal < 1e-6


# -- export ------------------------------------------------------------------------------------


def _some_paths():
    cfg = SdeConfig(t_end=0.1, record_times=(0.05, 0.1))
    times, pos = simulate_ensemble(PointMeasure.from_points([0.0, 1.0]), (0.0, 1.0), cfg, 3, seed=4)
    return [SamplePath(times, p, 4, "euler-maruyama") for p in pos]


def test_csv_round_trip():
    paths = _some_paths()
    buf = io.StringIO()
    write_paths_csv(buf, paths, ["seed: 4"])
    text = buf.getvalue()
    assert text.startswith("# seed: 4\npath,time,x_1,x_2\n")
    back = read_paths_csv(io.StringIO(text))
    assert len(back) == 3
    for a, b in zip(paths, back):
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.positions, b.positions)


def test_binary_round_trip():
    paths = _some_paths()
    buf = io.BytesIO()
    for p in paths:
        write_path_binary(buf, p)
    raw = buf.getvalue()
    assert raw[:8] == b"NCBMPATH"
    assert raw[8:16] == (2).to_bytes(4, "little") + (3).to_bytes(4, "little")
    buf.seek(0)
    for p in paths:
        q = read_path_binary(buf)
        np.testing.assert_array_equal(p.times, q.times)
        np.testing.assert_array_equal(p.positions, q.positions)


def test_binary_rejects_bad_magic():
    with pytest.raises(ValueError):
        read_path_binary(io.BytesIO(b"XXXXXXXX" + bytes(8)))
