import json

import numpy as np
import pytest

from qimlab.errors import DimensionMismatch, ZeroDimension, ZeroSignal
from qimlab.measurements import (SensingEnsemble, add_amplitude_noise, adjoint_map,
                                 cdp_dense_matrix, cdp_from_masks, forward_map,
                                 gen_cdp_ensemble, gen_gaussian_ensemble, intensities,
                                 load_ensemble, realized_snr_db, save_ensemble)
from qimlab.rng import stream


def test_gaussian_empirical_covariance():
    E = gen_gaussian_ensemble(2, 10000, "real", seed=7)
    cov = E.rows.T @ E.rows / E.m
    assert np.max(np.abs(cov - np.eye(2))) <= 0.08


def test_zero_dimension():
    with pytest.raises(ZeroDimension):
        gen_gaussian_ensemble(0, 5, "real", seed=1)
    with pytest.raises(ZeroDimension):
        gen_gaussian_ensemble(3, 0, "real", seed=1)
    with pytest.raises(ZeroDimension):
        gen_cdp_ensemble(0, 2, seed=1)
    with pytest.raises(ZeroDimension):
        gen_cdp_ensemble(8, 0, seed=1)


def test_complex_second_moment():
    E = gen_gaussian_ensemble(3, 20000, "complex", seed=9)
    e1 = np.zeros(3)
    e1[0] = 1.0
    y = intensities(E, e1).y
    assert 0.95 <= y.mean() <= 1.05


def test_ensemble_determinism_and_immutability():
    a = gen_gaussian_ensemble(8, 32, "real", seed=5)
    b = gen_gaussian_ensemble(8, 32, "real", seed=5)
    assert np.array_equal(a.rows, b.rows)
    with pytest.raises(ValueError):
        a.rows[0, 0] = 1.0


def test_cdp_measurement_count():
    E = gen_cdp_ensemble(16, 7, seed=5)
    assert E.m == 112 and E.L == 7


def test_cdp_identity_mask_is_plain_dft():
    E = cdp_from_masks(np.ones((1, 8)))
    g = stream(3, 9)
    x = g.standard_normal(8)
    assert np.allclose(forward_map(E, x), np.fft.fft(x), rtol=0, atol=1e-12)


def test_cdp_matches_dense_matrix():
    E = gen_cdp_ensemble(16, 3, seed=5)
    A = cdp_dense_matrix(E)
    g = stream(5, 10)
    x = g.standard_normal(16) + 1j * g.standard_normal(16)
    zf = forward_map(E, x)
    zd = A @ x
    assert np.max(np.abs(zf - zd)) <= 1e-10 * max(1.0, np.max(np.abs(zd)))


def test_cdp_basis_vector_energy():
    # x = e_1 concentrates all the energy on the first mask column
    E = gen_cdp_ensemble(16, 3, seed=5)
    x = np.zeros(16)
    x[0] = 2.0
    y = intensities(E, x).y
    expected = E.n * np.abs(E.masks[:, 0]) ** 2 * abs(x[0]) ** 2
    assert np.isclose(y.sum(), expected.sum(), rtol=1e-12)
    dense = np.abs(cdp_dense_matrix(E) @ x) ** 2
    assert np.allclose(y, dense, rtol=1e-10)


def test_forward_identity_rows():
    E = SensingEnsemble("explicit", "real", 4, 4, 0, rows=np.eye(4))
    u = np.array([1.5, -2.0, 0.25, 3.0])
    assert np.array_equal(forward_map(E, u), u)


def test_forward_scalar():
    E = SensingEnsemble("explicit", "real", 1, 1, 0, rows=np.array([[2.0]]))
    assert forward_map(E, np.array([3.0]))[0] == 6.0


def test_forward_dimension_mismatch():
    E = gen_gaussian_ensemble(4, 8, "real", seed=1)
    with pytest.raises(DimensionMismatch):
        forward_map(E, np.zeros(5))
    with pytest.raises(DimensionMismatch):
        adjoint_map(E, np.zeros(5))


@pytest.mark.parametrize("make", [
    lambda: gen_gaussian_ensemble(12, 40, "real", seed=2),
    lambda: gen_gaussian_ensemble(12, 40, "complex", seed=2),
    lambda: gen_cdp_ensemble(12, 4, seed=2),
])
def test_adjoint_identity(make):
    E = make()
    g = stream(17, 1)
    for _ in range(100):
        u = g.standard_normal(E.n) + (1j * g.standard_normal(E.n) if E.is_complex else 0)
        v = g.standard_normal(E.m) + (1j * g.standard_normal(E.m) if E.is_complex else 0)
        lhs = np.vdot(v, forward_map(E, u))
        rhs = np.vdot(adjoint_map(E, v), u)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_intensities_zero_signal():
    E = gen_gaussian_ensemble(6, 20, "real", seed=3)
    assert np.all(intensities(E, np.zeros(6)).y == 0.0)


def test_intensities_sign_invariance_bitwise():
    E = gen_gaussian_ensemble(6, 20, "real", seed=3)
    x = stream(4, 2).standard_normal(6)
    assert np.array_equal(intensities(E, x).y, intensities(E, -x).y)


def test_intensities_global_phase_invariance():
    E = gen_gaussian_ensemble(6, 20, "complex", seed=3)
    g = stream(4, 3)
    x = g.standard_normal(6) + 1j * g.standard_normal(6)
    y0 = intensities(E, x).y
    y1 = intensities(E, np.exp(0.7j) * x).y
    assert np.allclose(y0, y1, rtol=1e-12)


def test_intensities_scalar():
    E = SensingEnsemble("explicit", "real", 1, 1, 0, rows=np.array([[1.0]]))
    assert intensities(E, np.array([2.0])).y[0] == 4.0


def test_noise_sentinel_noiseless():
    E = gen_gaussian_ensemble(8, 32, "real", seed=6)
    x = stream(6, 4).standard_normal(8)
    data = add_amplitude_noise(E, x, float("inf"), seed=0)
    assert np.array_equal(data.y, intensities(E, x).y)
    assert data.clamp_count == 0


def test_noise_realized_snr_exact():
    E = gen_gaussian_ensemble(32, 256, "real", seed=6)
    x = stream(7, 5).standard_normal(32)
    clean = intensities(E, x).y
    for snr in (10.0, 40.0, 60.0):
        data = add_amplitude_noise(E, x, snr, seed=3)
        assert abs(realized_snr_db(data, clean) - snr) <= 1e-9


def test_noise_relative_rms():
    # by construction ||eta|| / ||b|| = 10^(-snr/20) exactly
    E = gen_gaussian_ensemble(128, 8 * 128, "real", seed=8)
    x = stream(8, 6).standard_normal(128)
    data = add_amplitude_noise(E, x, 60.0, seed=4)
    clean = intensities(E, x).y
    ratio = np.linalg.norm(data.eta) / np.sqrt(clean.sum())
    assert abs(ratio - 1e-3) <= 1e-15


def test_noise_clamping_at_low_snr():
    E = gen_gaussian_ensemble(64, 512, "real", seed=9)
    x = stream(9, 7).standard_normal(64)
    data = add_amplitude_noise(E, x, -20.0, seed=5)
    assert data.clamp_count > 0
    assert np.all(data.y >= 0.0)
    assert np.count_nonzero(data.amplitudes < 0) == data.clamp_count


def test_noise_zero_signal_raises():
    E = gen_gaussian_ensemble(8, 32, "real", seed=6)
    with pytest.raises(ZeroSignal):
        add_amplitude_noise(E, np.zeros(8), 30.0, seed=0)


@pytest.mark.parametrize("make", [
    lambda: gen_gaussian_ensemble(10, 30, "real", seed=12),
    lambda: gen_gaussian_ensemble(10, 30, "complex", seed=12),
    lambda: gen_cdp_ensemble(10, 3, seed=12),
])
def test_serialization_roundtrip(make, tmp_path):
    E = make()
    path = tmp_path / "ensemble.bin"
    save_ensemble(E, path)
    F = load_ensemble(path)
    assert (F.kind, F.field, F.n, F.m, F.seed) == (E.kind, E.field, E.n, E.m, E.seed)
    if E.rows is not None:
        assert np.array_equal(E.rows, F.rows)
    if E.masks is not None:
        assert np.array_equal(E.masks, F.masks)
    # header is honest JSON
    raw = path.read_bytes()
    hlen = int(np.frombuffer(raw[8:16], dtype=np.uint64)[0])
    header = json.loads(raw[16:16 + hlen])
    assert header["kind"] == E.kind and header["m"] == E.m


def test_covariance_concentration_property():
    # max-entry deviation <= 5/sqrt(m) across several seeds at m = 10^4
    m = 10_000
    bound = 5.0 / np.sqrt(m)
    failures = 0
    for seed in range(10):
        E = gen_gaussian_ensemble(4, m, "real", seed=seed)
        cov = E.rows.T @ E.rows / m
        if np.max(np.abs(cov - np.eye(4))) > bound:
            failures += 1
    assert failures == 0
