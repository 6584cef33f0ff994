import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from postsolve.measurement import (
    FourierMagnitudeOperator,
    MaskOperator,
    Measurement,
    MeasurementError,
    data_fit,
    measure,
    residual_gradient,
    sample_mask,
)


def dft2_by_sums(grid):
    """Unitary 2D DFT written as the double sum."""
    M, N = grid.shape
    m = np.arange(M)[:, None]
    n = np.arange(N)[None, :]
    out = np.zeros((M, N), complex)
    for u in range(M):
        for v in range(N):
            out[u, v] = np.sum(grid * np.exp(-2j * np.pi * (u * m / M + v * n / N)))
    return out / math.sqrt(M * N)


def test_sample_mask_keep_all(rng):
    op = sample_mask(7, 1.0, rng)
    assert op.kept_indices == tuple(range(7))


def test_sample_mask_concentration(rng):
    op = sample_mask(10_000, 0.5, rng)
    assert 0.47 <= op.output_dim / 10_000 <= 0.53


def test_sample_mask_never_empty(rng):
    for _ in range(20):
        assert sample_mask(4, 0.0, rng).output_dim >= 1
        assert sample_mask(1, 0.05, rng).output_dim == 1


def test_sample_mask_bad_probability(rng):
    with pytest.raises(MeasurementError):
        sample_mask(4, 1.5, rng)


def test_mask_row_selection(rng):
    op = MaskOperator((0, 2), 4, noise_sigma=0.0)
    y = measure(op, np.array([1.0, 2.0, 3.0, 4.0]), rng)
    assert np.array_equal(y.values, [1.0, 3.0])
    assert y.operator_id == "mask"


def test_mask_noise_std():
    op = MaskOperator(tuple(range(4)), 4, 0.01)
    rng = np.random.default_rng(11)
    draws = np.array([measure(op, np.zeros(4), rng).values for _ in range(100_000)])
    std = draws.std(axis=0)
    assert np.all((std >= 0.0098) & (std <= 0.0102))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40).flatmap(
    lambda d: st.tuples(st.just(d), st.sets(st.integers(0, d - 1), min_size=1))))
def test_projector_identities(case):
    d, kept = case
    P = MaskOperator(tuple(kept), d).matrix()
    assert np.array_equal(P @ P.T, np.eye(len(kept)))
    PtP = P.T @ P
    assert np.array_equal(PtP, np.diag(np.diag(PtP)))
    assert set(np.diag(PtP)) <= {0.0, 1.0}


def test_mask_validation():
    with pytest.raises(MeasurementError):
        MaskOperator((), 3)
    with pytest.raises(MeasurementError):
        MaskOperator((1, 1), 3)
    with pytest.raises(MeasurementError):
        MaskOperator((3,), 3)


def test_mask_gradient_example():
    op = MaskOperator((1,), 3)
    assert np.array_equal(residual_gradient(op, [5.0, 2.0, 7.0], [0.0]), [0.0, 2.0, 0.0])


def test_gradient_vanishes_on_consistent_signal(rng):
    op = MaskOperator((0, 3, 4), 6)
    z = rng.normal(size=6)
    assert np.array_equal(residual_gradient(op, z, op.forward(z)), np.zeros(6))


def test_measurement_length_checked():
    with pytest.raises(MeasurementError):
        Measurement(np.zeros(3), MaskOperator((0, 1), 4))


def test_fourier_constant_vector(rng):
    L, c = 6, 1.7
    op = FourierMagnitudeOperator(1, L, oversample_keep=1, oversample_of=1, noise_sigma=0.0)
    y = measure(op, c * np.ones(L), rng).values
    np.testing.assert_allclose(y, [math.sqrt(L) * c] + [0.0] * (L - 1), atol=1e-12)


def test_fourier_default_keeps_quarter():
    op = FourierMagnitudeOperator(8, 8)
    assert op.output_dim == 64
    assert len(op.kept_indices) == 16
    assert op.kept_indices == tuple(range(0, 64, 4))


@pytest.mark.parametrize("shape", [(1, 1), (3, 5), (8, 8), (17, 4), (64, 64)])
def test_parseval(shape, rng):
    op = FourierMagnitudeOperator(*shape, oversample_keep=1, oversample_of=1)
    v = rng.normal(size=shape[0] * shape[1])
    assert abs(np.linalg.norm(op.spectrum(v)) / np.linalg.norm(v) - 1) <= 1e-9


@pytest.mark.parametrize("shape", [(2, 3), (4, 4), (5, 2)])
def test_spectrum_matches_direct_sum(shape, rng):
    op = FourierMagnitudeOperator(*shape, oversample_keep=1, oversample_of=1)
    v = rng.normal(size=shape[0] * shape[1])
    np.testing.assert_allclose(op.spectrum(v), dft2_by_sums(v.reshape(shape)).ravel(),
                               atol=1e-12)


def test_fourier_gradient_central_differences(rng):
    op = FourierMagnitudeOperator(4, 4)
    z = rng.normal(size=16)
    y = measure(op, rng.normal(size=16), rng)
    g = residual_gradient(op, z, y)
    h = 1e-6
    fd = np.array([(data_fit(op, z + h * e, y) - data_fit(op, z - h * e, y)) / (2 * h)
                   for e in np.eye(16)])
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-5


def test_fourier_directional_derivative(rng):
    op = FourierMagnitudeOperator(3, 5, oversample_keep=3, oversample_of=4)
    worst = 0.0
    for _ in range(20):
        z, delta = rng.normal(size=(2, 15))
        y = measure(op, rng.normal(size=15), rng)
        h = 1e-6
        fd = (data_fit(op, z + h * delta, y) - data_fit(op, z - h * delta, y)) / (2 * h)
        worst = max(worst, abs(residual_gradient(op, z, y) @ delta - fd) / abs(fd))
    assert worst <= 1e-5


def test_fourier_gradient_zero_outside_kept(rng):
    op = FourierMagnitudeOperator(4, 4)
    g = residual_gradient(op, rng.normal(size=16), rng.normal(size=16))
    assert np.all(g[~op.measured] == 0.0)


def test_fourier_gradient_zero_signal_is_finite():
    op = FourierMagnitudeOperator(2, 2)
    g = residual_gradient(op, np.zeros(4), np.ones(4))
    assert np.array_equal(g, np.zeros(4))


def test_fourier_validation():
    with pytest.raises(MeasurementError):
        FourierMagnitudeOperator(0, 4)
    with pytest.raises(MeasurementError):
        FourierMagnitudeOperator(2, 2, oversample_keep=9, oversample_of=8)
