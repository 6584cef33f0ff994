import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from postsolve.measurement import MaskOperator, Measurement, measure
from postsolve.oracle import product_of_gaussians
from postsolve.posterior import (
    LangevinState,
    NonFiniteIterateError,
    PosteriorConfig,
    decay_sequence,
    dps_step,
    langevin_energy,
    langevin_step,
    renoise,
    run_langevin,
    step_size_decay,
    weighted_inject,
)
from postsolve.schedule import NoiseSchedule
from postsolve.score import GaussianMixtureScore

CLEAN = NoiseSchedule(2, 0.0, 0.0, np.array([1.0, 0.5]))


def plain_decay_table(h0, T):
    table, h = [h0], h0
    for k in range(1, T + 1):
        h = (1 + (k / T) * (0.01 - 1)) * h
        table.append(h)
    return table


def test_inject_examples():
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert np.array_equal(weighted_inject(a, b, 0.0), a)
    np.testing.assert_allclose(weighted_inject(a, b, 0.1), [0.9, 0.1], rtol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=5), st.floats(0, 0.2))
def test_inject_equal_points(v, w):
    z = np.array(v)
    np.testing.assert_allclose(weighted_inject(z, z, w), z, rtol=1e-15, atol=1e-300)


def test_inject_warns_above_recommended_range():
    with pytest.warns(UserWarning):
        weighted_inject(np.zeros(2), np.ones(2), 0.5)
    with pytest.raises(ValueError):
        weighted_inject(np.zeros(2), np.ones(2), 1.5)


def test_config_w_range():
    with pytest.warns(UserWarning):
        PosteriorConfig(inject_weight=0.5)
    with pytest.raises(ValueError):
        PosteriorConfig(inject_weight=-0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        PosteriorConfig(inject_weight=0.2)


def test_config_defaults():
    cfg = PosteriorConfig()
    assert (cfg.outer_iters, cfg.inner_solver_steps, cfg.langevin_steps) == (5, 1, 100)
    assert (cfg.step_size, cfg.inject_weight, cfg.data_scale, cfg.keep_probability) == \
        (1e-5, 0.1, 0.01, 0.5)


def test_zero_drift_fixed_point():
    op = MaskOperator((0, 2), 3)
    z = np.array([0.3, -1.0, 2.0])
    y = Measurement(op.forward(z), op)
    state = LangevinState(z, z.copy(), np.zeros(3), 0, 1e-3)
    cfg = PosteriorConfig(inject_weight=0.0)
    out = langevin_step(state, op, y, 0.5, cfg, noise=np.zeros(3))
    assert np.array_equal(out.iterate, z)


def test_scalar_step_example():
    op = MaskOperator((0,), 1)
    state = LangevinState(np.array([1.0]), np.array([0.0]), np.array([0.0]), 0, 0.1)
    cfg = PosteriorConfig(inject_weight=0.0, data_scale=1.0, step_size=0.1)
    out = langevin_step(state, op, Measurement([0.0], op), 1.0, cfg, noise=np.zeros(1))
    assert out.iterate[0] == pytest.approx(0.8, abs=1e-15)


def test_non_finite_iterate_aborts_with_step_index():
    op = MaskOperator((0,), 1)
    state = LangevinState(np.array([1e308]), np.array([-1e308]), np.array([0.0]), 6, 1.0)
    with pytest.raises(NonFiniteIterateError) as err:
        langevin_step(state, op, Measurement([0.0], op), 1e-3, PosteriorConfig(), noise=np.zeros(1))
    assert err.value.step_index == 7


def test_decay_endpoints():
    assert step_size_decay(1e-5, 0, 100, 3.0) == 3.0
    assert step_size_decay(1e-5, 100, 100, 3.0) == pytest.approx(0.03, rel=1e-15)
    with pytest.raises(ValueError):
        step_size_decay(1e-5, 101, 100)


def test_decay_table_bitwise():
    assert decay_sequence(1e-5, 100).tolist() == plain_decay_table(1e-5, 100)


def test_decay_table_frozen_values():
    seq = decay_sequence(1e-5, 100)
    assert seq[1] == pytest.approx(9.901e-6, rel=1e-15)
    assert seq[2] == pytest.approx(9.7049602e-6, rel=1e-15)
    assert seq[3] == pytest.approx(9.41672288206e-6, rel=1e-15)


def test_decay_endpoint_product_high_precision():
    with mpmath.workdps(40):
        h = mpmath.mpf("1e-5")
        for k in range(1, 101):
            h *= 1 - mpmath.mpf("0.99") * k / 100
        ref = float(h)
    end = decay_sequence(1e-5, 100)[-1]
    assert end == pytest.approx(ref, rel=1e-13)


def test_decay_strictly_positive_and_decreasing():
    seq = decay_sequence(1e-5, 100)
    assert np.all(seq > 0)
    assert np.all(np.diff(seq) < 0)


def test_run_langevin_uses_decayed_steps(rng):
    op = MaskOperator((0, 1), 3)
    cfg = PosteriorConfig(langevin_steps=10, inject_weight=0.0)
    used = []
    run_langevin(np.zeros(3), np.zeros(3), op, Measurement([1.0, 1.0], op), 0.5, cfg, rng,
                 callback=lambda s, e, h: used.append(h))
    assert used == plain_decay_table(1e-5, 10)[:10]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), sigma_t=st.floats(0.05, 1.0), m=st.floats(0.01, 1.0),
       frac=st.floats(0.05, 0.95))
def test_deterministic_drift_decreases_energy(seed, sigma_t, m, frac):
    rng = np.random.default_rng(seed)
    d = 6
    op = MaskOperator((0, 2, 3), d)
    anchor = rng.normal(size=d)
    y = Measurement(rng.normal(size=3), op)
    L = 1 / sigma_t**2 + 1 / m**2
    h = frac / L
    cfg = PosteriorConfig(inject_weight=0.0, data_scale=m, step_size=h, langevin_steps=20)
    state = LangevinState(rng.normal(size=d) * 3, anchor, anchor, 0, h)
    e = langevin_energy(state.iterate, anchor, op, y, sigma_t, m)
    for _ in range(20):
        state = langevin_step(state, op, y, sigma_t, cfg, noise=np.zeros(d))
        e_new = langevin_energy(state.iterate, anchor, op, y, sigma_t, m)
        assert e_new <= e * (1 + 1e-12)
        e = e_new


def test_stationary_moments_small_step_ensemble():
    d = 8
    op = MaskOperator((1, 4, 5), d)
    rng = np.random.default_rng(2)
    anchor = rng.uniform(1, 2, d)
    y = Measurement(rng.uniform(2, 3, 3), op)
    sigma_t, m, h = 0.3, 0.1, 2e-4
    cfg = PosteriorConfig(step_size=h, inject_weight=0.0, data_scale=m, langevin_steps=1)
    state = LangevinState(np.tile(anchor, (1000, 1)), anchor, anchor, 0, h)
    s1 = np.zeros(d)
    s2 = np.zeros(d)
    n = 0
    for k in range(8000):
        state = langevin_step(state, op, y, sigma_t, cfg, rng, decay=False)
        if k >= 3000:
            s1 += state.iterate.sum(0)
            s2 += (state.iterate**2).sum(0)
            n += 1000
    mean = s1 / n
    var = s2 / n - mean**2
    target = product_of_gaussians(anchor, sigma_t, op, y, m)
    assert np.max(np.abs(mean / target.mean - 1)) < 0.05
    assert np.max(np.abs(var / target.diag_covariance - 1)) < 0.05


def test_dps_trivial_cases(sched, rng):
    op = MaskOperator(tuple(range(3)), 3)
    z_t, prev, z_hat = rng.normal(size=(3, 3))
    jac = rng.normal(size=(3, 3))
    assert np.array_equal(dps_step(z_t, z_hat, op, op.forward(z_hat), 0.1, prev, np.eye(3)), prev)
    assert np.array_equal(dps_step(z_t, z_hat, op, rng.normal(size=3), 0.0, prev, jac), prev)


def test_dps_gradient_matches_finite_differences(sched, rng):
    d, t, eta = 3, 400, 0.05
    model = GaussianMixtureScore.single(np.zeros(d), np.ones(d))
    op = MaskOperator(tuple(range(d)), d)
    z_t, y, prev = rng.normal(size=(3, d))
    a = sched.alpha(t)
    z_hat = model.posterior_mean(z_t, t, sched)
    np.testing.assert_allclose(z_hat, a * z_t, rtol=1e-13)
    jac = model.tweedie_jacobian(z_t, t, sched)
    out = dps_step(z_t, z_hat, op, y, eta, prev, jac)

    def objective(x):
        r = y - a * x
        return -(r @ r)

    fd = np.array([(objective(z_t + 1e-6 * e) - objective(z_t - 1e-6 * e)) / 2e-6
                   for e in np.eye(d)])
    np.testing.assert_allclose(out, prev + eta * fd, rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(fd, -2 * a * (a * z_t - y), rtol=1e-7)


def test_dps_dimension_mismatch():
    op = MaskOperator((0,), 2)
    with pytest.raises(ValueError):
        dps_step(np.zeros(2), np.zeros(2), op, [0.0], 0.1, np.zeros(3), np.eye(2))


def test_renoise_clean_time_returns_input(rng):
    z = rng.normal(size=4)
    assert np.array_equal(renoise(z, 1, CLEAN, rng), z)


def test_renoise_variance(sched):
    out = renoise(np.zeros(100_000), 401, sched, np.random.default_rng(4))
    assert abs(out.var() / (1 - sched.alpha_bar(401)) - 1) < 0.02


def test_renoise_mean_scaling(sched):
    with mpmath.workdps(40):
        acc = mpmath.mpf(1)
        for s in range(401):
            acc *= 1 - (mpmath.mpf("0.0001") + mpmath.mpf("0.0199") * s / 999)
        ref = float(mpmath.sqrt(acc))
    z = np.array([2.0, -1.0])
    noise = np.random.default_rng(9).standard_normal(2)
    out = renoise(z, 401, sched, np.random.default_rng(9))
    np.testing.assert_allclose((out - sched.sigma(401) * noise) / z, ref, rtol=1e-12)


def test_renoise_unscaled_variant(sched):
    z = np.array([2.0, -1.0])
    noise = np.random.default_rng(9).standard_normal(2)
    out = renoise(z, 401, sched, np.random.default_rng(9), scaled=False)
    np.testing.assert_allclose(out, z + sched.sigma(401) * noise, rtol=1e-15)


def test_injection_shifts_renoise_mean_by_constant(sched, rng):
    z_hat, z_in = rng.normal(size=(2, 5))
    w = 0.1
    seed = 17
    plain = renoise(z_hat, 301, sched, np.random.default_rng(seed))
    mixed = renoise(weighted_inject(z_hat, z_in, w), 301, sched, np.random.default_rng(seed))
    shift = sched.alpha(301) * w * (z_in - z_hat)
    np.testing.assert_allclose(mixed - plain, shift, rtol=1e-12, atol=1e-15)


def test_large_step_matches_discrete_stationary_variance():
    # h = 1e-4, sigma_t = 1, m = 0.01: on measured coordinates h·L = 1.0001, where the
    # unadjusted chain's variance 2/(L(2 - hL)) is about twice the target 1/L
    d, h, sigma_t, m = 4, 1e-4, 1.0, 0.01
    op = MaskOperator((0, 1), d)
    anchor = np.array([1.0, 1.5, 2.0, 1.2])
    y = Measurement([2.0, 2.5], op)
    cfg = PosteriorConfig(step_size=h, inject_weight=0.0, data_scale=m, langevin_steps=1)
    rng = np.random.default_rng(8)
    state = LangevinState(np.tile(anchor, (20000, 1)), anchor, anchor, 0, h)
    for _ in range(50):
        state = langevin_step(state, op, y, sigma_t, cfg, rng, decay=False)
    L = 1 / sigma_t**2 + 1 / m**2
    var = state.iterate[:, :2].var(axis=0)
    np.testing.assert_allclose(var, 2 / (L * (2 - h * L)), rtol=0.03)
    target = product_of_gaussians(anchor, sigma_t, op, y, m).diag_covariance[:2]
    assert np.all(var / target > 1.9)
