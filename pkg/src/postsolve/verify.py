"""Oracle-equivalence and invariant checks runnable from the command line.

Each suite returns a list of :class:`Check` results; :func:`run_suites`
prints one line per check. Implementations under test can be swapped in
(``decay_fn``) so that negative controls are possible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import metrics, oracle
from .measurement import FourierMagnitudeOperator, MaskOperator, Measurement, residual_gradient, measure
from .pipeline import RunSpec, edit, reconstruct
from .posterior import (
    LangevinState,
    PosteriorConfig,
    langevin_step,
    step_size_decay,
)
from .schedule import build_ddpm_schedule, default_posterior_sequence
from .score import UNCONDITIONAL, GaussianMixtureScore, epsilon
from .solver import SolverParams, consistency_estimate, ddim_step, predict_x0

SUITES = ("schedule", "score", "solver", "measurement", "posterior", "pipeline", "metrics")


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    info: bool = False

    def line(self) -> str:
        status = "INFO" if self.info else ("PASS" if self.passed else "FAIL")
        return f"{status}  {self.name}: measured={self.measured:.3e} tol={self.tolerance:.1e}"


def _check(name, measured, tol) -> Check:
    measured = float(measured)
    return Check(name, bool(measured <= tol), measured, tol)


def random_mixture(rng, dim: int, k: int, n_labels: int = 2) -> GaussianMixtureScore:
    w = rng.uniform(0.5, 1.5, k)
    return GaussianMixtureScore.from_arrays(
        rng.normal(0, 1.5, (k, dim)),
        rng.uniform(0.2, 1.5, (k, dim)),
        w / w.sum(),
        [i % n_labels for i in range(k)],
    )


def cumprod_oracle(steps: int, beta_start: float, beta_end: float) -> list[float]:
    """Cumulative products in 50-digit arithmetic with exactly spaced betas."""
    import mpmath

    with mpmath.workdps(50):
        b0, b1 = mpmath.mpf(beta_start), mpmath.mpf(beta_end)
        acc = mpmath.mpf(1)
        out = []
        for s in range(steps):
            acc *= 1 - (b0 + (b1 - b0) * s / (steps - 1))
            out.append(float(acc))
    return out


def decay_table(h0: float, T: int) -> list[float]:
    """Running step sizes written out as a plain loop, independent of the library."""
    table = [h0]
    h = h0
    for k in range(1, T + 1):
        h = (1 + (k / T) * (0.01 - 1)) * h
        table.append(h)
    return table


def suite_schedule() -> list[Check]:
    sched = build_ddpm_schedule()
    ref = np.array(cumprod_oracle(1000, 1e-4, 0.02))
    rel = np.max(np.abs(sched.alpha_bar_array - ref) / ref)
    ab = sched.alpha_bar_array
    ts = range(1, 1001)
    vp = max(abs(sched.signal_var(t) + sched.noise_var(t) - 1.0) for t in ts)
    vp_roots = max(abs(sched.alpha(t) ** 2 + sched.sigma(t) ** 2 - 1.0) for t in ts)
    seq = default_posterior_sequence()
    return [
        _check("alpha_bar vs 50-digit cumulative product", rel, 1e-12),
        _check("alpha_bar strictly decreasing (violations)", np.sum(np.diff(ab) >= 0), 0),
        _check("sigma^2 + alpha^2 = 1 (variances, exact)", vp, 0.0),
        _check("alpha(t)^2 + sigma(t)^2 = 1 through square roots (1 ulp)", vp_roots,
               np.finfo(float).eps),
        _check("default taus", 0 if seq.taus == (501, 401, 301, 201, 101, 1) else 1, 0),
    ]


def suite_score(probes: int = 100, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    sched = build_ddpm_schedule()
    worst_fd, worst_tw = 0.0, 0.0
    for i in range(probes):
        dim = int(rng.integers(1, 4))
        model = random_mixture(rng, dim, int(rng.integers(1, 4)))
        t = int(rng.integers(20, 1001))
        z = rng.normal(0, 1.5, dim)
        cond = UNCONDITIONAL if i % 2 else int(model.labels[0])
        eps = epsilon(model, z, t, sched, cond)
        fd = oracle.central_difference(
            lambda x: oracle.gaussian_log_density(model, x, t, sched, cond), z, 1e-5)
        ref = -sched.sigma(t) * fd
        worst_fd = max(worst_fd, np.linalg.norm(eps - ref) / max(np.linalg.norm(ref), 1e-300))
        bf = oracle.brute_force_tweedie(model, z, t, sched, cond)
        worst_tw = max(worst_tw, np.max(np.abs(bf - predict_x0(z, eps, t, sched))))
    same = GaussianMixtureScore.from_arrays([[0.0, 1.0], [1.0, -1.0]], [[1.0, 0.5], [0.3, 0.3]],
                                            [0.4, 0.6], [0, 0])
    z = np.array([0.3, -0.2])
    gap = np.max(np.abs(epsilon(same, z, 300, sched, 0) - epsilon(same, z, 300, sched)))
    return [
        _check("epsilon vs finite-difference score (rel)", worst_fd, 1e-5),
        _check("brute-force Tweedie vs predict_x0(epsilon) (abs)", worst_tw, 1e-3),
        _check("single-label conditioning consistency", gap, 0.0),
    ]


class FlatSchedule:
    """Schedule stub with the same ᾱ at every timestep."""

    def __init__(self, alpha_bar: float):
        self._ab = alpha_bar

    def alpha_bar(self, t: int) -> float:
        return self._ab

    def alpha(self, t: int) -> float:
        return float(np.sqrt(self._ab))

    def sigma(self, t: int) -> float:
        return float(np.sqrt(1.0 - self._ab))


def suite_solver(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    z, e = rng.normal(size=4), rng.normal(size=4)
    ident = np.max(np.abs(ddim_step(z, e, 2, 1, FlatSchedule(0.37)) - z))
    sched = build_ddpm_schedule()
    model = random_mixture(rng, 3, 2)
    worst = 0.0
    for _ in range(20):
        z = rng.normal(size=3)
        t = int(rng.integers(1, 1001))
        est = consistency_estimate(z, t, None, model, SolverParams(), sched)
        ref = predict_x0(z, epsilon(model, z, t, sched), t, sched)
        worst = max(worst, np.max(np.abs(est - ref)))
    z = rng.normal(size=5)
    x = z.copy()
    factor = 1.0
    for t in range(501, 1, -1):
        x = ddim_step(x, sched.sigma(t) * x, t, t - 1, sched)
        a, ap = sched.alpha_bar(t), sched.alpha_bar(t - 1)
        factor *= np.sqrt(ap * a) + np.sqrt((1 - ap) * (1 - a))
    discrete = np.max(np.abs(x - factor * z) / np.abs(z))
    return [
        _check("ddim_step identity when alpha_bar is flat", ident, 0.0),
        _check("consistency_estimate(0,1) == predict_x0", worst, 1e-12),
        _check("500-step DDIM vs closed-form discrete contraction (rel)", discrete, 1e-12),
        # reported, not gated: the discrete step itself contracts by this much
        Check("500-step DDIM vs probability-flow identity (rel)", True,
              abs(factor - 1.0), 1e-3, info=True),
    ]


def suite_measurement(probes: int = 50, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    mask = MaskOperator((0, 3, 4, 7), 9)
    P = mask.matrix()
    ppt = np.max(np.abs(P @ P.T - np.eye(4)))
    worst_parseval = 0.0
    for M, N in [(1, 7), (3, 5), (8, 8), (16, 9), (64, 64)]:
        v = rng.normal(size=(M, N))
        F = np.fft.fft2(v, norm="ortho")
        worst_parseval = max(worst_parseval,
                             abs(np.linalg.norm(F) - np.linalg.norm(v)) / np.linalg.norm(v))
    direct = np.max(np.abs(oracle.dft2_direct(v[:8, :8]) - np.fft.fft2(v[:8, :8], norm="ortho")))
    op = FourierMagnitudeOperator(4, 4, 2, 8, 0.01)
    worst_grad = 0.0
    for _ in range(probes):
        z = rng.normal(size=16)
        y = measure(op, rng.normal(size=16), rng)
        g = residual_gradient(op, z, y)
        delta = rng.normal(size=16)
        f = lambda x: 0.5 * np.sum((op.forward(x) - y.values) ** 2)
        hh = 1e-6
        fd = (f(z + hh * delta) - f(z - hh * delta)) / (2 * hh)
        worst_grad = max(worst_grad, abs(g @ delta - fd) / max(abs(fd), 1e-12))
    return [
        _check("P P^T = I", ppt, 0.0),
        _check("unitary DFT Parseval (rel)", worst_parseval, 1e-9),
        _check("fft2 vs direct DFT sum", direct, 1e-10),
        _check("Fourier-magnitude gradient vs central differences (rel)", worst_grad, 1e-5),
    ]


def stationary_moments(op: MaskOperator, anchor, y, sigma_t: float, m: float, h: float,
                       steps: int, chains: int, burn_in: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble + time averages of constant-step Langevin chains (w = 0)."""
    cfg = PosteriorConfig(step_size=h, inject_weight=0.0, data_scale=m, langevin_steps=1)
    anchor = np.asarray(anchor, dtype=float)
    state = LangevinState(np.tile(anchor, (chains, 1)), anchor, anchor, 0, h)
    s1 = np.zeros_like(anchor)
    s2 = np.zeros_like(anchor)
    count = 0
    for k in range(steps):
        state = langevin_step(state, op, y, sigma_t, cfg, rng, decay=False)
        if k >= burn_in:
            s1 += state.iterate.sum(axis=0)
            s2 += (state.iterate**2).sum(axis=0)
            count += chains
    mean = s1 / count
    return mean, s2 / count - mean**2


def suite_posterior(decay_fn: Callable = step_size_decay, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    T, h0 = 100, 1e-5
    hs = [h0]
    for k in range(1, T + 1):
        hs.append(decay_fn(h0, k, T, hs[-1]))
    ref = decay_table(h0, T)
    table_gap = max(abs(a - b) for a, b in zip(hs, ref))
    endpoint = max(abs(decay_fn(h0, 0, T, 3.0) - 3.0), abs(decay_fn(h0, T, T, 3.0) - 0.03))

    d = 8
    op = MaskOperator((0, 2, 5, 6), d, 0.01)
    anchor = rng.uniform(1.0, 2.0, d)
    y = Measurement(rng.uniform(2.0, 3.0, 4), op)
    sigma_t, m, h = 0.3, 0.1, 1.8e-4
    mean, var = stationary_moments(op, anchor, y, sigma_t, m, h, 20000, 2000, 5000, rng)
    target = oracle.product_of_gaussians(anchor, sigma_t, op, y, m)
    mean_err = np.max(np.abs(mean - target.mean) / np.abs(target.mean))
    var_err = np.max(np.abs(var - target.diag_covariance) / target.diag_covariance)
    return [
        _check("step_size_decay table", table_gap, 0.0),
        _check("step_size_decay endpoint", endpoint, 1e-15),
        _check("stationary mean vs product of Gaussians (rel)", mean_err, 0.05),
        _check("stationary variance vs product of Gaussians (rel)", var_err, 0.05),
    ]


def suite_pipeline(runs: int = 10) -> list[Check]:
    d = 8
    model = GaussianMixtureScore.from_arrays([-2 * np.ones(d), 2 * np.ones(d)],
                                             [0.25 * np.ones(d)] * 2, [0.5, 0.5], [0, 1])
    src = -2 + 0.5 * np.random.default_rng(3).standard_normal(d)
    spec = RunSpec("edit", src, 0, 1, PosteriorConfig(seed=7))
    a, b = edit(spec, model), edit(spec, model)
    det = float(np.max(np.abs(a.output - b.output)))
    bg = np.mean([edit(RunSpec("edit", src, 0, 1, PosteriorConfig(seed=s)), model).measured_mse
                  for s in range(runs)])
    prior = GaussianMixtureScore.single(np.linspace(-1, 1, d), 0.1 * np.ones(d))
    op = MaskOperator(tuple(range(d)), d, 0.01)
    src2 = np.linspace(-1, 1, d) + 0.2
    rec = np.mean([reconstruct(RunSpec("reconstruct", src2, 0, 0, PosteriorConfig(seed=s),
                                       operator=op), prior).report.mse for s in range(runs)])
    return [
        _check("edit determinism", det, 0.0),
        _check("background preservation measured MSE / sigma^2", bg / 0.01**2, 10.0),
        _check("reconstruction MSE", rec, 1e-2),
    ]


def suite_metrics(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(8, 8)), rng.normal(size=(8, 8))
    naive = sum((x - y) ** 2 for x, y in zip(a.ravel(), b.ravel())) / a.size
    return [
        _check("mse vs naive loop", abs(metrics.mse(a, b) - naive), 1e-12),
        _check("psnr(peak=1, mse=0.01) = 20", abs(metrics.psnr([0.1], [0.0]) - 20.0), 1e-12),
        _check("ssim vs naive sliding window", abs(metrics.ssim(a, b, 3, 4.0)
                                                   - oracle.ssim_naive(a, b, 3, 4.0)), 1e-10),
        _check("ssim(a, a) = 1", abs(metrics.ssim(a, a, 3, 4.0) - 1.0), 0.0),
    ]


_SUITE_FUNCS = {
    "schedule": suite_schedule,
    "score": suite_score,
    "solver": suite_solver,
    "measurement": suite_measurement,
    "posterior": suite_posterior,
    "pipeline": suite_pipeline,
    "metrics": suite_metrics,
}


def run_suites(names: Iterable[str], out=print, **overrides) -> bool:
    """Run the named suites (``"all"`` expands to every suite); True iff all pass."""
    names = list(names)
    if "all" in names:
        names = list(SUITES)
    unknown = [n for n in names if n not in _SUITE_FUNCS]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}")
    ok = True
    for name in names:
        kwargs = {k: v for k, v in overrides.items() if k == "decay_fn" and name == "posterior"}
        for check in _SUITE_FUNCS[name](**kwargs):
            out(f"[{name}] {check.line()}")
            ok &= check.passed
    return ok
