"""Independent closed-form and quadrature references for verification.

Nothing here calls into the samplers; the functions only share data types.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measurement import MaskOperator, Measurement
from .schedule import NoiseSchedule
from .score import UNCONDITIONAL, GaussianMixtureScore

QUAD_HALF_WIDTH = 8.0
QUAD_POINTS = 2001
MAX_QUAD_DIM = 3


@dataclass(frozen=True)
class GaussianPosterior:
    mean: np.ndarray
    diag_covariance: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.diag_covariance) <= 0):
            raise ValueError("posterior variances must be strictly positive")


def _measured_values(mask: MaskOperator, y):
    values = y.values if isinstance(y, Measurement) else np.asarray(y, dtype=float)
    if values.size != mask.output_dim:
        raise ValueError("measurement length does not match the mask")
    return values


def conjugate_posterior(prior_mean, prior_var, mask: MaskOperator, y) -> GaussianPosterior:
    """p(z₀ | y) for a diagonal Gaussian prior and y = P z₀ + σ ε."""
    if mask.noise_sigma <= 0:
        raise ValueError("conjugate posterior needs mask.noise_sigma > 0")
    mu = np.broadcast_to(np.asarray(prior_mean, dtype=float), (mask.dimension,)).copy()
    var = np.broadcast_to(np.asarray(prior_var, dtype=float), (mask.dimension,)).copy()
    idx = mask.index_array
    noise_prec = 1.0 / mask.noise_sigma**2
    prec = noise_prec + 1.0 / var[idx]
    mu[idx] = (_measured_values(mask, y) * noise_prec + mu[idx] / var[idx]) / prec
    var[idx] = 1.0 / prec
    return GaussianPosterior(mu, var)


def product_of_gaussians(anchor, sigma_t: float, mask: MaskOperator, y, m: float) -> GaussianPosterior:
    """Density ∝ N(z; anchor, σ_t² I) · N(y; P z, m² I), per coordinate."""
    anchor = np.asarray(anchor, dtype=float)
    if anchor.shape != (mask.dimension,):
        raise ValueError("anchor length does not match the mask")
    mean = anchor.copy()
    var = np.full(mask.dimension, float(sigma_t) ** 2)
    idx = mask.index_array
    prec = 1.0 / sigma_t**2 + 1.0 / m**2
    mean[idx] = (anchor[idx] / sigma_t**2 + _measured_values(mask, y) / m**2) / prec
    var[idx] = 1.0 / prec
    return GaussianPosterior(mean, var)


def _trapezoid(f, x):
    return np.trapezoid(f, x, axis=-1)


def brute_force_tweedie(model: GaussianMixtureScore, z, t: int, schedule: NoiseSchedule,
                        cond=UNCONDITIONAL, half_width: float = QUAD_HALF_WIDTH,
                        points: int = QUAD_POINTS) -> np.ndarray:
    """E[z₀ | z_t = z] by numerical integration against the prior.

    Each component's prior factorizes over coordinates, so the d-dimensional
    integral is a product of 1D trapezoid rules. Every 1D rule covers
    ±half_width standard deviations around the peak of prior × likelihood;
    near t = 1 the likelihood is far narrower than the prior and can sit many
    prior deviations from the component mean, so a window fixed on the prior
    would miss it. Integrands are handled in log space.
    """
    z = np.asarray(z, dtype=float)
    if model.dimension > MAX_QUAD_DIM:
        raise ValueError(f"quadrature limited to dimension <= {MAX_QUAD_DIM}")
    if z.shape != (model.dimension,):
        raise ValueError("signal length does not match the model")
    abar = schedule.alpha_bar(t)
    a, s2 = np.sqrt(abar), 1.0 - abar
    u = np.linspace(-half_width, half_width, points)

    log_evidence, cond_means = [], []
    for comp in model.components:
        if cond is not UNCONDITIONAL and comp.label != cond:
            continue
        mu = np.asarray(comp.mean, dtype=float)
        v = np.broadcast_to(np.asarray(comp.variance, dtype=float), mu.shape)
        # window placement only; the integrand below is evaluated pointwise
        prec = 1.0 / v + a * a / s2
        centre = (mu / v + a * z / s2) / prec
        x = centre[:, None] + u[None, :] / np.sqrt(prec)[:, None]
        log_f = (-0.5 * (x - mu[:, None]) ** 2 / v[:, None] - 0.5 * np.log(2 * np.pi * v)[:, None]
                 - 0.5 * (z[:, None] - a * x) ** 2 / s2 - 0.5 * np.log(2 * np.pi * s2))
        peak = log_f.max(axis=1, keepdims=True)
        f = np.exp(log_f - peak)
        mass = _trapezoid(f, x)
        first = _trapezoid(x * f, x)
        log_evidence.append(np.log(comp.weight) + np.sum(np.log(mass) + peak[:, 0]))
        cond_means.append(first / mass)
    if not cond_means:
        raise ValueError(f"unknown label {cond!r}")
    log_evidence = np.array(log_evidence)
    r = np.exp(log_evidence - log_evidence.max())
    r /= r.sum()
    return r @ np.array(cond_means)


def gaussian_log_density(model: GaussianMixtureScore, z, t: int, schedule: NoiseSchedule,
                         cond=UNCONDITIONAL) -> float:
    """log p_t(z) evaluated term by term with scipy, independent of the score code."""
    from scipy.special import logsumexp
    from scipy.stats import norm

    z = np.asarray(z, dtype=float)
    abar = schedule.alpha_bar(t)
    terms = []
    for comp in model.components:
        if cond is not UNCONDITIONAL and comp.label != cond:
            continue
        var = abar * np.asarray(comp.variance, dtype=float) + 1.0 - abar
        lp = norm.logpdf(z, loc=np.sqrt(abar) * np.asarray(comp.mean), scale=np.sqrt(var)).sum()
        terms.append(lp + np.log(comp.weight))
    weights_in = [c.weight for c in model.components if cond is UNCONDITIONAL or c.label == cond]
    return float(logsumexp(terms) - np.log(np.sum(weights_in)))


def central_difference(f, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def dft_matrix(n: int) -> np.ndarray:
    """Unitary 1D DFT matrix built from its definition."""
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(-2j * np.pi * j * k / n) / np.sqrt(n)


def dft2_direct(grid) -> np.ndarray:
    """Unitary 2D DFT by the double sum, written as F_M · f · F_Nᵀ."""
    grid = np.asarray(grid)
    M, N = grid.shape
    return dft_matrix(M) @ grid @ dft_matrix(N).T


def ssim_naive(a, b, window: int, peak: float) -> float:
    """Per-window SSIM with explicit loops, population moments, box window."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    vals = []
    for i in range(a.shape[0] - window + 1):
        for j in range(a.shape[1] - window + 1):
            pa = a[i:i + window, j:j + window].ravel()
            pb = b[i:i + window, j:j + window].ravel()
            n = pa.size
            ma, mb = sum(pa) / n, sum(pb) / n
            va = sum((p - ma) ** 2 for p in pa) / n
            vb = sum((p - mb) ** 2 for p in pb) / n
            cov = sum((p - ma) * (q - mb) for p, q in zip(pa, pb)) / n
            vals.append(((2 * ma * mb + c1) * (2 * cov + c2))
                        / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return sum(vals) / len(vals)
