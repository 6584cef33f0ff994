"""Analytic ε-prediction oracles for diagonal Gaussian-mixture priors.

For a prior p(z₀) = Σ_k π_k N(μ_k, diag v_k) and the VP forward kernel
z_t = √ᾱ z₀ + √(1−ᾱ) ε, the noised marginal is again a mixture,

    p_t(z) = Σ_k π_k N(z; √ᾱ μ_k, diag(ᾱ v_k + 1 − ᾱ)),

so the score, the Bayes-optimal ε and Tweedie's posterior mean are all
available in closed form. Class labels play the role of text prompts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .schedule import NoiseSchedule

UNCONDITIONAL = None


class ScoreError(ValueError):
    """Dimension mismatch or unknown conditioning label."""


@dataclass(frozen=True)
class MixtureComponent:
    mean: np.ndarray
    variance: np.ndarray
    weight: float
    label: int


class GaussianMixtureScore:
    """Label-conditioned Gaussian mixture standing in for a trained ε-network."""

    def __init__(self, components: Sequence[MixtureComponent]):
        if not components:
            raise ScoreError("mixture needs at least one component")
        means = np.array([np.asarray(c.mean, dtype=float) for c in components])
        if means.ndim != 2:
            raise ScoreError("component means must share one dimension")
        dim = means.shape[1]
        variances = []
        for c in components:
            v = np.broadcast_to(np.asarray(c.variance, dtype=float), (dim,))
            if np.any(v <= 0) or not np.all(np.isfinite(v)):
                raise ScoreError("variances must be strictly positive and finite")
            variances.append(np.array(v))
        weights = np.array([float(c.weight) for c in components])
        if np.any(weights <= 0):
            raise ScoreError("mixture weights must be positive")
        if not np.isclose(weights.sum(), 1.0, rtol=0, atol=1e-12):
            raise ScoreError(f"mixture weights sum to {weights.sum()}, not 1")
        labels = np.array([int(c.label) for c in components])
        if np.any(labels < 0):
            raise ScoreError("labels must be non-negative")

        self.components = tuple(components)
        self.dimension = dim
        self.means = means
        self.variances = np.array(variances)
        self.weights = weights
        self.labels = labels

    @classmethod
    def from_arrays(cls, means, variances, weights, labels):
        return cls([
            MixtureComponent(np.asarray(m, float), np.asarray(v, float), float(w), int(l))
            for m, v, w, l in zip(means, variances, weights, labels)
        ])

    @classmethod
    def single(cls, mean, variance, label: int = 0):
        return cls([MixtureComponent(np.asarray(mean, float), np.asarray(variance, float), 1.0, label)])

    @property
    def label_set(self) -> set[int]:
        return set(self.labels.tolist())

    def _select(self, cond: Optional[int]):
        """Component indices and renormalized log-weights for ``cond``."""
        if cond is UNCONDITIONAL:
            idx = np.arange(len(self.weights))
        else:
            idx = np.flatnonzero(self.labels == int(cond))
            if idx.size == 0:
                raise ScoreError(f"unknown label {cond!r}")
        w = self.weights[idx]
        return idx, np.log(w / w.sum())

    def _check_z(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dimension,):
            raise ScoreError(
                f"signal has shape {z.shape}, model dimension is {self.dimension}"
            )
        return z

    def _noised_terms(self, z, abar: float, cond):
        """Per-component marginal variances, standardized residuals and responsibilities."""
        idx, logw = self._select(cond)
        mu = self.means[idx]
        var_t = abar * self.variances[idx] + (1.0 - abar)
        diff = z[None, :] - np.sqrt(abar) * mu
        log_norm = -0.5 * np.sum(diff**2 / var_t + np.log(2 * np.pi * var_t), axis=1)
        logits = logw + log_norm
        # max-subtraction keeps the responsibilities finite when 1 − ᾱ ~ 1e-4
        logits = logits - logits.max()
        resp = np.exp(logits)
        resp /= resp.sum()
        return idx, var_t, diff, resp

    def log_density(self, z, t: int, schedule: NoiseSchedule, cond=UNCONDITIONAL) -> float:
        """log p_t(z) of the noised marginal."""
        z = self._check_z(z)
        abar = schedule.alpha_bar(t)
        idx, logw = self._select(cond)
        var_t = abar * self.variances[idx] + (1.0 - abar)
        diff = z[None, :] - np.sqrt(abar) * self.means[idx]
        log_norm = -0.5 * np.sum(diff**2 / var_t + np.log(2 * np.pi * var_t), axis=1)
        a = logw + log_norm
        amax = a.max()
        return float(amax + np.log(np.exp(a - amax).sum()))

    def score(self, z, t: int, schedule: NoiseSchedule, cond=UNCONDITIONAL) -> np.ndarray:
        """∇_z log p_t(z)."""
        z = self._check_z(z)
        _, var_t, diff, resp = self._noised_terms(z, schedule.alpha_bar(t), cond)
        return -np.sum(resp[:, None] * diff / var_t, axis=0)

    def posterior_mean(self, z, t: int, schedule: NoiseSchedule, cond=UNCONDITIONAL) -> np.ndarray:
        """Closed-form E[z₀ | z_t = z]."""
        z = self._check_z(z)
        abar = schedule.alpha_bar(t)
        idx, var_t, diff, resp = self._noised_terms(z, abar, cond)
        gain = np.sqrt(abar) * self.variances[idx] / var_t
        comp_means = self.means[idx] + gain * diff
        return resp @ comp_means

    def tweedie_jacobian(self, z, t: int, schedule: NoiseSchedule, cond=UNCONDITIONAL) -> np.ndarray:
        """∂E[z₀ | z_t]/∂z_t as a dense (d, d) matrix.

        Differentiates both the per-component affine means and the
        responsibilities; used by the DPS baseline.
        """
        z = self._check_z(z)
        abar = schedule.alpha_bar(t)
        idx, var_t, diff, resp = self._noised_terms(z, abar, cond)
        gain = np.sqrt(abar) * self.variances[idx] / var_t
        comp_means = self.means[idx] + gain * diff
        grads = -diff / var_t
        centered = grads - resp @ grads
        jac = np.diag(resp @ gain)
        jac += (comp_means * resp[:, None]).T @ centered
        return jac


def epsilon(model: GaussianMixtureScore, z, t: int, schedule: NoiseSchedule,
            cond=UNCONDITIONAL) -> np.ndarray:
    """Bayes-optimal ε-prediction, ε(z, t) = −√(1−ᾱ_t) ∇log p_t(z)."""
    return -schedule.sigma(t) * model.score(z, t, schedule, cond)


def cfg_combine(eps_cond, eps_uncond, guidance: float) -> np.ndarray:
    """Classifier-free guidance: (g + 1)·ε_c − g·ε_u.

    Evaluated as ε_c + g·(ε_c − ε_u) so that g = 0 and ε_c = ε_u return ε_c
    bit for bit.
    """
    eps_cond = np.asarray(eps_cond, dtype=float)
    eps_uncond = np.asarray(eps_uncond, dtype=float)
    if eps_cond.shape != eps_uncond.shape:
        raise ScoreError(f"shape mismatch {eps_cond.shape} vs {eps_uncond.shape}")
    if guidance < 0:
        raise ScoreError("guidance must be non-negative")
    return eps_cond + guidance * (eps_cond - eps_uncond)


def guided_epsilon(model: GaussianMixtureScore, z, t: int, schedule: NoiseSchedule,
                   cond, guidance: float = 0.0) -> np.ndarray:
    """ε under ``cond`` with optional CFG against the unconditional mixture."""
    eps_c = epsilon(model, z, t, schedule, cond)
    if guidance == 0.0 or cond is UNCONDITIONAL:
        return eps_c
    return cfg_combine(eps_c, epsilon(model, z, t, schedule, UNCONDITIONAL), guidance)
