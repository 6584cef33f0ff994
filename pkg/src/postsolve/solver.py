"""Forward noising kernel and deterministic ẑ₀ estimators (DDIM, consistency)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedule import NoiseSchedule, ScheduleError
from .score import UNCONDITIONAL, GaussianMixtureScore, guided_epsilon


@dataclass(frozen=True)
class SolverParams:
    """Skip/output coefficients of the consistency function."""

    c_skip: float = 0.0
    c_out: float = 1.0


def forward_noise(z0, t: int, schedule: NoiseSchedule, rng: np.random.Generator) -> np.ndarray:
    """Draw z_t ~ N(√ᾱ_t z₀, (1 − ᾱ_t) I)."""
    z0 = np.asarray(z0, dtype=float)
    if not np.all(np.isfinite(z0)):
        raise ValueError("z0 must be finite")
    noise = rng.standard_normal(z0.shape)
    return schedule.alpha(t) * z0 + schedule.sigma(t) * noise


def predict_x0(z_t, eps, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """x̂₀ = (z_t − √(1−ᾱ_t) ε) / √ᾱ_t."""
    z_t = np.asarray(z_t, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if z_t.shape != eps.shape:
        raise ValueError(f"shape mismatch {z_t.shape} vs {eps.shape}")
    abar = schedule.alpha_bar(t)
    if abar <= 0.0:
        raise ScheduleError(f"alpha_bar({t}) = 0, x0 prediction undefined")
    return (z_t - np.sqrt(1.0 - abar) * eps) / np.sqrt(abar)


def ddim_step(z_t, eps, t: int, t_prev: int, schedule: NoiseSchedule) -> np.ndarray:
    """Deterministic DDIM move from ``t`` to ``t_prev < t``."""
    if not t_prev < t:
        raise ScheduleError(f"ddim_step needs t_prev < t, got {t_prev} >= {t}")
    if schedule.alpha_bar(t_prev) == schedule.alpha_bar(t):
        # flat segment: the step is exactly the identity
        return np.array(z_t, dtype=float)
    x0 = predict_x0(z_t, eps, t, schedule)
    return schedule.alpha(t_prev) * x0 + schedule.sigma(t_prev) * np.asarray(eps, dtype=float)


def ddim_sample(model: GaussianMixtureScore, z_t, timesteps, schedule: NoiseSchedule,
                cond=UNCONDITIONAL, guidance: float = 0.0) -> np.ndarray:
    """Run DDIM along a strictly decreasing list of timesteps."""
    z = np.asarray(z_t, dtype=float)
    timesteps = [int(t) for t in timesteps]
    for t, t_prev in zip(timesteps, timesteps[1:]):
        eps = guided_epsilon(model, z, t, schedule, cond, guidance)
        z = ddim_step(z, eps, t, t_prev, schedule)
    return z


def consistency_estimate(z, t: int, cond, model: GaussianMixtureScore,
                         params: SolverParams, schedule: NoiseSchedule,
                         guidance: float = 0.0) -> np.ndarray:
    """One-shot ẑ₀ = c_skip·z + c_out·(z − σ_t ε(z, c, t)) / α_t."""
    z = np.asarray(z, dtype=float)
    eps = guided_epsilon(model, z, t, schedule, cond, guidance)
    return params.c_skip * z + params.c_out * (z - schedule.sigma(t) * eps) / schedule.alpha(t)
