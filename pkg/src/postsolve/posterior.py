"""Measurement-anchored Langevin correction of solver estimates.

The update run on an estimate ẑ₀ (the *anchor*) is

    z⁽ᵏ⁺¹⁾ = (1−w) z⁽ᵏ⁾ + w z_in
             − h_k [ (z⁽ᵏ⁾ − ẑ₀)/σ_t² + ∇ ½‖A(z⁽ᵏ⁾) − y‖² / m² ]
             + √(2 h_k) ε,

with the running step size shrunk after every step by (1 − 0.99 k/T).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .measurement import Measurement, Operator, data_fit, residual_gradient
from .schedule import NoiseSchedule

W_RECOMMENDED_MAX = 0.2
DECAY_FLOOR = 0.01


class NonFiniteIterateError(FloatingPointError):
    """A Langevin iterate became NaN or infinite."""

    def __init__(self, step_index: int, where: str = "langevin"):
        self.step_index = step_index
        self.where = where
        super().__init__(f"non-finite iterate in {where} at step {step_index}")


@dataclass(frozen=True)
class PosteriorConfig:
    """Knobs of the posterior sampler.

    Attributes:
        outer_iters: N, posterior sampling iterations.
        inner_solver_steps: n, solver re-estimates per outer iteration.
        langevin_steps: T, Langevin steps per outer iteration.
        step_size: h, initial Langevin step size (also the DPS learning rate).
        inject_weight: w, weight of the source signal injected every step.
        data_scale: m, standard deviation assumed for the data term.
        keep_probability: f, mask keep probability.
        seed: run seed.
        renoise_scaled: use the VP mean √ᾱ·z when re-noising; ``False``
            reproduces the unscaled mean for ablation.
        optimize: ``False`` skips the Langevin correction (ablation).
    """

    outer_iters: int = 5
    inner_solver_steps: int = 1
    langevin_steps: int = 100
    step_size: float = 1e-5
    inject_weight: float = 0.1
    data_scale: float = 0.01
    keep_probability: float = 0.5
    seed: int = 0
    renoise_scaled: bool = True
    optimize: bool = True

    def __post_init__(self):
        if self.outer_iters < 1 or self.inner_solver_steps < 1 or self.langevin_steps < 1:
            raise ValueError("N, n and T must be positive integers")
        if self.step_size <= 0 or self.data_scale <= 0:
            raise ValueError("step size h and data scale m must be positive")
        if not 0.0 <= self.inject_weight <= 1.0:
            raise ValueError(f"inject weight w={self.inject_weight} outside [0, 1]")
        if not 0.0 <= self.keep_probability <= 1.0:
            raise ValueError("keep probability must lie in [0, 1]")
        if self.inject_weight > W_RECOMMENDED_MAX:
            warnings.warn(
                f"inject weight w={self.inject_weight} is outside the usual [0, 0.2] range",
                UserWarning,
                stacklevel=3,
            )

    def with_(self, **changes) -> "PosteriorConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class LangevinState:
    iterate: np.ndarray
    anchor: np.ndarray
    reference: np.ndarray
    step_index: int = 0
    current_h: float = 1e-5

    def __post_init__(self):
        # the iterate may carry a leading chain axis
        shapes = {np.shape(self.iterate)[-1:], np.shape(self.anchor), np.shape(self.reference)}
        if len(shapes) != 1:
            raise ValueError(f"state signals disagree in shape: {shapes}")
        if not self.current_h > 0:
            raise ValueError("current_h must be positive")


def weighted_inject(z_hat, z_in, w: float) -> np.ndarray:
    """(1 − w)·ẑ₀ + w·z_in."""
    z_hat = np.asarray(z_hat, dtype=float)
    z_in = np.asarray(z_in, dtype=float)
    if z_hat.shape != z_in.shape:
        raise ValueError(f"shape mismatch {z_hat.shape} vs {z_in.shape}")
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"w={w} outside [0, 1]")
    if w > W_RECOMMENDED_MAX:
        warnings.warn(f"inject weight w={w} is outside [0, 0.2]", UserWarning, stacklevel=2)
    return (1.0 - w) * z_hat + w * z_in


def step_size_decay(h0: float, k: int, T: int, h_prev: Optional[float] = None) -> float:
    """Running step size after step ``k`` of ``T``: (1 + (k/T)(0.01 − 1))·h_prev.

    ``h_prev`` defaults to ``h0``. The factor is 1 at k = 0 and 0.01 at k = T.
    """
    if not 0 <= k <= T:
        raise ValueError(f"decay index k={k} outside [0, T={T}]")
    h = h0 if h_prev is None else h_prev
    return (1.0 + (k / T) * (DECAY_FLOOR - 1.0)) * h


def decay_sequence(h0: float, T: int) -> np.ndarray:
    """Step sizes used by steps 0..T−1 followed by the value left after step T."""
    hs = [h0]
    for k in range(1, T + 1):
        hs.append(step_size_decay(h0, k, T, hs[-1]))
    return np.array(hs)


def langevin_energy(z, anchor, op: Operator, y, sigma_t: float, m: float) -> float:
    """‖z − ẑ₀‖²/2σ_t² + ‖A(z) − y‖²/2m²."""
    diff = np.asarray(z, dtype=float) - np.asarray(anchor, dtype=float)
    return float(diff @ diff) / (2.0 * sigma_t**2) + data_fit(op, z, y) / m**2


def langevin_drift(z, anchor, op: Operator, y, sigma_t: float, m: float) -> np.ndarray:
    """Gradient of :func:`langevin_energy`."""
    return (np.asarray(z) - anchor) / sigma_t**2 + residual_gradient(op, z, y) / m**2


def langevin_step(state: LangevinState, op: Operator, y: Measurement, sigma_t: float,
                  cfg: PosteriorConfig, rng: Optional[np.random.Generator] = None,
                  noise: Optional[np.ndarray] = None, decay: bool = True,
                  decay_fn=step_size_decay) -> LangevinState:
    """Advance one Langevin step.

    ``noise`` overrides the Gaussian draw (pass zeros for the deterministic
    drift). With ``decay=False`` the step size is held constant.
    """
    if not sigma_t > 0:
        raise ValueError("sigma_t must be positive")
    z = state.iterate
    h = state.current_h
    if noise is None:
        noise = rng.standard_normal(z.shape)
    w = cfg.inject_weight
    # overflow is reported by the finite check below, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        drift = langevin_drift(z, state.anchor, op, y, sigma_t, cfg.data_scale)
        new = (1.0 - w) * z + w * state.reference - h * drift + np.sqrt(2.0 * h) * noise
    k = state.step_index + 1
    if not np.all(np.isfinite(new)):
        raise NonFiniteIterateError(k)
    if decay:
        h = decay_fn(cfg.step_size, k, cfg.langevin_steps, h)
    return LangevinState(new, state.anchor, state.reference, k, h)


def run_langevin(anchor, reference, op: Operator, y: Measurement, sigma_t: float,
                 cfg: PosteriorConfig, rng: np.random.Generator, callback=None,
                 decay_fn=step_size_decay):
    """T decaying Langevin steps started at the anchor; returns (iterate, energies).

    ``energies[k]`` is the energy at z⁽ᵏ⁾, so it has T + 1 entries.
    ``callback(state, energy, h_used)`` is called after every step.
    """
    anchor = np.asarray(anchor, dtype=float)
    state = LangevinState(anchor.copy(), anchor, np.asarray(reference, dtype=float),
                          0, cfg.step_size)
    energies = [langevin_energy(state.iterate, anchor, op, y, sigma_t, cfg.data_scale)]
    for _ in range(cfg.langevin_steps):
        h_used = state.current_h
        state = langevin_step(state, op, y, sigma_t, cfg, rng, decay_fn=decay_fn)
        e = langevin_energy(state.iterate, anchor, op, y, sigma_t, cfg.data_scale)
        energies.append(e)
        if callback is not None:
            callback(state, e, h_used)
    return state.iterate, np.array(energies)


def dps_step(z_t, z_hat0, op: Operator, y, eta: float, solver_prev, jacobian) -> np.ndarray:
    """DPS baseline: solver_prev + η ∇_{z_t}(−‖y − A(ẑ₀(z_t))‖²).

    ``jacobian`` is ∂ẑ₀/∂z_t at ``z_t`` (e.g. from
    :meth:`GaussianMixtureScore.tweedie_jacobian`).
    """
    z_t = np.asarray(z_t, dtype=float)
    solver_prev = np.asarray(solver_prev, dtype=float)
    jac = np.asarray(jacobian, dtype=float)
    if solver_prev.shape != z_t.shape or jac.shape != (z_t.size, z_t.size):
        raise ValueError("dps_step: inconsistent dimensions")
    g = residual_gradient(op, z_hat0, y)
    return solver_prev - eta * 2.0 * (jac.T @ g)


def renoise(z0_opt, tau_prev: int, schedule: NoiseSchedule, rng: np.random.Generator,
            scaled: bool = True) -> np.ndarray:
    """Sample z_τ around the optimized estimate.

    The VP form √ᾱ_τ z + √(1−ᾱ_τ) ε is the default; ``scaled=False`` drops
    the √ᾱ factor on the mean.
    """
    z0_opt = np.asarray(z0_opt, dtype=float)
    mean = schedule.alpha(tau_prev) * z0_opt if scaled else z0_opt
    return mean + schedule.sigma(tau_prev) * rng.standard_normal(z0_opt.shape)
