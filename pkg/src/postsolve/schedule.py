"""Discrete variance-preserving noise schedule and posterior time sequences.

Timesteps are 1-based at the interface (``t = 1 .. num_train_timesteps``) so
that the posterior sequence ``501, 401, ..., 1`` can be written verbatim;
``alpha_bar(t)`` reads the 0-based array at ``t - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ScheduleError(ValueError):
    """Invalid schedule parameters or out-of-range timestep."""


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear-β DDPM schedule with ᾱ_t = ∏_{s≤t} (1 − β_s).

    α(t) = √ᾱ_t and σ(t) = √(1 − ᾱ_t).
    """

    num_train_timesteps: int
    beta_start: float
    beta_end: float
    alpha_bar_array: np.ndarray = field(repr=False)

    def _check(self, t: int) -> int:
        t = int(t)
        if not 1 <= t <= self.num_train_timesteps:
            raise ScheduleError(
                f"timestep {t} outside [1, {self.num_train_timesteps}]"
            )
        return t

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bar_array[self._check(t) - 1])

    def alpha(self, t: int) -> float:
        return float(np.sqrt(self.alpha_bar(t)))

    def sigma(self, t: int) -> float:
        return float(np.sqrt(self.noise_var(t)))

    def signal_var(self, t: int) -> float:
        """α(t)² without the square-root round trip (equals ᾱ_t)."""
        return self.alpha_bar(t)

    def noise_var(self, t: int) -> float:
        """σ(t)²; signal_var(t) + noise_var(t) == 1 holds exactly in floats."""
        return 1.0 - self.alpha_bar(t)

    def betas(self) -> np.ndarray:
        return np.linspace(self.beta_start, self.beta_end, self.num_train_timesteps)


def build_ddpm_schedule(
    steps: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02
) -> NoiseSchedule:
    """Build the linear-β DDPM schedule.

    ``beta_start == beta_end`` is accepted (constant ramp); everything else
    must satisfy ``0 < beta_start <= beta_end < 1`` and ``steps >= 2``.
    """
    if int(steps) != steps or steps < 2:
        raise ScheduleError(f"steps must be an integer >= 2, got {steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ScheduleError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    betas = np.linspace(beta_start, beta_end, int(steps))
    alpha_bar = np.cumprod(1.0 - betas)
    alpha_bar.setflags(write=False)
    return NoiseSchedule(int(steps), float(beta_start), float(beta_end), alpha_bar)


@dataclass(frozen=True)
class TimeSequence:
    """Strictly decreasing outer timesteps ``taus`` plus inner solver count."""

    taus: tuple[int, ...]
    inner_steps: int = 1

    def __post_init__(self):
        taus = tuple(int(t) for t in self.taus)
        object.__setattr__(self, "taus", taus)
        if len(taus) < 2:
            raise ScheduleError("need at least two timesteps in the sequence")
        if any(b >= a for a, b in zip(taus, taus[1:])):
            raise ScheduleError(f"taus must be strictly decreasing: {taus}")
        if taus[-1] < 1:
            raise ScheduleError("last timestep must be >= 1")
        if self.inner_steps < 1:
            raise ScheduleError("inner_steps must be positive")

    @property
    def outer_iters(self) -> int:
        """Number of editing iterations (one per consecutive τ pair)."""
        return len(self.taus) - 1

    def validate_against(self, schedule: NoiseSchedule) -> None:
        if self.taus[0] > schedule.num_train_timesteps:
            raise ScheduleError(
                f"tau {self.taus[0]} exceeds schedule length "
                f"{schedule.num_train_timesteps}"
            )


DEFAULT_TAUS = (501, 401, 301, 201, 101, 1)


def default_posterior_sequence() -> TimeSequence:
    return TimeSequence(DEFAULT_TAUS, inner_steps=1)
