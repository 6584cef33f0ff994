"""End-to-end editing and reconstruction runs over the oracle models.

The encoder/decoder pair is the identity, so the source signal *is* the
latent z₀. Every run derives independent random substreams from one seed:
mask sampling, measurement noise, diffusion noise (forward noising and
re-noising) and Langevin noise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import metrics
from .measurement import (
    DEFAULT_NOISE_SIGMA,
    FourierMagnitudeOperator,
    MaskOperator,
    Measurement,
    Operator,
    measure,
    sample_mask,
)
from .posterior import (
    NonFiniteIterateError,
    PosteriorConfig,
    langevin_energy,
    renoise,
    run_langevin,
)
from .schedule import NoiseSchedule, TimeSequence, build_ddpm_schedule, default_posterior_sequence
from .score import GaussianMixtureScore
from .solver import SolverParams, consistency_estimate, forward_noise

STAGES = ("mask", "measure", "diffusion", "langevin")
INNER_START = 501


class ModeError(ValueError):
    """Operator or labels incompatible with the requested mode."""


def stage_streams(seed: int) -> dict[str, np.random.Generator]:
    """One independent generator per stage, all derived from ``seed``."""
    children = np.random.SeedSequence(int(seed)).spawn(len(STAGES))
    return {name: np.random.default_rng(s) for name, s in zip(STAGES, children)}


def inner_times(n: int, start: int = INNER_START) -> list[int]:
    """Solver timesteps t_j for the inner loop; ``[start]`` when n = 1."""
    if n == 1:
        return [int(start)]
    warnings.warn("inner_solver_steps > 1 is experimental", UserWarning, stacklevel=3)
    return [int(t) for t in np.linspace(start, 1, n, endpoint=False).round()]


@dataclass
class RunSpec:
    """Everything a single run needs besides the score model.

    ``operator=None`` means "sample a mask with ``posterior.keep_probability``
    and ``noise_sigma``" from the run's mask stream.
    """

    mode: str
    source: np.ndarray
    source_label: int
    target_label: int
    posterior: PosteriorConfig = field(default_factory=PosteriorConfig)
    operator: Optional[Operator] = None
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    schedule: NoiseSchedule = field(default_factory=build_ddpm_schedule)
    times: TimeSequence = field(default_factory=default_posterior_sequence)
    solver: SolverParams = field(default_factory=SolverParams)
    guidance: float = 0.0
    inner_start: int = INNER_START
    shape: Optional[tuple[int, int]] = None

    def __post_init__(self):
        self.source = np.asarray(self.source, dtype=float).reshape(-1)
        if self.mode not in ("edit", "reconstruct"):
            raise ModeError(f"unknown mode {self.mode!r}")
        if self.mode == "reconstruct" and self.target_label != self.source_label:
            raise ModeError("reconstruction requires target_label == source_label")
        if self.mode == "edit" and isinstance(self.operator, FourierMagnitudeOperator):
            raise ModeError("the Fourier-magnitude operator is reconstruction-only")
        if self.operator is not None and self.operator.dimension != self.source.size:
            raise ModeError("operator dimension does not match the source")
        self.times.validate_against(self.schedule)
        if self.mode == "edit" and self.times.outer_iters != self.posterior.outer_iters:
            raise ModeError(
                f"posterior.N={self.posterior.outer_iters} but the time sequence "
                f"has {self.times.outer_iters} intervals"
            )


@dataclass
class Snapshot:
    tau: int
    pre: np.ndarray
    post: np.ndarray
    energies: np.ndarray
    pre_mse: float
    post_mse: float

    @property
    def energy_first(self) -> float:
        return float(self.energies[0])

    @property
    def energy_last(self) -> float:
        return float(self.energies[-1])


@dataclass
class RunRecord:
    mode: str
    seed: int
    snapshots: list[Snapshot]
    output: np.ndarray
    source: np.ndarray
    operator: Operator
    measurement: Measurement
    trajectory: list[tuple] = field(default_factory=list)
    report: Optional[metrics.MetricReport] = None

    @property
    def measured_mse(self) -> float:
        """Mean squared error on measured coordinates (background preservation)."""
        keep = self.operator.measured
        return metrics.mse(self.output[keep], self.source[keep])

    @property
    def unmeasured(self) -> np.ndarray:
        return ~self.operator.measured


def _seed_from(spec: RunSpec, rng) -> int:
    if rng is None:
        return int(spec.posterior.seed)
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    return int(rng.integers(0, 2**63 - 1))


def _setup(spec: RunSpec, model: GaussianMixtureScore, seed: int):
    if model.dimension != spec.source.size:
        raise ModeError(
            f"model dimension {model.dimension} != source length {spec.source.size}"
        )
    streams = stage_streams(seed)
    op = spec.operator
    if op is None:
        op = sample_mask(spec.source.size, spec.posterior.keep_probability,
                         streams["mask"], spec.noise_sigma)
    y = measure(op, spec.source, streams["measure"])
    return streams, op, y


def _optimize(spec, anchor, op, y, tau, streams, trajectory, step_offset):
    cfg = spec.posterior
    sigma_t = spec.schedule.sigma(tau)
    if not cfg.optimize:
        e = langevin_energy(anchor, anchor, op, y, sigma_t, cfg.data_scale)
        return anchor.copy(), np.array([e])

    def log(state, energy, h_used):
        trajectory.append((step_offset + state.step_index, tau, state.step_index, h_used,
                           energy, metrics.mse(state.iterate, spec.source)))

    try:
        return run_langevin(anchor, spec.source, op, y, sigma_t, cfg,
                            streams["langevin"], callback=log)
    except NonFiniteIterateError as err:
        err.where = f"langevin at tau={tau}"
        raise


def _finish(spec, seed, snapshots, out, op, y, trajectory) -> RunRecord:
    peak = float(np.ptp(spec.source)) or 1.0
    rep = metrics.report(out, spec.source, peak=peak, shape=spec.shape)
    return RunRecord(spec.mode, seed, snapshots, out, spec.source.copy(), op, y,
                     trajectory, rep)


def edit(spec: RunSpec, model: GaussianMixtureScore,
         rng: Union[None, int, np.random.Generator] = None) -> RunRecord:
    """Posterior-sampling edit of ``spec.source`` toward ``spec.target_label``.

    Per outer interval (τ_i, τ_{i+1}): noise the current estimate to the inner
    solver time(s) and re-estimate under the target label, run T Langevin
    steps anchored at that estimate with σ_t = σ(τ_i), re-noise to τ_{i+1}
    and estimate again. The last estimate (at the final τ) is the output.
    """
    if spec.mode != "edit":
        raise ModeError("edit() needs a RunSpec with mode='edit'")
    if isinstance(spec.operator, FourierMagnitudeOperator):
        raise ModeError("the Fourier-magnitude operator is reconstruction-only")
    seed = _seed_from(spec, rng)
    streams, op, y = _setup(spec, model, seed)
    sched, params, cfg = spec.schedule, spec.solver, spec.posterior
    tgt = spec.target_label
    taus = spec.times.taus
    ts_inner = inner_times(cfg.inner_solver_steps, spec.inner_start)

    z0 = spec.source.copy()
    snapshots: list[Snapshot] = []
    trajectory: list[tuple] = []
    for i in range(cfg.outer_iters):
        tau, tau_next = taus[i], taus[i + 1]
        for t_j in ts_inner:
            z_j = forward_noise(z0, t_j, sched, streams["diffusion"])
            z0 = consistency_estimate(z_j, t_j, tgt, model, params, sched, spec.guidance)
        anchor = z0
        post, energies = _optimize(spec, anchor, op, y, tau, streams, trajectory,
                                   i * cfg.langevin_steps)
        snapshots.append(Snapshot(tau, anchor.copy(), post.copy(), energies,
                                  metrics.mse(anchor, spec.source),
                                  metrics.mse(post, spec.source)))
        z_next = renoise(post, tau_next, sched, streams["diffusion"], cfg.renoise_scaled)
        z0 = consistency_estimate(z_next, tau_next, tgt, model, params, sched, spec.guidance)
        if not np.all(np.isfinite(z0)):
            raise NonFiniteIterateError(i, "consistency estimate")
    return _finish(spec, seed, snapshots, z0, op, y, trajectory)


def reconstruct(spec: RunSpec, model: GaussianMixtureScore,
                rng: Union[None, int, np.random.Generator] = None) -> RunRecord:
    """Posterior-sampling reconstruction from pure noise.

    Starts at z ~ N(0, I); for every τ in the sequence, estimates ẑ₀ under
    the source label, runs T Langevin steps and re-noises to the next τ. The
    output is the last optimized iterate.
    """
    if spec.mode != "reconstruct":
        raise ModeError("reconstruct() needs a RunSpec with mode='reconstruct'")
    seed = _seed_from(spec, rng)
    streams, op, y = _setup(spec, model, seed)
    sched, params, cfg = spec.schedule, spec.solver, spec.posterior
    label = spec.source_label
    taus = spec.times.taus

    z = streams["diffusion"].standard_normal(spec.source.size)
    snapshots: list[Snapshot] = []
    trajectory: list[tuple] = []
    post = z
    for i, tau in enumerate(taus):
        anchor = consistency_estimate(z, tau, label, model, params, sched, spec.guidance)
        if not np.all(np.isfinite(anchor)):
            raise NonFiniteIterateError(i, "consistency estimate")
        post, energies = _optimize(spec, anchor, op, y, tau, streams, trajectory,
                                   i * cfg.langevin_steps)
        snapshots.append(Snapshot(tau, anchor.copy(), post.copy(), energies,
                                  metrics.mse(anchor, spec.source),
                                  metrics.mse(post, spec.source)))
        if i + 1 < len(taus):
            z = renoise(post, taus[i + 1], sched, streams["diffusion"], cfg.renoise_scaled)
    return _finish(spec, seed, snapshots, post, op, y, trajectory)


def run(spec: RunSpec, model: GaussianMixtureScore, rng=None) -> RunRecord:
    return edit(spec, model, rng) if spec.mode == "edit" else reconstruct(spec, model, rng)
