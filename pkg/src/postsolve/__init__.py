"""postsolve: measurement-anchored Langevin posterior sampling for diffusion solvers.

The score network is replaced by closed-form Gaussian-mixture oracles, so
every sampler stage can be checked against exact posteriors.

Modules
-------
schedule     linear-β VP schedule and posterior time sequences
score        mixture ε/score oracles and classifier-free guidance
solver       forward kernel, x̂₀ prediction, DDIM step, consistency estimate
measurement  mask and Fourier-magnitude operators with residual gradients
posterior    injection, Langevin step, step-size decay, DPS baseline, re-noising
pipeline     editing and reconstruction runs
oracle       independent closed-form / quadrature references
metrics      MSE, PSNR, SSIM
config       ``key = value`` run configuration
records      run record / trajectory text formats
cli          ``postsolve`` command line
"""

from .measurement import (
    FourierMagnitudeOperator,
    MaskOperator,
    Measurement,
    measure,
    residual_gradient,
    sample_mask,
)
from .metrics import mse, psnr, ssim
from .pipeline import RunRecord, RunSpec, edit, reconstruct
from .posterior import (
    LangevinState,
    PosteriorConfig,
    dps_step,
    langevin_step,
    renoise,
    step_size_decay,
    weighted_inject,
)
from .schedule import NoiseSchedule, TimeSequence, build_ddpm_schedule, default_posterior_sequence
from .score import UNCONDITIONAL, GaussianMixtureScore, MixtureComponent, cfg_combine, epsilon
from .solver import SolverParams, consistency_estimate, ddim_step, forward_noise, predict_x0

__version__ = "0.1.0"
