"""Noise schedule and mixture score oracle.

A tour of the quantities every other stage is built on: the linear-β
schedule, the ε-prediction of a Gaussian-mixture "network", and the x̂₀
estimate that follows from it.
"""

import numpy as np

from postsolve import GaussianMixtureScore, build_ddpm_schedule, epsilon, predict_x0
from postsolve.oracle import brute_force_tweedie

sched = build_ddpm_schedule()

# The posterior sampler visits τ = 501, 401, ..., 1. At each of them the
# signal keeps √ᾱ of its amplitude and gains noise of standard deviation σ.
print("  tau   alpha_bar     alpha     sigma")
for tau in (501, 401, 301, 201, 101, 1):
    print(f"{tau:5d}  {sched.alpha_bar(tau):10.6f}  {sched.alpha(tau):8.5f}  {sched.sigma(tau):8.5f}")

# %%
# Two labelled clusters in 2D stand in for two prompts.
model = GaussianMixtureScore.from_arrays(
    means=[[-2.0, -2.0], [2.0, 2.0]],
    variances=[[0.25, 0.25], [0.25, 0.25]],
    weights=[0.5, 0.5],
    labels=[0, 1],
)

z = np.array([0.3, -0.1])
for t in (900, 501, 100):
    x0_u = predict_x0(z, epsilon(model, z, t, sched), t, sched)
    x0_1 = predict_x0(z, epsilon(model, z, t, sched, 1), t, sched)
    print(f"t={t:4d}  x0 unconditional={np.round(x0_u, 3)}  x0 | label 1={np.round(x0_1, 3)}")

# %%
# The closed-form estimate agrees with integrating the prior numerically.
t = 501
closed = predict_x0(z, epsilon(model, z, t, sched), t, sched)
numeric = brute_force_tweedie(model, z, t, sched)
print("closed form  ", closed)
print("quadrature   ", numeric)
print("max abs diff ", np.max(np.abs(closed - numeric)))
