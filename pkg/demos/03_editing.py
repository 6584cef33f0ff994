"""Editing: move a signal from label 0 toward label 1.

The measured coordinates are the "background" that should survive the
edit; the unmeasured ones are free to follow the new label. The injection
weight w controls the balance, and this demo sweeps it.
"""

import numpy as np

from postsolve import PosteriorConfig, RunSpec, edit
from postsolve.score import GaussianMixtureScore

d = 8
model = GaussianMixtureScore.from_arrays(
    [-2 * np.ones(d), 2 * np.ones(d)], [0.25 * np.ones(d)] * 2, [0.5, 0.5], [0, 1]
)
source = -2 + 0.5 * np.random.default_rng(3).standard_normal(d)

print("    w   measured MSE   free coords moved to +")
for w in (0.0, 0.005, 0.01, 0.05, 0.1):
    mses, moved = [], []
    for seed in range(20):
        rec = edit(RunSpec("edit", source, 0, 1, PosteriorConfig(seed=seed, inject_weight=w)), model)
        mses.append(rec.measured_mse)
        free = rec.unmeasured
        moved.append(np.mean(rec.output[free] > 0) if free.any() else np.nan)
    print(f"{w:5.3f}   {np.mean(mses):11.3e}   {np.nanmean(moved):6.2f}")

# With w = 0 the free coordinates follow label 1 but the background drifts;
# at the default w = 0.1 the source is re-injected every Langevin step, which
# keeps the background within the noise floor and also pins the free
# coordinates to the source.
