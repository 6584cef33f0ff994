"""Forward measurement operators, measurement synthesis and residual gradients.

Two operators are supported:

* :class:`MaskOperator` – y = P z + σ ε, where P selects a subset of
  coordinates (rows are elementary unit vectors).
* :class:`FourierMagnitudeOperator` – y = |F P z| + σ ε, with P a fixed
  stride sub-sampling (zeroing the dropped coordinates in place) and F the
  unitary 2D DFT on an M×N grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

DEFAULT_NOISE_SIGMA = 0.01


class MeasurementError(ValueError):
    """Inconsistent operator / signal / measurement dimensions."""


def _as_signal(z, dim: int) -> np.ndarray:
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape != (dim,):
        raise MeasurementError(f"signal has length {z.size}, operator expects {dim}")
    return z


@dataclass(frozen=True)
class MaskOperator:
    kept_indices: tuple[int, ...]
    dimension: int
    noise_sigma: float = DEFAULT_NOISE_SIGMA

    def __post_init__(self):
        kept = tuple(int(i) for i in self.kept_indices)
        if not kept:
            raise MeasurementError("mask must keep at least one index")
        if len(set(kept)) != len(kept):
            raise MeasurementError("duplicate kept indices")
        if min(kept) < 0 or max(kept) >= self.dimension:
            raise MeasurementError("kept index out of range")
        if self.noise_sigma < 0:
            raise MeasurementError("noise_sigma must be non-negative")
        object.__setattr__(self, "kept_indices", tuple(sorted(kept)))

    @property
    def kind(self) -> str:
        return "mask"

    @property
    def output_dim(self) -> int:
        return len(self.kept_indices)

    @property
    def index_array(self) -> np.ndarray:
        return np.array(self.kept_indices, dtype=int)

    @property
    def measured(self) -> np.ndarray:
        """Boolean indicator of measured coordinates (diagonal of PᵀP)."""
        out = np.zeros(self.dimension, dtype=bool)
        out[self.index_array] = True
        return out

    def matrix(self) -> np.ndarray:
        P = np.zeros((self.output_dim, self.dimension))
        P[np.arange(self.output_dim), self.index_array] = 1.0
        return P

    def forward(self, z) -> np.ndarray:
        """P z; a leading batch axis (chains × dimension) is allowed."""
        z = np.asarray(z, dtype=float)
        if z.shape[-1:] != (self.dimension,):
            raise MeasurementError(
                f"signal has trailing size {z.shape[-1:]}, operator expects {self.dimension}"
            )
        return z[..., self.index_array]

    def adjoint(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape[:-1] + (self.dimension,))
        out[..., self.index_array] = r
        return out


@dataclass(frozen=True)
class FourierMagnitudeOperator:
    grid_rows: int
    grid_cols: int
    oversample_keep: int = 2
    oversample_of: int = 8
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    kept_indices: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise MeasurementError("grid dimensions must be positive")
        k, n = self.oversample_keep, self.oversample_of
        if not (1 <= k <= n):
            raise MeasurementError(f"need 1 <= k <= n, got k={k}, n={n}")
        if self.noise_sigma < 0:
            raise MeasurementError("noise_sigma must be non-negative")
        d = self.grid_rows * self.grid_cols
        count = math.ceil(d * k / n)
        kept = tuple(int(i) for i in (np.arange(count) * d) // count)
        object.__setattr__(self, "kept_indices", kept)

    @property
    def kind(self) -> str:
        return "fourier"

    @property
    def dimension(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def output_dim(self) -> int:
        return self.dimension

    @property
    def shape(self) -> tuple[int, int]:
        return (self.grid_rows, self.grid_cols)

    @property
    def measured(self) -> np.ndarray:
        out = np.zeros(self.dimension, dtype=bool)
        out[list(self.kept_indices)] = True
        return out

    def subsample(self, z) -> np.ndarray:
        z = _as_signal(z, self.dimension)
        return np.where(self.measured, z, 0.0)

    def spectrum(self, z) -> np.ndarray:
        """F P z on the grid, flattened row-major (complex)."""
        grid = self.subsample(z).reshape(self.shape)
        return np.fft.fft2(grid, norm="ortho").reshape(-1)

    def forward(self, z) -> np.ndarray:
        return np.abs(self.spectrum(z))


Operator = Union[MaskOperator, FourierMagnitudeOperator]


@dataclass(frozen=True)
class Measurement:
    values: np.ndarray
    operator: Operator

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.size != self.operator.output_dim:
            raise MeasurementError(
                f"measurement has {values.size} values, operator outputs "
                f"{self.operator.output_dim}"
            )
        object.__setattr__(self, "values", values)

    @property
    def operator_id(self) -> str:
        return self.operator.kind


def sample_mask(dimension: int, keep_probability: float, rng: np.random.Generator,
                noise_sigma: float = DEFAULT_NOISE_SIGMA) -> MaskOperator:
    """Keep each coordinate independently with ``keep_probability``.

    An empty draw is resampled; if ``keep_probability`` is 0 the redraw can
    never succeed, so a single index is chosen uniformly instead.
    """
    if not 0.0 <= keep_probability <= 1.0:
        raise MeasurementError(f"keep_probability {keep_probability} not in [0, 1]")
    if dimension < 1:
        raise MeasurementError("dimension must be positive")
    if keep_probability == 0.0:
        return MaskOperator((int(rng.integers(dimension)),), dimension, noise_sigma)
    while True:
        keep = rng.random(dimension) < keep_probability
        if keep.any():
            return MaskOperator(tuple(np.flatnonzero(keep).tolist()), dimension, noise_sigma)


def measure(op: Operator, z0, rng: np.random.Generator) -> Measurement:
    """y = A(z₀) + σ ε."""
    clean = op.forward(z0)
    noise = rng.standard_normal(clean.shape)
    return Measurement(clean + op.noise_sigma * noise, op)


def _values(op: Operator, y) -> np.ndarray:
    values = y.values if isinstance(y, Measurement) else np.asarray(y, dtype=float).reshape(-1)
    if values.size != op.output_dim:
        raise MeasurementError(
            f"measurement has {values.size} values, operator outputs {op.output_dim}"
        )
    return values


def data_fit(op: Operator, z, y) -> float:
    """½‖A(z) − y‖²."""
    r = op.forward(z) - _values(op, y)
    return 0.5 * float(r @ r)


def residual_gradient(op: Operator, z, y) -> np.ndarray:
    """Gradient of ½‖A(z) − y‖² with respect to z.

    For the Fourier magnitude the chain rule runs through the entrywise
    modulus: ∇ = P Re(Fᴴ[(|u| − y) u/|u|]) with u = F P z. The subgradient 0
    is used where |u| = 0.
    """
    y = _values(op, y)
    if isinstance(op, MaskOperator):
        return op.adjoint(op.forward(z) - y)
    u = op.spectrum(z)
    mag = np.abs(u)
    phase = np.divide(u, mag, out=np.zeros_like(u), where=mag > 0)
    r = (mag - y) * phase
    back = np.fft.ifft2(r.reshape(op.shape), norm="ortho").real.reshape(-1)
    return np.where(op.measured, back, 0.0)
