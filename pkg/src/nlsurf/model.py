"""Nishimori-line parametrization, Gaussian disorder, and the interpolation law.

On the line beta_b = x_b / sigma_b, mu_b = sigma_b * x_b the quenched pressure
depends on the couplings only through the nonnegative numbers x_b, so the
public API works in x throughout.  Physical (beta, mu, sigma) triples enter
only at the boundary via nl_from_physical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .lattice import Corridor, LatticeSpec

NL_RTOL = 1e-12


class OffNishimoriError(ValueError):
    """Raised when a physical model violates beta_b * sigma_b^2 = mu_b."""

    def __init__(self, bad_bonds: list[int], residuals: list[float]):
        self.bad_bonds = bad_bonds
        self.residuals = residuals
        detail = ", ".join(f"bond {b}: residual {r:.3e}" for b, r in zip(bad_bonds[:5], residuals[:5]))
        more = "" if len(bad_bonds) <= 5 else f" (+{len(bad_bonds) - 5} more)"
        super().__init__(f"model is off the Nishimori line on {len(bad_bonds)} bond(s): {detail}{more}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GaussianBondModel:
    """Per-bond inverse temperatures and Gaussian coupling moments."""

    beta: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        beta = _readonly(self.beta)
        mu = _readonly(self.mu)
        sigma = _readonly(self.sigma)
        if not (beta.shape == mu.shape == sigma.shape) or beta.ndim != 1:
            raise ValueError("beta, mu, sigma must be 1d arrays of equal length")
        if np.any(beta < 0) or np.any(mu < 0):
            raise ValueError("beta and mu must be nonnegative")
        if np.any(sigma <= 0):
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_bonds(self) -> int:
        return len(self.beta)


@dataclass(frozen=True)
class NishimoriParams:
    """The map bond index -> x_b >= 0."""

    x: np.ndarray

    def __post_init__(self):
        x = _readonly(self.x)
        if x.ndim != 1:
            raise ValueError("x must be a 1d array")
        if np.any(x < 0) or not np.all(np.isfinite(x)):
            raise ValueError("x must be finite and nonnegative")
        object.__setattr__(self, "x", x)

    @property
    def n_bonds(self) -> int:
        return len(self.x)


def uniform_params(lattice: LatticeSpec, x: float) -> NishimoriParams:
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    return NishimoriParams(x=np.full(lattice.n_bonds, float(x)))


def nl_from_physical(model: GaussianBondModel, rtol: float = NL_RTOL) -> NishimoriParams:
    """Check beta_b * sigma_b^2 = mu_b per bond and return x_b = beta_b * sigma_b."""
    lhs = model.beta * model.sigma**2
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(model.mu)), 1e-300)
    residual = np.abs(lhs - model.mu) / scale
    on_line = (residual <= rtol) | ((lhs == 0.0) & (model.mu == 0.0))
    if not np.all(on_line):
        bad = np.flatnonzero(~on_line)
        raise OffNishimoriError(list(map(int, bad)), [float(residual[b]) for b in bad])
    return NishimoriParams(x=model.beta * model.sigma)


@dataclass(frozen=True)
class DisorderRealization:
    """One draw of the unit-variance couplings j_b = x_b + g_b.

    The standard-normal core g is retained so that the same underlying
    randomness can be reused while the means move (common random numbers
    along the interpolation path).
    """

    j: np.ndarray
    g: np.ndarray
    seed: int
    sample_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "j", _readonly(self.j))
        object.__setattr__(self, "g", _readonly(self.g))

    @property
    def n_bonds(self) -> int:
        return len(self.j)


def sample_disorder(params: NishimoriParams, seed: int, sample_index: int = 0) -> DisorderRealization:
    """Draw j_b ~ N(x_b, 1) from the counter-based stream keyed by (seed, bond).

    The draw for bond b depends only on (seed, b, sample_index), so identical
    seeds give bit-identical realizations regardless of worker count or of how
    many bonds are generated together.
    """
    g = rng.standard_normals(seed, np.arange(params.n_bonds), sample_index)
    return DisorderRealization(j=params.x + g, g=g, seed=seed, sample_index=sample_index)


def shift_disorder(real: DisorderRealization, new_params: NishimoriParams) -> DisorderRealization:
    """Move the means to new_params while reusing the stored normal core."""
    if new_params.n_bonds != real.n_bonds:
        raise ValueError(f"bond count mismatch: realization has {real.n_bonds}, params {new_params.n_bonds}")
    return DisorderRealization(j=new_params.x + real.g, g=real.g, seed=real.seed, sample_index=real.sample_index)


@dataclass(frozen=True)
class InterpolationSchedule:
    """x_b(t) = base_x * sqrt(t) on the corridor and base_x elsewhere."""

    base_x: float
    corridor: Corridor
    n_bonds: int
    t: float = 1.0

    def __post_init__(self):
        if self.base_x < 0:
            raise ValueError(f"base_x must be nonnegative, got {self.base_x}")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {self.t}")
        for b in self.corridor.bond_indices:
            if not 0 <= b < self.n_bonds:
                raise ValueError(f"corridor bond {b} outside the {self.n_bonds}-bond lattice")


def interpolation_schedule(lattice: LatticeSpec, corridor: Corridor, base_x: float, t: float = 1.0) -> InterpolationSchedule:
    return InterpolationSchedule(base_x=float(base_x), corridor=corridor, n_bonds=lattice.n_bonds, t=float(t))


def interpolated_params(sched: InterpolationSchedule) -> NishimoriParams:
    x = np.full(sched.n_bonds, sched.base_x)
    idx = list(sched.corridor.bond_indices)
    x[idx] = sched.base_x * math.sqrt(sched.t)
    return NishimoriParams(x=x)
