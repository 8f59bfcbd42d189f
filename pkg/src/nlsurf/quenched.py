"""Quenched (disorder) averages: tensor Gauss-Hermite quadrature or seeded MC.

Both methods are driven through one chunked "disorder core" generator.  A core
is the standard-normal part of the couplings: Monte Carlo draws it from the
counter-based stream, quadrature walks a tensor grid of Hermite nodes with
product weights.  The coupling mean x_b is added on top per parameter variant,
so several nearby parameter sets (interpolation nodes, finite-difference
bumps) share the same core - common random numbers by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from . import rng
from .exact import ENUMERATION_CAP, SizeCapExceeded, batch_gibbs, corridor_average, effective_couplings
from .lattice import LatticeSpec
from .model import DisorderRealization, InterpolationSchedule, NishimoriParams, interpolated_params, shift_disorder

QUADRATURE_GRID_CAP = 10**7
_MC_CHUNK = 4096
_QUAD_CHUNK = 4096


class GridTooLarge(ValueError):
    """Tensor quadrature grid beyond the feasibility bound."""


@dataclass(frozen=True)
class Quadrature:
    nodes_per_bond: int = 20

    def __post_init__(self):
        if self.nodes_per_bond < 2:
            raise ValueError("nodes_per_bond must be >= 2")


@dataclass(frozen=True)
class DisorderMC:
    samples: int
    seed: int

    def __post_init__(self):
        if self.samples < 2:
            raise ValueError("DisorderMC needs samples >= 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


AveragingMethod = Quadrature | DisorderMC


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    method: AveragingMethod
    n_bonds: int
    n_sites: int


def combined_std_error(a: Estimate, b: Estimate) -> float:
    return math.hypot(a.std_error, b.std_error)


def legendre_nodes_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    if n < 2:
        raise ValueError("need at least 2 quadrature nodes")
    xs, ws = leggauss(n)
    return 0.5 * (xs + 1.0), 0.5 * ws


_POLE_CLEARANCE = 1.75


def gh_scale(x: float) -> float:
    """Node-scaling factor for the Hermite rule at coupling strength x.

    The fixed-disorder observables have singularities at Im(j) = pi/(2x),
    which stalls plain Gauss-Hermite once x grows past ~0.9.  Substituting
    j = x + s*u with s < 1 pushes the singularity away from the node range;
    the Jacobian and the Gaussian mismatch fold into the weights, so the rule
    still integrates the exact N(x, 1) measure.
    """
    if x <= 0.9:
        return 1.0
    return max(0.45, math.pi / (2.0 * x * _POLE_CLEARANCE))


def disorder_cores(
    lattice: LatticeSpec,
    method: AveragingMethod,
    active: np.ndarray | None = None,
    x_ref: np.ndarray | None = None,
) -> Iterator[tuple[np.ndarray, np.ndarray | None]]:
    """Yield (core, weights) chunks; couplings are j = x + core per variant.

    Monte Carlo cores are N(0,1) draws keyed by (seed, bond, sample) and
    weights is None (uniform).  Quadrature cores hold (scaled) Hermite node
    offsets on the active bonds (zero elsewhere) with the matching product
    weights; the grid is feasible only while nodes_per_bond ** n_active stays
    within QUADRATURE_GRID_CAP.  x_ref gives the per-bond coupling scale used
    to pick the node scaling (the largest x any variant will add).
    """
    n_bonds = lattice.n_bonds
    if isinstance(method, DisorderMC):
        bond_idx = np.arange(n_bonds, dtype=np.uint64)
        for lo in range(0, method.samples, _MC_CHUNK):
            hi = min(lo + _MC_CHUNK, method.samples)
            samples = np.arange(lo, hi, dtype=np.uint64)
            core = rng.standard_normals(method.seed, bond_idx[None, :], samples[:, None])
            yield core, None
        return

    if active is None:
        active = np.ones(n_bonds, dtype=bool)
    act = np.flatnonzero(active)
    n_active = len(act)
    nodes = method.nodes_per_bond
    if n_active > 0 and nodes**n_active > QUADRATURE_GRID_CAP:
        raise GridTooLarge(
            f"{nodes} nodes on {n_active} active bonds gives {nodes**n_active} grid points "
            f"(cap {QUADRATURE_GRID_CAP}); use DisorderMC for this instance"
        )
    eps, w = hermegauss(nodes)
    wnorm = w / math.sqrt(2.0 * math.pi)
    scaled: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    for b in act:
        s = gh_scale(float(x_ref[b])) if x_ref is not None else 1.0
        if s not in scaled:
            scaled[s] = (s * eps, wnorm * s * np.exp((1.0 - s * s) * eps * eps / 2.0)) if s != 1.0 else (eps, wnorm)
    total = nodes**n_active
    strides = [nodes ** (n_active - 1 - p) for p in range(n_active)]
    for lo in range(0, total, _QUAD_CHUNK):
        hi = min(lo + _QUAD_CHUNK, total)
        gidx = np.arange(lo, hi, dtype=np.int64)
        core = np.zeros((hi - lo, n_bonds))
        weights = np.ones(hi - lo)
        for pos, b in enumerate(act):
            s = gh_scale(float(x_ref[b])) if x_ref is not None else 1.0
            nd, wt = scaled[s]
            digit = (gidx // strides[pos]) % nodes
            core[:, b] = nd[digit]
            weights *= wt[digit]
        yield core, weights


@dataclass
class VariantChunk:
    """Fixed-disorder values for one parameter variant over one chunk."""

    log_z: np.ndarray | None
    bond: dict
    pair: dict
    j: dict


def quenched_joint(
    lattice: LatticeSpec,
    variants: Sequence[NishimoriParams],
    method: AveragingMethod,
    functionals: Mapping[str, Callable[[list[VariantChunk]], np.ndarray]],
    *,
    bonds: tuple[int, ...] = (),
    pairs: tuple[tuple[int, int], ...] = (),
    need_log_z: bool = False,
    j_bonds: tuple[int, ...] = (),
    cap: int = ENUMERATION_CAP,
) -> dict[str, Estimate]:
    """Average per-sample functionals of several parameter variants jointly.

    All variants are evaluated on the same disorder cores, and all requested
    functionals are accumulated in a single pass.  Quadrature estimates carry
    std_error 0; Monte Carlo estimates carry the plain sample std error
    (realizations are i.i.d., so no batching is needed).
    """
    if lattice.n_sites > cap:
        raise SizeCapExceeded(lattice.n_sites, cap)
    for v in variants:
        if v.n_bonds != lattice.n_bonds:
            raise ValueError("variant bond count does not match the lattice")
    active = np.zeros(lattice.n_bonds, dtype=bool)
    x_ref = np.zeros(lattice.n_bonds)
    for v in variants:
        active |= v.x > 0
        x_ref = np.maximum(x_ref, v.x)
    precise = isinstance(method, Quadrature)

    names = list(functionals)
    count = 0
    wsum = 0.0
    sums = {n: 0.0 for n in names}
    sqsums = {n: 0.0 for n in names}
    shifts: dict[str, float] = {}
    for core, weights in disorder_cores(lattice, method, active, x_ref):
        chunk_vals: list[VariantChunk] = []
        for v in variants:
            j = v.x[None, :] + core
            K = v.x[None, :] * j
            bg = batch_gibbs(
                lattice, K, bonds=bonds, pairs=pairs, need_log_z=need_log_z, precise=precise, cap=cap
            )
            chunk_vals.append(VariantChunk(log_z=bg.log_z, bond=bg.bond, pair=bg.pair, j={b: j[:, b] for b in j_bonds}))
        for name in names:
            vals = np.asarray(functionals[name](chunk_vals), dtype=np.float64)
            if weights is None:
                if name not in shifts:
                    shifts[name] = float(vals[0])
                c = vals - shifts[name]
                sums[name] += float(c.sum())
                sqsums[name] += float(c @ c)
            else:
                sums[name] += float(weights @ vals)
        count += len(core)
        if weights is not None:
            wsum += float(weights.sum())

    out: dict[str, Estimate] = {}
    for name in names:
        if isinstance(method, DisorderMC):
            n = count
            mean_c = sums[name] / n
            var = max(sqsums[name] - n * mean_c * mean_c, 0.0) / (n - 1)
            out[name] = Estimate(
                value=shifts[name] + mean_c,
                std_error=math.sqrt(var / n),
                method=method,
                n_bonds=lattice.n_bonds,
                n_sites=lattice.n_sites,
            )
        else:
            out[name] = Estimate(
                value=sums[name] / wsum,
                std_error=0.0,
                method=method,
                n_bonds=lattice.n_bonds,
                n_sites=lattice.n_sites,
            )
    return out


def quenched_pressure(lattice: LatticeSpec, params: NishimoriParams, method: AveragingMethod, cap: int = ENUMERATION_CAP) -> Estimate:
    """[ln Z] under the product Gaussian with means x_b."""
    res = quenched_joint(
        lattice,
        [params],
        method,
        {"pressure": lambda v: v[0].log_z},
        need_log_z=True,
        cap=cap,
    )
    return res["pressure"]


def quenched_correlation(
    lattice: LatticeSpec,
    params: NishimoriParams,
    queries: Sequence[tuple],
    method: AveragingMethod,
    cap: int = ENUMERATION_CAP,
) -> dict[tuple, Estimate]:
    """Quenched bond observables, one disorder pass shared by all queries.

    Query forms: ("bond", b) for [<S_b>], ("bond_sq", b) for [<S_b>^2],
    ("pair", b, b2) for [<S_b S_b2>], ("j_bond", b) for [<j_b S_b>].
    """
    bonds: set[int] = set()
    pairs: set[tuple[int, int]] = set()
    j_bonds: set[int] = set()
    for q in queries:
        kind = q[0]
        if kind in ("bond", "bond_sq"):
            bonds.add(q[1])
        elif kind == "pair":
            pairs.add((q[1], q[2]))
        elif kind == "j_bond":
            bonds.add(q[1])
            j_bonds.add(q[1])
        else:
            raise ValueError(f"unknown query {q!r}")

    def make(q):
        kind = q[0]
        if kind == "bond":
            return lambda v: v[0].bond[q[1]]
        if kind == "bond_sq":
            return lambda v: v[0].bond[q[1]] ** 2
        if kind == "pair":
            return lambda v: v[0].pair[(q[1], q[2])]
        return lambda v: v[0].j[q[1]] * v[0].bond[q[1]]

    functionals = {repr(q): make(q) for q in queries}
    res = quenched_joint(
        lattice,
        [params],
        method,
        functionals,
        bonds=tuple(sorted(bonds)),
        pairs=tuple(sorted(pairs)),
        j_bonds=tuple(sorted(j_bonds)),
        cap=cap,
    )
    return {q: res[repr(q)] for q in queries}


def t_integrand(
    lattice: LatticeSpec,
    sched: InterpolationSchedule,
    t: float,
    disorder: DisorderRealization,
    cap: int = ENUMERATION_CAP,
) -> float:
    """Corridor bond-spin average <S_C> at fixed disorder and interpolation time t.

    The stored normal core of the realization is kept and only the means move
    to x_b(t), so for fixed disorder this is a smooth function of t.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    sched_t = InterpolationSchedule(base_x=sched.base_x, corridor=sched.corridor, n_bonds=sched.n_bonds, t=t)
    params_t = interpolated_params(sched_t)
    shifted = shift_disorder(disorder, params_t)
    return corridor_average(lattice, effective_couplings(params_t, shifted), sched.corridor, cap=cap)
