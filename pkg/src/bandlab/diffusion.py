"""Monte Carlo for the mean transition density and its diffusive rescaling."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .chebyshev import propagate
from .ensemble import BandMatrixSample, EntryDistribution
from .lattice import BandProfile
from .limit_density import (CovarianceMatrix, covariance_of_shape,
                            limit_second_moment, limit_weak_integral)

# per-realization probability conservation; violations mean the propagation
# itself went wrong, so this is a hard error rather than a statistic
_MASS_TOL = 1e-9

# keep raw per-realization profiles when the matrix stays below this many
# floats; weak tests then get exact per-functional standard errors
_SAMPLE_FLOAT_CAP = 8_000_000


def default_threads() -> int:
    env = os.environ.get("BANDLAB_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return max(1, min(4, os.cpu_count() or 1))


# ---------------------------------------------------------------------------
# streaming statistics, merged over a fixed binary tree
# ---------------------------------------------------------------------------

class _Acc:
    """Count, mean and sum of squared deviations for a vector of sites."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self, values):
        self.n = 1
        self.mean = np.array(values, dtype=np.float64)
        self.m2 = np.zeros_like(self.mean)

    def merge(self, right: "_Acc") -> "_Acc":
        # Chan's pairwise update; `self` is always the left block so the
        # float operations are identical for every worker schedule
        n = self.n + right.n
        delta = right.mean - self.mean
        self.mean += delta * (right.n / n)
        self.m2 += right.m2 + delta * delta * (self.n * right.n / n)
        self.n = n
        return self


class _TreeReducer:
    """Deterministic pairwise reduction over leaves 0..R-1.

    Leaves may arrive in any order; each is parked at (level 0, block r) and
    complete sibling blocks are merged immediately, left into right, exactly
    as a fixed binary tree over the index range would. The result is
    bit-identical for any arrival order.
    """

    def __init__(self, count):
        self.count = count
        self._pending = {}

    def add(self, index, acc):
        level, block = 0, index
        while True:
            sibling = block ^ 1
            if (level, sibling) not in self._pending:
                lo = sibling << level
                if lo < self.count:
                    # sibling block still owed; park and wait
                    self._pending[(level, block)] = acc
                    return
                # sibling range is empty (past the end); promote alone
                level, block = level + 1, block >> 1
                continue
            other = self._pending.pop((level, sibling))
            acc = other.merge(acc) if sibling < block else acc.merge(other)
            level, block = level + 1, block >> 1
            if block == 0 and (1 << level) >= self.count:
                self._pending[(level, 0)] = acc
                return

    def result(self):
        if len(self._pending) != 1:
            raise RuntimeError(f"reduction incomplete: {len(self._pending)} blocks left")
        (_, block), acc = self._pending.popitem()
        if block != 0 or acc.n != self.count:
            raise RuntimeError("reduction tree ended in a bad state")
        return acc


# ---------------------------------------------------------------------------
# test functions for weak comparisons
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Bounded test function on the macroscopic coordinate X.

    `fn` maps arrays of shape (..., d) to values. `gauss1d`, when present,
    is the exact integral of fn against a centered normal of given variance
    in d = 1; it spares the Hermite quadrature for non-smooth functions.
    """

    name: str
    fn: object
    gauss1d: object = None

    def __call__(self, X):
        return self.fn(np.asarray(X, dtype=np.float64))


def _phi_gaussian(X):
    return np.exp(-0.5 * np.sum(X * X, axis=-1))


def _phi_cosine_window(X, a=4.0):
    inside = np.all(np.abs(X) <= a, axis=-1)
    val = np.prod(0.5 * (1.0 + np.cos(np.pi * np.clip(X, -a, a) / a)), axis=-1)
    return val * inside


def _phi_box(X):
    return np.all(np.abs(X) <= 1.0, axis=-1).astype(np.float64)


def _box_gauss1d(var):
    return float(special.erf(1.0 / math.sqrt(2.0 * var)))


def _gaussian_gauss1d(var):
    return 1.0 / math.sqrt(1.0 + var)


TEST_FUNCTIONS = {
    "gaussian": TestFunction("gaussian", _phi_gaussian, _gaussian_gauss1d),
    "cosine_window": TestFunction("cosine_window", _phi_cosine_window),
    "box_indicator": TestFunction("box_indicator", _phi_box, _box_gauss1d),
}


def get_test_function(name) -> TestFunction:
    if isinstance(name, TestFunction):
        return name
    try:
        return TEST_FUNCTIONS[name]
    except KeyError:
        raise KeyError(f"unknown test function {name!r}; have {sorted(TEST_FUNCTIONS)}")


# ---------------------------------------------------------------------------
# the estimator
# ---------------------------------------------------------------------------

@dataclass
class DiffusionProfile:
    """Per-site mean of |<delta_x, e^{-itH/2} delta_0>|^2 over realizations."""

    profile: BandProfile
    dist: EntryDistribution
    t: float
    realizations: int
    seed: int
    rho: np.ndarray
    rho_se: np.ndarray
    mass_defect_max: float
    moment1: np.ndarray          # (R, d) per-realization sum rho * x
    moment2: np.ndarray          # (R, d, d) per-realization sum rho * x x^T
    samples: np.ndarray | None   # (R, sites) raw profiles when small enough
    residual_target: float

    def descriptor(self) -> dict:
        return {
            "profile": self.profile.descriptor(),
            "dist": self.dist.descriptor(),
            "t": self.t,
            "realizations": self.realizations,
            "seed": self.seed,
            "residual_target": self.residual_target,
            "mass_defect_max": self.mass_defect_max,
        }


def estimate_rho(profile: BandProfile, dist: EntryDistribution, t, realizations,
                 seed, residual_target=1e-12, threads=None,
                 keep_samples=None) -> DiffusionProfile:
    """Average |psi_t|^2 over independent matrix draws.

    Every realization r is drawn from its own counter stream (seed, r), so
    the estimate is reproducible bit for bit no matter how many threads run
    the propagations. The source site is the lattice origin.
    """
    if realizations < 1:
        raise ValueError("need at least one realization")
    lat = profile.lattice
    size = lat.size
    psi0 = np.zeros(size, dtype=np.complex128)
    psi0[lat.flat_index(np.zeros(lat.d, dtype=np.int64))] = 1.0
    coords = lat.all_sites().astype(np.float64)

    if keep_samples is None:
        keep_samples = realizations * size <= _SAMPLE_FLOAT_CAP
    samples = np.empty((realizations, size)) if keep_samples else None

    mass_defect = np.empty(realizations)
    moment1 = np.empty((realizations, lat.d))
    moment2 = np.empty((realizations, lat.d, lat.d))

    norm_bounds = np.empty(realizations)

    def one(r):
        H = BandMatrixSample(profile, dist, seed, index=r)
        res = propagate(H, t, residual_target=residual_target, psi0=psi0,
                        warn_norm=False)
        norm_bounds[r] = res.norm_bound
        return res.rho

    reducer = _TreeReducer(realizations)
    threads = threads if threads is not None else default_threads()

    def consume(r, rho):
        mass_defect[r] = abs(rho.sum() - 1.0)
        moment1[r] = rho @ coords
        moment2[r] = (rho[:, None] * coords).T @ coords
        if samples is not None:
            samples[r] = rho
        reducer.add(r, _Acc(rho))

    if threads == 1:
        for r in range(realizations):
            consume(r, one(r))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for r, rho in zip(range(realizations), pool.map(one, range(realizations))):
                consume(r, rho)

    acc = reducer.result()
    if norm_bounds.max() > 2.5:
        # one advisory for the whole run instead of one per realization
        warnings.warn(
            f"row-sum norm bound up to {norm_bounds.max():.2f} > 2.5 across "
            f"{realizations} realizations; cutoffs were enlarged accordingly",
            stacklevel=2,
        )
    worst = float(mass_defect.max())
    if worst > _MASS_TOL:
        raise RuntimeError(f"probability conservation violated: defect {worst:.3e}")
    if realizations > 1:
        se = np.sqrt(acc.m2 / (acc.n * (acc.n - 1)))
    else:
        se = np.zeros(size)
    return DiffusionProfile(profile, dist, float(t), realizations, int(seed),
                            acc.mean, se, worst, moment1, moment2, samples,
                            residual_target)


# ---------------------------------------------------------------------------
# diffusive rescaling and comparisons
# ---------------------------------------------------------------------------

def _scales(result: DiffusionProfile, kappa):
    d = result.profile.lattice.d
    W = result.profile.W
    if kappa >= 1.0 / 3.0:
        warnings.warn(f"kappa = {kappa} is at or above 1/3; the diffusive "
                      "approximation is only controlled below 1/3")
    T = result.t / W ** (d * kappa)
    xscale = W ** (1.0 + d * kappa / 2.0)
    return d, W, T, xscale


def _shape_covariance(result: DiffusionProfile) -> CovarianceMatrix:
    shape = result.profile.shape
    d = result.profile.lattice.d
    if shape.moments is not None:
        mass, second = shape.moments
        return CovarianceMatrix.from_value(second / mass, d)
    return covariance_of_shape(shape, d=d)


@dataclass
class WeakEntry:
    name: str
    lattice_value: float
    limit_value: float
    gap: float
    mc_se: float


@dataclass
class RescaledSummary:
    kappa: float
    T: float
    x_scale: float
    mean: np.ndarray
    covariance: np.ndarray
    entries: list

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "T": self.T,
            "x_scale": self.x_scale,
            "mean": self.mean.tolist(),
            "covariance": self.covariance.tolist(),
            "weak_tests": [vars(e) for e in self.entries],
        }


def weak_test(result: DiffusionProfile, kappa, phis=None, limit_nodes=200) -> RescaledSummary:
    """Compare sum_x rho(t, x) phi(x / x_scale) with the limit integral.

    The lattice side uses the realization mean; its MC standard error comes
    from the retained per-realization profiles (exact per functional). The
    limit side is quadrature against the heat-kernel mixture.
    """
    d, W, T, xscale = _scales(result, kappa)
    lat = result.profile.lattice
    if lat.N < W ** (1.0 + d / 6.0):
        warnings.warn(f"N = {lat.N} is below W^(1+d/6) = {W ** (1.0 + d / 6.0):.1f}; "
                      "the box may be too small for the diffusive regime")
    sigma = _shape_covariance(result)
    X = lat.all_sites().astype(np.float64) / xscale
    phis = [get_test_function(p) for p in (phis or list(TEST_FUNCTIONS))]

    entries = []
    for phi in phis:
        weights = np.asarray(phi(X), dtype=np.float64)
        val = float(result.rho @ weights)
        if result.samples is not None and result.realizations > 1:
            per = result.samples @ weights
            mc_se = float(per.std(ddof=1) / math.sqrt(result.realizations))
        else:
            mc_se = float("nan")
        if d == 1 and phi.gauss1d is not None:
            lim = _limit_weak_1d(T, sigma, phi.gauss1d, nodes=limit_nodes)
        else:
            lim = limit_weak_integral(T, sigma, phi, nodes=limit_nodes)
        entries.append(WeakEntry(phi.name, val, lim, abs(val - lim), mc_se))

    mean = result.moment1.mean(axis=0) / xscale
    cov = result.moment2.mean(axis=0) / xscale ** 2 - np.outer(mean, mean)
    return RescaledSummary(float(kappa), T, xscale, mean, cov, entries)


def _limit_weak_1d(T, sigma, gauss1d, nodes=200):
    # exact Gaussian integral per mixture node, d = 1 only
    x, w = np.polynomial.legendre.leggauss(nodes)
    theta = 0.25 * math.pi * (x + 1.0)
    lam = np.sin(theta)
    weight = (4.0 / math.pi) * lam * lam * w * 0.25 * math.pi
    var = lam * T * sigma.matrix[0, 0]
    return float(sum(wk * gauss1d(vk) for wk, vk in zip(weight, var)))


@dataclass
class SecondMomentReport:
    kappa: float
    T: float
    measured: float
    measured_se: float
    target: float
    ratio: float

    def as_dict(self) -> dict:
        return vars(self).copy()


def second_moment_check(result: DiffusionProfile, kappa) -> SecondMomentReport:
    """Ratio of the rescaled lattice second moment to (8/(3 pi)) T Sigma.

    In d > 1 both sides are compared through their traces.
    """
    d, W, T, xscale = _scales(result, kappa)
    sigma = _shape_covariance(result)
    per = np.trace(result.moment2, axis1=1, axis2=2) / xscale ** 2
    measured = float(per.mean())
    se = float(per.std(ddof=1) / math.sqrt(len(per))) if len(per) > 1 else 0.0
    target = float(np.trace(limit_second_moment(T, sigma)))
    return SecondMomentReport(float(kappa), T, measured, se, target, measured / target)
