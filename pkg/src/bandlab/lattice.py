"""Periodic lattice geometry, shape functions and band variance profiles."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Lattice:
    """Finite periodic box {-floor(N/2), ..., N-1-floor(N/2)}^d.

    Sites are indexed in row-major order over the shifted coordinates
    x + floor(N/2), so flat index 0 is the most negative corner.
    """

    d: int
    N: int

    def __post_init__(self):
        if self.d < 1 or self.N < 2:
            raise ValueError("need d >= 1 and N >= 2")

    @property
    def size(self) -> int:
        return self.N ** self.d

    @property
    def half(self) -> int:
        return self.N // 2

    def reduce(self, x):
        """Unique representative of x modulo N*Z^d, componentwise.

        Works on any integer array whose last axis has length d (or on
        bare integers for d = 1 callers that index componentwise).
        """
        x = np.asarray(x)
        return (x + self.half) % self.N - self.half

    def coords(self, flat):
        """Flat site index -> coordinate array of shape (..., d)."""
        flat = np.asarray(flat)
        out = np.empty(flat.shape + (self.d,), dtype=np.int64)
        rem = flat
        for axis in range(self.d - 1, -1, -1):
            out[..., axis] = rem % self.N
            rem = rem // self.N
        return out - self.half

    def flat_index(self, x):
        """Coordinate array of shape (..., d) -> flat site index."""
        x = np.asarray(x)
        shifted = (x + self.half) % self.N
        flat = np.zeros(shifted.shape[:-1], dtype=np.int64)
        for axis in range(self.d):
            flat = flat * self.N + shifted[..., axis]
        return flat

    def all_sites(self):
        """Coordinates of every site, shape (size, d), in flat order."""
        return self.coords(np.arange(self.size))


def periodic_reduce(x, N):
    """Componentwise representative of x in {-floor(N/2),...,N-1-floor(N/2)}."""
    x = np.asarray(x)
    half = N // 2
    return (x + half) % N - half


# ---------------------------------------------------------------------------
# shape functions
# ---------------------------------------------------------------------------

class ShapeFunction:
    """Nonnegative bump f on R^d with unit mass, zero mean and finite support.

    The evaluator must accept arrays of shape (..., d). `support_radius` is a
    sup-norm radius R with f = 0 outside [-R, R]^d; for the gaussian bump it is
    a truncation radius chosen so the neglected mass is below 1e-12.
    """

    def __init__(self, kind, fn, support_radius, params=None, moments=None):
        self.kind = kind
        self.fn = fn
        self.support_radius = float(support_radius)
        self.params = dict(params or {})
        # optional closed-form (mass, per-axis second moment) used by tests
        self.moments = moments

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=np.float64))

    def descriptor(self):
        return {"kind": self.kind, **self.params}

    def __repr__(self):
        return f"ShapeFunction({self.kind!r}, R={self.support_radius})"


def _box(x):
    inside = np.all(np.abs(x) <= 1.0, axis=-1)
    return inside * (0.5 ** x.shape[-1])


def _triangular(x):
    return np.prod(np.clip(1.0 - np.abs(x), 0.0, None), axis=-1)


_GAUSS_RADIUS = 8.0  # mass outside [-8,8]^d is < 1e-12 for d <= 3


def _gaussian(x):
    d = x.shape[-1]
    inside = np.all(np.abs(x) <= _GAUSS_RADIUS, axis=-1)
    r2 = np.sum(x * x, axis=-1)
    return inside * np.exp(-0.5 * r2) / (2.0 * math.pi) ** (d / 2.0)


_SHAPES = {
    "box": lambda: ShapeFunction("box", _box, 1.0, moments=(1.0, 1.0 / 3.0)),
    "triangular": lambda: ShapeFunction(
        "triangular", _triangular, 1.0, moments=(1.0, 1.0 / 6.0)
    ),
    "gaussian": lambda: ShapeFunction(
        "gaussian", _gaussian, _GAUSS_RADIUS, moments=(1.0, 1.0)
    ),
}


def get_shape(kind, **params):
    """Look up a built-in shape function by name."""
    try:
        maker = _SHAPES[kind]
    except KeyError:
        raise ValueError(f"unknown shape kind {kind!r}; have {sorted(_SHAPES)}")
    shape = maker()
    shape.params.update(params)
    return shape


# ---------------------------------------------------------------------------
# band profile
# ---------------------------------------------------------------------------

@dataclass
class BandProfile:
    """Variance profile sigma^2_xy = f([x-y]_N / W) / M on a periodic lattice.

    M is the exact lattice normalizer sum_x f([x]_N / W), so each row of the
    variance matrix sums to one identically. Offsets are the displacement
    classes with nonzero variance, in flat-index order.
    """

    lattice: Lattice
    W: float
    shape: ShapeFunction
    M: float = field(init=False)
    offsets: np.ndarray = field(init=False)      # (n_off, d) int64
    sigma2: np.ndarray = field(init=False)       # (n_off,) float64
    _gather_cache: dict = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self):
        lat = self.lattice
        if self.W < 1:
            raise ValueError("bandwidth W must be >= 1")
        if self.W > lat.N:
            raise ValueError(f"W={self.W} exceeds N={lat.N}")
        sites = lat.all_sites()
        f_vals = self.shape(sites / self.W)
        if np.any(f_vals < 0):
            raise ValueError("shape function must be nonnegative")
        self.M = float(f_vals.sum())
        if self.M <= 0:
            raise ValueError("shape vanishes on the whole lattice")
        mask = f_vals > 0
        self.offsets = sites[mask]
        self.sigma2 = f_vals[mask] / self.M
        self._warn_regime()

    def _warn_regime(self):
        N, W, d = self.lattice.N, self.W, self.lattice.d
        if N < W * self.M ** (1.0 / 6.0):
            warnings.warn(
                f"N={N} below W*M^(1/6)={W * self.M ** (1/6):.1f}; "
                "profile is valid but outside the intended regime",
                stacklevel=3,
            )
        if math.log(N) > (10 * d + 16) * math.log(max(W, 1.0 + 1e-9)):
            warnings.warn(
                f"N={N} above W^(10d+16); profile is valid but outside the "
                "intended regime",
                stacklevel=3,
            )

    @property
    def row_sum(self) -> float:
        """sum_y sigma^2_xy; equals 1 up to float accumulation."""
        return float(self.sigma2.sum())

    @property
    def max_sigma2(self) -> float:
        return float(self.sigma2.max())

    @property
    def m_edge(self) -> float:
        """1 / max sigma^2, the normalizer used by edge thresholds."""
        return 1.0 / self.max_sigma2

    def sigma2_at(self, x, y):
        """Variance of the entry H_xy."""
        o = self.lattice.reduce(np.asarray(x) - np.asarray(y))
        val = self.shape(np.asarray(o, dtype=np.float64) / self.W)
        return val / self.M

    def step_second_moment(self):
        """sum_o sigma^2(o) * o o^T, the per-step covariance in lattice units."""
        o = self.offsets.astype(np.float64)
        return np.einsum("k,ki,kj->ij", self.sigma2, o, o)

    def offset_split(self):
        """Partition offsets into (zero, canonical, mirrored, self_paired).

        `canonical` holds one representative of each pair {o, [-o]_N}; a
        self-paired offset satisfies [-o]_N = o (only on even tori) and needs
        a Hermitian projection after sampling.
        """
        lat = self.lattice
        flat = lat.flat_index(self.offsets)
        neg_flat = lat.flat_index(lat.reduce(-self.offsets))
        zero = flat == lat.flat_index(np.zeros(lat.d, dtype=np.int64))
        self_paired = (flat == neg_flat) & ~zero
        canonical = (flat < neg_flat)
        mirrored = (flat > neg_flat)
        return zero, canonical, mirrored, self_paired

    def descriptor(self):
        return {
            "d": self.lattice.d,
            "N": self.lattice.N,
            "W": self.W,
            "shape": self.shape.descriptor(),
        }


def build_profile(d, N, W, shape="box", **shape_params):
    """Convenience constructor from plain parameters or a descriptor dict."""
    if isinstance(shape, str):
        shape = get_shape(shape, **shape_params)
    elif isinstance(shape, dict):
        kw = {k: v for k, v in shape.items() if k != "kind"}
        shape = get_shape(shape["kind"], **kw)
    return BandProfile(Lattice(d, N), float(W), shape)


def wigner_profile(N):
    """Mean-field profile with sigma^2 = N^-1 for every pair (d = 1)."""
    if N % 2:
        raise ValueError("wigner profile needs even N so the box covers the torus")
    with warnings.catch_warnings():
        # the band-regime advisory is meaningless for the mean-field preset
        warnings.simplefilter("ignore", UserWarning)
        return build_profile(1, N, N // 2, "box")
