"""Limiting diffusion profile: covariance, heat kernel and the lambda mixture."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .lattice import ShapeFunction

# eigenvalue floor relative to the largest one; below this Sigma is rejected
_SINGULAR_RATIO = 1e-10


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric positive-definite d x d matrix with cached det and inverse."""

    matrix: np.ndarray
    det: float = field(init=False)
    inv: np.ndarray = field(init=False)

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("covariance must be square")
        if not np.allclose(m, m.T, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise ValueError("covariance must be symmetric")
        eig = np.linalg.eigvalsh(m)
        if eig[0] <= _SINGULAR_RATIO * eig[-1] or eig[-1] <= 0:
            raise ValueError(f"covariance is numerically singular (eigenvalues {eig})")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "det", float(np.linalg.det(m)))
        object.__setattr__(self, "inv", np.linalg.inv(m))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_value(cls, value, d=1) -> "CovarianceMatrix":
        """Scalar -> value * identity in dimension d; array passed through."""
        if isinstance(value, CovarianceMatrix):
            return value
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim == 0:
            return cls(float(arr) * np.eye(d))
        return cls(arr)


def covariance_of_shape(shape: ShapeFunction, d=1, rel_tol=1e-8) -> CovarianceMatrix:
    """Second-moment matrix of the shape, integral f(x) x_i x_j dx.

    Adaptive quadrature over the declared support box, so custom shapes only
    need an evaluator and a radius. The mass is integrated alongside as a
    sanity check; shapes are supposed to be normalized.
    """
    R = shape.support_radius
    bounds = [(-R, R)] * d
    opts = {"epsrel": rel_tol, "epsabs": 1e-14}

    def moment(i, j):
        if d == 1:
            val, _ = integrate.quad(
                lambda x: float(shape(np.array([x]))) * x * x, -R, R, **opts)
            return val
        def integrand(*xs):
            x = np.array(xs)
            return float(shape(x)) * xs[i] * xs[j]
        val, _ = integrate.nquad(integrand, bounds, opts=opts)
        return val

    if d == 1:
        mass, _ = integrate.quad(lambda x: float(shape(np.array([x]))), -R, R, **opts)
    else:
        mass, _ = integrate.nquad(lambda *xs: float(shape(np.array(xs))), bounds, opts=opts)
    if abs(mass - 1.0) > 1e-6:
        warnings.warn(f"shape mass {mass:.6g} deviates from 1; covariance is unnormalized")

    sigma = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            sigma[i, j] = sigma[j, i] = moment(i, j)
    return CovarianceMatrix(sigma)


def heat_kernel(T, X, sigma) -> np.ndarray:
    """Gaussian density with covariance T * Sigma, evaluated at X.

    X has shape (..., d); a bare float is accepted for d = 1. T must be
    positive, the T -> 0 delta limit is not represented.
    """
    if T <= 0:
        raise ValueError("heat kernel needs T > 0")
    sig = sigma if isinstance(sigma, CovarianceMatrix) else CovarianceMatrix.from_value(sigma)
    d = sig.d
    X = np.asarray(X, dtype=np.float64)
    scalar_in = (d == 1 and (X.ndim == 0 or X.shape[-1] != 1))
    if scalar_in:
        X = X[..., None]
    quad = np.einsum("...i,ij,...j->...", X, sig.inv, X)
    norm = (2.0 * math.pi * T) ** (-d / 2.0) * sig.det ** -0.5
    return norm * np.exp(-quad / (2.0 * T))


def _theta_rule(nodes):
    # Gauss-Legendre on [0, pi/2]; lambda = sin(theta) removes the
    # 1/sqrt(1 - lambda^2) endpoint singularity of the mixture weight
    x, w = np.polynomial.legendre.leggauss(nodes)
    theta = 0.25 * math.pi * (x + 1.0)
    return theta, w * 0.25 * math.pi


def limit_L(T, X, sigma, nodes=200) -> np.ndarray:
    """Mixture of heat kernels G(lambda T, X) with weight (4/pi) lambda^2 / sqrt(1-lambda^2).

    In d = 3 the integrand behaves like lambda^(1/2) at X = 0 after the
    substitution, still integrable; no special casing.
    """
    if T <= 0:
        raise ValueError("limit density needs T > 0")
    sig = sigma if isinstance(sigma, CovarianceMatrix) else CovarianceMatrix.from_value(sigma)
    theta, w = _theta_rule(nodes)
    lam = np.sin(theta)
    weight = (4.0 / math.pi) * lam * lam * w
    out = 0.0
    for lk, wk in zip(lam, weight):
        out = out + wk * heat_kernel(lk * T, X, sig)
    return out


def limit_second_moment(T, sigma) -> np.ndarray:
    """Exact X X^T moment of the limit density: (8 / (3 pi)) T Sigma.

    The lambda moment integral of lambda^3 / sqrt(1 - lambda^2) is 2/3,
    which combined with the 4/pi prefactor gives the constant.
    """
    sig = sigma if isinstance(sigma, CovarianceMatrix) else CovarianceMatrix.from_value(sigma)
    return (8.0 / (3.0 * math.pi)) * T * sig.matrix


def limit_weak_integral(T, sigma, phi, nodes=200, hermite=80) -> float:
    """Integral of L(T, X) phi(X) dX for bounded continuous phi.

    The X integral against each Gaussian is done by Gauss-Hermite (tensor
    grid in d > 1), the lambda mixture by the same theta rule as limit_L.
    phi receives arrays of shape (..., d).
    """
    if T <= 0:
        raise ValueError("limit density needs T > 0")
    sig = sigma if isinstance(sigma, CovarianceMatrix) else CovarianceMatrix.from_value(sigma)
    d = sig.d
    z, wz = np.polynomial.hermite.hermgauss(hermite)
    if d == 1:
        grid = z[:, None]
        wgrid = wz
    else:
        axes = np.meshgrid(*([z] * d), indexing="ij")
        grid = np.stack([a.ravel() for a in axes], axis=-1)
        wax = np.meshgrid(*([wz] * d), indexing="ij")
        wgrid = np.prod(np.stack([a.ravel() for a in wax]), axis=0)
    chol = np.linalg.cholesky(sig.matrix)
    theta, w = _theta_rule(nodes)
    lam = np.sin(theta)
    weight = (4.0 / math.pi) * lam * lam * w
    total = 0.0
    hnorm = math.pi ** (-d / 2.0)
    for lk, wk in zip(lam, weight):
        # X = sqrt(2 lambda T) chol(Sigma) z maps the e^{-|z|^2} weight to G(lambda T, .)
        X = math.sqrt(2.0 * lk * T) * grid @ chol.T
        total += wk * hnorm * float(np.sum(wgrid * np.asarray(phi(X), dtype=np.float64)))
    return total


def limit_profile(T, xs, sigma, nodes=200) -> np.ndarray:
    """L(T, x) on a 1d grid, convenience wrapper for plotting and the CLI."""
    xs = np.asarray(xs, dtype=np.float64)
    return limit_L(T, xs[:, None], sigma, nodes=nodes)
