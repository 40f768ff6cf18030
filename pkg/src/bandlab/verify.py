"""Fast self-check suites behind `bandlab verify`.

Every check runs with frozen seeds and reports a pass/fail row; suites are
small versions of the exact identities the test suite exercises at scale.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from . import diagrams as dg
from .chebyshev import alpha_coefficients, cheb_U, propagate
from .ensemble import EntryDistribution, sample_matrix
from .lattice import build_profile, get_shape
from .limit_density import (CovarianceMatrix, covariance_of_shape, heat_kernel,
                            limit_L, limit_second_moment, limit_weak_integral)
from .nonbacktracking import path_expansion_check, vn_direct, vn_sequence


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str


def _band(N, W, seed, complex_entries=True, index=0):
    prof = build_profile(1, N, W, get_shape("box"))
    dist = EntryDistribution(kind="gaussian", complex_entries=complex_entries)
    return sample_matrix(prof, dist, seed, index=index)


def suite_chebyshev():
    rows = []
    worst = 0.0
    for t in (1.0, 10.0, 50.0, 200.0):
        coeffs = alpha_coefficients(t, residual_target=1e-12)
        mass = float((np.abs(coeffs.alphas) ** 2).sum())
        worst = max(worst, abs(1.0 - mass))
    rows.append(CheckResult("chebyshev", "alpha-mass",
                            worst <= 1e-12, f"max |1 - sum| = {worst:.2e}"))
    err = 0.0
    for seed in (0, 1, 2):
        smp = _band(64, 8, seed)
        H = smp.to_dense()
        w, V = np.linalg.eigh(H)
        psi0 = np.zeros(smp.size, dtype=np.complex128)
        psi0[smp.profile.lattice.flat_index(np.zeros(1, dtype=np.int64))] = 1.0
        for t in (1.0, 5.0, 20.0):
            res = propagate(smp, t, psi0=psi0, warn_norm=False)
            oracle = V @ (np.exp(-1j * t * w / 2.0) * (V.conj().T @ psi0))
            err = max(err, float(np.linalg.norm(res.psi - oracle)))
    rows.append(CheckResult("chebyshev", "propagator-oracle",
                            err <= 1e-8, f"max l2 error = {err:.2e}"))
    drift = 0.0
    for t in (1.0, 20.0):
        res = propagate(_band(32, 4, 3), t, warn_norm=False)
        drift = max(drift, abs(1.0 - res.norm))
    rows.append(CheckResult("chebyshev", "norm-drift",
                            drift <= 1e-9, f"max |1 - norm| = {drift:.2e}"))
    return rows


def suite_nonbacktracking(n_max=6, seeds=3):
    rows = []
    n_max = min(int(n_max), 8)   # direct path sum and expansion are capped there
    dmax = rmax = 0.0
    for seed in range(int(seeds)):
        H = _band(10, 3, seed).to_dense()
        vs = vn_sequence(H, n_max)
        for n in range(n_max + 1):
            dmax = max(dmax, float(np.abs(vs[n] - vn_direct(H, n)).max()))
        rmax = max(rmax, path_expansion_check(H, n_max))
    rows.append(CheckResult("nonbacktracking", "recursion-vs-direct",
                            dmax <= 1e-10,
                            f"max entry diff = {dmax:.2e} (n <= {n_max}, {seeds} seeds)"))
    rows.append(CheckResult("nonbacktracking", "path-expansion",
                            rmax <= 1e-9, f"max residual = {rmax:.2e}"))
    return rows


def suite_diagrams():
    rows = []
    ok = all(dg.leaf_census(k).get(l, 0) == dg.narayana(k, l)
             for k in range(1, 8) for l in range(1, k + 1))
    ok = ok and all(sum(dg.narayana(k, l) for l in range(1, k + 1)) == dg.catalan(k)
                    for k in range(1, 21))
    rows.append(CheckResult("diagrams", "narayana-census", ok, "k <= 7 exhaustive"))
    ok = all(dg.skeleton(dg.ladder(n)).size == 1 for n in range(1, 7))
    rows.append(CheckResult("diagrams", "ladder-collapse", ok, "n <= 6"))
    rng = random.Random(20260814)
    conf = True
    for _ in range(20):
        L = rng.choice((6, 8, 10))
        n = rng.randrange(1, L)
        st = dg.StemCycle(n, L - n)
        es = list(range(L))
        rng.shuffle(es)
        bridges = tuple(frozenset(es[2 * k:2 * k + 2]) for k in range(L // 2))
        tags = tuple(rng.choice((dg.STRAIGHT, dg.TWISTED)) for _ in bridges)
        tp = dg.TaggedPairing(st, bridges, tags)
        base = dg.skeleton(tp).size
        conf = conf and all(dg.skeleton(tp, rng=random.Random(k)).size == base
                            for k in range(10))
    rows.append(CheckResult("diagrams", "skeleton-confluence", conf,
                            "20 pairings x 10 orders"))
    greedy_ok = True
    for lumps in dg.even_lumpings(6):
        if all(len(l) == 2 for l in lumps):
            continue
        for n in range(1, 6):
            g = dg.Lumping(dg.StemCycle(n, 6 - n), lumps)
            out = dg.greedy_refining_pairing(g)
            greedy_ok = greedy_ok and dg.refines(out.bridges, g)
            greedy_ok = greedy_ok and dg.min_skeleton_size(out.bridges, g.stems) >= 2
    rows.append(CheckResult("diagrams", "greedy-small", greedy_ok,
                            "all even lumpings, n+n' = 6"))
    return rows


def suite_limit():
    rows = []
    sig = covariance_of_shape(get_shape("box"))
    mass_err = 0.0
    xs = np.linspace(-8.0, 8.0, 2001)
    for T in (0.25, 1.0, 4.0):
        vals = limit_L(T, xs[:, None], sig)
        mass_err = max(mass_err, abs(1.0 - float(np.trapezoid(vals, xs))))
    rows.append(CheckResult("limit", "unit-mass", mass_err <= 1e-8,
                            f"max |1 - mass| = {mass_err:.2e}"))
    second = float(limit_second_moment(1.0, sig)[0, 0])
    target = 8.0 / (3.0 * math.pi) * (1.0 / 3.0)
    rel = abs(second - target) / target
    rows.append(CheckResult("limit", "second-moment", rel <= 1e-12,
                            f"rel err = {rel:.2e}"))
    gauss = limit_weak_integral(1.0, sig, lambda X: np.exp(-0.5 * (X ** 2).sum(-1)))
    kernel_val = float(heat_kernel(1.0, np.zeros(1), CovarianceMatrix.from_value(1.0)))
    rows.append(CheckResult("limit", "heat-kernel-origin",
                            abs(kernel_val - 1.0 / math.sqrt(2.0 * math.pi)) <= 1e-12,
                            f"G(1,0) = {kernel_val:.12f}"))
    rows.append(CheckResult("limit", "weak-gaussian-finite",
                            0.0 < gauss < 1.0, f"value = {gauss:.6f}"))
    return rows


SUITES = {
    "chebyshev": suite_chebyshev,
    "nonbacktracking": suite_nonbacktracking,
    "diagrams": suite_diagrams,
    "limit": suite_limit,
}


def run_suite(name, **kwargs):
    """All CheckResults of one suite (or every suite for 'all').

    Keyword arguments reach only the suites that accept them; 'all' runs
    every suite at its defaults.
    """
    if name == "all":
        rows = []
        for key in ("chebyshev", "nonbacktracking", "diagrams", "limit"):
            rows.extend(SUITES[key]())
        return rows
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](**kwargs)
