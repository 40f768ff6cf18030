"""Sampling of Hermitian random band matrices over a variance profile."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .lattice import BandProfile

_SQRT3 = math.sqrt(3.0)
_SQRT32 = math.sqrt(1.5)

# reserved stream index for entry-level checks, far above any realization index
_CHECK_STREAM = 2 ** 48


def _rng(seed, index):
    """Counter-based generator, one independent stream per (seed, index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, index))))


@dataclass(frozen=True)
class EntryDistribution:
    """Law of the matrix entries before the variance profile is applied.

    Entries have mean zero, unit second absolute moment and a symmetric law;
    the diagonal always uses the real variant so sampled matrices are
    Hermitian. `alpha`/`beta` describe the tail bound beta*exp(-xi^alpha) and
    are carried as metadata only; finite-sample validation cannot see tails.
    `delta` switches on the truncation |A| <= M^delta ("hatted" entries).
    """

    kind: str = "gaussian"
    complex_entries: bool = True
    delta: float | None = None
    alpha: float = field(default=2.0)
    beta: float = field(default=2.0)

    def __post_init__(self):
        if self.kind not in ("gaussian", "rademacher", "uniform"):
            raise ValueError(f"unknown entry distribution {self.kind!r}")
        if self.delta is not None and not 0.0 < self.delta <= 0.5:
            raise ValueError("truncation exponent delta must lie in (0, 1/2]")

    def draw_real(self, rng, n):
        if self.kind == "gaussian":
            return rng.standard_normal(n)
        if self.kind == "rademacher":
            return rng.integers(0, 2, n) * 2.0 - 1.0
        return rng.uniform(-_SQRT3, _SQRT3, n)

    def draw(self, rng, n):
        """Off-diagonal entries; complex variants keep E|A|^2 = 1."""
        if not self.complex_entries:
            return self.draw_real(rng, n).astype(np.complex128)
        if self.kind == "gaussian":
            z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            return z / math.sqrt(2.0)
        if self.kind == "rademacher":
            phases = np.array([1.0, 1j, -1.0, -1j])
            return phases[rng.integers(0, 4, n)]
        z = rng.uniform(-_SQRT32, _SQRT32, n) + 1j * rng.uniform(-_SQRT32, _SQRT32, n)
        return z

    def truncate(self, a, m_profile):
        """Zero out entries with |A| > M^delta; identity when delta unset."""
        if self.delta is None:
            return a
        cap = m_profile ** self.delta
        return np.where(np.abs(a) <= cap, a, 0.0)

    def descriptor(self):
        return {
            "kind": self.kind,
            "complex": self.complex_entries,
            "delta": self.delta,
        }


def distribution_from_descriptor(desc):
    return EntryDistribution(
        kind=desc.get("kind", "gaussian"),
        complex_entries=bool(desc.get("complex", True)),
        delta=desc.get("delta"),
    )


# ---------------------------------------------------------------------------
# sampled matrix
# ---------------------------------------------------------------------------

_DENSE_CAP = 4096


class BandMatrixSample:
    """One realization H of the ensemble, stored per offset.

    Storage holds the diagonal plus one value array per canonical offset
    (upper half of the offset pairing {o, [-o]_N}); the mirrored half is
    reconstructed by conjugation. Offsets fixed by the torus involution
    ([-o]_N = o) are Hermitian-projected in place.
    """

    def __init__(self, profile: BandProfile, dist: EntryDistribution, seed, index=0):
        self.profile = profile
        self.dist = dist
        self.seed = int(seed)
        self.index = int(index)
        self._gather = None
        self._dense = None
        self._sample()

    def _sample(self):
        prof = self.profile
        lat = prof.lattice
        size = lat.size
        rng = _rng(self.seed, self.index)
        zero, canonical, mirrored, self_paired = prof.offset_split()
        order = np.arange(len(prof.offsets))
        stored_mask = zero | canonical | self_paired
        self.stored_ids = order[stored_mask]
        values = np.empty((len(self.stored_ids), size), dtype=np.complex128)
        for row, k in enumerate(self.stored_ids):
            sigma = math.sqrt(prof.sigma2[k])
            if zero[k]:
                a = self.dist.draw_real(rng, size).astype(np.complex128)
            else:
                a = self.dist.draw(rng, size)
            a = self.dist.truncate(a, prof.M)
            values[row] = sigma * a
            if self_paired[k]:
                # both orientations of the pair {x, x+o} live in this row
                perm = self._perm(prof.offsets[k])
                keep = np.arange(size) < perm
                values[row] = np.where(keep, values[row], np.conj(values[row][perm]))
        self.values = values

    def _perm(self, offset):
        prof = self.profile
        key = tuple(int(c) for c in offset)
        cached = prof._gather_cache.get(key)
        if cached is None:
            lat = prof.lattice
            cached = lat.flat_index(lat.all_sites() + np.asarray(offset))
            prof._gather_cache[key] = cached
        return cached

    def gather_tables(self):
        """(values, perm) covering every nonzero offset, for the matvec."""
        if self._gather is not None:
            return self._gather
        prof = self.profile
        size = prof.lattice.size
        rows_v = []
        rows_p = []
        zero, canonical, mirrored, self_paired = prof.offset_split()
        for row, k in enumerate(self.stored_ids):
            o = prof.offsets[k]
            rows_v.append(self.values[row])
            rows_p.append(self._perm(o))
            if canonical[k]:
                neg = prof.lattice.reduce(-o)
                perm_neg = self._perm(neg)
                rows_v.append(np.conj(self.values[row][perm_neg]))
                rows_p.append(perm_neg)
        self._gather = (
            np.ascontiguousarray(np.stack(rows_v)),
            np.ascontiguousarray(np.stack(rows_p)),
        )
        return self._gather

    def matvec(self, psi, out=None):
        values, perm = self.gather_tables()
        return kernels.gather_matvec(values, perm, psi, out)

    def to_dense(self):
        size = self.profile.lattice.size
        if size > _DENSE_CAP:
            raise ValueError(f"dense form capped at {_DENSE_CAP} sites, have {size}")
        if self._dense is None:
            values, perm = self.gather_tables()
            dense = np.zeros((size, size), dtype=np.complex128)
            idx = np.arange(size)
            for j in range(values.shape[0]):
                dense[idx, perm[j]] = values[j]
            self._dense = dense
        return self._dense

    def row_abs_sum_max(self) -> float:
        """sup_x sum_y |H_xy|, one factor of the Schur norm bound."""
        values, _ = self.gather_tables()
        return float(np.abs(values).sum(axis=0).max())

    @property
    def size(self):
        return self.profile.lattice.size

    def write_coordinates(self, fh):
        """Stored entries (diagonal plus canonical offsets) as 'x y re im'."""
        prof = self.profile
        fh.write("# coordinate list, flat site indices, upper storage only\n")
        fh.write(
            f"# d={prof.lattice.d} N={prof.lattice.N} W={prof.W} "
            f"shape={prof.shape.kind} seed={self.seed} index={self.index}\n"
        )
        idx = np.arange(self.size)
        for row, k in enumerate(self.stored_ids):
            perm = self._perm(prof.offsets[k])
            vals = self.values[row]
            for x in idx:
                fh.write(f"{x} {perm[x]} "
                         f"{float(vals[x].real)!r} {float(vals[x].imag)!r}\n")


def sample_matrix(profile, dist, seed, index=0) -> BandMatrixSample:
    """Draw realization `index` of the ensemble attached to (seed, profile)."""
    return BandMatrixSample(profile, dist, seed, index)


# ---------------------------------------------------------------------------
# truncation diagnostics
# ---------------------------------------------------------------------------

@dataclass
class TruncationCheck:
    offset: tuple
    sigma2: float
    estimate: float
    se: float
    ok: bool


def truncated_variance_check(profile, dist, n_samples=10_000, seed=0, probes=8,
                             rel_tol=0.01):
    """Empirical E|H_hat_xy|^2 against the truncation bracket.

    The truncated second moment must sit in [(1 - rel_tol) sigma^2, sigma^2]
    up to Monte Carlo error (3 standard errors); entries at distinct (x, y)
    are iid up to Hermitian symmetry, so entry-level resampling suffices.
    """
    if dist.delta is None:
        raise ValueError("variance check needs a truncating distribution (delta set)")
    rng = _rng(seed, _CHECK_STREAM)
    n_off = len(profile.offsets)
    pick = np.unique(np.linspace(0, n_off - 1, probes).astype(int))
    reports = []
    for k in pick:
        a = dist.draw(rng, n_samples)
        a = dist.truncate(a, profile.M)
        sq = np.abs(a) ** 2
        est_factor = float(sq.mean())
        se_factor = float(sq.std(ddof=1) / math.sqrt(n_samples))
        sigma2 = float(profile.sigma2[k])
        est = sigma2 * est_factor
        se = sigma2 * se_factor
        ok = (est - 3 * se <= sigma2) and (est + 3 * se >= (1 - rel_tol) * sigma2)
        reports.append(TruncationCheck(
            offset=tuple(int(c) for c in profile.offsets[k]),
            sigma2=sigma2, estimate=est, se=se, ok=ok,
        ))
    return reports
