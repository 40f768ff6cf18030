"""Sampled band matrices: symmetry, storage reconstruction, entry laws."""

import io
import math

import numpy as np
import pytest

from bandlab import (EntryDistribution, build_profile, sample_matrix,
                     truncated_variance_check, wigner_profile)


def _sample(N=32, W=4, d=1, seed=0, shape="box", **dist_kw):
    prof = build_profile(d, N, W, shape)
    return sample_matrix(prof, EntryDistribution(**dist_kw), seed)


# ---------------------------------------------------------------------------
# structure

def test_hermitian_to_the_bit():
    # N = 16, W = 8 exercises the self-paired antipodal offset
    for smp in (_sample(16, 8), _sample(15, 4), _sample(6, 2, d=2)):
        H = smp.to_dense()
        assert np.array_equal(H, H.conj().T)
        assert np.all(H.diagonal().imag == 0.0)


def test_real_entries_give_a_real_symmetric_matrix():
    H = _sample(24, 6, complex_entries=False).to_dense()
    assert np.all(H.imag == 0.0)
    assert np.array_equal(H, H.T)


def test_matvec_matches_dense():
    rng = np.random.default_rng(7)
    for smp in (_sample(32, 4), _sample(16, 8), _sample(6, 2, d=2),
                _sample(24, 6, kind="rademacher", complex_entries=False)):
        H = smp.to_dense()
        psi = rng.standard_normal(smp.size) + 1j * rng.standard_normal(smp.size)
        assert np.allclose(smp.matvec(psi), H @ psi, atol=1e-13)


def test_row_abs_sum_matches_dense():
    smp = _sample(64, 8)
    dense = np.abs(smp.to_dense()).sum(axis=1).max()
    assert smp.row_abs_sum_max() == pytest.approx(float(dense))


def test_dense_form_is_capped():
    smp = _sample(8192, 2)
    with pytest.raises(ValueError, match="capped"):
        smp.to_dense()


# ---------------------------------------------------------------------------
# determinism

def test_same_stream_same_matrix():
    a = _sample(32, 4, seed=5).to_dense()
    b = _sample(32, 4, seed=5).to_dense()
    assert a.tobytes() == b.tobytes()


def test_distinct_indices_are_distinct_draws():
    prof = build_profile(1, 32, 4, "box")
    dist = EntryDistribution()
    a = sample_matrix(prof, dist, 5, index=0).to_dense()
    b = sample_matrix(prof, dist, 5, index=1).to_dense()
    assert not np.array_equal(a, b)


# ---------------------------------------------------------------------------
# entry laws

def test_rademacher_entries_sit_on_the_circle():
    smp = _sample(64, 8, kind="rademacher")
    prof = smp.profile
    for row, k in enumerate(smp.stored_ids):
        sigma = math.sqrt(prof.sigma2[k])
        assert np.all(np.abs(smp.values[row]) == sigma)


def test_second_absolute_moment_is_the_profile_variance():
    # per-offset rows hold sigma * A with E|A|^2 = 1; 4096 draws per row
    for kw in (dict(kind="gaussian"), dict(kind="gaussian", complex_entries=False),
               dict(kind="uniform"), dict(kind="uniform", complex_entries=False)):
        smp = _sample(4096, 4, seed=11, **kw)
        prof = smp.profile
        for row, k in enumerate(smp.stored_ids):
            ratio = float(np.mean(np.abs(smp.values[row]) ** 2) / prof.sigma2[k])
            assert 0.85 < ratio < 1.15, (kw, ratio)


def test_distribution_validation():
    with pytest.raises(ValueError, match="unknown entry distribution"):
        EntryDistribution(kind="cauchy")
    with pytest.raises(ValueError, match="delta"):
        EntryDistribution(delta=0.7)
    with pytest.raises(ValueError, match="delta"):
        EntryDistribution(delta=0.0)


# ---------------------------------------------------------------------------
# truncation

def test_truncate_zeroes_large_entries():
    dist = EntryDistribution(delta=0.25)
    out = dist.truncate(np.array([0.1, -5.0, 2.0, 3.0 + 4.0j]), 16.0)
    # cap is 16^0.25 = 2; |3+4i| = 5 goes, the boundary value stays
    assert np.array_equal(out, np.array([0.1, 0.0, 2.0, 0.0]))


def test_truncated_sample_respects_the_cap():
    smp = _sample(256, 8, seed=2, delta=0.25)
    prof = smp.profile
    cap = prof.M ** 0.25
    for row, k in enumerate(smp.stored_ids):
        sigma = math.sqrt(prof.sigma2[k])
        assert np.abs(smp.values[row]).max() <= sigma * cap * (1 + 1e-12)


def test_variance_check_brackets():
    prof = build_profile(1, 64, 8, "box")
    mild = truncated_variance_check(prof, EntryDistribution(delta=0.49), seed=3)
    assert all(r.ok for r in mild)
    assert all(r.estimate <= r.sigma2 + 3 * r.se for r in mild)
    # bounded entries below the cap: truncation is a no-op, zero spread
    flat = truncated_variance_check(prof, EntryDistribution(kind="rademacher",
                                                            delta=0.4), seed=3)
    assert all(r.ok and r.se == 0.0 for r in flat)
    # a tiny exponent truncates hard and the bracket reports it
    harsh = truncated_variance_check(prof, EntryDistribution(delta=0.05), seed=3)
    assert any(not r.ok for r in harsh)


def test_variance_check_needs_delta():
    prof = build_profile(1, 64, 8, "box")
    with pytest.raises(ValueError, match="delta"):
        truncated_variance_check(prof, EntryDistribution())


# ---------------------------------------------------------------------------
# coordinate export

def test_coordinate_export_matches_dense():
    smp = _sample(12, 3, seed=4)
    buf = io.StringIO()
    smp.write_coordinates(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("#") and lines[1].startswith("#")
    body = [ln.split() for ln in lines[2:]]
    assert len(body) == len(smp.stored_ids) * smp.size
    H = smp.to_dense()
    for x, y, re, im in body:
        assert H[int(x), int(y)] == complex(float(re), float(im))


def test_wigner_sample_is_fully_dense():
    smp = sample_matrix(wigner_profile(32), EntryDistribution(), 0)
    H = smp.to_dense()
    assert np.all(np.abs(H) > 0)
    assert np.array_equal(H, H.conj().T)
