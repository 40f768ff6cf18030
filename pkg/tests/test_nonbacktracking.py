"""Nonbacktracking powers against a literal path-sum oracle."""

from itertools import product

import numpy as np
import pytest

from bandlab import (EntryDistribution, build_profile, path_expansion_check,
                     phi_matrices, sample_matrix, vn_direct, vn_recursive,
                     vn_sequence)
from bandlab.nonbacktracking import (cheb_matrix, expansion_term_count,
                                     nb_chain)


def _hermitian(size, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    return (A + A.conj().T) / 2.0


def _brute_vn(H, n):
    """Sum over all paths x_0..x_n with x_i != x_{i+2}, product of entries."""
    size = H.shape[0]
    if n == 0:
        return np.eye(size, dtype=complex)
    out = np.zeros((size, size), dtype=complex)
    for path in product(range(size), repeat=n + 1):
        if any(path[i] == path[i + 2] for i in range(n - 1)):
            continue
        w = 1.0 + 0.0j
        for i in range(n):
            w *= H[path[i], path[i + 1]]
        out[path[0], path[-1]] += w
    return out


def _brute_chain(B, H, n):
    size = H.shape[0]
    out = np.zeros((size, size), dtype=complex)
    for path in product(range(size), repeat=n + 2):
        if any(path[i] == path[i + 2] for i in range(n)):
            continue
        w = B[path[0], path[1]]
        for i in range(1, n + 1):
            w = w * H[path[i], path[i + 1]]
        out[path[0], path[-1]] += w
    return out


def test_direct_sum_matches_literal_enumeration():
    for size in (3, 4):
        for seed in (0, 1):
            H = _hermitian(size, seed)
            for n in range(5):
                ref = _brute_vn(H, n)
                scale = max(1.0, np.abs(ref).max())
                assert np.abs(vn_direct(H, n) - ref).max() <= 1e-12 * scale
                assert np.abs(vn_recursive(H, n) - ref).max() <= 1e-12 * scale


def test_chain_matches_literal_enumeration():
    rng = np.random.default_rng(9)
    H = _hermitian(4, 2)
    B = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    for n in (0, 1, 2, 3):
        ref = _brute_chain(B, H, n)
        scale = max(1.0, np.abs(ref).max())
        assert np.abs(nb_chain(B, H, n) - ref).max() <= 1e-12 * scale


def test_base_cases():
    H = _hermitian(5, 3)
    assert np.array_equal(vn_direct(H, -1), np.zeros((5, 5)))
    assert np.array_equal(vn_direct(H, 0), np.eye(5))
    assert np.array_equal(vn_sequence(H, 1)[1], H)


def test_phi_entry_formulas():
    H = np.array([[0.3, 1.0 - 2.0j], [1.0 + 2.0j, -0.4]])
    phi2, phi3 = phi_matrices(H)
    absq = np.abs(H) ** 2
    assert np.allclose(np.diag(phi2), absq.sum(axis=1) - 1.0)
    assert np.count_nonzero(phi2 - np.diag(np.diag(phi2))) == 0
    assert np.allclose(phi3, -absq * H)


def test_swap_matrix_kills_everything_past_degree_one():
    # row sums are exactly 1, so Phi_2 = 0; the only degree-2 walk backtracks
    H = np.array([[0.0, 1.0], [1.0, 0.0]])
    phi2, _ = phi_matrices(H)
    assert np.array_equal(phi2, np.zeros((2, 2)))
    for n in range(2, 7):
        assert np.array_equal(vn_recursive(H, n), np.zeros((2, 2)))
        assert np.array_equal(vn_direct(H, min(n, 8)), np.zeros((2, 2)))


def test_unit_row_variance_profile_has_zero_phi2():
    # deterministic hopping 1/sqrt(2) to both neighbours on a ring
    N = 8
    H = np.zeros((N, N))
    for x in range(N):
        H[x, (x + 1) % N] = H[x, (x - 1) % N] = 1.0 / np.sqrt(2.0)
    phi2, _ = phi_matrices(H)
    assert np.abs(phi2).max() <= 1e-15


def test_recursion_agrees_with_direct_on_band_samples():
    prof = build_profile(1, 12, 3, "box")
    dist = EntryDistribution()
    for seed in range(3):
        H = sample_matrix(prof, dist, seed).to_dense()
        vs = vn_sequence(H, 8)
        for n in range(9):
            assert np.abs(vs[n] - vn_direct(H, n)).max() <= 1e-10


def test_path_expansion_residuals_are_float_noise():
    H = _hermitian(6, 4)
    for n in (0, 1, 2, 5, 8):
        assert path_expansion_check(H, n) <= 1e-9


def test_expansion_term_count_tribonacci():
    assert [expansion_term_count(n) for n in range(9)] == [1, 1, 2, 4, 7, 13, 24, 44, 81]
    for n in range(3, 20):
        assert (expansion_term_count(n)
                == expansion_term_count(n - 1) + expansion_term_count(n - 2)
                + expansion_term_count(n - 3))


def test_cheb_matrix_diagonalizes():
    H = _hermitian(8, 6)
    w, v = np.linalg.eigh(H)
    from bandlab import cheb_U
    for n in (0, 1, 3, 7):
        ref = (v * cheb_U(n, w)) @ v.conj().T
        assert np.abs(cheb_matrix(H, n) - ref).max() <= 1e-10


def test_direct_sum_caps():
    with pytest.raises(ValueError, match="capped at size"):
        vn_direct(np.eye(17), 2)
    with pytest.raises(ValueError, match="capped at n"):
        vn_direct(np.eye(4), 9)
    with pytest.raises(ValueError, match="capped"):
        path_expansion_check(np.eye(4), 9)
