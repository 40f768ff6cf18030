"""Nonbacktracking powers, their renormalization matrices and the path expansion.

Everything here is dense and small by design; the module exists to verify the
exact algebraic identities at sizes where direct path summation is feasible.
"""

from __future__ import annotations

from itertools import product

import numpy as np

# direct path sums grow exponentially; refuse sizes where they stop being exact oracles
_DIRECT_SIZE_CAP = 16
_DIRECT_N_CAP = 8
_EXPANSION_N_CAP = 8


def _as_dense(H) -> np.ndarray:
    if hasattr(H, "to_dense"):
        H = H.to_dense()
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("need a square matrix")
    return H.astype(np.complex128)


def phi_matrices(H):
    """Self-energy corrections: diagonal row-variance defect and cubed entries.

    phi2 is diagonal with (sum_z |H_xz|^2 - 1) on the diagonal, phi3 has
    entries -|H_xy|^2 H_xy. Both returned dense.
    """
    H = _as_dense(H)
    absq = np.abs(H) ** 2
    phi2 = np.diag(absq.sum(axis=1) - 1.0).astype(np.complex128)
    phi3 = -absq * H
    return phi2, phi3


# ---------------------------------------------------------------------------
# path sums
# ---------------------------------------------------------------------------

def _pair_dp(first: np.ndarray, H: np.ndarray, steps: int) -> np.ndarray:
    """Sum over chains x_0 .. x_{steps+1} weighted by first[x0,x1] prod H[x_i,x_{i+1}]
    with x_i != x_{i+2} along the whole chain, including across the first factor.

    State M[x0, a, b] collects weight of chains ending (a, b); the transition
    subtracts the single backtracking continuation c = a.
    """
    n = first.shape[0]
    M = np.zeros((n, n, n), dtype=np.complex128)
    idx = np.arange(n)
    M[idx, idx, :] = first
    for _ in range(steps):
        S = M.sum(axis=1)                       # over the two-back label
        M = S[:, :, None] * H[None, :, :] - np.transpose(M, (0, 2, 1)) * H[None, :, :]
    return M.sum(axis=1)


def vn_direct(H, n) -> np.ndarray:
    """Nonbacktracking power by explicit path summation (small sizes only)."""
    H = _as_dense(H)
    size = H.shape[0]
    if size > _DIRECT_SIZE_CAP:
        raise ValueError(f"direct path sum capped at size {_DIRECT_SIZE_CAP}, got {size}")
    if n > _DIRECT_N_CAP:
        raise ValueError(f"direct path sum capped at n = {_DIRECT_N_CAP}, got {n}")
    if n < 0:
        return np.zeros_like(H)
    if n == 0:
        return np.eye(size, dtype=np.complex128)
    return _pair_dp(H, H, n - 1)


def nb_chain(B, H, n) -> np.ndarray:
    """Underlined product of B with the n-th nonbacktracking power of H.

    The chain constraint runs through B's own step: entries are sums over
    x_0 .. x_{n+1} of B[x0,x1] prod H with every x_i != x_{i+2}. n = 0
    returns B itself by convention.
    """
    B = _as_dense(B)
    H = _as_dense(H)
    if n < 0:
        return np.zeros_like(B)
    if n == 0:
        return B.copy()
    return _pair_dp(B, H, n)


def vn_sequence(H, n) -> list:
    """V_0 .. V_n by the renormalized recursion.

    V_2 = H^2 - 1 - Phi_2 kills the backtracking return x -> z -> x exactly;
    deeper backtracks are removed by the Phi_2 and Phi_3 correction terms.
    """
    H = _as_dense(H)
    size = H.shape[0]
    phi2, phi3 = phi_matrices(H)
    eye = np.eye(size, dtype=np.complex128)
    vs = [eye, H.copy()]
    if n >= 2:
        vs.append(H @ H - eye - phi2)
    for k in range(3, n + 1):
        vk = H @ vs[k - 1] - vs[k - 2] - phi2 @ vs[k - 2] - nb_chain(phi3, H, k - 3)
        vs.append(vk)
    return vs[: n + 1]


def vn_recursive(H, n) -> np.ndarray:
    """n-th nonbacktracking power via the Phi_2 / Phi_3 recursion."""
    if n < 0:
        return np.zeros_like(_as_dense(H))
    return vn_sequence(H, n)[n]


# ---------------------------------------------------------------------------
# the path expansion of Chebyshev polynomials
# ---------------------------------------------------------------------------

def expansion_term_count(n) -> int:
    """Number of (k, a, l) multi-indices at degree n.

    Each term spends its degree on k + 1 nonbacktracking factors and k
    correction insertions of weight 2 or 3, so the generating function is
    1 / (1 - x - x^2 - x^3).
    """
    counts = [1, 1, 2]
    while len(counts) <= n:
        counts.append(counts[-1] + counts[-2] + counts[-3])
    return counts[n]


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def cheb_matrix(H, n) -> np.ndarray:
    """Spread Chebyshev polynomial of the matrix by the three-term recursion."""
    H = _as_dense(H)
    size = H.shape[0]
    if n == 0:
        return np.eye(size, dtype=np.complex128)
    prev = np.eye(size, dtype=np.complex128)
    cur = H.copy()
    for _ in range(n - 1):
        prev, cur = cur, H @ cur - prev
    return cur


def path_expansion_check(H, n) -> float:
    """Max-norm residual of the expansion of U_n into nonbacktracking factors.

    Sums V_{l0} ul(Phi_{a1} V_{l1}) ... over all insertion patterns a in
    {2,3}^k and degree splits l0 + ... + lk = n - |a|, with plain products
    between factors, and compares against the three-term recursion. The
    identity is exact; residuals only measure floating point noise.
    """
    H = _as_dense(H)
    if H.shape[0] > _DIRECT_SIZE_CAP:
        raise ValueError(f"expansion check capped at size {_DIRECT_SIZE_CAP}")
    if n > _EXPANSION_N_CAP:
        raise ValueError(f"expansion check capped at n = {_EXPANSION_N_CAP}")
    phi2, phi3 = phi_matrices(H)
    vs = vn_sequence(H, n)
    ul2 = [phi2 @ v for v in vs]
    ul3 = [nb_chain(phi3, H, l) for l in range(max(n - 2, 0))]

    total = np.zeros_like(H)
    terms = 0
    for k in range(n // 2 + 1):
        for a in product((2, 3), repeat=k):
            rest = n - sum(a)
            if rest < 0:
                continue
            for ls in _compositions(rest, k + 1):
                term = vs[ls[0]]
                for ai, li in zip(a, ls[1:]):
                    term = term @ (ul2[li] if ai == 2 else ul3[li])
                total = total + term
                terms += 1
    if terms != expansion_term_count(n):
        raise RuntimeError(f"term enumeration drifted: {terms} != {expansion_term_count(n)}")
    return float(np.abs(total - cheb_matrix(H, n)).max())
