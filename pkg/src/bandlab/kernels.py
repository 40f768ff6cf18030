"""Hot matvec kernel with a numba backend and a pure numpy fallback.

The backend is chosen once at import time: numba is used when importable
unless the environment variable BANDLAB_NUMBA is set to 0/false/off.
Both paths accumulate the offset sum per site in the same fixed order, so
results do not depend on thread count.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_requested() -> bool:
    flag = os.environ.get("BANDLAB_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


NUMBA_OK = False
_gather_matvec_jit = None

if _numba_requested():
    try:
        from numba import njit, prange

        @njit(cache=True, parallel=True)
        def _gather_matvec_jit(values, perm, psi, out):  # pragma: no cover
            n_off, size = values.shape
            for x in prange(size):
                acc = 0.0 + 0.0j
                for j in range(n_off):
                    acc = acc + values[j, x] * psi[perm[j, x]]
                out[x] = acc

        NUMBA_OK = True
    except ImportError:
        NUMBA_OK = False


def backend_name() -> str:
    return "numba" if NUMBA_OK else "numpy"


def gather_matvec(values, perm, psi, out=None):
    """out[x] = sum_j values[j, x] * psi[perm[j, x]].

    `values` is the (n_off, size) complex table of one matrix row segment per
    offset, `perm` the matching (n_off, size) int64 neighbor index table.
    """
    if out is None:
        out = np.empty_like(psi)
    if NUMBA_OK:
        _gather_matvec_jit(values, perm, psi, out)
    else:
        np.einsum("jx,jx->x", values, psi[perm], out=out, optimize=False)
    return out


def gather_matvec_numpy(values, perm, psi):
    """Reference numpy path, available regardless of backend selection."""
    return np.einsum("jx,jx->x", values, psi[perm], optimize=False)
