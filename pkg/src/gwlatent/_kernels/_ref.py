"""Pure-numpy reference implementations of the hot kernels.

These define the numerical contract; the Cython module `_fast` must match
them bit-for-bit (same operation order per output element is not required,
agreement to ~1e-12 relative is, and the parity tests enforce it).
"""

from __future__ import annotations

import numpy as np


def tconv2d_k4s2p1(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Transposed 2-D convolution, kernel 4, stride 2, padding 1, dilation 1.

    x: (c_in, h, w) input maps; w: (c_in, c_out, 4, 4); bias: (c_out,).
    Output is (c_out, 2h, 2w): out[o, 2i+di-1, 2j+dj-1] += x[c,i,j]*w[c,o,di,dj].
    """
    c_in, h, wd = x.shape
    if w.shape[0] != c_in or w.shape[2:] != (4, 4):
        raise ValueError(f"kernel shape {w.shape} does not match input {x.shape}")
    c_out = w.shape[1]
    # (c_out, 4, 4, h, w) partial products, then scatter with stride 2
    t = np.tensordot(w, x, axes=([0], [0]))
    out = np.zeros((c_out, 2 * h + 2, 2 * wd + 2))
    for di in range(4):
        for dj in range(4):
            out[:, di : di + 2 * h : 2, dj : dj + 2 * wd : 2] += t[:, di, dj]
    out = out[:, 1 : 2 * h + 1, 1 : 2 * wd + 1]
    out += bias[:, None, None]
    return out


def instance_norm2d(x: np.ndarray, eps: float, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Per-channel standardization over the spatial axes (biased variance)."""
    mean = x.mean(axis=(1, 2), keepdims=True)
    var = x.var(axis=(1, 2), keepdims=True)
    xn = (x - mean) / np.sqrt(var + eps)
    return xn * gamma[:, None, None] + beta[:, None, None]


def flow_band_matrix(ch: np.ndarray, cv: np.ndarray) -> np.ndarray:
    """Upper-banded SPD flow matrix for the interior (non-Dirichlet) cells.

    ch: (rows, cols-1) conductances between horizontal neighbours,
    cv: (rows-1, cols) between vertical neighbours. Unknowns are the cells
    in columns 1..cols-2, numbered row-major; bandwidth is cols-2. Returns
    the (cols-1, n) upper band-storage array for scipy.linalg.solveh_banded.
    """
    rows = ch.shape[0]
    cols = ch.shape[1] + 1
    m = cols - 2
    n = rows * m
    ab = np.zeros((m + 1, n))
    diag = ch[:, :-1] + ch[:, 1:]
    diag[:-1] += cv[:, 1:-1]
    diag[1:] += cv[:, 1:-1]
    ab[m] = diag.ravel()
    # first superdiagonal: horizontal couplings, absent across grid-row seams
    sup1 = np.zeros((rows, m))
    sup1[:, 1:] = -ch[:, 1:-1]
    ab[m - 1] = sup1.ravel()
    # bandwidth-m superdiagonal: vertical couplings
    supm = np.zeros((rows, m))
    supm[1:] = -cv[:, 1:-1]
    ab[0] = supm.ravel()
    return ab
