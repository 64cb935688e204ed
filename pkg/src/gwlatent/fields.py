"""Training-distribution field samplers.

Gaussian random fields with an anisotropic spherical covariance (sampled by
circulant embedding on an enlarged periodic grid, with a dense-factorization
oracle path for small grids), plus binary fracture and channel rasters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from .errors import NumericalError


@dataclass(frozen=True)
class GrfParams:
    sill: float = 1.0
    nugget: float = 0.0
    range_we: float = 60.0  # cells, west-east (column) direction
    range_ns: float = 40.0  # cells, north-south (row) direction
    azimuth: float = 0.0

    def __post_init__(self):
        if self.sill <= 0:
            raise ValueError("sill must be positive")
        if self.range_we <= 0 or self.range_ns <= 0:
            raise ValueError("ranges must be positive")
        if self.nugget < 0:
            raise ValueError("nugget must be >= 0")
        if self.azimuth != 0.0:
            raise ValueError("only axis-aligned (azimuth 0) models are supported")


def spherical_cov(p: GrfParams, col_lag, row_lag) -> np.ndarray:
    """Covariance of the anisotropic spherical model at integer cell lags."""
    r = np.sqrt((np.asarray(col_lag, dtype=float) / p.range_we) ** 2
                + (np.asarray(row_lag, dtype=float) / p.range_ns) ** 2)
    c = np.where(r < 1.0, p.sill * (1.0 - 1.5 * r + 0.5 * r**3), 0.0)
    return c


def spherical_semivariogram(p: GrfParams, lags) -> np.ndarray:
    """Model semivariogram along west-east: sill + nugget - C(h)."""
    lags = np.asarray(lags, dtype=float)
    gamma = p.sill + p.nugget - spherical_cov(p, lags, 0.0)
    gamma[lags == 0] = 0.0
    return gamma


def grf_sample(
    p: GrfParams,
    shape: tuple[int, int],
    n: int,
    seed: int,
    method: str = "circulant",
) -> np.ndarray:
    """n zero-mean stationary Gaussian fields of the given shape.

    method="circulant" embeds the covariance on an enlarged periodic grid and
    samples via FFT (two independent fields per complex draw);
    method="dense" factors the full covariance matrix — the oracle path,
    restricted to grids of at most 48x48.
    """
    rows, cols = shape
    if rows < 2 or cols < 2:
        raise ValueError(f"grid must be at least 2x2, got {shape}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if method == "circulant":
        fields = _sample_circulant(p, rows, cols, n, seed)
    elif method == "dense":
        fields = _sample_dense(p, rows, cols, n, seed)
    else:
        raise ValueError(f"unknown method {method!r}")
    if p.nugget > 0:
        rng = np.random.default_rng((seed, 0xA110C))
        fields = fields + rng.normal(0.0, math.sqrt(p.nugget), fields.shape)
    return fields


def _embedding_eigenvalues(p: GrfParams, mr: int, mc: int) -> np.ndarray:
    wrap_r = np.minimum(np.arange(mr), mr - np.arange(mr))
    wrap_c = np.minimum(np.arange(mc), mc - np.arange(mc))
    base = spherical_cov(p, wrap_c[None, :], wrap_r[:, None])
    return np.fft.fft2(base).real


def _sample_circulant(p: GrfParams, rows, cols, n, seed) -> np.ndarray:
    # pad past the correlation ranges so the compact support fits the torus
    mr = next_fast_len(int(rows + math.ceil(p.range_ns)), real=True)
    mc = next_fast_len(int(cols + math.ceil(p.range_we)), real=True)
    eig = None
    for _ in range(5):
        eig = _embedding_eigenvalues(p, mr, mc)
        neg = -eig.min()
        if neg <= 1e-9 * eig.max():
            break
        mr, mc = next_fast_len(2 * mr, real=True), next_fast_len(2 * mc, real=True)
    else:
        raise NumericalError(
            "circulant embedding stayed indefinite after padding growth; "
            "use the dense method for this configuration"
        )
    sqrt_eig = np.sqrt(np.clip(eig, 0.0, None))

    rng = np.random.default_rng(seed)
    out = np.empty((n, rows, cols))
    scale = math.sqrt(mr * mc)
    for i in range(0, n, 2):
        xi = rng.standard_normal((mr, mc)) + 1j * rng.standard_normal((mr, mc))
        f = np.fft.ifft2(sqrt_eig * xi) * scale
        out[i] = f.real[:rows, :cols]
        if i + 1 < n:
            out[i + 1] = f.imag[:rows, :cols]
    return out


def _sample_dense(p: GrfParams, rows, cols, n, seed) -> np.ndarray:
    if rows > 48 or cols > 48:
        raise ValueError("dense sampling is restricted to grids of at most 48x48")
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    rr, cc = rr.ravel(), cc.ravel()
    cov = spherical_cov(p, cc[None, :] - cc[:, None], rr[None, :] - rr[:, None])
    # small jitter keeps the Cholesky stable at lag-0 ties
    cov[np.diag_indices_from(cov)] += 1e-10 * p.sill
    L = np.linalg.cholesky(cov)
    rng = np.random.default_rng(seed)
    draws = L @ rng.standard_normal((rows * cols, n))
    return draws.T.reshape(n, rows, cols)


@dataclass(frozen=True)
class FractureParams:
    count: int
    orientations: tuple[int, ...] = (0, 45, 90)
    length_range: tuple[int, int] = (10, 20)
    width: int = 2
    matrix_log10: float = -1.0
    fracture_log10: float = 1.0

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be >= 0")
        lo, hi = self.length_range
        if not (0 < lo <= hi):
            raise ValueError(f"bad length range {self.length_range}")
        if self.width != 2:
            raise ValueError("only 2-pixel-wide fractures are supported")
        if any(o not in (0, 45, 90) for o in self.orientations):
            raise ValueError("orientations must be within {0, 45, 90}")
        if not self.orientations:
            raise ValueError("at least one orientation required")


def synth_fractures(p: FractureParams, shape: tuple[int, int], seed: int) -> np.ndarray:
    """Binary raster of randomly placed 2-px-wide fracture bars.

    Each fracture paints exactly 2*length pixels; overlaps are allowed.
    """
    rows, cols = shape
    lo, hi = p.length_range
    if hi > min(rows, cols) - 1:
        raise ValueError(f"fractures up to {hi} px do not fit a {rows}x{cols} grid")
    rng = np.random.default_rng(seed)
    field = np.zeros(shape)
    for _ in range(p.count):
        orient = p.orientations[rng.integers(len(p.orientations))]
        length = int(rng.integers(lo, hi + 1))
        if orient == 0:
            r = int(rng.integers(0, rows - 1))
            c = int(rng.integers(0, cols - length + 1))
            field[r : r + 2, c : c + length] = 1.0
        elif orient == 90:
            r = int(rng.integers(0, rows - length + 1))
            c = int(rng.integers(0, cols - 1))
            field[r : r + length, c : c + 2] = 1.0
        else:  # 45 degrees: two pixel-diagonals stacked vertically
            r = int(rng.integers(0, rows - length))
            c = int(rng.integers(0, cols - length + 1))
            idx = np.arange(length)
            field[r + idx, c + idx] = 1.0
            field[r + idx + 1, c + idx] = 1.0
    return field


@dataclass(frozen=True)
class ChannelParams:
    count: int
    amplitude: float = 8.0   # px
    wavelength: float = 64.0  # px
    width: int = 6           # px
    fraction_bounds: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if self.amplitude < 0 or self.wavelength <= 0 or self.width < 1:
            raise ValueError("bad channel geometry")
        lo, hi = self.fraction_bounds
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"bad fraction bounds {self.fraction_bounds}")


def synth_channels(p: ChannelParams, shape: tuple[int, int], seed: int) -> np.ndarray:
    """Binary raster of sinuous high-K bands crossing west-east."""
    rows, cols = shape
    if p.count == 0:
        return np.zeros(shape)
    rng = np.random.default_rng(seed)
    c = np.arange(cols)
    for _ in range(200):
        field = np.zeros(shape)
        for _ in range(p.count):
            r0 = rng.uniform(p.amplitude + p.width / 2,
                             rows - 1 - p.amplitude - p.width / 2)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            amp = rng.uniform(0.5, 1.0) * p.amplitude
            center = r0 + amp * np.sin(2.0 * math.pi * c / p.wavelength + phase)
            dist = np.abs(np.arange(rows)[:, None] - center[None, :])
            field[dist <= p.width / 2] = 1.0
        frac = field.mean()
        if p.fraction_bounds[0] <= frac <= p.fraction_bounds[1]:
            return field
    raise NumericalError(
        f"channel fraction {frac:.3f} outside {p.fraction_bounds} after 200 draws"
    )
