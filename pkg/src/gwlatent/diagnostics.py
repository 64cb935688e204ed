"""Quantitative evaluation: semivariograms, error metrics, ensemble
statistics, latent objective-surface scans, the 1-NN two-sample test and
binarization. Everything here is a pure function; exports are plot-ready
CSV/grid files, not images.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .varinv import ObjectiveSpec, objective


@dataclass(frozen=True)
class Semivariogram:
    lags: np.ndarray     # cells
    gamma: np.ndarray
    counts: np.ndarray   # pairs per lag

    def lags_in_meters(self, cell_size: float) -> np.ndarray:
        return self.lags * cell_size

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("lag,gamma,pairs\n")
            for h, g, n in zip(self.lags, self.gamma, self.counts):
                fh.write(f"{h},{float(g)!r},{n}\n")


def semivariogram(field: np.ndarray, max_lag: int) -> Semivariogram:
    """Experimental west-east semivariogram over same-row cell pairs."""
    field = np.asarray(field, dtype=np.float64)
    rows, cols = field.shape
    if max_lag >= cols:
        raise ValueError(f"max_lag {max_lag} must be below cols {cols}")
    lags = np.arange(max_lag + 1)
    gamma = np.zeros(max_lag + 1)
    counts = np.empty(max_lag + 1, dtype=np.int64)
    counts[0] = rows * cols
    for h in range(1, max_lag + 1):
        diffs = field[:, h:] - field[:, :-h]
        counts[h] = diffs.size
        gamma[h] = 0.5 * np.mean(diffs**2)
    return Semivariogram(lags=lags, gamma=gamma, counts=counts)


def mean_semivariogram(fields, max_lag: int) -> Semivariogram:
    """Average of per-field semivariograms (equal pair counts per lag)."""
    fields = list(fields)
    if not fields:
        raise ValueError("need at least one field")
    parts = [semivariogram(f, max_lag) for f in fields]
    gamma = np.mean([p.gamma for p in parts], axis=0)
    return Semivariogram(lags=parts[0].lags, gamma=gamma, counts=parts[0].counts)


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass(frozen=True)
class EnsembleSummary:
    mean: np.ndarray
    variance: np.ndarray  # unbiased, cellwise


def ensemble_summary(fields) -> EnsembleSummary:
    fields = np.asarray(list(fields), dtype=np.float64)
    if fields.ndim != 3 or fields.shape[0] < 2:
        raise ValueError("need at least 2 equal-shape fields")
    return EnsembleSummary(
        mean=fields.mean(axis=0), variance=fields.var(axis=0, ddof=1)
    )


def scan_axis(lo: float = -5.0, hi: float = 5.0, step: float = 0.1) -> np.ndarray:
    """Uniform scan grid; callers reuse it so reference points land on cells."""
    n = int(round((hi - lo) / step)) + 1
    return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class SurfaceScan:
    index_pair: tuple[int, int]
    axis_i: np.ndarray
    axis_j: np.ndarray
    values: np.ndarray  # L[a, b] at z_i = axis_i[a], z_j = axis_j[b]; NaN = failed
    z_ref: np.ndarray

    def minimum(self) -> tuple[float, tuple[int, int]]:
        idx = np.unravel_index(np.nanargmin(self.values), self.values.shape)
        return float(self.values[idx]), (int(idx[0]), int(idx[1]))

    def save_csv(self, path) -> None:
        i, j = self.index_pair
        with open(path, "w") as fh:
            fh.write(f"z{i},z{j},L\n")
            for a, zi in enumerate(self.axis_i):
                for b, zj in enumerate(self.axis_j):
                    fh.write(f"{float(zi)!r},{float(zj)!r},{float(self.values[a, b])!r}\n")


def objective_surface(
    index_pair: tuple[int, int],
    z_ref: np.ndarray,
    spec: ObjectiveSpec,
    forward_g: Callable,
    lo: float = -5.0,
    hi: float = 5.0,
    step: float = 0.1,
) -> SurfaceScan:
    """Evaluate L over a 2-D slice of latent space, all other coordinates
    held at z_ref. Forward failures are recorded as NaN cells."""
    i, j = index_pair
    z_ref = np.asarray(z_ref, dtype=np.float64).ravel()
    if i == j:
        raise ValueError("index pair must be two distinct latent indices")
    if not (0 <= i < z_ref.size and 0 <= j < z_ref.size):
        raise ValueError(f"indices {index_pair} outside latent size {z_ref.size}")
    axis = scan_axis(lo, hi, step)
    values = np.empty((axis.size, axis.size))
    z = z_ref.copy()
    for a, zi in enumerate(axis):
        z[i] = zi
        for b, zj in enumerate(axis):
            z[j] = zj
            try:
                values[a, b] = objective(z, spec, forward_g)
            except Exception:
                values[a, b] = np.nan
    return SurfaceScan(index_pair=(i, j), axis_i=axis, axis_j=axis,
                       values=values, z_ref=z_ref)


def nn_two_sample_accuracy(real_set, gen_set) -> float:
    """Leave-one-out 1-NN accuracy of separating the two sets.

    Euclidean distance on raw pixels; ~0.5 means the sets are statistically
    indistinguishable, 1.0 means perfectly separable.
    """
    real = [np.asarray(f, dtype=np.float64).ravel() for f in real_set]
    gen = [np.asarray(f, dtype=np.float64).ravel() for f in gen_set]
    if not real or not gen:
        raise ValueError("both sets must be non-empty")
    X = np.vstack(real + gen)
    labels = np.concatenate([np.ones(len(real)), np.zeros(len(gen))])
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(d2, np.inf)
    nearest = np.argmin(d2, axis=1)
    return float(np.mean(labels[nearest] == labels))


def binarize(field: np.ndarray, threshold: float = 0.2) -> np.ndarray:
    """1 where the value reaches the threshold, else 0."""
    return (np.asarray(field, dtype=np.float64) >= threshold).astype(np.float64)
