"""Steady-state 2-D confined groundwater flow on a regular grid.

Finite-volume discretization with harmonic-mean intercell transmissivities,
constant-head west/east columns, no-flow north/south edges. The linear
system is symmetric positive definite and banded (bandwidth = number of
interior columns), solved by LAPACK's banded Cholesky with the relative
residual verified against 1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solveh_banded

from ._kernels import flow_band_matrix
from .errors import NumericalError

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class AquiferGrid:
    rows: int
    cols: int
    cell_size: float = 5.0   # m
    thickness: float = 10.0  # m

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.rows}x{self.cols}")
        if self.cell_size <= 0 or self.thickness <= 0:
            raise ValueError("cell_size and thickness must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def cell_area(self) -> float:
        return self.cell_size * self.cell_size

    def contains(self, cell: tuple[int, int]) -> bool:
        r, c = cell
        return 0 <= r < self.rows and 0 <= c < self.cols


#: 480 m x 480 m x 10 m aquifer at 5 m resolution.
PAPER_GRID = AquiferGrid(rows=96, cols=96, cell_size=5.0, thickness=10.0)


@dataclass(frozen=True)
class BoundarySpec:
    """Dirichlet heads on the west/east columns; north/south are no-flow."""

    west_head: float = 0.0
    east_head: float = -10.0


@dataclass(frozen=True)
class SourceSpec:
    recharge: float = 0.0  # m/d, uniform
    wells: tuple[tuple[int, int, float], ...] = ()  # (row, col, rate m3/d), rate<0 extracts

    def with_well(self, row: int, col: int, rate: float) -> "SourceSpec":
        return replace(self, wells=self.wells + ((row, col, rate),))


@dataclass(frozen=True)
class WellLayout:
    monitoring: tuple[tuple[int, int], ...]
    pumping: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if len(set(self.monitoring)) != len(self.monitoring):
            raise ValueError("monitoring cells must be distinct")
        if len(set(self.pumping)) != len(self.pumping):
            raise ValueError("pumping cells must be distinct")


def lattice_layout(grid: AquiferGrid, k: int, pumping: bool = False) -> WellLayout:
    """Uniform k x k well lattice at cells round((i+1)*extent/(k+1)).

    Cases 1-3 use k = 3, 4, 5 (monitoring only); the tomography case uses
    the k = 4 lattice with every well pumping-capable.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rs = [int(np.floor((i + 1) * grid.rows / (k + 1) + 0.5)) for i in range(k)]
    cs = [int(np.floor((j + 1) * grid.cols / (k + 1) + 0.5)) for j in range(k)]
    cells = tuple((r, c) for r in rs for c in cs)
    for cell in cells:
        if not grid.contains(cell):
            raise ValueError(f"lattice cell {cell} outside {grid.rows}x{grid.cols} grid")
    return WellLayout(monitoring=cells, pumping=cells if pumping else ())


@dataclass(frozen=True)
class ExperimentSpec:
    """One observation experiment: static heads or cross-well tomography."""

    mode: str  # "static-heads" | "tomography"
    grid: AquiferGrid
    boundary: BoundarySpec
    sources: SourceSpec
    layout: WellLayout
    pumping_rate: float | None = None  # m3/d, applied as extraction (tomography)

    def __post_init__(self):
        if self.mode not in ("static-heads", "tomography"):
            raise ValueError(f"unknown experiment mode {self.mode!r}")
        if self.mode == "tomography":
            if self.pumping_rate is None:
                raise ValueError("tomography requires a pumping_rate")
            if not self.layout.pumping:
                raise ValueError("tomography requires pumping-capable wells")
        for cell in self.layout.monitoring + self.layout.pumping:
            if not self.grid.contains(cell):
                raise ValueError(f"well cell {cell} outside grid")

    @property
    def n_observations(self) -> int:
        if self.mode == "static-heads":
            return len(self.layout.monitoring)
        monitored = set(self.layout.monitoring)
        return sum(
            len(monitored) - (1 if p in monitored else 0) for p in self.layout.pumping
        )


def _conductances(K: np.ndarray, grid: AquiferGrid) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic-mean intercell conductances (m2/d), horizontal and vertical."""
    T = K * grid.thickness
    ch = 2.0 * T[:, :-1] * T[:, 1:] / (T[:, :-1] + T[:, 1:])
    cv = 2.0 * T[:-1, :] * T[1:, :] / (T[:-1, :] + T[1:, :])
    return ch, cv


def _check_conductivity(K: np.ndarray, grid: AquiferGrid) -> np.ndarray:
    K = np.asarray(K, dtype=np.float64)
    if K.shape != grid.shape:
        raise ValueError(f"K shape {K.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(K)) or np.any(K <= 0):
        raise ValueError("K must be strictly positive and finite everywhere")
    return K


def _source_array(grid: AquiferGrid, src: SourceSpec) -> np.ndarray:
    """Volumetric source per cell (m3/d)."""
    q = np.full(grid.shape, src.recharge * grid.cell_area)
    for r, c, rate in src.wells:
        if not grid.contains((r, c)):
            raise ValueError(f"well cell ({r}, {c}) outside grid")
        q[r, c] += rate
    return q


def _solve_banded(ab: np.ndarray, rhs: np.ndarray, m: int) -> np.ndarray:
    """Banded Cholesky solve with the relative residual verified."""
    try:
        x = solveh_banded(ab, rhs, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"banded Cholesky factorization failed: {exc}") from exc

    # residual check against the assembled band matrix
    res = ab[m][:, None] * x
    res[1:] += ab[m - 1][1:, None] * x[:-1]
    res[:-1] += ab[m - 1][1:, None] * x[1:]
    res[m:] += ab[0][m:, None] * x[:-m]
    res[:-m] += ab[0][m:, None] * x[m:]
    res -= rhs
    bnorm = np.linalg.norm(rhs, axis=0)
    rel = np.linalg.norm(res, axis=0) / np.maximum(bnorm, 1e-300)
    rel[bnorm == 0] = 0.0
    if np.any(rel > RESIDUAL_TOL):
        raise NumericalError(
            f"flow solve residual {rel.max():.3e} exceeds {RESIDUAL_TOL:.0e}"
        )
    return x


def _interior_rhs(grid: AquiferGrid, bc: BoundarySpec, src: SourceSpec,
                  ch: np.ndarray) -> np.ndarray:
    q = _source_array(grid, src)[:, 1:-1].copy()
    q[:, 0] += ch[:, 0] * bc.west_head
    q[:, -1] += ch[:, -1] * bc.east_head
    return q.ravel()


def _solve_batch(
    K: np.ndarray, grid: AquiferGrid, bc: BoundarySpec, sources: list[SourceSpec]
) -> np.ndarray:
    """Solve for several source configurations sharing one factorization.

    Returns heads with shape (len(sources), rows, cols).
    """
    K = _check_conductivity(K, grid)
    rows, cols = grid.shape
    m = cols - 2
    if m == 0:  # both columns are constant-head cells
        heads = np.empty((len(sources), rows, 2))
        heads[:, :, 0] = bc.west_head
        heads[:, :, 1] = bc.east_head
        return heads
    ch, cv = _conductances(K, grid)
    ab = flow_band_matrix(ch, cv)
    rhs = np.column_stack([_interior_rhs(grid, bc, src, ch) for src in sources])
    x = _solve_banded(ab, rhs, m)

    heads = np.empty((len(sources), rows, cols))
    heads[:, :, 0] = bc.west_head
    heads[:, :, -1] = bc.east_head
    heads[:, :, 1:-1] = x.T.reshape(len(sources), rows, m)
    return heads


def solve_steady_heads(
    K: np.ndarray, grid: AquiferGrid, bc: BoundarySpec, src: SourceSpec
) -> np.ndarray:
    """Hydraulic head (m) solving div(T grad h) + q = 0 on the grid."""
    return _solve_batch(K, grid, bc, [src])[0]


def cell_balance(
    K: np.ndarray,
    grid: AquiferGrid,
    bc: BoundarySpec,
    src: SourceSpec,
    heads: np.ndarray,
) -> dict:
    """Discrete mass-balance diagnostics for a computed head field.

    Returns per-interior-cell net flux (m3/d, ~0 for a converged solve), the
    largest face-flux magnitude, and the global constant-head boundary
    exchange (inflow/outflow, m3/d).
    """
    K = _check_conductivity(K, grid)
    ch, cv = _conductances(K, grid)
    fh = ch * (heads[:, :-1] - heads[:, 1:])   # flux west->east through vertical faces
    fv = cv * (heads[:-1, :] - heads[1:, :])   # flux north->south
    q = _source_array(grid, src)

    net = q.copy()
    net[:, 1:] += fh
    net[:, :-1] -= fh
    net[1:, :] += fv
    net[:-1, :] -= fv

    chd = net[:, 0].sum() + net[:, -1].sum()  # flux absorbed by constant-head cells
    inflow = fh[:, 0].sum()                   # into the domain through the west faces
    outflow = fh[:, -1].sum()                 # out through the east faces
    return {
        "interior_net": net[:, 1:-1],
        "max_face_flux": max(np.abs(fh).max(), np.abs(fv).max()),
        "chd_exchange": chd,
        "west_inflow": inflow,
        "east_outflow": outflow,
        "source_total": q[:, 1:-1].sum(),
    }


def observe_heads(heads: np.ndarray, layout: WellLayout) -> np.ndarray:
    """Heads at the monitoring cells, in layout order."""
    rows, cols = heads.shape
    for r, c in layout.monitoring:
        if not (0 <= r < rows and 0 <= c < cols):
            raise ValueError(f"monitoring cell ({r}, {c}) outside {rows}x{cols} field")
    return np.array([heads[r, c] for r, c in layout.monitoring])


def run_forward(K: np.ndarray, exp: ExperimentSpec) -> np.ndarray:
    """Simulated observation vector for one conductivity field.

    Static mode: one solve, heads at every monitoring well. Tomography:
    one solve per pumping-capable well with that well extracting at
    pumping_rate, recording the other monitoring wells, concatenated in
    pumping-well order. All tomography solves share one factorization.
    """
    if exp.mode == "static-heads":
        heads = solve_steady_heads(K, exp.grid, exp.boundary, exp.sources)
        return observe_heads(heads, exp.layout)

    grid, bc = exp.grid, exp.boundary
    K = _check_conductivity(K, grid)
    rows, cols = grid.shape
    m = cols - 2
    ch, cv = _conductances(K, grid)
    ab = flow_band_matrix(ch, cv)
    base = _interior_rhs(grid, bc, exp.sources, ch)
    n_pump = len(exp.layout.pumping)
    rhs = np.tile(base[:, None], (1, n_pump))
    for j, (r, c) in enumerate(exp.layout.pumping):
        if 1 <= c <= cols - 2:  # wells in constant-head columns have no effect
            rhs[r * m + (c - 1), j] -= exp.pumping_rate
    try:
        x = _solve_banded(ab, rhs, m)
    except NumericalError as exc:
        raise NumericalError(f"tomography batch solve failed: {exc}") from exc

    def head_at(col, cell):
        r, c = cell
        if c == 0:
            return bc.west_head
        if c == cols - 1:
            return bc.east_head
        return x[r * m + (c - 1), col]

    out = np.empty(exp.n_observations)
    k = 0
    for j, pump_cell in enumerate(exp.layout.pumping):
        for cell in exp.layout.monitoring:
            if cell != pump_cell:
                out[k] = head_at(j, cell)
                k += 1
    assert k == out.size
    return out


def add_noise(d: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Observations plus i.i.d. Gaussian error, reproducible per seed."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    d = np.asarray(d, dtype=np.float64)
    rng = np.random.default_rng(seed)
    return d + rng.normal(0.0, sigma, size=d.shape) if sigma > 0 else d.copy()
