"""Variational latent-space inversion: Gauss-Newton with a backtracking
line search, or Levenberg-Marquardt, on the regularized least-squares
objective. Jacobians come from central finite differences (no autodiff
here), so each step costs 2 * n_latent forward runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import NumericalError
from .gridfield import write_matrix

GAUSS_NEWTON = "gauss-newton-linesearch"
LEVENBERG_MARQUARDT = "levenberg-marquardt"


@dataclass(frozen=True)
class ObjectiveSpec:
    """Quadratic misfit-plus-prior objective over latent vectors."""

    d_obs: np.ndarray
    error_var: np.ndarray              # diagonal of C_D
    prior_var: np.ndarray | None = None  # diagonal of C_Z, identity if None
    prior_center: np.ndarray | None = None  # zero for practical inversion

    def __post_init__(self):
        d = np.asarray(self.d_obs, dtype=np.float64)
        v = np.asarray(self.error_var, dtype=np.float64)
        if d.ndim != 1 or v.shape != d.shape or np.any(v <= 0):
            raise ValueError("d_obs and positive error_var must be 1-D and matched")
        object.__setattr__(self, "d_obs", d)
        object.__setattr__(self, "error_var", v)

    def center(self, n_latent: int) -> np.ndarray:
        if self.prior_center is None:
            return np.zeros(n_latent)
        c = np.asarray(self.prior_center, dtype=np.float64)
        if c.size != n_latent:
            raise ValueError(f"prior center size {c.size} != n_latent {n_latent}")
        return c.ravel()

    def prior_diag(self, n_latent: int) -> np.ndarray:
        if self.prior_var is None:
            return np.ones(n_latent)
        v = np.asarray(self.prior_var, dtype=np.float64)
        if v.size != n_latent or np.any(v <= 0):
            raise ValueError("prior_var must be positive with size n_latent")
        return v.ravel()


@dataclass(frozen=True)
class InversionPolicy:
    mode: str = GAUSS_NEWTON
    fd_step: float = 1e-3
    max_iterations: int = 30
    grad_tol: float = 1e-6
    backtrack_factor: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 30
    lm_damping_init: float = 1e-2
    lm_damping_grow: float = 10.0
    lm_damping_shrink: float = 0.5

    def __post_init__(self):
        if self.mode not in (GAUSS_NEWTON, LEVENBERG_MARQUARDT):
            raise ValueError(f"unknown inversion mode {self.mode!r}")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ValueError("backtracking factor must be in (0, 1)")
        if min(self.fd_step, self.max_iterations, self.grad_tol,
               self.sufficient_decrease, self.lm_damping_init) <= 0:
            raise ValueError("policy parameters must be positive")


def _objective_value(z: np.ndarray, d_pred: np.ndarray, spec: ObjectiveSpec) -> float:
    dz = spec.center(z.size) - z
    r = spec.d_obs - d_pred
    return float(0.5 * dz @ (dz / spec.prior_diag(z.size))
                 + 0.5 * r @ (r / spec.error_var))


def objective(z: np.ndarray, spec: ObjectiveSpec, forward_g: Callable) -> float:
    """L(z) = 0.5 (z_c - z)' C_Z^-1 (z_c - z) + 0.5 r' C_D^-1 r."""
    z = np.asarray(z, dtype=np.float64).ravel()
    if not np.all(np.isfinite(z)):
        raise ValueError("latent vector must be finite")
    return _objective_value(z, np.asarray(forward_g(z), dtype=np.float64), spec)


def fd_jacobian(
    forward_g: Callable, z: np.ndarray, step: float, map_fn: Callable = map
) -> np.ndarray:
    """Central-difference Jacobian of the forward map, one column per latent."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    z = np.asarray(z, dtype=np.float64).ravel()
    points = []
    for k in range(z.size):
        for sign in (+1.0, -1.0):
            zp = z.copy()
            zp[k] += sign * step
            points.append((forward_g, zp, k))
    results = list(map_fn(_eval_point, points))
    cols = []
    for k in range(z.size):
        plus, minus = results[2 * k], results[2 * k + 1]
        cols.append((plus - minus) / (2.0 * step))
    return np.column_stack(cols)


def _eval_point(args) -> np.ndarray:
    forward_g, zp, k = args
    try:
        return np.asarray(forward_g(zp), dtype=np.float64)
    except Exception as exc:
        raise NumericalError(f"forward failed for jacobian column {k}: {exc}") from exc


def step_direction(
    J: np.ndarray,
    residual: np.ndarray,
    z: np.ndarray,
    spec: ObjectiveSpec,
    policy: InversionPolicy,
    damping: float = 0.0,
) -> np.ndarray:
    """Solve the regularized normal equations for the update direction."""
    z = np.asarray(z, dtype=np.float64).ravel()
    n = z.size
    if J.shape != (residual.size, n):
        raise ValueError(f"jacobian shape {J.shape} does not match problem")
    jw = J / spec.error_var[:, None]
    normal = J.T @ jw + np.diag(1.0 / spec.prior_diag(n))
    rhs = jw.T @ residual - (z - spec.center(n)) / spec.prior_diag(n)
    if policy.mode == LEVENBERG_MARQUARDT:
        normal = normal + damping * np.diag(np.diag(normal))
    try:
        return np.linalg.solve(normal, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular normal matrix: {exc}") from exc


@dataclass
class Trajectory:
    points: list[dict] = field(default_factory=list)  # z, L, rmse, step
    termination: str = ""

    def add(self, z: np.ndarray, L: float, rmse: float, step: float) -> None:
        self.points.append({"z": np.asarray(z, dtype=np.float64).copy(),
                            "L": float(L), "rmse": float(rmse), "step": float(step)})

    @property
    def final_z(self) -> np.ndarray:
        return self.points[-1]["z"]

    @property
    def final_objective(self) -> float:
        return self.points[-1]["L"]

    def objectives(self) -> np.ndarray:
        return np.array([p["L"] for p in self.points])

    def save(self, outdir) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "trajectory.csv", "w") as fh:
            fh.write("iteration,L,rmse,step,termination\n")
            for i, p in enumerate(self.points):
                fh.write(f"{i},{p['L']!r},{p['rmse']!r},{p['step']!r},{self.termination}\n")
        write_matrix(outdir / "z_path.gfld", np.column_stack([p["z"] for p in self.points]))


def run_variational(
    z0: np.ndarray,
    spec: ObjectiveSpec,
    forward_g: Callable,
    policy: InversionPolicy = InversionPolicy(),
    map_fn: Callable = map,
) -> Trajectory:
    """Descend L from z0; every accepted iterate has L no greater than its
    predecessor. Terminates on the gradient test, step collapse, damping
    overflow or the iteration cap (the reason is recorded, not raised)."""
    z = np.asarray(z0, dtype=np.float64).ravel().copy()
    if not np.all(np.isfinite(z)):
        raise ValueError("z0 must be finite")

    def fit_rmse(d_pred):
        return float(np.sqrt(np.mean((spec.d_obs - d_pred) ** 2)))

    traj = Trajectory()
    d_pred = np.asarray(forward_g(z), dtype=np.float64)
    L = _objective_value(z, d_pred, spec)
    traj.add(z, L, fit_rmse(d_pred), 0.0)

    damping = policy.lm_damping_init
    for _ in range(policy.max_iterations):
        J = fd_jacobian(forward_g, z, policy.fd_step, map_fn=map_fn)
        r = spec.d_obs - d_pred
        grad = (z - spec.center(z.size)) / spec.prior_diag(z.size) \
            - (J / spec.error_var[:, None]).T @ r
        if np.linalg.norm(grad) <= policy.grad_tol:
            traj.termination = "gradient-tolerance"
            return traj

        if policy.mode == GAUSS_NEWTON:
            dz = step_direction(J, r, z, spec, policy)
            t, ok = 1.0, False
            slope = float(grad @ dz)  # negative for the SPD normal system
            for _ in range(policy.max_backtracks + 1):
                z_try = z + t * dz
                d_try = np.asarray(forward_g(z_try), dtype=np.float64)
                L_try = _objective_value(z_try, d_try, spec)
                if L_try <= L + policy.sufficient_decrease * t * slope:
                    ok = True
                    break
                t *= policy.backtrack_factor
            if not ok:
                traj.termination = "line-search-exhausted"
                return traj
            z, L, d_pred = z_try, L_try, d_try
            traj.add(z, L, fit_rmse(d_pred), t)
        else:
            accepted = False
            while damping < 1e15:
                dz = step_direction(J, r, z, spec, policy, damping=damping)
                z_try = z + dz
                d_try = np.asarray(forward_g(z_try), dtype=np.float64)
                L_try = _objective_value(z_try, d_try, spec)
                if L_try < L:
                    damping *= policy.lm_damping_shrink
                    z, L, d_pred = z_try, L_try, d_try
                    traj.add(z, L, fit_rmse(d_pred), float(np.linalg.norm(dz)))
                    accepted = True
                    break
                damping *= policy.lm_damping_grow
            if not accepted:
                traj.termination = "damping-overflow"
                return traj

    traj.termination = "max-iterations"
    return traj
