"""Ensemble Smoother with Multiple Data Assimilation over latent variables.

The update repeats a stochastic ensemble-Kalman step N_a times with the
observation-error covariance inflated by alpha_i (sum of 1/alpha_i = 1),
inverting the inflated data covariance through an energy-truncated
eigendecomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import NumericalError
from .generator import sample_latent_prior
from .gridfield import write_matrix

EIGENVALUE_FLOOR = 1e-14  # relative to the largest eigenvalue


@dataclass(frozen=True)
class InflationSchedule:
    alphas: tuple[float, ...]

    def __post_init__(self):
        if not self.alphas or any(a <= 0 for a in self.alphas):
            raise ValueError("inflation coefficients must be positive")
        total = sum(1.0 / a for a in self.alphas)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"reciprocals of alphas sum to {total}, expected 1")

    def __len__(self) -> int:
        return len(self.alphas)


def constant_inflation(n_a: int) -> InflationSchedule:
    """The alpha_i = N_a schedule; reciprocals sum to one by construction."""
    if n_a < 1:
        raise ValueError(f"n_a must be >= 1, got {n_a}")
    return InflationSchedule(alphas=(float(n_a),) * n_a)


@dataclass(frozen=True)
class ObservationModel:
    """Observed data with a diagonal Gaussian error covariance."""

    d_obs: np.ndarray          # (n_obs,)
    error_var: np.ndarray      # diagonal of C_D, m^2

    def __post_init__(self):
        d = np.asarray(self.d_obs, dtype=np.float64)
        v = np.asarray(self.error_var, dtype=np.float64)
        if d.ndim != 1 or v.shape != d.shape:
            raise ValueError(f"shape mismatch: d_obs {d.shape}, error_var {v.shape}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(v)) and np.all(v > 0)):
            raise ValueError("error variances must be positive and finite")
        object.__setattr__(self, "d_obs", d)
        object.__setattr__(self, "error_var", v)

    @classmethod
    def from_sigma(cls, d_obs, sigma: float) -> "ObservationModel":
        d = np.asarray(d_obs, dtype=np.float64)
        return cls(d_obs=d, error_var=np.full(d.shape, float(sigma) ** 2))

    @property
    def n_obs(self) -> int:
        return self.d_obs.size


@dataclass(frozen=True)
class TruncationPolicy:
    """Retain the largest eigenvalues holding at most `energy` of the total."""

    energy: float = 0.99

    def __post_init__(self):
        if not (0.0 < self.energy <= 1.0):
            raise ValueError(f"energy must be in (0, 1], got {self.energy}")


def perturb_observations(
    model: ObservationModel, alpha: float, n_real: int, seed
) -> np.ndarray:
    """(n_obs, n_real) matrix of d_obs + sqrt(alpha) C_D^(1/2) eps columns."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if n_real < 1:
        raise ValueError("n_real must be >= 1")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((model.n_obs, n_real))
    return model.d_obs[:, None] + np.sqrt(alpha * model.error_var)[:, None] * eps


def ensemble_covariances(Z: np.ndarray, D: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cross-covariance C_ZD and data auto-covariance C_DD (1/(N_r-1) sums)."""
    Z = np.asarray(Z, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    if Z.ndim != 2 or D.ndim != 2 or Z.shape[1] != D.shape[1]:
        raise ValueError(f"ensemble shapes do not match: {Z.shape} vs {D.shape}")
    n_real = Z.shape[1]
    if n_real < 2:
        raise ValueError("need at least 2 realizations for covariances")
    Zc = Z - Z.mean(axis=1, keepdims=True)
    Dc = D - D.mean(axis=1, keepdims=True)
    c_zd = Zc @ Dc.T / (n_real - 1)
    c_dd = Dc @ Dc.T / (n_real - 1)
    c_dd = 0.5 * (c_dd + c_dd.T)
    return c_zd, c_dd


def truncated_pseudo_inverse(M: np.ndarray, policy: TruncationPolicy) -> np.ndarray:
    """Energy-truncated eigen pseudo-inverse of a symmetric PSD matrix."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got {M.shape}")
    scale = np.abs(M).max()
    if scale > 0 and np.abs(M - M.T).max() > 1e-9 * scale:
        raise ValueError("matrix is not symmetric within 1e-9")
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    if w[0] <= 0:
        raise NumericalError("no positive eigenvalues; matrix is not PSD")
    keep = w > EIGENVALUE_FLOOR * w[0]
    total = np.clip(w, 0.0, None).sum()
    fractions = np.cumsum(w[keep]) / total
    n_keep = max(1, int(np.sum(fractions <= policy.energy)))
    wk = w[keep][:n_keep]
    Vk = V[:, keep][:, :n_keep]
    return (Vk / wk) @ Vk.T


def esmda_iterate(
    Z: np.ndarray,
    D: np.ndarray,
    D_uc: np.ndarray,
    model: ObservationModel,
    alpha: float,
    policy: TruncationPolicy = TruncationPolicy(),
) -> np.ndarray:
    """One Kalman-style latent update: Z + C_ZD (C_DD + alpha C_D)^+ (D_uc - D)."""
    if D_uc.shape != D.shape:
        raise ValueError(f"D_uc shape {D_uc.shape} does not match D {D.shape}")
    c_zd, c_dd = ensemble_covariances(Z, D)
    m = c_dd + alpha * np.diag(model.error_var)
    gain = c_zd @ truncated_pseudo_inverse(m, policy)
    return Z + gain @ (D_uc - D)


@dataclass
class AssimilationRecord:
    """Everything produced by one ES-MDA run.

    `ensembles` holds N_a + 1 latent snapshots (prior first); `simulated`
    holds the forward responses of each snapshot; `misfit` holds the
    per-member observation-space RMSE for each snapshot.
    """

    ensembles: list[np.ndarray] = field(default_factory=list)
    simulated: list[np.ndarray] = field(default_factory=list)
    misfit: list[np.ndarray] = field(default_factory=list)
    alphas: tuple[float, ...] = ()
    seed: int = 0

    @property
    def n_iterations(self) -> int:
        return len(self.ensembles) - 1

    def misfit_summary(self) -> np.ndarray:
        """(n_snapshots, 3) array of mean/min/max member RMSE per snapshot."""
        return np.array([[m.mean(), m.min(), m.max()] for m in self.misfit])

    def save(self, outdir, manifest: dict | None = None) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        for k, (Z, D) in enumerate(zip(self.ensembles, self.simulated)):
            it = outdir / f"iter_{k}"
            it.mkdir(exist_ok=True)
            write_matrix(it / "Z.gfld", Z)
            with open(it / "D.csv", "w") as fh:
                n_real = D.shape[1]
                fh.write("index," + ",".join(f"member_{j}" for j in range(n_real)) + "\n")
                for i in range(D.shape[0]):
                    fh.write(f"{i}," + ",".join(repr(float(v)) for v in D[i]) + "\n")
        with open(outdir / "misfit.csv", "w") as fh:
            fh.write("iteration,mean_rmse,min_rmse,max_rmse\n")
            for k, (mean, lo, hi) in enumerate(self.misfit_summary()):
                fh.write(f"{k},{float(mean)!r},{float(lo)!r},{float(hi)!r}\n")
        entries = {"seed": self.seed,
                   "n_iterations": self.n_iterations,
                   "alphas": ",".join(repr(a) for a in self.alphas)}
        if manifest:
            entries.update(manifest)
        with open(outdir / "manifest", "w") as fh:
            for key in sorted(entries):
                fh.write(f"{key}={entries[key]}\n")


def prior_seed(seed: int):
    return np.random.SeedSequence([int(seed), 0])


def perturbation_seed(seed: int, iteration: int):
    # one stream per iteration: changing N_a never reshuffles earlier draws
    return np.random.SeedSequence([int(seed), 1, int(iteration)])


def run_esmda(
    forward: Callable[[np.ndarray], np.ndarray],
    gen: Callable[[np.ndarray], np.ndarray],
    n_latent: int,
    model: ObservationModel,
    n_a: int,
    n_real: int,
    policy: TruncationPolicy = TruncationPolicy(),
    seed: int = 0,
    map_fn: Callable = map,
) -> AssimilationRecord:
    """Full coupling loop: sample prior, then iterate generate/simulate/update.

    `gen` maps one latent vector to a conductivity field and `forward` maps a
    field to the simulated observation vector; member evaluations go through
    `map_fn` (injectable worker-pool map, order-preserving).
    """
    if n_a < 1 or n_real < 2:
        raise ValueError("need n_a >= 1 and n_real >= 2")
    schedule = constant_inflation(n_a)
    rng = np.random.default_rng(prior_seed(seed))
    Z = rng.standard_normal((n_latent, n_real))

    record = AssimilationRecord(alphas=schedule.alphas, seed=seed)

    def simulate(Z_now: np.ndarray) -> np.ndarray:
        cols = list(map_fn(_member_response, ((forward, gen, Z_now[:, j], j)
                                              for j in range(n_real))))
        return np.column_stack(cols)

    D = simulate(Z)
    record.ensembles.append(Z.copy())
    record.simulated.append(D)
    record.misfit.append(_member_rmse(D, model.d_obs))

    for i, alpha in enumerate(schedule.alphas, start=1):
        D_uc = perturb_observations(model, alpha, n_real, perturbation_seed(seed, i))
        Z = esmda_iterate(Z, D, D_uc, model, alpha, policy)
        D = simulate(Z)
        record.ensembles.append(Z.copy())
        record.simulated.append(D)
        record.misfit.append(_member_rmse(D, model.d_obs))

    return record


def _member_response(args) -> np.ndarray:
    forward, gen, z, index = args
    try:
        return np.asarray(forward(gen(z)), dtype=np.float64)
    except Exception as exc:
        raise NumericalError(f"forward model failed for member {index}: {exc}") from exc


def _member_rmse(D: np.ndarray, d_obs: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean((D - d_obs[:, None]) ** 2, axis=0))
