"""Experiment orchestration: builds every paper case from a RunConfig and
produces a fully reproducible output directory (fields, observations,
inversion record, diagnostics, manifest). The manifest doubles as a config:
re-running it regenerates byte-identical numeric outputs.
"""

from __future__ import annotations

import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, esmda, fields, flowsim, varinv
from ._kernels import backend as kernel_backend
from .config import RunConfig
from .errors import ConfigError
from .generator import (
    FieldScaling,
    channel_generator,
    gaussian_generator,
    generate,
    load_generator,
    sample_latent_prior,
    WeightStore,
)
from .gridfield import read_gridfield, write_gridfield, write_observations

TABLE1_WIDTHS = (512, 256, 128)
TABLE2_WIDTHS = (512, 256, 128, 64)


def build_grid(cfg: RunConfig) -> flowsim.AquiferGrid:
    return flowsim.AquiferGrid(
        rows=cfg["grid.rows"], cols=cfg["grid.cols"],
        cell_size=cfg["grid.cell_size"], thickness=cfg["grid.thickness"],
    )


def build_layout(cfg: RunConfig, grid: flowsim.AquiferGrid) -> flowsim.WellLayout:
    text = cfg["experiment.layout"]
    if not text.startswith("lattice:"):
        raise ConfigError([f"key 'experiment.layout': expected lattice:K, got {text!r}"])
    k = int(text.split(":", 1)[1])
    pumping = cfg["experiment.mode"] == "tomography"
    return flowsim.lattice_layout(grid, k, pumping=pumping)


def build_experiment(cfg: RunConfig) -> flowsim.ExperimentSpec:
    grid = build_grid(cfg)
    return flowsim.ExperimentSpec(
        mode=cfg["experiment.mode"],
        grid=grid,
        boundary=flowsim.BoundarySpec(cfg["boundary.west_head"], cfg["boundary.east_head"]),
        sources=flowsim.SourceSpec(recharge=cfg["sources.recharge"]),
        layout=build_layout(cfg, grid),
        pumping_rate=cfg["experiment.pumping_rate"],
    )


def build_scaling(cfg: RunConfig) -> FieldScaling:
    return FieldScaling(log10_lo=cfg["scaling.log10_lo"], log10_hi=cfg["scaling.log10_hi"])


@dataclass
class LatentGenerator:
    """Latent -> log10-conductivity raster map used by the inversions."""

    fn: object        # callable z -> (rows, cols) log10-K field
    n_latent: int
    raw_fn: object = None  # callable z -> generator output in [0, 1], if neural

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.fn(z)


def build_generator(cfg: RunConfig, grid: flowsim.AquiferGrid) -> LatentGenerator:
    kind = cfg["generator.kind"]
    scaling = build_scaling(cfg)
    if kind == "linear":
        n_latent = cfg["generator.n_latent"]
        basis = fields.grf_sample(
            fields.GrfParams(), grid.shape, n_latent, seed=cfg["generator.seed"]
        ).reshape(n_latent, -1).T / np.sqrt(n_latent)

        def lin(z, _basis=basis, _shape=grid.shape):
            return (_basis @ np.asarray(z, dtype=np.float64)).reshape(_shape)

        return LatentGenerator(fn=lin, n_latent=n_latent)

    if kind in ("table1", "table2"):
        widths = cfg["generator.widths"]
        if kind == "table1":
            spec = gaussian_generator(widths or TABLE1_WIDTHS)
        else:
            spec = channel_generator(widths or TABLE2_WIDTHS)
        weights = WeightStore.random(spec, seed=cfg["generator.seed"])
    else:  # wggw
        spec, weights = load_generator(cfg["generator.weights"], cfg["generator.latent_shape"])
    if spec.output_shape != grid.shape:
        raise ConfigError(
            [f"generator output {spec.output_shape} does not match grid {grid.shape}"]
        )

    def raw(z, _spec=spec, _w=weights):
        return generate(_spec, _w, z)

    def neural(z, _raw=raw, _scaling=scaling):
        return _scaling.log10_field(_raw(z))

    return LatentGenerator(fn=neural, n_latent=spec.n_latent, raw_fn=raw)


def build_truth(cfg: RunConfig, grid: flowsim.AquiferGrid, gen: LatentGenerator):
    """(log10-K truth field, latent used or None)."""
    kind = cfg["truth.kind"]
    scaling = build_scaling(cfg)
    seed = cfg["truth.seed"]
    if kind == "file":
        field = read_gridfield(cfg["truth.path"])
        if field.shape != grid.shape:
            raise ConfigError(
                [f"truth field {field.shape} does not match grid {grid.shape}"]
            )
        return field, None
    if kind == "generator":
        z = sample_latent_prior(gen.n_latent, 1, seed)[:, 0]
        return gen(z), z
    if kind == "grf":
        draw = fields.grf_sample(fields.GrfParams(), grid.shape, 1, seed)[0]
        g01 = np.clip(0.5 + draw / 6.0, 0.0, 1.0)  # +-3 sigma into [0, 1]
        return scaling.log10_field(g01), None
    if kind == "fractures":
        binary = fields.synth_fractures(
            fields.FractureParams(count=cfg["truth.fractures.count"]), grid.shape, seed
        )
    else:  # channels
        binary = fields.synth_channels(
            fields.ChannelParams(count=cfg["truth.channels.count"],
                                 fraction_bounds=(0.05, 0.6)),
            grid.shape, seed,
        )
    lo, hi = scaling.log10_lo, scaling.log10_hi
    return lo + (hi - lo) * binary, None


def forward_from_log10(exp: flowsim.ExperimentSpec):
    def forward(log10_field: np.ndarray) -> np.ndarray:
        return flowsim.run_forward(10.0 ** log10_field, exp)

    return forward


def resolve_threads(cfg: RunConfig, override=None) -> int:
    n = override if override is not None else cfg["threads"]
    return max(1, n if n is not None else os.cpu_count() or 1)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    entries: dict
    out_dir: Path

    def save(self) -> None:
        with open(self.out_dir / "manifest", "w") as fh:
            for key in sorted(self.entries):
                fh.write(f"{key}={self.entries[key]}\n")


def _manifest(cfg: RunConfig, out_dir: Path, t0: float, extra: dict) -> RunManifest:
    entries = {}
    for line in cfg.serialize().splitlines():
        key, value = line.split("=", 1)
        entries[key] = value
    entries["meta.version"] = __version__
    entries["meta.kernels"] = kernel_backend()
    entries["meta.wallclock_s"] = f"{time.time() - t0:.3f}"
    for key in ("truth.path", "generator.weights"):
        if cfg[key]:
            entries[f"meta.digest.{key}"] = _sha256(cfg[key])
    entries.update(extra)
    return RunManifest(entries=entries, out_dir=out_dir)


def execute_run(cfg: RunConfig, out_dir=None, threads=None) -> RunManifest:
    """Run one config end to end (or fan out a sweep into child runs)."""
    t0 = time.time()
    out = Path(out_dir if out_dir is not None else cfg["output.dir"] or ".")
    out.mkdir(parents=True, exist_ok=True)

    sweeps = _expand_sweeps(cfg)
    if sweeps:
        children = []
        for name, child_cfg in sweeps:
            execute_run(child_cfg, out_dir=out / name, threads=threads)
            children.append(name)
        manifest = _manifest(cfg, out, t0, {"meta.children": ",".join(children)})
        manifest.save()
        return manifest

    try:
        manifest_extra = _execute_single(cfg, out, resolve_threads(cfg, threads))
    except Exception:
        _manifest(cfg, out, t0, {"meta.incomplete": "true"}).save()
        raise
    manifest = _manifest(cfg, out, t0, manifest_extra)
    manifest.save()
    return manifest


def _expand_sweeps(cfg: RunConfig):
    sigmas = cfg["sweep.noise_sigma"]
    rates = cfg["sweep.pumping_rate"]
    if sigmas is None and rates is None:
        return []
    base = cfg.with_values(sweep__noise_sigma=None, sweep__pumping_rate=None)
    base = RunConfig(values=base.values,
                     explicit=base.explicit - {"sweep.noise_sigma", "sweep.pumping_rate"})
    runs = []
    for sigma in (sigmas or (None,)):
        for rate in (rates or (None,)):
            child = base
            parts = []
            if sigma is not None:
                child = child.with_values(noise__sigma=sigma)
                parts.append(f"err_{sigma:g}")
            if rate is not None:
                child = child.with_values(experiment__pumping_rate=rate)
                parts.append(f"rate_{rate:g}")
            runs.append(("_".join(parts), child))
    return runs


def _execute_single(cfg: RunConfig, out: Path, threads: int) -> dict:
    exp = build_experiment(cfg)
    gen = build_generator(cfg, exp.grid)
    truth_log10, z_true = build_truth(cfg, exp.grid, gen)

    write_gridfield(out / "truth_log10K.gfld", truth_log10)
    if z_true is not None:
        write_gridfield(out / "truth_z.gfld", z_true.reshape(1, -1))

    forward = forward_from_log10(exp)
    d_clean = forward(truth_log10)
    d_obs = flowsim.add_noise(d_clean, cfg["noise.sigma"], cfg["noise.seed"])
    write_observations(out / "obs_clean.csv", d_clean)
    write_observations(out / "obs.csv", d_obs)

    kind = cfg.inversion_kind()
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    map_fn = pool.map if pool else map
    try:
        if kind == "esmda":
            extra = _run_esmda_block(cfg, exp, gen, forward, d_obs, truth_log10, out, map_fn)
        else:
            extra = _run_variational_block(cfg, gen, forward, d_obs, truth_log10, out, map_fn)
    finally:
        if pool:
            pool.shutdown()
    extra["meta.n_obs"] = str(d_obs.size)
    return extra


def _run_esmda_block(cfg, exp, gen, forward, d_obs, truth_log10, out, map_fn) -> dict:
    model = esmda.ObservationModel.from_sigma(d_obs, cfg["noise.sigma"])
    record = esmda.run_esmda(
        forward, gen, gen.n_latent, model,
        n_a=cfg["esmda.n_a"], n_real=cfg["esmda.n_r"],
        policy=esmda.TruncationPolicy(energy=cfg["esmda.energy"]),
        seed=cfg["esmda.seed"], map_fn=map_fn,
    )
    record.save(out / "esmda")

    final = record.ensembles[-1]
    fields_final = [gen(final[:, j]) for j in range(final.shape[1])]
    summary = diagnostics.ensemble_summary(fields_final)
    write_gridfield(out / "mean_log10K.gfld", summary.mean)
    write_gridfield(out / "variance_log10K.gfld", summary.variance)

    member_rmse = [diagnostics.rmse(f, truth_log10) for f in fields_final]
    with open(out / "rmse_k.csv", "w") as fh:
        fh.write("member,rmse_log10K\n")
        for j, val in enumerate(member_rmse):
            fh.write(f"{j},{val!r}\n")

    fit_mean_field = diagnostics.rmse(forward(summary.mean), d_obs)
    if cfg["truth.kind"] in ("fractures", "channels"):
        scaling = build_scaling(cfg)
        g01 = (summary.mean - scaling.log10_lo) / (scaling.log10_hi - scaling.log10_lo)
        write_gridfield(out / "mean_binary.gfld", diagnostics.binarize(g01, 0.2))

    return {
        "meta.fit_rmse_mean_field": repr(fit_mean_field),
        "meta.final_mean_member_fit": repr(float(record.misfit_summary()[-1, 0])),
        "meta.k_rmse_mean": repr(float(np.mean(member_rmse))),
    }


def _run_variational_block(cfg, gen, forward, d_obs, truth_log10, out, map_fn) -> dict:
    spec = varinv.ObjectiveSpec(d_obs=d_obs, error_var=np.full(d_obs.size, cfg["noise.sigma"] ** 2))
    policy = varinv.InversionPolicy(
        mode=cfg["variational.mode"] or varinv.GAUSS_NEWTON,
        fd_step=cfg["variational.fd_step"],
        max_iterations=cfg["variational.max_iterations"],
        grad_tol=cfg["variational.grad_tol"],
    )
    z0 = sample_latent_prior(gen.n_latent, 1, cfg["variational.seed"])[:, 0]
    traj = varinv.run_variational(z0, spec, lambda z: forward(gen(z)),
                                  policy, map_fn=map_fn)
    traj.save(out / "variational")
    estimate = gen(traj.final_z)
    write_gridfield(out / "estimate_log10K.gfld", estimate)
    k_rmse = diagnostics.rmse(estimate, truth_log10)
    with open(out / "rmse_k.csv", "w") as fh:
        fh.write("member,rmse_log10K\n")
        fh.write(f"0,{k_rmse!r}\n")
    return {
        "meta.fit_rmse_estimate": repr(diagnostics.rmse(forward(estimate), d_obs)),
        "meta.final_objective": repr(traj.final_objective),
        "meta.termination": traj.termination,
        "meta.k_rmse_estimate": repr(k_rmse),
    }
