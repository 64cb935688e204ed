"""Command-line interface.

Every subcommand is driven by the same flat key=value config file; flags
override the relevant entries. Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, fields, flowsim, harness, varinv
from .config import RunConfig, load_config
from .errors import ConfigError, NumericalError
from .generator import sample_latent_prior
from .gridfield import read_gridfield, write_gridfield, write_observations


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out if args.out is not None else (cfg["output.dir"] or "."))
        out.mkdir(parents=True, exist_ok=True)
        return args.handler(cfg, out, args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gwlatent",
        description="Latent-space ensemble inversion of groundwater conductivity fields",
    )
    sub = parser.add_subparsers(required=True, metavar="COMMAND")
    commands = {
        "gen-fields": (_cmd_gen_fields, "sample GRF/fracture/channel/generator fields"),
        "simulate": (_cmd_simulate, "run the forward model and add observation noise"),
        "invert-esmda": (_cmd_invert_esmda, "ensemble-smoother inversion"),
        "invert-gn": (_cmd_invert_gn, "variational (Gauss-Newton/LM) inversion"),
        "scan-objective": (_cmd_scan, "objective surface over two latent indices"),
        "semivariogram": (_cmd_semivariogram, "west-east experimental semivariogram"),
        "metrics": (_cmd_metrics, "RMSE between two grid fields"),
        "nn-test": (_cmd_nn_test, "1-NN two-sample test between field sets"),
        "run": (_cmd_run, "full experiment from config (sweeps included)"),
    }
    for name, (handler, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="key=value config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the command's seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
        p.set_defaults(handler=handler)
    return parser


def _override_seed(cfg: RunConfig, args, key: str) -> RunConfig:
    if args.seed is None:
        return cfg
    return cfg.with_values(**{key.replace(".", "__"): args.seed})


def _cmd_gen_fields(cfg: RunConfig, out: Path, args) -> int:
    cfg = _override_seed(cfg, args, "fields.seed")
    grid = harness.build_grid(cfg)
    kind, n, seed = cfg["fields.kind"], cfg["fields.n"], cfg["fields.seed"]
    if kind == "grf":
        batch = fields.grf_sample(fields.GrfParams(), grid.shape, n, seed)
    elif kind == "fractures":
        batch = [fields.synth_fractures(
            fields.FractureParams(count=cfg["truth.fractures.count"]), grid.shape, seed + i)
            for i in range(n)]
    elif kind == "channels":
        batch = [fields.synth_channels(
            fields.ChannelParams(count=cfg["truth.channels.count"],
                                 fraction_bounds=(0.05, 0.6)), grid.shape, seed + i)
            for i in range(n)]
    else:  # generator: raw [0,1] outputs, latents from file or the prior
        gen = harness.build_generator(cfg, grid)
        if gen.raw_fn is None:
            raise ConfigError(["fields.kind=generator requires a neural generator.kind"])
        if cfg["fields.latents"]:
            Z = read_gridfield(cfg["fields.latents"])
            if Z.shape[0] != gen.n_latent:
                raise ConfigError(
                    [f"latent matrix has {Z.shape[0]} rows, generator wants {gen.n_latent}"]
                )
            n = Z.shape[1]
        else:
            Z = sample_latent_prior(gen.n_latent, n, seed)
        batch = [gen.raw_fn(Z[:, j]) for j in range(n)]
    binary = cfg["fields.binary_format"]
    for i, field in enumerate(batch):
        write_gridfield(out / f"field_{i:04d}.gfld", field, binary=binary)
    print(f"wrote {len(batch)} {kind} fields to {out}")
    return 0


def _cmd_simulate(cfg: RunConfig, out: Path, args) -> int:
    cfg = _override_seed(cfg, args, "noise.seed")
    exp = harness.build_experiment(cfg)
    gen = harness.build_generator(cfg, exp.grid)
    truth_log10, z_true = harness.build_truth(cfg, exp.grid, gen)
    write_gridfield(out / "truth_log10K.gfld", truth_log10)
    if z_true is not None:
        write_gridfield(out / "truth_z.gfld", z_true.reshape(1, -1))
    d_clean = flowsim.run_forward(10.0 ** truth_log10, exp)
    d_obs = flowsim.add_noise(d_clean, cfg["noise.sigma"], cfg["noise.seed"])
    write_observations(out / "obs_clean.csv", d_clean)
    write_observations(out / "obs.csv", d_obs)
    print(f"simulated {d_obs.size} observations (sigma={cfg['noise.sigma']})")
    return 0


def _require_block(cfg: RunConfig, block: str) -> None:
    if not cfg.block_present(block):
        raise ConfigError([f"this command requires the '{block}' config block"])


def _cmd_invert_esmda(cfg: RunConfig, out: Path, args) -> int:
    cfg = _override_seed(cfg, args, "esmda.seed")
    _require_block(cfg, "esmda")
    harness.execute_run(cfg, out_dir=out, threads=args.threads)
    return 0


def _cmd_invert_gn(cfg: RunConfig, out: Path, args) -> int:
    cfg = _override_seed(cfg, args, "variational.seed")
    _require_block(cfg, "variational")
    harness.execute_run(cfg, out_dir=out, threads=args.threads)
    return 0


def _cmd_run(cfg: RunConfig, out: Path, args) -> int:
    for key in ("esmda.seed", "variational.seed"):
        if cfg.block_present(key.split(".")[0]):
            cfg = _override_seed(cfg, args, key)
    cfg.inversion_kind()
    harness.execute_run(cfg, out_dir=out, threads=args.threads)
    return 0


def _cmd_scan(cfg: RunConfig, out: Path, args) -> int:
    cfg = _override_seed(cfg, args, "truth.seed")
    exp = harness.build_experiment(cfg)
    gen = harness.build_generator(cfg, exp.grid)
    truth_log10, z_true = harness.build_truth(cfg, exp.grid, gen)
    if z_true is None:
        raise ConfigError(["scan-objective requires truth.kind=generator (needs z_ref)"])
    forward = harness.forward_from_log10(exp)
    d_obs = flowsim.add_noise(forward(truth_log10), cfg["noise.sigma"], cfg["noise.seed"])
    spec = varinv.ObjectiveSpec(
        d_obs=d_obs, error_var=np.full(d_obs.size, cfg["noise.sigma"] ** 2),
        prior_center=z_true,
    )
    scan = diagnostics.objective_surface(
        (cfg["scan.i"], cfg["scan.j"]), z_true, spec, lambda z: forward(gen(z)),
        lo=cfg["scan.lo"], hi=cfg["scan.hi"], step=cfg["scan.step"],
    )
    scan.save_csv(out / "scan.csv")
    low, cell = scan.minimum()
    print(f"scan {scan.values.shape} done; min L={low:.6g} at cell {cell}")
    return 0


def _cmd_semivariogram(cfg: RunConfig, out: Path, args) -> int:
    src = cfg["vario.input"]
    if src is None:
        raise ConfigError(["key 'vario.input' is required"])
    path = Path(src)
    files = sorted(path.glob("*.gfld")) if path.is_dir() else [path]
    if not files:
        raise ConfigError([f"no .gfld files under {path}"])
    sv = diagnostics.mean_semivariogram(
        (read_gridfield(f) for f in files), max_lag=cfg["vario.max_lag"]
    )
    sv.save_csv(out / "semivariogram.csv")
    print(f"semivariogram over {len(files)} field(s) written to {out / 'semivariogram.csv'}")
    return 0


def _cmd_metrics(cfg: RunConfig, out: Path, args) -> int:
    for key in ("metrics.a", "metrics.b"):
        if cfg[key] is None:
            raise ConfigError([f"key {key!r} is required"])
    value = diagnostics.rmse(read_gridfield(cfg["metrics.a"]), read_gridfield(cfg["metrics.b"]))
    with open(out / "metrics.csv", "w") as fh:
        fh.write("metric,value\n")
        fh.write(f"rmse,{value!r}\n")
    print(f"rmse={value!r}")
    return 0


def _cmd_nn_test(cfg: RunConfig, out: Path, args) -> int:
    for key in ("nn.real_dir", "nn.gen_dir"):
        if cfg[key] is None:
            raise ConfigError([f"key {key!r} is required"])
    real = [read_gridfield(f) for f in sorted(Path(cfg["nn.real_dir"]).glob("*.gfld"))]
    gen = [read_gridfield(f) for f in sorted(Path(cfg["nn.gen_dir"]).glob("*.gfld"))]
    if not real or not gen:
        raise ConfigError(["both nn.real_dir and nn.gen_dir must contain .gfld files"])
    acc = diagnostics.nn_two_sample_accuracy(real, gen)
    with open(out / "nn.csv", "w") as fh:
        fh.write("metric,value\n")
        fh.write(f"nn_accuracy,{acc!r}\n")
    print(f"nn_accuracy={acc!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
