"""Run-configuration parsing: flat ``key=value`` text with dotted sections.

Lines are ``section.key=value``; ``#`` starts a comment; blank lines are
ignored. Unknown keys, type mismatches and structural problems are all
collected and reported together with line numbers. ``meta.*`` keys are
accepted and ignored so a run manifest is itself a valid config.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .varinv import GAUSS_NEWTON, LEVENBERG_MARQUARDT

# key -> (type tag, default); None default means "unset"
SCHEMA: dict[str, tuple[str, object]] = {
    "grid.rows": ("int", 96),
    "grid.cols": ("int", 96),
    "grid.cell_size": ("float", 5.0),
    "grid.thickness": ("float", 10.0),
    "boundary.west_head": ("float", 0.0),
    "boundary.east_head": ("float", -10.0),
    "sources.recharge": ("float", 0.001),
    "experiment.mode": ("choice:static-heads,tomography", "static-heads"),
    "experiment.layout": ("str", "lattice:4"),
    "experiment.pumping_rate": ("float", None),
    "truth.kind": ("choice:file,generator,grf,fractures,channels", "grf"),
    "truth.path": ("path", None),
    "truth.seed": ("int", 0),
    "truth.fractures.count": ("int", 12),
    "truth.channels.count": ("int", 4),
    "noise.sigma": ("float", 0.02),
    "noise.seed": ("int", 0),
    "generator.kind": ("choice:table1,table2,wggw,linear", "linear"),
    "generator.weights": ("path", None),
    "generator.latent_shape": ("shape", None),
    "generator.widths": ("ints", None),
    "generator.n_latent": ("int", 36),
    "generator.seed": ("int", 0),
    "scaling.log10_lo": ("float", -1.0),
    "scaling.log10_hi": ("float", 1.0),
    "esmda.n_a": ("int", None),
    "esmda.n_r": ("int", None),
    "esmda.energy": ("float", 0.99),
    "esmda.seed": ("int", 0),
    "variational.mode": (f"choice:{GAUSS_NEWTON},{LEVENBERG_MARQUARDT}", None),
    "variational.fd_step": ("float", 1e-3),
    "variational.max_iterations": ("int", 30),
    "variational.grad_tol": ("float", 1e-6),
    "variational.seed": ("int", 0),
    "sweep.noise_sigma": ("floats", None),
    "sweep.pumping_rate": ("floats", None),
    "fields.kind": ("choice:grf,fractures,channels,generator", "grf"),
    "fields.n": ("int", 16),
    "fields.seed": ("int", 0),
    "fields.binary_format": ("bool", False),
    "fields.latents": ("path", None),
    "scan.i": ("int", 0),
    "scan.j": ("int", 1),
    "scan.lo": ("float", -5.0),
    "scan.hi": ("float", 5.0),
    "scan.step": ("float", 0.1),
    "vario.input": ("path", None),
    "vario.max_lag": ("int", 60),
    "metrics.a": ("path", None),
    "metrics.b": ("path", None),
    "nn.real_dir": ("path", None),
    "nn.gen_dir": ("path", None),
    "output.dir": ("str", None),
    "threads": ("int", None),
}

INVERSION_BLOCKS = ("esmda", "variational")
# a block participates in a run when any of its activation keys is set
ACTIVATION_KEYS = {
    "esmda": ("esmda.n_a", "esmda.n_r"),
    "variational": ("variational.mode",),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    explicit: frozenset = frozenset()

    def __getitem__(self, key: str):
        return self.values[key]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values

    def block_present(self, prefix: str) -> bool:
        return any(self.values[k] is not None for k in ACTIVATION_KEYS[prefix])

    def inversion_kind(self) -> str:
        present = [b for b in INVERSION_BLOCKS if self.block_present(b)]
        if len(present) != 1:
            raise ConfigError(
                [f"exactly one inversion block required, found {present or 'none'}"]
            )
        return present[0]

    def with_values(self, **overrides) -> "RunConfig":
        """Copy with dotted keys overridden (marks them explicit)."""
        vals = dict(self.values)
        for key, value in overrides.items():
            dotted = key.replace("__", ".")
            if dotted not in SCHEMA:
                raise KeyError(dotted)
            vals[dotted] = value
        return RunConfig(values=vals,
                         explicit=self.explicit | {k.replace("__", ".") for k in overrides})

    def serialize(self) -> str:
        lines = []
        for key in sorted(self.values):
            value = self.values[key]
            if value is None:
                continue
            lines.append(f"{key}={_format_value(SCHEMA[key][0], value)}")
        return "\n".join(lines) + "\n"


def _format_value(kind: str, value) -> str:
    if kind == "bool":
        return "true" if value else "false"
    if kind == "shape":
        return f"{value[0]}x{value[1]}"
    if kind in ("ints", "floats"):
        return ",".join(repr(v) if kind == "floats" else str(v) for v in value)
    if kind == "float":
        return repr(float(value))
    return str(value)


def _convert(kind: str, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "str":
        return raw
    if kind == "path":
        return raw
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == "shape":
        parts = raw.lower().split("x")
        if len(parts) != 2:
            raise ValueError(f"expected ROWSxCOLS, got {raw!r}")
        return (int(parts[0]), int(parts[1]))
    if kind == "ints":
        return tuple(int(p) for p in raw.split(","))
    if kind == "floats":
        return tuple(float(p) for p in raw.split(","))
    if kind.startswith("choice:"):
        allowed = kind.split(":", 1)[1].split(",")
        if raw not in allowed:
            raise ValueError(f"must be one of {allowed}, got {raw!r}")
        return raw
    raise AssertionError(f"unhandled schema kind {kind}")


def parse_config(text: str, base_dir=None) -> RunConfig:
    """Parse and validate config text; raises ConfigError listing every issue."""
    problems: list[str] = []
    values = {key: default for key, (_, default) in SCHEMA.items()}
    explicit: set[str] = set()

    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            problems.append(f"line {lineno}: expected key=value, got {stripped!r}")
            continue
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key.startswith("meta."):
            continue
        if key not in SCHEMA:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        kind, _ = SCHEMA[key]
        try:
            values[key] = _convert(kind, raw)
        except ValueError as exc:
            problems.append(f"line {lineno}: key {key!r}: {exc}")
            continue
        explicit.add(key)

    both = [b for b in INVERSION_BLOCKS
            if any(values[k] is not None for k in ACTIVATION_KEYS[b])]
    if len(both) > 1:
        problems.append("config sets more than one inversion block: " + ", ".join(both))
    if values["esmda.n_a"] is not None or values["esmda.n_r"] is not None:
        for key in ("esmda.n_a", "esmda.n_r"):
            if values[key] is None:
                problems.append(f"key {key!r} is required for an esmda block")

    if (values["experiment.mode"] == "tomography"
            and values["experiment.pumping_rate"] is None):
        problems.append("key 'experiment.pumping_rate' is required for tomography")

    for key in ("truth.path", "generator.weights", "fields.latents", "vario.input",
                "metrics.a", "metrics.b", "nn.real_dir", "nn.gen_dir"):
        path = values[key]
        if path is not None:
            resolved = Path(base_dir or ".") / path
            if not resolved.exists():
                problems.append(f"key {key!r}: file not found: {path}")
            else:
                values[key] = str(resolved)

    if values["truth.kind"] == "file" and values["truth.path"] is None:
        problems.append("key 'truth.path' is required when truth.kind=file")
    if values["generator.kind"] == "wggw":
        if values["generator.weights"] is None:
            problems.append("key 'generator.weights' is required when generator.kind=wggw")
        if values["generator.latent_shape"] is None:
            problems.append("key 'generator.latent_shape' is required when generator.kind=wggw")

    if problems:
        raise ConfigError(problems)
    return RunConfig(values=values, explicit=frozenset(explicit))


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)
