"""Deconvolutional generator inference and latent-space sampling.

A generator is an ordered stack of transposed convolutions (kernel 4,
stride 2, padding 1 — each exactly doubles the spatial size), instance
normalizations and pointwise activations, mapping a small single-channel
latent map to a raster in (0, 1). Weights are trained elsewhere and loaded
from the WGGW interchange file.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import instance_norm2d, tconv2d_k4s2p1
from .errors import NumericalError

WEIGHTS_MAGIC = b"WGGW"
WEIGHTS_VERSION = 1

_TCONV, _INORM, _RELU, _LEAKYRELU, _SIGMOID = range(5)


@dataclass(frozen=True)
class TransposedConv:
    in_channels: int
    out_channels: int
    kernel: int = 4
    stride: int = 2
    padding: int = 1
    dilation: int = 1

    def __post_init__(self):
        if (self.kernel, self.stride, self.padding, self.dilation) != (4, 2, 1, 1):
            raise ValueError("only kernel=4, stride=2, padding=1, dilation=1 supported")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")


@dataclass(frozen=True)
class InstanceNorm:
    channels: int
    epsilon: float = 1e-5


@dataclass(frozen=True)
class Activation:
    kind: str  # "relu" | "leakyrelu" | "sigmoid"
    negative_slope: float = 0.2

    def __post_init__(self):
        if self.kind not in ("relu", "leakyrelu", "sigmoid"):
            raise ValueError(f"unknown activation {self.kind!r}")


Layer = TransposedConv | InstanceNorm | Activation


@dataclass(frozen=True)
class GeneratorSpec:
    latent_shape: tuple[int, int]  # single-channel latent map
    layers: tuple[Layer, ...]

    def __post_init__(self):
        h, w = self.latent_shape
        if h < 1 or w < 1:
            raise ValueError(f"bad latent shape {self.latent_shape}")
        channels = 1
        for i, layer in enumerate(self.layers):
            if isinstance(layer, TransposedConv):
                if layer.in_channels != channels:
                    raise ValueError(
                        f"layer {i}: expects {layer.in_channels} channels, gets {channels}"
                    )
                channels = layer.out_channels
            elif isinstance(layer, InstanceNorm) and layer.channels != channels:
                raise ValueError(
                    f"layer {i}: instance norm over {layer.channels} channels, gets {channels}"
                )

    @property
    def n_latent(self) -> int:
        return self.latent_shape[0] * self.latent_shape[1]

    def layer_shapes(self) -> list[tuple[int, int, int]]:
        """(channels, height, width) after each layer, input included first."""
        c, h, w = 1, *self.latent_shape
        shapes = [(c, h, w)]
        for layer in self.layers:
            if isinstance(layer, TransposedConv):
                c, h, w = layer.out_channels, 2 * h, 2 * w
            shapes.append((c, h, w))
        return shapes

    @property
    def output_shape(self) -> tuple[int, int]:
        c, h, w = self.layer_shapes()[-1]
        if c != 1:
            raise ValueError(f"generator output has {c} channels, expected 1")
        return (h, w)


def gaussian_generator(widths: tuple[int, ...] = (512, 256, 128)) -> GeneratorSpec:
    """4 transposed-conv blocks, 6x6 latent -> 96x96 raster."""
    return _stacked_generator((6, 6), widths)


def channel_generator(widths: tuple[int, ...] = (512, 256, 128, 64)) -> GeneratorSpec:
    """5 transposed-conv blocks, 3x3 latent -> 96x96 raster."""
    return _stacked_generator((3, 3), widths)


def _stacked_generator(latent_shape, widths) -> GeneratorSpec:
    layers: list[Layer] = []
    channels = (1,) + tuple(widths)
    for cin, cout in zip(channels[:-1], channels[1:]):
        layers += [TransposedConv(cin, cout), InstanceNorm(cout), Activation("relu")]
    layers += [TransposedConv(channels[-1], 1), Activation("sigmoid")]
    return GeneratorSpec(latent_shape=tuple(latent_shape), layers=tuple(layers))


class WeightStore:
    """Per-layer parameter blocks (float32), aligned with a GeneratorSpec.

    Transposed convolutions carry (kernel[in, out, 4, 4], bias[out]);
    instance norms carry (scale[c], shift[c]); activations carry nothing.
    """

    def __init__(self, blocks: list[tuple[np.ndarray, ...]]):
        self.blocks = [tuple(np.asarray(a, dtype=np.float32) for a in blk) for blk in blocks]

    @classmethod
    def zeros(cls, spec: GeneratorSpec) -> "WeightStore":
        return cls._filled(spec, lambda shape: np.zeros(shape, dtype=np.float32))

    @classmethod
    def random(cls, spec: GeneratorSpec, seed: int, scale: float = 0.05) -> "WeightStore":
        rng = np.random.default_rng(seed)
        return cls._filled(
            spec, lambda shape: rng.normal(0.0, scale, shape).astype(np.float32)
        )

    @classmethod
    def _filled(cls, spec, make) -> "WeightStore":
        blocks = []
        for layer in spec.layers:
            if isinstance(layer, TransposedConv):
                blocks.append(
                    (make((layer.in_channels, layer.out_channels, 4, 4)),
                     make((layer.out_channels,)))
                )
            elif isinstance(layer, InstanceNorm):
                blocks.append(
                    (np.ones(layer.channels, dtype=np.float32),
                     np.zeros(layer.channels, dtype=np.float32))
                )
            else:
                blocks.append(())
        return cls(blocks)

    def validate(self, spec: GeneratorSpec) -> None:
        if len(self.blocks) != len(spec.layers):
            raise ValueError(
                f"{len(self.blocks)} weight blocks for {len(spec.layers)} layers"
            )
        for i, (layer, blk) in enumerate(zip(spec.layers, self.blocks)):
            if isinstance(layer, TransposedConv):
                want = (layer.in_channels, layer.out_channels, 4, 4)
                if len(blk) != 2 or blk[0].shape != want or blk[1].shape != (layer.out_channels,):
                    raise ValueError(f"layer {i}: kernel/bias blocks do not match {want}")
            elif isinstance(layer, InstanceNorm):
                if len(blk) != 2 or any(b.shape != (layer.channels,) for b in blk):
                    raise ValueError(f"layer {i}: instance-norm blocks must be ({layer.channels},)")
            elif blk:
                raise ValueError(f"layer {i}: activation layers carry no parameters")


def generate(spec: GeneratorSpec, weights: WeightStore, z: np.ndarray) -> np.ndarray:
    """Deterministic forward pass of the generator for one latent vector."""
    weights.validate(spec)
    z = np.asarray(z, dtype=np.float64)
    if z.size != spec.n_latent:
        raise ValueError(f"latent size {z.size} does not match spec {spec.latent_shape}")
    # column slices of latent ensembles arrive strided; the kernels want C-order
    x = np.ascontiguousarray(z.ravel()).reshape(1, *spec.latent_shape)

    # overflow is reported via NumericalError below, not as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        for i, (layer, blk) in enumerate(zip(spec.layers, weights.blocks)):
            if isinstance(layer, TransposedConv):
                x = tconv2d_k4s2p1(x, blk[0].astype(np.float64), blk[1].astype(np.float64))
            elif isinstance(layer, InstanceNorm):
                x = instance_norm2d(
                    x, layer.epsilon, blk[0].astype(np.float64), blk[1].astype(np.float64)
                )
            elif layer.kind == "relu":
                x = np.maximum(x, 0.0)
            elif layer.kind == "leakyrelu":
                x = np.where(x >= 0.0, x, layer.negative_slope * x)
            else:
                x = np.where(
                    x >= 0.0, 1.0 / (1.0 + np.exp(-x)), np.exp(x) / (1.0 + np.exp(x))
                )
            if not np.all(np.isfinite(x)):
                raise NumericalError(
                    f"non-finite values after layer {i} ({type(layer).__name__})"
                )
    if x.shape[0] != 1:
        raise ValueError(f"generator output has {x.shape[0]} channels, expected 1")
    return x[0]


@dataclass(frozen=True)
class FieldScaling:
    """Affine map from generator output [0,1] to log10-conductivity."""

    log10_lo: float = -1.0
    log10_hi: float = 1.0
    slack: float = 1e-9

    def log10_field(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, dtype=np.float64)
        if g.min() < -self.slack or g.max() > 1.0 + self.slack:
            raise ValueError(
                f"generator output outside [0,1] beyond slack: [{g.min()}, {g.max()}]"
            )
        return self.log10_lo + (self.log10_hi - self.log10_lo) * g

    def to_conductivity(self, g: np.ndarray) -> np.ndarray:
        return 10.0 ** self.log10_field(g)

    def from_conductivity(self, K: np.ndarray) -> np.ndarray:
        return (np.log10(K) - self.log10_lo) / (self.log10_hi - self.log10_lo)


def to_conductivity(g: np.ndarray, scaling: FieldScaling = FieldScaling()) -> np.ndarray:
    """Conductivity (m/d) from a [0,1] raster: K = 10^(lo + (hi-lo) g)."""
    return scaling.to_conductivity(g)


def sample_latent_prior(n_latent: int, n_real: int, seed: int) -> np.ndarray:
    """(n_latent, n_real) matrix of i.i.d. standard Gaussian draws."""
    if n_latent < 1 or n_real < 1:
        raise ValueError("n_latent and n_real must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n_latent, n_real))


def save_weights(spec: GeneratorSpec, weights: WeightStore, path) -> None:
    """Write the WGGW interchange file (all integers/floats little-endian)."""
    weights.validate(spec)
    with open(Path(path), "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<II", WEIGHTS_VERSION, len(spec.layers)))
        for layer, blk in zip(spec.layers, weights.blocks):
            if isinstance(layer, TransposedConv):
                fh.write(struct.pack("<BIIII", _TCONV, layer.in_channels,
                                     layer.out_channels, 4, 4))
                fh.write(blk[0].astype("<f4").tobytes(order="C"))
                fh.write(blk[1].astype("<f4").tobytes(order="C"))
            elif isinstance(layer, InstanceNorm):
                fh.write(struct.pack("<BIIII", _INORM, layer.channels, 0, 0, 0))
                fh.write(blk[0].astype("<f4").tobytes(order="C"))
                fh.write(blk[1].astype("<f4").tobytes(order="C"))
            else:
                code = {"relu": _RELU, "leakyrelu": _LEAKYRELU, "sigmoid": _SIGMOID}[layer.kind]
                fh.write(struct.pack("<BIIII", code, 0, 0, 0, 0))


def load_weights(path) -> tuple[tuple[Layer, ...], WeightStore]:
    """Read a WGGW file back into layer descriptors and parameter blocks."""
    with open(Path(path), "rb") as fh:
        if fh.read(4) != WEIGHTS_MAGIC:
            raise ValueError(f"{path}: not a WGGW weights file")
        version, n_layers = struct.unpack("<II", fh.read(8))
        if version != WEIGHTS_VERSION:
            raise ValueError(f"{path}: unsupported WGGW version {version}")
        layers: list[Layer] = []
        blocks: list[tuple[np.ndarray, ...]] = []
        for i in range(n_layers):
            code, cin, cout, kh, kw = struct.unpack("<BIIII", fh.read(17))
            if code == _TCONV:
                if (kh, kw) != (4, 4):
                    raise ValueError(f"{path}: layer {i} kernel {kh}x{kw} unsupported")
                kern = _read_f32(fh, cin * cout * 16, path).reshape(cin, cout, 4, 4)
                bias = _read_f32(fh, cout, path)
                layers.append(TransposedConv(cin, cout))
                blocks.append((kern, bias))
            elif code == _INORM:
                scale = _read_f32(fh, cin, path)
                shift = _read_f32(fh, cin, path)
                layers.append(InstanceNorm(cin))
                blocks.append((scale, shift))
            elif code in (_RELU, _LEAKYRELU, _SIGMOID):
                kind = {_RELU: "relu", _LEAKYRELU: "leakyrelu", _SIGMOID: "sigmoid"}[code]
                layers.append(Activation(kind))
                blocks.append(())
            else:
                raise ValueError(f"{path}: unknown layer code {code} at layer {i}")
    return tuple(layers), WeightStore(blocks)


def load_generator(path, latent_shape: tuple[int, int]) -> tuple[GeneratorSpec, WeightStore]:
    layers, weights = load_weights(path)
    return GeneratorSpec(latent_shape=tuple(latent_shape), layers=layers), weights


def _read_f32(fh, count: int, path) -> np.ndarray:
    raw = fh.read(4 * count)
    if len(raw) != 4 * count:
        raise ValueError(f"{path}: truncated WGGW parameter block")
    return np.frombuffer(raw, dtype="<f4").copy()
