"""The adaptive weighted super-resolution network family.

A model is a flat named-parameter registry plus fixed wiring: a 3x3
feature-extraction conv, a stack of local fusion blocks (each a run of
wide-activation residual units with learnable branch weights, fused by
a bottleneck conv under a weighted block skip), and a multi-scale
reconstruction head whose branches carry learnable scalar weights and
sit on top of a conv+shuffle global skip from the input image.

Configuration switches reproduce the ablation variants: plain residual
units (fixed unit weights, no extra parameters), fusion bypass, and a
single-kernel reconstruction head.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, replace
from typing import BinaryIO, Iterator

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import (
    BadMagicError,
    CheckpointError,
    ConfigError,
    RegistryMismatchError,
    ShapeError,
    TruncatedError,
    VersionError,
)

VALID_SCALES = (2, 3, 4, 8)
RU_KINDS = ("basic", "adaptive")


@dataclass(frozen=True)
class ModelConfig:
    scale: int = 2
    n_lfb: int = 1
    n_awru: int = 4
    c_feat: int = 32
    c_wide: int = 128
    awms_kernels: tuple[int, ...] = (3, 5, 7, 9)
    ru_kind: str = "adaptive"
    use_lrfu: bool = True
    use_awms: bool = True
    init_unit_weight: float = 1.0
    init_branch_weight: float = 0.25

    def __post_init__(self):
        if self.scale not in VALID_SCALES:
            raise ConfigError(f"scale must be one of {VALID_SCALES}, got {self.scale}")
        for name in ("n_lfb", "n_awru", "c_feat", "c_wide"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        kernels = tuple(self.awms_kernels)
        object.__setattr__(self, "awms_kernels", kernels)
        if not kernels:
            raise ConfigError("awms_kernels must not be empty")
        for k in kernels:
            if k < 1 or k % 2 == 0:
                raise ConfigError(f"reconstruction kernel sizes must be odd, got {k}")
        if len(set(kernels)) != len(kernels):
            raise ConfigError(f"duplicate reconstruction kernels: {kernels}")
        if self.ru_kind not in RU_KINDS:
            raise ConfigError(f"ru_kind must be one of {RU_KINDS}, got {self.ru_kind!r}")

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "n_lfb": self.n_lfb,
            "n_awru": self.n_awru,
            "c_feat": self.c_feat,
            "c_wide": self.c_wide,
            "awms_kernels": list(self.awms_kernels),
            "ru_kind": self.ru_kind,
            "use_lrfu": self.use_lrfu,
            "use_awms": self.use_awms,
            "init_unit_weight": self.init_unit_weight,
            "init_branch_weight": self.init_branch_weight,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        d = dict(d)
        if "awms_kernels" in d:
            d["awms_kernels"] = tuple(d["awms_kernels"])
        return cls(**d)


# Published variants: (n_lfb, n_awru, c_feat, c_wide).
PRESETS = {
    "awsrn": (4, 4, 32, 128),
    "awsrn-m": (3, 4, 32, 128),
    "awsrn-s": (1, 4, 32, 128),
    "awsrn-sd": (1, 8, 16, 128),
}


def preset_config(name: str, scale: int = 2, **overrides) -> ModelConfig:
    key = name.lower()
    if key not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r} (valid: {', '.join(sorted(PRESETS))})"
        )
    n_lfb, n_awru, c_feat, c_wide = PRESETS[key]
    return ModelConfig(
        scale=scale, n_lfb=n_lfb, n_awru=n_awru, c_feat=c_feat, c_wide=c_wide, **overrides
    )


@dataclass(frozen=True)
class ConvSpec:
    """One convolution layer: used for init, counting, and wiring."""

    name: str
    c_in: int
    c_out: int
    k: int


def conv_layout(config: ModelConfig) -> list[ConvSpec]:
    """Every conv in the network, in registry order."""
    c = config.c_feat
    out = [ConvSpec("head", 3, c, 3)]
    for m in range(config.n_lfb):
        for r in range(config.n_awru):
            out.append(ConvSpec(f"lfb{m}.ru{r}.conv1", c, config.c_wide, 3))
            out.append(ConvSpec(f"lfb{m}.ru{r}.conv2", config.c_wide, c, 3))
        if config.use_lrfu:
            out.append(ConvSpec(f"lfb{m}.fuse", config.n_awru * c, c, 3))
    c_up = 3 * config.scale * config.scale
    if config.use_awms:
        for k in config.awms_kernels:
            out.append(ConvSpec(f"rec.k{k}", c, c_up, k))
    else:
        out.append(ConvSpec("rec.single", c, c_up, 3))
    out.append(ConvSpec("up", 3, c_up, 3))
    return out


def scalar_layout(config: ModelConfig) -> list[str]:
    """Every adaptive scalar weight, in registry order."""
    names = []
    for m in range(config.n_lfb):
        if config.ru_kind == "adaptive":
            for r in range(config.n_awru):
                names.append(f"lfb{m}.ru{r}.w_res")
                names.append(f"lfb{m}.ru{r}.w_x")
        if config.use_lrfu:
            names.append(f"lfb{m}.w_res")
            names.append(f"lfb{m}.w_x")
    if config.use_awms:
        for k in config.awms_kernels:
            names.append(f"rec.k{k}.alpha")
    return names


def expected_registry(config: ModelConfig) -> list[tuple[str, tuple[int, int, int, int]]]:
    """(name, shape) for every parameter, in the canonical order.

    A pure function of the config; checkpoint compatibility rests on it.
    """
    entries = []
    for spec in conv_layout(config):
        entries.append((f"{spec.name}.v", (spec.c_out, spec.c_in, spec.k, spec.k)))
        entries.append((f"{spec.name}.g", (spec.c_out, 1, 1, 1)))
        entries.append((f"{spec.name}.b", (spec.c_out, 1, 1, 1)))
    for name in scalar_layout(config):
        entries.append((name, (1, 1, 1, 1)))
    return entries


class ParameterRegistry:
    """Insertion-ordered mapping of unique parameter names to parameters."""

    def __init__(self):
        self._items: dict[str, Parameter] = {}

    def add(self, param: Parameter) -> Parameter:
        if param.name in self._items:
            raise ConfigError(f"duplicate parameter name {param.name!r}")
        self._items[param.name] = param
        return param

    def __getitem__(self, name: str) -> Parameter:
        return self._items[name]

    def __contains__(self, name: str) -> bool:
        return name in self._items

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._items.values())

    def __len__(self) -> int:
        return len(self._items)

    def names(self) -> list[str]:
        return list(self._items)

    def zero_grads(self) -> None:
        for p in self._items.values():
            p.zero_grad()


def build(config: ModelConfig, seed: int = 0, dtype=np.float32) -> "AwsrnModel":
    """Initialize a model from a seed.

    Conv directions draw zero-mean uniform with bound 1/sqrt(fan_in);
    gains start at the per-filter norm so the effective weight equals
    the raw draw; biases start at zero. Unit branch weights start at
    ``init_unit_weight`` and reconstruction branch weights at
    ``init_branch_weight``.
    """
    rng = np.random.default_rng(seed)
    params = ParameterRegistry()
    for spec in conv_layout(config):
        fan_in = spec.c_in * spec.k * spec.k
        bound = 1.0 / np.sqrt(fan_in)
        v = rng.uniform(-bound, bound, size=(spec.c_out, spec.c_in, spec.k, spec.k))
        v = v.astype(dtype)
        norms = np.sqrt(np.sum(v.astype(np.float64) ** 2, axis=(1, 2, 3))).astype(dtype)
        if np.any(norms == 0):
            raise ValueError(f"zero-norm filter drawn for {spec.name}")
        params.add(Parameter(f"{spec.name}.v", v))
        params.add(Parameter(f"{spec.name}.g", norms.reshape(spec.c_out, 1, 1, 1)))
        params.add(Parameter(f"{spec.name}.b", np.zeros((spec.c_out, 1, 1, 1), dtype=dtype)))
    for name in scalar_layout(config):
        value = config.init_branch_weight if name.endswith(".alpha") else config.init_unit_weight
        params.add(Parameter(name, np.full((1, 1, 1, 1), value, dtype=dtype)))
    return AwsrnModel(config, params)


class AwsrnModel:
    """A built network: config plus its parameter registry."""

    def __init__(self, config: ModelConfig, params: ParameterRegistry):
        self.config = config
        self.params = params

    @property
    def dtype(self):
        return next(iter(self.params)).data.dtype

    def _conv(self, name: str, x: Tensor) -> Tensor:
        w = ad.weight_norm_apply(self.params[f"{name}.v"], self.params[f"{name}.g"])
        return ad.conv2d(x, w, self.params[f"{name}.b"])

    def extract(self, ilr: Tensor) -> Tensor:
        if ilr.shape[1] != 3:
            raise ShapeError(f"expected a 3-channel input, got shape {ilr.shape}")
        return self._conv("head", ilr)

    def awru(self, x: Tensor, m: int, r: int) -> Tensor:
        prefix = f"lfb{m}.ru{r}"
        res = self._conv(f"{prefix}.conv1", x)
        res = ad.relu(res)
        res = self._conv(f"{prefix}.conv2", res)
        if self.config.ru_kind == "adaptive":
            return ad.weighted_add(
                res, x, self.params[f"{prefix}.w_res"], self.params[f"{prefix}.w_x"]
            )
        return ad.add(res, x)

    def lfb(self, x: Tensor, m: int) -> Tensor:
        outs = []
        cur = x
        for r in range(self.config.n_awru):
            cur = self.awru(cur, m, r)
            outs.append(cur)
        if not self.config.use_lrfu:
            return cur
        fused = self._conv(f"lfb{m}.fuse", ad.concat_channels(outs))
        return ad.weighted_add(
            fused, x, self.params[f"lfb{m}.w_res"], self.params[f"lfb{m}.w_x"]
        )

    def body(self, x0: Tensor) -> Tensor:
        x = x0
        for m in range(self.config.n_lfb):
            x = self.lfb(x, m)
        return x

    def upsample_skip(self, ilr: Tensor) -> Tensor:
        return ad.pixel_shuffle(self._conv("up", ilr), self.config.scale)

    def reconstruct(self, xn: Tensor, ilr: Tensor) -> Tensor:
        if xn.shape[0] != ilr.shape[0] or xn.shape[2:] != ilr.shape[2:]:
            raise ShapeError(
                f"feature/input mismatch: features {xn.shape} vs image {ilr.shape}"
            )
        out = self.upsample_skip(ilr)
        if self.config.use_awms:
            for k in self.config.awms_kernels:
                branch = ad.pixel_shuffle(self._conv(f"rec.k{k}", xn), self.config.scale)
                out = ad.add(out, ad.scale(branch, self.params[f"rec.k{k}.alpha"]))
        else:
            branch = ad.pixel_shuffle(self._conv("rec.single", xn), self.config.scale)
            out = ad.add(out, branch)
        return out

    def forward(self, ilr: Tensor) -> Tensor:
        """Full network pass; output is not clamped."""
        x0 = self.extract(ilr)
        xn = self.body(x0)
        return self.reconstruct(xn, ilr)

    def infer(self, ilr: Tensor) -> Tensor:
        """Inference entry point: forward pass clamped to [0, 1]."""
        if ilr.dtype != self.dtype:
            ilr = Tensor(ilr.data.astype(self.dtype))
        out = self.forward(ilr)
        return Tensor(np.clip(out.data, 0.0, 1.0))


# ---------------------------------------------------------------------------
# checkpoint persistence
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"AWSR"
CHECKPOINT_VERSION = 1
_DTYPE_TAGS = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}
_TAG_DTYPES = {1: np.dtype(np.float32), 2: np.dtype(np.float64)}


def _config_json(config: ModelConfig) -> bytes:
    return json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":")).encode()


def save_checkpoint(model: AwsrnModel, path) -> None:
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    cfg = _config_json(model.config)
    buf.write(struct.pack("<I", len(cfg)))
    buf.write(cfg)
    buf.write(struct.pack("<I", len(model.params)))
    for p in model.params:
        name = p.name.encode()
        buf.write(struct.pack("<I", len(name)))
        buf.write(name)
        buf.write(struct.pack("<B", _DTYPE_TAGS[p.data.dtype]))
        buf.write(struct.pack("<B", p.data.ndim))
        buf.write(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
        buf.write(np.ascontiguousarray(p.data, dtype=p.data.dtype.newbyteorder("<")).tobytes())
    try:
        with open(path, "wb") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc


class _Reader:
    def __init__(self, fh: BinaryIO):
        self._fh = fh
        self.context = "header"

    def read(self, n: int) -> bytes:
        data = self._fh.read(n)
        if len(data) != n:
            raise TruncatedError(f"checkpoint truncated while reading {self.context}")
        return data

    def u32(self) -> int:
        return struct.unpack("<I", self.read(4))[0]

    def u8(self) -> int:
        return struct.unpack("<B", self.read(1))[0]


def load_checkpoint(path, expect_config: ModelConfig | None = None) -> AwsrnModel:
    """Read a checkpoint, validating structure against its stored config.

    ``expect_config``, when given, must match the stored config exactly;
    use it to reject loading one variant's weights into another.
    """
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    with fh:
        r = _Reader(fh)
        magic = r.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise BadMagicError(f"not a checkpoint file: magic {magic!r}")
        version = r.u32()
        if version != CHECKPOINT_VERSION:
            raise VersionError(
                f"unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )
        r.context = "config block"
        cfg_raw = r.read(r.u32())
        try:
            config = ModelConfig.from_dict(json.loads(cfg_raw))
        except (json.JSONDecodeError, TypeError, ConfigError) as exc:
            raise CheckpointError(f"invalid config block: {exc}") from exc
        if expect_config is not None and config != expect_config:
            raise RegistryMismatchError(
                "stored config does not match the expected one: "
                f"{config.to_dict()} vs {expect_config.to_dict()}"
            )

        r.context = "parameter count"
        n_params = r.u32()
        expected = expected_registry(config)
        if n_params != len(expected):
            raise RegistryMismatchError(
                f"checkpoint stores {n_params} parameters, config implies {len(expected)}"
            )
        params = ParameterRegistry()
        for i, (want_name, want_shape) in enumerate(expected):
            r.context = f"parameter {want_name!r}"
            name_len = r.u32()
            name = r.read(name_len).decode()
            if name != want_name:
                raise RegistryMismatchError(
                    f"parameter #{i} is named {name!r}, expected {want_name!r}"
                )
            r.context = f"parameter {name!r}"
            tag = r.u8()
            if tag not in _TAG_DTYPES:
                raise CheckpointError(f"unknown dtype tag {tag} for parameter {name!r}")
            dtype = _TAG_DTYPES[tag]
            rank = r.u8()
            dims = struct.unpack(f"<{rank}I", r.read(4 * rank))
            if dims != want_shape:
                raise RegistryMismatchError(
                    f"parameter {name!r} has shape {dims}, expected {want_shape}"
                )
            count = int(np.prod(dims))
            raw = r.read(count * dtype.itemsize)
            arr = np.frombuffer(raw, dtype=dtype.newbyteorder("<")).astype(dtype).reshape(dims)
            params.add(Parameter(name, arr))
        if fh.read(1):
            raise CheckpointError("trailing data after the last parameter")
    return AwsrnModel(config, params)


def pruned_config(config: ModelConfig, keep_kernels: tuple[int, ...]) -> ModelConfig:
    return replace(config, awms_kernels=keep_kernels)
