"""Model cost accounting, adaptive-weight inspection, and branch pruning.

Multi-Adds counts one multiply per kernel tap per output position for
every convolution; the whole network runs on the LR grid before the
final shuffle, so positions = out_w * out_h / s^2. Biases, gains,
scalar weights, and pixel shuffles contribute no multiplies under this
convention.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .autodiff import Parameter
from .errors import PruneError
from .model import (
    AwsrnModel,
    ModelConfig,
    ParameterRegistry,
    conv_layout,
    expected_registry,
    scalar_layout,
)

DEFAULT_OUT_W = 1280
DEFAULT_OUT_H = 720


@dataclass(frozen=True)
class LayerCost:
    name: str
    params: int
    mults: int


@dataclass(frozen=True)
class ComplexityReport:
    config: ModelConfig
    out_w: int
    out_h: int
    layers: tuple[LayerCost, ...]

    @property
    def total_params(self) -> int:
        return sum(l.params for l in self.layers)

    @property
    def multi_adds(self) -> int:
        return sum(l.mults for l in self.layers)


def complexity_report(
    config: ModelConfig, out_w: int = DEFAULT_OUT_W, out_h: int = DEFAULT_OUT_H
) -> ComplexityReport:
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output size must be positive, got {out_w}x{out_h}")
    s2 = config.scale * config.scale
    pixels = out_w * out_h
    layers = []
    for spec in conv_layout(config):
        n_weights = spec.c_out * spec.c_in * spec.k * spec.k
        taps = n_weights * pixels
        mults = taps // s2 if taps % s2 == 0 else round(taps / s2)
        layers.append(LayerCost(spec.name, n_weights + 2 * spec.c_out, mults))
    for name in scalar_layout(config):
        layers.append(LayerCost(name, 1, 0))
    return ComplexityReport(config, out_w, out_h, tuple(layers))


def count_params(model: AwsrnModel) -> int:
    return complexity_report(model.config).total_params


def count_multi_adds(
    model: AwsrnModel, out_w: int = DEFAULT_OUT_W, out_h: int = DEFAULT_OUT_H
) -> int:
    return complexity_report(model.config, out_w, out_h).multi_adds


@dataclass(frozen=True)
class UnitWeights:
    depth: int
    block: int
    unit: int
    w_res: float
    w_x: float


@dataclass(frozen=True)
class BlockWeights:
    block: int
    w_res: float
    w_x: float


@dataclass(frozen=True)
class BranchWeight:
    kernel: int
    alpha: float


@dataclass(frozen=True)
class WeightReport:
    units: tuple[UnitWeights, ...]
    blocks: tuple[BlockWeights, ...]
    branches: tuple[BranchWeight, ...]


def inspect_weights(model: AwsrnModel) -> WeightReport:
    """Current adaptive weights in depth order.

    Variants without a given weight family report an empty section:
    plain residual units carry no unit weights, a single-branch head
    carries no branch weights.
    """
    cfg = model.config
    units = []
    blocks = []
    branches = []
    depth = 0
    for m in range(cfg.n_lfb):
        for r in range(cfg.n_awru):
            if cfg.ru_kind == "adaptive":
                units.append(
                    UnitWeights(
                        depth,
                        m,
                        r,
                        model.params[f"lfb{m}.ru{r}.w_res"].data.item(),
                        model.params[f"lfb{m}.ru{r}.w_x"].data.item(),
                    )
                )
            depth += 1
        if cfg.use_lrfu:
            blocks.append(
                BlockWeights(
                    m,
                    model.params[f"lfb{m}.w_res"].data.item(),
                    model.params[f"lfb{m}.w_x"].data.item(),
                )
            )
    if cfg.use_awms:
        for k in cfg.awms_kernels:
            branches.append(
                BranchWeight(k, model.params[f"rec.k{k}.alpha"].data.item())
            )
    return WeightReport(tuple(units), tuple(blocks), tuple(branches))


def prune_branches(model: AwsrnModel, threshold: float) -> tuple[AwsrnModel, list[int]]:
    """Drop reconstruction branches whose |alpha| falls below threshold.

    Returns a new model over a fresh parameter registry; the input
    model is left untouched. Refuses to remove every branch.
    """
    cfg = model.config
    if not cfg.use_awms:
        raise PruneError("model has a single-branch head; nothing to prune")
    if threshold < 0:
        raise PruneError(f"threshold must be nonnegative, got {threshold}")
    removed = [
        k
        for k in cfg.awms_kernels
        if abs(model.params[f"rec.k{k}.alpha"].data.item()) < threshold
    ]
    keep = tuple(k for k in cfg.awms_kernels if k not in removed)
    if not keep:
        raise PruneError(
            f"threshold {threshold} would remove all {len(removed)} branches"
        )
    new_cfg = replace(cfg, awms_kernels=keep)
    params = ParameterRegistry()
    for name, _ in expected_registry(new_cfg):
        params.add(Parameter(name, model.params[name].data.copy()))
    return AwsrnModel(new_cfg, params), removed
