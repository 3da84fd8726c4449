"""L1-loss Adam training over sampled patch batches.

One synchronous loop: sample, forward, backward, bias-corrected Adam
step under a step-halving learning-rate schedule, zero gradients.
Losses are computed on full RGB patches in [0, 1]; border shaving is
an evaluation convention, not a training one.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .data import PairedImage, sample_batch
from .errors import ConfigError, TrainingDivergedError
from .model import AwsrnModel, ParameterRegistry, save_checkpoint


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-3
    halve_every: int = 200_000
    batch: int = 16
    patch: int = 48
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iters: int = 1000
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ConfigError(f"lr0 must be positive, got {self.lr0}")
        for name in ("halve_every", "batch", "patch"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 < b < 1.0:
                raise ConfigError(f"{name} must be in (0, 1), got {b}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.max_iters < 0:
            raise ConfigError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.checkpoint_every < 0:
            raise ConfigError(
                f"checkpoint_every must be >= 0, got {self.checkpoint_every}"
            )


def l1_loss(pred, target) -> Tensor:
    """Mean absolute difference as a scalar tensor."""
    return ad.mean_abs_error(pred, target)


def lr_schedule(t: int, lr0: float = 1e-3, halve_every: int = 200_000) -> float:
    """Initial rate halved once per ``halve_every`` iterations."""
    if t < 0:
        raise ConfigError(f"iteration must be >= 0, got {t}")
    return lr0 * 0.5 ** (t // halve_every)


class OptimizerState:
    """Adam moment buffers for every trainable parameter, plus the step count."""

    def __init__(self, params: ParameterRegistry):
        self.m = {}
        self.v = {}
        self.t = 0
        for p in params:
            if p.trainable:
                self.m[p.name] = np.zeros_like(p.data)
                self.v[p.name] = np.zeros_like(p.data)


def adam_step(
    params: ParameterRegistry,
    state: OptimizerState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update. Gradients are left untouched."""
    state.t += 1
    t = state.t
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for p in params:
        if not p.trainable:
            continue
        g = p.grad
        if g is None:
            raise ValueError(f"no gradient for trainable parameter {p.name!r}")
        m = state.m[p.name]
        v = state.v[p.name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data[...] -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


ProgressFn = Callable[[int, float], None]


def train(
    model: AwsrnModel,
    pairs: Sequence[PairedImage],
    config: TrainConfig,
    checkpoint_path=None,
    progress: ProgressFn | None = None,
) -> tuple[AwsrnModel, list[float]]:
    """Run the training loop in place; returns the model and loss trace.

    ``checkpoint_path`` is rewritten every ``checkpoint_every``
    iterations when both are set. A non-finite loss aborts immediately.
    """
    rng = np.random.default_rng(config.seed)
    state = OptimizerState(model.params)
    trace: list[float] = []
    dtype = model.dtype
    for t in range(config.max_iters):
        batch = sample_batch(
            pairs, rng, p=config.patch, batch=config.batch, dtype=dtype
        )
        with Tape() as tape:
            pred = model.forward(batch.lr)
            loss = l1_loss(pred, batch.hr)
        tape.backward(loss)
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingDivergedError(
                f"non-finite loss {value} at iteration {t}"
            )
        trace.append(value)
        adam_step(
            model.params,
            state,
            lr_schedule(t, config.lr0, config.halve_every),
            config.beta1,
            config.beta2,
            config.eps,
        )
        model.params.zero_grads()
        if progress is not None:
            progress(t, value)
        if (
            checkpoint_path is not None
            and config.checkpoint_every
            and (t + 1) % config.checkpoint_every == 0
        ):
            save_checkpoint(model, checkpoint_path)
    return model, trace


def write_trace(path, trace: Sequence[float]) -> None:
    """Two columns per line: iteration index and loss."""
    lines = [f"{i} {loss:.10e}" for i, loss in enumerate(trace)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_trace(path) -> list[float]:
    out = []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"malformed trace line: {line!r}")
        out.append(float(parts[1]))
    return out
