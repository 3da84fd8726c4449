"""Adaptive weighted super-resolution networks on a numpy autodiff core.

Build, train, analyze, and prune the lightweight SR family: stacked
local fusion blocks of adaptively weighted residual units behind an
adaptive multi-scale reconstruction head.
"""

from .analysis import (
    ComplexityReport,
    WeightReport,
    complexity_report,
    count_multi_adds,
    count_params,
    inspect_weights,
    prune_branches,
)
from .autodiff import Parameter, Tape, Tensor
from .data import (
    Image,
    PairedImage,
    PatchBatch,
    bicubic_resize,
    load_pairs,
    load_png,
    make_pair,
    rgb_to_y,
    sample_batch,
    save_png,
)
from .errors import AwsrnError
from .metrics import psnr_y, ssim_y
from .model import (
    PRESETS,
    AwsrnModel,
    ModelConfig,
    build,
    load_checkpoint,
    preset_config,
    save_checkpoint,
)
from .train import TrainConfig, adam_step, l1_loss, lr_schedule

__version__ = "0.1.0"

__all__ = [
    "AwsrnError",
    "AwsrnModel",
    "ComplexityReport",
    "Image",
    "ModelConfig",
    "PRESETS",
    "PairedImage",
    "Parameter",
    "PatchBatch",
    "Tape",
    "Tensor",
    "TrainConfig",
    "WeightReport",
    "adam_step",
    "bicubic_resize",
    "build",
    "complexity_report",
    "count_multi_adds",
    "count_params",
    "inspect_weights",
    "l1_loss",
    "load_checkpoint",
    "load_pairs",
    "load_png",
    "lr_schedule",
    "make_pair",
    "preset_config",
    "prune_branches",
    "psnr_y",
    "rgb_to_y",
    "sample_batch",
    "save_checkpoint",
    "save_png",
    "ssim_y",
    "__version__",
]
