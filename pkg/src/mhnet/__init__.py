"""MHNet: mixed-hierarchy image restoration on a self-contained tensor engine.

The heavy lifting happens in plain numpy plus an optional compiled extension
for the depth-wise convolutions; `mhnet.kernels.backend()` reports which one
is active.
"""

from .attention import NO_SELECTION, SMAMParams, msa_macs, smam, smam_macs
from .blocks import NAFBlockParams, naf_block, sca, simple_gate
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .complexity import count_macs, count_params, emit_report
from .degrade import DegradeSpec, apply as degrade, gaussian_noise, motion_blur_kernel, \
    rain_streaks
from .metrics import MetricReport, psnr, psnr_loss, psnr_unit, rgb_to_y, ssim
from .model import MHNet, ModelConfig, toy_config
from .ppm import Image, read_ppm, write_ppm
from .tensor import GradTape, ShapeError, Tensor, backward, gradcheck
from .train import TrainConfig, cosine_lr, train

__all__ = [
    "Tensor", "GradTape", "backward", "gradcheck", "ShapeError",
    "MHNet", "ModelConfig", "toy_config",
    "NAFBlockParams", "naf_block", "simple_gate", "sca",
    "SMAMParams", "smam", "msa_macs", "smam_macs", "NO_SELECTION",
    "psnr", "psnr_unit", "psnr_loss", "ssim", "rgb_to_y", "MetricReport",
    "DegradeSpec", "degrade", "rain_streaks", "motion_blur_kernel", "gaussian_noise",
    "TrainConfig", "train", "cosine_lr",
    "count_params", "count_macs", "emit_report",
    "Image", "read_ppm", "write_ppm",
    "save_checkpoint", "load_checkpoint", "CheckpointError",
]
__version__ = "0.1.0"
