from .schedule import NoiseSchedule, build_schedule
from .process import DiffusionDraw, forward_diffuse, estimate_x0, ddim_step, sample
from .denoiser import (
    CondDenoiser,
    DenoiserTrainConfig,
    train_denoiser,
    save_denoiser,
    load_denoiser,
)
from .codec import LatentCodec, IdentityCodec, ConvCodec, train_codec, save_codec, load_codec

__all__ = [
    "NoiseSchedule",
    "build_schedule",
    "DiffusionDraw",
    "forward_diffuse",
    "estimate_x0",
    "ddim_step",
    "sample",
    "CondDenoiser",
    "DenoiserTrainConfig",
    "train_denoiser",
    "save_denoiser",
    "load_denoiser",
    "LatentCodec",
    "IdentityCodec",
    "ConvCodec",
    "train_codec",
    "save_codec",
    "load_codec",
]
