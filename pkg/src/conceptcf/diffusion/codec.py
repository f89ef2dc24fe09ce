"""Latent codec: identity (pixel space) or a small conv autoencoder.

The identity codec is the default; the conv codec exercises the latent
route of the generation loop (encode, diffuse in latent space, decode).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data import LabeledImages
from ..persist import atomic_torch_save, CheckpointError

CHECKPOINT_FORMAT_VERSION = 1


class LatentCodec:
    """Encoder/decoder pair mapping images to the diffusion state space."""

    is_identity: bool = False
    latent_shape: Optional[tuple] = None

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError


class IdentityCodec(LatentCodec):
    is_identity = True

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return x

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        return z


class ConvCodec(LatentCodec, nn.Module):
    """3x16x16 image <-> 8x8x8 latent, trained with a pixel MSE."""

    def __init__(self, latent_ch: int = 8):
        nn.Module.__init__(self)
        self.latent_ch = latent_ch
        self.enc = nn.Sequential(
            nn.Conv2d(3, 16, 3, padding=1), nn.SiLU(),
            nn.Conv2d(16, latent_ch, 3, stride=2, padding=1),
        )
        self.dec = nn.Sequential(
            nn.ConvTranspose2d(latent_ch, 16, 4, stride=2, padding=1), nn.SiLU(),
            nn.Conv2d(16, 3, 3, padding=1),
        )
        self.latent_shape = (latent_ch, 8, 8)

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.enc(x)

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        return self.dec(z)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.decode(self.encode(x))


@dataclass
class CodecTrainConfig:
    steps: int = 1500
    batch_size: int = 128
    lr: float = 2e-3
    seed: int = 0
    latent_ch: int = 8


def train_codec(
    dataset: LabeledImages,
    config: CodecTrainConfig,
    checkpoint_path: Optional[Path] = None,
    log=print,
) -> tuple[ConvCodec, dict]:
    """Train the conv autoencoder; reports mean reconstruction MSE."""
    if len(dataset) == 0:
        raise ValueError("cannot train a codec on an empty dataset")
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    codec = ConvCodec(config.latent_ch)
    opt = torch.optim.AdamW(codec.parameters(), lr=config.lr)
    for step in range(1, config.steps + 1):
        idx = torch.randint(0, len(dataset), (config.batch_size,), generator=gen)
        x = dataset.images[idx]
        loss = F.mse_loss(codec(x), x)
        if not torch.isfinite(loss):
            raise RuntimeError(f"codec training diverged at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        if step % 500 == 0:
            log(f"[codec] step {step}/{config.steps} loss {float(loss):.5f}")
    codec.eval()
    with torch.no_grad():
        recon_mse = float(F.mse_loss(codec(dataset.images[:256]), dataset.images[:256]))
    report = {"reconstruction_mse": recon_mse, "steps": config.steps}
    if checkpoint_path is not None:
        save_codec(codec, checkpoint_path, report)
    return codec, report


def save_codec(codec: ConvCodec, path: Path, report: Optional[dict] = None) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": "codec",
        "latent_ch": codec.latent_ch,
        "state_dict": codec.state_dict(),
        "report": report or {},
    }
    atomic_torch_save(payload, path)


def load_codec(path: Path) -> ConvCodec:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("kind") != "codec":
        raise CheckpointError(f"{path} is not a codec checkpoint")
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"codec checkpoint format {payload.get('format_version')} unsupported")
    codec = ConvCodec(payload["latent_ch"])
    codec.load_state_dict(payload["state_dict"])
    codec.eval()
    return codec
