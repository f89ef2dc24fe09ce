"""Class-conditional noise-prediction network and its training loop.

A small U-Net sized for 16x16 toy images. Conditioning enters through a
summed timestep + class embedding; a dedicated null token makes the
unconditional mode a first-class input, which classifier-free training
exercises by dropping the class condition with fixed probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data import LabeledImages
from ..persist import atomic_torch_save, CheckpointError
from .schedule import NoiseSchedule, build_schedule
from .process import forward_diffuse

CHECKPOINT_FORMAT_VERSION = 1
CONDITION_DROPOUT = 0.1  # probability of training a batch element unconditionally


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal embedding of integer timesteps, shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / half)
    args = t.float()[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=1)


class _Block(nn.Module):
    def __init__(self, ch: int, emb_dim: int):
        super().__init__()
        self.norm = nn.GroupNorm(4, ch)
        self.conv1 = nn.Conv2d(ch, ch, 3, padding=1)
        self.conv2 = nn.Conv2d(ch, ch, 3, padding=1)
        self.emb = nn.Linear(emb_dim, ch)

    def forward(self, x: torch.Tensor, emb: torch.Tensor) -> torch.Tensor:
        h = F.silu(self.conv1(self.norm(x)))
        h = h + self.emb(emb)[:, :, None, None]
        h = self.conv2(F.silu(h))
        return x + h


class CondDenoiser(nn.Module):
    """eps(x_t, t, c) with an explicit unconditional mode (c = None)."""

    def __init__(self, num_classes: int, base: int = 32, emb_dim: int = 64, in_ch: int = 3):
        super().__init__()
        self.num_classes = num_classes
        self.null_token = num_classes
        self.emb_dim = emb_dim
        self.time_mlp = nn.Sequential(nn.Linear(emb_dim, emb_dim), nn.SiLU(), nn.Linear(emb_dim, emb_dim))
        self.class_emb = nn.Embedding(num_classes + 1, emb_dim)

        self.inc = nn.Conv2d(in_ch, base, 3, padding=1)
        self.block1 = _Block(base, emb_dim)
        self.down1 = nn.Conv2d(base, base * 2, 3, stride=2, padding=1)
        self.block2 = _Block(base * 2, emb_dim)
        self.down2 = nn.Conv2d(base * 2, base * 4, 3, stride=2, padding=1)
        self.mid = _Block(base * 4, emb_dim)
        self.up1 = nn.ConvTranspose2d(base * 4, base * 2, 4, stride=2, padding=1)
        self.block3 = _Block(base * 2, emb_dim)
        self.up2 = nn.ConvTranspose2d(base * 2, base, 4, stride=2, padding=1)
        self.block4 = _Block(base, emb_dim)
        self.outc = nn.Conv2d(base, in_ch, 3, padding=1)

    def forward(
        self, x: torch.Tensor, t: torch.Tensor, cond: Optional[torch.Tensor] = None
    ) -> torch.Tensor:
        if cond is None:
            cond = torch.full((x.shape[0],), self.null_token, dtype=torch.long, device=x.device)
        emb = self.time_mlp(timestep_embedding(t, self.emb_dim)) + self.class_emb(cond)
        h1 = self.block1(self.inc(x), emb)
        h2 = self.block2(self.down1(h1), emb)
        h3 = self.mid(self.down2(h2), emb)
        u1 = self.block3(self.up1(h3) + h2, emb)
        u2 = self.block4(self.up2(u1) + h1, emb)
        return self.outc(u2)


@dataclass
class DenoiserTrainConfig:
    steps: int = 3000
    batch_size: int = 128
    lr: float = 2e-3
    seed: int = 0
    condition_dropout: float = CONDITION_DROPOUT
    base_channels: int = 32
    log_every: int = 500
    schedule: dict = field(default_factory=lambda: {"T": 200, "kind": "linear", "eta_ddim": 0.0})


def train_denoiser(
    dataset: LabeledImages,
    config: DenoiserTrainConfig,
    checkpoint_path: Optional[Path] = None,
    model: Optional[CondDenoiser] = None,
    log=print,
) -> tuple[CondDenoiser, dict]:
    """Train the noise predictor with the standard denoising MSE objective.

    Returns the model and a report with the final loss. With steps = 0
    the initialized model is returned unchanged, its loss evaluated but
    no checkpoint written.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train a denoiser on an empty dataset")
    schedule = build_schedule(**config.schedule)
    num_classes = len(dataset.class_names)
    gen = torch.Generator().manual_seed(config.seed)
    torch.manual_seed(config.seed)
    if model is None:
        model = CondDenoiser(num_classes, base=config.base_channels)

    images, labels = dataset.images, dataset.labels
    a_bar = schedule.alpha_bar.float()

    def eval_loss(n: int = 256) -> float:
        g = torch.Generator().manual_seed(config.seed + 1)
        idx = torch.randint(0, len(dataset), (min(n, len(dataset)),), generator=g)
        x0 = images[idx]
        t = torch.randint(1, schedule.T + 1, (x0.shape[0],), generator=g)
        eps = torch.randn(x0.shape, generator=g)
        at = a_bar[t][:, None, None, None]
        xt = at.sqrt() * x0 + (1 - at).sqrt() * eps
        with torch.no_grad():
            pred = model(xt, t, labels[idx])
        return float(F.mse_loss(pred, eps))

    if config.steps == 0:
        report = {"final_loss": eval_loss(), "steps": 0}
        return model, report

    opt = torch.optim.AdamW(model.parameters(), lr=config.lr)
    model.train()
    last_loss = float("nan")
    for step in range(1, config.steps + 1):
        idx = torch.randint(0, len(dataset), (config.batch_size,), generator=gen)
        x0 = images[idx]
        cond = labels[idx].clone()
        drop = torch.rand(cond.shape, generator=gen) < config.condition_dropout
        cond[drop] = model.null_token

        t = torch.randint(1, schedule.T + 1, (config.batch_size,), generator=gen)
        eps = torch.randn(x0.shape, generator=gen)
        at = a_bar[t][:, None, None, None]
        xt = at.sqrt() * x0 + (1 - at).sqrt() * eps

        pred = model(xt, t, cond)
        loss = F.mse_loss(pred, eps)
        if not torch.isfinite(loss):
            raise RuntimeError(f"denoiser training diverged at step {step} (loss not finite)")
        opt.zero_grad()
        loss.backward()
        opt.step()
        last_loss = float(loss)
        if step % config.log_every == 0:
            log(f"[denoiser] step {step}/{config.steps} loss {last_loss:.4f}")

    model.eval()
    report = {"final_loss": eval_loss(), "last_train_loss": last_loss, "steps": config.steps}
    if checkpoint_path is not None:
        save_denoiser(model, schedule, checkpoint_path, report)
    return model, report


def save_denoiser(
    model: CondDenoiser, schedule: NoiseSchedule, path: Path, report: Optional[dict] = None
) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": "denoiser",
        "num_classes": model.num_classes,
        "base_channels": model.inc.out_channels,
        "state_dict": model.state_dict(),
        "schedule": schedule.params(),
        "report": report or {},
    }
    atomic_torch_save(payload, path)


def load_denoiser(path: Path) -> tuple[CondDenoiser, NoiseSchedule]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("kind") != "denoiser":
        raise CheckpointError(f"{path} is not a denoiser checkpoint")
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"denoiser checkpoint format {payload.get('format_version')} unsupported "
            f"(expected {CHECKPOINT_FORMAT_VERSION})"
        )
    model = CondDenoiser(payload["num_classes"], base=payload["base_channels"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, build_schedule(**payload["schedule"])
