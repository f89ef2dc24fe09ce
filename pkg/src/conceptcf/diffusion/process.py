"""Forward diffusion, clean-state reconstruction and DDIM stepping.

All operations treat the leading dimension as batch and broadcast the
scalar schedule coefficients. States and noise share one shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import torch

from .schedule import NoiseSchedule


@dataclass
class DiffusionDraw:
    """One forward-process draw: xt = sqrt(a_t) x0 + sqrt(1 - a_t) eps."""

    x0: torch.Tensor
    t: int
    eps: torch.Tensor
    xt: torch.Tensor


def _check_t(t: int, schedule: NoiseSchedule) -> None:
    if not 1 <= t <= schedule.T:
        raise ValueError(f"timestep {t} outside [1, {schedule.T}]")


def forward_diffuse(
    x0: torch.Tensor,
    t: int,
    schedule: NoiseSchedule,
    noise: Optional[torch.Tensor] = None,
    generator: Optional[torch.Generator] = None,
) -> DiffusionDraw:
    """Noise a clean state to timestep t in closed form."""
    _check_t(t, schedule)
    if noise is None:
        noise = torch.randn(x0.shape, dtype=x0.dtype, generator=generator)
    elif noise.shape != x0.shape:
        raise ValueError(f"noise shape {tuple(noise.shape)} != x0 shape {tuple(x0.shape)}")
    a_t = float(schedule.alpha_bar[t])
    xt = math.sqrt(a_t) * x0 + math.sqrt(1.0 - a_t) * noise
    return DiffusionDraw(x0=x0, t=t, eps=noise, xt=xt)


def estimate_x0(
    xt: torch.Tensor, t: int, eps_hat: torch.Tensor, schedule: NoiseSchedule
) -> torch.Tensor:
    """Invert the forward process given a noise estimate.

    x0_hat = (xt - sqrt(1 - a_t) * eps_hat) / sqrt(a_t)
    """
    _check_t(t, schedule)
    if eps_hat.shape != xt.shape:
        raise ValueError(f"eps_hat shape {tuple(eps_hat.shape)} != xt shape {tuple(xt.shape)}")
    a_t = float(schedule.alpha_bar[t])
    if a_t <= 0.0:
        raise ValueError(f"alpha_bar[{t}] is zero; clean-state estimate undefined")
    return (xt - math.sqrt(1.0 - a_t) * eps_hat) / math.sqrt(a_t)


def ddim_step(
    xt: torch.Tensor,
    t: int,
    eps_hat: torch.Tensor,
    schedule: NoiseSchedule,
    noise: Optional[torch.Tensor] = None,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """One DDIM update from timestep t to t-1.

    x_{t-1} = sqrt(a_{t-1}) x0_hat + sqrt(1 - a_{t-1} - sigma_t^2) eps_hat
              + sigma_t * eps
    Deterministic when sigma_t = 0 (no noise tensor is drawn then).
    """
    _check_t(t, schedule)
    a_prev = float(schedule.alpha_bar[t - 1])
    sig = schedule.sigma_at(t)
    rem = 1.0 - a_prev - sig * sig
    if rem < -1e-12:
        raise ValueError(f"invalid schedule at t={t}: 1 - alpha_bar[t-1] - sigma_t^2 < 0")
    rem = max(rem, 0.0)
    x0_hat = estimate_x0(xt, t, eps_hat, schedule)
    out = math.sqrt(a_prev) * x0_hat + math.sqrt(rem) * eps_hat
    if sig > 0.0:
        if noise is None:
            noise = torch.randn(xt.shape, dtype=xt.dtype, generator=generator)
        elif noise.shape != xt.shape:
            raise ValueError("noise shape mismatch")
        out = out + sig * noise
    return out


ScoreHook = Callable[[torch.Tensor, int, torch.Tensor], torch.Tensor]


@torch.no_grad()
def sample(
    denoiser,
    schedule: NoiseSchedule,
    condition: Optional[int] = None,
    score_hook: Optional[ScoreHook] = None,
    *,
    shape: tuple = (1, 3, 16, 16),
    x_init: Optional[torch.Tensor] = None,
    t_start: Optional[int] = None,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """Run the DDIM loop from pure noise (or from x_init at t_start).

    ``score_hook(x_t, t, eps_hat)`` returns a term that is added to the
    noise estimate before each step; it is the injection point for
    classifier guidance. Gradient computations inside the hook are
    allowed (the no-grad context is released around the hook call).
    """
    t_hi = schedule.T if t_start is None else t_start
    if x_init is None:
        x = torch.randn(shape, generator=generator)
    else:
        x = x_init.clone()
    if t_hi == 0:
        return x
    if not 1 <= t_hi <= schedule.T:
        raise ValueError(f"t_start {t_hi} outside [0, {schedule.T}]")

    cond = None
    if condition is not None:
        cond = torch.full((x.shape[0],), int(condition), dtype=torch.long)

    for t in range(t_hi, 0, -1):
        tt = torch.full((x.shape[0],), t, dtype=torch.long)
        eps = denoiser(x, tt, cond)
        if score_hook is not None:
            with torch.enable_grad():
                score = score_hook(x, t, eps)
            if score.shape != eps.shape:
                raise ValueError(
                    f"score hook returned shape {tuple(score.shape)}, expected {tuple(eps.shape)}"
                )
            eps = eps + score
        x = ddim_step(x, t, eps, schedule, generator=generator)
    return x
