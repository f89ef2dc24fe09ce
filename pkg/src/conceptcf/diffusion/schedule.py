"""Noise schedules for the forward/backward diffusion process.

Conventions: ``alpha_bar`` is the cumulative signal scale indexed by
timestep t = 0..T with ``alpha_bar[0] = 1`` (clean data). ``sigma`` has
one entry per step t = 1..T stored at index t-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

SCHEDULE_KINDS = ("linear", "cosine")


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative noise scales and per-step DDIM stochasticity.

    The marginal of the forward process at step t is
    N(sqrt(alpha_bar[t]) * x0, (1 - alpha_bar[t]) * I).
    """

    T: int
    alpha_bar: torch.Tensor  # (T+1,) float64, strictly decreasing, alpha_bar[0] = 1
    sigma: torch.Tensor  # (T,) float64, sigma for step t at index t-1
    kind: str
    eta_ddim: float

    def __post_init__(self):
        if self.alpha_bar.shape != (self.T + 1,):
            raise ValueError("alpha_bar must have T+1 entries")
        if self.sigma.shape != (self.T,):
            raise ValueError("sigma must have T entries")
        if abs(float(self.alpha_bar[0]) - 1.0) > 1e-12:
            raise ValueError("alpha_bar[0] must equal 1")
        diffs = self.alpha_bar[1:] - self.alpha_bar[:-1]
        if not bool((diffs < 0).all()):
            raise ValueError("alpha_bar must be strictly decreasing")
        for t in range(1, self.T + 1):
            bound = math.sqrt(max(1.0 - float(self.alpha_bar[t - 1]), 0.0))
            if float(self.sigma[t - 1]) < -1e-12 or float(self.sigma[t - 1]) > bound + 1e-12:
                raise ValueError(f"sigma[{t}] violates DDIM admissibility")

    def sigma_at(self, t: int) -> float:
        """Stochasticity sigma_t for step t in [1, T]."""
        return float(self.sigma[t - 1])

    def params(self) -> dict:
        """Constructor parameters, sufficient to rebuild the schedule."""
        return {"T": self.T, "kind": self.kind, "eta_ddim": self.eta_ddim}


def _alpha_bar_linear(T: int) -> torch.Tensor:
    # Linear beta ramp rescaled with T so the terminal signal level stays
    # near zero for any step count (the classic 1e-4..2e-2 ramp assumes
    # T = 1000).
    scale = 1000.0 / T
    betas = torch.linspace(1e-4 * scale, 2e-2 * scale, T, dtype=torch.float64)
    betas = betas.clamp(max=0.999)
    alpha_bar = torch.cumprod(1.0 - betas, dim=0)
    return torch.cat([torch.ones(1, dtype=torch.float64), alpha_bar])


def _alpha_bar_cosine(T: int) -> torch.Tensor:
    s = 0.008

    def f(u: float) -> float:
        return math.cos((u + s) / (1 + s) * math.pi / 2) ** 2

    vals = torch.tensor([f(t / T) / f(0.0) for t in range(T + 1)], dtype=torch.float64)
    vals[0] = 1.0
    # enforce strict decrease against numerical plateaus near the tail
    for t in range(1, T + 1):
        cap = float(vals[t - 1]) * (1.0 - 1e-6)
        if float(vals[t]) >= cap:
            vals[t] = cap
    return vals.clamp(min=1e-9)


def build_schedule(T: int, kind: str = "linear", eta_ddim: float = 0.0) -> NoiseSchedule:
    """Build a noise schedule with DDIM stochasticity controlled by eta_ddim.

    sigma_t = eta * sqrt((1 - a[t-1]) / (1 - a[t])) * sqrt(1 - a[t] / a[t-1])
    with a = alpha_bar; eta = 0 gives a fully deterministic sampler.
    """
    if T < 1:
        raise ValueError(f"step count T must be >= 1, got {T}")
    if not 0.0 <= eta_ddim <= 1.0:
        raise ValueError(f"eta_ddim must lie in [0, 1], got {eta_ddim}")
    if kind not in SCHEDULE_KINDS:
        raise ValueError(f"unknown schedule kind {kind!r}, expected one of {SCHEDULE_KINDS}")

    alpha_bar = _alpha_bar_linear(T) if kind == "linear" else _alpha_bar_cosine(T)

    sigma = torch.zeros(T, dtype=torch.float64)
    for t in range(1, T + 1):
        a_t = float(alpha_bar[t])
        a_prev = float(alpha_bar[t - 1])
        if 1.0 - a_t <= 0.0:
            sigma[t - 1] = 0.0
            continue
        sigma[t - 1] = (
            eta_ddim
            * math.sqrt((1.0 - a_prev) / (1.0 - a_t))
            * math.sqrt(max(1.0 - a_t / a_prev, 0.0))
        )
    return NoiseSchedule(T=T, alpha_bar=alpha_bar, sigma=sigma, kind=kind, eta_ddim=eta_ddim)
