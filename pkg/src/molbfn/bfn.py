"""Bayesian-flow mathematics for categorical sequences.

Everything here is independent of the network: the accuracy schedule, the
training-time parameter noising, the multiplicative Bayesian update, the
continuous-time loss, the auxiliary validity-reward loss, and the
classifier-free guidance combination rule.  All functions accept either
[L, K] or [B, L, K] tensors; time is a float or a [B] tensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor


@dataclass(frozen=True)
class ScheduleConfig:
    beta1: float = 1.0  # final accuracy at t=1
    steps: int = 100

    def __post_init__(self):
        if self.beta1 <= 0:
            raise ValueError("beta1 must be positive")
        if self.steps < 1:
            raise ValueError("step count must be >= 1")


@dataclass(frozen=True)
class GuidanceConfig:
    strength: float = 0.5
    condition: tuple[float, ...] | None = None  # None is the unconditional slot

    def __post_init__(self):
        if not torch.isfinite(torch.tensor(self.strength)):
            raise ValueError("guidance strength must be finite")


def accuracy_schedule(t, cfg: ScheduleConfig):
    """Quadratic accuracy schedule: beta(t) = beta1 * t**2."""
    tt = torch.as_tensor(t, dtype=torch.get_default_dtype())
    if torch.any(tt < 0) or torch.any(tt > 1):
        raise ValueError("time must lie in [0, 1]")
    out = cfg.beta1 * tt**2
    return out.item() if out.ndim == 0 else out


def noise_parameters(
    e_x: Tensor,
    t,
    cfg: ScheduleConfig,
    generator: torch.Generator | None = None,
) -> Tensor:
    """Sample noised simplex parameters for data one-hots at time t.

    y ~ Normal(beta(t) * (K * e_x - 1), beta(t) * K per component), and the
    returned parameters are the row-softmax of y.
    """
    k = e_x.shape[-1]
    beta = torch.as_tensor(accuracy_schedule(t, cfg), dtype=e_x.dtype)
    while beta.ndim < e_x.ndim:
        beta = beta.unsqueeze(-1)
    mean = beta * (k * e_x - 1.0)
    std = (beta * k).sqrt()
    eps = torch.empty_like(e_x).normal_(generator=generator)
    y = mean + std * eps
    return torch.softmax(y, dim=-1)


def bayesian_update(theta: Tensor, y: Tensor) -> Tensor:
    """Row-normalized theta * exp(y), computed in log space for stability."""
    log_theta = torch.log(theta.clamp_min(1e-30))
    return torch.softmax(log_theta + y, dim=-1)


def continuous_loss(
    e_hat: Tensor,
    e_x: Tensor,
    t,
    cfg: ScheduleConfig,
    mask: Tensor | None = None,
) -> Tensor:
    """Continuous-time squared-error loss K * beta1 * t * ||e_x - e_hat||^2,
    averaged over non-pad positions (and the batch, if batched)."""
    if e_hat.shape != e_x.shape:
        raise ValueError(f"shape mismatch: {tuple(e_hat.shape)} vs {tuple(e_x.shape)}")
    k = e_x.shape[-1]
    sq = ((e_x - e_hat) ** 2).sum(dim=-1)  # [..., L]
    tt = torch.as_tensor(t, dtype=e_hat.dtype)
    if tt.ndim > 0:  # one time per batch element
        tt = tt.view(-1, *([1] * (sq.ndim - 1)))
    per_pos = k * cfg.beta1 * tt * sq
    if mask is None:
        per_seq = per_pos.mean(dim=-1)
    else:
        m = mask.to(e_hat.dtype)
        per_seq = (per_pos * m).sum(dim=-1) / m.sum(dim=-1).clamp_min(1.0)
    return per_seq.mean()


def rl_loss(
    e_hat: Tensor,
    valid,
    eta: float,
    mask: Tensor | None = None,
) -> Tensor:
    """Auxiliary validity-reward loss.

    Zero for valid sequences; otherwise eta times the mean (over non-pad
    positions) of the probability mass at each row argmax.  The argmax index
    is treated as a constant so gradients flow through the probabilities only.
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    idx = e_hat.argmax(dim=-1, keepdim=True).detach()
    top = e_hat.gather(-1, idx).squeeze(-1)  # [..., L]
    if mask is None:
        per_seq = top.mean(dim=-1)
    else:
        m = mask.to(e_hat.dtype)
        per_seq = (top * m).sum(dim=-1) / m.sum(dim=-1).clamp_min(1.0)
    invalid = 1.0 - torch.as_tensor(valid, dtype=e_hat.dtype).to(per_seq.device)
    return (eta * invalid * per_seq).mean()


def cfg_combine(z_cond: Tensor, z_uncond: Tensor, strength: float) -> Tensor:
    """Classifier-free guidance in logit space: (1+w) z_cond - w z_uncond."""
    if z_cond.shape != z_uncond.shape:
        raise ValueError(
            f"shape mismatch: {tuple(z_cond.shape)} vs {tuple(z_uncond.shape)}"
        )
    return (1.0 + strength) * z_cond - strength * z_uncond
