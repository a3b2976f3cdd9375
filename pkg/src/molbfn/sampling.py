"""Generation loops: native Bayesian-flow sampling and the ODE-like sampler.

Both loops share the guidance plumbing (conditional and unconditional forward
passes combined in logit space) and differ only in how the latent state is
advanced.  The four training/sampling strategies differ solely by the mask
flag passed to the network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import torch
from torch import Tensor

from .bfn import GuidanceConfig, ScheduleConfig, accuracy_schedule, bayesian_update, cfg_combine
from .chem import decode_selfies, is_valid
from .model import MaskMode, OutputDistributionNet
from .tokenize import Vocab, TokenSequence, decode


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 100
    tau: float = 0.5
    method: str = "ode"  # "ode" or "native"
    mask: MaskMode = "normal"
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    seed: int = 0
    batch_size: int = 500

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("step count must be >= 1")
        if self.tau < 0:
            raise ValueError("temperature must be >= 0")
        if self.method not in ("ode", "native"):
            raise ValueError(f"unknown sampling method {self.method!r}")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


#: Table of training/sampling mask strategies.
STRATEGIES: dict[int, tuple[MaskMode, MaskMode]] = {
    1: ("normal", "normal"),
    2: ("normal", "sar"),
    3: ("sar", "normal"),
    4: ("sar", "sar"),
}


@dataclass(frozen=True)
class StrategyConfig:
    train_mask: MaskMode = "normal"
    sample_mask: MaskMode = "normal"

    @classmethod
    def number(cls, n: int) -> "StrategyConfig":
        train, sample = STRATEGIES[n]
        return cls(train_mask=train, sample_mask=sample)


def _forward_guided(
    model: OutputDistributionNet, theta: Tensor, t: float, cfg: SamplerConfig
) -> tuple[Tensor, Tensor]:
    g = cfg.guidance
    if g.condition is None:
        return model(theta, t, None, cfg.mask)
    cond = torch.tensor(g.condition, dtype=theta.dtype)
    _, z_cond = model(theta, t, cond, cfg.mask)
    _, z_uncond = model(theta, t, None, cfg.mask)
    logits = cfg_combine(z_cond, z_uncond, g.strength)
    return torch.softmax(logits, dim=-1), logits


@torch.no_grad()
def sample_ode(
    model: OutputDistributionNet,
    cfg: SamplerConfig,
    batch: int,
    generator: torch.Generator | None = None,
    trace: list | None = None,
) -> Tensor:
    """ODE-like sampler operating in the pre-softmax latent space.

    The latent is recomputed (not accumulated) every step from the current
    output distribution, with noise variance K * beta(s) * tau per component.
    Returns token ids of shape [batch, L].  If `trace` is given, the latent
    state after every step is appended to it.
    """
    k = model.config.vocab_size
    length = model.config.seq_len
    n = cfg.steps
    if generator is None:
        generator = torch.Generator().manual_seed(cfg.seed)
    z = torch.zeros(batch, length, k)
    for i in range(1, n + 1):
        t = (i - 1) / n
        s = t + 1.0 / n
        theta = torch.softmax(z, dim=-1)
        e_hat, _ = _forward_guided(model, theta, t, cfg)
        beta_s = accuracy_schedule(min(s, 1.0), cfg.schedule)
        z = beta_s * (k * e_hat - 1.0)
        if cfg.tau > 0:
            eps = torch.randn(batch, length, k, generator=generator)
            z = z + math.sqrt(k * beta_s * cfg.tau) * eps
        if not torch.isfinite(z).all():
            raise FloatingPointError("latent state diverged during sampling")
        if trace is not None:
            trace.append(z.clone())
    theta = torch.softmax(z, dim=-1)
    e_hat, _ = _forward_guided(model, theta, 1.0, cfg)
    return e_hat.argmax(dim=-1)


@torch.no_grad()
def sample_native(
    model: OutputDistributionNet,
    cfg: SamplerConfig,
    batch: int,
    generator: torch.Generator | None = None,
) -> Tensor:
    """Native Bayesian-flow receiver loop in parameter space."""
    k = model.config.vocab_size
    length = model.config.seq_len
    n = cfg.steps
    if generator is None:
        generator = torch.Generator().manual_seed(cfg.seed)
    theta = torch.full((batch, length, k), 1.0 / k)
    for i in range(1, n + 1):
        t_prev = (i - 1) / n
        t_cur = i / n
        alpha = accuracy_schedule(t_cur, cfg.schedule) - accuracy_schedule(
            t_prev, cfg.schedule
        )
        e_hat, _ = _forward_guided(model, theta, t_prev, cfg)
        draws = torch.multinomial(
            e_hat.reshape(-1, k), 1, generator=generator
        ).reshape(batch, length)
        e_k = torch.nn.functional.one_hot(draws, k).to(theta.dtype)
        eps = torch.randn(batch, length, k, generator=generator)
        y = alpha * (k * e_k - 1.0) + math.sqrt(alpha * k) * eps
        theta = bayesian_update(theta, y)
        if not torch.isfinite(theta).all():
            raise FloatingPointError("parameter state diverged during sampling")
    e_hat, _ = _forward_guided(model, theta, 1.0, cfg)
    return e_hat.argmax(dim=-1)


@dataclass(frozen=True)
class SampleRecord:
    ids: tuple[int, ...]
    text: str  # decoded string (SMILES after SELFIES decoding, if applicable)
    raw: str  # raw decoded token string before any SELFIES decoding
    valid: bool
    mask: str
    method: str
    steps: int
    tau: float
    seed: int
    index: int
    condition: tuple[float, ...] | None

    def to_json(self) -> dict:
        return {
            "sequence": list(self.ids),
            "decoded": self.text,
            "raw": self.raw,
            "valid": self.valid,
            "strategy": self.mask,
            "method": self.method,
            "steps": self.steps,
            "tau": self.tau,
            "seed": self.seed,
            "index": self.index,
            "condition": list(self.condition) if self.condition else None,
        }


def _decode_sample(ids: Tensor, vocab: Vocab) -> tuple[str, str, bool]:
    raw = decode(TokenSequence(tuple(int(i) for i in ids)), vocab)
    if vocab.scheme == "selfies-tokenwise":
        text = decode_selfies(raw)
        return text, raw, bool(text) and is_valid(text)
    if vocab.scheme == "amino-acid":
        return raw, raw, bool(raw)
    return raw, raw, is_valid(raw)


def generate_batch(
    model: OutputDistributionNet,
    cfg: SamplerConfig,
    count: int,
    vocab: Vocab,
) -> list[SampleRecord]:
    """Sample `count` sequences in deterministic seeded sub-batches."""
    if count < 1:
        raise ValueError("count must be >= 1")
    sampler = sample_ode if cfg.method == "ode" else sample_native
    records: list[SampleRecord] = []
    produced = 0
    chunk_index = 0
    while produced < count:
        size = min(cfg.batch_size, count - produced)
        sub_seed = cfg.seed + 9973 * chunk_index
        gen = torch.Generator().manual_seed(sub_seed)
        ids = sampler(model, replace(cfg, seed=sub_seed), size, generator=gen)
        for row in range(size):
            text, raw, valid = _decode_sample(ids[row], vocab)
            records.append(
                SampleRecord(
                    ids=tuple(int(v) for v in ids[row]),
                    text=text,
                    raw=raw,
                    valid=valid,
                    mask=cfg.mask,
                    method=cfg.method,
                    steps=cfg.steps,
                    tau=cfg.tau,
                    seed=sub_seed,
                    index=produced + row,
                    condition=cfg.guidance.condition,
                )
            )
        produced += size
        chunk_index += 1
    return records
