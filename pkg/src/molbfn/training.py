"""Training loop: continuous-time loss plus the optional validity-reward term,
conditional dropout for classifier-free guidance, warmup learning rate, and
epoch checkpointing with a JSON-lines log."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch import Tensor

from .bfn import ScheduleConfig, continuous_loss, noise_parameters, rl_loss
from .model import (
    MaskMode,
    ModelConfig,
    OutputDistributionNet,
    load_checkpoint,
    save_checkpoint,
    vocab_hash,
)
from .sampling import _decode_sample
from .tokenize import PAD, TokenizeError, Vocab, encode


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.01  # validity-reward scale; 0 disables the term
    lr_peak: float = 5e-5
    lr_init: float = 1e-8
    warmup_steps: int = 1000
    epochs: int = 100
    batch_size: int = 120
    uncond_rate: float = 0.2
    train_mask: MaskMode = "normal"
    adam_betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.01
    rl_subsample: float = 0.25  # fraction of the batch validity-checked per step
    grad_clip: float = 1.0
    seed: int = 0
    max_steps: int | None = None  # optional hard cap for desk-scale runs
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        for name in ("uncond_rate", "rl_subsample"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def to_json(self) -> dict:
        d = asdict(self)
        d["schedule"] = asdict(self.schedule)
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        if "schedule" in obj:
            obj["schedule"] = ScheduleConfig(**obj["schedule"])
        if "adam_betas" in obj:
            obj["adam_betas"] = tuple(obj["adam_betas"])
        return cls(**obj)


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    """Linear warmup from lr_init to lr_peak, then constant."""
    if step >= cfg.warmup_steps:
        return cfg.lr_peak
    frac = step / cfg.warmup_steps
    return cfg.lr_init + frac * (cfg.lr_peak - cfg.lr_init)


def cond_dropout(
    batch_size: int, rate: float, generator: torch.Generator | None = None
) -> Tensor:
    """Boolean [B] mask: True keeps the condition, False drops to null."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("dropout rate must lie in [0, 1]")
    return torch.rand(batch_size, generator=generator) >= rate


def encode_corpus(
    strings: list[str], vocab: Vocab, seq_len: int
) -> tuple[Tensor, Tensor]:
    """Token-id tensor [N, L] plus non-pad mask; overlong strings are rejected."""
    rows = []
    for s in strings:
        rows.append(encode(s, vocab, seq_len).ids)
    ids = torch.tensor(rows, dtype=torch.long)
    return ids, ids != PAD


def train_step(
    model: OutputDistributionNet,
    optimizer: torch.optim.Optimizer,
    ids: Tensor,
    mask: Tensor,
    cfg: TrainConfig,
    vocab: Vocab,
    generator: torch.Generator,
    conditions: Tensor | None = None,
    step: int = 0,
) -> dict:
    """One optimizer update; returns loss components and the gradient norm."""
    b, length = ids.shape
    k = model.config.vocab_size
    e_x = torch.nn.functional.one_hot(ids, k).to(model.in_proj.weight.dtype)
    t = torch.rand(b, generator=generator)
    theta = noise_parameters(e_x, t, cfg.schedule, generator=generator)
    cond_present = None
    if conditions is not None:
        cond_present = cond_dropout(b, cfg.uncond_rate, generator)
    probs, _ = model(
        theta, t, conditions, cfg.train_mask, cond_present=cond_present
    )
    loss_bfn = continuous_loss(probs, e_x, t, cfg.schedule, mask)
    loss_rl = torch.zeros((), dtype=loss_bfn.dtype)
    if cfg.eta > 0:
        n_check = max(1, int(round(cfg.rl_subsample * b)))
        pick = torch.randperm(b, generator=generator)[:n_check]
        sub = probs[pick]
        valid = torch.tensor(
            [
                float(_decode_sample(sub[i].argmax(dim=-1), vocab)[2])
                for i in range(n_check)
            ]
        )
        loss_rl = rl_loss(sub, valid, cfg.eta, mask[pick])
    total = loss_bfn + loss_rl
    if not torch.isfinite(total):
        raise FloatingPointError(f"non-finite loss at step {step}")
    optimizer.zero_grad(set_to_none=True)
    total.backward()
    grad_norm = torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
    lr = lr_schedule(step, cfg)
    for group in optimizer.param_groups:
        group["lr"] = lr
    optimizer.step()
    return {
        "loss": total.item(),
        "bfn": loss_bfn.item(),
        "rl": loss_rl.item(),
        "lr": lr,
        "grad_norm": float(grad_norm),
    }


def fit(
    strings: list[str],
    vocab: Vocab,
    seq_len: int,
    model_config: ModelConfig,
    cfg: TrainConfig,
    out_dir: str | Path,
    conditions: list[list[float]] | None = None,
    resume: str | Path | None = None,
    log_every: int = 50,
) -> Path:
    """Train on a corpus, checkpointing every epoch; returns the final path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(cfg.seed)
    start_epoch, step = 0, 0
    if resume is not None:
        model, meta = load_checkpoint(resume)
        start_epoch = meta.get("epoch", 0) + 1
        step = meta["step"]
    else:
        model = OutputDistributionNet(model_config, seed=cfg.seed)
    if conditions is not None and model.config.cond_dim != len(conditions[0]):
        raise TokenizeError("condition width does not match model cond_dim")
    optimizer = torch.optim.AdamW(
        model.parameters(),
        lr=cfg.lr_init,
        betas=cfg.adam_betas,
        weight_decay=cfg.weight_decay,
    )
    ids, mask = encode_corpus(strings, vocab, seq_len)
    cond_tensor = (
        torch.tensor(conditions, dtype=torch.float32) if conditions else None
    )
    vhash = vocab_hash(vocab.tokens)
    log_path = out_dir / "train_log.jsonl"
    generator = torch.Generator().manual_seed(cfg.seed)
    final_path = out_dir / "model_final.ckpt"
    done = False
    last_epoch = start_epoch
    with open(log_path, "a") as log:
        for epoch in range(start_epoch, cfg.epochs):
            last_epoch = epoch
            perm = torch.randperm(len(strings), generator=generator)
            for lo in range(0, len(strings), cfg.batch_size):
                pick = perm[lo : lo + cfg.batch_size]
                batch_cond = cond_tensor[pick] if cond_tensor is not None else None
                stats = train_step(
                    model,
                    optimizer,
                    ids[pick],
                    mask[pick],
                    cfg,
                    vocab,
                    generator,
                    conditions=batch_cond,
                    step=step,
                )
                step += 1
                if step % log_every == 0 or step == 1:
                    log.write(
                        json.dumps({"step": step, "epoch": epoch, **stats,
                                    "time": time.time()})
                        + "\n"
                    )
                if cfg.max_steps is not None and step >= cfg.max_steps:
                    done = True
                    break
            save_checkpoint(
                out_dir / f"model_epoch{epoch:04d}.ckpt",
                model,
                vocab_hash=vhash,
                train_mask=cfg.train_mask,
                step=step,
                extra={"epoch": epoch},
            )
            if done:
                break
    save_checkpoint(
        final_path,
        model,
        vocab_hash=vhash,
        train_mask=cfg.train_mask,
        step=step,
        extra={"epoch": last_epoch},
    )
    return final_path
