"""Transformer producing per-position categorical output distributions.

The network consumes the current simplex parameters directly (linearly
embedded), a sinusoidal time embedding added to every position, and an
optional condition vector occupying a dedicated prefix slot (a learned null
embedding when unconditional).  A switchable causal mask gives the
semi-autoregressive mode: each position attends to itself and strictly
earlier positions only.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Literal

import torch
from torch import Tensor, nn

MaskMode = Literal["normal", "sar"]

_CKPT_MAGIC = b"MBFNCKP1"


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 12
    heads: int = 8
    hidden: int = 512
    vocab_size: int = 0  # K
    seq_len: int = 0  # L
    cond_dim: int = 0  # f; 0 disables the conditioning pathway

    def __post_init__(self):
        if self.hidden % self.heads != 0:
            raise ValueError("hidden size must be divisible by head count")
        for name in ("layers", "heads", "hidden", "vocab_size", "seq_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.cond_dim < 0:
            raise ValueError("cond_dim must be nonnegative")

    @classmethod
    def desk(cls, vocab_size: int, seq_len: int, cond_dim: int = 0) -> "ModelConfig":
        """Small preset that trains in minutes on a laptop CPU."""
        return cls(
            layers=2,
            heads=4,
            hidden=64,
            vocab_size=vocab_size,
            seq_len=seq_len,
            cond_dim=cond_dim,
        )


def _time_features(t: Tensor, dim: int) -> Tensor:
    """Sinusoidal embedding of t in [0,1]; t has shape [B]."""
    half = dim // 2
    freqs = torch.exp(
        torch.arange(half, dtype=t.dtype, device=t.device)
        * (-math.log(10000.0) / max(half - 1, 1))
    )
    args = t[:, None] * freqs[None, :] * 1000.0
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    if emb.shape[-1] < dim:
        emb = torch.nn.functional.pad(emb, (0, dim - emb.shape[-1]))
    return emb


class _Block(nn.Module):
    def __init__(self, hidden: int, heads: int):
        super().__init__()
        self.heads = heads
        self.norm1 = nn.LayerNorm(hidden)
        self.qkv = nn.Linear(hidden, 3 * hidden)
        self.attn_out = nn.Linear(hidden, hidden)
        self.norm2 = nn.LayerNorm(hidden)
        self.mlp = nn.Sequential(
            nn.Linear(hidden, 4 * hidden), nn.GELU(), nn.Linear(4 * hidden, hidden)
        )

    def forward(self, x: Tensor, causal: bool) -> Tensor:
        b, n, d = x.shape
        h = self.heads
        q, k, v = self.qkv(self.norm1(x)).chunk(3, dim=-1)
        q = q.view(b, n, h, d // h).transpose(1, 2)
        k = k.view(b, n, h, d // h).transpose(1, 2)
        v = v.view(b, n, h, d // h).transpose(1, 2)
        scores = q @ k.transpose(-1, -2) / math.sqrt(d // h)
        if causal:
            mask = torch.triu(
                torch.ones(n, n, dtype=torch.bool, device=x.device), diagonal=1
            )
            scores = scores.masked_fill(mask, float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        x = x + self.attn_out(out)
        x = x + self.mlp(self.norm2(x))
        return x


class OutputDistributionNet(nn.Module):
    """Maps (theta, t, condition) to per-position categorical distributions."""

    def __init__(self, config: ModelConfig, seed: int | None = None):
        super().__init__()
        self.config = config
        if seed is not None:
            torch.manual_seed(seed)
        d = config.hidden
        self.in_proj = nn.Linear(config.vocab_size, d)
        self.time_proj = nn.Linear(d, d)
        self.null_cond = nn.Parameter(torch.zeros(d))
        self.cond_proj = (
            nn.Linear(config.cond_dim, d) if config.cond_dim > 0 else None
        )
        self.pos_emb = nn.Parameter(torch.zeros(config.seq_len + 1, d))
        nn.init.uniform_(self.pos_emb, -0.02, 0.02)
        self.blocks = nn.ModuleList(
            _Block(d, config.heads) for _ in range(config.layers)
        )
        self.out_norm = nn.LayerNorm(d)
        self.head = nn.Linear(d, config.vocab_size)

    def forward(
        self,
        theta: Tensor,
        t,
        condition: Tensor | None = None,
        mask: MaskMode = "normal",
        cond_present: Tensor | None = None,
    ) -> tuple[Tensor, Tensor]:
        """Returns (probabilities, logits), both [B, L, K].

        `cond_present` is an optional [B] boolean mask selecting which batch
        rows use `condition`; the rest fall back to the learned null slot
        (used for conditional dropout during training).
        """
        if theta.ndim == 2:
            theta = theta.unsqueeze(0)
        b, length, k = theta.shape
        if k != self.config.vocab_size or length != self.config.seq_len:
            raise ValueError(
                f"input shape {tuple(theta.shape)} does not match model "
                f"(L={self.config.seq_len}, K={self.config.vocab_size})"
            )
        if mask not in ("normal", "sar"):
            raise ValueError(f"unknown mask mode {mask!r}")
        dtype = self.in_proj.weight.dtype
        theta = theta.to(dtype)
        tt = torch.as_tensor(t, dtype=dtype, device=theta.device)
        if tt.ndim == 0:
            tt = tt.expand(b)
        x = self.in_proj(theta)  # [B, L, d]
        if condition is None:
            cond_slot = self.null_cond.expand(b, -1)
        else:
            if self.cond_proj is None:
                raise ValueError("model was built without a conditioning pathway")
            condition = torch.as_tensor(condition, dtype=dtype, device=theta.device)
            if condition.ndim == 1:
                condition = condition.unsqueeze(0).expand(b, -1)
            cond_slot = self.cond_proj(condition)
            if cond_present is not None:
                keep = cond_present.to(torch.bool).view(b, 1)
                cond_slot = torch.where(keep, cond_slot, self.null_cond.expand(b, -1))
        x = torch.cat([cond_slot.unsqueeze(1), x], dim=1)  # [B, L+1, d]
        x = x + self.pos_emb.unsqueeze(0)
        x = x + self.time_proj(_time_features(tt, self.config.hidden)).unsqueeze(1)
        for block in self.blocks:
            x = block(x, causal=(mask == "sar"))
        logits = self.head(self.out_norm(x[:, 1:, :]))
        return torch.softmax(logits, dim=-1), logits


def save_checkpoint(
    path: str | Path,
    model: OutputDistributionNet,
    vocab_hash: str = "",
    train_mask: str = "normal",
    step: int = 0,
    extra: dict | None = None,
) -> None:
    """Self-describing container: JSON metadata header then raw little-endian
    float32 weight arrays in state-dict declaration order."""
    state = model.state_dict()
    meta = {
        "config": asdict(model.config),
        "vocab_hash": vocab_hash,
        "train_mask": train_mask,
        "step": step,
        "arrays": [[name, list(tensor.shape)] for name, tensor in state.items()],
    }
    if extra:
        meta.update(extra)
    header = json.dumps(meta).encode()
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for tensor in state.values():
            fh.write(tensor.detach().cpu().to(torch.float32).numpy().astype("<f4").tobytes())


def load_checkpoint(path: str | Path) -> tuple[OutputDistributionNet, dict]:
    import numpy as np

    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(hlen).decode())
        model = OutputDistributionNet(ModelConfig(**meta["config"]))
        state = {}
        for name, shape in meta["arrays"]:
            count = int(math.prod(shape)) if shape else 1
            buf = fh.read(4 * count)
            arr = np.frombuffer(buf, dtype="<f4").reshape(shape).copy()
            state[name] = torch.from_numpy(arr)
        model.load_state_dict(state)
    return model, meta


def vocab_hash(tokens) -> str:
    return hashlib.sha256("\x00".join(tokens).encode()).hexdigest()[:16]
