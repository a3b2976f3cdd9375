"""Circular (Morgan-style) fingerprints and Tanimoto similarity.

Environment hashing uses 64-bit FNV-1a over a canonicalized encoding of each
atom's neighborhood, folded into the bit width by modulo, so bit sets are
deterministic and portable across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import MolGraph

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class Fingerprint:
    bits: frozenset[int]
    width: int = 1024
    radius: int = 2

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("fingerprint width must be positive")
        if self.radius < 0:
            raise ValueError("fingerprint radius must be nonnegative")


def morgan_fingerprint(g: MolGraph, radius: int = 2, width: int = 1024) -> Fingerprint:
    if width <= 0:
        raise ValueError("fingerprint width must be positive")
    if radius < 0:
        raise ValueError("fingerprint radius must be nonnegative")
    # radius-0 invariants: element, charge, degree, hydrogen count, aromaticity
    env: list[int] = []
    for i, a in enumerate(g.atoms):
        key = f"{a.symbol}|{a.charge}|{len(g.neighbors(i))}|{a.h_count}|{int(a.aromatic)}"
        env.append(_fnv1a(key.encode()))
    bits: set[int] = set(h % width for h in env)
    for _ in range(radius):
        nxt: list[int] = []
        for i in range(len(g.atoms)):
            parts = sorted(
                (b.order_value(), env[v]) for v, b in g.neighbors(i)
            )
            enc = f"{env[i]}|" + "|".join(f"{o}:{h}" for o, h in parts)
            nxt.append(_fnv1a(enc.encode()))
        env = nxt
        bits.update(h % width for h in env)
    return Fingerprint(bits=frozenset(bits), width=width, radius=radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    if a.width != b.width:
        raise ValueError(f"fingerprint width mismatch: {a.width} != {b.width}")
    if not a.bits and not b.bits:
        return 1.0
    inter = len(a.bits & b.bits)
    union = len(a.bits | b.bits)
    return inter / union
