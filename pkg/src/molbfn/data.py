"""Synthetic desk-scale corpora: simple acyclic C/N/O molecules."""

from __future__ import annotations

import random

from .chem import is_valid

_ATOMS = ["C", "C", "C", "N", "O"]  # carbon-heavy mix
_REMAINING = {"C": 4, "N": 3, "O": 2}


def random_simple_smiles(rng: random.Random, max_len: int = 12) -> str:
    """One random acyclic C/N/O SMILES of at most `max_len` characters."""
    while True:
        out: list[str] = []
        budget = rng.randint(1, max_len)

        def grow(parent_remaining: int, chars_left: int) -> int:
            atom = rng.choice(_ATOMS)
            bond = ""
            order = 1
            if parent_remaining >= 2 and _REMAINING[atom] >= 2 and rng.random() < 0.15:
                bond, order = "=", 2
            out.append(bond + atom)
            chars_left -= len(bond) + 1
            remaining = _REMAINING[atom] - order
            while remaining > 0 and chars_left > 1 and rng.random() < 0.45:
                if remaining > 1 and chars_left > 3 and rng.random() < 0.3:
                    out.append("(")
                    chars_left = grow(remaining, chars_left - 2)
                    out.append(")")
                    remaining -= 1
                else:
                    chars_left = grow(remaining, chars_left)
                    remaining = 0
            return chars_left

        grow(8, budget)
        s = "".join(out)
        if len(s) <= max_len and is_valid(s):
            return s


def simple_smiles_corpus(count: int, seed: int = 0, max_len: int = 12) -> list[str]:
    rng = random.Random(seed)
    return [random_simple_smiles(rng, max_len) for _ in range(count)]
