"""Robust decoder for a SELFIES-like token subset.

Supported tokens: atom tokens [C] [N] [O] [F] [S] [P] [Cl] [Br] [I] with
optional = / # bond prefixes, [Branch1] [Branch2] [Ring1] [Ring2] followed by
index tokens.  Decoding never fails: bond orders are truncated to the
remaining bonding capacity, over-long branches and rings are clipped, and
unknown tokens are skipped.
"""

from __future__ import annotations

import re

from .graph import Atom, Bond, MolGraph, assign_hydrogens
from .canon import canonical_smiles

#: bonding capacity used during derivation (kept within the valence table)
_CAPACITY = {
    "C": 4,
    "N": 3,
    "O": 2,
    "F": 1,
    "S": 6,
    "P": 5,
    "Cl": 1,
    "Br": 1,
    "I": 1,
}

#: token -> numeric value for branch-length and ring-distance indices
_INDEX_ALPHABET = [
    "[C]",
    "[Ring1]",
    "[Ring2]",
    "[Branch1]",
    "[=Branch1]",
    "[#Branch1]",
    "[Branch2]",
    "[=Branch2]",
    "[#Branch2]",
    "[O]",
    "[N]",
    "[=N]",
    "[=C]",
    "[#C]",
    "[S]",
    "[P]",
]
_INDEX_VALUE = {tok: i for i, tok in enumerate(_INDEX_ALPHABET)}

_TOKEN_RE = re.compile(r"\[[^\[\]]*\]")
_ATOM_RE = re.compile(r"\[(=|#)?(C|N|O|F|S|P|Cl|Br|I)\]")

ATOM_TOKENS = [f"[{p}{s}]" for s in _CAPACITY for p in ("", "=", "#")]
CONTROL_TOKENS = ["[Branch1]", "[Branch2]", "[Ring1]", "[Ring2]"]


def tokenize_selfies(s: str) -> list[str]:
    return _TOKEN_RE.findall(s)


def _index_value(tokens: list[str], pos: int, count: int) -> int:
    q = 0
    for k in range(count):
        tok = tokens[pos + k] if pos + k < len(tokens) else "[C]"
        q = q * 16 + _INDEX_VALUE.get(tok, 0)
    return q


class _Builder:
    def __init__(self):
        self.graph = MolGraph()
        self.capacity: list[int] = []

    def add_atom(self, symbol: str) -> int:
        self.graph.atoms.append(Atom(symbol=symbol))
        self.capacity.append(_CAPACITY[symbol])
        return len(self.graph.atoms) - 1

    def bond(self, a: int, b: int, order: int) -> int:
        """Create a bond capped by both capacities; returns the realized order."""
        if a == b:
            return 0
        for bd in self.graph.bonds:
            if bd.key() == ((a, b) if a < b else (b, a)):
                return 0
        order = min(order, self.capacity[a], self.capacity[b])
        if order <= 0:
            return 0
        self.graph.bonds.append(Bond(a, b, order=order))
        self.capacity[a] -= order
        self.capacity[b] -= order
        return order


def _derive(builder: _Builder, tokens: list[str], prev: int | None) -> None:
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        m = _ATOM_RE.fullmatch(tok)
        if m:
            order = {None: 1, "=": 2, "#": 3}[m.group(1)]
            if prev is not None and builder.capacity[prev] <= 0:
                return  # chain cannot be extended: drop the rest
            idx = builder.add_atom(m.group(2))
            if prev is not None:
                builder.bond(prev, idx, order)
            prev = idx
            i += 1
            continue
        if tok in ("[Branch1]", "[Branch2]"):
            n_index = 1 if tok == "[Branch1]" else 2
            if prev is None or builder.capacity[prev] <= 1:
                i += 1
                continue
            q = _index_value(tokens, i + 1, n_index)
            start = i + 1 + n_index
            length = q + 1
            branch = tokens[start : start + length]
            _derive(builder, branch, prev)
            i = start + length
            continue
        if tok in ("[Ring1]", "[Ring2]"):
            n_index = 1 if tok == "[Ring1]" else 2
            if prev is None:
                i += 1
                continue
            q = _index_value(tokens, i + 1, n_index)
            target = len(builder.graph.atoms) - 1 - (q + 1)
            if target < 0:
                target = 0
            builder.bond(prev, target, 1)
            i += 1 + n_index
            continue
        i += 1  # unknown token: skip


def decode_selfies(s: str) -> str:
    """Decode a SELFIES-subset token string to a valence-valid SMILES string."""
    builder = _Builder()
    _derive(builder, tokenize_selfies(s), None)
    g = builder.graph
    if not g.atoms:
        return ""
    assign_hydrogens(g)
    return canonical_smiles(g)
