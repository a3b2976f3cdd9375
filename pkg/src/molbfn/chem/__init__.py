"""Molecular string parsing, validation, canonicalization and similarity."""

from .graph import (
    Atom,
    Bond,
    MolGraph,
    SmilesError,
    is_valid,
    parse_smiles,
)
from .canon import canonical_smiles
from .fingerprint import Fingerprint, morgan_fingerprint, tanimoto
from .selfies import ATOM_TOKENS, CONTROL_TOKENS, decode_selfies, tokenize_selfies

__all__ = [
    "Atom",
    "Bond",
    "MolGraph",
    "SmilesError",
    "is_valid",
    "parse_smiles",
    "canonical_smiles",
    "Fingerprint",
    "morgan_fingerprint",
    "tanimoto",
    "ATOM_TOKENS",
    "CONTROL_TOKENS",
    "decode_selfies",
    "tokenize_selfies",
]
