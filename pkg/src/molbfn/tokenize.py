"""Vocabularies and fixed-length token sequences.

Three tokenization schemes are supported: atom-wise SMILES (two-letter
elements, bracket atoms and %nn closures kept whole), SELFIES token-wise, and
amino-acid characters.  Ids 0..3 are reserved for pad/start/end/unknown.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

PAD, START, END, UNK = 0, 1, 2, 3
RESERVED = ["<pad>", "<start>", "<end>", "<unk>"]

SCHEMES = ("smiles-atomwise", "selfies-tokenwise", "amino-acid")

_SMILES_TOKEN_RE = re.compile(
    r"(\[[^\[\]]*\]|Cl|Br|%\d\d|.)"
)
_SELFIES_TOKEN_RE = re.compile(r"(\[[^\[\]]*\])")


class TokenizeError(ValueError):
    pass


def split_tokens(s: str, scheme: str) -> list[str]:
    if scheme == "smiles-atomwise":
        return _SMILES_TOKEN_RE.findall(s)
    if scheme == "selfies-tokenwise":
        toks = _SELFIES_TOKEN_RE.findall(s)
        if "".join(toks) != s:
            raise TokenizeError(f"non-bracket characters in SELFIES string: {s!r}")
        return toks
    if scheme == "amino-acid":
        return list(s)
    raise TokenizeError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True)
class Vocab:
    scheme: str
    tokens: tuple[str, ...]  # full ordered token list including reserved ids
    index: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise TokenizeError(f"unknown scheme {self.scheme!r}")
        if list(self.tokens[:4]) != RESERVED:
            raise TokenizeError("vocab must start with the reserved tokens")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK)

    def token_of(self, idx: int) -> str:
        if 0 <= idx < len(self.tokens):
            return self.tokens[idx]
        return RESERVED[UNK]

    def to_json(self) -> dict:
        return {"scheme": self.scheme, "tokens": list(self.tokens)}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocab":
        return cls(scheme=obj["scheme"], tokens=tuple(obj["tokens"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        return cls.from_json(json.loads(Path(path).read_text()))


def build_vocab(corpus, scheme: str) -> Vocab:
    """Deterministic vocabulary: frequency-descending, then token-ascending."""
    counts: Counter[str] = Counter()
    n = 0
    for line in corpus:
        counts.update(split_tokens(line, scheme))
        n += 1
    if n == 0:
        raise TokenizeError("empty corpus")
    ordered = sorted(counts, key=lambda t: (-counts[t], t))
    return Vocab(scheme=scheme, tokens=tuple(RESERVED + ordered))


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.ids)


def encode(s: str, vocab: Vocab, length: int) -> TokenSequence:
    toks = split_tokens(s, vocab.scheme)
    if len(toks) > length - 2:
        raise TokenizeError(
            f"string of {len(toks)} tokens does not fit in length {length}"
        )
    ids = [START] + [vocab.id_of(t) for t in toks] + [END]
    ids += [PAD] * (length - len(ids))
    return TokenSequence(ids=tuple(ids))


def decode(t: TokenSequence, vocab: Vocab) -> str:
    out: list[str] = []
    for idx in t.ids:
        if idx >= vocab.size or idx < 0:
            idx = UNK
        if idx == END:
            break
        if idx in (PAD, START):
            continue
        if idx == UNK:
            return ""  # conservative: let the validity check reject it
        out.append(vocab.token_of(idx))
    return "".join(out)


def content_mask(t: TokenSequence) -> tuple[bool, ...]:
    """True for non-pad positions (start/end are content for the loss)."""
    return tuple(idx != PAD for idx in t.ids)


def load_dataset(path: str | Path) -> tuple[list[str], list[list[float]] | None]:
    """One record per line; optional tab-separated float condition columns."""
    strings: list[str] = []
    conds: list[list[float]] = []
    has_cond = False
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split("\t")
        strings.append(parts[0])
        if len(parts) > 1:
            has_cond = True
            conds.append([float(x) for x in parts[1:]])
        else:
            conds.append([])
    if has_cond and any(len(c) != len(conds[0]) for c in conds):
        raise TokenizeError("inconsistent condition column count")
    return strings, (conds if has_cond else None)
