"""Benchmark metrics for generated molecules: validity, uniqueness, novelty,
nearest-neighbor similarity, a generic Fréchet distance over pluggable
embeddings, and the screening protocol (property filters, novel hit ratio,
top-5% docking score)."""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chem import (
    Fingerprint,
    canonical_smiles,
    is_valid,
    morgan_fingerprint,
    parse_smiles,
    tanimoto,
)
from .tokenize import split_tokens


@dataclass(frozen=True)
class PropertyRecord:
    qed: float  # drug-likeness in [0, 1]
    sa: float  # synthetic accessibility, roughly 1..10, lower is easier
    ds: float  # docking score in kcal/mol, more negative is better
    snn: float  # Tanimoto similarity to the nearest training molecule

    def __post_init__(self):
        for name in ("qed", "sa", "ds", "snn"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not 0.0 <= self.snn <= 1.0:
            raise ValueError("snn must lie in [0, 1]")


@dataclass(frozen=True)
class FilterThresholds:
    qed_min: float = 0.5
    sa_max: float = 5.0
    ds_max: float = 0.0  # set to the median training-set docking score
    snn_max: float = 0.4


def _canonical_or_none(s: str) -> str | None:
    if not s or not s.strip() or not is_valid(s):
        return None
    try:
        return canonical_smiles(parse_smiles(s))
    except ValueError:
        return None


def validity_ratio(samples: list[str]) -> float:
    """Fraction of decoded strings that parse as valid molecules."""
    if not samples:
        return 0.0
    return sum(1 for s in samples if s.strip() and is_valid(s)) / len(samples)


def unique_at_k(samples: list[str], k: int) -> float:
    """Distinct canonical forms among the first k valid samples, over k.

    If fewer than k valid samples exist the ratio is over the available
    count; with no valid samples the value is 0 by decision.
    """
    valid = [c for c in (_canonical_or_none(s) for s in samples) if c is not None]
    head = valid[:k]
    if not head:
        return 0.0
    return len(set(head)) / len(head)


def novelty(samples: list[str], train_canon: set[str]) -> float:
    """Fraction of distinct valid canonical forms absent from the training set."""
    canon = {c for c in (_canonical_or_none(s) for s in samples) if c is not None}
    if not canon:
        return 0.0
    return sum(1 for c in canon if c not in train_canon) / len(canon)


def snn(sample_fp: Fingerprint, reference_fps: list[Fingerprint]) -> float:
    """Tanimoto similarity to the nearest neighbor in the reference set."""
    if not reference_fps:
        raise ValueError("reference fingerprint set is empty")
    return max(tanimoto(sample_fp, ref) for ref in reference_fps)


def frechet_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Fréchet distance between Gaussians fitted to two vector sets.

    ||mu_A - mu_B||^2 + Tr(S_A + S_B - 2 (S_A S_B)^{1/2}), with the matrix
    square root taken by eigendecomposition of the symmetrized product;
    eigenvalues below -1e-8 are an error, small negatives are clipped to 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("inputs must be 2-D with matching widths")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("non-finite embedding vectors")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    # rowvar=False covariance; a single sample yields the zero matrix
    cov_a = np.cov(a, rowvar=False) if a.shape[0] > 1 else np.zeros((a.shape[1],) * 2)
    cov_b = np.cov(b, rowvar=False) if b.shape[0] > 1 else np.zeros((b.shape[1],) * 2)
    cov_a = np.atleast_2d(cov_a)
    cov_b = np.atleast_2d(cov_b)
    def _psd_sqrt(m: np.ndarray) -> np.ndarray:
        vals, vecs = np.linalg.eigh((m + m.T) / 2.0)
        if (vals < -1e-8 * max(abs(vals).max(initial=0.0), 1.0)).any():
            raise ValueError("covariance matrix has significantly negative spectrum")
        return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T

    # Tr((S_A S_B)^{1/2}) = Tr((S_A^{1/2} S_B S_A^{1/2})^{1/2}); the inner
    # matrix is symmetric PSD, so a single eigendecomposition suffices
    root_a = _psd_sqrt(cov_a)
    inner = _psd_sqrt(root_a @ cov_b @ root_a)
    diff = mu_a - mu_b
    val = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(inner))
    return max(val, 0.0)


def token_frequency_embedding(samples: list[str], tokens: list[str]) -> np.ndarray:
    """Stand-in embedding for the Fréchet metric: normalized token frequency
    plus a length feature per string. Not a learned chemistry embedding."""
    index = {t: i for i, t in enumerate(tokens)}
    out = np.zeros((len(samples), len(tokens) + 1))
    for row, s in enumerate(samples):
        try:
            toks = split_tokens(s, "smiles-atomwise")
        except ValueError:
            toks = []
        for t in toks:
            if t in index:
                out[row, index[t]] += 1.0
        n = max(len(toks), 1)
        out[row, : len(tokens)] /= n
        out[row, -1] = len(toks) / 100.0
    return out


@dataclass(frozen=True)
class ScoredSample:
    smiles: str
    record: PropertyRecord | None  # None for invalid decodes

    @classmethod
    def from_json(cls, obj: dict, snn_value: float) -> "ScoredSample":
        return cls(
            smiles=obj["smiles"],
            record=PropertyRecord(
                qed=float(obj["qed"]),
                sa=float(obj["sa"]),
                ds=float(obj["ds"]),
                snn=snn_value,
            ),
        )


def apply_filters(r: PropertyRecord, th: FilterThresholds) -> bool:
    """All four screening conditions, strict inequalities."""
    return (
        r.qed > th.qed_min
        and r.sa < th.sa_max
        and r.ds < th.ds_max
        and r.snn < th.snn_max
    )


def _passing(samples: list[ScoredSample], th: FilterThresholds) -> list[ScoredSample]:
    return [s for s in samples if s.record is not None and apply_filters(s.record, th)]


def novel_hit_ratio(samples: list[ScoredSample], th: FilterThresholds) -> float:
    """Percent of all generated samples (invalid decodes included in the
    denominator) that pass every filter."""
    if not samples:
        return 0.0
    return 100.0 * len(_passing(samples, th)) / len(samples)


def novel_top5_ds(
    samples: list[ScoredSample], th: FilterThresholds
) -> float | None:
    """Mean docking score of the best ceil(5%) passing molecules; None when
    nothing passes. Ties in score are broken by canonical string."""
    passing = _passing(samples, th)
    if not passing:
        return None
    n = math.ceil(0.05 * len(passing))
    ranked = sorted(
        passing, key=lambda s: (s.record.ds, _canonical_or_none(s.smiles) or s.smiles)
    )
    return sum(s.record.ds for s in ranked[:n]) / n


def load_scored_samples(
    path: str | Path, reference_fps: list[Fingerprint]
) -> list[ScoredSample]:
    """JSON-lines records {smiles, qed, sa, ds}; similarity to the reference
    set is computed here. Records with an empty smiles field (or one that
    does not parse) carry no property record and count as non-hits."""
    out: list[ScoredSample] = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        s = obj.get("smiles", "")
        if not s.strip() or not is_valid(s):
            out.append(ScoredSample(smiles=s, record=None))
            continue
        fp = morgan_fingerprint(parse_smiles(s))
        out.append(ScoredSample.from_json(obj, snn(fp, reference_fps)))
    return out


def aggregate(values: list[float]) -> dict:
    """Mean and sample standard deviation over repeats."""
    if not values:
        return {"mean": None, "std": None, "n": 0}
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return {"mean": statistics.fmean(values), "std": std, "n": len(values)}


def protocol_report(
    repeats: list[list[ScoredSample]], th: FilterThresholds
) -> dict:
    """Per-repeat and aggregate hit ratio and top-5% docking score as a
    JSON-ready dict. Repeats where nothing passes contribute no top-5% value."""
    hit = [novel_hit_ratio(r, th) for r in repeats]
    top5 = [v for v in (novel_top5_ds(r, th) for r in repeats) if v is not None]
    return {
        "thresholds": {
            "qed_min": th.qed_min,
            "sa_max": th.sa_max,
            "ds_max": th.ds_max,
            "snn_max": th.snn_max,
        },
        "repeats": [
            {"hit_ratio": h, "top5_ds": t}
            for h, t in zip(hit, (novel_top5_ds(r, th) for r in repeats))
        ],
        "hit_ratio": aggregate(hit),
        "top5_ds": aggregate(top5),
    }
