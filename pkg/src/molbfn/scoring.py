"""Property scorers: deterministic toy oracles for pipeline tests, plus
clients for external scorers over a subprocess line protocol or HTTP.

Line protocol: one SMILES per request line on standard input, end-of-input
terminates the batch; one response line per molecule, either tab-separated
"qed\tsa\tds" decimals or the literal token "ERR".  Responses are
order-preserving; a failed line never fails the batch.
"""

from __future__ import annotations

import math
import subprocess
from dataclasses import dataclass

from .chem.graph import MolGraph


@dataclass(frozen=True)
class ScoreResult:
    """One scored molecule, or a per-molecule error."""

    qed: float | None
    sa: float | None
    ds: float | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def score_toy(g: MolGraph) -> tuple[float, float, float]:
    """Deterministic non-physical stand-in properties (qed, sa, ds).

    Depends only on heavy-atom count and ring count, so isomorphic graphs
    score identically.  Useful for exercising the screening pipeline, not
    for chemistry.
    """
    hac = len(g.atoms)
    components = _component_count(g)
    rings = len(g.bonds) - hac + components
    qed_like = math.exp(-abs(hac - 24) / 12)
    sa_like = min(10.0, 1.0 + rings + 0.1 * hac)
    ds_like = -0.35 * hac
    return qed_like, sa_like, ds_like


def _component_count(g: MolGraph) -> int:
    adj: dict[int, list[int]] = {i: [] for i in range(len(g.atoms))}
    for b in g.bonds:
        adj[b.a].append(b.b)
        adj[b.b].append(b.a)
    seen: set[int] = set()
    count = 0
    for start in adj:
        if start in seen:
            continue
        count += 1
        stack = [start]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(adj[v])
    return count


def _parse_line(line: str) -> ScoreResult:
    line = line.rstrip("\n")
    if line == "ERR":
        return ScoreResult(None, None, None, error="scorer reported ERR")
    parts = line.split("\t")
    if len(parts) != 3:
        return ScoreResult(None, None, None, error=f"malformed line: {line!r}")
    try:
        qed, sa, ds = (float(p) for p in parts)
    except ValueError:
        return ScoreResult(None, None, None, error=f"non-numeric line: {line!r}")
    return ScoreResult(qed, sa, ds)


def score_subprocess(
    smiles: list[str], command: list[str], timeout: float = 300.0
) -> list[ScoreResult]:
    """Run an external scorer once for the whole batch over the line protocol."""
    if not smiles:
        return []
    if any("\n" in s or "\r" in s for s in smiles):
        raise ValueError("SMILES strings must be single-line")
    try:
        proc = subprocess.run(
            command,
            input="\n".join(smiles) + "\n",
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except FileNotFoundError as exc:
        raise RuntimeError(f"scorer launch failed: {exc}") from exc
    except subprocess.TimeoutExpired as exc:
        raise RuntimeError(f"scorer timed out after {timeout}s") from exc
    if proc.returncode != 0:
        raise RuntimeError(
            f"scorer exited with status {proc.returncode}: {proc.stderr.strip()}"
        )
    lines = proc.stdout.splitlines()
    if len(lines) != len(smiles):
        raise RuntimeError(
            f"scorer returned {len(lines)} lines for {len(smiles)} molecules"
        )
    return [_parse_line(line) for line in lines]


def score_http(
    smiles: list[str], url: str, timeout: float = 300.0
) -> list[ScoreResult]:
    """POST JSON {"smiles": [...]} and read back a JSON record list.

    Each record is {"qed": x, "sa": y, "ds": z} or {"error": "..."}.
    """
    import httpx

    if not smiles:
        return []
    resp = httpx.post(url, json={"smiles": smiles}, timeout=timeout)
    resp.raise_for_status()
    records = resp.json()["records"]
    if len(records) != len(smiles):
        raise RuntimeError(
            f"scorer returned {len(records)} records for {len(smiles)} molecules"
        )
    out = []
    for rec in records:
        if "error" in rec:
            out.append(ScoreResult(None, None, None, error=str(rec["error"])))
        else:
            out.append(
                ScoreResult(float(rec["qed"]), float(rec["sa"]), float(rec["ds"]))
            )
    return out
