"""HTTP service exposing the pipeline: vocabulary building, training,
sampling, evaluation, and plot-data export.

The service operates on files the caller names; it runs on the same machine
as the data.  The command-line tool is a thin client that talks to this app,
in-process by default or over the network when pointed at a running server.
"""

from __future__ import annotations

import csv
import glob as globmod
import json
import math
import platform
import statistics
from pathlib import Path
from typing import Literal

import torch
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .bfn import GuidanceConfig
from .chem import morgan_fingerprint, parse_smiles
from .chem.graph import is_valid
from .metrics import (
    FilterThresholds,
    PropertyRecord,
    ScoredSample,
    novelty,
    protocol_report,
    snn,
    unique_at_k,
    validity_ratio,
)
from .model import load_checkpoint
from .sampling import SamplerConfig, generate_batch
from .scoring import ScoreResult, score_http, score_subprocess, score_toy
from .tokenize import Vocab, build_vocab, load_dataset
from .training import TrainConfig, fit
from .model import ModelConfig

SCHEME_ALIASES = {
    "smiles": "smiles-atomwise",
    "selfies": "selfies-tokenwise",
    "amino-acid": "amino-acid",
}


def _manifest(seed: int | None, config: dict) -> dict:
    return {
        "version": __version__,
        "torch": torch.__version__,
        "python": platform.python_version(),
        "seed": seed,
        "config": config,
    }


def _write_manifest(path: Path, seed: int | None, config: dict) -> None:
    path.write_text(json.dumps(_manifest(seed, config), indent=1))


class BuildVocabRequest(BaseModel):
    input_path: str
    scheme: Literal["smiles", "selfies", "amino-acid"]
    out_path: str


class BuildVocabResponse(BaseModel):
    out_path: str
    scheme: str
    size: int


class TrainRequest(BaseModel):
    data_path: str
    vocab_path: str
    out_dir: str
    config: dict = Field(default_factory=dict)
    resume: str | None = None


class TrainResponse(BaseModel):
    checkpoint: str
    steps: int


class SampleRequest(BaseModel):
    ckpt_path: str
    out_path: str
    count: int = Field(ge=1)
    steps: int = Field(default=100, ge=1)
    tau: float = Field(default=0.5, ge=0.0)
    method: Literal["ode", "native"] = "ode"
    mask: Literal["normal", "sar"] = "normal"
    condition: list[float] | None = None
    guidance: float = 0.5
    seed: int = 0
    vocab_path: str


class SampleResponse(BaseModel):
    out_path: str
    count: int
    valid: int


class EvalRequest(BaseModel):
    samples_glob: str  # each matching JSONL file is one repeat
    train_path: str
    out_path: str
    scorer: str | None = None  # shell command or http(s) URL; None = toy oracle
    thresholds: dict = Field(default_factory=dict)
    unique_k: int = Field(default=1000, ge=1)


class EvalResponse(BaseModel):
    out_path: str
    report: dict


class PlotDataRequest(BaseModel):
    reports_glob: str
    out_path: str


class PlotDataResponse(BaseModel):
    out_path: str
    rows: int


def _score_batch(smiles: list[str], scorer: str | None) -> list[ScoreResult]:
    if scorer is None:
        out = []
        for s in smiles:
            try:
                qed, sa, ds = score_toy(parse_smiles(s))
                out.append(ScoreResult(qed, sa, ds))
            except ValueError as exc:
                out.append(ScoreResult(None, None, None, error=str(exc)))
        return out
    if scorer.startswith("http://") or scorer.startswith("https://"):
        return score_http(smiles, scorer)
    import shlex

    return score_subprocess(smiles, shlex.split(scorer))


def _finite(*values: float | None) -> bool:
    return all(v is not None and math.isfinite(v) for v in values)


def create_app() -> FastAPI:
    app = FastAPI(title="molbfn", version=__version__)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/vocab/build", response_model=BuildVocabResponse)
    def vocab_build(req: BuildVocabRequest) -> BuildVocabResponse:
        if not Path(req.input_path).exists():
            raise HTTPException(400, f"input file not found: {req.input_path}")
        strings, _ = load_dataset(req.input_path)
        scheme = SCHEME_ALIASES[req.scheme]
        try:
            vocab = build_vocab(strings, scheme)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        vocab.save(req.out_path)
        return BuildVocabResponse(
            out_path=req.out_path, scheme=scheme, size=vocab.size
        )

    @app.post("/train", response_model=TrainResponse)
    def train(req: TrainRequest) -> TrainResponse:
        for path, label in ((req.data_path, "data"), (req.vocab_path, "vocab")):
            if not Path(path).exists():
                raise HTTPException(400, f"{label} file not found: {path}")
        vocab = Vocab.load(req.vocab_path)
        strings, conditions = load_dataset(req.data_path)
        cfg_dict = dict(req.config)
        seq_len = cfg_dict.pop("seq_len", None)
        if seq_len is None:
            raise HTTPException(400, "training config must set seq_len")
        model_keys = {"layers", "heads", "hidden"}
        model_over = {k: cfg_dict.pop(k) for k in list(cfg_dict) if k in model_keys}
        cond_dim = len(conditions[0]) if conditions else 0
        base = ModelConfig.desk(vocab.size, seq_len, cond_dim=cond_dim)
        model_cfg = ModelConfig(
            layers=model_over.get("layers", base.layers),
            heads=model_over.get("heads", base.heads),
            hidden=model_over.get("hidden", base.hidden),
            vocab_size=vocab.size,
            seq_len=seq_len,
            cond_dim=cond_dim,
        )
        try:
            train_cfg = TrainConfig.from_json(cfg_dict)
        except (TypeError, ValueError) as exc:
            raise HTTPException(400, f"bad training config: {exc}")
        out_dir = Path(req.out_dir)
        try:
            final = fit(
                strings,
                vocab,
                seq_len,
                model_cfg,
                train_cfg,
                out_dir,
                conditions=conditions,
                resume=req.resume,
            )
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        _, meta = load_checkpoint(final)
        _write_manifest(
            out_dir / "manifest.json",
            train_cfg.seed,
            {
                "command": "train",
                "data": req.data_path,
                "vocab": req.vocab_path,
                "seq_len": seq_len,
                "model": {
                    "layers": model_cfg.layers,
                    "heads": model_cfg.heads,
                    "hidden": model_cfg.hidden,
                },
                "train": train_cfg.to_json(),
            },
        )
        return TrainResponse(checkpoint=str(final), steps=meta["step"])

    @app.post("/sample", response_model=SampleResponse)
    def sample(req: SampleRequest) -> SampleResponse:
        for path, label in ((req.ckpt_path, "checkpoint"), (req.vocab_path, "vocab")):
            if not Path(path).exists():
                raise HTTPException(400, f"{label} file not found: {path}")
        model, _ = load_checkpoint(req.ckpt_path)
        vocab = Vocab.load(req.vocab_path)
        if vocab.size != model.config.vocab_size:
            raise HTTPException(
                400, "vocabulary size does not match the checkpoint"
            )
        cfg = SamplerConfig(
            steps=req.steps,
            tau=req.tau,
            method=req.method,
            mask=req.mask,
            guidance=GuidanceConfig(
                strength=req.guidance,
                condition=tuple(req.condition) if req.condition else None,
            ),
            seed=req.seed,
        )
        records = generate_batch(model, cfg, req.count, vocab)
        out = Path(req.out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_json()) + "\n")
        _write_manifest(
            out.with_suffix(out.suffix + ".manifest.json"),
            req.seed,
            {"command": "sample", **req.model_dump()},
        )
        return SampleResponse(
            out_path=str(out),
            count=len(records),
            valid=sum(1 for r in records if r.valid),
        )

    @app.post("/eval", response_model=EvalResponse)
    def evaluate(req: EvalRequest) -> EvalResponse:
        files = sorted(globmod.glob(req.samples_glob))
        if not files:
            raise HTTPException(400, f"no sample files match {req.samples_glob!r}")
        if not Path(req.train_path).exists():
            raise HTTPException(400, f"train file not found: {req.train_path}")
        train_strings, _ = load_dataset(req.train_path)
        train_graphs = [parse_smiles(s) for s in train_strings]
        train_fps = [morgan_fingerprint(g) for g in train_graphs]
        from .chem import canonical_smiles

        train_canon = {canonical_smiles(g) for g in train_graphs}
        th_kwargs = dict(req.thresholds)
        if "ds_max" not in th_kwargs:
            # default threshold: median stand-in docking score of the
            # training set under whichever scorer is active
            train_scores = _score_batch(train_strings, req.scorer)
            ds_values = [r.ds for r in train_scores if r.ok and _finite(r.ds)]
            if not ds_values:
                raise HTTPException(400, "could not score the training set")
            th_kwargs["ds_max"] = statistics.median(ds_values)
        th = FilterThresholds(**th_kwargs)

        repeats: list[list[ScoredSample]] = []
        per_repeat_basic = []
        for path in files:
            decoded = []
            for line in Path(path).read_text().splitlines():
                if line.strip():
                    decoded.append(json.loads(line)["decoded"])
            valid_idx = [
                i for i, s in enumerate(decoded) if s.strip() and is_valid(s)
            ]
            results = _score_batch([decoded[i] for i in valid_idx], req.scorer)
            scored: list[ScoredSample] = [
                ScoredSample(smiles=s, record=None) for s in decoded
            ]
            for i, res in zip(valid_idx, results):
                if not res.ok or not _finite(res.qed, res.sa, res.ds):
                    continue  # unscored molecules count as non-hits
                fp = morgan_fingerprint(parse_smiles(decoded[i]))
                scored[i] = ScoredSample(
                    smiles=decoded[i],
                    record=PropertyRecord(
                        qed=res.qed, sa=res.sa, ds=res.ds,
                        snn=snn(fp, train_fps),
                    ),
                )
            repeats.append(scored)
            per_repeat_basic.append(
                {
                    "file": path,
                    "validity": validity_ratio(decoded),
                    "unique_at_k": unique_at_k(decoded, req.unique_k),
                    "novelty": novelty(decoded, train_canon),
                }
            )
        report = protocol_report(repeats, th)
        report["samples"] = per_repeat_basic
        out = Path(req.out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report, indent=1))
        return EvalResponse(out_path=str(out), report=report)

    @app.post("/plotdata", response_model=PlotDataResponse)
    def plotdata(req: PlotDataRequest) -> PlotDataResponse:
        files = sorted(globmod.glob(req.reports_glob))
        if not files:
            raise HTTPException(400, f"no reports match {req.reports_glob!r}")
        rows = []
        for path in files:
            report = json.loads(Path(path).read_text())
            rows.append(
                {
                    "report": path,
                    "hit_ratio_mean": report["hit_ratio"]["mean"],
                    "hit_ratio_std": report["hit_ratio"]["std"],
                    "top5_ds_mean": report["top5_ds"]["mean"],
                    "top5_ds_std": report["top5_ds"]["std"],
                    "validity_mean": statistics.fmean(
                        r["validity"] for r in report.get("samples", [])
                    )
                    if report.get("samples")
                    else None,
                }
            )
        out = Path(req.out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        return PlotDataResponse(out_path=str(out), rows=len(rows))

    return app


app = create_app()
