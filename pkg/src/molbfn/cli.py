"""Command-line front end.

Every subcommand is a thin client of the HTTP service: by default the app is
mounted in-process, and --server switches to a running instance.  All file
paths are resolved on the machine the service runs on.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=3600.0)
    from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _post(server: str | None, path: str, payload: dict) -> dict:
    with _client(server) as client:
        resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(1)
    return resp.json()


server_option = click.option(
    "--server", default=None, help="URL of a running service; in-process if unset."
)


@click.group()
def main() -> None:
    """Bayesian-flow molecular sequence generator."""


@main.command("build-vocab")
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option(
    "--scheme",
    required=True,
    type=click.Choice(["smiles", "selfies", "amino-acid"]),
)
@click.option("--out", "out_path", required=True, type=click.Path())
@server_option
def build_vocab_cmd(input_path: str, scheme: str, out_path: str, server: str | None):
    """Build a token vocabulary from a dataset file."""
    resp = _post(
        server,
        "/vocab/build",
        {"input_path": input_path, "scheme": scheme, "out_path": out_path},
    )
    click.echo(f"wrote {resp['out_path']} ({resp['size']} tokens, {resp['scheme']})")


@main.command("train")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--vocab", "vocab_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--resume", default=None, type=click.Path())
@server_option
def train_cmd(config_path, data_path, vocab_path, out_dir, resume, server):
    """Train a model; the JSON config must include seq_len."""
    try:
        config = json.loads(Path(config_path).read_text())
    except (OSError, ValueError) as exc:
        click.echo(f"error: cannot read config {config_path}: {exc}", err=True)
        sys.exit(1)
    resp = _post(
        server,
        "/train",
        {
            "data_path": data_path,
            "vocab_path": vocab_path,
            "out_dir": out_dir,
            "config": config,
            "resume": resume,
        },
    )
    click.echo(f"trained {resp['steps']} steps -> {resp['checkpoint']}")


@main.command("sample")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path())
@click.option("--vocab", "vocab_path", required=True, type=click.Path())
@click.option("--count", required=True, type=int)
@click.option("--steps", default=100, type=int)
@click.option("--tau", default=0.5, type=float)
@click.option("--method", default="ode", type=click.Choice(["ode", "native"]))
@click.option("--mask", default="normal", type=click.Choice(["normal", "sar"]))
@click.option("--condition", default=None, help='Comma-separated floats, e.g. "0.5,3,-9".')
@click.option("--guidance", default=0.5, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@server_option
def sample_cmd(
    ckpt_path, vocab_path, count, steps, tau, method, mask,
    condition, guidance, seed, out_path, server,
):
    """Sample sequences from a checkpoint into a JSON-lines file."""
    cond = None
    if condition:
        try:
            cond = [float(x) for x in condition.split(",")]
        except ValueError:
            click.echo(f"error: bad --condition value {condition!r}", err=True)
            sys.exit(1)
    resp = _post(
        server,
        "/sample",
        {
            "ckpt_path": ckpt_path,
            "vocab_path": vocab_path,
            "count": count,
            "steps": steps,
            "tau": tau,
            "method": method,
            "mask": mask,
            "condition": cond,
            "guidance": guidance,
            "seed": seed,
            "out_path": out_path,
        },
    )
    click.echo(f"wrote {resp['count']} samples ({resp['valid']} valid) -> {resp['out_path']}")


@main.command("eval")
@click.option("--samples", "samples_glob", required=True,
              help="JSONL sample file or glob; each file is one repeat.")
@click.option("--train", "train_path", required=True, type=click.Path())
@click.option("--scorer", default=None,
              help="External scorer command or URL; built-in toy oracle if unset.")
@click.option("--thresholds", "thresholds_path", default=None, type=click.Path())
@click.option("--unique-k", default=1000, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@server_option
def eval_cmd(samples_glob, train_path, scorer, thresholds_path, unique_k, out_path, server):
    """Score samples and write a metrics report."""
    thresholds = {}
    if thresholds_path:
        try:
            thresholds = json.loads(Path(thresholds_path).read_text())
        except (OSError, ValueError) as exc:
            click.echo(f"error: cannot read thresholds: {exc}", err=True)
            sys.exit(1)
    resp = _post(
        server,
        "/eval",
        {
            "samples_glob": samples_glob,
            "train_path": train_path,
            "scorer": scorer,
            "thresholds": thresholds,
            "unique_k": unique_k,
            "out_path": out_path,
        },
    )
    hit = resp["report"]["hit_ratio"]
    click.echo(
        f"wrote {resp['out_path']} "
        f"(hit ratio {hit['mean']:.2f} ± {hit['std']:.2f} over {hit['n']} repeats)"
    )


@main.command("plotdata")
@click.option("--reports", "reports_glob", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@server_option
def plotdata_cmd(reports_glob, out_path, server):
    """Collect report JSONs into one CSV table."""
    resp = _post(
        server, "/plotdata", {"reports_glob": reports_glob, "out_path": out_path}
    )
    click.echo(f"wrote {resp['rows']} rows -> {resp['out_path']}")


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve_cmd(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
