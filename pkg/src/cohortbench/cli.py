"""Command-line client.

Every data-touching subcommand goes through the HTTP service layer: by
default against an in-process app instance (no socket), or against a
running server when --server is given. File reads and writes stay on the
client side; the service only computes.

Exit codes: 0 success, 1 run completed with partial failures,
2 fatal configuration or data error.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx

from .ingest import COHORT_IDS
from .modelhost import NATIVE_KINDS
from .pipeline import ConfigError, config_from_dict, config_to_dict
from .synth import DEFAULT_SYNTH_SEED, write_all

_REQUEST_TIMEOUT = None  # full runs can take minutes


def _post(server: str | None, path: str, payload: dict) -> dict:
    if server:
        resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=_REQUEST_TIMEOUT)
    else:
        from .service import create_app  # deferred: keeps --help fast

        transport = httpx.ASGITransport(app=create_app())

        async def _go():
            async with httpx.AsyncClient(
                transport=transport, base_url="http://bench", timeout=_REQUEST_TIMEOUT
            ) as client:
                return await client.post(path, json=payload)

        resp = asyncio.run(_go())
    if resp.status_code >= 400:
        detail = resp.text
        try:
            detail = resp.json().get("detail", detail)
        except ValueError:
            pass
        click.echo(f"error: {detail}", err=True)
        sys.exit(2)
    return resp.json()


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


@click.group()
def main():
    """Four-axis screening-model benchmark."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--jobs", type=int, default=None, help="Evaluation worker limit.")
@click.option("--server", default=None, help="Server URL (default: in-process).")
def run(config_path, seed, out_dir, jobs, server):
    """Run the full benchmark described by a JSON config file."""
    path = Path(config_path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        _fail(f"cannot read config: {exc}")
    if seed is not None:
        raw["seed"] = seed
    if jobs is not None:
        raw["jobs"] = jobs
    try:
        cfg = config_from_dict(raw, base_dir=path.parent)
    except ConfigError as exc:
        _fail(str(exc))

    result = _post(server, "/run", {"config": config_to_dict(cfg)})

    target = Path(out_dir or cfg.out_dir or "bench_out")
    target.mkdir(parents=True, exist_ok=True)
    for name, content in sorted(result["files"].items()):
        (target / name).write_text(content, encoding="utf-8")

    for rec in result["report"]["recommendations"]:
        flag = "  [calibration warning]" if rec["calibration_warning"] else ""
        click.echo(f"{rec['cohort_id']:<12} {rec['setting']:<8} -> {rec['model_id']}{flag}")
    failed = [r for r in result["report"]["records"] if r.get("error")]
    for r in failed:
        click.echo(f"failed: ({r['model_id']}, {r['cohort_id']}): {r['error']}", err=True)
    click.echo(f"reports written to {target}")
    sys.exit(1 if result["partial_failures"] else 0)


@main.command()
@click.option("--confusions", "confusions_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--lambda", "lam", default="1.0", help="Penalty weight, or 'auto'.")
@click.option("--sweep", is_flag=True, help="Include the cost-ratio ranking sweep.")
@click.option("--server", default=None)
def hap(confusions_path, lam, sweep, server):
    """Score fold confusion matrices with the variance-penalized cost."""
    try:
        raw = json.loads(Path(confusions_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        _fail(f"cannot read confusions: {exc}")
    payload = {
        "confusions": raw.get("confusions", raw) if isinstance(raw, dict) else raw,
        "sweep": sweep,
    }
    if isinstance(raw, dict) and "weights" in raw:
        payload["weights"] = raw["weights"]
    if lam != "auto":
        try:
            payload["lambda"] = float(lam)
        except ValueError:
            _fail(f"--lambda must be a number or 'auto', got {lam!r}")
    else:
        payload["lambda"] = "auto"
    result = _post(server, "/hap", payload)
    click.echo(json.dumps(result, indent=2, sort_keys=True))


def _parse_model_option(text: str) -> dict:
    """--model accepts a native kind name, inline JSON, or @spec.json."""
    shorthand = {
        "majority": "native_majority",
        "logreg": "native_logreg",
        "knn": "native_knn",
    }
    if text in shorthand:
        text = shorthand[text]
    if text in NATIVE_KINDS:
        return {"model_id": text.removeprefix("native_"), "kind": text}
    if text.startswith("@"):
        try:
            return json.loads(Path(text[1:]).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            _fail(f"cannot read model spec {text[1:]}: {exc}")
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        _fail(
            f"--model must be one of {', '.join(NATIVE_KINDS)} (or majority/logreg/knn), "
            f"inline JSON, or @file.json; got {text!r}"
        )


def _infer_cohort(data_path: str, cohort: str | None) -> str:
    if cohort:
        return cohort
    stem = Path(data_path).stem
    if stem in COHORT_IDS:
        return stem
    _fail(
        f"cannot infer cohort from filename {stem!r}; pass --cohort "
        f"({', '.join(COHORT_IDS)})"
    )


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_text", required=True)
@click.option("--protocol", type=click.Choice(["flip", "noise", "removal"]), required=True)
@click.option("--level", type=float, required=True)
@click.option("--cohort", default=None, type=click.Choice(COHORT_IDS))
@click.option("--seed", type=int, default=42)
@click.option("--server", default=None)
def perturb(data_path, model_text, protocol, level, cohort, seed, server):
    """Measure one model's accuracy drop under a single perturbation."""
    cohort_id = _infer_cohort(data_path, cohort)
    try:
        csv_text = Path(data_path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail(str(exc))
    result = _post(
        server,
        "/perturb",
        {
            "csv_text": csv_text,
            "cohort_id": cohort_id,
            "model": _parse_model_option(model_text),
            "protocol": protocol,
            "level": level,
            "seed": seed,
        },
    )
    click.echo(json.dumps(result, indent=2, sort_keys=True))


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--cohort", default=None, type=click.Choice(COHORT_IDS))
@click.option("--server", default=None)
def validate(data_path, cohort, server):
    """Load a cohort file and report dedup / balance / screening stats."""
    cohort_id = _infer_cohort(data_path, cohort)
    try:
        csv_text = Path(data_path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail(str(exc))
    result = _post(server, "/validate", {"csv_text": csv_text, "cohort_id": cohort_id})
    click.echo(json.dumps(result, indent=2, sort_keys=True))


@main.command()
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="data")
@click.option("--seed", type=int, default=DEFAULT_SYNTH_SEED)
def synth(out_dir, seed):
    """Write the synthetic cohort files plus a ready-to-run config."""
    counts = write_all(out_dir, seed)
    config = {
        "cohorts": [{"id": cid, "path": f"{cid}.csv"} for cid in counts],
        "models": [
            {"model_id": "majority", "kind": "native_majority"},
            {"model_id": "logreg", "kind": "native_logreg"},
            {"model_id": "knn", "kind": "native_knn"},
        ],
        "seed": 42,
        "out_dir": "bench_out",
    }
    config_path = Path(out_dir) / "config.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    for cid, n in counts.items():
        click.echo(f"{cid}: {n} rows")
    click.echo(f"config written to {config_path}")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the benchmark service as an HTTP server."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
