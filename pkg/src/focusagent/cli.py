"""Command-line client for the focusagent service.

Subcommands send their work to the HTTP service: an in-process instance by
default (no network, used for offline scripted runs) or a remote server via
--server. ``serve`` starts the service itself, including the live session
WebSocket endpoint.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .scripting import load_script
from .service.app import create_app
from .service.session import LiveSettings
from .speech import load_embeddings_file, load_labels_file, load_voiceprints_file


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _load_config_dict(path: str) -> dict:
    target = Path(path)
    if not target.is_file():
        _fail(f"config not found: {path}")
    try:
        return tomllib.loads(target.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        _fail(f"config {path} is not valid TOML: {exc}")
        raise AssertionError  # unreachable


def _backend_payload(backend: str, script: str | None, endpoint: str | None, model: str | None) -> dict:
    if backend == "scripted":
        if not script:
            _fail("scripted backend requires --script")
        assert script is not None
        if not Path(script).exists():
            _fail(f"script not found: {script}")
        return {"kind": "scripted", "script": load_script(script)}
    if not endpoint or not model:
        _fail("http backend requires --endpoint and --model")
    return {"kind": "http", "endpoint": endpoint, "model_name": model}


def _post(server: str | None, path: str, payload: dict) -> dict:
    try:
        if server:
            response = httpx.post(server.rstrip("/") + path, json=payload, timeout=600.0)
        else:

            async def call() -> httpx.Response:
                transport = httpx.ASGITransport(app=create_app())
                async with httpx.AsyncClient(
                    transport=transport, base_url="http://focusagent.internal", timeout=600.0
                ) as client:
                    return await client.post(path, json=payload)

            response = asyncio.run(call())
    except httpx.HTTPError as exc:
        _fail(f"cannot reach server: {exc}")
        raise AssertionError
    if response.status_code == 400:
        _fail(response.json().get("detail", "domain error"))
    if response.status_code != 200:
        _fail(f"server returned {response.status_code}: {response.text[:200]}")
    return response.json()


@click.group()
def main() -> None:
    """AI-moderated focus groups: simulate, serve, and evaluate."""


_backend_options = [
    click.option("--backend", type=click.Choice(["scripted", "http"]), default="scripted", show_default=True),
    click.option("--script", type=str, default=None, help="Fixture script: JSON file or directory of text files."),
    click.option("--endpoint", type=str, default=None, help="Chat-completions URL for the http backend."),
    click.option("--model", type=str, default=None, help="Model name for the http backend."),
    click.option("--server", type=str, default=None, help="Use a running focusagent server instead of in-process."),
]


def backend_options(command):
    for option in reversed(_backend_options):
        command = option(command)
    return command


@main.command()
@click.option("--config", "config_path", required=True, type=str)
@backend_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=str, help="Transcript output (.fgt.jsonl).")
@click.option("--verbose", is_flag=True, help="Print every utterance after the run.")
def simulate(config_path, backend, script, endpoint, model, server, seed, out_path, verbose) -> None:
    """Run a full simulated focus group and write the transcript."""
    payload = {
        "config": _load_config_dict(config_path),
        "backend": _backend_payload(backend, script, endpoint, model),
        "seed": seed,
    }
    result = _post(server, "/simulate", payload)
    Path(out_path).write_bytes(result["transcript_jsonl"].encode("utf-8"))
    if verbose:
        for line in result["transcript_jsonl"].splitlines()[1:]:
            record = json.loads(line)
            if record["record"] == "utterance":
                click.echo(f"[{record['stage_index']}] {record['speaker']}: {record['text']}")
    timings = ", ".join(f"{t:.2f}" for t in result["stage_timings"])
    click.echo(f"wrote {out_path} ({result['backend_call_count']} backend calls; stage minutes: {timings})")


@main.command()
@click.option("--config", "config_path", required=True, type=str)
@backend_options
def plan(config_path, backend, script, endpoint, model, server) -> None:
    """Preview the stage plan without running a discussion."""
    payload = {
        "config": _load_config_dict(config_path),
        "backend": _backend_payload(backend, script, endpoint, model),
    }
    result = _post(server, "/plan", payload)
    for stage in result["stages"]:
        click.echo(
            f"{stage['index']}. {stage['title']} ({stage['allocated_minutes']:g} min) — {stage['objective']}"
        )


@main.command()
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--config", "config_path", required=True, type=str)
@click.option("--out", "out_path", type=str, default=None, help="Where to persist the live transcript.")
@backend_options
def serve(port, host, config_path, out_path, backend, script, endpoint, model, server) -> None:
    """Start the service, hosting a live session for human participants."""
    import uvicorn

    from .service.schemas import BackendModel, SessionConfigModel

    if server:
        _fail("serve starts its own server; --server does not apply")
    config = SessionConfigModel(**_load_config_dict(config_path)).to_config()
    backend_config = BackendModel(**_backend_payload(backend, script, endpoint, model)).to_backend_config()
    settings = LiveSettings(config=config, backend=backend_config, out_path=out_path)
    uvicorn.run(create_app(settings), host=host, port=port)


@main.command("eval-wer")
@click.option("--ref", "ref_path", required=True, type=str)
@click.option("--hyp", "hyp_path", required=True, type=str)
@click.option("--server", type=str, default=None)
def eval_wer(ref_path, hyp_path, server) -> None:
    """Word error rate between a reference and a hypothesis transcript."""
    for path in (ref_path, hyp_path):
        if not Path(path).is_file():
            _fail(f"file not found: {path}")
    payload = {
        "reference": Path(ref_path).read_text(encoding="utf-8"),
        "hypothesis": Path(hyp_path).read_text(encoding="utf-8"),
    }
    result = _post(server, "/eval/wer", payload)
    click.echo(
        "S={substitutions} D={deletions} I={insertions} N={reference_length} rate={rate:.4f}".format(**result)
    )


@main.command("eval-diarize")
@click.option("--voiceprints", "voiceprints_path", required=True, type=str, help="persona_id<TAB>vector lines.")
@click.option("--embeddings", "embeddings_path", required=True, type=str, help="One vector per segment line.")
@click.option("--truth", "truth_path", type=str, default=None, help="One true label per segment line.")
@click.option("--tau", type=float, default=0.25, show_default=True)
@click.option("--out", "out_path", type=str, default=None, help="Write the line-delimited report here.")
@click.option("--server", type=str, default=None)
def eval_diarize(voiceprints_path, embeddings_path, truth_path, tau, out_path, server) -> None:
    """Match segment embeddings against enrolled voiceprints."""
    for path in (voiceprints_path, embeddings_path, truth_path):
        if path and not Path(path).is_file():
            _fail(f"file not found: {path}")
    payload = {
        "voiceprints": [
            {"persona": v.persona, "embedding": list(v.embedding)}
            for v in load_voiceprints_file(voiceprints_path)
        ],
        "embeddings": [list(e) for e in load_embeddings_file(embeddings_path)],
        "tau": tau,
        "truth": load_labels_file(truth_path) if truth_path else None,
    }
    result = _post(server, "/eval/diarize", payload)
    lines = [
        json.dumps(
            {"record": "segment", **{k: record[k] for k in ("segment", "predicted", "truth", "similarity")}},
            sort_keys=True,
        )
        for record in result["records"]
    ]
    summary = {"record": "summary", "segments": len(result["records"]), "micro_f1": result["micro_f1"]}
    lines.append(json.dumps(summary, sort_keys=True))
    report = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(report, encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(report, nl=False)
    if result["micro_f1"] is not None:
        click.echo(f"micro_f1={result['micro_f1']:.4f}")


@main.command()
@click.option("--transcript", "transcript_path", required=True, type=str, help="A .fgt.jsonl transcript.")
@click.option("--out", "out_path", type=str, default=None, help="Minutes text file (stdout when omitted).")
@click.option("--server", type=str, default=None)
def export(transcript_path, out_path, server) -> None:
    """Convert a transcript file to plain-text minutes."""
    if not Path(transcript_path).is_file():
        _fail(f"file not found: {transcript_path}")
    payload = {"transcript_jsonl": Path(transcript_path).read_text(encoding="utf-8")}
    result = _post(server, "/export", payload)
    if out_path:
        Path(out_path).write_text(result["text"], encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(result["text"])


if __name__ == "__main__":
    main()
