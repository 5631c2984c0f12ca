"""Command line front end: validation, scenarios, ingestion, chat, serving."""

import os
import sys
from pathlib import Path

import click

from .errors import (
    DecodeError,
    DuplicateNodeName,
    EmptyText,
    MaestroError,
    MissingField,
    UnsupportedMediaType,
    WorkflowSyntaxError,
)
from .model import ModalPayload
from .runtime import Runtime
from .scenario import (
    BUNDLED_SCENARIOS,
    ScenarioParseError,
    load_bundled,
    load_scenario,
    run_scenario,
)
from .workflow import parse_workflow, validate_workflow

INGEST_SUFFIXES = {".txt": "text/plain", ".md": "text/markdown"}


@click.group()
def main():
    """Multi-agent workflow runner."""


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def validate(file: Path):
    """Check a workflow definition; diagnostics go to stderr as JSON lines."""
    try:
        text = file.read_text(encoding="utf-8")
        wf = parse_workflow(text)
    except OSError as err:
        click.echo(f"cannot read {file}: {err}", err=True)
        sys.exit(2)
    except (WorkflowSyntaxError, MissingField, DuplicateNodeName) as err:
        click.echo(str(err), err=True)
        sys.exit(2)
    diagnostics = validate_workflow(wf, known_tools=Runtime.bundled().tools.names())
    for diag in diagnostics:
        click.echo(diag.to_json(), err=True)
    if any(d.is_error for d in diagnostics):
        sys.exit(1)
    click.echo(f"{wf.id}: ok")


def _load_target(target: str):
    if target in BUNDLED_SCENARIOS:
        return load_bundled(target)
    return load_scenario(Path(target))


@main.group()
def scenario():
    """Run recorded conversation scenarios."""


@scenario.command("run")
@click.argument("target")
def scenario_run(target: str):
    """Run a bundled scenario id or a scenario JSON file."""
    try:
        sc = _load_target(target)
        checks = run_scenario(sc)
    except (ScenarioParseError, OSError, KeyError, MaestroError) as err:
        click.echo(f"setup failure: {err}", err=True)
        sys.exit(2)
    for check in checks:
        click.echo(check.line())
    failed = [c for c in checks if not c.passed]
    if not failed:
        return
    # a missing fixture means the environment cannot run the scenario at all
    if any("FixtureMiss" in c.detail for c in failed):
        sys.exit(2)
    sys.exit(1)


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def ingest(file: Path):
    """Add a text document to the retrieval corpus and report its chunks."""
    media_type = INGEST_SUFFIXES.get(file.suffix.lower())
    if media_type is None:
        raise click.UsageError(
            f"unsupported suffix {file.suffix!r}; expected one of "
            + ", ".join(sorted(INGEST_SUFFIXES))
        )
    try:
        doc_id, chunks = Runtime.bundled().ingest(file.read_bytes(), media_type)
    except (DecodeError, EmptyText, UnsupportedMediaType) as err:
        raise click.ClickException(str(err))
    click.echo(f"{doc_id} chunks={chunks}")


def _render_event(ev) -> None:
    data = ev.data
    if ev.type == "message":
        author = data.get("author", "")
        if author == "user":
            return
        text = data.get("text", "")
        if text:
            click.echo(f"[{author}] {text}")
        for m in data.get("media", ()):
            click.echo(f"[{author}] (media {m['media_type']} {m['digest'][:12]})")
    elif ev.type == "alert":
        click.echo(f"[alert] binding {data['binding']} failure count {data['count']}")
    elif ev.type == "degraded":
        click.echo(f"[degraded] {data.get('reason', '')}")
    elif ev.type == "error":
        click.echo(f"[error] {data.get('error')}: {data.get('detail', '')}", err=True)


@main.command()
@click.option("--workflow", "workflow_id", required=True, help="Workflow id to chat with.")
def chat(workflow_id: str):
    """Interactive text chat against a workflow; ctrl-d exits."""
    rt = Runtime.bundled()
    try:
        session = rt.create_session(workflow_id)
    except KeyError:
        raise click.ClickException(f"unknown workflow {workflow_id!r}")
    click.echo(f"session {session.id} on {workflow_id}")
    while True:
        try:
            line = click.prompt("you", prompt_suffix="> ")
        except click.Abort:
            break
        line = line.strip()
        if not line:
            continue
        if line in {"/quit", "/exit"}:
            break
        rt.run_turn(session.id, [ModalPayload.from_text(line)], on_event=_render_event)


@main.command()
@click.option("--listen", default="127.0.0.1:8400", show_default=True,
              help="HOST:PORT to bind.")
def serve(listen: str):
    """Serve the HTTP gateway; MAESTRO_TOKEN enables bearer auth."""
    host, _, port_text = listen.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.UsageError("--listen must be HOST:PORT")
    import uvicorn

    from .gateway import create_app

    app = create_app(token=os.environ.get("MAESTRO_TOKEN"))
    uvicorn.run(app, host=host, port=int(port_text))


@main.group()
def state():
    """Inspect the shared state store."""


@state.command("export")
@click.option("--scenario", "scenario_id", default=None,
              help="Run this scenario first, then export its store.")
def state_export(scenario_id: str | None):
    """Dump store history as JSON lines; check results go to stderr."""
    if scenario_id is None:
        for line in Runtime.bundled().store.export_lines():
            click.echo(line)
        return
    created: list[Runtime] = []

    def factory() -> Runtime:
        rt = Runtime.bundled()
        created.append(rt)
        return rt

    try:
        sc = _load_target(scenario_id)
        checks = run_scenario(sc, runtime_factory=factory)
    except (ScenarioParseError, OSError, KeyError, MaestroError) as err:
        click.echo(f"setup failure: {err}", err=True)
        sys.exit(2)
    for check in checks:
        click.echo(check.line(), err=True)
    for line in created[0].store.export_lines():
        click.echo(line)
    if not all(c.passed for c in checks):
        sys.exit(1)


if __name__ == "__main__":
    main()
