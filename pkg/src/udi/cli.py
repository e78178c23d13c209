"""Command line operations: serve the API, validate specs, replay transcripts."""

from __future__ import annotations

import json
import os
import socket
import sys
from pathlib import Path

import click

from .agents import BackendError, ScriptedBackend, backend_from_env
from .filters import FilterError
from .grammar import SpecError, parse_spec, validate_against_schema
from .schema import SchemaError, load_schema
from .session import (
    SelectionMismatchError,
    Session,
    UnknownViewError,
)
from .store import TableLoadError, load_tables


def _load_data(data_path: str, tables_dir: str):
    try:
        schema = load_schema(Path(data_path).read_text())
    except (OSError, SchemaError) as e:
        raise click.ClickException(f"cannot load schema: {e}")
    sources = {}
    for entity in schema.entities:
        csv_path = Path(tables_dir) / f"{entity.name}.csv"
        try:
            sources[entity.name] = csv_path.read_text()
        except OSError as e:
            raise click.ClickException(f"cannot read {csv_path}: {e}")
    try:
        store = load_tables(schema, sources)
    except TableLoadError as e:
        raise click.ClickException(f"cannot load tables: {e}")
    return schema, store


def _build_backends(backend: str):
    if backend.startswith("scripted:"):
        script_path = backend[len("scripted:"):]
        try:
            scripted = ScriptedBackend(script_path)
        except (OSError, ValueError) as e:
            raise click.ClickException(f"cannot load script {script_path}: {e}")
        return scripted, scripted
    if backend == "remote":
        try:
            return (backend_from_env("router", os.environ),
                    backend_from_env("viz", os.environ))
        except BackendError as e:
            raise click.ClickException(str(e))
    raise click.ClickException(
        f"unknown backend {backend!r}: use scripted:PATH or remote")


def _parse_listen(listen: str) -> tuple[str, int]:
    host, sep, port = listen.rpartition(":")
    if not sep or not port.isdigit():
        raise click.ClickException(f"bad listen address {listen!r}: want HOST:PORT")
    return host or "127.0.0.1", int(port)


@click.group()
def main():
    """Natural-language data discovery over linked metadata tables."""


@main.command()
@click.option("--data", required=True, help="schema definition JSON file")
@click.option("--tables", required=True, help="directory of {entity}.csv files")
@click.option("--backend", default="remote", show_default=True,
              help="scripted:PATH or remote")
@click.option("--listen", default=":8080", show_default=True, help="HOST:PORT")
@click.option("--ui", default=None, help="directory of static UI files to serve at /")
def serve(data, tables, backend, listen, ui):
    """Start the HTTP API."""
    import uvicorn

    from .server import create_app

    schema, store = _load_data(data, tables)
    router_backend, viz_backend = _build_backends(backend)
    host, port = _parse_listen(listen)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((host, port))
    except OSError:
        click.echo(f"address in use: {host}:{port}", err=True)
        sys.exit(1)
    finally:
        probe.close()
    app = create_app(schema, store, router_backend, viz_backend, ui_dir=ui)
    click.echo(f"serving on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("validate-spec")
@click.argument("spec_path")
@click.option("--schema", "schema_path", required=True,
              help="schema definition JSON file")
def validate_spec(spec_path, schema_path):
    """Check a view spec document against the grammar and a schema."""
    try:
        schema = load_schema(Path(schema_path).read_text())
    except (OSError, SchemaError) as e:
        raise click.ClickException(f"cannot load schema: {e}")
    try:
        document = Path(spec_path).read_text()
    except OSError as e:
        raise click.ClickException(f"cannot read spec: {e}")
    try:
        spec = parse_spec(document)
    except SpecError as e:
        for path, message in e.errors:
            click.echo(f"{path}: {message}")
        sys.exit(1)
    errors = validate_against_schema(spec, schema)
    if errors:
        for path, message in errors:
            click.echo(f"{path}: {message}")
        sys.exit(1)
    click.echo("OK")


def _delta_record(wire: dict) -> dict:
    payload = {k: v for k, v in wire.items() if k not in ("seq", "kind")}
    return {"seq": wire["seq"], "kind": wire["kind"], "payload": payload}


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


@main.command()
@click.argument("transcript_path")
@click.option("--data", required=True, help="schema definition JSON file")
@click.option("--tables", required=True, help="directory of {entity}.csv files")
@click.option("--out", "out_dir", required=True, help="output directory")
def replay(transcript_path, data, tables, out_dir):
    """Re-run a recorded transcript against its scripted backend.

    Writes the final snapshot, the delta log, each view's result table,
    and per-entity exports. Output is deterministic, so committed copies
    serve as golden files.
    """
    try:
        transcript = json.loads(Path(transcript_path).read_text())
    except (OSError, ValueError) as e:
        raise click.ClickException(f"cannot load transcript: {e}")
    schema, store = _load_data(data, tables)
    script_path = Path(transcript_path).parent / transcript["backend_script"]
    backend = ScriptedBackend(str(script_path))
    session = Session("replay", schema, store, backend, backend)

    deltas: list[dict] = []
    errors: list[dict] = []
    for step, item in enumerate(transcript["messages"], start=1):
        try:
            if "text" in item:
                delta = session.handle_message(item["text"])
            elif "widget_update" in item:
                body = dict(item["widget_update"])
                fid = body.pop("filter")
                delta = session.update_filter(fid, body)
            elif "selection" in item:
                body = dict(item["selection"])
                vid = body.pop("view")
                if body.pop("clear", False):
                    delta = session.clear_selection(vid)
                else:
                    delta = session.apply_selection(vid, body)
            else:
                raise ValueError(f"unrecognized transcript entry: {sorted(item)}")
        except (FilterError, UnknownViewError, SelectionMismatchError,
                ValueError, KeyError) as e:
            errors.append({"step": step, "error": str(e)})
            continue
        deltas.append(delta.to_wire())

    out = Path(out_dir)
    (out / "views").mkdir(parents=True, exist_ok=True)
    (out / "exports").mkdir(parents=True, exist_ok=True)
    _dump(out / "state.json", session.snapshot())
    with (out / "deltas.jsonl").open("w") as fh:
        for wire in deltas:
            fh.write(json.dumps(_delta_record(wire), sort_keys=True) + "\n")
    for view in session.views:
        _dump(out / "views" / f"{view.id}.json", session.view_data(view.id).to_wire())
    for entity in schema.entities:
        ids = session.export_visible(entity.name)
        (out / "exports" / f"{entity.name}.txt").write_text(
            "".join(f"{i}\n" for i in ids))
        _dump(out / "exports" / f"{entity.name}.json",
              {"entity": entity.name, "ids": ids})
    if errors:
        _dump(out / "errors.json", errors)
        sys.exit(1)


if __name__ == "__main__":
    main()
