"""Command-line entry points: serve, run, record, db, eval.

Settings resolve as CLI flag > environment variable > config file (JSON,
via --config or ROOMSMITH_CONFIG). Batch runs speak the same session format
as the service, so artifacts are interchangeable between the two.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from collections import Counter
from pathlib import Path
from typing import Optional

import click

from .agent import default_deps, handle_turn, new_session, save_session
from .backend import LiveBackend, RecordingBackend, ReplayBackend
from .errors import RoomsmithError
from .metrics import evaluate, format_table
from .o2o import (
    DeterministicHashEmbedder,
    O2OConfig,
    ScriptedClassifier,
    build_offline_index,
    load_example_db,
    retrieve,
)
from .scene import scene_canonical_bytes, scene_from_json
from .scripted import ScriptedBackend
from .service import create_app, room_from_spec

_DATA_DIR = Path(__file__).parent / "data"


def resolve_setting(cli_value, env_name: str, config: dict, key: str, default=None):
    """CLI flag > environment variable > config file > default."""
    if cli_value is not None:
        return cli_value
    if env_name in os.environ:
        return os.environ[env_name]
    if key in config:
        return config[key]
    return default


def _load_config(path: Optional[str]) -> dict:
    p = path or os.environ.get("ROOMSMITH_CONFIG")
    if not p:
        return {}
    try:
        return json.loads(Path(p).read_text(encoding="utf-8"))
    except OSError as exc:
        raise click.ClickException(f"cannot read config file: {exc}")


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config file (lowest-precedence settings).")
@click.pass_context
def main(ctx, config_path):
    ctx.obj = _load_config(config_path)


@main.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--sessions-dir", type=click.Path(), default=None)
@click.option("--fixtures-dir", type=click.Path(), default=None)
@click.option("--live", is_flag=True, default=False, help="Allow live-backend sessions.")
@click.pass_obj
def serve(config, host, port, sessions_dir, fixtures_dir, live):
    """Run the HTTP session service."""
    import uvicorn

    host = resolve_setting(host, "ROOMSMITH_HOST", config, "host", "127.0.0.1")
    port = int(resolve_setting(port, "ROOMSMITH_PORT", config, "port", 8000))
    sessions_dir = resolve_setting(sessions_dir, "ROOMSMITH_SESSIONS_DIR", config, "sessions_dir")
    fixtures_dir = resolve_setting(fixtures_dir, "ROOMSMITH_FIXTURES_DIR", config, "fixtures_dir")
    app = create_app(
        sessions_root=Path(sessions_dir) if sessions_dir else None,
        fixtures_dir=Path(fixtures_dir) if fixtures_dir else None,
        live=live,
    )
    uvicorn.run(app, host=host, port=port)


def _run_conversation(script_path, room_path, backend, out, session_id):
    turns = [
        line.strip()
        for line in Path(script_path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if not turns:
        raise click.ClickException(f"script {script_path} has no turns")
    room_doc = json.loads(Path(room_path).read_text(encoding="utf-8"))
    scene = room_from_spec(room_doc)
    session = new_session(scene, session_id=session_id)
    deps = default_deps(backend)
    log = []
    for i, text in enumerate(turns, start=1):
        result = handle_turn(text, session, deps)
        digest = hashlib.sha256(scene_canonical_bytes(session.scene)).hexdigest()
        log.append(
            {
                "text": text,
                "actions": [type(a).__name__ for a in result.actions],
                "warnings": list(result.warnings),
                "scene_digest": digest,
            }
        )
        click.echo(
            f"turn {i}: {len(result.actions)} action(s), "
            f"{len(result.warnings)} warning(s), scene {digest[:12]}"
        )
        for w in result.warnings:
            click.echo(f"  warning: {w}")
    final_digest = hashlib.sha256(scene_canonical_bytes(session.scene)).hexdigest()
    click.echo(f"final scene digest: {final_digest}")
    if out:
        out = Path(out)
        session_dir = save_session(session, out)
        (session_dir / "turns.json").write_text(
            json.dumps(log, indent=2) + "\n", encoding="utf-8"
        )
        click.echo(f"session written to {session_dir}")
    return session


@main.command()
@click.option("--script", "script_path", type=click.Path(exists=True), required=True,
              help="Conversation file, one user turn per line.")
@click.option("--room", "room_path", type=click.Path(exists=True), required=True,
              help="Room spec JSON ({width, depth, height, tagged}).")
@click.option("--replay", "replay_path", type=click.Path(exists=True), default=None,
              help="Replay fixture; omit to use the offline rule backend.")
@click.option("--out", type=click.Path(), default=None, help="Directory for session artifacts.")
@click.option("--session-id", default="run")
def run(script_path, room_path, replay_path, out, session_id):
    """Run a scripted conversation offline and print per-turn digests."""
    backend = ReplayBackend(replay_path) if replay_path else ScriptedBackend()
    try:
        _run_conversation(script_path, room_path, backend, out, session_id)
    except RoomsmithError as exc:
        raise click.ClickException(str(exc))
    if replay_path and backend.remaining():
        raise click.ClickException(
            f"replay fixture has {backend.remaining()} unused exchange(s)"
        )


@main.command()
@click.option("--script", "script_path", type=click.Path(exists=True), required=True)
@click.option("--room", "room_path", type=click.Path(exists=True), required=True)
@click.option("--fixture", "fixture_path", type=click.Path(), required=True,
              help="Replay fixture to write.")
@click.option("--out", type=click.Path(), default=None)
@click.option("--live/--scripted", default=True,
              help="Record a live backend (default) or the offline rule backend.")
@click.option("--session-id", default="record")
def record(script_path, room_path, fixture_path, out, live, session_id):
    """Run a conversation and persist every exchange as a replay fixture."""
    if live:
        try:
            inner = LiveBackend.from_env(os.environ)
        except RoomsmithError as exc:
            raise click.ClickException(str(exc))
    else:
        inner = ScriptedBackend()
    backend = RecordingBackend(inner, fixture_path)
    try:
        _run_conversation(script_path, room_path, backend, out, session_id)
    except RoomsmithError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"fixture written to {fixture_path}")


@main.group()
def db():
    """Inspect and query the example databases."""


@db.command()
@click.argument("paths", type=click.Path(exists=True), nargs=-1)
def validate(paths):
    """Check database files load and their records fit the taxonomy."""
    targets = [Path(p) for p in paths] or sorted(_DATA_DIR.glob("*.json"))
    failed = False
    for path in targets:
        try:
            taxonomy, records = load_example_db(path)
        except Exception as exc:
            click.echo(f"{path}: FAIL ({exc})")
            failed = True
            continue
        stray = sorted({r.category for r in records} - set(taxonomy))
        if stray:
            click.echo(f"{path}: FAIL (categories outside taxonomy: {', '.join(stray)})")
            failed = True
            continue
        click.echo(f"{path}: ok ({len(records)} records, {len(taxonomy)} categories)")
    if failed:
        raise click.ClickException("validation failed")


@db.command()
@click.argument("path", type=click.Path(exists=True))
@click.option("--k", type=int, default=8, show_default=True)
def index(path, k):
    """Build the offline retrieval index and report support-set sizes."""
    taxonomy, records = load_example_db(path)
    cfg = O2OConfig(k=k, taxonomy=tuple(taxonomy))
    idx = build_offline_index(records, cfg, DeterministicHashEmbedder())
    counts = Counter(r.category for r in records)
    for category in taxonomy:
        support = idx.get(category)
        size = len(support) if support is not None else 0
        click.echo(f"{category}: support {size} (from {counts.get(category, 0)} own records)")


@db.command()
@click.argument("path", type=click.Path(exists=True))
@click.option("-u", "--text", required=True, help="Instruction text to retrieve for.")
@click.option("--category", default=None,
              help="Pin the query category instead of keyword classification.")
@click.option("--k", type=int, default=8, show_default=True)
def query(path, text, category, k):
    """Retrieve the support set for an instruction."""
    taxonomy, records = load_example_db(path)
    cfg = O2OConfig(k=k, taxonomy=tuple(taxonomy))
    idx = build_offline_index(records, cfg, DeterministicHashEmbedder())
    if category is not None:
        classifier = ScriptedClassifier(rules=[], default=category)
    else:
        classifier = ScriptedClassifier(
            rules=[(c.lower(), c) for c in taxonomy], default=taxonomy[0] if taxonomy else ""
        )
    support = retrieve((text, "", ()), idx, classifier)
    click.echo(f"category: {support.category or '(none)'}")
    for record in support.records:
        click.echo(f"  {record.id}: {record.u}")


@main.command("eval")
@click.option("--plans", "plans_dir", type=click.Path(exists=True), required=True,
              help="Directory of scene JSON files.")
@click.option("--desc", "desc_path", type=click.Path(exists=True), required=True,
              help="Text file with the scene description.")
@click.option("--views", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True, default=False)
def eval_cmd(plans_dir, desc_path, views, seed, as_json):
    """Score a plan set: out-of-bounds, orientation proxy, description similarity."""
    paths = sorted(Path(plans_dir).glob("*.json"))
    if not paths:
        raise click.ClickException(f"no *.json plans under {plans_dir}")
    plans = [
        scene_from_json(json.loads(p.read_text(encoding="utf-8"))) for p in paths
    ]
    description = Path(desc_path).read_text(encoding="utf-8").strip()
    try:
        report = evaluate(plans, description, views=views, seed=seed)
    except RoomsmithError as exc:
        raise click.ClickException(str(exc))
    if as_json:
        click.echo(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        click.echo(format_table(report, label=Path(plans_dir).name))


if __name__ == "__main__":
    main()
