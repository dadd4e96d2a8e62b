"""Operator command line.

Serves the API and covers the desk workflows that do not need a browser:
catalog validation, bulk video-metadata and legacy flat-row ingestion,
flat/analytics exports and deterministic stream simulation. Commands work
directly on the data file; `serve` exposes the same store over HTTP.

Every failure exits nonzero after printing one machine-readable line
``error: <machine_code>: <message>`` on stderr.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import sys
from pathlib import Path

import click

from . import analytics
from .capture import CaptureService, parse_video_filename
from .catalog import load_catalog, load_default_catalog
from .db import Database
from .errors import DomainError
from .events import (
    EventStore,
    load_events_jsonl,
    load_flat_csv,
    write_events_jsonl,
    write_flat_csv,
)
from .simulate import SimulationProfile, SwitchTarget, simulate_events


def _fail(code: str, message: str) -> None:
    click.echo(f"error: {code}: {message}", err=True)
    sys.exit(1)


def domain_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DomainError as exc:
            _fail(exc.machine_code, exc.message)

    return wrapper


def _open_store(data: str, catalog_path: str | None):
    catalog = load_catalog(catalog_path) if catalog_path else load_default_catalog()
    db = Database(data)
    return db, catalog, EventStore(db, catalog)


data_option = click.option(
    "--data", default="aratlab.db", show_default=True, help="path to the shared SQLite store"
)
catalog_option = click.option(
    "--catalog", "catalog_path", default=None, help="task catalog JSON (default: shipped catalog)"
)


@click.group()
def main():
    """ARAT capture/segmentation/rating workbench."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@data_option
@catalog_option
@click.option("--rating-form", default=None, help="rating form JSON (default: shipped form)")
@click.option("--tokens", default=None, help="JSON file mapping X-Actor-Token values to actor ids")
@click.option("--raters-per-video", default=2, show_default=True)
@click.option("--fps", default=30.0, show_default=True, help="fallback fps for trim bounds")
@domain_errors
def serve(host, port, data, catalog_path, rating_form, tokens, raters_per_video, fps):
    """Run the HTTP API."""
    import uvicorn

    from .service import ServiceConfig, create_app

    token_map = None
    if tokens:
        token_map = {str(k): str(v) for k, v in json.loads(Path(tokens).read_text()).items()}
    config = ServiceConfig(
        data_path=data,
        catalog_path=catalog_path,
        rating_form_path=rating_form,
        tokens=token_map,
        raters_per_video=raters_per_video,
        fps=fps,
    )
    uvicorn.run(create_app(config), host=host, port=port)


@main.command("validate-catalog")
@click.argument("path")
@domain_errors
def validate_catalog(path):
    """Validate a task catalog file."""
    catalog = load_catalog(path)
    click.echo(f"{len(catalog.tasks)} tasks OK")


@main.command("import-videos")
@click.argument("source")
@data_option
@catalog_option
@domain_errors
def import_videos(source, data, catalog_path):
    """Register video metadata from a JSONL file or a directory of videos.

    Directory mode derives metadata from the filename convention
    <patient>_<hand>_task<NN>_<view>.<ext>.
    """
    db, _catalog, _store = _open_store(data, catalog_path)
    capture = CaptureService(db)
    source_path = Path(source)
    if source_path.is_dir():
        records = [
            parse_video_filename(str(p)) for p in sorted(source_path.iterdir()) if p.is_file()
        ]
    else:
        records = [json.loads(line) for line in source_path.read_text().splitlines() if line.strip()]
    count = capture.register_videos(records)
    click.echo(f"registered {count} video records")


@main.command("import-flat")
@click.argument("path")
@data_option
@catalog_option
@domain_errors
def import_flat(path, data, catalog_path):
    """Ingest legacy flat rows (CSV) by synthesizing an event stream."""
    _db, _catalog, store = _open_store(data, catalog_path)
    count = store.import_flat(load_flat_csv(path))
    click.echo(f"synthesized {count} events")


@main.command("export-flat")
@data_option
@catalog_option
@click.option("--patient", type=int, default=None)
@click.option("--hand", default=None)
@click.option("--task", type=int, default=None)
@click.option("--actor", default=None)
@click.option("--out", default="-", show_default=True, help="output file, - for stdout")
@domain_errors
def export_flat(data, catalog_path, patient, hand, task, actor, out):
    """Export the flat confirmation-step table as CSV."""
    _db, _catalog, store = _open_store(data, catalog_path)
    text = write_flat_csv(store.export_flat(patient=patient, hand=hand, task=task, actor=actor))
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)
        click.echo(f"wrote {out}")


@main.command("export-events")
@data_option
@catalog_option
@click.option("--out", default="-", show_default=True)
@domain_errors
def export_events(data, catalog_path, out):
    """Export the full event log as line-delimited JSON."""
    _db, _catalog, store = _open_store(data, catalog_path)
    text = write_events_jsonl(store.list_events())
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)
        click.echo(f"wrote {out}")


@main.command("ingest-events")
@click.argument("path")
@data_option
@catalog_option
@domain_errors
def ingest_events(path, data, catalog_path):
    """Append events from a JSONL file (e.g. simulator output) to the store."""
    _db, _catalog, store = _open_store(data, catalog_path)
    events = load_events_jsonl(path)
    store.append_many(events)
    click.echo(f"appended {len(events)} events")


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


@main.command("export-analytics")
@data_option
@catalog_option
@click.option("--out-dir", default="analytics", show_default=True)
@domain_errors
def export_analytics(data, catalog_path, out_dir):
    """Write per-metric CSVs and the combined JSON report."""
    _db, catalog, store = _open_store(data, catalog_path)
    events = store.list_events()
    report = analytics.build_report(events, catalog)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    (out / "durations.csv").write_text(
        _csv_text(
            ["actor_id", "patient_id", "hand", "task_number", "segment",
             "completion_index", "duration_seconds"],
            [
                [d["actor_id"], d["patient_id"], d["hand"], d["task_number"],
                 d["segment"], d["completion_index"], d["duration_seconds"]]
                for d in report["durations"]
            ],
        )
    )
    (out / "batched_means.csv").write_text(
        _csv_text(
            ["actor_id", "kind", "batch_index", "mean_seconds", "count", "partial"],
            [
                [actor, kind, b["batch_index"], b["mean_seconds"], b["count"], b["partial"]]
                for actor, kinds in report["completion_series"].items()
                for kind, batches in kinds.items()
                for b in batches
            ],
        )
    )
    (out / "view_usage.csv").write_text(
        _csv_text(
            ["actor_id", "kind", "frame_events", "recommended_events", "pct"],
            [
                [u["actor_id"], u["kind"], u["frame_events"], u["recommended_events"], u["pct"]]
                for u in report["view_usage"]
            ],
        )
    )
    (out / "view_usage_summary.csv").write_text(
        _csv_text(
            ["kind", "mean_pct", "std_pct", "actor_count"],
            [
                [s["kind"], s["mean_pct"], s["std_pct"], s["actor_count"]]
                for s in report["view_usage_summary"]
            ],
        )
    )
    (out / "switch_stats.csv").write_text(
        _csv_text(
            ["segment", "switches", "pct_start_input", "pct_end_input",
             "pct_start_correction", "pct_end_correction", "pct_checking"],
            [
                [r["segment"], r["switches"], r["pct_start_input"], r["pct_end_input"],
                 r["pct_start_correction"], r["pct_end_correction"], r["pct_checking"]]
                for r in report["switch_stats"]
            ],
        )
    )
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    click.echo(f"wrote analytics to {out}")


def _parse_switch_target(spec: str) -> tuple[str, SwitchTarget]:
    # format: NAME:SWITCHES:pct_start_input,pct_end_input,pct_start_corr,pct_end_corr,pct_checking
    try:
        name, switches, pcts = spec.split(":")
        values = [float(p) for p in pcts.split(",")]
        if len(values) != 5:
            raise ValueError("need 5 percentages")
        return name, SwitchTarget(int(switches), *values)
    except ValueError as exc:
        raise DomainError("bad_switch_target", f"cannot parse switch target {spec!r}: {exc}")


@main.command()
@click.option("--actors", type=int, default=None, help="override profile actor count")
@click.option("--segments", type=int, default=None, help="override per-actor segment count")
@click.option("--seed", type=int, default=None, help="override profile seed")
@click.option("--profile", "profile_path", default=None, help="simulation profile JSON")
@click.option(
    "--switch-target",
    "switch_targets",
    multiple=True,
    help="NAME:SWITCHES:si,ei,sc,ec,chk e.g. IP:200:15.5,33.77,4.5,13.14,60.8",
)
@click.option("--out", default="events.jsonl", show_default=True)
@catalog_option
@domain_errors
def simulate(actors, segments, seed, profile_path, switch_targets, out, catalog_path):
    """Generate a deterministic synthetic annotator event stream."""
    raw = json.loads(Path(profile_path).read_text()) if profile_path else {}
    profile = SimulationProfile.from_dict(raw)
    if actors is not None:
        profile.actors = actors
    if segments is not None:
        profile.segments_per_actor = segments
    if seed is not None:
        profile.seed = seed
    for spec in switch_targets:
        name, target = _parse_switch_target(spec)
        profile.switch_targets[name] = target
    profile.validate()

    catalog = load_catalog(catalog_path) if catalog_path else load_default_catalog()
    events = simulate_events(profile, catalog)
    Path(out).write_text(write_events_jsonl(events))
    click.echo(f"wrote {len(events)} events to {out}")


if __name__ == "__main__":
    main()
