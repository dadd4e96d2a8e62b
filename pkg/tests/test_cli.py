import json

from click.testing import CliRunner

from aratlab.cli import main
from aratlab.catalog import default_catalog_path
from aratlab.db import Database
from aratlab.events import EventStore, write_events_jsonl

from conftest import TABLE2_CSV, table2_events


def run(runner, *args):
    return runner.invoke(main, list(args), catch_exceptions=False)


def test_validate_catalog_ok():
    runner = CliRunner()
    result = run(runner, "validate-catalog", str(default_catalog_path()))
    assert result.exit_code == 0
    assert result.output.strip() == "19 tasks OK"


def test_validate_catalog_failure(tmp_path):
    broken = json.loads(default_catalog_path().read_text())
    broken["tasks"] = broken["tasks"][:-1]
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(broken))
    runner = CliRunner()
    result = runner.invoke(main, ["validate-catalog", str(path)])
    assert result.exit_code == 1
    assert "error: incomplete_catalog:" in result.output + (result.stderr or "")


def test_export_flat_matches_table2(tmp_path):
    events_file = tmp_path / "events.jsonl"
    events_file.write_text(write_events_jsonl(table2_events()))
    db_path = str(tmp_path / "store.db")
    runner = CliRunner()

    result = run(runner, "ingest-events", str(events_file), "--data", db_path)
    assert result.exit_code == 0
    assert "appended 9 events" in result.output

    out = tmp_path / "flat.csv"
    result = run(runner, "export-flat", "--data", db_path, "--patient", "1",
                 "--task", "1", "--out", str(out))
    assert result.exit_code == 0
    assert out.read_text() == TABLE2_CSV


def test_import_flat_round_trip(tmp_path):
    csv_path = tmp_path / "legacy.csv"
    csv_path.write_text(TABLE2_CSV)
    db_path = str(tmp_path / "store.db")
    runner = CliRunner()

    result = run(runner, "import-flat", str(csv_path), "--data", db_path)
    assert result.exit_code == 0
    assert "synthesized" in result.output

    result = run(runner, "export-flat", "--data", db_path)
    assert result.exit_code == 0
    assert result.output == TABLE2_CSV


def test_simulate_deterministic(tmp_path):
    runner = CliRunner()
    out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (out1, out2):
        result = run(runner, "simulate", "--actors", "3", "--segments", "60",
                     "--seed", "7", "--out", str(out))
        assert result.exit_code == 0
    assert out1.read_text() == out2.read_text()
    assert out1.read_text().strip()


def test_simulate_profile_file(tmp_path):
    profile = {
        "actors": 1, "segments_per_actor": 10, "seed": 4,
        "initial_seconds": 50.0, "floor_seconds": 20.0, "decay_segments": 5.0,
        "tasks": [17],
    }
    profile_path = tmp_path / "profile.json"
    profile_path.write_text(json.dumps(profile))
    out = tmp_path / "events.jsonl"
    runner = CliRunner()
    result = run(runner, "simulate", "--profile", str(profile_path), "--out", str(out))
    assert result.exit_code == 0
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert all(line["task_number"] == 17 for line in lines)


def test_simulate_switch_target_flag(tmp_path):
    runner = CliRunner()
    out = tmp_path / "events.jsonl"
    result = run(runner, "simulate", "--actors", "1", "--segments", "50", "--seed", "3",
                 "--switch-target", "IP:4:25,50,0,25,75", "--out", str(out))
    assert result.exit_code == 0
    assert out.exists()


def test_simulate_infeasible_target_fails(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, [
        "simulate", "--actors", "1", "--segments", "5", "--seed", "1",
        "--switch-target", "IP:100:10,10,10,10,10", "--out", str(tmp_path / "x.jsonl"),
    ])
    assert result.exit_code == 1
    assert "infeasible_targets" in result.output + (result.stderr or "")


def test_import_videos_from_jsonl(tmp_path, catalog):
    meta = tmp_path / "videos.jsonl"
    records = [
        {"patient_id": 1, "hand": "left", "task_number": 1, "view": view,
         "path": f"videos/1_left_task01_{view}.mp4", "fps": 30.0,
         "resolution": "3840x2160", "usable": True}
        for view in ("Ipsilateral", "Contralateral", "Transverse", "Back")
    ]
    meta.write_text("".join(json.dumps(r) + "\n" for r in records))
    db_path = str(tmp_path / "store.db")
    runner = CliRunner()
    result = run(runner, "import-videos", str(meta), "--data", db_path)
    assert result.exit_code == 0
    assert "registered 4 video records" in result.output


def test_import_videos_from_directory(tmp_path):
    videos = tmp_path / "clips"
    videos.mkdir()
    for view in ("Ipsilateral", "Back"):
        (videos / f"7_right_task04_{view}.mp4").write_bytes(b"")
    db_path = str(tmp_path / "store.db")
    runner = CliRunner()
    result = run(runner, "import-videos", str(videos), "--data", db_path)
    assert result.exit_code == 0
    assert "registered 2 video records" in result.output


def test_export_analytics_writes_reports(tmp_path):
    events_file = tmp_path / "events.jsonl"
    runner = CliRunner()
    result = run(runner, "simulate", "--actors", "1", "--segments", "25", "--seed", "2",
                 "--out", str(events_file))
    assert result.exit_code == 0
    db_path = str(tmp_path / "store.db")
    result = run(runner, "ingest-events", str(events_file), "--data", db_path)
    assert result.exit_code == 0

    out_dir = tmp_path / "analytics"
    result = run(runner, "export-analytics", "--data", db_path, "--out-dir", str(out_dir))
    assert result.exit_code == 0
    for name in ("durations.csv", "batched_means.csv", "view_usage.csv",
                 "view_usage_summary.csv", "switch_stats.csv", "report.json"):
        assert (out_dir / name).exists(), name
    report = json.loads((out_dir / "report.json").read_text())
    assert len(report["durations"]) == 25


def test_export_events_jsonl_round_trip(tmp_path, catalog):
    db_path = str(tmp_path / "store.db")
    store = EventStore(Database(db_path), catalog)
    store.append_many(table2_events())
    runner = CliRunner()
    out = tmp_path / "dump.jsonl"
    result = run(runner, "export-events", "--data", db_path, "--out", str(out))
    assert result.exit_code == 0
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(lines) == 9
    assert lines[0]["action"] == "SetStartFrame"
