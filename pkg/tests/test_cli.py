"""Command-line behavior: exit codes, output shapes, artifacts on disk."""

import json

import pytest

from partforge.cli import main
from partforge.store import ArtifactStore, load_job


def write_config(tmp_path, extra=None):
    from partforge.cameras import default_rig
    from partforge.config import RunConfig

    cfg = RunConfig(rig=default_rig(image_size=128), resolution=32, store_path=str(tmp_path / "store"))
    doc = cfg.to_dict()
    doc.update(extra or {})
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_run_yes_completes_demo(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["--config", cfg, "--seed", "7", "--json", "run", "--yes"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert all(s["state"] == "done" for s in out["stages"].values())
    store = ArtifactStore(tmp_path / "store")
    job = load_job(store, out["job_id"])
    assert "assembly/scene.json" in job.artifacts
    for ref in job.artifacts.values():
        assert store.has(ref["hash"])  # every referenced blob exists


def test_run_without_yes_stops_at_gate(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["--config", cfg, "--json", "run"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["awaiting"] == "promptgen"
    assert out["stages"]["promptgen"] == "awaiting_approval"


def test_stage_before_prereqs_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["--config", cfg, "--json", "demo"]) == 0
    job_id = json.loads(capsys.readouterr().out)["job_id"]
    assert main(["--config", cfg, "stage", "isolation", "--job", job_id]) == 2
    assert "IllegalTransition" in capsys.readouterr().err


def test_stage_approve_flow(tmp_path, capsys):
    cfg = write_config(tmp_path)
    main(["--config", cfg, "--json", "demo"])
    job_id = json.loads(capsys.readouterr().out)["job_id"]
    assert main(["--config", cfg, "--json", "stage", "promptgen", "--job", job_id]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["stages"]["promptgen"]["state"] == "awaiting_approval"
    assert main(["--config", cfg, "--json", "approve", "promptgen", "--job", job_id]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["stages"]["promptgen"]["state"] == "done"
    assert main(["--config", cfg, "--json", "reject", "promptgen", "--job", job_id]) == 2
    assert "IllegalTransition" in capsys.readouterr().err


def test_inspect_prints_manifest(tmp_path, capsys):
    cfg = write_config(tmp_path)
    main(["--config", cfg, "--json", "demo"])
    job_id = json.loads(capsys.readouterr().out)["job_id"]
    assert main(["--config", cfg, "inspect", job_id]) == 0
    manifest = json.loads(capsys.readouterr().out)
    assert manifest["v"] == 1
    assert manifest["job_id"] == job_id
    assert set(manifest["stages"]) == {"promptgen", "isolation", "multiview", "reconstruction", "assembly"}
    assert main(["--config", cfg, "inspect", "missing"]) == 1
    assert "JobNotFound" in capsys.readouterr().err


def test_export_after_run(tmp_path, capsys):
    cfg = write_config(tmp_path)
    main(["--config", cfg, "--json", "run", "--yes"])
    job_id = json.loads(capsys.readouterr().out)["job_id"]
    out_dir = tmp_path / "bundle"
    assert main(["--config", cfg, "export", "--job", job_id, "--out", str(out_dir)]) == 0
    capsys.readouterr()
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == ["ball.mesh.mtl", "ball.mesh.obj", "base.mesh.mtl", "base.mesh.obj", "scene.json"]
    scene = json.loads((out_dir / "scene.json").read_text())
    assert {p["part_id"] for p in scene["parts"]} == {"ball", "base"}


def test_export_before_assembly_fails(tmp_path, capsys):
    cfg = write_config(tmp_path)
    main(["--config", cfg, "--json", "demo"])
    job_id = json.loads(capsys.readouterr().out)["job_id"]
    assert main(["--config", cfg, "export", "--job", job_id, "--out", str(tmp_path / "x")]) == 1


def test_diffcheck_passes_with_default_schedule(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["--config", cfg, "--json", "diffcheck", "--samples", "100000"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] is True
    assert abs(out["mean"] - 2.0) <= 0.01


def test_diffcheck_flags_a_bad_schedule(tmp_path, capsys):
    # the fixed-small posterior variance undershoots the target; diffcheck
    # must call that out rather than wave it through
    cfg = write_config(tmp_path, {"schedule": {"T": 100, "variant": "fixed_small"}})
    assert main(["--config", cfg, "--json", "diffcheck", "--samples", "50000"]) == 1
    assert json.loads(capsys.readouterr().out)["passed"] is False


def test_create_from_files(tmp_path, capsys):
    cfg = write_config(tmp_path)
    from partforge.config import load_config
    from partforge.engine import demo_input_image

    png = tmp_path / "input.png"
    png.write_bytes(demo_input_image(load_config(cfg)).to_png())
    parts = tmp_path / "parts.json"
    parts.write_text(json.dumps([{"part_id": "ball", "user_description": "the ball"}]))
    assert main(["--config", cfg, "--json", "create", "--image", str(png), "--parts", str(parts)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["parts"][0]["part_id"] == "ball"


def test_missing_config_is_a_clean_error(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "absent.json"), "demo"]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_command_rejected():
    with pytest.raises(SystemExit):
        main(["polish"])