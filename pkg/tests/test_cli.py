import json

import pytest

from tubeseg.cli import main


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "scene"
    assert main(["synth", str(out), "--frames", "4"]) == 0
    return out


def test_synth_layout(scene_dir):
    assert len(list((scene_dir / "frames").iterdir())) == 4
    assert len(list((scene_dir / "flow").iterdir())) == 3
    assert (scene_dir / "detections.csv").read_text().startswith("frame,")


def test_track_to_stdout(scene_dir, capsys):
    assert main(["track", str(scene_dir), "--single-thread"]) == 0
    tubes = json.loads(capsys.readouterr().out)
    assert len(tubes) == 1 and tubes[0]["frames"] == [0, 1, 2, 3]


def test_segment_eval_and_report(scene_dir, tmp_path, capsys):
    out = tmp_path / "pred"
    report = tmp_path / "report.json"
    rc = main(["segment", str(scene_dir), "--out", str(out), "--single-thread", "--report", str(report)])
    assert rc == 0
    rep = json.loads(report.read_text())
    assert rep["num_tubes"] == 1 and "grabcuts" in rep["stages"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["labels"]["1"]["category"] == "car"
    capsys.readouterr()
    assert main(["eval", str(out), str(scene_dir / "gt")]) == 0
    scores = json.loads(capsys.readouterr().out)
    assert scores["average_iou"] > 0.9 and scores["segmented_objects"] == "1/1"


def test_config_and_overrides(scene_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"solver": "icm", "max_tubes": 0}))
    assert main(["track", str(scene_dir), "--config", str(cfg)]) == 0
    assert json.loads(capsys.readouterr().out) == []


@pytest.mark.parametrize(
    "argv",
    [
        ["segment", "/nonexistent/scene", "--out", "/tmp/x"],
        ["track", "/nonexistent/scene"],
    ],
)
def test_bad_inputs_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err.lower()


def test_bad_config_exit_2(scene_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"nope": 1}')
    assert main(["track", str(scene_dir), "--config", str(cfg)]) == 2


def test_ablate_small(tmp_path):
    out = tmp_path / "ablation.csv"
    assert main(["ablate", "--seeds", "1", "--out", str(out)]) == 0
    rows = out.read_text().strip().splitlines()
    assert len(rows) == 3 and rows[0].startswith("row,")
