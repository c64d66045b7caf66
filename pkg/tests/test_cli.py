import json
import subprocess
import sys

import numpy as np
import pytest

from epiline.baselines.dataset import read_camera, read_points
from epiline.cli import EXIT_ESTIMATION, EXIT_INPUT, EXIT_OK, THREADS_ENV, load_config, main, parse_line
from epiline.estimator import EstimateConfig
from epiline.geometry import FundamentalMatrix, symmetric_epipolar_distance
from epiline.imaging import GrayImage, load_image, save_png

SMALL = dict(angles=36, samples=96, min_chord=50, validation_lines=30, max_hypotheses=300, top_fraction=0.1)


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(d), "--seed", "1", "--width", "160", "--height", "120",
                 "--matches", "120"]) == EXIT_OK
    (d / "small.json").write_text(json.dumps(SMALL))
    return d


def test_synth_outputs(synth_dir):
    names = {p.name for p in synth_dir.iterdir()}
    assert {"left.png", "right.png", "left.P", "right.P", "left.pts", "right.pts", "truth_F.json",
            "two_points.txt", "manifest.json"} <= names
    F = FundamentalMatrix.from_dict(json.loads((synth_dir / "truth_F.json").read_text()))
    x1, x2 = read_points(synth_dir / "left.pts"), read_points(synth_dir / "right.pts")
    assert symmetric_epipolar_distance(F, x1, x2) < 1e-9
    assert read_camera(synth_dir / "left.P").shape == (3, 4)
    assert load_image(synth_dir / "left.png").pixels.shape == (120, 160)


def test_synth_deterministic(synth_dir, tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--seed", "1", "--width", "160", "--height", "120",
                 "--matches", "120"]) == EXIT_OK
    for name in ("left.png", "right.png", "left.pts", "two_points.txt", "truth_F.json"):
        assert (tmp_path / name).read_bytes() == (synth_dir / name).read_bytes()


def test_synth_bad_args(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--planes", "5"]) == EXIT_INPUT
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["synth", "--out", str(blocker / "sub"), "--width", "40", "--height", "30"]) == EXIT_INPUT


def test_estimate_with_truth_and_overlay(synth_dir, tmp_path, capsys):
    out = tmp_path / "result.json"
    code = main(["estimate", "--left", str(synth_dir / "left.png"), "--right", str(synth_dir / "right.png"),
                 "--points", str(synth_dir / "two_points.txt"), "--config", str(synth_dir / "small.json"),
                 "--out", str(out), "--overlay", str(tmp_path / "ov"),
                 "--truth", str(synth_dir / "left.P"), str(synth_dir / "right.P"),
                 "--truth-points", str(synth_dir / "left.pts"), str(synth_dir / "right.pts")])
    assert code == EXIT_OK
    res = json.loads(out.read_text())
    assert res["truth_error_px"] < 3.0
    assert res["truth_grid_error_px"] >= 0
    assert set(res) >= {"fundamental", "epipoles", "lines", "scores", "diagnostics", "config"}
    F = FundamentalMatrix.from_dict(res["fundamental"])
    x1, x2 = read_points(synth_dir / "left.pts"), read_points(synth_dir / "right.pts")
    assert symmetric_epipolar_distance(F, x1, x2) < 3.0
    # round trip: load and dump again byte for byte
    assert json.dumps(json.loads(out.read_text()), indent=2, sort_keys=True) + "\n" == out.read_text()
    assert json.dumps(FundamentalMatrix.from_dict(res["fundamental"]).to_dict()) == json.dumps(res["fundamental"])
    for side in ("left", "right"):
        png = load_image(tmp_path / "ov" / f"{side}_overlay.png")
        assert png.pixels.shape == (120, 160)
    assert "truth error" in capsys.readouterr().err


def test_estimate_deterministic_and_stdout(synth_dir, capsys):
    args = ["estimate", "--left", str(synth_dir / "left.png"), "--right", str(synth_dir / "right.png"),
            "--points", str(synth_dir / "two_points.txt"), "--config", str(synth_dir / "small.json"),
            "--seed", "7"]
    assert main(args) == EXIT_OK
    first = capsys.readouterr().out
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out == first
    assert json.loads(first)["config"]["seed"] == 7


def test_estimate_input_errors(synth_dir, tmp_path):
    base = ["estimate", "--left", str(synth_dir / "left.png"), "--right", str(synth_dir / "right.png")]
    assert main(base + ["--points", str(tmp_path / "none.txt")]) == EXIT_INPUT
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 3\n")
    assert main(base + ["--points", str(bad)]) == EXIT_INPUT
    one = tmp_path / "one.txt"
    one.write_text("# a comment\n1 2 3 4\n")
    assert main(base + ["--points", str(one)]) == EXIT_INPUT
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"no_such_key": 1}')
    assert main(base + ["--points", str(synth_dir / "two_points.txt"), "--config", str(cfg)]) == EXIT_INPUT
    assert main(["estimate", "--left", str(tmp_path / "x.png"), "--right", str(synth_dir / "right.png"),
                 "--points", str(synth_dir / "two_points.txt")]) == EXIT_INPUT


def test_estimate_flat_images_exit_3(tmp_path):
    flat = GrayImage(np.full((120, 160), 100.0))
    save_png(flat, tmp_path / "a.png")
    (tmp_path / "p.txt").write_text("40 40 42 40\n120 90 122 90\n")
    (tmp_path / "c.json").write_text(json.dumps(SMALL))
    code = main(["estimate", "--left", str(tmp_path / "a.png"), "--right", str(tmp_path / "a.png"),
                 "--points", str(tmp_path / "p.txt"), "--config", str(tmp_path / "c.json")])
    assert code == EXIT_ESTIMATION


def test_parser_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--left", "a.png"])
    assert exc.value.code == EXIT_INPUT
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--manifest", "m.json", "--iters", "0"])
    assert exc.value.code == EXIT_INPUT


def test_help_lists_every_key():
    out = subprocess.run([sys.executable, "-m", "epiline.cli", "estimate", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for key, val in EstimateConfig().to_dict().items():
        if isinstance(val, dict):
            for sub, v in val.items():
                assert f"{key}.{sub} = {json.dumps(v)}" in out
        else:
            assert f"{key} = {json.dumps(val)}" in out
    assert THREADS_ENV in out


def test_eval_round_trip(synth_dir, tmp_path, capsys):
    out = tmp_path / "ev"
    code = main(["eval", "--manifest", str(synth_dir / "manifest.json"), "--methods", "7pt,8pt",
                 "--iters", "3", "--out", str(out)])
    assert code == EXIT_OK
    table = capsys.readouterr().out.splitlines()
    assert table[0].split() == ["pair", "7pt", "8pt"]
    assert table[1].startswith("synth-1")
    rows = (out / "errors.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["overall"]["8pt"]["median"] < 1e-6


def test_eval_dataset_directory(synth_dir, tmp_path, capsys):
    code = main(["eval", "--manifest", str(synth_dir), "--methods", "8pt", "--iters", "1",
                 "--out", str(tmp_path / "ev")])
    assert code == EXIT_OK


def test_eval_errors(synth_dir, tmp_path, capsys):
    code = main(["eval", "--manifest", str(synth_dir / "manifest.json"), "--methods", "8pt,ten-point",
                 "--out", str(tmp_path)])
    assert code == EXIT_INPUT
    err = capsys.readouterr().err
    assert "ten-point" in err and "two-point" in err and "7pt" in err
    assert main(["eval", "--manifest", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == EXIT_INPUT


def test_match_lines_same_line_zero(synth_dir, tmp_path, capsys):
    img = str(synth_dir / "left.png")
    code = main(["match-lines", "--left", img, "--right", img, "--line1", "0.1,1,-60", "--line2", "0.1,1,-60",
                 "--plot", str(tmp_path / "p.png")])
    assert code == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "cost: 0.0" and out[1] == "normalized: 0.0" and out[2] == "reversed: false"
    assert set(out[3].split()[1:]) == {"0"}
    assert (tmp_path / "p.png").stat().st_size > 0


def test_match_lines_truth_pair_low(synth_dir, capsys):
    F = FundamentalMatrix.from_dict(json.loads((synth_dir / "truth_F.json").read_text()))
    x1 = read_points(synth_dir / "left.pts")
    from epiline.geometry import hom, line_through

    costs = []
    for p in x1[:5]:
        l1 = line_through(F.e1, hom(p))
        l2 = F.F @ hom(p)
        code = main(["match-lines", "--left", str(synth_dir / "left.png"), "--right", str(synth_dir / "right.png"),
                     "--line1=" + ",".join(map(repr, map(float, l1))), "--line2=" + ",".join(map(repr, map(float, l2)))])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        costs.append(float(lines[1].split()[1]))
        d = np.array(lines[3].split()[1:], dtype=int)
        # disparities stay within the range and change rarely
        assert np.all(np.abs(d) <= 32) and np.count_nonzero(np.diff(d)) < len(d) // 4
    assert np.median(costs) < 100


def test_match_lines_outside_image(synth_dir, capsys):
    img = str(synth_dir / "left.png")
    assert main(["match-lines", "--left", img, "--right", img, "--line1", "0,1,-5000",
                 "--line2", "0,1,-60"]) == EXIT_INPUT
    assert "first line" in capsys.readouterr().err
    assert main(["match-lines", "--left", img, "--right", img, "--line1", "0,0,1",
                 "--line2", "0,1,-60"]) == EXIT_INPUT


def test_parse_line():
    assert np.array_equal(parse_line("1,2.5,-3"), [1, 2.5, -3])


def test_threads_env(monkeypatch, tmp_path):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert load_config(None).threads == 3
    assert load_config(None, threads=2).threads == 2
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(Exception):
        load_config(None)
