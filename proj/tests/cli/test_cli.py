"""End-to-end runs of the command-line tool."""

import csv
import json
import os
import subprocess

import pytest

CLI = os.environ.get("BLURPOSE_CLI", "blurpose")


def run(*args, cwd=None):
    return subprocess.run([CLI, *map(str, args)], cwd=cwd, capture_output=True, text=True)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    out = run("generate", "-o", root / "d", "-n", 2, "-b", "0.2,0.3", "-s", 3)
    assert out.returncode == 0, out.stderr
    return root / "d"


@pytest.fixture(scope="module")
def solved(dataset, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("solve") / "r"
    out = run("solve", dataset / "scene_0000", dataset / "scene_0001", "-o", out_dir, "--iterations", 3)
    assert out.returncode == 0, out.stderr
    return out_dir


def test_check_passes(tmp_path):
    out = run("check", "-o", tmp_path)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "check_run.json").exists()


def test_check_catches_broken_adjoint():
    assert run("check", "--break-adjoint").returncode == 3


def test_generate_layout(dataset):
    manifest = json.loads((dataset / "manifest.json").read_text())
    assert manifest
    for name in ("blur.npy", "background.npy", "alpha_in.npy", "meta.json", "gt/motion.json", "gt/joints.npy"):
        assert (dataset / "scene_0000" / name).exists(), name
    meta = json.loads((dataset / "scene_0000" / "meta.json").read_text())
    assert 0.2 <= meta["blur_rate"] <= 0.3


def test_solve_outputs(solved):
    scene = solved / "scene_0000"
    assert (scene / "state" / "state.json").exists()
    lines = (scene / "loss.jsonl").read_text().splitlines()
    assert len(lines) >= 2
    assert all("total" in json.loads(line) for line in lines)
    assert (solved / "solve_run.json").exists()


def test_eval_tables(solved, dataset, tmp_path):
    out = run("eval", "-r", solved, "-d", dataset, "-o", tmp_path)
    assert out.returncode == 0, out.stderr
    with open(tmp_path / "eval_scenes.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2
    assert (tmp_path / "eval_table.csv").exists()


def test_render_ground_truth_and_state(solved, dataset, tmp_path):
    assert run("render", "--scene", dataset / "scene_0000", "-o", tmp_path / "gt").returncode == 0
    out = run("render", "--scene", dataset / "scene_0000", "--state", solved / "scene_0000" / "state",
              "-o", tmp_path / "st")
    assert out.returncode == 0, out.stderr
    for name in ("recomposed.png", "subframes.png", "mesh.obj", "skeleton.json"):
        assert (tmp_path / "st" / name).exists(), name


def test_bad_bucket_is_usage_error(tmp_path):
    assert run("generate", "-o", tmp_path / "x", "-b", "0.5,0.1").returncode == 1


def test_missing_scene_is_data_error(tmp_path):
    assert run("solve", tmp_path / "nope", "-o", tmp_path / "y").returncode == 2


def test_multi_mode_needs_two_scenes(dataset, tmp_path):
    cfg = tmp_path / "multi.json"
    cfg.write_text(json.dumps({"mode": "multi"}))
    out = run("solve", dataset / "scene_0000", "-o", tmp_path / "z", "-c", cfg)
    assert out.returncode == 1
