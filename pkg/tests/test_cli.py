import json
import subprocess
import sys

import pytest

from modalflow.cli import main

FAST_CONFIGS = {
    "flow": {"density": {"fixture": "D_gauss2"},
             "starts": {"ring": {"center": [0, 0], "radius": 2, "count": 8}}, "flows": ["gamma", "xi", "zeta"]},
    "climb": {"density": {"fixture": "D_mix1"}, "starts": {"random": {"count": 6}}},
    "tree": {"density": {"fixture": "D_mix2"}},
    "rates": {"density": {"fixture": "D_mix2"}, "algorithm": "alg2", "start": [1.5, 0.2],
              "steps": [0.08, 0.04, 0.02, 0.01]},
    "cluster": {"density": {"fixture": "D_mix2"}, "n": 60, "methods": ["meanshift", "method2"]},
}


def _run(tmp_path, command, cfg, name="cfg.json", seed=None):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    out = tmp_path / f"out_{command}_{name}"
    argv = [command, "--config", str(path), "--out", str(out)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    return main(argv), out


def _snapshot(out):
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


def test_flow_ring_terminates_at_origin(tmp_path):
    code, out = _run(tmp_path, "flow", FAST_CONFIGS["flow"])
    assert code == 0
    assert len(list((out / "trajectories").glob("gamma_*.csv"))) == 8
    summary = json.loads((out / "summary.json").read_text())
    for row in summary["trajectories"]:
        assert row["gamma"]["kind"] == "mode"
        assert max(abs(v) for v in row["gamma"]["terminal"]) <= 1e-6
        assert row["zeta"]["kind"] == "level_reached"


def test_flow_grid_on_mix2_reaches_modes(tmp_path):
    cfg = {"density": {"fixture": "D_mix2"}, "starts": {"grid": {"per_axis": 6, "min_level_rel_fmax": 0.01}}}
    code, out = _run(tmp_path, "flow", cfg)
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_starts"] > 0
    assert all(r["gamma"]["kind"] == "mode" for r in summary["trajectories"])
    assert len(summary["modes"]) == 2


def test_climb_summary(tmp_path):
    code, out = _run(tmp_path, "climb", FAST_CONFIGS["climb"])
    assert code == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["results"]["alg1"]["agreement"] == 1.0
    assert s["results"]["alg2"]["agreement"] == 1.0
    assert (out / "climbs" / "alg1_0000.csv").exists()
    assert (out / "climbs" / "alg2_0000.json").exists()


@pytest.mark.parametrize("fixture,leaves", [("D_mix1", 2), ("D_gauss1", 1), ("D_mix2", 2)])
def test_tree_leaf_count(tmp_path, fixture, leaves):
    code, out = _run(tmp_path, "tree", {"density": {"fixture": fixture}})
    assert code == 0
    d = json.loads((out / "tree.json").read_text())
    assert sum(1 for n in d["nodes"] if not n["children"]) == leaves
    assert (out / "profile.csv").read_text().startswith("level,component_count\n")


def test_rates_writes_report(tmp_path):
    code, out = _run(tmp_path, "rates", FAST_CONFIGS["rates"])
    assert code == 0
    s = json.loads((out / "summary.json").read_text())
    assert 0.75 <= s["slope"] <= 1.25
    assert (out / "rates_alg2.csv").exists()


def test_cluster_writes_labels(tmp_path):
    code, out = _run(tmp_path, "cluster", FAST_CONFIGS["cluster"])
    assert code == 0
    for name in ("sample.csv", "labels_truth.csv", "labels_meanshift.csv", "labels_method2.csv"):
        assert (out / name).exists()
    s = json.loads((out / "summary.json").read_text())
    assert "meanshift|method2" in s["pairwise"]
    assert "ari_vs_truth" in s["methods"]["meanshift"]


@pytest.mark.parametrize("command,cfg", [
    ("climb", {"density": {"fixture": "D_mix1"}, "eta": -1.0}),
    ("climb", {"density": {"fixture": "D_mix1"}, "eta": 0}),
    ("rates", {"density": {"fixture": "D_mix1"}, "start": [1.0], "steps": [1e-3]}),
    ("rates", {"density": {"fixture": "D_mix1"}, "start": [1.0], "steps": [1e-3, 2e-3, 3e-3, 4e-3]}),
    ("cluster", {"density": {"fixture": "D_mix2"}, "n": 0}),
    ("tree", {"density": {"fixture": "D_mix2"}, "bogus": 1}),
    ("tree", {"density": {"fixture": "D_mix2"}, "controls": {"bogus": 1}}),
    ("tree", {"density": {"fixture": "nope"}}),
    ("tree", {}),
    ("flow", {"density": {"fixture": "D_gauss2"}, "flows": ["delta"]}),
    ("flow", {"density": {"fixture": "D_gauss2"}, "starts": {"ring": {"radius": 1, "spin": 2}}}),
])
def test_config_errors_exit_2(tmp_path, command, cfg):
    code, _ = _run(tmp_path, command, cfg)
    assert code == 2


def test_missing_density_file_names_path(tmp_path, capsys):
    code, _ = _run(tmp_path, "tree", {"density": "nope.json"})
    assert code == 2
    assert "nope.json" in capsys.readouterr().err


def test_missing_config_and_bad_json(tmp_path):
    assert main(["tree", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "o")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["tree", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")]) == 2
    assert main(["nosuch", "--config", "x", "--out", "y"]) == 2


def test_runtime_failure_exits_1(tmp_path):
    # a start on the saddle has no mode to compare against
    cfg = {"density": {"fixture": "D_mix1"}, "algorithm": "alg2", "start": [1.75], "steps": [0.4, 0.2, 0.1, 0.05]}
    code, _ = _run(tmp_path, "rates", cfg)
    assert code == 1


def test_grid_too_small_exits_1(tmp_path):
    cfg = {"density": {"fixture": "D_mix1"}, "grid": {"box": [[-1.0, 4.0]], "cells_per_axis": 64}}
    code, _ = _run(tmp_path, "tree", cfg)
    assert code == 1


def test_seed_flag_overrides_config(tmp_path):
    code, out = _run(tmp_path, "climb", {**FAST_CONFIGS["climb"], "seed": 3}, seed=5)
    assert code == 0
    assert json.loads((out / "summary.json").read_text())["seed"] == 5


@pytest.mark.parametrize("command", sorted(FAST_CONFIGS))
def test_reruns_are_byte_identical(tmp_path, command):
    cfg = FAST_CONFIGS[command]
    code_a, out_a = _run(tmp_path, command, cfg, "a.json")
    code_b, out_b = _run(tmp_path, command, cfg, "b.json")
    assert code_a == code_b == 0
    snap_a, snap_b = _snapshot(out_a), _snapshot(out_b)
    assert snap_a.keys() == snap_b.keys()
    assert snap_a == snap_b


def test_console_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "modalflow.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "MODALFLOW_THREADS" in res.stdout
    assert "eta_rel_fmax" in res.stdout
