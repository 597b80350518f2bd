import csv
import json
import shutil
import subprocess
import sys

import pytest

from bhlab import cli
from bhlab.errors import InvariantError
from bhlab.oracles import FIXTURES, bootstrap, golden_check

F2 = {"family": "full", "size": 2}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, command, cfg, *extra, out="out"):
    return cli.main([command, "--config", write(tmp_path, cfg), "--out", str(tmp_path / out), *extra])


def test_density_example(tmp_path):
    cfg = {"version": 1, "experiment": "density", "space": F2, "params": {"q": 3, "k": 1, "m": 1}}
    assert run(tmp_path, "density", cfg) == 0
    res = json.loads((tmp_path / "out" / "result.json").read_text())
    assert res["raw_count"] == 24
    resolved = json.loads((tmp_path / "out" / "config.resolved.json").read_text())
    assert resolved["params"] == {"q": 3, "k": 1, "m": 1} and resolved["seed"] == 0
    meta = json.loads((tmp_path / "out" / "metadata.json").read_text())
    assert {"git", "seed", "threads", "wall_time", "timestamp"} <= meta.keys()


def test_compare_csv(tmp_path):
    cfg = {"version": 1, "experiment": "compare", "space": F2, "T_list": [20, 50, 100], "samples": 20000}
    assert run(tmp_path, "compare", cfg) == 0
    rows = list(csv.DictReader(open(tmp_path / "out" / "compare.csv")))
    assert [r["T"] for r in rows] == ["20", "50", "100"]
    for r in rows:
        assert float(r["ratio"]) == pytest.approx(int(r["empirical"]) / float(r["predicted"]), rel=1e-12)


@pytest.mark.parametrize(
    "command,cfg",
    [
        ("count", {"version": 1, "experiment": "count"}),  # missing space
        ("count", {"version": 1, "experiment": "count", "space": F2, "extra": 1}),
        ("count", {"version": 1, "experiment": "count", "space": {"family": "full", "size": 2, "n": 2}}),
        ("count", {"version": 2, "experiment": "count", "space": F2}),
        ("count", {"version": 1, "experiment": "density", "space": F2}),  # wrong subcommand
        ("count", {"version": 1, "experiment": "count", "space": F2, "samples": 10}),
        ("density", {"version": 1, "experiment": "density", "space": F2, "params": {"q": 4, "k": 1}}),
    ],
)
def test_config_errors_leave_nothing(tmp_path, command, cfg):
    assert run(tmp_path, command, cfg) == 2
    assert not (tmp_path / "out").exists()
    assert [p.name for p in tmp_path.iterdir()] == ["cfg.json"]


def test_unreadable_config(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    assert cli.main(["count", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["count", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2


def test_budget_exit(tmp_path):
    cfg = {"version": 1, "experiment": "count", "space": F2, "region": {"kind": "box", "T": 30}}
    assert run(tmp_path, "count", cfg, "--budget", "1000") == 3
    assert [p.name for p in tmp_path.iterdir()] == ["cfg.json"]


def test_invariant_exit(tmp_path, monkeypatch):
    cfg = {"version": 1, "experiment": "count", "space": F2, "region": {"kind": "box", "T": 2}}
    monkeypatch.setitem(cli._RUNNERS, "count", lambda c, s, o: ({"ok": False}, False))
    assert run(tmp_path, "count", cfg) == 4
    assert (tmp_path / "out" / "result.json").exists()

    def boom(c, s, o):
        raise InvariantError("broken")

    monkeypatch.setitem(cli._RUNNERS, "count", boom)
    assert run(tmp_path, "count", cfg, out="out2") == 4


def test_outputs_reproducible(tmp_path):
    cfg = {"version": 1, "experiment": "predict", "space": F2, "T_list": [10, 20], "samples": 5000, "seed": 9}
    assert run(tmp_path, "predict", cfg, out="a") == 0
    assert run(tmp_path, "predict", cfg, out="b") == 0
    for name in ("predict.csv", "result.json", "config.resolved.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert run(tmp_path, "predict", cfg, "--seed", "10", out="c") == 0
    assert (tmp_path / "a" / "predict.csv").read_bytes() != (tmp_path / "c" / "predict.csv").read_bytes()


def test_sieve_and_equidist(tmp_path):
    cfg = {"version": 1, "experiment": "sieve", "space": F2, "region": {"kind": "box", "T": 20}, "params": {"z": 5}}
    assert run(tmp_path, "sieve", cfg) == 0
    assert json.loads((tmp_path / "out" / "result.json").read_text())["contained"]
    cfg = {"version": 1, "experiment": "equidist", "space": {"family": "sym", "size": 2}, "params": {"q": 5, "k": 1}}
    assert run(tmp_path, "equidist", cfg, out="e") == 0


def test_pipeline(tmp_path):
    cfg = {
        "version": 1,
        "experiment": "pipeline",
        "steps": [
            {"experiment": "count", "space": F2, "region": {"kind": "cone", "T": 5, "patch": {"sign": 1, "hi": 3.0}}},
            {"experiment": "mass", "params": {"n": 3, "D": 5}},
            {"experiment": "classnumber", "params": {"n": 2, "D_list": [3, 5], "equivalence": "GL"}},
            {"experiment": "series", "space": {"family": "skew", "size": 4}, "params": {"P": 100}},
        ],
    }
    assert run(tmp_path, "pipeline", cfg) == 0
    names = sorted(p.name for p in (tmp_path / "out").iterdir())
    assert names[:3] == ["config.resolved.json", "metadata.json", "result.json"]
    assert len([n for n in names if n.startswith("step")]) == 4
    mass = json.loads((tmp_path / "out" / "step01_mass" / "result.json").read_text())
    assert all(g["mass"] == g["siegel"] for g in mass["genera"])


def test_pipeline_bad_step(tmp_path):
    cfg = {"version": 1, "experiment": "pipeline", "steps": [{"experiment": "count"}]}
    assert run(tmp_path, "pipeline", cfg) == 2


def test_golden_subcommands(tmp_path, monkeypatch, capsys):
    root = tmp_path / "fx"
    names = ["full2_box1_histogram", "mass_n3_D5"]
    assert cli.main(["bootstrap-oracles", "--out", str(root), "--only", *names]) == 0
    monkeypatch.setenv("BHLAB_FIXTURES", str(root))
    assert cli.main(["golden-check", "--only", *names]) == 0
    rec = json.loads((root / "full2_box1_histogram.json").read_text())
    rec["expected"]["by_value"]["2"] += 1
    (root / "full2_box1_histogram.json").write_text(json.dumps(rec))
    assert cli.main(["golden-check", "--only", *names]) == 4
    assert "FAIL full2_box1_histogram" in capsys.readouterr().out


def test_console_entry_points(tmp_path):
    cfg = write(tmp_path, {"version": 1, "experiment": "count", "space": F2, "region": {"kind": "box", "T": 1}})
    out = tmp_path / "o"
    r = subprocess.run([sys.executable, "-m", "bhlab", "count", "--config", cfg, "--out", str(out)])
    assert r.returncode == 0
    assert json.loads((out / "result.json").read_text())["total"] == 4
    exe = shutil.which("bhlab")
    if exe:
        r = subprocess.run([exe, "count", "--config", cfg, "--out", str(out), "--budget", "1"], capture_output=True)
        assert r.returncode == 3


# ------------------------------------------------------------ golden files


def test_committed_fixtures_pass(fixture_dir):
    s = golden_check(fixture_dir)
    assert s.passed, s.failures
    assert sorted(s.checked) == sorted(f["name"] for f in FIXTURES)


def test_perturbed_fixture_fails(tmp_path, fixture_dir):
    shutil.copytree(fixture_dir, tmp_path / "fx")
    path = tmp_path / "fx" / "sym3_box10_positive.json"
    rec = json.loads(path.read_text())
    rec["expected"]["total"] += 1
    path.write_text(json.dumps(rec))
    s = golden_check(tmp_path / "fx", ["sym3_box10_positive", "skew4_box10_positive"])
    assert not s.passed
    assert list(s.failures) == ["sym3_box10_positive"]


def test_tolerance_fixture(tmp_path):
    bootstrap(tmp_path, ["mass_A4"])
    path = tmp_path / "mass_A4.json"
    rec = json.loads(path.read_text())
    rec["expected"]["mass"] *= 1 + 1e-11
    path.write_text(json.dumps(rec))
    assert golden_check(tmp_path, ["mass_A4"]).passed
    rec["expected"]["mass"] *= 1 + 1e-6
    path.write_text(json.dumps(rec))
    assert not golden_check(tmp_path, ["mass_A4"]).passed


def test_empty_and_missing(tmp_path):
    s = golden_check(tmp_path)
    assert not s.passed and "bootstrap-oracles" in next(iter(s.failures.values()))
    bootstrap(tmp_path, ["mass_n2_D1"])
    s = golden_check(tmp_path, ["mass_n2_D1", "mass_n2_D3"])
    assert s.failures == {"mass_n2_D3": "missing fixture file"}
