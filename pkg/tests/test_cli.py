import json

import pytest

from arak.cli import build_config, main
from arak.harness import RunConfig


def run(tmp_path, *args, env=None):
    out = tmp_path / "out"
    code = main(list(args) + ["--out", str(out)], environ=env or {})
    return code, out


def test_precedence(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("seed = 1\nbeta = 2\nhorizon = 7\n")
    cfg = build_config(["metropolis", "--config", str(f)], {})
    assert cfg.seed == 1 and cfg.get("horizon") == 7
    cfg = build_config(["metropolis", "--config", str(f)], {"ARAK_SEED": "5"})
    assert cfg.seed == 5
    cfg = build_config(["metropolis", "--config", str(f), "--seed", "9", "--beta", "3"], {"ARAK_SEED": "5"})
    assert cfg.seed == 9 and cfg.beta == 3.0


def test_set_values_parsed():
    cfg = build_config(["stats", "--set", "budgets={\"cauchy\": {}}", "--set", "level=0.05"], {})
    assert cfg.get("budgets") == {"cauchy": {}}
    assert cfg.thresholds["level"] == 0.05


def test_sample(tmp_path):
    code, out = run(tmp_path, "sample", "--domain", "square:1", "--seed", "3", "--set", "n=2")
    assert code == 0
    lines = (out / "samples.jsonl").read_text().splitlines()
    assert len(lines) == 2
    assert (out / "first.svg").read_text().startswith("<svg")
    assert RunConfig.load(out / "config.txt").seed == 3


def test_same_seed_same_output(tmp_path):
    run(tmp_path / "a", "sample", "--seed", "4")
    run(tmp_path / "b", "sample", "--seed", "4")
    a = (tmp_path / "a" / "out" / "samples.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "out" / "samples.jsonl").read_bytes()


def test_metropolis(tmp_path):
    code, out = run(tmp_path, "metropolis", "--alpha", "0.5", "--beta", "0.5", "--bd", "white",
                    "--horizon", "4", "--thin", "1", "--burn-in", "1")
    assert code == 0
    assert len((out / "snapshots.jsonl").read_text().splitlines()) == 4


def test_contour_mass(tmp_path):
    code, out = run(tmp_path, "contour-mass", "--domain", "disk:1", "--beta", "4", "--walks", "2000",
                    "--set", "min_length=2")
    assert code == 0
    reps = json.loads((out / "reports.json").read_text())
    assert [r["name"] for r in reps] == ["contour_mass", "tail_mass_R2"]


def test_contour_bd(tmp_path):
    code, out = run(tmp_path, "contour-bd", "--domain", "disk:1", "--beta", "3", "--horizon", "5")
    assert code == 0 and (out / "snapshots.jsonl").exists()


def test_perfect_and_render(tmp_path):
    code, out = run(tmp_path, "perfect", "--beta", "4", "--seed", "2")
    assert code == 0
    code, out2 = run(tmp_path / "r", "render", "--input", str(out / "sample.jsonl"))
    assert code == 0 and (out2 / "render.svg").read_text().startswith("<svg")


def test_perfect_cap_failure_exit_code(tmp_path):
    code, out = run(tmp_path, "perfect", "--beta", "3", "--seed", "19", "--rmax-tail", "1", "--clan-cap", "1")
    assert code == 2
    fail = json.loads((out / "failure.json").read_text())
    assert fail["cap"] == 1 and fail["size"] == 2


def test_stats_exit_codes(tmp_path):
    code, _ = run(tmp_path, "stats", "--suite", "cauchy")
    assert code == 0
    code, out = run(tmp_path / "bad", "stats", "--suite", "cauchy", "--set", "budgets={\"cauchy\": {\"rel_tol\": -1}}")
    assert code == 1
    assert not any(r["passed"] for r in json.loads((out / "reports.json").read_text()))


def test_unknown_suite(tmp_path):
    with pytest.raises(SystemExit):
        run(tmp_path, "stats", "--suite", "nope")


def test_render_needs_input(tmp_path):
    with pytest.raises(SystemExit):
        run(tmp_path, "render")
