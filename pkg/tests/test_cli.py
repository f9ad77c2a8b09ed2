import csv
import json

import pytest

from causalstack import cli, experiments
from causalstack.ppl import DegenerateWeights

SMALL = [
    "--set", "prediction.n_towers=12",
    "--set", "action_eval.n_towers=4",
    "--set", "action_eval.trials=2",
    "--set", "inference.n_samples=10",
    "--set", "heatmap.rows=5",
    "--set", "heatmap.cols=5",
    "--set", "characterize.obs_towers=10",
    "--set", "characterize.place_towers=3",
]
ZERO_NOISE = [
    "--set", "world_noise.obs_sigma=[0, 0, 0]",
    "--set", "world_noise.act_sigma=[0, 0, 0]",
    "--set", "model_noise.sigma_z=0",
    "--set", "model_noise.sigma_a=0",
]


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def artifacts(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "run_meta.json"}


@pytest.mark.parametrize(
    "command,extra",
    [
        ("characterize", []),
        ("eval-prediction", ["--seed", "3"]),
        ("eval-action", ["--seed", "3"]),
        ("heatmap", []),
        ("episode", ["--policy", "both"]),
    ],
)
def test_rerun_and_workers_are_byte_identical(tmp_path, command, extra):
    code_a, a = run(tmp_path, "a", command, *extra, *SMALL)
    code_b, b = run(tmp_path, "b", command, *extra, *SMALL)
    code_c, c = run(tmp_path, "c", command, *extra, *SMALL, "--workers", "2")
    assert code_a == code_b == code_c == 0
    assert artifacts(a) == artifacts(b) == artifacts(c)
    assert json.loads((c / "run_meta.json").read_text())["workers"] == 2


def test_outputs_carry_schema_and_seed(tmp_path):
    code, out = run(tmp_path, "p", "eval-prediction", "--seed", "11", *SMALL)
    assert code == 0
    rep = json.loads((out / "prediction_report.json").read_text())
    assert rep["schema_version"] == 1 and rep["seed"] == 11 and rep["command"] == "eval-prediction"
    assert rep["config"]["prediction"]["n_towers"] == 12
    first = (out / "roc.csv").read_text().splitlines()[0]
    assert first.startswith("# schema_version=1 seed=11 config=")
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["wall_clock_s"] >= 0


def test_seed_required_for_eval_commands(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["eval-action", "--out", str(tmp_path)])


def test_exit_code_config_error(tmp_path):
    assert run(tmp_path, "x", "heatmap", "--set", "policy.tau_cluster=7")[0] == cli.EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1\n")
    assert run(tmp_path, "y", "heatmap", "--config", str(bad))[0] == cli.EXIT_CONFIG


def test_exit_code_generation_failure(tmp_path):
    code, _ = run(
        tmp_path, "g", "eval-action", "--seed", "1",
        "--set", "action_eval.offset_range=1000", "--set", "action_eval.n_blocks=4",
    )
    assert code == cli.EXIT_GENERATION


def test_exit_code_degenerate(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise DegenerateWeights("all weights are zero")

    monkeypatch.setattr(experiments, "heatmap", boom)
    assert run(tmp_path, "d", "heatmap")[0] == cli.EXIT_DEGENERATE


def test_zero_noise_characterize_table(tmp_path):
    code, out = run(tmp_path, "z", "characterize", *SMALL, *ZERO_NOISE)
    assert code == 0
    rows = list(csv.reader(l for l in (out / "noise_table.csv").read_text().splitlines() if not l.startswith("#")))
    assert rows[0] == ["error_type", "X", "Y", "Z", "Avg"]
    assert [r[0] for r in rows[1:]] == ["Measurement", "Placement"]
    assert all(float(v) == 0.0 for r in rows[1:] for v in r[1:])


def test_zero_noise_prediction_is_perfect(tmp_path):
    code, out = run(tmp_path, "p0", "eval-prediction", "--seed", "2", *SMALL, *ZERO_NOISE)
    assert code == 0
    rep = json.loads((out / "prediction_report.json").read_text())
    assert rep["configured_threshold"]["accuracy"] == 1.0


def test_zero_noise_action_eval(tmp_path):
    code, out = run(tmp_path, "a0", "eval-action", "--seed", "5", *SMALL, *ZERO_NOISE, "--set", "action_eval.trials=1")
    assert code == 0
    rep = json.loads((out / "action_report.json").read_text())
    for policy in ("cobra", "baseline"):
        t = rep["totals"][policy]
        assert t["success_rate"] == 1.0
        assert t["successes"] + t["failures"] == rep["n_towers"] * rep["trials_per_tower"]


def test_heatmap_tower_spec(tmp_path):
    spec = tmp_path / "tower.yaml"
    spec.write_text("blocks:\n  - {x: 0, y: 0}\n  - [2.0, 0]\n")
    code, out = run(tmp_path, "h", "heatmap", "--tower", str(spec), *SMALL, *ZERO_NOISE)
    assert code == 0
    hm = json.loads((out / "heatmap.json").read_text())
    assert len(hm["cells"]) == 25
    assert all(c["phi"] == float(c["truth_stable"]) for c in hm["cells"])
    spec.write_text("blocks: []\n")
    assert run(tmp_path, "h2", "heatmap", "--tower", str(spec))[0] == cli.EXIT_CONFIG
