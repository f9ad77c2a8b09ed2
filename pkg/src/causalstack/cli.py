"""Command-line entry point: ``causalstack <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 tower generation failure,
4 degenerate inference.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

from . import experiments
from .config import SCHEMA_VERSION, ConfigError, ExperimentConfig, load_config, parse_config_text, parse_override
from .physics import Block, TowerState
from .ppl import DegenerateWeights
from .world import GenerationFailed

log = logging.getLogger("causalstack")

EXIT_CONFIG = 2
EXIT_GENERATION = 3
EXIT_DEGENERATE = 4

# reported figures from the simulated-robot study, echoed for comparison only
REFERENCE_PREDICTION = {"tau": 0.40, "accuracy": 0.886, "f1": 0.909, "precision": 0.955, "recall": 0.868, "auc": 0.961}
REFERENCE_ACTION = {
    "cobra": {"successes": 471, "failures": 29, "success_rate": 0.942},
    "baseline": {"successes": 372, "failures": 128, "success_rate": 0.744},
    "cobra_no_actuation_noise": {"successes": 50, "failures": 0, "success_rate": 1.0},
    "baseline_no_actuation_noise": {"successes": 35, "failures": 15, "success_rate": 0.70},
}


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _config_echo(cfg: ExperimentConfig) -> dict:
    # worker count never changes results; it goes to run_meta.json so that
    # serial and parallel runs produce identical artifacts
    d = cfg.to_dict()
    d["inference"].pop("workers")
    return d


def _config_comment(cfg: ExperimentConfig, seed: int) -> str:
    return "schema_version={} seed={} config={}".format(
        SCHEMA_VERSION, seed, json.dumps(_config_echo(cfg), sort_keys=True, separators=(",", ":"))
    )


def _write_csv(path: Path, comment: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def _envelope(command: str, cfg: ExperimentConfig, seed: int) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, "seed": seed, "config": _config_echo(cfg)}


def _noise_dict(nc) -> dict:
    return {"mean": list(nc.mean), "sigma": list(nc.sigma), "sigma_avg": nc.sigma_avg, "n_pairs": nc.n_pairs}


def cmd_characterize(cfg, seed, args, out: Path) -> list[str]:
    res = experiments.characterize(cfg, seed)
    payload = _envelope("characterize", cfg, seed)
    payload.update({k: _noise_dict(v) for k, v in res.items()})
    _dump_json(out / "noise_characterization.json", payload)
    rows = [(label, *res[key].sigma, res[key].sigma_avg) for label, key in (("Measurement", "measurement"), ("Placement", "placement"))]
    _write_csv(out / "noise_table.csv", _config_comment(cfg, seed), ("error_type", "X", "Y", "Z", "Avg"), rows)
    return ["noise_characterization.json", "noise_table.csv"]


def cmd_eval_prediction(cfg, seed, args, out: Path) -> list[str]:
    res = experiments.eval_prediction(cfg, seed, workers=cfg.inference.workers)
    comment = _config_comment(cfg, seed)
    payload = _envelope("eval-prediction", cfg, seed)
    payload.update(
        {
            "n_towers": len(res["samples"]),
            "n_stable": res["n_stable"],
            "configured_threshold": res["configured"].summary(),
            "youden": res["youden"].summary() if res["youden"] else None,
            "reference": REFERENCE_PREDICTION,
        }
    )
    if "warning" in res:
        payload["warning"] = res["warning"]
        log.warning(res["warning"])
    _dump_json(out / "prediction_report.json", payload)
    report = res["configured"]
    _write_csv(out / "roc.csv", comment, ("threshold", "fpr", "tpr"), report.roc_points)
    _write_csv(out / "pr.csv", comment, ("threshold", "recall", "precision"), report.pr_points)
    _write_csv(out / "scores.csv", comment, ("tower", "phi", "label"), ((i, s.phi, s.label) for i, s in enumerate(res["samples"])))
    return ["prediction_report.json", "roc.csv", "pr.csv", "scores.csv"]


def _policies(arg: str) -> tuple[str, ...]:
    return experiments.POLICIES if arg == "both" else (arg,)


def cmd_eval_action(cfg, seed, args, out: Path) -> list[str]:
    res = experiments.eval_action(
        cfg, seed, _policies(args.policy), no_actuation_noise=args.no_actuation_noise, workers=cfg.inference.workers
    )
    payload = _envelope("eval-action", cfg, seed)
    payload.update(
        {
            "no_actuation_noise": args.no_actuation_noise,
            "n_towers": len(res["towers"]),
            "trials_per_tower": res["trials_per_tower"],
            "totals": res["totals"],
            "towers": res["towers"],
            "reference": REFERENCE_ACTION,
            "artifacts": ["action_report.json"],
        }
    )
    _dump_json(out / "action_report.json", payload)
    return ["action_report.json"]


def parse_tower_spec(text: str, source: str, dims, mass) -> TowerState:
    """Tower spec: ``blocks:`` list of ``{x, y}`` mappings or ``[x, y]`` pairs, bottom first."""
    data = parse_config_text(text, source)
    blocks = data.get("blocks") if isinstance(data, dict) else None
    if not isinstance(blocks, list) or not blocks:
        raise ConfigError(f"{source}: expected a non-empty 'blocks' list")
    dims = tuple(data.get("dims", dims))
    out = []
    for i, b in enumerate(blocks):
        if isinstance(b, dict):
            x, y = b.get("x"), b.get("y")
        elif isinstance(b, (list, tuple)) and len(b) == 2:
            x, y = b
        else:
            raise ConfigError(f"{source}: block {i} must be {{x, y}} or [x, y], got {b!r}")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (x, y)):
            raise ConfigError(f"{source}: block {i} coordinates must be numbers")
        out.append(Block(i, (float(x), float(y), 0.0), dims, mass))
    return TowerState(tuple(out))


def cmd_heatmap(cfg, seed, args, out: Path) -> list[str]:
    if args.tower:
        p = Path(args.tower)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read tower spec {p}: {exc.strerror}") from None
        tower = parse_tower_spec(text, str(p), cfg.block.dims, cfg.block.mass)
    else:
        tower = TowerState(tuple(Block(i, (0.0, 0.0, 0.0), tuple(cfg.block.dims), cfg.block.mass) for i in range(2)))
    mn = cfg.model()
    if args.no_actuation_noise:
        mn = type(mn)(mn.sigma_z, 0.0)
    res = experiments.heatmap(cfg, tower, seed, mn)
    payload = _envelope("heatmap", cfg, seed)
    payload.update(res)
    _dump_json(out / "heatmap.json", payload)
    cols = ("row", "col", "x", "y", "phi", "in_tau_set", "in_stable_set", "truth_stable")
    _write_csv(out / "heatmap.csv", _config_comment(cfg, seed), cols, ([c[k] for k in cols] for c in res["cells"]))
    return ["heatmap.json", "heatmap.csv"]


def cmd_episode(cfg, seed, args, out: Path) -> list[str]:
    initial, records = experiments.episode(cfg, seed, _policies(args.policy), args.no_actuation_noise)
    payload = _envelope("episode", cfg, seed)
    payload["initial_tower"] = [list(b.center) for b in initial.tower.blocks]
    payload["episodes"] = {
        p: {
            "seed": r.seed,
            "outcome": r.outcome,
            "skipped_steps": r.skipped_steps,
            "steps": [
                {
                    "step": s.step,
                    "observation": s.observation,
                    "action": list(s.action),
                    "realized": list(s.realized),
                    "stable": s.stable,
                    "failing_interface": s.failing_interface,
                    "confidence_flag": s.confidence_flag,
                }
                for s in r.steps
            ],
        }
        for p, r in records.items()
    }
    _dump_json(out / "episode.json", payload)
    return ["episode.json"]


COMMANDS = {
    "characterize": (cmd_characterize, False),
    "eval-prediction": (cmd_eval_prediction, True),
    "eval-action": (cmd_eval_action, True),
    "heatmap": (cmd_heatmap, False),
    "episode": (cmd_episode, False),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causalstack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, seed_required) in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int, required=seed_required, help="master seed (u64)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, help="process-level parallelism (overrides inference.workers)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        if name in ("eval-action", "episode", "heatmap"):
            p.add_argument("--no-actuation-noise", action="store_true")
        if name in ("eval-action", "episode"):
            p.add_argument("--policy", choices=("cobra", "baseline", "both"), default="both" if name == "eval-action" else "cobra")
        if name == "heatmap":
            p.add_argument("--tower", help="tower spec YAML (blocks bottom-first)")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        overrides = dict(parse_override(s) for s in args.set)
        if args.workers is not None:
            overrides["inference.workers"] = args.workers
        if args.seed is not None:
            overrides["seed"] = args.seed
        cfg = load_config(args.config, overrides)
        seed = cfg.seed if cfg.seed is not None else 0
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        fn, _ = COMMANDS[args.command]
        t0 = time.perf_counter()
        files = fn(cfg, seed, args, out)
        meta = {
            "command": args.command,
            "seed": seed,
            "workers": cfg.inference.workers,
            "wall_clock_s": time.perf_counter() - t0,
            "artifacts": files,
        }
        _dump_json(out / "run_meta.json", meta)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except GenerationFailed as exc:
        log.error("generation failed: %s", exc)
        return EXIT_GENERATION
    except DegenerateWeights as exc:
        log.error("degenerate inference: %s", exc)
        return EXIT_DEGENERATE
    except OSError as exc:
        log.error("I/O error on %s: %s", exc.filename, exc.strerror)
        return 1
    for f in files:
        log.info("wrote %s", out / f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
