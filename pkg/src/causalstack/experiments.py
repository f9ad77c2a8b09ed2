"""Experiment drivers behind the CLI.

Each driver is a pure function of ``(config, seed)`` returning plain data.
Work is split into units (one tower, one configuration) whose seeds are
derived from the master seed and the unit index, so a process pool gives
the same bytes as a serial run.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional, Sequence

from . import physics
from .config import ExperimentConfig
from .metrics import (
    NoThreshold,
    ScoredSample,
    characterize_noise,
    evaluate_classifier,
    predict_stability,
    youden_threshold,
)
from .physics import Block, TowerState
from .policy import (
    FALLBACK,
    NORMAL,
    SelectionResult,
    baseline_action,
    candidate_grid,
    greedy_select,
    score_candidates,
    select_action,
)
from .seeding import derive_seed
from .task_model import Action, NoiseParams, Observation, TaskState
from .world import EpisodeRecord, StepRecord, World, WorldNoise, queue_blocks, random_tower

POLICIES = ("cobra", "baseline")


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Order-preserving map; ``workers > 1`` uses a process pool."""
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))
    return [fn(x) for x in items]


def _block_kw(cfg: ExperimentConfig) -> dict:
    return {"dims": tuple(cfg.block.dims), "mass": cfg.block.mass}


def choose_action(
    policy: str, observation: Observation, queue_front: Block, cfg: ExperimentConfig, noise: NoiseParams, seed: int
) -> tuple[Action, Optional[SelectionResult]]:
    if policy == "baseline":
        return baseline_action(observation.top_block), None
    if policy != "cobra":
        raise ValueError(f"unknown policy {policy!r}")
    sel = greedy_select(
        observation,
        queue_front,
        noise,
        rows=cfg.policy.grid_rows,
        cols=cfg.policy.grid_cols,
        n_samples=cfg.inference.n_samples,
        tau_stable_a=cfg.policy.tau_stable_a,
        tau_cluster=cfg.policy.tau_cluster,
        rng_seed=seed,
    )
    return sel.chosen, sel


# --------------------------------------------------------------------------
# noise characterisation
# --------------------------------------------------------------------------


def characterize(cfg: ExperimentConfig, seed: int, world_noise: WorldNoise | None = None) -> dict:
    """Paired (estimate, truth) data for observation and placement error."""
    wn = world_noise or cfg.world()
    cc = cfg.characterize
    bk = _block_kw(cfg)

    obs_pairs = []
    for i in range(cc.obs_towers):
        st = random_tower(cc.obs_tower_blocks, cc.offset_range, False, derive_seed(seed, "char-obs-tower", i), **bk)
        obs = World(st, wn, derive_seed(seed, "char-obs", i)).observe()
        obs_pairs.extend((e.center, t.center) for e, t in zip(obs.blocks, st.tower.blocks))

    place_pairs = []
    for i in range(cc.place_towers):
        st = random_tower(2, cc.offset_range, True, derive_seed(seed, "char-place-tower", i), queue_size=1, **bk)
        target = baseline_action(st.tower.top_block)
        for k in range(cc.place_attempts):
            world = World(st, wn, derive_seed(seed, "char-place", i, k))
            world.execute_place(target)
            p = world.placements[-1]
            place_pairs.append((p.realized, p.target))

    return {
        "measurement": characterize_noise(obs_pairs),
        "placement": characterize_noise(place_pairs),
    }


# --------------------------------------------------------------------------
# stability prediction
# --------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class _PredictionUnit:
    cfg: ExperimentConfig
    seed: int
    index: int
    world_noise: WorldNoise
    model_noise: NoiseParams


def _score_tower(u: _PredictionUnit) -> tuple[float, bool]:
    pc = u.cfg.prediction
    st = random_tower(pc.n_blocks, pc.offset_range, False, derive_seed(u.seed, "pred-tower", u.index), **_block_kw(u.cfg))
    label = physics.is_stable(st.tower).stable
    obs = World(st, u.world_noise, derive_seed(u.seed, "pred-obs", u.index)).observe()
    phi = predict_stability(obs, u.model_noise, u.cfg.inference.n_samples, derive_seed(u.seed, "pred-infer", u.index))
    return phi, label


def score_dataset(
    cfg: ExperimentConfig,
    seed: int,
    world_noise: WorldNoise | None = None,
    model_noise: NoiseParams | None = None,
    workers: int = 1,
) -> list[ScoredSample]:
    """Random towers, ground-truth labels and predicted stability probabilities.

    Tower ``i`` and its observation depend only on ``(seed, i)``, so changing
    the noise levels re-scores the same towers.
    """
    units = [
        _PredictionUnit(cfg, seed, i, world_noise or cfg.world(), model_noise or cfg.model())
        for i in range(cfg.prediction.n_towers)
    ]
    return [ScoredSample(phi, label) for phi, label in parallel_map(_score_tower, units, workers)]


def eval_prediction(cfg: ExperimentConfig, seed: int, workers: int = 1, **noise) -> dict:
    samples = score_dataset(cfg, seed, workers=workers, **noise)
    out: dict = {"samples": samples, "n_stable": sum(s.label for s in samples)}
    out["configured"] = evaluate_classifier(samples, cfg.prediction.tau_stable_z)
    try:
        tau = youden_threshold(samples)
    except NoThreshold:
        out["youden"] = None
        out["warning"] = "dataset has a single class; AUC and Youden threshold undefined"
    else:
        out["youden"] = evaluate_classifier(samples, tau)
    return out


# --------------------------------------------------------------------------
# action selection
# --------------------------------------------------------------------------


def _policy_noise(cfg: ExperimentConfig, no_actuation_noise: bool) -> tuple[WorldNoise, NoiseParams]:
    wn, mn = cfg.world(), cfg.model()
    if no_actuation_noise:
        wn, mn = wn.without_actuation(), NoiseParams(mn.sigma_z, 0.0)
    return wn, mn


def trial_seed(seed: int, tower: int, trial: int) -> int:
    return derive_seed(seed, "act-world", tower, trial)


@dataclasses.dataclass(frozen=True)
class _ActionUnit:
    cfg: ExperimentConfig
    seed: int
    index: int
    policies: tuple
    no_actuation_noise: bool


def _run_action_unit(u: _ActionUnit) -> dict:
    cfg = u.cfg
    ac = cfg.action_eval
    wn, mn = _policy_noise(cfg, u.no_actuation_noise)
    st = random_tower(
        ac.n_blocks, ac.offset_range, True, derive_seed(u.seed, "act-tower", u.index), queue_size=1, **_block_kw(cfg)
    )
    # the observation comes from the trial-0 world so trial 0 is exactly a one-step episode
    s0 = trial_seed(u.seed, u.index, 0)
    obs = World(st, wn, s0).observe()
    row = {"tower": u.index, "initial": [list(b.center) for b in st.tower.blocks], "policies": {}}
    for policy in u.policies:
        action, sel = choose_action(policy, obs, st.queue[0], cfg, mn, derive_seed(s0, "select", 1))
        outcomes = []
        for k in range(ac.trials):
            world = World(st, wn, trial_seed(u.seed, u.index, k))
            outcomes.append(world.execute_place(action).stable)
        row["policies"][policy] = {
            "action": [action.x, action.y],
            "confidence_flag": sel.confidence_flag if sel else NORMAL,
            "successes": sum(outcomes),
            "failures": len(outcomes) - sum(outcomes),
            "outcomes": outcomes,
        }
    return row


def eval_action(
    cfg: ExperimentConfig,
    seed: int,
    policies: Sequence[str] = POLICIES,
    no_actuation_noise: bool = False,
    workers: int = 1,
) -> dict:
    units = [_ActionUnit(cfg, seed, i, tuple(policies), no_actuation_noise) for i in range(cfg.action_eval.n_towers)]
    rows = parallel_map(_run_action_unit, units, workers)
    totals = {}
    for policy in policies:
        s = sum(r["policies"][policy]["successes"] for r in rows)
        f = sum(r["policies"][policy]["failures"] for r in rows)
        totals[policy] = {
            "successes": s,
            "failures": f,
            "success_rate": s / (s + f),
            "fallbacks": sum(r["policies"][policy]["confidence_flag"] == FALLBACK for r in rows),
        }
    return {"towers": rows, "totals": totals, "trials_per_tower": cfg.action_eval.trials}


# --------------------------------------------------------------------------
# sequential episodes
# --------------------------------------------------------------------------


def run_episode(
    initial: TaskState,
    steps: int,
    cfg: ExperimentConfig,
    policy: str,
    seed: int,
    world_noise: WorldNoise | None = None,
    model_noise: NoiseParams | None = None,
) -> EpisodeRecord:
    """Observe, select, place; the first unstable placement ends the episode."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if len(initial.queue) < steps:
        raise ValueError(f"queue holds {len(initial.queue)} blocks, episode needs {steps}")
    wn = world_noise or cfg.world()
    mn = model_noise or cfg.model()
    world = World(initial, wn, seed)
    record = EpisodeRecord(seed=seed, policy=policy)
    for k in range(1, steps + 1):
        if record.outcome == "failure":
            record.skipped_steps += 1
            continue
        obs = world.observe()
        action, sel = choose_action(policy, obs, world.state.queue[0], cfg, mn, derive_seed(seed, "select", k))
        verdict = world.execute_place(action)
        record.steps.append(
            StepRecord(
                step=k,
                observation=[list(b.center) for b in obs.blocks],
                action=(action.x, action.y),
                realized=world.placements[-1].realized,
                stable=verdict.stable,
                failing_interface=verdict.first_failing_interface,
                confidence_flag=sel.confidence_flag if sel else NORMAL,
            )
        )
        if not verdict.stable:
            record.outcome = "failure"
    return record


def episode(cfg: ExperimentConfig, seed: int, policies: Sequence[str] = ("cobra",), no_actuation_noise: bool = False):
    ec = cfg.episode
    wn, mn = _policy_noise(cfg, no_actuation_noise)
    initial = random_tower(
        ec.initial_blocks, ec.offset_range, True, derive_seed(seed, "episode-tower"), queue_size=ec.steps, **_block_kw(cfg)
    )
    ep_seed = derive_seed(seed, "episode")
    return initial, {p: run_episode(initial, ec.steps, cfg, p, ep_seed, wn, mn) for p in policies}


# --------------------------------------------------------------------------
# candidate heatmap
# --------------------------------------------------------------------------


def heatmap(cfg: ExperimentConfig, tower: TowerState, seed: int, model_noise: NoiseParams | None = None) -> dict:
    """Stability probability of every candidate on a dense grid over the top face.

    ``tower`` is taken as the robot's observation. Ground-truth membership is
    the zero-noise oracle verdict for each exact placement.
    """
    mn = model_noise or cfg.model()
    tower = physics.settle(tower)
    obs = Observation(tower.blocks)
    top = tower.top_block
    nxt = queue_blocks(max(b.id for b in tower.blocks) + 1, 1, tuple(cfg.block.dims), cfg.block.mass)[0]
    cands = candidate_grid(top, cfg.heatmap.rows, cfg.heatmap.cols)
    scores = score_candidates(obs, nxt, cands, mn, cfg.inference.n_samples, seed, workers=cfg.inference.workers)
    sel = select_action(scores, cfg.policy.tau_stable_a, cfg.policy.tau_cluster, center=(top.x, top.y))
    truth = [oracle_placement_stable(tower, nxt, a) for a in cands]
    stable_truth = [a for a, ok in zip(cands, truth) if ok]
    truth_centroid = (
        [sum(a.x for a in stable_truth) / len(stable_truth), sum(a.y for a in stable_truth) / len(stable_truth)]
        if stable_truth
        else None
    )
    cells = []
    for i, (s, ok) in enumerate(zip(sel.scores, truth)):
        cells.append(
            {
                "row": i // cfg.heatmap.cols,
                "col": i % cfg.heatmap.cols,
                "x": s.action.x,
                "y": s.action.y,
                "phi": s.phi,
                "in_tau_set": s.in_tau_set,
                "in_stable_set": s.in_stable_set,
                "truth_stable": ok,
            }
        )
    return {
        "tower": [list(b.center) for b in tower.blocks],
        "cells": cells,
        "chosen": [sel.chosen.x, sel.chosen.y],
        "best": [sel.best.x, sel.best.y],
        "best_phi": sel.best_phi,
        "confidence_flag": sel.confidence_flag,
        "truth_centroid": truth_centroid,
    }


def oracle_placement_stable(tower: TowerState, block: Block, action: Action) -> bool:
    placed = Block(block.id, (action.x, action.y, 0.0), block.dims, block.mass)
    return physics.is_stable(physics.settle(tower.with_block(placed))).stable
