"""Greedy next-best placement and the centre-placement baseline."""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .physics import Block
from .ppl import importance_query
from .seeding import derive_seed
from .task_model import Action, NoiseParams, Observation, do_action, full_step_model, stable_query

NORMAL = "normal"
FALLBACK = "fallback_low_confidence"

DEFAULT_TAU_STABLE_A = 0.8
DEFAULT_TAU_CLUSTER = 0.2


@dataclass(frozen=True)
class CandidateScore:
    action: Action
    phi: float
    in_tau_set: bool = False
    in_stable_set: bool = False


@dataclass(frozen=True)
class SelectionResult:
    chosen: Action
    scores: tuple[CandidateScore, ...]
    best: Action
    best_phi: float
    confidence_flag: str

    @property
    def stable_set(self) -> list[Action]:
        return [s.action for s in self.scores if s.in_stable_set]


def candidate_grid(top_block: Block, rows: int = 5, cols: int = 5) -> list[Action]:
    """Cell centres of a ``rows x cols`` grid over the top face, row-major.

    Rows run along y and columns along x.
    """
    if rows < 1 or cols < 1:
        raise ValueError("grid needs at least one row and one column")
    w, d = top_block.dims[0], top_block.dims[1]
    x0, y0 = top_block.x - w / 2, top_block.y - d / 2
    xs = [x0 + (c + 0.5) * w / cols for c in range(cols)]
    ys = [y0 + (r + 0.5) * d / rows for r in range(rows)]
    return [Action(x, y) for y in ys for x in xs]


def baseline_action(top_block: Block) -> Action:
    return Action(top_block.x, top_block.y)


def score_candidates(
    observation: Observation,
    queue_front: Block,
    candidates: Sequence[Action],
    noise: NoiseParams,
    n_samples: int = 50,
    rng_seed: int = 0,
    workers: int = 1,
) -> list[CandidateScore]:
    """Estimate P(stable | do(action = a), observation) for every candidate.

    Candidate ``i`` uses the seed derived from ``(rng_seed, i)``.
    """
    if not candidates:
        raise ValueError("no candidate actions")
    model = full_step_model(observation, queue_front, noise)

    def one(i: int) -> CandidateScore:
        a = candidates[i]
        res = importance_query(model, stable_query, n_samples, interventions=do_action(a), rng_seed=derive_seed(rng_seed, i))
        return CandidateScore(a, res.estimate)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(len(candidates))))
    return [one(i) for i in range(len(candidates))]


def _argmax(scores: Sequence[CandidateScore], indices: Sequence[int], center: tuple[float, float]) -> int:
    # highest phi, then closest to the top-face centre, then earliest in row-major order
    def key(i):
        a = scores[i].action
        return (-scores[i].phi, math.hypot(a.x - center[0], a.y - center[1]), i)

    return min(indices, key=key)


def select_action(
    scores: Sequence[CandidateScore],
    tau_stable_a: float = DEFAULT_TAU_STABLE_A,
    tau_cluster: float = DEFAULT_TAU_CLUSTER,
    center: Optional[tuple[float, float]] = None,
) -> SelectionResult:
    """Centroid of the near-best candidates above ``tau_stable_a``.

    ``center`` is the top-face centre used for tie-breaking; it defaults to
    the mean of the candidate positions, which is the same point for a
    full grid.
    """
    if not scores:
        raise ValueError("no candidate scores")
    if center is None:
        center = (
            math.fsum(s.action.x for s in scores) / len(scores),
            math.fsum(s.action.y for s in scores) / len(scores),
        )
    tau_set = [i for i, s in enumerate(scores) if s.phi >= tau_stable_a]
    if not tau_set:
        i_best = _argmax(scores, range(len(scores)), center)
        flagged = tuple(dataclasses.replace(s, in_tau_set=False, in_stable_set=False) for s in scores)
        best = scores[i_best]
        return SelectionResult(best.action, flagged, best.action, best.phi, FALLBACK)

    i_best = _argmax(scores, tau_set, center)
    p_best = scores[i_best].phi
    members = set(tau_set)
    stable = [i for i in tau_set if p_best - scores[i].phi <= tau_cluster]
    in_stable = set(stable)
    chosen = Action(
        math.fsum(scores[i].action.x for i in stable) / len(stable),
        math.fsum(scores[i].action.y for i in stable) / len(stable),
    )
    flagged = tuple(
        dataclasses.replace(s, in_tau_set=i in members, in_stable_set=i in in_stable) for i, s in enumerate(scores)
    )
    return SelectionResult(chosen, flagged, scores[i_best].action, p_best, NORMAL)


def greedy_select(
    observation: Observation,
    queue_front: Block,
    noise: NoiseParams,
    rows: int = 5,
    cols: int = 5,
    n_samples: int = 50,
    tau_stable_a: float = DEFAULT_TAU_STABLE_A,
    tau_cluster: float = DEFAULT_TAU_CLUSTER,
    rng_seed: int = 0,
    workers: int = 1,
) -> SelectionResult:
    """Grid, score and select on the observed top block in one call."""
    top = observation.top_block
    candidates = candidate_grid(top, rows, cols)
    scores = score_candidates(observation, queue_front, candidates, noise, n_samples, rng_seed, workers)
    return select_action(scores, tau_stable_a, tau_cluster, center=(top.x, top.y))
