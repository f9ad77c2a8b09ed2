"""Ground-truth environment for the stacking task.

The world owns the true tower and is the only place ground-truth labels
come from. Its noise is per-axis and may be biased, so it can disagree with
the isotropic zero-mean noise the decision model assumes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import physics
from .physics import CUBE_SIZE, DEFAULT_MASS, Block, StabilityVerdict, TowerState
from .seeding import rng_for
from .task_model import Action, Observation, TaskState

# per-axis position error sigmas (cm) measured for the simulated robot
REFERENCE_OBS_SIGMA = (0.906, 0.216, 0.284)
REFERENCE_ACT_SIGMA = (1.790, 2.770, 0.146)

DEFAULT_OFFSET_RANGE = 4.5
MAX_ATTEMPTS = 10_000


class EmptyQueue(RuntimeError):
    pass


class GenerationFailed(RuntimeError):
    pass


def _vec3(v) -> tuple[float, float, float]:
    t = tuple(float(x) for x in v)
    if len(t) != 3:
        raise ValueError(f"expected a 3-vector, got {v!r}")
    return t


@dataclass(frozen=True)
class WorldNoise:
    obs_mean: tuple[float, float, float] = (0.0, 0.0, 0.0)
    obs_sigma: tuple[float, float, float] = (0.0, 0.0, 0.0)
    act_mean: tuple[float, float, float] = (0.0, 0.0, 0.0)
    act_sigma: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("obs_mean", "obs_sigma", "act_mean", "act_sigma"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))
        if min(self.obs_sigma) < 0 or min(self.act_sigma) < 0:
            raise ValueError("world noise sigmas must be >= 0")

    @classmethod
    def isotropic(cls, sigma_z: float, sigma_a: float) -> "WorldNoise":
        return cls(obs_sigma=(sigma_z,) * 3, act_sigma=(sigma_a,) * 3)

    @classmethod
    def reference(cls) -> "WorldNoise":
        return cls(obs_sigma=REFERENCE_OBS_SIGMA, act_sigma=REFERENCE_ACT_SIGMA)

    def without_actuation(self) -> "WorldNoise":
        return WorldNoise(self.obs_mean, self.obs_sigma, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))


@dataclass(frozen=True)
class Placement:
    block_id: int
    target: tuple[float, float, float]
    realized: tuple[float, float, float]
    verdict: StabilityVerdict


def _draw(rng: np.random.Generator, mean, sigma) -> np.ndarray:
    # one standard normal per axis regardless of sigma keeps streams aligned
    return np.asarray(mean) + np.asarray(sigma) * rng.standard_normal(3)


class World:
    """Mutable single-owner simulation of one episode.

    Observation and actuation noise use separate streams derived from
    ``seed``, so the placement noise of a trial does not depend on how many
    observations were taken before it.
    """

    def __init__(self, state: TaskState, noise: WorldNoise, seed: int):
        self.state = TaskState(physics.settle(state.tower), state.queue)
        self.noise = noise
        self.seed = seed
        self._obs_rng = rng_for(seed, "observe")
        self._act_rng = rng_for(seed, "actuate")
        self.placements: list[Placement] = []

    @property
    def tower(self) -> TowerState:
        return self.state.tower

    def observe(self) -> Observation:
        est = []
        for b in self.state.tower.blocks:
            err = _draw(self._obs_rng, self.noise.obs_mean, self.noise.obs_sigma)
            est.append(Block(b.id, tuple(np.asarray(b.center) + err), b.dims, b.mass))
        return Observation(tuple(est))

    def execute_place(self, action: Action) -> StabilityVerdict:
        if not self.state.queue:
            raise EmptyQueue("no blocks left to place")
        block, rest = self.state.queue[0], self.state.queue[1:]
        target = (float(action.x), float(action.y), self.state.tower.top_z + block.height / 2)
        err = _draw(self._act_rng, self.noise.act_mean, self.noise.act_sigma)
        realized = tuple(float(v) for v in np.asarray(target) + err)
        tower = physics.settle(self.state.tower.with_block(Block(block.id, realized, block.dims, block.mass)))
        verdict = physics.is_stable(tower)
        self.state = TaskState(tower, rest)
        self.placements.append(Placement(block.id, target, realized, verdict))
        return verdict


def queue_blocks(first_id: int, n: int, dims=(CUBE_SIZE,) * 3, mass: float = DEFAULT_MASS) -> tuple[Block, ...]:
    # parked beside the tower; only ids, dims and mass matter
    return tuple(
        Block(first_id + j, (30.0 + 10.0 * j, 0.0, dims[2] / 2), tuple(dims), mass) for j in range(n)
    )


def random_tower(
    n_blocks: int,
    offset_range: float = DEFAULT_OFFSET_RANGE,
    require_stable: bool = False,
    rng_seed: int = 0,
    dims=(CUBE_SIZE,) * 3,
    mass: float = DEFAULT_MASS,
    queue_size: int = 0,
    max_attempts: int = MAX_ATTEMPTS,
) -> TaskState:
    """Tower whose successive x/y offsets are uniform on ``[-offset_range, offset_range]``."""
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    rng = rng_for(rng_seed, "random_tower")
    queue = queue_blocks(n_blocks, queue_size, dims, mass)
    for _ in range(max_attempts):
        offsets = rng.uniform(-offset_range, offset_range, size=(n_blocks - 1, 2))
        xy = np.vstack([np.zeros((1, 2)), np.cumsum(offsets, axis=0)])
        tower = physics.settle(
            TowerState(tuple(Block(i, (xy[i, 0], xy[i, 1], 0.0), tuple(dims), mass) for i in range(n_blocks)))
        )
        if not require_stable or physics.is_stable(tower).stable:
            return TaskState(tower, queue)
    raise GenerationFailed(
        f"no stable {n_blocks}-block tower in {max_attempts} attempts at offset range {offset_range}"
    )


@dataclass
class StepRecord:
    step: int
    observation: list[list[float]]
    action: tuple[float, float]
    realized: tuple[float, float, float]
    stable: bool
    failing_interface: Optional[int]
    confidence_flag: str = "normal"


@dataclass
class EpisodeRecord:
    seed: int
    policy: str
    steps: list[StepRecord] = field(default_factory=list)
    outcome: str = "success"
    skipped_steps: int = 0

    @property
    def success(self) -> bool:
        return self.outcome == "success"
