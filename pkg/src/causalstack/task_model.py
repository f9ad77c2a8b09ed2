"""Block-stacking decision model as a probabilistic program.

One time step of the dynamic causal network, with site names per node::

    t{k-1}/block/<id>/z/<axis>    observed block position (Z)
    t{k-1}/block/<id>/wz/<axis>   observation noise (W_Z)
    t{k-1}/block/<id>/s/<axis>    latent block position (S)
    t{k}/action/x, t{k}/action/y  placement action (A)
    t{k}/block/<id>/wa            actuation noise, 3-vector (W_A)
    t{k}/stable                   stability of the successor tower

The latent position of each observed block is the observation plus
N(0, sigma_z^2) per axis. The placed block lands at the action plus
N(0, sigma_a^2 I3), then the tower is settled and judged by the physics
oracle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import physics
from .physics import Block, TowerState
from .ppl import GaussianIsotropic3, GaussianScalar, Runtime, UniformContinuous

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class NoiseParams:
    sigma_z: float
    sigma_a: float

    def __post_init__(self):
        if self.sigma_z < 0 or self.sigma_a < 0:
            raise ValueError(f"noise sigmas must be >= 0, got {self}")


@dataclass(frozen=True)
class Action:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError(f"action must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class Observation:
    """Estimated tower: block ids, dims and masses are exact, centres are noisy."""

    blocks: tuple[Block, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise ValueError("observation of an empty tower")

    @property
    def positions(self) -> np.ndarray:
        return np.array([b.center for b in self.blocks], dtype=float)

    @property
    def top_block(self) -> Block:
        return self.blocks[-1]

    def as_tower(self) -> TowerState:
        return TowerState(self.blocks)


@dataclass(frozen=True)
class TaskState:
    tower: TowerState
    queue: tuple[Block, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "queue", tuple(self.queue))
        ids = [b.id for b in self.tower.blocks] + [b.id for b in self.queue]
        if len(set(ids)) != len(ids):
            raise ValueError(f"tower and queue share block ids: {ids}")


def block_site(step: int, block_id: int, kind: str, axis: str | None = None) -> tuple[str, ...]:
    base = (f"t{step}", "block", str(block_id), kind)
    return base if axis is None else base + (axis,)


def action_site(step: int, axis: str) -> tuple[str, ...]:
    return (f"t{step}", "action", axis)


def stable_site(step: int) -> tuple[str, ...]:
    return (f"t{step}", "stable")


def do_action(action: Action, step: int = 1) -> dict:
    """Intervention assignments fixing the action node to ``action``."""
    return {action_site(step, "x"): float(action.x), action_site(step, "y"): float(action.y)}


def sample_latent_tower(rt: Runtime, observation: Observation, noise: NoiseParams, step: int = 0) -> TowerState:
    blocks = []
    for b in observation.blocks:
        center = []
        for axis, observed in zip(AXES, b.center):
            z = rt.deterministic(block_site(step, b.id, "z", axis), observed)
            w = rt.sample(block_site(step, b.id, "wz", axis), GaussianScalar(0.0, noise.sigma_z))
            center.append(rt.deterministic(block_site(step, b.id, "s", axis), z + w))
        blocks.append(Block(b.id, tuple(center), b.dims, b.mass))
    return physics.settle(TowerState(tuple(blocks)))


def sample_transition(
    rt: Runtime, latent: TowerState, block: Block, ax: float, ay: float, noise: NoiseParams, step: int
) -> tuple[TowerState, bool]:
    wa = rt.sample(block_site(step, block.id, "wa"), GaussianIsotropic3((0.0, 0.0, 0.0), noise.sigma_a))
    placed = Block(
        block.id,
        (ax + wa[0], ay + wa[1], latent.top_z + block.height / 2 + wa[2]),
        block.dims,
        block.mass,
    )
    successor = physics.settle(latent.with_block(placed))
    stable = rt.deterministic(stable_site(step), physics.is_stable(successor).stable)
    return successor, bool(stable)


def latent_state_model(observation: Observation, noise: NoiseParams, step: int = 0):
    """Program whose return value is a settled latent tower consistent with ``observation``."""

    def model(rt: Runtime) -> TowerState:
        return sample_latent_tower(rt, observation, noise, step)

    return model


def transition_model(latent: TowerState, queue_front: Block, action: Action, noise: NoiseParams, step: int = 1):
    if any(b.id == queue_front.id for b in latent.blocks):
        raise ValueError(f"block {queue_front.id} is already in the tower")

    def model(rt: Runtime) -> tuple[TowerState, bool]:
        ax = rt.deterministic(action_site(step, "x"), float(action.x))
        ay = rt.deterministic(action_site(step, "y"), float(action.y))
        return sample_transition(rt, latent, queue_front, ax, ay, noise, step)

    return model


def action_prior(top: Block) -> tuple[UniformContinuous, UniformContinuous]:
    """Uninformative prior over the action node: the top face widened by one face width each side."""
    w, d = top.dims[0], top.dims[1]
    return (
        UniformContinuous(top.x - 1.5 * w, top.x + 1.5 * w),
        UniformContinuous(top.y - 1.5 * d, top.y + 1.5 * d),
    )


def full_step_model(observation: Observation, queue_front: Block, noise: NoiseParams, step: int = 1):
    """Latent state, action and transition in one program; returns ``stable``.

    The action node is drawn from ``action_prior`` unless fixed by an
    intervention such as ``do_action(a, step)``.
    """
    if any(b.id == queue_front.id for b in observation.blocks):
        raise ValueError(f"block {queue_front.id} is already in the tower")
    prior_x, prior_y = action_prior(observation.top_block)

    def model(rt: Runtime) -> bool:
        latent = sample_latent_tower(rt, observation, noise, step - 1)
        ax = rt.sample(action_site(step, "x"), prior_x)
        ay = rt.sample(action_site(step, "y"), prior_y)
        _, stable = sample_transition(rt, latent, queue_front, ax, ay, noise, step)
        return stable

    return model


def stable_query(trace) -> float:
    return 1.0 if trace.return_value else 0.0
