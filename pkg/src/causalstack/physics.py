"""Quasi-static stability of single-column towers of axis-aligned cuboids.

Units are centimetres and grams. Blocks keep a fixed orientation (no yaw),
so every footprint is an axis-aligned rectangle. A tower is stable when, at
every interface from the ground up, the combined centre of mass of the
blocks resting on that interface projects into the closed contact rectangle.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

CUBE_SIZE = 7.5
DEFAULT_MASS = 100.0


class EmptyTower(ValueError):
    pass


@dataclass(frozen=True)
class Block:
    id: int
    center: tuple[float, float, float]
    dims: tuple[float, float, float] = (CUBE_SIZE, CUBE_SIZE, CUBE_SIZE)
    mass: float = DEFAULT_MASS

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "dims", tuple(float(d) for d in self.dims))
        if len(self.center) != 3 or len(self.dims) != 3:
            raise ValueError("center and dims must be 3-vectors")
        if min(self.dims) <= 0:
            raise ValueError(f"block {self.id}: dims must be positive, got {self.dims}")
        if not self.mass > 0:
            raise ValueError(f"block {self.id}: mass must be positive, got {self.mass}")

    @property
    def x(self) -> float:
        return self.center[0]

    @property
    def y(self) -> float:
        return self.center[1]

    @property
    def z(self) -> float:
        return self.center[2]

    @property
    def height(self) -> float:
        return self.dims[2]

    @property
    def top(self) -> float:
        return self.center[2] + self.dims[2] / 2

    def footprint(self) -> "Rect":
        hw, hd = self.dims[0] / 2, self.dims[1] / 2
        return Rect(self.x - hw, self.x + hw, self.y - hd, self.y + hd)

    def moved_to(self, x: float | None = None, y: float | None = None, z: float | None = None) -> "Block":
        cx, cy, cz = self.center
        return dataclasses.replace(
            self,
            center=(cx if x is None else x, cy if y is None else y, cz if z is None else z),
        )


class Rect(NamedTuple):
    """Closed axis-aligned rectangle ``[xmin, xmax] x [ymin, ymax]``."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax


@dataclass(frozen=True)
class TowerState:
    blocks: tuple[Block, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        ids = [b.id for b in self.blocks]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate block ids in tower: {ids}")

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    @property
    def top_block(self) -> Block:
        if not self.blocks:
            raise EmptyTower("tower has no blocks")
        return self.blocks[-1]

    @property
    def top_z(self) -> float:
        return self.blocks[-1].top if self.blocks else 0.0

    def with_block(self, block: Block) -> "TowerState":
        return TowerState(self.blocks + (block,))


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    first_failing_interface: Optional[int] = None

    def __post_init__(self):
        if self.stable != (self.first_failing_interface is None):
            raise ValueError("stable verdicts carry no failing interface and vice versa")


def settle(tower: TowerState) -> TowerState:
    """Drop every block onto the one below it; x and y are untouched."""
    if not tower.blocks:
        raise EmptyTower("cannot settle an empty tower")
    out = []
    floor = 0.0
    for b in tower.blocks:
        z = floor + b.height / 2
        out.append(b if b.z == z else b.moved_to(z=z))
        floor = z + b.height / 2
    return TowerState(tuple(out))


def contact_region(lower: Block, upper: Block) -> Optional[Rect]:
    a, b = lower.footprint(), upper.footprint()
    r = Rect(max(a.xmin, b.xmin), min(a.xmax, b.xmax), max(a.ymin, b.ymin), min(a.ymax, b.ymax))
    if r.xmin > r.xmax or r.ymin > r.ymax:
        return None
    if r.xmin == r.xmax and r.ymin == r.ymax:
        return None
    return r


def center_of_mass_xy(blocks: Sequence[Block]) -> tuple[float, float]:
    total = sum(b.mass for b in blocks)
    # weights first so a single block returns its own coordinates exactly
    weights = [b.mass / total for b in blocks]
    return (
        sum(w * b.x for w, b in zip(weights, blocks)),
        sum(w * b.y for w, b in zip(weights, blocks)),
    )


def is_stable(tower: TowerState) -> StabilityVerdict:
    """Lowest failing interface wins; interface 0 is block 0 on the ground."""
    blocks = tower.blocks
    if not blocks:
        raise EmptyTower("cannot judge an empty tower")
    for j in range(len(blocks)):
        region = blocks[0].footprint() if j == 0 else contact_region(blocks[j - 1], blocks[j])
        if region is None or not region.contains(*center_of_mass_xy(blocks[j:])):
            return StabilityVerdict(False, j)
    return StabilityVerdict(True)
