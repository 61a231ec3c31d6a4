"""Two-type swarm controllers: 8 wheel velocities plus a population ratio."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Sampling/evolution operate on discrete grids; hand-entered controllers may
# use any velocity in [-1, 1] and any ratio in (0, 1).
VELOCITY_GRID: tuple[float, ...] = tuple(k / 10 for k in range(-10, 11))
ETA_GRID: tuple[float, ...] = (1 / 24, 3 / 24, 6 / 24, 8 / 24, 12 / 24)

N_VELOCITY_SLOTS = 8
N_SLOTS = 9


class GenomeError(ValueError):
    pass


def search_space_cardinality() -> int:
    """Number of distinct controllers reachable by grid sampling."""
    return len(VELOCITY_GRID) ** N_VELOCITY_SLOTS * len(ETA_GRID)


def _on_grid(value: float, grid: Sequence[float]) -> bool:
    return any(value == g for g in grid)


@dataclass(frozen=True)
class Genome:
    """A heterogeneous swarm controller.

    ``v_a`` and ``v_b`` are the (left0, right0, left1, right1) wheel
    velocities for the two behavior types, indexed by the binary sensor
    value; ``eta`` is the fraction of agents assigned type A.
    """

    v_a: tuple[float, float, float, float]
    v_b: tuple[float, float, float, float]
    eta: float

    def __post_init__(self):
        if len(self.v_a) != 4 or len(self.v_b) != 4:
            raise GenomeError("each type needs exactly 4 wheel velocities")
        for v in (*self.v_a, *self.v_b):
            if not (-1.0 <= v <= 1.0):
                raise GenomeError(f"velocity {v} outside [-1, 1]")
        if not (0.0 < self.eta < 1.0):
            raise GenomeError(f"population ratio {self.eta} outside (0, 1)")

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "Genome":
        if len(values) != N_SLOTS:
            raise GenomeError(f"expected {N_SLOTS} values, got {len(values)}")
        vals = [float(v) for v in values]
        return cls(v_a=tuple(vals[0:4]), v_b=tuple(vals[4:8]), eta=vals[8])

    def as_values(self) -> tuple[float, ...]:
        return (*self.v_a, *self.v_b, self.eta)

    def with_slot(self, index: int, value: float) -> "Genome":
        vals = list(self.as_values())
        vals[index] = value
        return Genome.from_values(vals)

    def on_grid(self) -> bool:
        return all(_on_grid(v, VELOCITY_GRID) for v in (*self.v_a, *self.v_b)) and _on_grid(
            self.eta, ETA_GRID
        )

    def require_on_grid(self) -> None:
        if not self.on_grid():
            raise GenomeError(f"controller {self.as_values()} is off the sampling grids")

    def type_a_count(self, n_agents: int) -> int:
        """Agents assigned type A, by round-half-up of eta * n_agents."""
        k = int(math.floor(self.eta * n_agents + 0.5))
        if k < 1 or n_agents - k < 1:
            raise GenomeError(
                f"ratio {self.eta} leaves an empty behavior type for {n_agents} agents"
            )
        return k

    def wheel_table(self) -> np.ndarray:
        """(type, sensor) -> (v_left, v_right), shape (2, 2, 2)."""
        a = self.v_a
        b = self.v_b
        return np.array(
            [
                [[a[0], a[1]], [a[2], a[3]]],
                [[b[0], b[1]], [b[2], b[3]]],
            ],
            dtype=np.float64,
        )

    def mirrored(self) -> "Genome":
        """Swap left/right wheel velocities for both types."""
        a = (self.v_a[1], self.v_a[0], self.v_a[3], self.v_a[2])
        b = (self.v_b[1], self.v_b[0], self.v_b[3], self.v_b[2])
        return Genome(v_a=a, v_b=b, eta=self.eta)
