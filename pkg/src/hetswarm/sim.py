"""Deterministic 2D simulation of differential-drive agents with a binary
forward line-of-sight sensor.

Each agent's controller is a direct lookup on its sensor bit: one wheel-speed
pair when nothing is seen, another when any other agent crosses the forward
ray. The update is synchronous: all agents sense the pre-step snapshot, all
integrate one Euler step, then collisions are resolved.

The rollout runs in a compiled kernel (numba); the module-level ``sense``,
``step_agent`` and ``resolve_collisions`` functions are the same arithmetic
in plain Python and serve as the kernel's step-level oracle in tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np
from numba import njit

from .genome import Genome

TWO_PI = 2.0 * math.pi

TYPE_A = 0
TYPE_B = 1


@dataclass(frozen=True)
class SimConfig:
    n_agents: int = 24
    world_width: float = 500.0
    world_height: float = 500.0
    horizon: int = 1200
    # The world is 500x500 with a 1200-step horizon; radius/wheel_base/speed
    # are sized so a full-speed agent crosses the arena in ~a third of a run.
    agent_radius: float = 5.0
    wheel_base: float = 10.0
    speed_scale: float = 1.5
    dt: float = 1.0
    collision_passes: int = 4

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("n_agents must be >= 2")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.agent_radius <= 0 or self.wheel_base <= 0:
            raise ValueError("agent_radius and wheel_base must be positive")
        if min(self.world_width, self.world_height) <= 2 * self.agent_radius:
            raise ValueError("world must be wider than one agent")

    @property
    def max_step_displacement(self) -> float:
        return self.speed_scale * self.dt

    @property
    def max_turn_rate(self) -> float:
        # |omega| peaks at v_r = -v_l = +-1.
        return 2.0 * self.speed_scale / self.wheel_base

    @property
    def world_diagonal(self) -> float:
        return math.hypot(self.world_width, self.world_height)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(**d)


@dataclass(frozen=True)
class Trajectory:
    """Recorded poses of one simulated swarm.

    ``poses[t, i]`` is (x, y, theta) of agent ``i`` after ``t`` synchronous
    update steps; row 0 is the (collision-resolved) initial configuration,
    so the array has exactly ``horizon`` rows.
    """

    poses: np.ndarray  # (horizon, n_agents, 3) float64
    types: np.ndarray  # (n_agents,) uint8, TYPE_A / TYPE_B
    genome: Genome
    seed: int
    config: SimConfig = field(repr=False)

    @property
    def horizon(self) -> int:
        return self.poses.shape[0]

    @property
    def n_agents(self) -> int:
        return self.poses.shape[1]

    @property
    def positions(self) -> np.ndarray:
        return self.poses[:, :, :2]

    @property
    def headings(self) -> np.ndarray:
        return self.poses[:, :, 2]

    def type_indices(self, type_id: int) -> np.ndarray:
        return np.nonzero(self.types == type_id)[0]


def sense(world_poses: np.ndarray, self_index: int, agent_radius: float) -> int:
    """1 iff the forward ray of agent ``self_index`` hits any other agent's disc.

    Walls are never sensed; the detection range is unbounded.
    """
    poses = np.asarray(world_poses, dtype=np.float64)
    if poses.ndim != 2 or poses.shape[1] != 3:
        raise ValueError("world_poses must be (n_agents, 3)")
    n = poses.shape[0]
    if not (0 <= self_index < n):
        raise ValueError("self_index out of range")
    x, y, theta = poses[self_index]
    ct = math.cos(theta)
    st = math.sin(theta)
    r2 = agent_radius * agent_radius
    for j in range(n):
        if j == self_index:
            continue
        dx = poses[j, 0] - x
        dy = poses[j, 1] - y
        proj = dx * ct + dy * st
        d2 = dx * dx + dy * dy
        if d2 - proj * proj <= r2 and (proj > 0.0 or d2 < r2):
            return 1
    return 0


def step_agent(
    state: Sequence[float],
    controller_half: Sequence[float],
    sensor: int,
    config: SimConfig,
) -> tuple[float, float, float]:
    """One Euler step of differential-drive kinematics for a single agent.

    ``controller_half`` is (l0, r0, l1, r1); the sensor bit selects the pair.
    Position is clamped into the world; pair overlap is the collision
    resolver's job.
    """
    if sensor not in (0, 1):
        raise ValueError("sensor must be 0 or 1")
    x, y, theta = (float(v) for v in state)
    v_l = float(controller_half[2 * sensor])
    v_r = float(controller_half[2 * sensor + 1])
    v = config.speed_scale * (v_l + v_r) * 0.5
    omega = config.speed_scale * (v_r - v_l) / config.wheel_base
    x = x + v * math.cos(theta) * config.dt
    y = y + v * math.sin(theta) * config.dt
    theta = (theta + omega * config.dt) % TWO_PI
    r = config.agent_radius
    x = min(max(x, r), config.world_width - r)
    y = min(max(y, r), config.world_height - r)
    return x, y, theta


@njit(cache=True)
def _clamp_kernel(pos, radius, width, height):
    n = pos.shape[0]
    for i in range(n):
        pos[i, 0] = min(max(pos[i, 0], radius), width - radius)
        pos[i, 1] = min(max(pos[i, 1], radius), height - radius)


@njit(cache=True)
def _resolve_kernel(pos, px, py, radius, width, height, passes):
    """Clamp into the world, separate overlapping pairs, re-clamp.

    Separation is simultaneous (pushes accumulated per pass, then applied),
    so the result is independent of pair iteration order. The trailing clamp
    keeps the containment guarantee if a push crossed a wall.
    """
    n = pos.shape[0]
    min_d = 2.0 * radius
    min_d2 = min_d * min_d
    _clamp_kernel(pos, radius, width, height)
    for _ in range(passes):
        any_overlap = False
        for i in range(n):
            px[i] = 0.0
            py[i] = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                dx = pos[j, 0] - pos[i, 0]
                dy = pos[j, 1] - pos[i, 1]
                d2 = dx * dx + dy * dy
                if d2 < min_d2:
                    any_overlap = True
                    d = math.sqrt(d2)
                    if d <= 0.0:
                        # coincident centers: deterministic push along +x
                        ux = 1.0
                        uy = 0.0
                    else:
                        ux = dx / d
                        uy = dy / d
                    push = 0.5 * (min_d - d)
                    px[i] -= push * ux
                    py[i] -= push * uy
                    px[j] += push * ux
                    py[j] += push * uy
        if not any_overlap:
            break
        for i in range(n):
            pos[i, 0] += px[i]
            pos[i, 1] += py[i]
    _clamp_kernel(pos, radius, width, height)


@njit(cache=True)
def _rollout_kernel(pos, theta, types, table, out, radius, speed, wheel_base, dt, width, height, passes):
    """Record row 0 and advance ``out.shape[0] - 1`` synchronous steps."""
    horizon = out.shape[0]
    n = pos.shape[0]
    r2 = radius * radius
    sensed = np.zeros(n, np.uint8)
    px = np.zeros(n, np.float64)
    py = np.zeros(n, np.float64)
    out[0, :, 0] = pos[:, 0]
    out[0, :, 1] = pos[:, 1]
    out[0, :, 2] = theta
    for t in range(1, horizon):
        for i in range(n):
            ct = math.cos(theta[i])
            st = math.sin(theta[i])
            hit = np.uint8(0)
            for j in range(n):
                if j == i:
                    continue
                dx = pos[j, 0] - pos[i, 0]
                dy = pos[j, 1] - pos[i, 1]
                proj = dx * ct + dy * st
                d2 = dx * dx + dy * dy
                if d2 - proj * proj <= r2 and (proj > 0.0 or d2 < r2):
                    hit = np.uint8(1)
                    break
            sensed[i] = hit
        for i in range(n):
            v_l = table[types[i], sensed[i], 0]
            v_r = table[types[i], sensed[i], 1]
            v = speed * (v_l + v_r) * 0.5
            omega = speed * (v_r - v_l) / wheel_base
            pos[i, 0] += v * math.cos(theta[i]) * dt
            pos[i, 1] += v * math.sin(theta[i]) * dt
            theta[i] = (theta[i] + omega * dt) % TWO_PI
        _resolve_kernel(pos, px, py, radius, width, height, passes)
        out[t, :, 0] = pos[:, 0]
        out[t, :, 1] = pos[:, 1]
        out[t, :, 2] = theta


def resolve_collisions(poses: np.ndarray, config: SimConfig) -> np.ndarray:
    """Clamp positions into the world and separate overlapping discs.

    Headings are untouched; idempotent when nothing overlaps or escapes.
    """
    poses = np.array(poses, dtype=np.float64)
    if poses.ndim != 2 or poses.shape[1] != 3:
        raise ValueError("poses must be (n_agents, 3)")
    n = poses.shape[0]
    pos = np.ascontiguousarray(poses[:, :2])
    _resolve_kernel(
        pos,
        np.zeros(n),
        np.zeros(n),
        config.agent_radius,
        config.world_width,
        config.world_height,
        config.collision_passes,
    )
    out = poses.copy()
    out[:, :2] = pos
    return out


def _initial_state(genome: Genome, config: SimConfig, seed: int):
    rng = np.random.Generator(np.random.PCG64(seed))
    n = config.n_agents
    r = config.agent_radius
    xs = rng.uniform(r, config.world_width - r, n)
    ys = rng.uniform(r, config.world_height - r, n)
    thetas = rng.uniform(0.0, TWO_PI, n)
    k = genome.type_a_count(n)
    types = np.full(n, TYPE_B, dtype=np.uint8)
    types[:k] = TYPE_A
    return np.stack([xs, ys], axis=1), thetas, types


def rollout_from_state(
    poses: np.ndarray,
    types: np.ndarray,
    genome: Genome,
    config: SimConfig,
    resolve_initial: bool = False,
) -> np.ndarray:
    """Advance a given initial configuration ``horizon - 1`` steps.

    Row 0 of the returned (horizon, n, 3) array is the initial state as
    given (optionally collision-resolved first). Lets callers drive the
    kernel from hand-built states.
    """
    poses = np.array(poses, dtype=np.float64)
    if poses.ndim != 2 or poses.shape[1] != 3 or poses.shape[0] != config.n_agents:
        raise ValueError("poses must be (n_agents, 3)")
    n = poses.shape[0]
    pos = np.ascontiguousarray(poses[:, :2])
    theta = np.ascontiguousarray(poses[:, 2])
    if resolve_initial:
        _resolve_kernel(
            pos,
            np.zeros(n),
            np.zeros(n),
            config.agent_radius,
            config.world_width,
            config.world_height,
            config.collision_passes,
        )
    out = np.empty((config.horizon, n, 3), dtype=np.float64)
    _rollout_kernel(
        pos,
        theta,
        np.ascontiguousarray(types, dtype=np.uint8),
        genome.wheel_table(),
        out,
        config.agent_radius,
        config.speed_scale,
        config.wheel_base,
        config.dt,
        config.world_width,
        config.world_height,
        config.collision_passes,
    )
    return out


def simulate(genome: Genome, config: SimConfig, seed: int, strict: bool = False) -> Trajectory:
    """Run one swarm; a pure function of (genome, config, seed).

    ``strict`` additionally rejects controllers off the sampling grids.
    """
    if strict:
        genome.require_on_grid()
    n = config.n_agents
    pos, theta, types = _initial_state(genome, config, int(seed))
    pos = np.ascontiguousarray(pos)
    scratch_x = np.zeros(n)
    scratch_y = np.zeros(n)
    # Spawn overlaps are artifacts of uniform placement; resolve them so the
    # recorded initial row already satisfies the containment invariant.
    _resolve_kernel(
        pos,
        scratch_x,
        scratch_y,
        config.agent_radius,
        config.world_width,
        config.world_height,
        config.collision_passes,
    )
    out = np.empty((config.horizon, n, 3), dtype=np.float64)
    _rollout_kernel(
        pos,
        theta,
        types,
        genome.wheel_table(),
        out,
        config.agent_radius,
        config.speed_scale,
        config.wheel_base,
        config.dt,
        config.world_width,
        config.world_height,
        config.collision_passes,
    )
    return Trajectory(poses=out, types=types, genome=genome, seed=int(seed), config=config)


def simulate_batch(
    genomes: Sequence[Genome],
    config: SimConfig,
    seeds: Sequence[int],
    strict: bool = False,
) -> list[Trajectory]:
    """Simulate many (genome, seed) pairs under one config."""
    if len(genomes) != len(seeds):
        raise ValueError("genomes and seeds must pair up")
    return [simulate(g, config, s, strict=strict) for g, s in zip(genomes, seeds)]
