"""Hand-crafted behavior features over trajectory windows.

Five per-subset features describe a swarm's steady state: average speed,
angular momentum about the subset centroid, radial variance, scatter, and
group (body) rotation. All are normalized by world geometry and kinematic
limits so they share scale: speed/variance/scatter in [0, 1], the two
rotation features in [-1, 1] with sign giving direction.

The type-agnostic vector is the 5 features over the whole swarm; the
type-aware vector concatenates [whole | type A | type B] into R^15.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .sim import TWO_PI, TYPE_A, TYPE_B, Trajectory

AGNOSTIC = "agnostic"
AWARE = "aware"

FEATURE_NAMES = ("average_speed", "angular_momentum", "radial_variance", "scatter", "group_rotation")


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class MetricWindow:
    """Half-open timestep interval [start_t, end_t) features are averaged over."""

    start_t: int
    end_t: int

    def __post_init__(self):
        if not (0 <= self.start_t < self.end_t):
            raise ValueError(f"bad window [{self.start_t}, {self.end_t})")

    def check(self, horizon: int) -> None:
        if self.end_t > horizon:
            raise ValueError(f"window end {self.end_t} past horizon {horizon}")


def trailing_window(horizon: int, fraction: float = 0.25) -> MetricWindow:
    """The last quarter of a run; steady state rather than transient."""
    length = min(horizon, max(2, int(round(horizon * fraction))))
    return MetricWindow(horizon - length, horizon)


@dataclass(frozen=True)
class BehaviorVector:
    values: np.ndarray
    mode: str
    source: str = "hand_crafted"
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise FeatureError("behavior vector has non-finite entries")


def _subset_positions(traj: Trajectory, subset: np.ndarray, window: MetricWindow) -> np.ndarray:
    window.check(traj.horizon)
    subset = np.asarray(subset, dtype=np.intp)
    if subset.size == 0:
        raise FeatureError("empty agent subset")
    return traj.positions[window.start_t : window.end_t, subset, :]


def average_speed(traj: Trajectory, subset: np.ndarray, window: MetricWindow) -> float:
    """Mean per-step displacement over the subset, as a fraction of the max."""
    pos = _subset_positions(traj, subset, window)
    if pos.shape[0] < 2:
        return 0.0
    disp = np.linalg.norm(np.diff(pos, axis=0), axis=2)
    value = float(np.mean(disp)) / traj.config.max_step_displacement
    return float(np.clip(value, 0.0, 1.0))


def angular_momentum(traj: Trajectory, subset: np.ndarray, window: MetricWindow) -> float:
    """Mean normalized cross product of centroid-relative position and velocity.

    +1 is a rigid counter-clockwise orbit at full speed at the subset's outer
    radius; the sign encodes rotation direction.
    """
    pos = _subset_positions(traj, subset, window)
    if pos.shape[0] < 2:
        return 0.0
    v_max = traj.config.max_step_displacement
    disp = np.diff(pos, axis=0) / v_max  # (T-1, k, 2)
    rel = pos[:-1] - pos[:-1].mean(axis=1, keepdims=True)
    radius = np.linalg.norm(rel, axis=2).max(axis=1)  # (T-1,)
    radius = np.where(radius > 0.0, radius, 1.0)
    rel = rel / radius[:, None, None]
    cross = rel[:, :, 0] * disp[:, :, 1] - rel[:, :, 1] * disp[:, :, 0]
    return float(np.clip(np.mean(cross), -1.0, 1.0))


def radial_variance(traj: Trajectory, subset: np.ndarray, window: MetricWindow) -> float:
    """Mean variance of centroid distances, normalized by (diagonal/2)^2."""
    pos = _subset_positions(traj, subset, window)
    radii = np.linalg.norm(pos - pos.mean(axis=1, keepdims=True), axis=2)
    value = float(np.mean(np.var(radii, axis=1)))
    half_diag = traj.config.world_diagonal / 2.0
    return float(np.clip(value / (half_diag * half_diag), 0.0, 1.0))


def scatter(traj: Trajectory, subset: np.ndarray, window: MetricWindow) -> float:
    """Mean squared centroid distance, normalized by (diagonal/2)^2."""
    pos = _subset_positions(traj, subset, window)
    rel = pos - pos.mean(axis=1, keepdims=True)
    value = float(np.mean(np.sum(rel * rel, axis=2)))
    half_diag = traj.config.world_diagonal / 2.0
    return float(np.clip(value / (half_diag * half_diag), 0.0, 1.0))


def group_rotation(traj: Trajectory, subset: np.ndarray, window: MetricWindow) -> float:
    """Mean per-step heading change as a fraction of the max turn rate.

    Captures body rotation (spinning) as distinct from orbital motion.
    """
    window.check(traj.horizon)
    subset = np.asarray(subset, dtype=np.intp)
    if subset.size == 0:
        raise FeatureError("empty agent subset")
    headings = traj.headings[window.start_t : window.end_t, subset]
    if headings.shape[0] < 2:
        return 0.0
    delta = np.diff(headings, axis=0)
    # wrap into (-pi, pi] so crossing the 0/2pi seam does not spike
    delta = np.mod(delta + math.pi, TWO_PI) - math.pi
    omega_max = traj.config.max_turn_rate * traj.config.dt
    return float(np.clip(np.mean(delta) / omega_max, -1.0, 1.0))


def _five_features(traj: Trajectory, subset: np.ndarray, window: MetricWindow) -> np.ndarray:
    return np.array(
        [
            average_speed(traj, subset, window),
            angular_momentum(traj, subset, window),
            radial_variance(traj, subset, window),
            scatter(traj, subset, window),
            group_rotation(traj, subset, window),
        ],
        dtype=np.float64,
    )


def featurize(traj: Trajectory, mode: str, window: Optional[MetricWindow] = None) -> BehaviorVector:
    """Behavior vector of a trajectory: R^5 agnostic or R^15 aware.

    A type with no members (hand-entered ratios only) contributes a zero
    block and flags the vector degenerate instead of failing.
    """
    if mode not in (AGNOSTIC, AWARE):
        raise ValueError(f"mode must be '{AGNOSTIC}' or '{AWARE}', got {mode!r}")
    if window is None:
        window = trailing_window(traj.horizon)
    everyone = np.arange(traj.n_agents)
    whole = _five_features(traj, everyone, window)
    if mode == AGNOSTIC:
        return BehaviorVector(values=whole, mode=mode)
    degenerate = False
    blocks = [whole]
    for type_id in (TYPE_A, TYPE_B):
        subset = traj.type_indices(type_id)
        if subset.size == 0:
            blocks.append(np.zeros(5))
            degenerate = True
        else:
            blocks.append(_five_features(traj, subset, window))
    return BehaviorVector(values=np.concatenate(blocks), mode=mode, degenerate=degenerate)


@dataclass(frozen=True)
class HandCraftedFeaturizer:
    """Callable featurizer spec; picklable and archivable as plain config."""

    mode: str = AWARE
    window: Optional[MetricWindow] = None

    @property
    def dim(self) -> int:
        return 5 if self.mode == AGNOSTIC else 15

    @property
    def source(self) -> str:
        return "hand_crafted"

    def __call__(self, traj: Trajectory) -> BehaviorVector:
        return featurize(traj, self.mode, self.window)

    def to_dict(self) -> dict:
        return {
            "kind": "hand_crafted",
            "mode": self.mode,
            "window": None if self.window is None else [self.window.start_t, self.window.end_t],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HandCraftedFeaturizer":
        if d.get("kind") != "hand_crafted":
            raise ValueError(f"not a hand-crafted featurizer spec: {d!r}")
        window = d.get("window")
        return cls(
            mode=d["mode"],
            window=None if window is None else MetricWindow(window[0], window[1]),
        )
