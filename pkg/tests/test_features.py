import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetswarm.features import (
    AGNOSTIC,
    AWARE,
    FeatureError,
    HandCraftedFeaturizer,
    MetricWindow,
    angular_momentum,
    average_speed,
    featurize,
    group_rotation,
    radial_variance,
    scatter,
    trailing_window,
)
from hetswarm.genome import Genome
from hetswarm.sim import TWO_PI, SimConfig, simulate
from hetswarm.controllers import preset

from conftest import build_trajectory


ALL = np.arange(6)


def static_traj(n=6, horizon=5):
    rng = np.random.default_rng(0)
    pose = np.column_stack(
        [rng.uniform(20, 180, n), rng.uniform(20, 180, n), rng.uniform(0, TWO_PI, n)]
    )
    poses = np.repeat(pose[None, :, :], horizon, axis=0)
    return build_trajectory(poses)


class TestWindow:
    def test_invalid_windows_rejected(self):
        with pytest.raises(ValueError):
            MetricWindow(5, 5)
        with pytest.raises(ValueError):
            MetricWindow(-1, 5)
        with pytest.raises(ValueError):
            MetricWindow(0, 10).check(horizon=9)

    def test_trailing_window_is_last_quarter(self):
        w = trailing_window(1200)
        assert (w.start_t, w.end_t) == (900, 1200)
        assert trailing_window(8).start_t == 6


class TestAverageSpeed:
    def test_static_swarm_zero(self):
        traj = static_traj()
        assert average_speed(traj, ALL, MetricWindow(0, 5)) == 0.0

    def test_full_speed_straight_line_is_one(self):
        config = SimConfig(n_agents=4, world_width=500.0, world_height=500.0, horizon=10)
        v = config.max_step_displacement
        base = np.column_stack([np.full(4, 50.0), np.linspace(50, 350, 4), np.zeros(4)])
        poses = np.array([base + [t * v, 0.0, 0.0] for t in range(10)])
        traj = build_trajectory(poses, config=config)
        assert average_speed(traj, np.arange(4), MetricWindow(0, 10)) == pytest.approx(1.0, abs=1e-12)

    def test_spin_in_place_zero(self):
        # pure rotation produces no displacement under Euler stepping
        g = Genome.from_values([-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 0.5])
        config = SimConfig(n_agents=4, world_width=200.0, world_height=200.0, horizon=30)
        traj = simulate(g, config, seed=1)
        assert average_speed(traj, np.arange(4), MetricWindow(0, 30)) == 0.0

    def test_empty_subset_rejected(self):
        with pytest.raises(FeatureError):
            average_speed(static_traj(), np.array([], dtype=int), MetricWindow(0, 5))


def ring_positions(n, radius, center=(100.0, 100.0)):
    phis = np.linspace(0, TWO_PI, n, endpoint=False)
    return np.column_stack(
        [center[0] + radius * np.cos(phis), center[1] + radius * np.sin(phis)]
    ), phis


class TestAngularMomentum:
    def test_static_zero(self):
        traj = static_traj()
        assert angular_momentum(traj, ALL, MetricWindow(0, 5)) == 0.0

    def test_ccw_ring_at_full_speed_is_plus_one(self):
        # unit radial x unit tangential displacement = +1 for every agent
        config = SimConfig(n_agents=8, world_width=400.0, world_height=400.0, horizon=2)
        v = config.max_step_displacement
        pos0, phis = ring_positions(8, 60.0, center=(200.0, 200.0))
        tangent = np.column_stack([-np.sin(phis), np.cos(phis)])
        pos1 = pos0 + v * tangent
        poses = np.stack(
            [np.column_stack([pos0, phis]), np.column_stack([pos1, phis])], axis=0
        )
        traj = build_trajectory(poses, config=config)
        value = angular_momentum(traj, np.arange(8), MetricWindow(0, 2))
        assert value == pytest.approx(1.0, abs=1e-6)

    def test_cw_ring_is_minus_one(self):
        config = SimConfig(n_agents=8, world_width=400.0, world_height=400.0, horizon=2)
        v = config.max_step_displacement
        pos0, phis = ring_positions(8, 60.0, center=(200.0, 200.0))
        tangent = np.column_stack([np.sin(phis), -np.cos(phis)])
        poses = np.stack(
            [np.column_stack([pos0, phis]), np.column_stack([pos0 + v * tangent, phis])], axis=0
        )
        traj = build_trajectory(poses, config=config)
        assert angular_momentum(traj, np.arange(8), MetricWindow(0, 2)) == pytest.approx(-1.0, abs=1e-6)


class TestRadialVariance:
    def test_common_ring_zero(self):
        config = SimConfig(n_agents=8, world_width=400.0, world_height=400.0, horizon=3)
        pos, phis = ring_positions(8, 50.0, center=(200.0, 200.0))
        poses = np.repeat(np.column_stack([pos, phis])[None], 3, axis=0)
        traj = build_trajectory(poses, config=config)
        assert radial_variance(traj, np.arange(8), MetricWindow(0, 3)) == pytest.approx(0.0, abs=1e-12)

    def test_two_radius_split_gives_quarter_d_squared(self):
        # half the agents at the centroid, half on a ring of radius d:
        # Var({0,...,0,d,...,d}) = d^2/4
        d = 40.0
        config = SimConfig(n_agents=8, world_width=400.0, world_height=400.0, horizon=2)
        ring, phis = ring_positions(4, d, center=(200.0, 200.0))
        center = np.repeat([[200.0, 200.0]], 4, axis=0)
        pos = np.vstack([center, ring])
        poses = np.repeat(np.column_stack([pos, np.zeros(8)])[None], 2, axis=0)
        traj = build_trajectory(poses, config=config)
        half_diag = config.world_diagonal / 2
        expected = (d * d / 4) / (half_diag * half_diag)
        assert radial_variance(traj, np.arange(8), MetricWindow(0, 2)) == pytest.approx(expected, rel=1e-12)

    def test_single_agent_zero(self):
        traj = static_traj()
        assert radial_variance(traj, np.array([2]), MetricWindow(0, 5)) == 0.0


class TestScatter:
    def test_point_swarm_zero(self):
        config = SimConfig(n_agents=4, world_width=200.0, world_height=200.0, horizon=2)
        poses = np.zeros((2, 4, 3))
        poses[:, :, 0] = 77.0
        poses[:, :, 1] = 91.0
        traj = build_trajectory(poses, config=config)
        assert scatter(traj, np.arange(4), MetricWindow(0, 2)) == 0.0

    def test_two_agents_distance_d(self):
        d = 60.0
        config = SimConfig(n_agents=2, world_width=400.0, world_height=400.0, horizon=2)
        pos = np.array([[200.0 - d / 2, 200.0], [200.0 + d / 2, 200.0]])
        poses = np.repeat(np.column_stack([pos, np.zeros(2)])[None], 2, axis=0)
        traj = build_trajectory(poses, types=np.array([0, 1]), config=config)
        half_diag = config.world_diagonal / 2
        assert scatter(traj, np.arange(2), MetricWindow(0, 2)) == pytest.approx(
            (d * d / 4) / (half_diag**2), rel=1e-12
        )

    def test_scatter_dominates_radial_variance(self):
        # E[r^2] = Var(r) + E[r]^2 >= Var(r), identical normalization
        rng = np.random.default_rng(3)
        for _ in range(20):
            poses = np.empty((4, 10, 3))
            poses[:, :, 0] = rng.uniform(20, 180, (4, 10))
            poses[:, :, 1] = rng.uniform(20, 180, (4, 10))
            poses[:, :, 2] = rng.uniform(0, TWO_PI, (4, 10))
            traj = build_trajectory(poses)
            w = MetricWindow(0, 4)
            assert scatter(traj, np.arange(10), w) >= radial_variance(traj, np.arange(10), w) - 1e-12


class TestGroupRotation:
    def test_straight_line_zero(self):
        config = SimConfig(n_agents=4, world_width=500.0, world_height=500.0, horizon=10)
        v = config.max_step_displacement
        base = np.column_stack([np.full(4, 50.0), np.linspace(50, 350, 4), np.zeros(4)])
        poses = np.array([base + [t * v, 0.0, 0.0] for t in range(10)])
        traj = build_trajectory(poses, config=config)
        assert group_rotation(traj, np.arange(4), MetricWindow(0, 10)) == 0.0

    @pytest.mark.parametrize("direction", [1.0, -1.0])
    def test_max_spin_saturates(self, direction):
        config = SimConfig(n_agents=4, world_width=200.0, world_height=200.0, horizon=12)
        omega = direction * config.max_turn_rate * config.dt
        poses = np.zeros((12, 4, 3))
        poses[:, :, 0] = 100.0
        poses[:, :, 1] = 100.0
        for t in range(12):
            poses[t, :, 2] = (0.25 + omega * t) % TWO_PI
        traj = build_trajectory(poses, config=config)
        assert group_rotation(traj, np.arange(4), MetricWindow(0, 12)) == pytest.approx(direction, abs=1e-12)

    def test_heading_wrap_does_not_spike(self):
        config = SimConfig(n_agents=2, world_width=200.0, world_height=200.0, horizon=4)
        poses = np.zeros((4, 2, 3))
        poses[:, :, 0] = 100.0
        poses[:, :, 1] = 100.0
        # crossing the 0/2pi seam with small positive increments
        for t, theta in enumerate([TWO_PI - 0.2, TWO_PI - 0.1, 0.0, 0.1]):
            poses[t, :, 2] = theta % TWO_PI
        traj = build_trajectory(poses, types=np.array([0, 1]), config=config)
        omega_max = config.max_turn_rate * config.dt
        assert group_rotation(traj, np.arange(2), MetricWindow(0, 4)) == pytest.approx(
            0.1 / omega_max, abs=1e-9
        )

    def test_cyclic_pursuit_rotation_consistent_with_momentum(self):
        # the ring regime rotates bodily and orbitally in the same direction
        traj = simulate(preset("cyclic_pursuit"), SimConfig(), seed=0)
        window = trailing_window(traj.horizon)
        am = angular_momentum(traj, np.arange(traj.n_agents), window)
        gr = group_rotation(traj, np.arange(traj.n_agents), window)
        assert abs(am) > 0.05 and abs(gr) > 0.01
        assert np.sign(am) == np.sign(gr)


class TestFeaturize:
    def test_aware_prefix_equals_agnostic_exactly(self, small_config):
        g = Genome.from_values([0.6, 1.0, 0.4, 0.5, 0.2, 0.7, -0.5, -0.1, 0.5])
        traj = simulate(g, small_config, seed=2)
        agnostic = featurize(traj, AGNOSTIC)
        aware = featurize(traj, AWARE)
        assert agnostic.dim == 5 and aware.dim == 15
        assert np.array_equal(aware.values[:5], agnostic.values)

    def test_all_one_type_flags_degenerate_zero_block(self):
        poses = np.zeros((3, 4, 3))
        poses[:, :, 0] = np.linspace(50, 150, 4)
        poses[:, :, 1] = 100.0
        traj = build_trajectory(poses, types=np.zeros(4, dtype=np.uint8))
        vec = featurize(traj, AWARE)
        assert vec.degenerate
        assert np.array_equal(vec.values[10:], np.zeros(5))
        assert not featurize(traj, AGNOSTIC).degenerate

    def test_homogeneous_genome_blocks_statistically_equal(self):
        # identical controllers for both types: per-type features agree to
        # within sampling noise
        traj = simulate(preset("cyclic_pursuit"), SimConfig(), seed=0)
        vec = featurize(traj, AWARE)
        assert np.allclose(vec.values[5:10], vec.values[10:15], atol=0.05)

    def test_bad_mode_rejected(self, small_config, dummy_genome):
        traj = simulate(dummy_genome, small_config, seed=0)
        with pytest.raises(ValueError):
            featurize(traj, "typed")

    def test_featurizer_spec_round_trip(self):
        f = HandCraftedFeaturizer(mode=AGNOSTIC, window=MetricWindow(10, 40))
        back = HandCraftedFeaturizer.from_dict(f.to_dict())
        assert back == f
        assert HandCraftedFeaturizer().dim == 15


def random_trajectory(rng, n=10, horizon=8, config=None):
    if config is None:
        config = SimConfig(n_agents=n, world_width=300.0, world_height=300.0, horizon=horizon)
    margin = 60.0
    poses = np.empty((horizon, n, 3))
    poses[:, :, 0] = rng.uniform(margin, config.world_width - margin, (horizon, n))
    poses[:, :, 1] = rng.uniform(margin, config.world_height - margin, (horizon, n))
    poses[:, :, 2] = rng.uniform(0.001, TWO_PI - 0.001, (horizon, n))
    types = np.zeros(n, dtype=np.uint8)
    types[n // 2 :] = 1
    return build_trajectory(poses, types=types, config=config)


def mirrored_trajectory(traj):
    poses = traj.poses.copy()
    poses[:, :, 0] = traj.config.world_width - poses[:, :, 0]
    poses[:, :, 2] = np.mod(math.pi - poses[:, :, 2], TWO_PI)
    return build_trajectory(poses, types=traj.types, config=traj.config)


class TestInvariances:
    def test_translation_invariance(self):
        rng = np.random.default_rng(11)
        for trial in range(30):
            traj = random_trajectory(rng)
            shifted_poses = traj.poses.copy()
            shifted_poses[:, :, 0] += 13.0
            shifted_poses[:, :, 1] -= 9.0
            shifted = build_trajectory(shifted_poses, types=traj.types, config=traj.config)
            a = featurize(traj, AWARE).values
            b = featurize(shifted, AWARE).values
            assert np.allclose(a, b, atol=1e-9), f"trial {trial}"

    def test_rotation_leaves_all_features_unchanged(self):
        rng = np.random.default_rng(12)
        cx = cy = 150.0
        for _ in range(15):
            traj = random_trajectory(rng)
            alpha = rng.uniform(0.1, TWO_PI - 0.1)
            ca, sa = math.cos(alpha), math.sin(alpha)
            poses = traj.poses.copy()
            dx = traj.poses[:, :, 0] - cx
            dy = traj.poses[:, :, 1] - cy
            poses[:, :, 0] = cx + ca * dx - sa * dy
            poses[:, :, 1] = cy + sa * dx + ca * dy
            poses[:, :, 2] = np.mod(poses[:, :, 2] + alpha, TWO_PI)
            rotated = build_trajectory(poses, types=traj.types, config=traj.config)
            assert np.allclose(
                featurize(traj, AWARE).values, featurize(rotated, AWARE).values, atol=1e-9
            )

    def test_mirror_negates_rotational_features_only(self):
        rng = np.random.default_rng(13)
        signs = np.array([1, -1, 1, 1, -1] * 3, dtype=np.float64)
        for _ in range(30):
            traj = random_trajectory(rng)
            mirrored = mirrored_trajectory(traj)
            a = featurize(traj, AWARE).values
            b = featurize(mirrored, AWARE).values
            assert np.allclose(b, signs * a, atol=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_boundedness_on_random_pose_tensors(self, seed):
        traj = random_trajectory(np.random.default_rng(seed))
        vec = featurize(traj, AWARE).values
        lo = np.array([0, -1, 0, 0, -1] * 3, dtype=np.float64)
        hi = np.array([1, 1, 1, 1, 1] * 3, dtype=np.float64)
        assert np.all(vec >= lo) and np.all(vec <= hi)
