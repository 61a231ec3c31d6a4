import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetswarm.genome import Genome, GenomeError
from hetswarm.sim import (
    TWO_PI,
    SimConfig,
    resolve_collisions,
    rollout_from_state,
    sense,
    simulate,
    step_agent,
)


def poses_of(rows):
    return np.array(rows, dtype=np.float64)


class TestSense:
    def test_single_agent_sees_nothing(self):
        assert sense(poses_of([[50.0, 50.0, 0.0]]), 0, 5.0) == 0

    def test_agent_ahead_detected(self):
        world = poses_of([[0.0, 0.0, 0.0], [10.0, 0.0, 1.0]])
        assert sense(world, 0, 1.0) == 1

    def test_agent_behind_not_detected(self):
        world = poses_of([[0.0, 0.0, 0.0], [-10.0, 0.0, 1.0]])
        assert sense(world, 0, 1.0) == 0

    @pytest.mark.parametrize("radius", [1.0, 2.5, 7.0])
    def test_ray_disc_boundary(self, radius):
        # ray along +x from origin; disc at (10, y): hits iff |y| <= radius
        near = poses_of([[0.0, 0.0, 0.0], [10.0, 0.999 * radius, 0.0]])
        far = poses_of([[0.0, 0.0, 0.0], [10.0, 1.001 * radius, 0.0]])
        assert sense(near, 0, radius) == 1
        assert sense(far, 0, radius) == 0

    def test_oblique_heading_hit(self):
        # heading 45 degrees; target centered on the diagonal
        world = poses_of([[0.0, 0.0, math.pi / 4], [7.0, 7.0, 0.0]])
        assert sense(world, 0, 1.0) == 1

    def test_origin_inside_other_disc_detected(self):
        world = poses_of([[0.0, 0.0, 0.0], [-0.5, 0.0, 0.0]])
        assert sense(world, 0, 2.0) == 1  # overlapped agents still register

    def test_walls_never_sensed(self):
        config = SimConfig()
        # agent staring at the wall from nearby, nobody ahead
        world = poses_of([[495.0, 250.0, 0.0], [5.0, 250.0, math.pi]])
        assert sense(world, 0, config.agent_radius) == 0


class TestStepAgent:
    def test_straight_line_advances_exactly_speed_scale(self):
        config = SimConfig()
        x, y, theta = step_agent((100.0, 100.0, 0.0), (1.0, 1.0, 0.0, 0.0), 0, config)
        assert x == pytest.approx(100.0 + config.speed_scale * config.dt, abs=0)
        assert y == 100.0
        assert theta == 0.0

    def test_sensor_selects_second_pair(self):
        config = SimConfig()
        x, y, theta = step_agent((100.0, 100.0, 0.0), (0.0, 0.0, 1.0, 1.0), 1, config)
        assert x == pytest.approx(100.0 + config.speed_scale, abs=0)

    def test_spin_in_place(self):
        config = SimConfig()
        x, y, theta = step_agent((100.0, 100.0, 1.0), (-1.0, 1.0, 0.0, 0.0), 0, config)
        assert (x, y) == (100.0, 100.0)
        assert theta == pytest.approx((1.0 + config.max_turn_rate * config.dt) % TWO_PI)

    def test_arc_heading_recurrence(self):
        # one driven wheel: after k steps heading = theta0 + k*speed/wheel_base
        config = SimConfig()
        state = (250.0, 250.0, 0.3)
        k = 17
        for _ in range(k):
            state = step_agent(state, (0.0, 1.0, 0.0, 0.0), 0, config)
        expected = (0.3 + k * config.speed_scale / config.wheel_base) % TWO_PI
        assert state[2] == pytest.approx(expected, abs=1e-12)

    def test_clamps_at_walls(self):
        config = SimConfig()
        x, y, _ = step_agent((config.world_width - config.agent_radius, 100.0, 0.0), (1.0, 1.0, 0.0, 0.0), 0, config)
        assert x == config.world_width - config.agent_radius

    def test_bad_sensor_rejected(self):
        with pytest.raises(ValueError):
            step_agent((0.0, 0.0, 0.0), (0.0, 0.0, 0.0, 0.0), 2, SimConfig())


class TestResolveCollisions:
    def test_no_overlap_is_identity(self):
        config = SimConfig()
        world = poses_of([[50.0, 50.0, 0.1], [100.0, 100.0, 0.2], [200.0, 30.0, 3.0]])
        out = resolve_collisions(world, config)
        assert np.array_equal(out, world)

    def test_clamp_out_of_bounds(self):
        config = SimConfig(agent_radius=5.0, wheel_base=10.0)
        out = resolve_collisions(poses_of([[-3.0, 250.0, 0.0], [100.0, 100.0, 0.0]]), config)
        assert out[0, 0] == 5.0

    def test_symmetric_separation_preserves_midpoint(self):
        config = SimConfig(agent_radius=1.0, wheel_base=2.0)
        world = poses_of([[100.0, 100.0, 0.0], [101.0, 100.0, 0.0]])
        out = resolve_collisions(world, config)
        dist = np.linalg.norm(out[1, :2] - out[0, :2])
        assert dist == pytest.approx(2.0, abs=1e-12)
        midpoint = (out[0, :2] + out[1, :2]) / 2
        assert midpoint == pytest.approx([100.5, 100.0], abs=1e-12)

    def test_headings_untouched(self):
        config = SimConfig(agent_radius=1.0, wheel_base=2.0)
        world = poses_of([[100.0, 100.0, 0.7], [100.5, 100.0, 2.9]])
        out = resolve_collisions(world, config)
        assert list(out[:, 2]) == [0.7, 2.9]

    def test_coincident_agents_pushed_apart_deterministically(self):
        config = SimConfig(agent_radius=1.0, wheel_base=2.0)
        world = poses_of([[100.0, 100.0, 0.0], [100.0, 100.0, 0.0]])
        out1 = resolve_collisions(world, config)
        out2 = resolve_collisions(world, config)
        assert np.array_equal(out1, out2)
        assert np.linalg.norm(out1[1, :2] - out1[0, :2]) == pytest.approx(2.0, abs=1e-12)


class TestSimulate:
    def test_zero_genome_is_static(self, small_config, dummy_genome):
        traj = simulate(dummy_genome, small_config, seed=3)
        assert np.array_equal(
            np.broadcast_to(traj.poses[0], traj.poses.shape), traj.poses
        )

    def test_deterministic(self, small_config):
        g = Genome.from_values([-0.7, 0.3, 1.0, 1.0, -0.7, 0.3, 1.0, 1.0, 0.5])
        t1 = simulate(g, small_config, seed=11)
        t2 = simulate(g, small_config, seed=11)
        assert np.array_equal(t1.poses, t2.poses)
        assert np.array_equal(t1.types, t2.types)

    def test_different_seeds_differ(self, small_config):
        g = Genome.from_values([-0.7, 0.3, 1.0, 1.0, -0.7, 0.3, 1.0, 1.0, 0.5])
        assert not np.array_equal(simulate(g, small_config, 0).poses, simulate(g, small_config, 1).poses)

    def test_type_counts_follow_eta(self, small_config):
        g = Genome.from_values([0.1] * 8 + [3 / 24])
        traj = simulate(g, small_config, seed=0)  # 8 agents, eta=1/8 of 24ths -> 1 agent
        assert int((traj.types == 0).sum()) == g.type_a_count(small_config.n_agents)
        assert traj.types.shape == (small_config.n_agents,)

    def test_containment_every_step(self, small_config):
        g = Genome.from_values([1.0, 1.0, -1.0, 1.0, 1.0, -0.2, 0.5, 1.0, 0.5])
        traj = simulate(g, small_config, seed=5)
        r = small_config.agent_radius
        assert np.all(traj.positions[:, :, 0] >= r)
        assert np.all(traj.positions[:, :, 0] <= small_config.world_width - r)
        assert np.all(traj.positions[:, :, 1] >= r)
        assert np.all(traj.positions[:, :, 1] <= small_config.world_height - r)

    def test_headings_normalized(self, small_config):
        g = Genome.from_values([-1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 0.5])
        traj = simulate(g, small_config, seed=2)
        assert np.all(traj.headings >= 0.0)
        assert np.all(traj.headings < TWO_PI)

    def test_poses_shape_is_horizon(self, small_config, dummy_genome):
        traj = simulate(dummy_genome, small_config, seed=0)
        assert traj.poses.shape == (small_config.horizon, small_config.n_agents, 3)

    def test_strict_rejects_off_grid(self, small_config):
        off_grid = Genome.from_values([0.15] + [0.1] * 7 + [0.5])
        with pytest.raises(GenomeError):
            simulate(off_grid, small_config, seed=0, strict=True)
        simulate(off_grid, small_config, seed=0)  # replay mode accepts

    def test_empty_type_rejected(self, small_config):
        g = Genome.from_values([0.0] * 8 + [0.01])
        with pytest.raises(GenomeError):
            simulate(g, small_config, seed=0)


def test_rollout_matches_composed_public_ops(small_config):
    """Dual route: the compiled rollout equals sense+step+resolve composed."""
    g = Genome.from_values([0.6, 1.0, 0.4, 0.5, 0.2, 0.7, -0.5, -0.1, 0.5])
    traj = simulate(g, small_config, seed=9)
    table = g.wheel_table()
    poses = traj.poses[0].copy()
    for t in range(1, 40):
        sensors = [sense(poses, i, small_config.agent_radius) for i in range(small_config.n_agents)]
        stepped = np.empty_like(poses)
        for i in range(small_config.n_agents):
            half = table[traj.types[i]].ravel()
            stepped[i] = step_agent(poses[i], half, sensors[i], small_config)
        poses = resolve_collisions(stepped, small_config)
        assert np.array_equal(poses, traj.poses[t]), f"diverged at step {t}"


def test_synchronous_update_permutation_invariance(small_config):
    """Relabeling agents (within a type) permutes the trajectory and nothing else."""
    g = Genome.from_values([0.6, 1.0, 0.4, 0.5, 0.2, 0.7, -0.5, -0.1, 0.5])
    traj = simulate(g, small_config, seed=4)
    n = small_config.n_agents
    k = int((traj.types == 0).sum())
    perm = np.concatenate([np.random.default_rng(0).permutation(k),
                           k + np.random.default_rng(1).permutation(n - k)])
    permuted = rollout_from_state(traj.poses[0][perm], traj.types[perm], g, small_config)
    assert np.array_equal(permuted, traj.poses[:, perm, :])


def test_mirror_symmetry_collision_free():
    """Mirroring the world across x and swapping wheels mirrors the run."""
    config = SimConfig(n_agents=4, world_width=400.0, world_height=400.0, horizon=25)
    g = Genome.from_values([0.6, 1.0, 0.4, 0.5, 0.2, 0.7, -0.5, -0.1, 0.5])
    rng = np.random.default_rng(7)
    # agents far apart so no collision clamping engages in 25 short steps
    xs = np.array([80.0, 180.0, 280.0, 330.0])
    ys = np.array([80.0, 300.0, 150.0, 330.0])
    thetas = rng.uniform(0, TWO_PI, 4)
    poses = np.column_stack([xs, ys, thetas])
    types = np.array([0, 0, 1, 1], dtype=np.uint8)

    forward = rollout_from_state(poses, types, g, config)

    mirrored = poses.copy()
    mirrored[:, 0] = config.world_width - mirrored[:, 0]
    mirrored[:, 2] = (math.pi - mirrored[:, 2]) % TWO_PI
    backward = rollout_from_state(mirrored, types, g.mirrored(), config)

    assert np.allclose(backward[:, :, 0], config.world_width - forward[:, :, 0], atol=1e-9)
    assert np.allclose(backward[:, :, 1], forward[:, :, 1], atol=1e-9)
    assert np.allclose(
        np.mod(backward[:, :, 2] + forward[:, :, 2], TWO_PI),
        np.full_like(forward[:, :, 2], math.pi),
        atol=1e-9,
    )


@settings(max_examples=20, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    values=st.lists(st.sampled_from([-1.0, -0.5, 0.0, 0.5, 1.0]), min_size=8, max_size=8),
)
def test_simulation_properties_hold_for_random_controllers(seed, values):
    config = SimConfig(n_agents=6, world_width=150.0, world_height=150.0, horizon=30)
    g = Genome.from_values(values + [0.5])
    traj = simulate(g, config, seed)
    r = config.agent_radius
    assert np.all(traj.positions >= r - 1e-12)
    assert np.all(traj.positions[:, :, 0] <= config.world_width - r + 1e-12)
    assert np.all(traj.positions[:, :, 1] <= config.world_height - r + 1e-12)
    assert np.array_equal(simulate(g, config, seed).poses, traj.poses)
