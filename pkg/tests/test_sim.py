import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tert.sim import (
    COMMAND_VX,
    EPISODE_CAP,
    KINDS,
    OBS_DIM,
    PRIV_DIM,
    TerrainSpec,
    VecEnv,
    generate_terrain,
    make_env,
    pd_torque,
)
from tert.sim.env import STAND_HEIGHT, TRACKING_SIGMA


def flat_spec(seed=0):
    return TerrainSpec("smooth-slope", 0.0, seed)


class TestTerrain:
    def test_smooth_slope_formula(self):
        h = generate_terrain(TerrainSpec("smooth-slope", 0.6, 1))
        xs = np.array([0.5, 2.0, 10.0])
        np.testing.assert_allclose(h(xs), np.tan(np.deg2rad(0.6 * 25.0)) * xs, atol=1e-12)
        flat = generate_terrain(flat_spec())
        np.testing.assert_array_equal(flat(xs), np.zeros(3))

    def test_flat_spawn_pad(self):
        for kind in KINDS:
            h = generate_terrain(TerrainSpec(kind, 1.0, 3))
            np.testing.assert_array_equal(h(np.array([-1.0, -0.3, 0.0])), np.zeros(3))

    def test_stairs_up_example(self):
        h = generate_terrain(TerrainSpec("stairs-up", 1.0, 2))
        assert h(np.array([0.45]))[0] == pytest.approx(0.18, abs=1e-12)
        assert h(np.array([0.15]))[0] == 0.0

    def test_stairs_down_descends(self):
        h = generate_terrain(TerrainSpec("stairs-down", 0.5, 2))
        assert h(np.array([5.0]))[0] < h(np.array([1.0]))[0] < 0.0 or h(np.array([1.0]))[0] <= 0.0

    def test_deterministic_expansion(self):
        for kind in KINDS:
            a = generate_terrain(TerrainSpec(kind, 0.7, 42)).grid()[1]
            b = generate_terrain(TerrainSpec(kind, 0.7, 42)).grid()[1]
            np.testing.assert_array_equal(a, b)

    def test_seed_changes_rough_terrain(self):
        a = generate_terrain(TerrainSpec("rough-slope", 0.7, 1)).grid()[1]
        b = generate_terrain(TerrainSpec("rough-slope", 0.7, 2)).grid()[1]
        assert not np.array_equal(a, b)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=0.0, max_value=1.0))
    def test_monotonic_difficulty(self, d1, d2):
        lo, hi = sorted((d1, d2))
        s_lo = generate_terrain(TerrainSpec("stairs-up", lo, 1))
        s_hi = generate_terrain(TerrainSpec("stairs-up", hi, 1))
        assert s_hi(np.array([0.45]))[0] >= s_lo(np.array([0.45]))[0]
        g_lo = generate_terrain(TerrainSpec("smooth-slope", lo, 1))
        g_hi = generate_terrain(TerrainSpec("smooth-slope", hi, 1))
        assert g_hi(np.array([1.0]))[0] >= g_lo(np.array([1.0]))[0]

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown terrain kind"):
            TerrainSpec("lava", 0.5, 0)


class TestPdTorque:
    def test_zero_error_zero_torque(self):
        assert pd_torque(0.3, 0.3, 1.1, 1.1, 55.0, 8.0) == 0.0

    def test_formula_example(self):
        # kp=55, kd=8, position error 0.1, velocity error -0.2 -> 3.9
        assert pd_torque(0.1, 0.0, -0.2, 0.0, 55.0, 8.0) == pytest.approx(3.9, abs=1e-12)

    def test_clamped_to_motor_limit(self):
        assert pd_torque(10.0, 0.0, 0.0, 0.0, 55.0, 0.0) == 33.5
        assert pd_torque(-10.0, 0.0, 0.0, 0.0, 55.0, 0.0) == -33.5


class TestReset:
    def test_command_and_initial_obs(self):
        env = make_env(flat_spec(), seed=1)
        obs, priv = env.reset()
        assert obs.shape == (1, OBS_DIM) and priv.shape == (1, PRIV_DIM)
        assert obs[0, 5] == np.float32(COMMAND_VX)
        np.testing.assert_array_equal(obs[0, 14:18], np.zeros(4, dtype=np.float32))

    def test_same_seed_identical_reset(self):
        a = make_env(flat_spec(3), seed=5).reset()[0]
        b = make_env(flat_spec(3), seed=5).reset()[0]
        np.testing.assert_array_equal(a, b)

    def test_params_in_training_ranges(self):
        env = VecEnv([TerrainSpec("rough-slope", 0.5, s) for s in range(50)], seed=2)
        env.reset()
        assert (env.friction >= 0.5).all() and (env.friction <= 1.25).all()
        assert (env.kp >= 45).all() and (env.kp <= 65).all()

    def test_testing_ranges_wider(self):
        env = VecEnv([TerrainSpec("rough-slope", 0.5, s) for s in range(200)],
                     range_set="testing", seed=2)
        env.reset()
        assert (env.friction >= 0.1).all() and (env.friction <= 2.0).all()
        assert env.friction.min() < 0.5 or env.friction.max() > 1.25
        assert (env.added_mass <= 7.0).all()


class TestStep:
    def test_standing_smoke(self):
        env = make_env(flat_spec(7), seed=7)
        env.reset()
        zeros = np.zeros((1, 4))
        for _ in range(EPISODE_CAP - 1):
            res = env.step(zeros)
            assert not res.done[0]
        res = env.step(zeros)
        assert res.done[0]  # episode cap, not a fall
        assert res.breakdown["termination"][0] == 0.0

    def test_standing_penetration_small(self):
        env = make_env(flat_spec(7), seed=7)
        env.reset()
        for _ in range(200):
            env.step(np.zeros((1, 4)))
        # trunk settles just below nominal standing height; penetration < 2 cm
        assert STAND_HEIGHT - env.z[0] < 0.02
        assert env.contact.all()

    def test_determinism_same_action_sequence(self):
        def run():
            env = make_env(TerrainSpec("rough-slope", 0.4, 9), seed=9)
            env.reset()
            rng = np.random.default_rng(0)
            states = []
            for _ in range(50):
                res = env.step(rng.uniform(-1, 1, size=(1, 4)))
                states.append(res.obs.copy())
            return np.concatenate(states)

        np.testing.assert_array_equal(run(), run())

    def test_worker_count_invariance(self):
        specs = [TerrainSpec(KINDS[i % 5], 0.3, 100 + i) for i in range(6)]
        rng = np.random.default_rng(1)
        actions = rng.uniform(-1, 1, size=(30, 6, 4))

        def run(groups):
            rows = []
            for group in groups:
                env = VecEnv([specs[i] for i in group], seed=11)
                env.reset()
                out = [env.step(actions[t][list(group)]).obs for t in range(30)]
                rows.append((group, np.stack(out)))
            merged = np.empty((30, 6, OBS_DIM), dtype=np.float32)
            for group, out in rows:
                merged[:, list(group)] = out
            return merged

        a = run([range(6)])
        b = run([[0, 1], [2, 3, 4], [5]])
        np.testing.assert_array_equal(a, b)

    def test_reward_breakdown_sums(self):
        env = make_env(TerrainSpec("stairs-up", 0.3, 5), seed=5)
        env.reset()
        rng = np.random.default_rng(2)
        for _ in range(50):
            res = env.step(rng.uniform(-1, 1, size=(1, 4)))
            total = sum(v[0] for v in res.breakdown.values())
            assert abs(total - res.reward[0]) <= 1e-6

    def test_tracking_term_values(self):
        env = make_env(flat_spec(7), seed=7)
        env.reset()
        res = env.step(np.zeros((1, 4)))
        # standing: vx ~ 0 so tracking ~ exp(-0.4^2/0.0625) ~ 0.0773
        expected = np.exp(-(COMMAND_VX**2) / TRACKING_SIGMA**2)
        assert res.breakdown["tracking"][0] == pytest.approx(expected, rel=0.2)

    def test_nonfinite_action_rejected(self):
        env = make_env(flat_spec(7), seed=7)
        env.reset()
        with pytest.raises(FloatingPointError, match="env 0"):
            env.step(np.array([[np.nan, 0, 0, 0]]))

    def test_observation_layout_excludes_privileged(self):
        env = make_env(TerrainSpec("rough-slope", 0.8, 3), seed=3)
        obs, priv = env.reset()
        assert obs.shape[1] == 18 and priv.shape[1] == 19
        # privileged fields (friction etc.) must not appear in obs
        assert not np.isin(priv[0, 15:], obs[0]).any()

    def test_height_samples_on_flat_ground(self):
        env = make_env(flat_spec(7), seed=7)
        _, priv = env.reset()
        np.testing.assert_allclose(priv[0, :11], -env.z[0], atol=1e-6)

    def test_contact_flags_midflight(self):
        env = make_env(flat_spec(7), seed=7)
        env.reset()
        env.z[0] = 1.0  # lift the robot off the ground
        res = env.step(np.zeros((1, 4)))
        assert res.priv[0, 11:15].sum() == 0.0

    def test_lockstep_freezes_done_envs(self):
        env = VecEnv([flat_spec(1), flat_spec(2)], seed=1, auto_reset=False)
        env.reset()
        env.th[0] = 1.5  # force a fall in env 0
        res = env.step(np.zeros((2, 4)))
        assert res.done[0] and not res.done[1]
        x_frozen = env.x[0]
        res2 = env.step(np.ones((2, 4)))
        assert res2.done[0] and res2.reward[0] == 0.0
        assert env.x[0] == x_frozen
