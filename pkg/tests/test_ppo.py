import numpy as np
import pytest

from tert.core import AdamState, Tape, Tensor, backward
from tert.core import tensor as T
from tert.models.teacher import TeacherBundle, gaussian_logp_np
from tert.ppo import (
    PpoConfig,
    collect_rollout,
    compute_gae,
    gae_bruteforce,
    normalize_advantages,
    ppo_loss,
    ppo_update,
)
from tert.sim import TerrainSpec, VecEnv


def small_env(n=4, seed=0):
    env = VecEnv([TerrainSpec("smooth-slope", 0.0, 100 + i) for i in range(n)], seed=seed)
    env.reset()
    return env


class TestGae:
    def test_monte_carlo_case(self):
        adv, targets = compute_gae(
            rewards=np.array([1.0, 1.0]), values=np.array([0.0, 0.0, 0.0]),
            dones=np.array([False, False]), gamma=1.0, lam=1.0,
        )
        np.testing.assert_allclose(adv, [2.0, 1.0])
        np.testing.assert_allclose(targets, [2.0, 1.0])

    def test_done_cuts_bootstrap(self):
        adv, _ = compute_gae(
            rewards=np.array([3.0, 1.0]), values=np.array([0.5, 7.0, 9.0]),
            dones=np.array([True, False]), gamma=0.99, lam=0.95,
        )
        assert adv[0] == pytest.approx(3.0 - 0.5, abs=1e-9)

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            horizon, n = rng.integers(2, 15), rng.integers(1, 4)
            rewards = rng.standard_normal((horizon, n))
            values = rng.standard_normal((horizon + 1, n))
            dones = rng.random((horizon, n)) < 0.2
            gamma, lam = rng.uniform(0.8, 1.0), rng.uniform(0.8, 1.0)
            a1, t1 = compute_gae(rewards, values, dones, gamma, lam)
            a2, t2 = gae_bruteforce(rewards, values, dones, gamma, lam)
            np.testing.assert_allclose(a1, a2, atol=1e-6)
            np.testing.assert_allclose(t1, t2, atol=1e-6)

    def test_normalization(self):
        rng = np.random.default_rng(1)
        adv = normalize_advantages(rng.standard_normal((24, 16)) * 5 + 3)
        assert abs(adv.mean()) <= 1e-6
        assert abs(adv.std() - 1.0) <= 1e-3


class TestRollout:
    def test_record_count_and_shapes(self):
        env = small_env()
        bundle = TeacherBundle(seed=0)
        buf = collect_rollout(env, bundle, 24, np.random.default_rng(0))
        assert buf.rewards.shape == (24, 4)
        assert buf.obs.shape == (24, 4, 18)
        assert buf.values.shape == (25, 4)

    def test_deterministic_given_seed(self):
        def run():
            env = small_env(seed=3)
            bundle = TeacherBundle(seed=3)
            buf = collect_rollout(env, bundle, 10, np.random.default_rng(42))
            return buf.actions.copy(), buf.rewards.copy()

        (a1, r1), (a2, r2) = run(), run()
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(r1, r2)

    def test_log_probs_match_recomputation(self):
        env = small_env()
        bundle = TeacherBundle(seed=1)
        buf = collect_rollout(env, bundle, 8, np.random.default_rng(1))
        for t in range(8):
            mean, log_std, _, _ = bundle.policy_outputs(buf.obs[t], buf.priv[t])
            logp = gaussian_logp_np(mean, log_std, buf.actions[t])
            np.testing.assert_allclose(logp, buf.log_probs[t], atol=1e-6)


def synthetic_buffer(bundle, env, horizon=16, seed=0):
    buf = collect_rollout(env, bundle, horizon, np.random.default_rng(seed))
    from tert.ppo.gae import compute_gae as cg, normalize_advantages as na
    adv, targets = cg(buf.rewards, buf.values, buf.dones, 0.99, 0.95)
    buf.advantages = na(adv)
    buf.value_targets = targets.astype(np.float32)
    return buf


class TestPpoUpdate:
    def test_rho_one_surrogate_is_mean_advantage(self):
        env = small_env()
        bundle = TeacherBundle(seed=2)
        buf = synthetic_buffer(bundle, env, seed=2)
        total = buf.rewards.size
        cfg = PpoConfig(num_envs=4, horizon=16, minibatch=total, epochs=1)
        loss, stats = ppo_loss(
            bundle, buf.obs.reshape(total, -1), buf.priv.reshape(total, -1),
            buf.actions.reshape(total, -1), buf.log_probs.reshape(total),
            buf.advantages.reshape(total), buf.value_targets.reshape(total), cfg,
        )
        # behavior policy == current policy: -policy surrogate == mean normalized adv ~ 0
        assert abs(stats["policy_loss"]) <= 1e-5
        assert abs(stats["approx_kl"]) <= 1e-6

    def test_clipped_branch_zero_gradient(self):
        adv = Tensor(np.array([1.0], dtype=np.float32))
        ratio = Tensor(np.array([1.5], dtype=np.float32), requires_grad=True)
        with Tape() as tape:
            surr = T.minimum(T.mul(ratio, adv), T.mul(T.clip(ratio, 0.8, 1.2), adv))
            loss = T.tsum(surr)
        backward(tape, loss)
        np.testing.assert_array_equal(ratio.grad, np.zeros(1, dtype=np.float32))

    def test_one_update_decreases_loss(self):
        env = small_env(n=8, seed=5)
        bundle = TeacherBundle(seed=5)
        buf = synthetic_buffer(bundle, env, horizon=32, seed=5)
        total = buf.rewards.size
        cfg = PpoConfig(num_envs=8, horizon=32, minibatch=total, epochs=1)

        def combined_loss():
            loss, _ = ppo_loss(
                bundle, buf.obs.reshape(total, -1), buf.priv.reshape(total, -1),
                buf.actions.reshape(total, -1), buf.log_probs.reshape(total),
                buf.advantages.reshape(total), buf.value_targets.reshape(total), cfg,
            )
            return float(loss.data)

        before = combined_loss()
        adam = AdamState(bundle.params)
        # small step: Adam's first update moves every parameter by ~lr, so a
        # large lr can overshoot even with correct gradients
        ppo_update(bundle, buf, cfg, adam, lr=1e-4, rng=np.random.default_rng(0))
        assert combined_loss() < before

    def test_encoder_receives_gradients(self):
        env = small_env()
        bundle = TeacherBundle(seed=6)
        buf = synthetic_buffer(bundle, env, seed=6)
        snapshot = {k: p.data.copy() for k, p in bundle.params.items() if k.startswith("encoder/")}
        cfg = PpoConfig(num_envs=4, horizon=16, minibatch=64, epochs=1)
        adam = AdamState(bundle.params)
        ppo_update(bundle, buf, cfg, adam, lr=1e-3, rng=np.random.default_rng(0))
        change = sum(
            float(np.abs(bundle.params[k].data - v).sum()) for k, v in snapshot.items()
        )
        assert change > 0.0

    def test_ppo_gradient_equals_vanilla_at_snapshot(self):
        env = small_env()
        bundle = TeacherBundle(seed=7)
        buf = synthetic_buffer(bundle, env, seed=7)
        total = buf.rewards.size
        obs = buf.obs.reshape(total, -1)
        priv = buf.priv.reshape(total, -1)
        actions = buf.actions.reshape(total, -1)
        old_logp = buf.log_probs.reshape(total)
        adv = buf.advantages.reshape(total)

        def policy_grads(use_clip):
            for p in bundle.params.values():
                p.zero_grad()
            obs_t, priv_t = bundle.scaled(obs, priv)
            with Tape() as tape:
                mean, log_std, _, _ = bundle.forward(obs_t, priv_t)
                logp = T.gaussian_log_prob(mean, log_std, Tensor(actions))
                ratio = T.exp(T.sub(logp, Tensor(old_logp)))
                adv_t = Tensor(adv)
                if use_clip:
                    surr = T.minimum(T.mul(ratio, adv_t),
                                     T.mul(T.clip(ratio, 1 - 0.99, 1 + 0.99), adv_t))
                else:
                    surr = T.mul(ratio, adv_t)
                loss = T.neg(T.tmean(surr))
            backward(tape, loss)
            return {k: p.grad_or_zero().copy() for k, p in bundle.params.items()
                    if k.startswith("policy/")}

        g_ppo = policy_grads(True)
        g_vanilla = policy_grads(False)
        for k in g_ppo:
            np.testing.assert_allclose(g_ppo[k], g_vanilla[k], atol=1e-7)
