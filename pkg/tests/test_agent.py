"""Tests for the Q-learning controller: policy, replay, targets, training."""
import math

import numpy as np
import pytest

from suntrack import neural
from suntrack.agent import (
    AgentConfig,
    MOVE_PENALTY,
    ReplayBuffer,
    Transition,
    agent_reward,
    new_qnet,
    qlearning_gradients,
    run_episode,
    run_evaluation,
    run_training,
    select_action,
    sync_target,
    td_targets,
    train_step,
)
from suntrack.environment import AgentState, N_ACTIONS, ToyConfig


def random_state(rng, prev_action=0):
    """A valid random observation."""
    d = rng.normal(size=3)
    d = d / np.linalg.norm(d)
    return AgentState(joint_fracs=tuple(rng.uniform(-1, 1, size=6)),
                      sun_direction=tuple(float(c) for c in d),
                      alignment_error_rad=float(rng.uniform(0, math.pi)),
                      prev_action=prev_action)


def random_batch(rng, n, action=None):
    batch = []
    for _ in range(n):
        a = int(rng.integers(N_ACTIONS)) if action is None else action
        batch.append(Transition(s=random_state(rng), a=a,
                                r=float(rng.uniform(-1, 1)),
                                s_next=random_state(rng),
                                done=bool(rng.uniform() < 0.2)))
    return batch


def small_qnet(seed=0, hidden=(16,)):
    return new_qnet(ToyConfig(), AgentConfig(hidden_sizes=hidden), seed)


class TestAgentConfig:

    def test_defaults(self):
        cfg = AgentConfig()
        assert cfg.gamma == pytest.approx(0.95)
        assert cfg.epsilon_schedule == (1.0, 0.05, 10_000)
        assert cfg.buffer_capacity == 20_000
        assert cfg.batch_size == 64
        assert cfg.target_sync_every == 500

    def test_rejects_gamma_one(self):
        with pytest.raises(ValueError):
            AgentConfig(gamma=1.0)

    def test_rejects_capacity_below_batch(self):
        with pytest.raises(ValueError):
            AgentConfig(buffer_capacity=32, batch_size=64)

    def test_rejects_bad_schedule(self):
        with pytest.raises(ValueError):
            AgentConfig(epsilon_schedule=(1.0, 0.05, 0))
        with pytest.raises(ValueError):
            AgentConfig(epsilon_schedule=(1.5, 0.05, 100))

    def test_rejects_empty_hidden(self):
        with pytest.raises(ValueError):
            AgentConfig(hidden_sizes=())


class TestEpsilonSchedule:

    def test_starts_at_start(self):
        assert AgentConfig().epsilon_at(0) == pytest.approx(1.0)

    def test_reaches_end_exactly_at_decay(self):
        cfg = AgentConfig(epsilon_schedule=(1.0, 0.05, 10_000))
        assert cfg.epsilon_at(10_000) == 0.05
        assert cfg.epsilon_at(50_000) == 0.05

    def test_midpoint(self):
        cfg = AgentConfig(epsilon_schedule=(1.0, 0.05, 10_000))
        assert cfg.epsilon_at(5_000) == pytest.approx(0.525)

    def test_non_increasing(self):
        cfg = AgentConfig(epsilon_schedule=(1.0, 0.05, 1_000))
        values = [cfg.epsilon_at(i) for i in range(0, 1_200, 7)]
        assert all(a >= b for a, b in zip(values, values[1:]))


class TestTransition:

    def test_rejects_bad_action(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            Transition(s=random_state(rng), a=N_ACTIONS, r=0.0,
                       s_next=random_state(rng), done=False)

    def test_rejects_non_finite_reward(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            Transition(s=random_state(rng), a=0, r=float("nan"),
                       s_next=random_state(rng), done=False)


class TestReplayBuffer:

    def test_rejects_zero_capacity(self):
        with pytest.raises(ValueError):
            ReplayBuffer(0)

    def test_fifo_eviction(self):
        """Past capacity, the oldest experience is the one replaced."""
        rng = np.random.default_rng(1)
        buf = ReplayBuffer(3)
        items = random_batch(rng, 5)
        for t in items:
            buf.push(t)
        assert len(buf) == 3
        assert buf.inserted == 5
        assert buf.snapshot() == tuple(items[2:])

    def test_snapshot_order_before_wrap(self):
        rng = np.random.default_rng(2)
        buf = ReplayBuffer(10)
        items = random_batch(rng, 4)
        for t in items:
            buf.push(t)
        assert buf.snapshot() == tuple(items)

    def test_sample_requires_enough_items(self):
        rng = np.random.default_rng(3)
        buf = ReplayBuffer(8)
        buf.push(random_batch(rng, 1)[0])
        with pytest.raises(ValueError):
            buf.sample(2, rng)

    def test_sample_is_uniform(self):
        """Each stored item is drawn with frequency 1/n, within 3 sigma."""
        rng = np.random.default_rng(4)
        buf = ReplayBuffer(4)
        items = random_batch(rng, 4)
        for t in items:
            buf.push(t)
        counts = {id(t): 0 for t in items}
        n_draws = 4000
        for _ in range(n_draws // 4):
            for t in buf.sample(4, rng):
                counts[id(t)] += 1
        sigma = math.sqrt(0.25 * 0.75 / n_draws)
        for c in counts.values():
            assert abs(c / n_draws - 0.25) < 3 * sigma + 1e-9


class TestSelectAction:

    def test_rejects_bad_epsilon(self):
        rng = np.random.default_rng(5)
        with pytest.raises(ValueError):
            select_action(small_qnet(), random_state(rng), 1.5, rng)

    def test_greedy_is_argmax(self):
        """At epsilon 0 the action maximizes the network's Q row."""
        rng = np.random.default_rng(6)
        net = small_qnet(seed=3)
        for _ in range(20):
            s = random_state(rng)
            want = int(np.argmax(neural.forward(net, s.vector())))
            assert select_action(net, s, 0.0, rng) == want

    def test_greedy_tie_takes_lowest_index(self):
        """All-equal Q-values (a zero network) resolve to action 0."""
        net = small_qnet()
        zero = neural.Mlp(layer_sizes=net.layer_sizes,
                          weights=[np.zeros_like(w) for w in net.weights],
                          biases=[np.zeros_like(b) for b in net.biases])
        rng = np.random.default_rng(7)
        assert select_action(zero, random_state(rng), 0.0, rng) == 0

    def test_full_exploration_is_uniform(self):
        """At epsilon 1 every action appears with frequency 1/13."""
        rng = np.random.default_rng(8)
        net = small_qnet()
        s = random_state(rng)
        n_draws = 13_000
        counts = np.zeros(N_ACTIONS)
        for _ in range(n_draws):
            counts[select_action(net, s, 1.0, rng)] += 1
        p = 1.0 / N_ACTIONS
        sigma = math.sqrt(p * (1 - p) / n_draws)
        assert np.all(np.abs(counts / n_draws - p) < 3 * sigma + 1e-9)


class TestTdTargets:

    def test_terminal_is_reward_only(self):
        rng = np.random.default_rng(9)
        t = Transition(s=random_state(rng), a=1, r=0.7,
                       s_next=random_state(rng), done=True)
        ys = td_targets([t], small_qnet(), 0.95)
        assert ys[0] == pytest.approx(0.7)

    def test_bootstrap_uses_target_max(self):
        rng = np.random.default_rng(10)
        target = small_qnet(seed=4)
        t = Transition(s=random_state(rng), a=1, r=0.5,
                       s_next=random_state(rng), done=False)
        want = 0.5 + 0.95 * float(np.max(neural.forward(target,
                                                        t.s_next.vector())))
        ys = td_targets([t], target, 0.95)
        assert ys[0] == pytest.approx(want)

    def test_targets_fixed_while_online_net_trains(self):
        """Updating the online net between steps leaves the targets alone."""
        rng = np.random.default_rng(11)
        qnet = small_qnet(seed=5)
        target = small_qnet(seed=6)
        batch = random_batch(rng, 8)
        before = td_targets(batch, target, 0.95)
        opt = neural.OptimState.adam(1e-2, qnet)
        for _ in range(3):
            qnet, opt, _ = train_step(qnet, target, opt, batch, 0.95)
        after = td_targets(batch, target, 0.95)
        assert np.array_equal(before, after)

    def test_rejects_empty_batch(self):
        with pytest.raises(ValueError):
            td_targets([], small_qnet(), 0.95)


class TestQlearningGradients:

    def test_loss_is_mean_squared_td_error(self):
        rng = np.random.default_rng(12)
        qnet = small_qnet(seed=7)
        target = small_qnet(seed=8)
        batch = random_batch(rng, 16)
        loss, _ = qlearning_gradients(qnet, target, batch, 0.95)
        ys = td_targets(batch, target, 0.95)
        preds = np.array([neural.forward(qnet, t.s.vector())[t.a]
                          for t in batch])
        assert loss == pytest.approx(float(np.mean((preds - ys) ** 2)))

    def test_gradient_only_through_taken_actions(self):
        """Output-layer columns of untaken actions get exactly zero gradient."""
        rng = np.random.default_rng(13)
        qnet = small_qnet(seed=9)
        target = small_qnet(seed=10)
        batch = random_batch(rng, 8, action=3)
        _, grads = qlearning_gradients(qnet, target, batch, 0.95)
        g_w = grads.weights[-1]
        g_b = grads.biases[-1]
        untaken = [a for a in range(N_ACTIONS) if a != 3]
        assert np.all(g_w[:, untaken] == 0.0)
        assert np.all(g_b[untaken] == 0.0)
        assert np.any(g_w[:, 3] != 0.0)

    def test_gradient_matches_finite_differences(self):
        """Analytic batch gradient agrees with central differences."""
        rng = np.random.default_rng(14)
        qnet = small_qnet(seed=11, hidden=(12,))
        target = small_qnet(seed=12, hidden=(12,))
        batch = random_batch(rng, 6)

        def loss_at(net):
            return qlearning_gradients(net, target, batch, 0.95)[0]

        _, grads = qlearning_gradients(qnet, target, batch, 0.95)
        h = 1e-6
        for _ in range(12):
            layer = int(rng.integers(len(qnet.weights)))
            i = int(rng.integers(qnet.weights[layer].shape[0]))
            j = int(rng.integers(qnet.weights[layer].shape[1]))
            w_plus = [w.copy() for w in qnet.weights]
            w_minus = [w.copy() for w in qnet.weights]
            w_plus[layer][i, j] += h
            w_minus[layer][i, j] -= h
            net_p = neural.Mlp(layer_sizes=qnet.layer_sizes, weights=w_plus,
                               biases=[b.copy() for b in qnet.biases])
            net_m = neural.Mlp(layer_sizes=qnet.layer_sizes, weights=w_minus,
                               biases=[b.copy() for b in qnet.biases])
            fd = (loss_at(net_p) - loss_at(net_m)) / (2 * h)
            got = grads.weights[layer][i, j]
            assert got == pytest.approx(fd, rel=1e-4, abs=1e-8)


class TestTrainStep:

    def test_returns_pre_step_loss(self):
        """The reported loss is evaluated at the incoming parameters."""
        rng = np.random.default_rng(15)
        qnet = small_qnet(seed=13)
        target = small_qnet(seed=14)
        batch = random_batch(rng, 8)
        want, _ = qlearning_gradients(qnet, target, batch, 0.95)
        opt = neural.OptimState.adam(1e-3, qnet)
        _, _, loss = train_step(qnet, target, opt, batch, 0.95)
        assert loss == want

    def test_updates_parameters(self):
        rng = np.random.default_rng(16)
        qnet = small_qnet(seed=15)
        target = small_qnet(seed=16)
        batch = random_batch(rng, 8)
        opt = neural.OptimState.adam(1e-3, qnet)
        new_net, _, _ = train_step(qnet, target, opt, batch, 0.95)
        assert any(not np.array_equal(a, b)
                   for a, b in zip(new_net.weights, qnet.weights))


class TestSyncTarget:

    def test_bitwise_copy(self):
        qnet = small_qnet(seed=17)
        target = small_qnet(seed=18)
        synced = sync_target(qnet, target)
        for a, b in zip(synced.weights, qnet.weights):
            assert np.array_equal(a, b)
            assert not np.shares_memory(a, b)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            sync_target(small_qnet(hidden=(16,)), small_qnet(hidden=(8,)))


class TestAgentReward:

    def test_noop_keeps_energy(self):
        assert agent_reward(0.5, 0) == pytest.approx(0.5)

    def test_moves_pay_penalty(self):
        assert agent_reward(0.5, 3) == pytest.approx(0.5 - MOVE_PENALTY)


class TestRunTraining:

    def test_zero_episodes(self):
        """No training returns the fresh net and no metrics."""
        net, metrics = run_training(ToyConfig(), AgentConfig(), seed=0,
                                    n_episodes=0)
        assert metrics == []
        assert net.layer_sizes[-1] == N_ACTIONS

    def test_rejects_negative_episodes(self):
        with pytest.raises(ValueError):
            run_training(ToyConfig(), AgentConfig(), seed=0, n_episodes=-1)

    def test_deterministic(self):
        """Same seed reproduces metrics and weights bit for bit."""
        cfg = ToyConfig(n_steps=30)
        ac = AgentConfig(batch_size=16, buffer_capacity=512,
                         epsilon_schedule=(1.0, 0.1, 100))
        n1, m1 = run_training(cfg, ac, seed=5, n_episodes=3)
        n2, m2 = run_training(cfg, ac, seed=5, n_episodes=3)
        assert m1 == m2
        for a, b in zip(n1.weights, n2.weights):
            assert np.array_equal(a, b)

    def test_seed_changes_run(self):
        cfg = ToyConfig(n_steps=30)
        ac = AgentConfig(batch_size=16, buffer_capacity=512,
                         epsilon_schedule=(1.0, 0.1, 100))
        _, m1 = run_training(cfg, ac, seed=5, n_episodes=3)
        _, m2 = run_training(cfg, ac, seed=6, n_episodes=3)
        assert m1 != m2

    def test_metrics_shape(self):
        cfg = ToyConfig(n_steps=20)
        ac = AgentConfig(batch_size=8, buffer_capacity=256)
        _, metrics = run_training(cfg, ac, seed=1, n_episodes=4)
        assert len(metrics) == 4
        for i, row in enumerate(metrics):
            assert row["episode"] == i
            assert row["success"] in (0, 1)
            assert set(row) == {"episode", "return", "success", "energy_wh",
                                "epsilon"}

    def test_epsilon_column_non_increasing(self):
        cfg = ToyConfig(n_steps=20)
        ac = AgentConfig(batch_size=8, buffer_capacity=256,
                         epsilon_schedule=(1.0, 0.05, 60))
        _, metrics = run_training(cfg, ac, seed=1, n_episodes=5)
        eps = [row["epsilon"] for row in metrics]
        assert all(a >= b for a, b in zip(eps, eps[1:]))
        assert eps[-1] == 0.05


class TestRunEpisodeAndEvaluation:

    def test_greedy_episode_deterministic(self):
        net, _ = run_training(ToyConfig(n_steps=20),
                              AgentConfig(batch_size=8, buffer_capacity=256),
                              seed=2, n_episodes=2)
        r1 = run_episode(net, ToyConfig(n_steps=20), AgentConfig(), seed=0)
        r2 = run_episode(net, ToyConfig(n_steps=20), AgentConfig(), seed=0)
        assert r1 == r2

    def test_evaluation_rows_carry_seeds_in_order(self):
        net, _ = run_training(ToyConfig(n_steps=20),
                              AgentConfig(batch_size=8, buffer_capacity=256),
                              seed=2, n_episodes=1)
        rows = run_evaluation(net, ToyConfig(n_steps=20), AgentConfig(),
                              seeds=[11, 7, 5])
        assert [r["seed"] for r in rows] == [11, 7, 5]
        for r in rows:
            assert set(r) == {"return", "success", "energy_wh",
                              "mean_error_rad", "seed"}
