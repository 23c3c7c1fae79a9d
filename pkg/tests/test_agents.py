import io
import json

import numpy as np
import pytest

from smartqueue.agents import (
    Batch,
    CentralizedDqn,
    DgnAgent,
    DgnConfig,
    DistributedDqn,
    DqnConfig,
    Experience,
    ReplayBuffer,
    TrainConfig,
    centralized_step,
    dgn_forward,
    dgn_loss,
    dgn_train_step,
    dqn_forward,
    dqn_loss,
    epsilon_schedule,
    hard_sync,
    init_dgn,
    make_policy,
    select_action,
    train,
)
from smartqueue.env import EnvConfig, QueueingEnv, build_adjacency, adjacency_mask
from smartqueue.errors import ConfigError, DimensionError, DivergenceError, PreconditionError, StateError
from smartqueue.harness import build_sdwan_scenario
from smartqueue.netsim import Simulator
from smartqueue.nn import SGD, Adam, Tape, finite_diff_check

SMALL = DgnConfig(hidden=16, heads=8)


def chain_mask(n):
    return adjacency_mask([build_adjacency(i, [j for j in (i - 1, i + 1) if 0 <= j < n], n) for i in range(n)])


def random_batch(rng, S=6, N=3, mask=None, done=None):
    mask = chain_mask(N) if mask is None else mask
    return Batch(
        obs=rng.random((S, N, 6)),
        actions=rng.integers(0, 8, size=(S, N)),
        next_obs=rng.random((S, N, 6)),
        rewards=rng.normal(size=(S, N)) * 3,
        mask=np.broadcast_to(mask, (S, N, N)).copy(),
        done=rng.random((S, N)) < 0.3 if done is None else done,
    )


def dgn_loss_oracle(batch, main, target, gamma):
    """Per-sample, per-agent recomputation of the squared TD error."""
    total = 0.0
    S, N = batch.actions.shape
    for s in range(S):
        q = dgn_forward(batch.obs[s], batch.mask[s], main)
        qn = dgn_forward(batch.next_obs[s], batch.mask[s], target)
        for i in range(N):
            y = batch.rewards[s, i]
            if not batch.done[s, i]:
                y += gamma * max(qn[i])
            total += (y - q[i, batch.actions[s, i]]) ** 2
    return total / (S * N)


# -- DGN forward ---------------------------------------------------------------

def test_single_agent_forward_is_finite():
    p = init_dgn(DgnConfig(), np.random.default_rng(0))
    q = dgn_forward(np.random.default_rng(1).random((1, 6)), np.ones((1, 1), bool), p)
    assert q.shape == (1, 8) and np.isfinite(q).all()


def test_forward_permutation_equivariance():
    p = init_dgn(SMALL, np.random.default_rng(2))
    rng = np.random.default_rng(3)
    obs = rng.random((5, 6))
    mask = rng.random((5, 5)) < 0.4
    mask = mask | mask.T
    np.fill_diagonal(mask, True)
    perm = np.array([3, 0, 4, 1, 2])
    q = dgn_forward(obs, mask, p)
    qp = dgn_forward(obs[perm], mask[np.ix_(perm, perm)], p)
    np.testing.assert_allclose(qp, q[perm], atol=1e-12)


@pytest.mark.parametrize("layers", [1, 2])
def test_influence_radius(layers):
    cfg = DgnConfig(hidden=16, heads=8, conv_layers=layers)
    p = init_dgn(cfg, np.random.default_rng(4))
    mask = chain_mask(5)
    obs = np.random.default_rng(5).random((5, 6))
    base = dgn_forward(obs, mask, p)
    poked = obs.copy()
    poked[0] += 0.7
    diff = np.abs(dgn_forward(poked, mask, p) - base).max(axis=1)
    for hops in range(5):
        if hops <= layers:
            assert diff[hops] > 0
        else:
            assert diff[hops] == 0.0


def test_forward_mask_mismatch():
    p = init_dgn(SMALL, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        dgn_forward(np.zeros((3, 6)), np.ones((4, 4), bool), p)


def test_conv_layers_limited():
    with pytest.raises(PreconditionError):
        DgnConfig(conv_layers=3)


# -- action selection ------------------------------------------------------------

def test_full_exploration_is_uniform():
    rng = np.random.default_rng(6)
    n = 10000
    counts = np.bincount([select_action(np.arange(8.0), 1.0, rng) for _ in range(n)], minlength=8)
    chi2 = ((counts - n / 8) ** 2 / (n / 8)).sum()
    assert chi2 < 24.32  # 0.001 critical value, 7 degrees of freedom


def test_greedy_choice_and_ties():
    rng = np.random.default_rng(0)
    q = np.array([0, 1, 2, 5, 1, 0, 0, 4.0])
    assert select_action(q, 0.0, rng) == 3
    assert select_action(q * 17.5, 0.0, rng) == 3
    assert select_action(np.array([1, 3, 3, 0.0]), 0.0, rng) == 1


@pytest.mark.parametrize("eps", [-0.1, 1.01])
def test_epsilon_range(eps):
    with pytest.raises(PreconditionError):
        select_action(np.zeros(8), eps, np.random.default_rng(0))


def test_epsilon_schedule():
    assert epsilon_schedule(0, "madqn") == 1.0
    assert epsilon_schedule(1000, "madqn") == pytest.approx(0.99955**1000, abs=1e-15)
    assert epsilon_schedule(1000, "madqn") == pytest.approx(0.6382, abs=1e-3)
    assert epsilon_schedule(10**6, "madqn") == 0.001
    assert epsilon_schedule(5000, "dgn", 0.1) == 0.1
    with pytest.raises(PreconditionError):
        epsilon_schedule(-1, "dgn")


# -- DGN training ----------------------------------------------------------------

def test_loss_without_bootstrap_is_mean_squared_error():
    rng = np.random.default_rng(7)
    p = init_dgn(SMALL, rng)
    b = random_batch(rng, done=np.ones((6, 3), bool))
    q = dgn_forward(b.obs, b.mask, p)
    qa = np.take_along_axis(q, b.actions[..., None], axis=-1)[..., 0]
    loss, _ = dgn_loss(b, p, p, 0.0)
    assert loss == pytest.approx(np.mean((b.rewards - qa) ** 2), rel=1e-12)


def test_loss_matches_per_sample_oracle():
    rng = np.random.default_rng(8)
    main = init_dgn(SMALL, rng)
    target = init_dgn(SMALL, rng)
    b = random_batch(rng)
    loss, _ = dgn_loss(b, main, target, 0.99)
    assert loss == pytest.approx(dgn_loss_oracle(b, main, target, 0.99), abs=1e-10)


def test_fixed_point_has_zero_loss_and_gradient():
    rng = np.random.default_rng(9)
    p = init_dgn(SMALL, rng)
    b = random_batch(rng, done=np.zeros((6, 3), bool))
    q = dgn_forward(b.obs, b.mask, p)
    qa = np.take_along_axis(q, b.actions[..., None], axis=-1)[..., 0]
    b.rewards = qa - 0.9 * dgn_forward(b.next_obs, b.mask, p).max(axis=-1)
    tape = Tape()
    loss, dq = dgn_loss(b, p, p, 0.9, tape=tape)
    grads = tape.backward(dq)
    assert loss < 1e-25
    assert max(np.abs(g).max() for g in grads.values()) < 1e-12


def test_full_network_gradient_matches_finite_differences():
    rng = np.random.default_rng(10)
    main = init_dgn(DgnConfig(), rng)
    target = main.copy()
    b = random_batch(rng, S=3)
    tape = Tape()
    _, dq = dgn_loss(b, main, target, 0.99, tape=tape)
    grads = tape.backward(dq)
    err = finite_diff_check(lambda q: dgn_loss(b, q, target, 0.99)[0], main, 1e-5, grads=grads,
                            n_coords=20, rng=np.random.default_rng(11))
    assert err < 1e-4


def test_overfit_one_batch():
    rng = np.random.default_rng(12)
    main = init_dgn(SMALL, rng)
    target = main.copy()
    b = random_batch(rng, S=8)
    opt = SGD(1e-3)
    losses = [dgn_train_step(b, 0.0, main, target, opt) for _ in range(51)]
    assert all(x > y for x, y in zip(losses, losses[1:]))


def test_overfit_one_batch_with_bootstrap_and_adam():
    rng = np.random.default_rng(13)
    main = init_dgn(SMALL, rng)
    target = main.copy()
    b = random_batch(rng, S=8)
    opt = Adam(1e-3)
    losses = [dgn_train_step(b, 0.99, main, target, opt) for _ in range(51)]
    assert losses[-1] < 0.8 * losses[0]


def test_target_moves_only_by_soft_update():
    rng = np.random.default_rng(14)
    main = init_dgn(SMALL, rng)
    target = init_dgn(SMALL, rng)
    before = target.copy()
    dgn_train_step(random_batch(rng), 0.99, main, target, SGD(0.05), tau=0.01)
    for k in target:
        np.testing.assert_allclose(target[k], 0.99 * before[k] + 0.01 * main[k], atol=1e-15)
    frozen = target.copy()
    dgn_train_step(random_batch(rng), 0.99, main, target, SGD(0.05), tau=0.0)
    assert target.allclose(frozen)


def test_empty_batch_rejected():
    p = init_dgn(SMALL, np.random.default_rng(0))
    b = random_batch(np.random.default_rng(0), S=0)
    with pytest.raises(PreconditionError):
        dgn_loss(b, p, p, 0.9)


def test_agent_checkpoint_roundtrip():
    a = DgnAgent(3, SMALL, seed=1)
    b = DgnAgent(3, SMALL, seed=2)
    b.load_state(a.state())
    obs = np.random.default_rng(0).random((3, 6))
    assert np.array_equal(a.q_values(obs, chain_mask(3)), b.q_values(obs, chain_mask(3)))
    with pytest.raises(ValueError):
        b.load_state(DgnAgent(3, DgnConfig(hidden=16, heads=8, conv_layers=1)).state())


# -- DQN baselines ---------------------------------------------------------------

def dqn_loss_oracle(x, a, r, x2, done, gamma, main, target, prefix):
    total = 0.0
    for s in range(len(x)):
        q = dqn_forward(x[s], main, prefix)[0]
        y = r[s] if done[s] else r[s] + gamma * dqn_forward(x2[s], target, prefix)[0].max()
        total += (y - q[a[s]]) ** 2
    return total / len(x)


def test_dqn_loss_matches_oracle():
    rng = np.random.default_rng(15)
    agent = DistributedDqn(1, DqnConfig(hidden=16), seed=3)
    net = agent.nets[0]
    net.target = DistributedDqn(1, DqnConfig(hidden=16), seed=4).nets[0].main
    x, x2 = rng.random((7, 6)), rng.random((7, 6))
    a, r, d = rng.integers(0, 8, 7), rng.normal(size=7), rng.random(7) < 0.4
    loss, _ = dqn_loss(x, a, r, x2, d, 0.99, net.main, net.target, "a0")
    assert loss == pytest.approx(dqn_loss_oracle(x, a, r, x2, d, 0.99, net.main, net.target, "a0"), abs=1e-10)


def test_dqn_fixed_point():
    rng = np.random.default_rng(16)
    net = DistributedDqn(1, DqnConfig(hidden=16)).nets[0]
    x = rng.random((5, 6))
    a = rng.integers(0, 8, 5)
    q = dqn_forward(x, net.main, "a0")[:, 0]
    loss, dout = dqn_loss(x, a, q[np.arange(5), a], x, np.ones(5, bool), 0.99, net.main, net.main, "a0")
    assert loss == 0.0 and not dout.any()


def _dqn_batch(rng, S=32, N=2):
    return random_batch(rng, S=S, N=N, mask=np.ones((N, N), bool))


def test_hard_sync_interval():
    rng = np.random.default_rng(17)
    agent = DistributedDqn(2, DqnConfig(hidden=16, sync_every=3, lr=1e-2), seed=0)
    net = agent.nets[0]
    start = net.target.copy()
    for _ in range(2):
        agent.train_agent(0, _dqn_batch(rng))
    assert net.target.allclose(start) and not net.main.allclose(start)
    agent.train_agent(0, _dqn_batch(rng))
    x = rng.random((10, 6))
    assert np.array_equal(dqn_forward(x, net.target, "a0"), dqn_forward(x, net.main, "a0"))


def test_hard_sync_copies_bits():
    a = DistributedDqn(1, DqnConfig(hidden=8), seed=1).nets[0].main
    b = DistributedDqn(1, DqnConfig(hidden=8), seed=2).nets[0].main
    hard_sync(b, a)
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)


def test_centralized_single_agent_equals_distributed():
    cfg = DqnConfig(hidden=16, lr=1e-3)
    cen, dist = CentralizedDqn(1, cfg, seed=5), DistributedDqn(1, cfg, seed=5)
    rng = np.random.default_rng(18)
    obs = rng.random((1, 6))
    assert np.array_equal(cen.q_values(obs), dist.q_values(obs))
    b = _dqn_batch(rng, N=1)
    assert cen.train_on(b) == dist.train_agent(0, b)
    assert np.array_equal(cen.q_values(obs), dist.q_values(obs))


def test_centralized_greedy_is_deterministic():
    agent = CentralizedDqn(4, DqnConfig(hidden=16), seed=6)
    obs = np.random.default_rng(19).random((4, 6))
    a1 = centralized_step(agent, obs, 0.0, np.random.default_rng(1))
    a2 = centralized_step(agent, obs, 0.0, np.random.default_rng(2))
    assert a1.shape == (4,) and np.array_equal(a1, a2)


def test_centralized_heads_are_factorized():
    agent = CentralizedDqn(3, DqnConfig(hidden=16), seed=7)
    obs = np.random.default_rng(20).random((3, 6))
    greedy = agent.q_values(obs).argmax(axis=1)
    W = agent.net.main["c.2.W"]
    b = agent.net.main["c.2.b"]
    cols = np.arange(W.shape[1])
    shuffled = cols.copy()
    shuffled[8:] = np.random.default_rng(21).permutation(cols[8:])
    agent.net.main["c.2.W"] = W[:, shuffled]
    agent.net.main["c.2.b"] = b[:, shuffled]
    assert agent.q_values(obs).argmax(axis=1)[0] == greedy[0]


def test_centralized_trains_on_summed_reward():
    rng = np.random.default_rng(22)
    agent = CentralizedDqn(2, DqnConfig(hidden=16), seed=8)
    b = _dqn_batch(rng, S=4)
    b.done[:] = True
    x = b.obs.reshape(4, -1)
    q = dqn_forward(x, agent.net.main, "c", 2)
    qa = np.take_along_axis(q, b.actions[..., None], axis=-1)[..., 0]
    expect = np.mean((b.rewards.sum(axis=1)[:, None] - qa) ** 2)
    assert agent.train_on(b) == pytest.approx(expect, rel=1e-12)


# -- replay ----------------------------------------------------------------------

def _exp(k, n=2, reward=1.0, done=False):
    return Experience(np.full((n, 6), k / 1000), np.zeros(n, int), np.zeros((n, 6)), np.full(n, reward),
                      [], np.ones((n, n), bool), np.full(n, done))


def test_replay_uniform_sampling():
    buf = ReplayBuffer(1000, seed=23)
    for k in range(1000):
        buf.add(_exp(k))
    n = 10**5
    counts = np.bincount(np.concatenate([buf.sample_indices(1) for _ in range(n)]), minlength=1000)
    sigma = np.sqrt(n * 1e-3 * (1 - 1e-3))
    z = np.abs(counts - n / 1000) / sigma
    # about 0.27% of entries land beyond 3 sigma by chance alone
    assert (z > 3).mean() < 0.01 and z.max() < 5
    chi2 = ((counts - n / 1000) ** 2 / (n / 1000)).sum()
    assert chi2 < 1150  # ~0.001 critical value for 999 degrees of freedom


def test_replay_batch_has_no_repeats():
    buf = ReplayBuffer(50, seed=0)
    for k in range(50):
        buf.add(_exp(k))
    idx = buf.sample_indices(50)
    assert sorted(idx) == list(range(50))


def test_replay_ring_overwrites_oldest():
    buf = ReplayBuffer(3, seed=0)
    for k in range(5):
        buf.add(_exp(k))
    assert len(buf) == 3
    assert sorted(round(buf[i].obs[0, 0] * 1000) for i in range(3)) == [2, 3, 4]


def test_replay_state_errors():
    buf = ReplayBuffer(10, seed=0)
    with pytest.raises(StateError):
        buf.sample(1)
    buf.add(_exp(0))
    with pytest.raises(StateError):
        buf.sample(2)


def test_strict_filters():
    dgn = make_policy("dgn", 2, strict=True)
    dist = make_policy("madqn-dist", 2, strict=True)
    for pol in (dgn, dist):
        pol.remember(_exp(0, reward=1.0, done=False))
        pol.remember(_exp(1, reward=-1.0, done=True))
    assert dgn.buffer.eligible(dgn._keep()).tolist() == [0]
    assert len(dist.buffer.eligible(lambda e: bool(e.done[0]))) == 1


# -- policies and training loop ------------------------------------------------

def test_make_policy_names():
    assert make_policy("dgn", 4, conv_layers=1).cfg.conv_layers == 1
    assert make_policy("madqn-central", 4).name == "madqn-central"
    with pytest.raises(ConfigError):
        make_policy("a3c", 4)
    with pytest.raises(ConfigError):
        make_policy("pq", 4).load_state(make_policy("dgn", 4).state())


def _tiny_env(seed=0, scheduler="wfq"):
    sc = build_sdwan_scenario(3, "internet", snapshot=0.5)
    return sc, QueueingEnv(sc, EnvConfig(snapshot=0.5, seed=seed, scheduler=scheduler))


def test_pq_policy_leaves_weights_and_matches_direct_simulation():
    sc, env = _tiny_env(scheduler="pq")
    pq = make_policy("pq", sc.n_agents)
    obs = env.reset(weights=[(0.5, 0.3, 0.2)] * sc.n_agents)
    sim = Simulator(sc.topology, sc.flows, seed=int(np.random.default_rng(0).integers(2**31)), scheduler="pq")
    sim.run(0.5)
    sim.collect_snapshot(0.5)
    tp = np.zeros(3)
    for k in range(100):
        _, _, _, info = env.step(pq.act(env.features(obs), env.mask, 0.0, None))
        assert info.weights == [(0.5, 0.3, 0.2)] * sc.n_agents
        sim.run(sim.now + 0.5)
        direct = sim.collect_snapshot(0.5)
        assert direct.group_throughput == info.metrics.group_throughput
        if all(o > 10e6 for o in info.metrics.group_offered):
            tp += info.metrics.group_throughput
    assert tp[2] < tp[1] < tp[0]


def test_training_loop_logs_and_learns():
    sc, env = _tiny_env(1)
    pol = make_policy("dgn", sc.n_agents, seed=1)
    pol.agent = DgnAgent(sc.n_agents, SMALL, seed=1)
    pol.cfg = pol.agent.cfg
    log = io.StringIO()
    res = train(env, pol, TrainConfig(steps=45, episode_len=15, warmup=40, seed=1), log)
    lines = [json.loads(l) for l in log.getvalue().splitlines()]
    assert len(lines) == 45 and lines[0]["loss"] is None
    assert lines[-1]["loss"] is not None and len(res.loss_curve()) == 6
    assert len(pol.buffer) == 45


def test_training_detects_divergence(monkeypatch):
    sc, env = _tiny_env(2)
    pol = make_policy("madqn-dist", sc.n_agents)
    monkeypatch.setattr(pol, "learn", lambda: float("nan"))
    with pytest.raises(DivergenceError):
        train(env, pol, TrainConfig(steps=3, warmup=1))


def test_learning_signal_variants():
    rewards = np.array([[2.0, -1.0, 10.8]])
    dones = np.array([[0.0, 1.0, 1.0]])
    best = [10.8, 5.0, 10.8]
    r, d = TrainConfig().learning_signal(rewards, dones, best)
    np.testing.assert_allclose(r, [[-8.8, -6.0, 0.0]])
    assert not d.any()
    r, d = TrainConfig.literal().learning_signal(rewards, dones, best)
    np.testing.assert_array_equal(r, rewards)
    np.testing.assert_array_equal(d, dones)


@pytest.mark.parametrize("kw", [{"reward": "shaped"}, {"bootstrap": "never"}])
def test_learning_signal_rejects_unknown(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**kw)


def test_strict_filter_needs_literal_signal():
    sc, env = _tiny_env(3)
    pol = make_policy("dgn", sc.n_agents, strict=True)
    with pytest.raises(ConfigError):
        train(env, pol, TrainConfig(steps=2, warmup=1))
