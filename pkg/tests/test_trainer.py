import math

import numpy as np
import pytest

from dlstm.data import Shard, build_samples, fit_normalizer, gen_synthetic, shard_dataset
from dlstm.graph import build_topology, contraction_factor, metropolis_weights, named_topology
from dlstm.lstm import LstmParams, init_params, loss_and_gradient
from dlstm.trainer import (AgentState, TrainConfig, TrainingDivergence, consensus_round,
                           descent_step, disagreement, local_gradient_step, train, train_cbl,
                           train_centralized, train_lbc)


@pytest.fixture(scope="module")
def small():
    recs = gen_synthetic(120, 3)
    samples = build_samples(recs, fit_normalizer(recs[:100]))
    return samples[:88], Shard(tuple(samples[88:100]), "validation")


def cfg(**kw):
    base = dict(epochs=5, learning_rate=0.3, hidden_size=4, seed=3)
    base.update(kw)
    return TrainConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(schedule="ADMM")
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=1.5)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(consensus_rounds=0)
    assert TrainConfig(schedule="cbl").schedule == "CBL"


def test_disagreement_examples(rng):
    assert disagreement([np.ones(3), np.ones(3)]) == 0.0
    assert disagreement([np.zeros(1), np.array([3.0])]) == 3.0
    vs = [rng.normal(size=4) for _ in range(5)]
    assert disagreement(vs) == disagreement(vs[::-1])
    with pytest.raises(ValueError):
        disagreement([np.zeros(2), np.zeros(3)])


def test_consensus_round_examples():
    half = np.full((2, 2), 0.5)
    out = consensus_round([np.array([0.0]), np.array([2.0])], half, 1)
    assert [o[0] for o in out] == [1.0, 1.0]
    same = [np.array([1.5, -2.0])] * 4
    W = metropolis_weights(named_topology("ring", 4))
    for o in consensus_round(same, W, 20):
        np.testing.assert_allclose(o, same[0], atol=1e-15)
    with pytest.raises(ValueError):
        consensus_round([np.zeros(2), np.zeros(3)], half, 1)
    with pytest.raises(ValueError):
        consensus_round([np.zeros(2)] * 3, half, 1)


@pytest.mark.parametrize("name, n", [("ring", 4), ("ring", 6), ("path", 5), ("star", 5),
                                     ("complete", 4), ("path", 3)])
def test_consensus_mean_and_spectral_decay(name, n, rng):
    W = metropolis_weights(named_topology(name, n))
    lam = contraction_factor(W)
    X = [rng.normal(size=7) for _ in range(n)]
    mean0 = np.mean(X, axis=0)
    for K in (1, 5, 20):
        Y = consensus_round(X, W, K)
        np.testing.assert_allclose(np.mean(Y, axis=0), mean0, atol=1e-12)
        dev0 = np.linalg.norm(np.array(X) - mean0)
        dev = np.linalg.norm(np.array(Y) - mean0)
        assert dev <= lam ** K * dev0 + 1e-9


@pytest.mark.parametrize("name, n", [("ring", 4), ("star", 5), ("path", 3), ("complete", 5)])
def test_pairwise_disagreement_contracts(name, n, rng):
    W = metropolis_weights(named_topology(name, n))
    lam = contraction_factor(W)
    for _ in range(20):
        X = [rng.normal(size=5) for _ in range(n)]
        for K in (1, 5, 20):
            assert disagreement(consensus_round(X, W, K)) <= lam ** K * disagreement(X) + 1e-9


def test_local_step_identities(small):
    samples, _ = small
    p = init_params(3, 4, 2, seed=0)
    a = AgentState(0, p, None, 0.0)
    np.testing.assert_array_equal(local_gradient_step(a, samples[:5]).flat(), p.flat())
    a = AgentState(0, p, None, 0.5)
    before = p.flat().copy()
    phi = local_gradient_step(a, samples[:5])
    np.testing.assert_array_equal(a.params.flat(), before)
    _, g = loss_and_gradient(p, samples[:5])
    np.testing.assert_array_equal(phi.flat(), before - 0.5 * g)
    with pytest.raises(ValueError):
        local_gradient_step(a, [])


def test_descent_step_on_quadratic():
    theta = np.array([0.0])
    grad = 2 * (theta - 3)
    assert descent_step(theta, grad, 0.1)[0] == pytest.approx(0.6)


def test_single_agent_lbc_and_cbl_are_plain_gradient_descent(small):
    samples, val = small
    shard = Shard(tuple(samples))
    g1 = build_topology(1)
    c = cfg(epochs=4)
    theta = init_params(3, 4, 2, seed=c.seed).flat()
    for _ in range(4):
        _, grad = loss_and_gradient(LstmParams.from_flat(theta, 3, 4, 2), samples)
        theta = theta - c.learning_rate * grad
    for rep in (train_lbc(c, [shard], g1, val), train_cbl(c, [shard], g1, val),
                train_centralized(c, shard, val)):
        np.testing.assert_array_equal(rep.consensus_params, theta)


def test_centralized_equals_lbc_with_one_agent_step_for_step(small):
    samples, val = small
    shard = Shard(tuple(samples))
    c = cfg(epochs=6, batch_size=16)
    a = train_lbc(c, [shard], build_topology(1), val, record_trajectory=True)
    b = train_centralized(c, shard, val, record_trajectory=True)
    for ta, tb in zip(a.trajectory, b.trajectory):
        np.testing.assert_array_equal(ta[0], tb[0])
    assert a.train_loss == b.train_loss


def test_identical_shards_match_centralized(small):
    samples, val = small
    shard = Shard(tuple(samples[:30]))
    union = Shard(tuple(samples[:30]) * 4)
    c = cfg(epochs=10)
    g = named_topology("complete", 4)
    lbc = train_lbc(c, [shard] * 4, g, val, record_trajectory=True)
    cbl = train_cbl(c, [shard] * 4, g, val, record_trajectory=True)
    cen = train_centralized(c, union, val, record_trajectory=True)
    for e in range(10):
        for agent in range(4):
            assert np.max(np.abs(lbc.trajectory[e][agent] - cen.trajectory[e][0])) <= 1e-10
            assert np.max(np.abs(cbl.trajectory[e][agent] - lbc.trajectory[e][agent])) <= 1e-10


def test_centralized_loss_non_increasing_small_step(small):
    samples, val = small
    rep = train_centralized(cfg(epochs=30, learning_rate=0.05), Shard(tuple(samples)), val)
    losses = [l[0] for l in rep.train_loss]
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


@pytest.mark.parametrize("schedule", ["LBC", "CBL"])
def test_determinism_and_worker_independence(small, schedule):
    samples, val = small
    shards = shard_dataset(samples, 4)
    g = named_topology("ring", 4)
    c = cfg(schedule=schedule, batch_size=8)
    a = train(c, shards, g, val, workers=1)
    b = train(c, shards, g, val, workers=4)
    assert a.to_dict() == b.to_dict()


@pytest.mark.parametrize("name, n", [("ring", 4), ("path", 4), ("star", 5), ("complete", 3),
                                     ("ring", 6)])
@pytest.mark.parametrize("schedule", ["LBC", "CBL"])
def test_final_agreement(small, name, n, schedule):
    samples, val = small
    rep = train(cfg(schedule=schedule, batch_size=10, consensus_rounds=2),
                shard_dataset(samples, n, "round_robin"), named_topology(name, n), val)
    assert rep.final_disagreement <= 1e-6
    assert disagreement(rep.agent_params) <= 1e-6
    np.testing.assert_allclose(rep.consensus_params, np.mean(rep.agent_params, axis=0), atol=1e-12)


def test_report_shapes(small):
    samples, val = small
    rep = train(cfg(schedule="LBC", epochs=3), shard_dataset(samples, 4), named_topology("ring", 4), val)
    assert rep.epochs == 3
    assert len(rep.val_loss) == len(rep.mean_val_loss) == len(rep.disagreement) == 3
    assert all(len(row) == 4 for row in rep.train_loss)
    assert all(d >= 0 and math.isfinite(d) for d in rep.disagreement)
    assert len(rep.history_rows()) == 12
    for key in ("local_seconds", "local_parallel_seconds", "consensus_seconds", "total_seconds"):
        assert rep.timings[key] >= 0


def test_per_batch_cadence_runs(small):
    samples, val = small
    shards = shard_dataset(samples, 3)
    rep = train(cfg(batch_size=7, consensus_every_batch=True), shards, named_topology("path", 3), val)
    assert rep.final_disagreement <= 1e-6


def test_rejects_bad_graphs(small):
    samples, val = small
    shards = shard_dataset(samples, 3)
    with pytest.raises(ValueError, match="not connected"):
        train_lbc(cfg(), shards, build_topology(3, [(0, 1)]), val)
    with pytest.raises(ValueError, match="4 agents"):
        train_lbc(cfg(), shards, named_topology("ring", 4), val)


def test_divergence_reports_epoch(rng):
    # targets far outside the unit scale make a unit step overshoot geometrically
    from conftest import random_samples
    from dlstm.lstm import SequenceSample
    bad = [SequenceSample(s.steps, s.readout_context, 200.0) for s in random_samples(rng, 8, 3, 3, 2)]
    with pytest.raises(TrainingDivergence) as info:
        train_centralized(cfg(epochs=500, learning_rate=1.0), Shard(tuple(bad)), None)
    assert info.value.epoch >= 1
    assert info.value.epoch - 1 <= info.value.report.epochs <= info.value.epoch
