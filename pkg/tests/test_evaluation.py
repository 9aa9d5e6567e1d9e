"""Fidelity harness, online updating, and the regime classifier."""

import numpy as np
import pytest

import gqnq.evaluation as ev
import gqnq.model as gm
import gqnq.training as tr
from gqnq.autodiff import Tensor

HP = gm.HyperParams(m_dim=3, k=4, d_r=4, gen_steps=2, rep_layers=(8,))


def toy_setup(n_states=3, n_records=14, seed=0):
    rng = np.random.default_rng(seed)
    params = gm.ModelParams.init(HP, rng)
    states = [
        tr.StateExample(
            m=rng.standard_normal((n_records, HP.m_dim)),
            p=rng.dirichlet(np.ones(HP.k), size=n_records),
            meta={"family": "toy", "param": f"{i}"},
        )
        for i in range(n_states)
    ]
    return params, states


def test_classical_fidelity_basics():
    p = np.array([0.2, 0.3, 0.5])
    assert ev.classical_fidelity(p, p) == pytest.approx(1.0)
    assert ev.classical_fidelity([1, 0], [0, 1]) == 0.0
    assert ev.classical_fidelity([0.5, 0.5], [1.0, 0.0]) == pytest.approx(
        np.sqrt(0.5)
    )


def test_classical_fidelity_symmetry_and_permutation():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = rng.dirichlet(np.ones(6))
        q = rng.dirichlet(np.ones(6))
        f = ev.classical_fidelity(p, q)
        assert f == pytest.approx(ev.classical_fidelity(q, p))
        assert 0.0 <= f <= 1.0 + 1e-12
        perm = rng.permutation(6)
        assert ev.classical_fidelity(p[perm], q[perm]) == pytest.approx(f)
        assert ev.classical_fidelity(p, p) == pytest.approx(1.0)


def test_evaluate_report_and_determinism():
    params, states = toy_setup()
    rep1 = ev.evaluate(params, states, context_size=5, seed=42)
    rep2 = ev.evaluate(params, states, context_size=5, seed=42)
    assert rep1.rows == rep2.rows
    assert rep1.condition == "noiseless"
    assert len(rep1.rows) == 3
    for row in rep1.rows:
        assert 0.0 <= row["worst_fidelity"] <= row["mean_fidelity"] <= 1.0
        assert row["n_queries"] == 14 - 5
    assert "overall" in rep1.format_table()
    csv = rep1.to_csv()
    assert csv.count("\n") == 4
    grouped = rep1.by_group()
    assert grouped["toy"]["states"] == 3


def test_evaluate_context_bound():
    params, states = toy_setup()
    with pytest.raises(ValueError):
        ev.evaluate(params, states, context_size=14, seed=0)


def test_evaluate_shot_noise_changes_context_only():
    params, states = toy_setup()
    clean = ev.evaluate(params, states, context_size=5, seed=7)
    shot = ev.evaluate(params, states, context_size=5, seed=7, shots=10)
    assert shot.condition == "shots=10"
    assert any(
        a["mean_fidelity"] != b["mean_fidelity"]
        for a, b in zip(clean.rows, shot.rows)
    )


def test_online_first_step_is_single_record_representation():
    params, states = toy_setup()
    state = states[0]
    trace = ev.online_run(params, state, order=np.arange(6), steps=3)
    r1 = ev.make_representation(params, state.m[0], state.p[0])
    assert np.array_equal(trace.reps[0], r1)


def test_online_matches_batch_aggregate_bitwise():
    params, states = toy_setup(seed=3)
    state = states[0]
    order = np.random.default_rng(5).permutation(len(state))[:10]
    trace = ev.online_run(params, state, order=order, steps=10)
    for i in range(10):
        sel = order[: i + 1]
        batch = ev.make_representation(params, state.m[sel], state.p[sel])
        assert np.array_equal(trace.reps[i], batch), f"step {i + 1}"


def test_online_rejects_exhausting_queries():
    params, states = toy_setup()
    with pytest.raises(ValueError):
        ev.online_run(params, states[0], order=np.arange(14), steps=14)


def test_regime_classifier_separable():
    rng = np.random.default_rng(0)
    a = rng.normal(2.0, 0.3, size=(30, 6))
    b = rng.normal(-2.0, 0.3, size=(30, 6))
    X = np.vstack([a, b])
    y = np.array(["pure"] * 30 + ["mixed"] * 30)
    clf = ev.train_regime_classifier(X, y, seed=1, epochs=150)
    assert ev.classifier_accuracy(clf, X, y) == 1.0
    assert clf.classify(np.full(6, 2.0)) == "pure"
    assert clf.classify(np.full(6, -2.0)) == "mixed"


def test_regime_classifier_label_shuffle_is_chance():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((80, 6))
    y = rng.permutation(np.array([0] * 40 + [1] * 40))
    clf = ev.train_regime_classifier(X[:60], y[:60], seed=3, epochs=100)
    acc = ev.classifier_accuracy(clf, X[60:], y[60:])
    assert 0.2 <= acc <= 0.8  # held-out accuracy stays near chance


def test_regime_classifier_rejects_single_class():
    X = np.zeros((10, 3))
    with pytest.raises(ValueError):
        ev.train_regime_classifier(X, np.zeros(10), seed=0)
