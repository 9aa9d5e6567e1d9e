"""Prediction quality harness, online updating, and the regime classifier.

Prediction quality is the classical fidelity sum_j sqrt(p_j q_j) between
the predicted and true outcome distributions (the Bhattacharyya overlap;
a uniform guess against Haar-random six-qubit states scores about 0.888
under this convention, which pins it down against the squared variant).
``evaluate`` draws a random performed subset per test state, optionally
corrupts the context statistics with one of the supported noise channels,
predicts every remaining measurement deterministically and aggregates
mean/worst fidelities per state and per group.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import cv, spin
from .autodiff import Tensor
from .model import gen_forward_prior, predict, rep_forward
from .nn import AdamState, DenseParams, adam_step
from . import autodiff as ad
from .autodiff import Tape


def classical_fidelity(p, q):
    """Bhattacharyya overlap of two discrete distributions, in [0, 1]."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    q = np.clip(np.asarray(q, dtype=float), 0.0, None)
    if p.shape != q.shape:
        raise ValueError(f"distribution lengths differ: {p.shape} vs {q.shape}")
    return float(np.sqrt(p * q).sum())


def make_representation(params, m_ctx, p_ctx):
    """Aggregate context records into the state representation (no tape).

    Records are pushed through the representation network one at a time and
    summed left to right: the same float operations the online path
    performs, so an online running mean and a batch aggregate of the same
    records are bit-identical.
    """
    m2 = np.atleast_2d(np.asarray(m_ctx, dtype=np.float64))
    p2 = np.atleast_2d(np.asarray(p_ctx, dtype=np.float64))
    total = None
    for i in range(len(m2)):
        r_i = rep_forward(params.rep, m2[i], p2[i]).data
        total = r_i.copy() if total is None else total + r_i
    return total / len(m2)


def predict_distributions(params, r_vec, m_queries):
    """Deterministic prediction for each query row: (Q, k) distributions."""
    r = Tensor(np.asarray(r_vec, dtype=np.float64), _check=False)
    pred = gen_forward_prior(params.gen, params.hyper, r, np.atleast_2d(m_queries))
    return predict(pred)


@dataclass
class FidelityReport:
    """Per-state rows plus the aggregates used in the result tables."""

    rows: list
    condition: str = "noiseless"

    def grand_mean(self):
        return float(np.mean([r["mean_fidelity"] for r in self.rows]))

    def grand_worst(self):
        """Worst case over queries, averaged over test states."""
        return float(np.mean([r["worst_fidelity"] for r in self.rows]))

    def by_group(self, key="family"):
        groups = {}
        for r in self.rows:
            groups.setdefault(r.get(key, ""), []).append(r)
        return {
            g: {
                "mean_fidelity": float(np.mean([r["mean_fidelity"] for r in rs])),
                "worst_fidelity": float(np.mean([r["worst_fidelity"] for r in rs])),
                "states": len(rs),
            }
            for g, rs in sorted(groups.items())
        }

    def to_csv(self):
        out = io.StringIO()
        out.write("state_index,family,param,mean_fidelity,worst_fidelity,"
                  "n_queries,condition\n")
        for r in self.rows:
            out.write(
                f"{r['state_index']},{r.get('family', '')},{r.get('param', '')},"
                f"{r['mean_fidelity']:.10f},{r['worst_fidelity']:.10f},"
                f"{r['n_queries']},{self.condition}\n"
            )
        return out.getvalue()

    def format_table(self):
        lines = [
            f"condition: {self.condition}",
            f"{'group':<28}{'states':>8}{'avg fidelity':>14}{'worst':>10}",
        ]
        for g, agg in self.by_group().items():
            lines.append(
                f"{g or '(all)':<28}{agg['states']:>8}"
                f"{agg['mean_fidelity']:>14.4f}{agg['worst_fidelity']:>10.4f}"
            )
        lines.append(
            f"{'overall':<28}{len(self.rows):>8}{self.grand_mean():>14.4f}"
            f"{self.grand_worst():>10.4f}"
        )
        return "\n".join(lines)


def _corrupt_context(state, sel, rng, shots, noise_sigma, phase_sigma, phases,
                     state_builder):
    ctx_p = state.p[sel].copy()
    if phase_sigma > 0:
        if phases is None or state_builder is None:
            raise ValueError(
                "phase jitter needs the measurement phases and a state builder"
            )
        fock = state_builder(state.meta)
        for row, i in enumerate(sel):
            theta = cv.jitter_phase(phases[i], phase_sigma, rng)
            ctx_p[row] = cv.homodyne_distribution(fock, theta)
    if shots:
        for row in range(len(ctx_p)):
            ctx_p[row] = spin.sample_shots(ctx_p[row], shots, rng)
    if noise_sigma > 0:
        for row in range(len(ctx_p)):
            ctx_p[row] = cv.add_probability_noise(ctx_p[row], noise_sigma, rng)
    return ctx_p


def _condition_label(shots, noise_sigma, phase_sigma):
    parts = []
    if shots:
        parts.append(f"shots={shots}")
    if noise_sigma > 0:
        parts.append(f"noise_sigma={noise_sigma}")
    if phase_sigma > 0:
        parts.append(f"phase_sigma={phase_sigma}")
    return ",".join(parts) if parts else "noiseless"


def evaluate(params, states, context_size, seed, shots=0, noise_sigma=0.0,
             phase_sigma=0.0, phases=None, state_builder=None):
    """Fidelity report over test states.

    Per state: draw a random performed subset of `context_size` records,
    apply the requested corruption to the context statistics only, predict
    every remaining measurement, and score against the clean truth.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for idx, state in enumerate(states):
        n = len(state)
        if context_size >= n:
            raise ValueError(f"context_size={context_size} needs < {n} records")
        sel = rng.choice(n, size=context_size, replace=False)
        qry = np.setdiff1d(np.arange(n), sel)
        ctx_p = _corrupt_context(state, sel, rng, shots, noise_sigma, phase_sigma,
                                 phases, state_builder)
        r = make_representation(params, state.m[sel], ctx_p)
        preds = predict_distributions(params, r, state.m[qry])
        fids = np.array(
            [classical_fidelity(pred, truth)
             for pred, truth in zip(preds, state.p[qry])]
        )
        rows.append({
            "state_index": idx,
            "family": state.meta.get("family", ""),
            "param": state.meta.get("param", ""),
            "mean_fidelity": float(fids.mean()),
            "worst_fidelity": float(fids.min()),
            "n_queries": len(qry),
        })
    return FidelityReport(rows, _condition_label(shots, noise_sigma, phase_sigma))


@dataclass
class OnlineTrace:
    """Per-step representation and fidelity summary of an online run."""

    reps: np.ndarray  # (steps, d_r)
    mean_fidelity: np.ndarray
    worst_fidelity: np.ndarray


def online_run(params, state, order, steps=None):
    """Feed records one at a time, updating the representation incrementally.

    The representation after step i is the running mean of the i per-record
    vectors (kept as an explicit running sum, so it is bit-identical to
    re-aggregating the first i records). After every step, all measurements
    not yet performed are predicted and scored.
    """
    order = np.asarray(order, dtype=int)
    if steps is None:
        steps = len(order)
    if steps < 1 or steps > len(order):
        raise ValueError("steps must be in [1, len(order)]")
    if steps >= len(state):
        raise ValueError("need at least one unmeasured query at the last step")
    d_r = params.hyper.d_r
    running = np.zeros(d_r)
    reps = np.empty((steps, d_r))
    mean_f = np.empty(steps)
    worst_f = np.empty(steps)
    all_idx = np.arange(len(state))
    for i in range(steps):
        idx = order[i]
        r_i = make_representation(params, state.m[idx], state.p[idx])
        running = running + r_i
        rep = running / (i + 1)
        reps[i] = rep
        qry = np.setdiff1d(all_idx, order[: i + 1])
        preds = predict_distributions(params, rep, state.m[qry])
        fids = np.array(
            [classical_fidelity(pred, truth)
             for pred, truth in zip(preds, state.p[qry])]
        )
        mean_f[i] = fids.mean()
        worst_f[i] = fids.min()
    return OnlineTrace(reps=reps, mean_fidelity=mean_f, worst_fidelity=worst_f)


# ---------------------------------------------------------------------------
# supervised regime classifier on state representations
# ---------------------------------------------------------------------------

@dataclass
class RegimeClassifier:
    hidden: DenseParams
    out: DenseParams
    classes: tuple = (0, 1)

    def logit(self, r):
        h = np.tanh(self.hidden.w.data @ np.asarray(r, float) + self.hidden.b.data)
        return float((self.out.w.data @ h + self.out.b.data)[0])

    def classify(self, r):
        return self.classes[1] if self.logit(r) > 0 else self.classes[0]


def train_regime_classifier(representations, labels, seed=0, hidden_width=32,
                            epochs=300, lr=0.01):
    """One-hidden-layer binary classifier trained with Adam + cross-entropy."""
    X = np.asarray(representations, dtype=np.float64)
    y = np.asarray(labels)
    classes = tuple(sorted(set(y.tolist())))
    if len(classes) != 2:
        raise ValueError(f"need exactly two classes, got {classes}")
    y01 = (y == classes[1]).astype(np.float64)
    rng = np.random.default_rng(seed)
    hidden = DenseParams.init(rng, hidden_width, X.shape[1], name="clf_hidden")
    out = DenseParams.init(rng, 1, hidden_width, name="clf_out")
    tensors = hidden.tensors() + out.tensors()
    adam = AdamState.for_params(tensors)
    targets = y01[:, None]
    for _ in range(epochs):
        with Tape() as tape:
            h = ad.tanh(ad.affine(Tensor(X, _check=False), hidden.w, hidden.b))
            z = ad.affine(h, out.w, out.b)
            # binary cross-entropy in the stable softplus form
            bce = ad.subtract(ad.softplus(z), ad.multiply(z, targets))
            value = ad.reduce_mean(bce)
        grads = ad.gradients(tape, value, tensors)
        adam_step(adam, tensors, grads, lr)
    return RegimeClassifier(hidden=hidden, out=out, classes=classes)


def classifier_accuracy(clf, representations, labels):
    hits = sum(
        clf.classify(r) == label for r, label in zip(representations, labels)
    )
    return hits / len(labels)
