"""Training loops: multi-state offline mode and single-state online mode.

Both modes repeat the same inner step: split one state's measurement
records at random into a context part and a query part, aggregate the
context into a representation, run the posterior-assisted generation
network on every query, and take the mean loss over queries. In multi-state
mode the optimizer steps once per batch of states (gradients accumulate
across the batch and are normalized by its size); in single-state mode
there is exactly one state and one step per epoch.

Checkpoints carry parameters, optimizer moments, the generator state of the
training RNG and the loss history, so an interrupted run resumed from disk
is bit-identical to an uninterrupted one.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import fileio, nn
from .autodiff import Tape
from .model import (
    HyperParams,
    ModelParams,
    aggregate,
    gen_forward_posterior,
    loss as model_loss,
    rep_forward,
)


class NumericsError(RuntimeError):
    """Training diverged or produced non-finite values."""


@dataclass
class StateExample:
    """All measurement records of one state: rows of (m, p) plus metadata.

    The metadata (family label, generating parameters) is never shown to the
    network; it exists for evaluation grouping and for rebuilding states in
    the noise harness.
    """

    m: np.ndarray
    p: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.m.ndim != 2 or self.p.ndim != 2 or len(self.m) != len(self.p):
            raise ValueError("records need matching (n, m_dim) and (n, k) blocks")

    def __len__(self):
        return len(self.m)


@dataclass
class TrainConfig:
    hyper: HyperParams
    epochs: int
    max_context: int  # largest context size drawn per state per epoch
    batch_size: int = 20
    lr: float = 0.01
    lr_half_life: float = 50.0
    seed: int = 0
    family_weights: dict | None = None
    divergence_patience: int = 20

    def to_dict(self):
        return {
            "hyper": self.hyper.to_dict(),
            "epochs": self.epochs,
            "max_context": self.max_context,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "lr_half_life": self.lr_half_life,
            "seed": self.seed,
            "family_weights": self.family_weights,
            "divergence_patience": self.divergence_patience,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["hyper"] = HyperParams.from_dict(d["hyper"])
        return cls(**d)

    def resume_key(self):
        """Fields that must match when resuming (epochs may grow)."""
        d = self.to_dict()
        d.pop("epochs")
        return d


@dataclass
class Checkpoint:
    params: ModelParams
    adam: nn.AdamState
    epoch: int  # number of completed epochs
    rng_state: dict
    loss_history: list
    config: dict
    mode: str = "multi"


def lr_schedule(epoch, lr0, half_life=50.0):
    """Learning rate after `epoch` full epochs: lr0 halved every half_life."""
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    return lr0 * 0.5 ** (epoch / float(half_life))


def _state_loss(params, config, state, ctx_idx, qry_idx, rng):
    """Forward + backward for one state split; returns the loss value."""
    hp = config.hyper
    with Tape() as tape:
        reps = rep_forward(params.rep, state.m[ctx_idx], state.p[ctx_idx])
        r = aggregate(reps)
        pred, traces = gen_forward_posterior(
            params.gen, hp, r, state.m[qry_idx], state.p[qry_idx], rng
        )
        value = model_loss(pred, state.p[qry_idx], traces)
    ad.backward(tape, value)
    return float(value.data)


def _apply_step(params, adam, count, lr):
    tensors = params.tensors()
    grads = [
        np.zeros_like(t.data) if t.grad is None else t.grad / count for t in tensors
    ]
    nn.adam_step(adam, tensors, grads, lr)
    ad.zero_grads(tensors)


def _epoch_order(rng, states, config):
    n = len(states)
    if not config.family_weights:
        return rng.permutation(n)
    families = [s.meta.get("family", "") for s in states]
    counts = Counter(families)
    weights = np.array(
        [config.family_weights.get(f, 1.0) / counts[f] for f in families]
    )
    weights = weights / weights.sum()
    return rng.choice(n, size=n, replace=True, p=weights)


def _check_context_bound(states, config):
    smallest = min(len(s) for s in states)
    if not 1 <= config.max_context < smallest:
        raise ValueError(
            f"max_context={config.max_context} must lie in [1, {smallest - 1}] "
            "so every state keeps at least one query record"
        )


def _divergence_guard(history, patience):
    if not np.isfinite(history[-1]):
        raise NumericsError(
            f"non-finite loss {history[-1]} at epoch {len(history) - 1}"
        )
    if len(history) <= patience:
        return
    base = history[0]
    ceiling = base + 10.0 * abs(base)
    if all(h > ceiling for h in history[-patience:]):
        raise NumericsError(
            f"loss stuck above 10x its initial magnitude for {patience} epochs "
            f"(initial {base:.4g}, last {history[-1]:.4g})"
        )


def _run_epochs(states, config, ckpt, single, progress):
    rng = np.random.default_rng(config.seed)
    if ckpt.epoch > 0 or ckpt.rng_state:
        rng.bit_generator.state = ckpt.rng_state
    params, adam = ckpt.params, ckpt.adam
    history = ckpt.loss_history
    n = len(states)
    for epoch in range(ckpt.epoch, config.epochs):
        lr = lr_schedule(epoch, config.lr, config.lr_half_life)
        order = [0] * n if single else _epoch_order(rng, states, config)
        epoch_losses = []
        pending = 0
        for idx in order:
            state = states[idx]
            n1 = int(rng.integers(1, config.max_context + 1))
            perm = rng.permutation(len(state))
            value = _state_loss(params, config, state, perm[:n1], perm[n1:], rng)
            epoch_losses.append(value)
            pending += 1
            if single or pending == config.batch_size:
                _apply_step(params, adam, pending, lr)
                pending = 0
        if pending:
            _apply_step(params, adam, pending, lr)
        history.append(float(np.mean(epoch_losses)))
        ckpt.epoch = epoch + 1
        ckpt.rng_state = rng.bit_generator.state
        if progress is not None:
            progress(epoch, history[-1], lr)
        _divergence_guard(history, config.divergence_patience)
    return ckpt


def _fresh_checkpoint(config, mode):
    rng = np.random.default_rng(config.seed)
    params = ModelParams.init(config.hyper, rng)
    adam = nn.AdamState.for_params(params.tensors())
    return Checkpoint(
        params=params,
        adam=adam,
        epoch=0,
        rng_state=rng.bit_generator.state,
        loss_history=[],
        config=config.to_dict(),
        mode=mode,
    )


def _resume_or_fresh(config, resume, mode):
    if resume is None:
        return _fresh_checkpoint(config, mode)
    if resume.mode != mode:
        raise ValueError(f"checkpoint was trained in {resume.mode!r} mode")
    saved = TrainConfig.from_dict(resume.config)
    if saved.resume_key() != config.resume_key():
        raise ValueError(
            "resume refused: checkpoint hyperparameters/config do not match"
        )
    resume.config = config.to_dict()
    return resume


def train_multi(states, config, resume=None, progress=None):
    """Offline training over many states; one optimizer step per batch."""
    states = list(states)
    if not states:
        raise ValueError("empty training set")
    _check_context_bound(states, config)
    if config.batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    ckpt = _resume_or_fresh(config, resume, "multi")
    return _run_epochs(states, config, ckpt, single=False, progress=progress)


def train_single(records, config, resume=None, progress=None):
    """Unsupervised training on the records of one state.

    Every epoch resamples one context/query split of the s performed
    measurements and takes one optimizer step; the fiducial measurement set
    is exactly the performed set.
    """
    if len(records) < 2:
        raise ValueError("single-state training needs at least 2 records")
    _check_context_bound([records], config)
    ckpt = _resume_or_fresh(config, resume, "single")
    return _run_epochs([records], config, ckpt, single=True, progress=progress)


# ---------------------------------------------------------------------------
# checkpoint files
# ---------------------------------------------------------------------------

def _rng_state_to_json(state):
    return {
        "bit_generator": state["bit_generator"],
        "state": {k: str(v) for k, v in state["state"].items()},
        "has_uint32": state["has_uint32"],
        "uinteger": state["uinteger"],
    }


def _rng_state_from_json(obj):
    return {
        "bit_generator": obj["bit_generator"],
        "state": {k: int(v) for k, v in obj["state"].items()},
        "has_uint32": obj["has_uint32"],
        "uinteger": obj["uinteger"],
    }


def save_checkpoint(ckpt, path):
    names = ckpt.params.names()
    if len(set(names)) != len(names):
        raise ValueError("parameter names must be unique")
    header = {
        "type": "checkpoint",
        "mode": ckpt.mode,
        "hyper": ckpt.params.hyper.to_dict(),
        "config": ckpt.config,
        "epoch": ckpt.epoch,
        "rng_state": _rng_state_to_json(ckpt.rng_state),
        "loss_history": [float(x) for x in ckpt.loss_history],
        "adam": {
            "t": ckpt.adam.t,
            "beta1": ckpt.adam.beta1,
            "beta2": ckpt.adam.beta2,
            "eps": ckpt.adam.eps,
        },
        "param_names": names,
    }
    arrays = {}
    for name, tensor in zip(names, ckpt.params.tensors()):
        arrays[f"param/{name}"] = tensor.data
    for name, m in zip(names, ckpt.adam.m):
        arrays[f"adam_m/{name}"] = m
    for name, v in zip(names, ckpt.adam.v):
        arrays[f"adam_v/{name}"] = v
    fileio.write_blocks(path, header, arrays)


def load_checkpoint(path):
    header, arrays = fileio.read_blocks(path)
    if header.get("type") != "checkpoint":
        raise fileio.DataError(f"{path}: not a checkpoint file")
    hyper = HyperParams.from_dict(header["hyper"])
    params = ModelParams.init(hyper, np.random.default_rng(0))
    names = header["param_names"]
    tensors = params.tensors()
    if names != params.names():
        raise fileio.DataError(f"{path}: parameter layout does not match hyper")
    for name, tensor in zip(names, tensors):
        stored = arrays[f"param/{name}"]
        if stored.shape != tensor.data.shape:
            raise fileio.DataError(
                f"{path}: shape mismatch for {name}: {stored.shape} vs "
                f"{tensor.data.shape}"
            )
        tensor.data = stored
    adam = nn.AdamState(
        t=int(header["adam"]["t"]),
        m=[arrays[f"adam_m/{n}"] for n in names],
        v=[arrays[f"adam_v/{n}"] for n in names],
        beta1=header["adam"]["beta1"],
        beta2=header["adam"]["beta2"],
        eps=header["adam"]["eps"],
    )
    return Checkpoint(
        params=params,
        adam=adam,
        epoch=int(header["epoch"]),
        rng_state=_rng_state_from_json(header["rng_state"]),
        loss_history=list(header["loss_history"]),
        config=header["config"],
        mode=header.get("mode", "multi"),
    )
