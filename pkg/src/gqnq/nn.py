"""Neural building blocks on top of the autodiff tape.

Dense layers, a standard LSTM cell, diagonal-Gaussian utilities
(reparameterized sampling, log density, KL divergence) and the Adam
optimizer. Parameters are plain ``Tensor`` leaves; all functions here are
differentiable through the tape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

LOG_2PI = float(np.log(2.0 * np.pi))

_ACTIVATIONS = {
    "tanh": ad.tanh,
    "sigmoid": ad.sigmoid,
    "identity": lambda t: t,
}


def glorot(rng, n_out, n_in):
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


@dataclass
class DenseParams:
    """Weight (out, in) and bias (out,) of one fully connected layer."""

    w: Tensor
    b: Tensor

    @classmethod
    def init(cls, rng, n_out, n_in, name=""):
        return cls(
            w=Tensor(glorot(rng, n_out, n_in), name=f"{name}.w"),
            b=Tensor(np.zeros(n_out), name=f"{name}.b"),
        )

    def tensors(self):
        return [self.w, self.b]


def dense_forward(w, b, x, activation="identity"):
    """activation(w @ x + b); x may carry a leading batch axis."""
    if activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    return _ACTIVATIONS[activation](ad.affine(x, w, b))


@dataclass
class LSTMParams:
    """Fused gate parameters: w (4*hidden, in+hidden), b (4*hidden,).

    Gate order along the fused axis is input, forget, candidate, output.
    The forget-gate bias starts at 1 so early training does not wipe the
    cell state.
    """

    w: Tensor
    b: Tensor
    hidden: int

    @classmethod
    def init(cls, rng, n_in, hidden, name=""):
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0
        return cls(
            w=Tensor(glorot(rng, 4 * hidden, n_in + hidden), name=f"{name}.w"),
            b=Tensor(b, name=f"{name}.b"),
            hidden=hidden,
        )

    def tensors(self):
        return [self.w, self.b]


def lstm_cell(params, x, h_prev, c_prev):
    """One LSTM step: returns (h, c)."""
    hdim = params.hidden
    z = ad.affine(ad.concat([x, h_prev]), params.w, params.b)
    i = ad.sigmoid(ad.slice_last(z, 0, hdim))
    f = ad.sigmoid(ad.slice_last(z, hdim, 2 * hdim))
    g = ad.tanh(ad.slice_last(z, 2 * hdim, 3 * hdim))
    o = ad.sigmoid(ad.slice_last(z, 3 * hdim, 4 * hdim))
    c = ad.add(ad.multiply(f, c_prev), ad.multiply(i, g))
    h = ad.multiply(o, ad.tanh(c))
    return h, c


@dataclass
class DiagonalGaussian:
    """Axis-aligned Gaussian with log standard deviations as free parameters."""

    mean: Tensor
    log_std: Tensor

    def __post_init__(self):
        if self.mean.data.shape != self.log_std.data.shape:
            raise ad.ShapeMismatchError(
                f"gaussian: mean {self.mean.data.shape} vs log_std "
                f"{self.log_std.data.shape}"
            )


def gaussian_sample(g, noise):
    """Reparameterized draw mean + std * noise; noise is a fixed array."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != g.mean.data.shape:
        raise ad.ShapeMismatchError(
            f"gaussian_sample: noise {noise.shape} vs mean {g.mean.data.shape}"
        )
    return ad.add(g.mean, ad.multiply(ad.exp(g.log_std), noise))


def gaussian_log_density(g, x):
    """log N(x; mean, diag std^2), summed over the last axis."""
    diff = ad.subtract(ad._lift(x), g.mean)
    inv_var = ad.exp(ad.multiply(g.log_std, -2.0))
    quad = ad.multiply(ad.multiply(ad.square(diff), inv_var), 0.5)
    per = ad.subtract(ad.multiply(g.log_std, -1.0), ad.add(quad, 0.5 * LOG_2PI))
    return ad.reduce_sum(per, axis=-1)


def gaussian_kl(a, b):
    """KL(a || b) between diagonal Gaussians, summed over the last axis.

    Written as dls + (e^{-2 dls} - 1)/2 + (mu_a - mu_b)^2 / (2 sb^2) with
    dls = log(sb/sa); each term is nonnegative, and a final clamp soaks up
    the last ~1e-16 of rounding so the result is never negative and is
    exactly zero iff the two Gaussians are identical.
    """
    dls = ad.subtract(b.log_std, a.log_std)
    spread = ad.add(dls, ad.multiply(ad.expm1(ad.multiply(dls, -2.0)), 0.5))
    dmean = ad.subtract(a.mean, b.mean)
    m2 = ad.multiply(ad.square(dmean), ad.exp(ad.multiply(b.log_std, -2.0)))
    per = ad.clamp_min(ad.add(spread, ad.multiply(m2, 0.5)), 0.0)
    return ad.reduce_sum(per, axis=-1)


@dataclass
class AdamState:
    """First/second moment accumulators for a fixed list of parameters."""

    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(
            t=0,
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(state, params, grads, lr):
    """In-place Adam update with bias correction; returns the params."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("adam_step: parameter/gradient/state lengths differ")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ad.ShapeMismatchError(
                f"adam_step: grad {g.shape} vs param {p.data.shape}"
            )
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
