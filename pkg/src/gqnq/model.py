"""Representation + generation network for measurement-statistics prediction.

The representation network maps each (measurement parametrization m,
outcome distribution p) pair to a vector r_i; the aggregate is the plain
mean, so a state is summarized by one vector r regardless of how many
measurements were performed. The generation network is a recurrent
latent-variable model: for a query parametrization m' it iterates an LSTM
whose input at every step is (m', r, z_i), where z_i is drawn from a
per-step diagonal-Gaussian prior computed from the hidden state; a running
canvas u accumulates a linear readout of the hidden state, and the final
canvas is decoded into a diagonal Gaussian over the k outcome
probabilities. During training a second (posterior) LSTM that additionally
sees the true outcome vector proposes the latents, and the loss is the
negative predicted log density of the truth plus the per-step KL between
prior and posterior.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor


@dataclass
class HyperParams:
    """Network dimensions. Defaults follow d_h = 3 d_r and d_z = d_r."""

    m_dim: int
    k: int
    d_r: int = 32
    d_h: int | None = None
    d_z: int | None = None
    d_u: int | None = None
    gen_steps: int = 8
    rep_layers: tuple = (128, 128)
    std_floor: float = 1e-3

    def __post_init__(self):
        if self.d_h is None:
            self.d_h = 3 * self.d_r
        if self.d_z is None:
            self.d_z = self.d_r
        if self.d_u is None:
            self.d_u = self.d_h
        self.rep_layers = tuple(int(w) for w in self.rep_layers)
        if self.gen_steps < 1:
            raise ValueError("gen_steps must be >= 1")

    def to_dict(self):
        return {
            "m_dim": self.m_dim,
            "k": self.k,
            "d_r": self.d_r,
            "d_h": self.d_h,
            "d_z": self.d_z,
            "d_u": self.d_u,
            "gen_steps": self.gen_steps,
            "rep_layers": list(self.rep_layers),
            "std_floor": self.std_floor,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["rep_layers"] = tuple(d.get("rep_layers", (128, 128)))
        return cls(**d)


@dataclass
class RepNetParams:
    """Dense stack mapping concat(m, p) to a d_r representation."""

    layers: list = field(default_factory=list)

    @classmethod
    def init(cls, hp, rng):
        dims = [hp.m_dim + hp.k, *hp.rep_layers, hp.d_r]
        layers = [
            nn.DenseParams.init(rng, dims[i + 1], dims[i], name=f"rep{i}")
            for i in range(len(dims) - 1)
        ]
        return cls(layers)

    def tensors(self):
        return [t for layer in self.layers for t in layer.tensors()]


@dataclass
class GenNetParams:
    prior_head: nn.DenseParams  # h -> (mean, log_std) of z prior
    posterior_head: nn.DenseParams  # posterior h -> (mean, log_std) of z
    output_head: nn.DenseParams  # canvas -> (mean, raw_std) of prediction
    canvas: nn.DenseParams  # h -> canvas increment
    lstm_prior: nn.LSTMParams
    lstm_posterior: nn.LSTMParams

    @classmethod
    def init(cls, hp, rng):
        return cls(
            prior_head=nn.DenseParams.init(rng, 2 * hp.d_z, hp.d_h, name="prior_head"),
            posterior_head=nn.DenseParams.init(
                rng, 2 * hp.d_z, hp.d_h, name="posterior_head"
            ),
            output_head=nn.DenseParams.init(rng, 2 * hp.k, hp.d_u, name="output_head"),
            canvas=nn.DenseParams.init(rng, hp.d_u, hp.d_h, name="canvas"),
            lstm_prior=nn.LSTMParams.init(
                rng, hp.m_dim + hp.d_r + hp.d_z, hp.d_h, name="lstm_prior"
            ),
            lstm_posterior=nn.LSTMParams.init(
                rng, hp.m_dim + hp.d_r + hp.k + hp.d_h, hp.d_h, name="lstm_posterior"
            ),
        )

    def tensors(self):
        out = []
        for part in (
            self.prior_head,
            self.posterior_head,
            self.output_head,
            self.canvas,
            self.lstm_prior,
            self.lstm_posterior,
        ):
            out.extend(part.tensors())
        return out


@dataclass
class ModelParams:
    hyper: HyperParams
    rep: RepNetParams
    gen: GenNetParams

    @classmethod
    def init(cls, hyper, rng):
        return cls(hyper, RepNetParams.init(hyper, rng), GenNetParams.init(hyper, rng))

    def tensors(self):
        return self.rep.tensors() + self.gen.tensors()

    def names(self):
        return [t.name for t in self.tensors()]


def rep_forward(rep, m, p):
    """Per-record representations; rows of (m, p) map to rows of r."""
    x = ad.concat([ad._lift(m), ad._lift(p)])
    for layer in rep.layers[:-1]:
        x = nn.dense_forward(layer.w, layer.b, x, activation="tanh")
    last = rep.layers[-1]
    return nn.dense_forward(last.w, last.b, x, activation="identity")


def aggregate(rs):
    """Mean of the per-record representations (permutation invariant).

    Accepts the (s, d_r) tensor from `rep_forward` or a list of 1-D tensors.
    Summation is strictly left-to-right so an online running mean reproduces
    the batch aggregate bit for bit; permutation invariance therefore holds
    exactly in the mathematics and to float-reassociation rounding in
    practice.
    """
    if isinstance(rs, (list, tuple)):
        if len(rs) == 0:
            raise ValueError("aggregate needs at least one representation")
        total = rs[0]
        for r in rs[1:]:
            total = ad.add(total, r)
        return ad.divide(total, float(len(rs)))
    if rs.data.ndim != 2 or rs.data.shape[0] == 0:
        raise ValueError("aggregate needs a nonempty (s, d_r) tensor")
    return ad.mean_rows(rs)


def _gaussian_head(layer, h, d):
    out = ad.affine(h, layer.w, layer.b)
    return nn.DiagonalGaussian(
        mean=ad.slice_last(out, 0, d), log_std=ad.slice_last(out, d, 2 * d)
    )


def _output_gaussian(gen, hp, u):
    out = ad.affine(u, gen.output_head.w, gen.output_head.b)
    mean = ad.slice_last(out, 0, hp.k)
    std = ad.add(ad.softplus(ad.slice_last(out, hp.k, 2 * hp.k)), hp.std_floor)
    return nn.DiagonalGaussian(mean=mean, log_std=ad.log(std))


def _zeros(q, d):
    return Tensor(np.zeros((q, d)), _check=False)


def _queries_matrix(m_query):
    m = np.asarray(m_query.data if isinstance(m_query, Tensor) else m_query,
                   dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    return m


def gen_forward_prior(gen, hp, r, m_query, rng=None, sample_latent=False):
    """Predictive distribution over outcome probabilities for each query row.

    With sample_latent=False the per-step latents are the prior means and
    the result is a deterministic function of (parameters, r, m'); otherwise
    latents are reparameterized draws using `rng`.
    """
    m = _queries_matrix(m_query)
    q = m.shape[0]
    r_rows = ad.broadcast_rows(r, q) if r.data.ndim == 1 else r
    h = _zeros(q, hp.d_h)
    c = _zeros(q, hp.d_h)
    u = _zeros(q, hp.d_u)
    m_t = Tensor(m, _check=False)
    for _ in range(hp.gen_steps):
        prior = _gaussian_head(gen.prior_head, h, hp.d_z)
        if sample_latent:
            if rng is None:
                raise ValueError("sample_latent requires an rng")
            z = nn.gaussian_sample(prior, rng.standard_normal((q, hp.d_z)))
        else:
            z = prior.mean
        h, c = nn.lstm_cell(gen.lstm_prior, ad.concat([m_t, r_rows, z]), h, c)
        u = ad.add(u, ad.affine(h, gen.canvas.w, gen.canvas.b))
    return _output_gaussian(gen, hp, u)


def gen_forward_posterior(gen, hp, r, m_query, p_true, rng):
    """Training-mode forward pass.

    Runs the prior stream as in `gen_forward_prior`, but a posterior LSTM
    that additionally sees the true outcome vector (and the prior stream's
    current hidden state) proposes each latent; the prior/posterior Gaussian
    pairs of every step are returned for the KL part of the loss.
    """
    m = _queries_matrix(m_query)
    p_true = np.asarray(p_true, dtype=np.float64)
    if p_true.ndim == 1:
        p_true = p_true[None, :]
    q = m.shape[0]
    r_rows = ad.broadcast_rows(r, q) if r.data.ndim == 1 else r
    h1 = _zeros(q, hp.d_h)
    c1 = _zeros(q, hp.d_h)
    h2 = _zeros(q, hp.d_h)
    c2 = _zeros(q, hp.d_h)
    u = _zeros(q, hp.d_u)
    m_t = Tensor(m, _check=False)
    p_t = Tensor(p_true, _check=False)
    traces = []
    for _ in range(hp.gen_steps):
        prior = _gaussian_head(gen.prior_head, h1, hp.d_z)
        h2, c2 = nn.lstm_cell(
            gen.lstm_posterior, ad.concat([m_t, r_rows, p_t, h1]), h2, c2
        )
        posterior = _gaussian_head(gen.posterior_head, h2, hp.d_z)
        z = nn.gaussian_sample(posterior, rng.standard_normal((q, hp.d_z)))
        h1, c1 = nn.lstm_cell(gen.lstm_prior, ad.concat([m_t, r_rows, z]), h1, c1)
        u = ad.add(u, ad.affine(h1, gen.canvas.w, gen.canvas.b))
        traces.append((prior, posterior))
    return _output_gaussian(gen, hp, u), traces


def loss(prediction, p_true, traces):
    """Mean over queries of -log N'(p_true) plus the per-step prior/posterior
    KL terms."""
    p_true = np.asarray(p_true, dtype=np.float64)
    if p_true.ndim == 1:
        p_true = p_true[None, :]
    nll = ad.negative(nn.gaussian_log_density(prediction, p_true))
    total = nll
    for prior, posterior in traces:
        total = ad.add(total, nn.gaussian_kl(prior, posterior))
    return ad.reduce_mean(total)


def predict(prediction):
    """Deterministic readout: clamp the predicted mean to a distribution."""
    mean = np.array(prediction.mean.data, dtype=np.float64, copy=True)
    out = np.clip(mean, 0.0, None)
    if out.ndim == 1:
        s = out.sum()
        return out / s if s > 0 else np.full(out.shape, 1.0 / out.shape[0])
    sums = out.sum(axis=-1, keepdims=True)
    uniform = np.full_like(out, 1.0 / out.shape[-1])
    with np.errstate(invalid="ignore", divide="ignore"):
        normed = np.where(sums > 0, out / np.where(sums > 0, sums, 1.0), uniform)
    return normed
