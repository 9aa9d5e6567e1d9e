"""Truncated Fock-space simulation of single-mode bosonic states.

State families: squeezed thermal states (Gaussian, mixed), cat states
(superpositions of opposite coherent states) and finite-energy grid (GKP)
states. Measurements are homodyne quadratures

    x_theta = (e^{i theta} a^dag + e^{-i theta} a) / 2,

so the vacuum has quadrature variance 1/4. Outcomes are truncated to
[-6, 6] and binned into 100 equal bins; probability mass outside the window
is folded into the nearest edge bin. Two noise channels used for robustness
tests are included: additive Gaussian noise on binned probabilities and
Gaussian jitter on the quadrature phase.

Conventions fixed here (the quadrature normalization above implies them):
  * number-basis wavefunctions psi_n(x) = (2/pi)^{1/4} H_n(sqrt(2) x)
    e^{-x^2} / sqrt(2^n n!), orthonormal on the line,
  * grid-state combs sit at x = (2s + logical) * sqrt(pi) * GKP_LATTICE
    with GKP_LATTICE = 1/2, damped by e^{-eps n} and renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

DEFAULT_N_MAX = 60
# weakly damped grid states hold ~2e-3 of their mass above n=60, so they are
# built on a deeper ladder to keep the truncation tail below tolerance
GKP_N_MAX = 150
GKP_LATTICE = 0.5

N_BINS = 100
BIN_LO, BIN_HI = -6.0, 6.0
BIN_WIDTH = (BIN_HI - BIN_LO) / N_BINS

_POINTS_PER_BIN = 8  # composite-Simpson subintervals per bin
_GRID_LO, _GRID_HI = -12.0, 12.0  # folding window; Fock tails die off inside


class TruncationError(ValueError):
    """Requested state does not fit in the truncated Fock space."""


@dataclass
class FockState:
    """Pure state (amplitude vector) or mixed state (density matrix) on the
    photon-number ladder 0..n_max."""

    n_max: int
    vector: np.ndarray | None = None
    rho: np.ndarray | None = None

    def __post_init__(self):
        dim = self.n_max + 1
        if (self.vector is None) == (self.rho is None):
            raise ValueError("provide exactly one of vector or rho")
        if self.vector is not None:
            self.vector = np.asarray(self.vector, dtype=complex)
            if self.vector.shape != (dim,):
                raise ValueError(f"vector must have shape ({dim},)")
            norm = np.linalg.norm(self.vector)
            if abs(norm - 1.0) > 1e-8:
                raise ValueError(f"state norm {norm} deviates from 1")
        else:
            self.rho = np.asarray(self.rho, dtype=complex)
            if self.rho.shape != (dim, dim):
                raise ValueError(f"rho must have shape ({dim}, {dim})")
            if np.abs(np.trace(self.rho) - 1.0) > 1e-8:
                raise ValueError("density matrix trace deviates from 1")
            if np.linalg.norm(self.rho - self.rho.conj().T) > 1e-8:
                raise ValueError("density matrix is not Hermitian")

    @property
    def is_pure(self):
        return self.vector is not None

    def density_matrix(self):
        if self.is_pure:
            return np.outer(self.vector, self.vector.conj())
        return self.rho

    def mean_photon(self):
        n = np.arange(self.n_max + 1)
        if self.is_pure:
            return float(np.sum(n * np.abs(self.vector) ** 2))
        return float(np.real(np.sum(n * np.diag(self.rho))))

    def purity(self):
        if self.is_pure:
            return 1.0
        return float(np.real(np.trace(self.rho @ self.rho)))


def annihilation(n_max):
    a = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    ns = np.arange(1, n_max + 1)
    a[ns - 1, ns] = np.sqrt(ns)
    return a


def quadrature_wavefunction(n, x):
    """psi_n(x) for the x = (a + a^dag)/2 convention, by upward recurrence."""
    x = np.asarray(x, dtype=float)
    u = np.sqrt(2.0) * x
    prev = np.pi**-0.25 * np.exp(-0.5 * u * u)
    if n == 0:
        return 2**0.25 * prev
    cur = np.sqrt(2.0) * u * prev
    for m in range(2, n + 1):
        prev, cur = cur, np.sqrt(2.0 / m) * u * cur - np.sqrt((m - 1.0) / m) * prev
    return 2**0.25 * cur


def _wavefunction_matrix(n_max, x):
    """Rows n = 0..n_max of psi_n evaluated on grid x."""
    x = np.asarray(x, dtype=float)
    u = np.sqrt(2.0) * x
    out = np.empty((n_max + 1, x.size))
    out[0] = np.pi**-0.25 * np.exp(-0.5 * u * u)
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * u * out[0]
    for n in range(2, n_max + 1):
        out[n] = np.sqrt(2.0 / n) * u * out[n - 1] - np.sqrt((n - 1.0) / n) * out[n - 2]
    return 2**0.25 * out


def coherent_amplitudes(alpha, n_max):
    """Number-basis amplitudes of |alpha>, exact normalization."""
    c = np.empty(n_max + 1, dtype=complex)
    c[0] = 1.0
    for n in range(1, n_max + 1):
        c[n] = c[n - 1] * alpha / np.sqrt(n)
    return c * np.exp(-0.5 * abs(alpha) ** 2)


def make_cat(alpha, phi, n_max=DEFAULT_N_MAX, tail_tol=1e-6):
    """Normalized superposition of |alpha> and e^{i phi} |-alpha>."""
    plus = coherent_amplitudes(alpha, n_max)
    minus = coherent_amplitudes(-alpha, n_max)
    vec = plus + np.exp(1.0j * phi) * minus
    norm2_exact = 2.0 * (1.0 + np.cos(phi) * np.exp(-2.0 * abs(alpha) ** 2))
    norm2_trunc = float(np.sum(np.abs(vec) ** 2))
    tail = max(0.0, norm2_exact - norm2_trunc) / norm2_exact
    if tail > tail_tol:
        raise TruncationError(
            f"cat(|alpha|={abs(alpha):.3f}) leaves {tail:.2e} beyond n={n_max}"
        )
    return FockState(n_max, vector=vec / np.sqrt(norm2_trunc))


def make_squeezed_thermal(v, s, n_max=DEFAULT_N_MAX, tail_tol=1e-6):
    """Squeezed thermal state S(s) rho_th S(s)^dag as a density matrix.

    v is the thermal quadrature variance in vacuum units (v = 1 is the
    vacuum), so the thermal occupation is nbar = (v - 1) / 2 and the
    unsqueezed x-quadrature variance is v / 4.
    """
    nbar = (v - 1.0) / 2.0
    if nbar < 0:
        raise ValueError("thermal variance must be >= 1")
    n = np.arange(n_max + 1)
    if nbar == 0:
        diag = np.zeros(n_max + 1)
        diag[0] = 1.0
    else:
        diag = np.exp(n * np.log(nbar / (1.0 + nbar)) - np.log(1.0 + nbar))
    a = annihilation(n_max)
    gen = 0.5 * (np.conj(s) * (a @ a) - s * (a.conj().T @ a.conj().T))
    sq = scipy.linalg.expm(gen)
    rho = sq @ np.diag(diag).astype(complex) @ sq.conj().T
    tr = float(np.real(np.trace(rho)))
    if abs(1.0 - tr) > max(tail_tol, 1.0 - diag.sum()):
        raise TruncationError(
            f"squeezed thermal (v={v}, |s|={abs(s):.3f}) loses {1 - tr:.2e} trace"
        )
    rho = rho / tr
    rho = 0.5 * (rho + rho.conj().T)
    return FockState(n_max, rho=rho)


def _damped_comb(logical, eps, n_build):
    """e^{-eps n} sum_s |x_s> for the logical-0 or logical-1 grid comb."""
    n = np.arange(n_build + 1)
    damp = np.exp(-eps * n)
    vec = np.zeros(n_build + 1)
    w0 = None
    s = 0
    while True:
        added = 0.0
        for x in {(2 * s + logical) * np.sqrt(np.pi) * GKP_LATTICE,
                  (-2 * s + logical) * np.sqrt(np.pi) * GKP_LATTICE}:
            col = damp * _wavefunction_matrix(n_build, np.array([x]))[:, 0]
            weight = float(np.sum(col * col))
            added = max(added, weight)
            vec = vec + col
        if w0 is None:
            w0 = max(added, 1e-300)
        if added / w0 < 1e-10:
            break
        s += 1
        if s > 200:  # defensive; never reached for eps >= 0.05
            break
    return vec


def make_gkp(eps, theta, phi, n_max=GKP_N_MAX, tail_tol=1e-6):
    """Finite-energy grid state e^{-eps n} (cos t |0_g> + e^{i phi} sin t |1_g>)."""
    if eps <= 0:
        raise ValueError("damping eps must be positive")
    n_build = n_max + 60
    comb0 = _damped_comb(0, eps, n_build)
    comb1 = _damped_comb(1, eps, n_build)
    comb0 = comb0 / np.linalg.norm(comb0)
    comb1 = comb1 / np.linalg.norm(comb1)
    full = np.cos(theta) * comb0 + np.exp(1.0j * phi) * np.sin(theta) * comb1
    total = float(np.sum(np.abs(full) ** 2))
    tail = float(np.sum(np.abs(full[n_max + 1 :]) ** 2)) / total
    if tail > tail_tol:
        raise TruncationError(
            f"gkp(eps={eps}) leaves {tail:.2e} beyond n={n_max}; "
            "increase n_max or eps"
        )
    vec = full[: n_max + 1]
    return FockState(n_max, vector=vec / np.linalg.norm(vec))


# ---------------------------------------------------------------------------
# homodyne statistics
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _simpson_grid(n_max):
    """Shared evaluation grid over the folding window plus Simpson weights.

    The window [-12, 12] is split into segments of one bin width, each
    resolved by 8 Simpson subintervals. Segments outside [-6, 6] are later
    folded into the edge bins.
    """
    n_seg = int(round((_GRID_HI - _GRID_LO) / BIN_WIDTH))
    n_pts = n_seg * _POINTS_PER_BIN + 1
    xs = np.linspace(_GRID_LO, _GRID_HI, n_pts)
    h = BIN_WIDTH / _POINTS_PER_BIN
    w = np.array([1, 4, 2, 4, 2, 4, 2, 4, 1], dtype=float) * (h / 3.0)
    psi = _wavefunction_matrix(n_max, xs)
    return xs, w, psi, n_seg


def _segment_integrals(dens, w, n_seg):
    segs = np.empty(n_seg)
    for s in range(n_seg):
        lo = s * _POINTS_PER_BIN
        segs[s] = float(np.dot(w, dens[lo : lo + _POINTS_PER_BIN + 1]))
    return segs


def homodyne_density(state, theta):
    """Continuous outcome density of the theta quadrature on the shared grid."""
    xs, _, psi, _ = _simpson_grid(state.n_max)
    phases = np.exp(1.0j * theta * np.arange(state.n_max + 1))
    if state.is_pure:
        f = (state.vector * phases) @ psi.astype(complex)
        dens = np.abs(f) ** 2
    else:
        rho = state.rho * np.outer(phases, phases.conj())
        dens = np.einsum("mj,mj->j", psi, np.real(rho @ psi.astype(complex)))
        dens = np.clip(dens, 0.0, None)
    return xs, dens


def homodyne_distribution(state, theta):
    """Binned quadrature distribution: 100 bins over [-6, 6], folded edges."""
    _, w, _, n_seg = _simpson_grid(state.n_max)
    _, dens = homodyne_density(state, theta)
    segs = _segment_integrals(dens, w, n_seg)
    first = int(round((BIN_LO - _GRID_LO) / BIN_WIDTH))
    probs = segs[first : first + N_BINS].copy()
    probs[0] += segs[:first].sum()
    probs[-1] += segs[first + N_BINS :].sum()
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def bin_centers():
    return BIN_LO + BIN_WIDTH * (np.arange(N_BINS) + 0.5)


def parametrize_phase(theta, encoding="trig"):
    """Measurement feature vector for a quadrature phase.

    "trig" gives (cos 2 theta, sin 2 theta), continuous and period-aware on
    [0, pi); "raw" gives the single value theta / pi.
    """
    if encoding == "trig":
        return np.array([np.cos(2.0 * theta), np.sin(2.0 * theta)])
    if encoding == "raw":
        return np.array([theta / np.pi])
    raise ValueError(f"unknown encoding {encoding!r}")


def phase_dim(encoding="trig"):
    return 2 if encoding == "trig" else 1


def add_probability_noise(dist, sigma, rng):
    """Additive Gaussian noise per bin (scaled by bin width), clamped and
    renormalized so the result is still a distribution."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return np.array(dist, dtype=float)
    noisy = dist + rng.normal(0.0, sigma, size=len(dist)) * BIN_WIDTH
    noisy = np.clip(noisy, 0.0, None)
    total = noisy.sum()
    if total <= 0:
        return np.full(len(dist), 1.0 / len(dist))
    return noisy / total


def jitter_phase(theta, sigma, rng):
    """Gaussian phase jitter, wrapped back into [0, pi)."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return float(theta)
    return float(np.mod(theta + rng.normal(0.0, sigma), np.pi))
