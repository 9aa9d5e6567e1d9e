"""Exact simulation of small spin chains and Pauli measurement statistics.

Covers ground states of the open-boundary transverse-field Ising chain

    H = -( sum_i J_i Z_i Z_{i+1} + sum_j X_j )

and of the XXZ chain

    H = -sum_i [ D_i (X_i X_{i+1} + Y_i Y_{i+1}) + Z_i Z_{i+1} ],

plus locally rotated GHZ / W states, enumeration and parametrization of
local Pauli measurement settings, Born-rule outcome distributions and
finite-shot sampling. Amplitude vectors index qubit 0 as the most
significant bit. Everything is deterministic; randomness comes in only
through explicitly passed generators.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

# columns are the +1 and -1 eigenvectors of each Pauli
_EIGBASIS = {
    "X": np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0),
    "Y": np.array([[1.0, 1.0], [1.0j, -1.0j]], dtype=complex) / np.sqrt(2.0),
    "Z": np.eye(2, dtype=complex),
}

DEFAULT_QUBIT_CAP = 12

_DENSE_EIG_DIM = 512  # above this, switch to Lanczos with a fixed start vector


class CapacityError(ValueError):
    """Chain length beyond the exact-diagonalization cap (larger chains would
    need a matrix-product method, which this package deliberately omits)."""


@dataclass
class QubitPureState:
    """Normalized pure state of `n_qubits` qubits."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(
                f"state of {self.n_qubits} qubits needs {2**self.n_qubits} "
                f"amplitudes, got shape {self.amplitudes.shape}"
            )
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state norm {norm} deviates from 1")


@dataclass
class SpinModelSpec:
    """Chain model ('ising' or 'xxz') with per-bond couplings (length L-1)."""

    model: str
    n_qubits: int
    couplings: np.ndarray

    def __post_init__(self):
        if self.model not in ("ising", "xxz"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.n_qubits < 2:
            raise ValueError("need at least 2 qubits")
        self.couplings = np.asarray(self.couplings, dtype=float)
        if self.couplings.shape != (self.n_qubits - 1,):
            raise ValueError(
                f"{self.n_qubits}-qubit chain needs {self.n_qubits - 1} couplings"
            )
        if not np.all(np.isfinite(self.couplings)):
            raise ValueError("couplings must be finite")


@dataclass(frozen=True)
class PauliSetting:
    """Either a full product setting (labels on every qubit, pair=None) or a
    two-qubit setting on a nearest-neighbor pair (labels length 2)."""

    labels: str
    pair: int | None = None

    def __post_init__(self):
        if any(c not in "XYZ" for c in self.labels):
            raise ValueError(f"bad Pauli labels {self.labels!r}")
        if self.pair is not None and self.pair < 0:
            raise ValueError("pair index must be nonnegative")


def sample_couplings(mean, stddev, sign_mode, rng, n):
    """n i.i.d. Gaussian couplings; sign_mode forces a uniform sign if asked."""
    if stddev < 0:
        raise ValueError("stddev must be nonnegative")
    draws = rng.normal(mean, stddev, size=n)
    if sign_mode == "signed":
        return draws
    if sign_mode == "force_positive":
        return np.abs(draws)
    if sign_mode == "force_negative":
        return -np.abs(draws)
    raise ValueError(f"unknown sign_mode {sign_mode!r}")


def _site_operator(op, site, n_qubits):
    mats = [sp.identity(2, format="csr", dtype=complex)] * n_qubits
    mats[site] = sp.csr_matrix(PAULI[op])
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


def build_hamiltonian(spec, qubit_cap=DEFAULT_QUBIT_CAP):
    """Sparse 2^L x 2^L Hamiltonian for an open-boundary chain."""
    L = spec.n_qubits
    if L > qubit_cap:
        raise CapacityError(
            f"{L} qubits exceeds the exact-diagonalization cap of {qubit_cap}; "
            "larger chains are out of scope (no DMRG backend)"
        )
    dim = 2**L
    h = sp.csr_matrix((dim, dim), dtype=complex)
    if spec.model == "ising":
        for i, j_i in enumerate(spec.couplings):
            h = h - j_i * (_site_operator("Z", i, L) @ _site_operator("Z", i + 1, L))
        for j in range(L):
            h = h - _site_operator("X", j, L)
    else:  # xxz
        for i, d_i in enumerate(spec.couplings):
            xx = _site_operator("X", i, L) @ _site_operator("X", i + 1, L)
            yy = _site_operator("Y", i, L) @ _site_operator("Y", i + 1, L)
            zz = _site_operator("Z", i, L) @ _site_operator("Z", i + 1, L)
            h = h - (d_i * (xx + yy) + zz)
    return h


def _fix_phase(vec):
    """Make the first amplitude with magnitude > 1e-9 real positive."""
    idx = np.flatnonzero(np.abs(vec) > 1e-9)
    if idx.size == 0:
        return vec
    phase = vec[idx[0]] / abs(vec[idx[0]])
    return vec / phase


def ground_state(h):
    """Lowest eigenvector, phase-fixed; dense solve for small dimensions,
    Lanczos with a fixed start vector above, so results are reproducible."""
    dim = h.shape[0]
    n_qubits = int(round(np.log2(dim)))
    if dim <= _DENSE_EIG_DIM:
        dense = h.toarray() if sp.issparse(h) else np.asarray(h)
        _, vecs = np.linalg.eigh(dense)
        vec = vecs[:, 0]
    else:
        v0 = np.full(dim, 1.0 / np.sqrt(dim))
        _, vecs = spla.eigsh(h.astype(complex), k=1, which="SA", v0=v0)
        vec = vecs[:, 0]
    vec = _fix_phase(vec)
    vec = vec / np.linalg.norm(vec)
    return QubitPureState(n_qubits, vec)


def _local_unitary(theta_x, theta_y, theta_z):
    def rot(axis, theta):
        return np.cos(theta) * PAULI["I"] - 1.0j * np.sin(theta) * PAULI[axis]

    return rot("Z", theta_z) @ rot("Y", theta_y) @ rot("X", theta_x)


def _apply_single_qubit(mat, vec, site, n_qubits):
    tens = vec.reshape((2,) * n_qubits)
    tens = np.moveaxis(np.tensordot(mat, tens, axes=([1], [site])), 0, site)
    return tens.reshape(-1)


def make_rotated_ghz_w(kind, angles):
    """GHZ or W state with independent small local rotations.

    `angles` has shape (L, 3): per-qubit rotation angles about x, y, z,
    applied as exp(-i t_z Z) exp(-i t_y Y) exp(-i t_x X).
    """
    angles = np.asarray(angles, dtype=float)
    if angles.ndim != 2 or angles.shape[1] != 3:
        raise ValueError("angles must have shape (n_qubits, 3)")
    L = angles.shape[0]
    vec = np.zeros(2**L, dtype=complex)
    if kind == "ghz":
        vec[0] = vec[-1] = 1.0 / np.sqrt(2.0)
    elif kind == "w":
        for i in range(L):
            vec[1 << (L - 1 - i)] = 1.0 / np.sqrt(L)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    for site in range(L):
        u = _local_unitary(*angles[site])
        vec = _apply_single_qubit(u, vec, site, L)
    return QubitPureState(L, vec / np.linalg.norm(vec))


def enumerate_settings(n_qubits, mode):
    """All measurement settings of a mode, in a fixed canonical order.

    full_local: the 3^L per-qubit Pauli products, lexicographic with X<Y<Z.
    nearest_neighbor: the 9(L-1) two-qubit settings, ordered by pair index
    then label pair.
    """
    if mode == "full_local":
        return [
            PauliSetting("".join(c)) for c in itertools.product("XYZ", repeat=n_qubits)
        ]
    if mode == "nearest_neighbor":
        out = []
        for pair in range(n_qubits - 1):
            for a, b in itertools.product("XYZ", repeat=2):
                out.append(PauliSetting(a + b, pair=pair))
        return out
    raise ValueError(f"unknown mode {mode!r}")


def _pauli_block(label):
    mat = PAULI[label]
    flat = mat.reshape(-1)
    return np.column_stack([flat.real, flat.imag]).reshape(-1)


def parametrize_measurement(setting, n_qubits=None):
    """Real feature vector the learner receives in place of the POVM.

    Each measured qubit contributes its 2x2 Pauli matrix flattened row-major
    as (Re, Im) pairs: 8 reals per qubit. Nearest-neighbor settings append
    the pair index scaled into [0, 1], since the 16 matrix entries alone
    cannot tell pairs apart.
    """
    blocks = [_pauli_block(c) for c in setting.labels]
    vec = np.concatenate(blocks)
    if setting.pair is None:
        return vec
    if n_qubits is None:
        raise ValueError("nearest-neighbor parametrization needs n_qubits")
    span = n_qubits - 2
    scaled = setting.pair / span if span > 0 else 0.0
    return np.concatenate([vec, [scaled]])


def measurement_dim(n_qubits, mode):
    return 8 * n_qubits if mode == "full_local" else 17


def outcome_count(n_qubits, mode):
    return 2**n_qubits if mode == "full_local" else 4


def born_probabilities(state, setting):
    """Born-rule outcome distribution of a Pauli setting on a pure state.

    Outcomes are ordered with the +1 eigenvalue before -1 on each qubit and
    the leftmost measured qubit most significant. Full products give
    2^L outcomes; nearest-neighbor settings give the 4 marginal outcomes of
    the reduced pair state.
    """
    L = state.n_qubits
    vec = state.amplitudes
    if setting.pair is None:
        if len(setting.labels) != L:
            raise ValueError("setting does not match qubit count")
        for site, label in enumerate(setting.labels):
            vec = _apply_single_qubit(_EIGBASIS[label].conj().T, vec, site, L)
        probs = np.abs(vec) ** 2
    else:
        i = setting.pair
        if i > L - 2:
            raise ValueError(f"pair index {i} out of range for {L} qubits")
        tens = state.amplitudes.reshape(2**i, 4, 2 ** (L - 2 - i))
        rho = np.einsum("abc,adc->bd", tens, tens.conj())
        basis = np.kron(_EIGBASIS[setting.labels[0]], _EIGBASIS[setting.labels[1]])
        probs = np.real(np.einsum("ji,jk,ki->i", basis.conj(), rho, basis))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample_shots(dist, n_shots, rng):
    """Empirical frequencies of a multinomial draw; sums to 1."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    counts = rng.multinomial(n_shots, dist)
    return counts / float(n_shots)
