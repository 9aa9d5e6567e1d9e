"""Dataset generation for spin and oscillator families, plus file I/O.

A dataset is a set of states, each carrying the outcome distribution of
every measurement in the shared measurement set M. The parametrization
matrix ``m`` is stored once (all states share M), the probability block
``p`` has shape (n_states, |M|, k), and per-state metadata records the
family and generating parameters. Metadata exists for evaluation grouping,
classifier labels and state rebuilding in the noise harness; it is never
fed to the network. The measurement parametrizations are stored opaquely:
files carry no operator description of the measurements.

Generation is deterministic under (config, seed): all draws come from one
generator in a fixed order, train states before test states.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import cv, fileio, spin
from .training import StateExample

DATASET_VERSION = 1


@dataclass
class Dataset:
    m: np.ndarray  # (n_measurements, m_dim), shared across states
    p: np.ndarray  # (n_states, n_measurements, k)
    meta: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.p.ndim != 3 or self.p.shape[1] != self.m.shape[0]:
            raise ValueError("p must be (n_states, n_measurements, k)")
        if len(self.meta) != self.p.shape[0]:
            raise ValueError("one metadata entry per state required")

    def __len__(self):
        return self.p.shape[0]

    @property
    def m_dim(self):
        return self.m.shape[1]

    @property
    def k(self):
        return self.p.shape[2]

    def state(self, i):
        return StateExample(m=self.m, p=self.p[i], meta=self.meta[i])

    def states(self):
        return [self.state(i) for i in range(len(self))]

    def subset(self, indices):
        indices = list(indices)
        return Dataset(
            m=self.m,
            p=self.p[indices],
            meta=[self.meta[i] for i in indices],
            info=dict(self.info),
        )


def _clean(obj):
    """Make metadata JSON-serializable (plain floats/ints/strings)."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


# ---------------------------------------------------------------------------
# spin datasets
# ---------------------------------------------------------------------------

def _spin_measurements(n_qubits, mode, subset_size, rng):
    settings = spin.enumerate_settings(n_qubits, mode)
    if subset_size is not None:
        if not 1 <= subset_size <= len(settings):
            raise ValueError(
                f"subset_size {subset_size} out of range (have {len(settings)})"
            )
        chosen = sorted(rng.choice(len(settings), size=subset_size, replace=False))
        settings = [settings[i] for i in chosen]
    m = np.array(
        [spin.parametrize_measurement(s, n_qubits=n_qubits) for s in settings]
    )
    labels = [
        {"labels": s.labels, "pair": s.pair} if s.pair is not None
        else {"labels": s.labels}
        for s in settings
    ]
    return settings, m, labels


def _ground_state_family(family, n_qubits, rng):
    model = family["model"]
    mean = family["_mean"]
    stddev = family.get("stddev", 0.1)
    sign_mode = family.get("sign_mode", "signed")
    couplings = spin.sample_couplings(mean, stddev, sign_mode, rng, n_qubits - 1)
    spec = spin.SpinModelSpec(model, n_qubits, couplings)
    state = spin.ground_state(spin.build_hamiltonian(spec))
    symbol = "J" if model == "ising" else "Delta"
    meta = {
        "family": family.get("name", model),
        "model": model,
        "param": f"{symbol}={mean:+.2f}",
        "mean_coupling": mean,
        "sign_mode": sign_mode,
        "couplings": couplings.tolist(),
    }
    return state, meta


def _rotated_family(family, n_qubits, rng):
    kind = family["model"]
    angles = rng.uniform(0.0, np.pi / 10.0, size=(n_qubits, 3))
    state = spin.make_rotated_ghz_w(kind, angles)
    meta = {
        "family": family.get("name", kind),
        "model": kind,
        "param": kind,
        "angles": angles.tolist(),
    }
    return state, meta


def _spin_state(family, n_qubits, rng):
    if family["model"] in ("ising", "xxz"):
        return _ground_state_family(family, n_qubits, rng)
    if family["model"] in ("ghz", "w"):
        return _rotated_family(family, n_qubits, rng)
    raise ValueError(f"unknown spin family {family['model']!r}")


def _spin_family_jobs(family, scale):
    """Expand one family config into per-state jobs for train and test."""
    if family["model"] in ("ising", "xxz"):
        values = family["mean_values"]
        per_train = max(1, round(family.get("train_per_value", 40) * scale))
        per_test = max(1, round(family.get("test_per_value", 10) * scale))
        train = [dict(family, _mean=v) for v in values for _ in range(per_train)]
        test = [dict(family, _mean=v) for v in values for _ in range(per_test)]
        return train, test
    n_train = max(1, round(family.get("train", 800) * scale))
    n_test = max(1, round(family.get("test", 200) * scale))
    return [dict(family)] * n_train, [dict(family)] * n_test


def generate_spin_datasets(config, seed=None):
    """Build (train, test) spin datasets from a config dictionary.

    Config keys: n_qubits, mode ("full_local" | "nearest_neighbor"),
    families (list; each with model "ising"/"xxz" plus mean_values/stddev/
    sign_mode/train_per_value/test_per_value, or model "ghz"/"w" with
    train/test counts), optional subset_size restricting |M|, optional
    scale_factor, seed.
    """
    seed = config.get("seed", 0) if seed is None else seed
    rng = np.random.default_rng(seed)
    n_qubits = config["n_qubits"]
    mode = config.get("mode", "full_local")
    scale = config.get("scale_factor", 1.0)
    settings, m, labels = _spin_measurements(
        n_qubits, mode, config.get("subset_size"), rng
    )
    train_jobs, test_jobs = [], []
    for family in config["families"]:
        tr, te = _spin_family_jobs(family, scale)
        train_jobs.extend(tr)
        test_jobs.extend(te)

    def build(jobs):
        p = np.empty((len(jobs), len(settings), spin.outcome_count(n_qubits, mode)))
        meta = []
        for i, job in enumerate(jobs):
            state, state_meta = _spin_state(job, n_qubits, rng)
            p[i] = [spin.born_probabilities(state, s) for s in settings]
            meta.append(_clean(state_meta))
        return p, meta

    info = {
        "kind": "spin",
        "n_qubits": n_qubits,
        "mode": mode,
        "settings": labels,
        "seed": seed,
        "m_dim": m.shape[1],
        "k": spin.outcome_count(n_qubits, mode),
    }
    p_train, meta_train = build(train_jobs)
    p_test, meta_test = build(test_jobs)
    return (
        Dataset(m=m, p=p_train, meta=meta_train, info=dict(info, split="train")),
        Dataset(m=m, p=p_test, meta=meta_test, info=dict(info, split="test")),
    )


# ---------------------------------------------------------------------------
# continuous-variable datasets
# ---------------------------------------------------------------------------

CAT_PHI_GRID = np.arange(9) * np.pi / 8.0  # {0, pi/8, ..., pi}


def _sample_cv_meta(family, rng):
    name = family["family"]
    if name == "squeezed_thermal":
        v = rng.uniform(1.0, 2.0)
        s_mag = rng.uniform(0.0, 0.5)
        s_arg = rng.uniform(0.0, np.pi)
        return {
            "family": name,
            "param": f"V={v:.2f}",
            "v": v,
            "s_re": s_mag * np.cos(s_arg),
            "s_im": s_mag * np.sin(s_arg),
        }
    if name == "cat":
        mag = rng.uniform(1.0, 3.0)
        arg = rng.uniform(0.0, 2.0 * np.pi)
        phi = float(CAT_PHI_GRID[rng.integers(len(CAT_PHI_GRID))])
        return {
            "family": name,
            "param": f"|a|={mag:.2f}",
            "alpha_re": mag * np.cos(arg),
            "alpha_im": mag * np.sin(arg),
            "phi": phi,
        }
    if name == "gkp":
        return {
            "family": name,
            "param": "gkp",
            "eps": rng.uniform(0.05, 0.2),
            "theta": rng.uniform(0.0, 2.0 * np.pi),
            "phi": rng.uniform(0.0, np.pi),
        }
    raise ValueError(f"unknown cv family {name!r}")


def rebuild_cv_state(meta, n_max=None, gkp_n_max=None):
    """Reconstruct the Fock-space state a metadata entry describes."""
    family = meta["family"]
    if family == "squeezed_thermal":
        return cv.make_squeezed_thermal(
            meta["v"], meta["s_re"] + 1j * meta["s_im"],
            n_max=n_max or cv.DEFAULT_N_MAX,
        )
    if family == "cat":
        return cv.make_cat(
            meta["alpha_re"] + 1j * meta["alpha_im"], meta["phi"],
            n_max=n_max or cv.DEFAULT_N_MAX,
        )
    if family == "gkp":
        return cv.make_gkp(
            meta["eps"], meta["theta"], meta["phi"],
            n_max=gkp_n_max or cv.GKP_N_MAX,
        )
    raise ValueError(f"unknown cv family {family!r}")


def generate_cv_datasets(config, seed=None):
    """Build (train, test) oscillator datasets from a config dictionary.

    Config keys: families (list of {"family": name, "train": n, "test": n}),
    n_phases (measurement set size; phases are equidistant in [0, pi)),
    encoding ("trig" | "raw"), optional n_max / gkp_n_max / scale_factor,
    seed.
    """
    seed = config.get("seed", 0) if seed is None else seed
    rng = np.random.default_rng(seed)
    n_phases = config.get("n_phases", 300)
    encoding = config.get("encoding", "trig")
    scale = config.get("scale_factor", 1.0)
    n_max = config.get("n_max", cv.DEFAULT_N_MAX)
    gkp_n_max = config.get("gkp_n_max", cv.GKP_N_MAX)
    phases = np.arange(n_phases) * np.pi / n_phases
    m = np.array([cv.parametrize_phase(t, encoding) for t in phases])

    jobs_train, jobs_test = [], []
    for family in config["families"]:
        jobs_train.extend([family] * max(1, round(family.get("train", 100) * scale)))
        jobs_test.extend([family] * max(1, round(family.get("test", 25) * scale)))

    def build(jobs):
        p = np.empty((len(jobs), n_phases, cv.N_BINS))
        meta = []
        for i, job in enumerate(jobs):
            state_meta = _sample_cv_meta(job, rng)
            state = rebuild_cv_state(state_meta, n_max=n_max, gkp_n_max=gkp_n_max)
            for j, theta in enumerate(phases):
                p[i, j] = cv.homodyne_distribution(state, theta)
            meta.append(_clean(state_meta))
        return p, meta

    info = {
        "kind": "cv",
        "n_phases": n_phases,
        "phases": phases.tolist(),
        "encoding": encoding,
        "n_max": n_max,
        "gkp_n_max": gkp_n_max,
        "seed": seed,
        "m_dim": m.shape[1],
        "k": cv.N_BINS,
    }
    p_train, meta_train = build(jobs_train)
    p_test, meta_test = build(jobs_test)
    return (
        Dataset(m=m, p=p_train, meta=meta_train, info=dict(info, split="train")),
        Dataset(m=m, p=p_test, meta=meta_test, info=dict(info, split="test")),
    )


def generate_datasets(config, seed=None):
    kind = config.get("kind")
    if kind == "spin":
        return generate_spin_datasets(config, seed)
    if kind == "cv":
        return generate_cv_datasets(config, seed)
    raise ValueError(f"config kind must be 'spin' or 'cv', got {kind!r}")


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------

def save_dataset(dataset, path):
    header = {
        "type": "dataset",
        "dataset_version": DATASET_VERSION,
        "info": _clean(dataset.info),
        "meta": _clean(dataset.meta),
    }
    fileio.write_blocks(path, header, {"m": dataset.m, "p": dataset.p})


def load_dataset(path):
    header, arrays = fileio.read_blocks(path)
    if header.get("type") != "dataset":
        raise fileio.DataError(f"{path}: not a dataset file")
    if header.get("dataset_version") != DATASET_VERSION:
        raise fileio.DataError(f"{path}: unsupported dataset version")
    return Dataset(
        m=arrays["m"], p=arrays["p"], meta=header["meta"], info=header["info"]
    )


def export_jsonl(dataset, path):
    """Readable per-state dump: one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"info": _clean(dataset.info)}, sort_keys=True) + "\n")
        for i in range(len(dataset)):
            record = {
                "state_index": i,
                "meta": _clean(dataset.meta[i]),
                "records": [
                    {"m": dataset.m[j].tolist(), "p": dataset.p[i, j].tolist()}
                    for j in range(dataset.m.shape[0])
                ],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")
