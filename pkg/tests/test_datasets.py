"""Dataset generation determinism, structure, and file round-trips."""

import json

import numpy as np
import pytest

import gqnq.datasets as ds
import gqnq.cv as cv
from gqnq.fileio import DataError


SPIN_CFG = {
    "kind": "spin",
    "n_qubits": 3,
    "mode": "full_local",
    "subset_size": 10,
    "seed": 5,
    "families": [
        {
            "model": "ising",
            "mean_values": [0.5, 1.2],
            "stddev": 0.1,
            "sign_mode": "signed",
            "train_per_value": 3,
            "test_per_value": 2,
        },
        {"model": "ghz", "train": 4, "test": 2},
    ],
}

CV_CFG = {
    "kind": "cv",
    "n_phases": 12,
    "encoding": "trig",
    "seed": 9,
    "families": [
        {"family": "squeezed_thermal", "train": 2, "test": 1},
        {"family": "cat", "train": 2, "test": 1},
        {"family": "gkp", "train": 1, "test": 1},
    ],
}


def test_spin_dataset_structure():
    train, test = ds.generate_spin_datasets(SPIN_CFG)
    assert len(train) == 2 * 3 + 4
    assert len(test) == 2 * 2 + 2
    assert train.m.shape == (10, 24)
    assert train.p.shape == (10, 10, 8)
    assert np.allclose(train.p.sum(axis=-1), 1.0, atol=1e-10)
    assert np.all(train.p >= 0)
    families = {m["family"] for m in train.meta}
    assert families == {"ising", "ghz"}
    ising_meta = next(m for m in train.meta if m["family"] == "ising")
    assert "couplings" in ising_meta and len(ising_meta["couplings"]) == 2
    state = train.state(0)
    assert state.m.shape == (10, 24) and state.p.shape == (10, 8)


def test_spin_dataset_deterministic():
    a_train, a_test = ds.generate_spin_datasets(SPIN_CFG)
    b_train, b_test = ds.generate_spin_datasets(SPIN_CFG)
    assert np.array_equal(a_train.p, b_train.p)
    assert np.array_equal(a_test.p, b_test.p)
    assert a_train.meta == b_train.meta
    c_train, _ = ds.generate_spin_datasets(SPIN_CFG, seed=6)
    assert not np.array_equal(a_train.p, c_train.p)


def test_nearest_neighbor_mode_dimensions():
    cfg = dict(SPIN_CFG, mode="nearest_neighbor", subset_size=None, n_qubits=4)
    train, _ = ds.generate_spin_datasets(cfg)
    assert train.m.shape == (27, 17)
    assert train.p.shape[2] == 4


def test_cv_dataset_structure_and_rebuild():
    train, test = ds.generate_cv_datasets(CV_CFG)
    assert len(train) == 5 and len(test) == 3
    assert train.m.shape == (12, 2)
    assert train.p.shape == (5, 12, 100)
    assert np.allclose(train.p.sum(axis=-1), 1.0, atol=1e-8)
    # metadata rebuild reproduces the stored distributions
    idx = next(i for i, m in enumerate(train.meta) if m["family"] == "cat")
    state = ds.rebuild_cv_state(train.meta[idx])
    theta = train.info["phases"][3]
    regenerated = cv.homodyne_distribution(state, theta)
    assert np.max(np.abs(regenerated - train.p[idx, 3])) < 1e-12


def test_cv_dataset_deterministic():
    a_train, _ = ds.generate_cv_datasets(CV_CFG)
    b_train, _ = ds.generate_cv_datasets(CV_CFG)
    assert np.array_equal(a_train.p, b_train.p)
    assert a_train.meta == b_train.meta


def test_scale_factor():
    cfg = dict(CV_CFG, scale_factor=2.0)
    train, test = ds.generate_cv_datasets(cfg)
    assert len(train) == 10 and len(test) == 6


def test_dataset_file_roundtrip(tmp_path):
    train, _ = ds.generate_spin_datasets(SPIN_CFG)
    path = tmp_path / "train.gqd"
    ds.save_dataset(train, path)
    loaded = ds.load_dataset(path)
    assert np.array_equal(loaded.m, train.m)
    assert np.array_equal(loaded.p, train.p)
    assert loaded.meta == train.meta
    assert loaded.info == train.info
    # byte-identical rewrite
    path2 = tmp_path / "again.gqd"
    ds.save_dataset(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_dataset_rejects_checkpoint_file(tmp_path):
    import gqnq.training as tr
    from gqnq.model import HyperParams

    states = [
        tr.StateExample(m=np.zeros((6, 3)), p=np.full((6, 4), 0.25), meta={})
    ]
    config = tr.TrainConfig(
        hyper=HyperParams(m_dim=3, k=4, d_r=4, gen_steps=1, rep_layers=(4,)),
        epochs=1, max_context=2, batch_size=1, seed=0,
    )
    ckpt = tr.train_multi(states, config)
    path = tmp_path / "model.ckpt"
    tr.save_checkpoint(ckpt, path)
    with pytest.raises(DataError):
        ds.load_dataset(path)


def test_jsonl_export(tmp_path):
    train, _ = ds.generate_cv_datasets(CV_CFG)
    path = tmp_path / "dump.jsonl"
    ds.export_jsonl(train, path)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 1 + len(train)
    head = json.loads(lines[0])
    assert head["info"]["kind"] == "cv"
    rec = json.loads(lines[1])
    assert len(rec["records"]) == 12
    assert len(rec["records"][0]["p"]) == 100
