"""2-D embeddings and the diagonal-covariance Gaussian mixture."""

import numpy as np
import pytest

import gqnq.clustering as cl


def blobs(seed=0, n_per=40, dim=16, spread=0.5, sep=8.0, k=2):
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((k, dim))
    centers = sep * centers / np.linalg.norm(centers, axis=1, keepdims=True)
    X = np.vstack([c + spread * rng.standard_normal((n_per, dim)) for c in centers])
    labels = np.repeat(np.arange(k), n_per)
    return X, labels


def inter_intra_ratio(Y, labels):
    centers = np.array([Y[labels == c].mean(axis=0) for c in np.unique(labels)])
    inter = np.min(
        [np.linalg.norm(a - b) for i, a in enumerate(centers)
         for b in centers[i + 1:]]
    )
    intra = max(
        np.mean([np.linalg.norm(y - centers[c]) for y in Y[labels == c]])
        for c in np.unique(labels)
    )
    return inter / intra


def test_pca_planar_input_preserves_distances():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 2)) * [3.0, 1.0]
    Y = cl.pca_embed(X)
    orig = np.linalg.norm(X[:, None] - X[None, :], axis=-1)
    emb = np.linalg.norm(Y[:, None] - Y[None, :], axis=-1)
    assert np.max(np.abs(orig - emb)) < 1e-9


def test_pca_identical_points_degenerate_padding():
    X = np.ones((5, 4))
    Y = cl.pca_embed(X)
    assert np.allclose(Y, 0.0)
    needs_three = X[:2]
    with pytest.raises(ValueError):
        cl.pca_embed(needs_three)


def test_embeddings_keep_blobs_separated():
    X, labels = blobs()
    for method in ("pca", "tsne"):
        Y = cl.embed2d(X, method=method, seed=0)
        assert inter_intra_ratio(Y, labels) > 3.0, method


def test_tsne_deterministic_under_seed():
    X, _ = blobs(seed=3, n_per=15)
    a = cl.tsne_embed(X, seed=11, n_iter=300)
    b = cl.tsne_embed(X, seed=11, n_iter=300)
    assert np.array_equal(a, b)


def test_gmm_two_blobs_full_match():
    X, labels = blobs(seed=1)
    pred = cl.gmm_cluster(X, 2, seed=0)
    assert cl.match_rate(pred, labels) == 1.0


def test_gmm_single_component():
    X, _ = blobs(seed=2)
    pred = cl.gmm_cluster(X, 1, seed=0)
    assert np.all(pred == pred[0])


def test_gmm_rejects_too_many_components():
    X = np.zeros((3, 2))
    with pytest.raises(ValueError):
        cl.gmm_fit(X, 4, seed=0)


def test_match_rate_invariant_under_relabeling():
    rng = np.random.default_rng(4)
    true = rng.integers(0, 3, size=60)
    pred = (true + 1) % 3  # a pure relabeling
    assert cl.match_rate(pred, true) == 1.0
    pred2 = pred.copy()
    pred2[:10] = (pred2[:10] + 1) % 3
    assert cl.match_rate(pred2, true) == pytest.approx(50 / 60)


def test_gmm_likelihood_improves_over_random_model():
    X, _ = blobs(seed=5)
    fitted = cl.gmm_fit(X, 2, seed=0)
    sloppy = cl.GMMModel(
        weights=np.array([0.5, 0.5]),
        means=np.zeros((2, X.shape[1])),
        variances=np.ones((2, X.shape[1])),
    )
    assert fitted.log_likelihood(X) > sloppy.log_likelihood(X)
