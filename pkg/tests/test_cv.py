"""Fock-space states and homodyne statistics against closed-form oracles."""

import numpy as np
import pytest
from scipy.special import erf

import gqnq.cv as cv


def test_cat_parity():
    even = cv.make_cat(2.0, 0.0)
    assert np.max(np.abs(even.vector[1::2])) < 1e-14
    odd = cv.make_cat(2.0, np.pi)
    assert np.max(np.abs(odd.vector[0::2])) < 1e-14


def test_cat_mean_photon_closed_form():
    alpha = 2.0
    state = cv.make_cat(alpha, 0.0)
    a2 = abs(alpha) ** 2
    expected = a2 * (1 - np.exp(-2 * a2)) / (1 + np.exp(-2 * a2))
    assert state.mean_photon() == pytest.approx(expected, abs=1e-10)


def test_cat_truncation_error():
    with pytest.raises(cv.TruncationError):
        cv.make_cat(3.0, 0.0, n_max=15)


def test_squeezed_thermal_vacuum_case():
    state = cv.make_squeezed_thermal(1.0, 0.0)
    expected = np.zeros((61, 61))
    expected[0, 0] = 1.0
    assert np.max(np.abs(state.rho - expected)) < 1e-12
    assert state.purity() == pytest.approx(1.0, abs=1e-10)


def test_thermal_geometric_distribution():
    state = cv.make_squeezed_thermal(2.0, 0.0)
    nbar = 0.5
    n = np.arange(61)
    expected = nbar**n / (1 + nbar) ** (n + 1)
    assert np.max(np.abs(np.diag(state.rho).real - expected)) < 1e-10
    assert state.purity() < 1.0


def test_squeezed_thermal_purity_iff_vacuum_variance():
    assert cv.make_squeezed_thermal(1.0, 0.3).purity() == pytest.approx(1.0, abs=1e-8)
    assert cv.make_squeezed_thermal(1.5, 0.3).purity() < 0.99


def test_gkp_logical_zero_even_support():
    state = cv.make_gkp(0.1, 0.0, 0.0)
    assert np.max(np.abs(state.vector[1::2])) < 1e-12
    assert np.linalg.norm(state.vector) == pytest.approx(1.0, abs=1e-12)


def test_gkp_mean_photon_decreases_with_damping():
    weak = cv.make_gkp(0.05, 0.3, 0.7)
    strong = cv.make_gkp(0.2, 0.3, 0.7)
    assert weak.mean_photon() > strong.mean_photon()


def test_gkp_truncation_guard():
    with pytest.raises(cv.TruncationError):
        cv.make_gkp(0.05, 0.0, 0.0, n_max=60)


def test_wavefunction_ground_value():
    assert cv.quadrature_wavefunction(0, 0.0) == pytest.approx(
        (2 / np.pi) ** 0.25, abs=1e-12
    )


def test_wavefunction_parity():
    xs = np.linspace(-3, 3, 7)
    for n in (0, 1, 4, 7):
        psi = cv.quadrature_wavefunction(n, xs)
        psi_neg = cv.quadrature_wavefunction(n, -xs)
        assert np.max(np.abs(psi_neg - (-1) ** n * psi)) < 1e-12


def test_wavefunction_orthonormality():
    xs = np.linspace(-10, 10, 8001)
    psi = np.array([cv.quadrature_wavefunction(n, xs) for n in range(21)])
    gram = np.trapezoid(psi[:, None, :] * psi[None, :, :], xs, axis=-1)
    assert np.max(np.abs(gram - np.eye(21))) < 1e-8


def test_vacuum_homodyne_matches_gaussian_bins():
    state = cv.make_squeezed_thermal(1.0, 0.0)
    probs = cv.homodyne_distribution(state, 0.37)
    edges = cv.BIN_LO + cv.BIN_WIDTH * np.arange(cv.N_BINS + 1)
    oracle = 0.5 * (erf(np.sqrt(2) * edges[1:]) - erf(np.sqrt(2) * edges[:-1]))
    oracle /= oracle.sum()
    assert np.max(np.abs(probs - oracle)) < 1e-6


def gaussian_bin_oracle(var):
    sd = np.sqrt(var)
    edges = cv.BIN_LO + cv.BIN_WIDTH * np.arange(cv.N_BINS + 1)
    cdf = 0.5 * (1 + erf(edges / (sd * np.sqrt(2))))
    probs = np.diff(cdf)
    probs[0] += cdf[0]
    probs[-1] += 1 - cdf[-1]
    return probs / probs.sum()


@pytest.mark.parametrize("v,s,theta", [
    (1.0, 0.4, 0.0),
    (1.7, 0.5, 0.9),
    (2.0, 0.25, np.pi / 2),
    (1.3, 0.0, 1.3),
])
def test_squeezed_thermal_homodyne_matches_covariance_form(v, s, theta):
    state = cv.make_squeezed_thermal(v, s)
    probs = cv.homodyne_distribution(state, theta)
    var = 0.25 * v * (np.exp(-2 * s) * np.cos(theta) ** 2
                      + np.exp(2 * s) * np.sin(theta) ** 2)
    assert np.max(np.abs(probs - gaussian_bin_oracle(var))) < 1e-4


def test_binned_moments_match_covariance_form():
    state = cv.make_squeezed_thermal(1.6, 0.3)
    centers = cv.bin_centers()
    sheppard = cv.BIN_WIDTH**2 / 12.0  # quantization bias of grouped moments
    for theta in (0.0, 0.7, 2.2):
        probs = cv.homodyne_distribution(state, theta)
        var = 0.25 * 1.6 * (np.exp(-0.6) * np.cos(theta) ** 2
                            + np.exp(0.6) * np.sin(theta) ** 2)
        assert abs(np.dot(centers, probs)) < 1e-3
        second = np.dot(centers**2, probs) - sheppard
        assert abs(second - var) < 1e-3


def test_cat_fringes_symmetric_at_pi_half():
    state = cv.make_cat(2.0, 0.0)
    probs = cv.homodyne_distribution(state, np.pi / 2)
    assert np.max(np.abs(probs - probs[::-1])) < 1e-10


def test_cat_lobes_near_plus_minus_alpha():
    alpha = 2.0
    probs = cv.homodyne_distribution(cv.make_cat(alpha, 0.0), 0.0)
    centers = cv.bin_centers()
    left = centers[np.argmax(np.where(centers < 0, probs, 0))]
    right = centers[np.argmax(np.where(centers > 0, probs, 0))]
    assert abs(right - alpha) < 0.1
    assert abs(left + alpha) < 0.1


def test_homodyne_global_phase_invariance():
    state = cv.make_cat(1.5 + 0.5j, np.pi / 8)
    rotated = cv.FockState(state.n_max, vector=state.vector * np.exp(0.61j))
    for theta in (0.0, 1.1):
        a = cv.homodyne_distribution(state, theta)
        b = cv.homodyne_distribution(rotated, theta)
        assert np.max(np.abs(a - b)) < 1e-14


def test_pure_and_mixed_paths_agree():
    import scipy.linalg
    s = 0.3 + 0.2j
    a = cv.annihilation(60)
    sq = scipy.linalg.expm(0.5 * (np.conj(s) * (a @ a) - s * (a.conj().T @ a.conj().T)))
    vec = sq[:, 0]
    pure = cv.FockState(60, vector=vec / np.linalg.norm(vec))
    mixed = cv.make_squeezed_thermal(1.0, s)
    for theta in (0.0, 0.8, 2.5):
        pa = cv.homodyne_distribution(pure, theta)
        pb = cv.homodyne_distribution(mixed, theta)
        assert np.max(np.abs(pa - pb)) < 1e-10


def test_distributions_are_normalized():
    rng = np.random.default_rng(0)
    states = [
        cv.make_cat(2.5 * np.exp(0.4j), np.pi / 4),
        cv.make_squeezed_thermal(1.9, 0.5 * np.exp(1.0j)),
        cv.make_gkp(0.07, 1.2, 2.0),
    ]
    for state in states:
        theta = rng.uniform(0, np.pi)
        probs = cv.homodyne_distribution(state, theta)
        assert np.all(probs >= 0)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_parametrize_phase():
    trig = cv.parametrize_phase(0.7)
    assert np.allclose(trig, [np.cos(1.4), np.sin(1.4)])
    raw = cv.parametrize_phase(0.7, encoding="raw")
    assert np.allclose(raw, [0.7 / np.pi])
    assert cv.phase_dim("trig") == 2 and cv.phase_dim("raw") == 1


def test_probability_noise():
    rng = np.random.default_rng(1)
    dist = cv.homodyne_distribution(cv.make_cat(2.0, 0.0), 0.0)
    assert np.array_equal(cv.add_probability_noise(dist, 0.0, rng), dist)
    noisy = cv.add_probability_noise(dist, 0.05, rng)
    assert np.all(noisy >= 0)
    assert noisy.sum() == pytest.approx(1.0, abs=1e-12)
    assert not np.allclose(noisy, dist)


def test_jitter_phase():
    rng = np.random.default_rng(2)
    assert cv.jitter_phase(0.5, 0.0, rng) == 0.5
    for _ in range(100):
        out = cv.jitter_phase(0.99 * np.pi, 0.5, rng)
        assert 0.0 <= out < np.pi
    draws = np.array([cv.jitter_phase(np.pi / 2, 0.05, rng) for _ in range(10**5)])
    assert abs(draws.std() - 0.05) < 3 * 0.05 / np.sqrt(2 * 10**5)
