import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from schrodinger_ldp.exact_law import (ExactLawParams, continuous_lmgf, exact_mean_pairing,
                                       exact_var_pairing, exact_var_pairing_complex,
                                       fernique_closed_form, fernique_identity_check, galerkin_lmgf,
                                       mass_expectation, mean_coefficients, mode_covariances,
                                       sample_galerkin_exact)
from schrodinger_ldp.exceptions import DivergentMoment
from schrodinger_ldp.spectral import NoiseSpec, SpectralVector

# frozen from scipy.integrate.quad of the stochastic-integral kernels
VAR_E1_T1 = 0.2726756432935795          # int_0^1 sin^2 r dr
VAR_MODE3 = 0.14693114494959617         # alpha=1.2, eta=0.3, k=3, T=0.7, h=0.4+0.9i
COMPLEX_COV = [[0.2853378675645906, 0.027108825968120774],
               [0.02710882596812077, 0.2970621324354095]]  # k=2, T=1.3, eta=(0.5,0.2), rho=0.4, alpha=0.8


def test_var_first_mode_matches_quadrature():
    p = ExactLawParams(NoiseSpec(1.0, [1.0]), SpectralVector.zeros(1), 1.0)
    assert exact_var_pairing(p, [1.0]) == pytest.approx(VAR_E1_T1, abs=1e-14)
    assert exact_var_pairing(p, [1.0]) == pytest.approx(0.5 - math.sin(2) / 4, abs=1e-15)


def test_var_higher_mode_matches_quadrature():
    spec = NoiseSpec(1.2, [1.0, 0.5, 0.3])
    p = ExactLawParams(spec, SpectralVector.zeros(3), 0.7)
    assert exact_var_pairing(p, [0, 0, 0.4 + 0.9j]) == pytest.approx(VAR_MODE3, abs=1e-14)


def test_mean_is_free_evolution():
    u0 = SpectralVector([1 + 1j, 0.5])
    p = ExactLawParams(NoiseSpec(1.0, [1.0, 0.5]), u0, 0.3)
    m = mean_coefficients(p)
    np.testing.assert_allclose(m, np.exp(-1j * np.array([1, 4]) * 0.3) * u0.coeffs)
    assert exact_mean_pairing(p, [1, 0]) == pytest.approx(m[0].real)
    assert exact_mean_pairing(p, [1j, 0]) == pytest.approx(m[0].imag)


def test_covariance_consistent_with_pairing(rng):
    spec = NoiseSpec.from_rule(0.9, "k^-2", 5)
    p = ExactLawParams(spec, SpectralVector.zeros(5), 2.2)
    C = mode_covariances(p)
    for _ in range(10):
        h = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        hv = np.stack([h.real, h.imag], -1)
        assert exact_var_pairing(p, h) == pytest.approx(np.einsum("ki,kij,kj->", hv, C, hv), rel=1e-12)


def test_complex_covariance_matches_quadrature():
    spec = NoiseSpec.complex_noise(0.8, [0.6, 0.5], [0.3, 0.2], rho=0.4)
    p = ExactLawParams(spec, SpectralVector.zeros(2), 1.3)
    np.testing.assert_allclose(mode_covariances(p)[1], COMPLEX_COV, atol=1e-13)


@settings(max_examples=40)
@given(st.floats(-1, 1), st.floats(0.1, 20), st.floats(-2, 2), st.floats(-2, 2))
def test_complex_pairing_matches_covariance(rho, T, hr, hi):
    spec = NoiseSpec.complex_noise(1.1, [1.0, 0.3], [0.7, 0.2], rho)
    p = ExactLawParams(spec, SpectralVector.zeros(2), T)
    h = np.array([hr + 1j * hi, hi - 0.5j * hr])
    hv = np.stack([h.real, h.imag], -1)
    direct = np.einsum("ki,kij,kj->", hv, mode_covariances(p), hv)
    assert exact_var_pairing_complex(p, h) == pytest.approx(direct, rel=1e-10, abs=1e-12)


def test_complex_without_second_component_is_real_noise():
    real = ExactLawParams(NoiseSpec(1.0, [1.0, 0.2]), SpectralVector.zeros(2), 1.7)
    cplx = ExactLawParams(NoiseSpec.complex_noise(1.0, [1.0, 0.2], [0.0, 0.0], 0.0),
                          SpectralVector.zeros(2), 1.7)
    h = [0.3 + 1j, -0.5j]
    assert exact_var_pairing(cplx, h) == pytest.approx(exact_var_pairing(real, h), rel=1e-13)


def test_complex_needs_complex_part():
    p = ExactLawParams(NoiseSpec(1.0, [1.0]), SpectralVector.zeros(1), 1.0)
    with pytest.raises(ValueError):
        exact_var_pairing_complex(p, [1.0])


@given(st.floats(0.0, 50.0), st.integers(1, 6))
def test_mode_covariances_psd(T, n):
    p = ExactLawParams(NoiseSpec.from_rule(1.0, "k^-4", n), SpectralVector.zeros(n), T)
    w = np.linalg.eigvalsh(mode_covariances(p))
    assert np.all(w >= -1e-12)


def test_galerkin_drops_high_modes():
    spec = NoiseSpec.from_rule(1.0, "k^-2", 4)
    p = ExactLawParams(spec, SpectralVector([1, 1, 1, 1]), 1.0, M=2)
    h = [0, 0, 1, 0]
    assert exact_var_pairing(p, h, galerkin=True) == 0.0
    assert exact_var_pairing(p, h) > 0
    assert exact_mean_pairing(p, h, galerkin=True) == 0.0


def test_mass_expectation():
    spec = NoiseSpec.from_rule(0.5, "k^-4", 3)
    p = ExactLawParams(spec, SpectralVector([1, 1j, 0]), 2.0)
    assert mass_expectation(p) == pytest.approx(2 + 0.25 * 2 * (1 + 1 / 16 + 1 / 81))
    assert mass_expectation(ExactLawParams(spec, SpectralVector([1, 1j, 0]), 0.0)) == 2.0


def test_sampler_zero_noise_is_deterministic(rng):
    p = ExactLawParams(NoiseSpec(0.0, [1.0, 0.5]), SpectralVector([1, 2j]), 0.4)
    s = sample_galerkin_exact(p, rng)
    np.testing.assert_allclose(s.coeffs, mean_coefficients(p))


def test_sampler_moments(rng):
    spec = NoiseSpec.from_rule(1.0, "k^-4", 3)
    p = ExactLawParams(spec, SpectralVector([0.5, 0, 1j]), 1.5)
    z = sample_galerkin_exact(p, rng, size=40000)
    assert z.shape == (40000, 3)
    emp = np.cov(np.stack([z[:, 1].real, z[:, 1].imag]))
    np.testing.assert_allclose(emp, mode_covariances(p)[1], atol=5 * emp.max() / math.sqrt(40000) * 2)


def test_lmgfs():
    spec = NoiseSpec(2.0, [1.0, 0.5])
    assert continuous_lmgf(spec, [1, 1j]) == pytest.approx(1.0 * (1 + 0.5))
    assert galerkin_lmgf(spec, 1, [1, 1j]) == pytest.approx(1.0)


def test_fernique_closed_form():
    assert fernique_closed_form([1.0], 0.25) == pytest.approx(math.sqrt(2))
    assert fernique_closed_form([1.0, 0.5], 0.5) == math.inf
    assert fernique_closed_form([1.0, 1 / 16, 1 / 81], 0.25) == pytest.approx(
        (0.5 * (1 - 1 / 32) * (1 - 1 / 162)) ** -0.5)


def test_fernique_check(rng):
    chk = fernique_identity_check([1.0, 0.25], 0.1, rng, samples=200000)
    assert abs(chk.mc - chk.closed_form) <= 4 * chk.se
    with pytest.raises(DivergentMoment):
        fernique_identity_check([1.0], 0.5, rng)


def test_params_validation():
    spec = NoiseSpec(1.0, [1.0])
    with pytest.raises(ValueError):
        ExactLawParams(spec, SpectralVector.zeros(1), -1.0)
    with pytest.raises(ValueError):
        ExactLawParams(spec, SpectralVector.zeros(1), 1.0, M=2)
    with pytest.raises(ValueError):
        ExactLawParams(spec, SpectralVector([0, 1]), 1.0)


@pytest.mark.parametrize("rho", [-0.8, 0.0, 0.6])
def test_complex_variance_remainder_bounded(rho):
    spec = NoiseSpec.complex_noise(1.0, [1.0, 0.3], [0.5, 0.1], rho)
    h = np.array([0.7 + 0.2j, -0.4j])
    slope = spec.alpha**2 / 2 * np.sum(spec.etas * np.abs(h) ** 2)
    Ts = np.linspace(1.0, 1000.0, 4000)
    rem = np.array([exact_var_pairing_complex(ExactLawParams(spec, SpectralVector.zeros(2), T), h) - slope * T
                    for T in Ts])
    # oscillating remainder: no growth from the first to the second half of the sweep
    assert np.abs(rem).max() < 1.0
    assert np.abs(rem[2000:]).max() <= 1.05 * np.abs(rem[:2000]).max()
