import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from schrodinger_ldp.exceptions import OutsideRange
from schrodinger_ldp.spectral import (NoiseSpec, SpectralVector, apply_pinv_sqrtQ, apply_sqrtQ,
                                      etas_from_rule, mass, project, real_inner)

finite = st.floats(-1e3, 1e3, allow_nan=False)
cplx = st.builds(complex, finite, finite)


def vectors(M):
    return st.lists(cplx, min_size=M, max_size=M).map(SpectralVector)


@st.composite
def vector_pairs(draw):
    M = draw(st.integers(1, 8))
    return draw(vectors(M)), draw(vectors(M))


def test_vector_is_immutable():
    v = SpectralVector([1, 2j])
    with pytest.raises(ValueError):
        v.coeffs[0] = 3
    assert v.M == 2 and v == SpectralVector([1.0, 2j])


def test_basis_and_padding():
    e2 = SpectralVector.basis(2, 3)
    assert list(e2.coeffs) == [0, 1, 0]
    assert e2.padded(5).shape == (5,)
    with pytest.raises(ValueError):
        e2.padded(1)
    with pytest.raises(ValueError):
        SpectralVector.basis(4, 3)


def test_real_inner_is_real_part():
    x, y = SpectralVector([1 + 2j, 3]), SpectralVector([2 - 1j, 1j])
    assert real_inner(x, y) == pytest.approx(np.real(np.vdot(y.coeffs, x.coeffs)))
    assert real_inner([1j], [1]) == 0.0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        real_inner([1, 2], [1])


@given(vector_pairs())
def test_inner_symmetric_and_mass(pair):
    x, y = pair
    assert real_inner(x, y) == pytest.approx(real_inner(y, x))
    assert mass(x) == pytest.approx(real_inner(x, x))
    assert mass(x) >= 0


@given(vector_pairs(), st.floats(-10, 10))
def test_inner_bilinear(pair, c):
    x, y = pair
    cx = SpectralVector(c * x.coeffs)
    assert real_inner(cx, y) == pytest.approx(c * real_inner(x, y), rel=1e-9, abs=1e-6)


@given(st.integers(1, 8).flatmap(vectors), st.integers(0, 9))
def test_project_idempotent_and_contracting(x, m):
    p = project(x, m)
    assert project(p, m) == p
    assert mass(p) <= mass(x) + 1e-9
    assert np.all(p.coeffs[m:] == 0)


def test_rule():
    np.testing.assert_allclose(etas_from_rule("k^-4", 3), [1, 1 / 16, 1 / 81])
    np.testing.assert_allclose(etas_from_rule("k^-1.5", 2), [1, 2**-1.5])
    with pytest.raises(ValueError):
        etas_from_rule("k^4", 3)


@pytest.mark.parametrize("etas", [[0.5, 1.0], [-1.0], [], [np.nan]])
def test_spec_rejects_bad_spectra(etas):
    with pytest.raises(ValueError):
        NoiseSpec(1.0, etas)


def test_spec_rejects_negative_alpha():
    with pytest.raises(ValueError):
        NoiseSpec(-1.0, [1.0])


def test_complex_noise_effective_spectrum():
    s = NoiseSpec.complex_noise(1.0, [1.0, 0.25], [0.5, 0.1], rho=0.3)
    np.testing.assert_allclose(s.etas, [1.5, 0.35])
    with pytest.raises(ValueError):
        NoiseSpec.complex_noise(1.0, [1.0], [1.0], rho=1.5)


def test_sqrtq_pinv_roundtrip():
    spec = NoiseSpec(1.0, [4.0, 1.0, 0.0])
    x = SpectralVector([2 + 2j, 1j, 0])
    y = apply_pinv_sqrtQ(spec, x)
    np.testing.assert_allclose(y.coeffs, [1 + 1j, 1j, 0])
    np.testing.assert_allclose(apply_sqrtQ(spec, y).coeffs, x.coeffs)


def test_pinv_outside_range():
    spec = NoiseSpec(1.0, [1.0, 0.0])
    with pytest.raises(OutsideRange):
        apply_pinv_sqrtQ(spec, [1, 1e-6])
    # modes past the stored spectrum count as eta = 0
    with pytest.raises(OutsideRange):
        apply_pinv_sqrtQ(NoiseSpec(1.0, [1.0]), [1, 1])
    assert apply_pinv_sqrtQ(spec, [1, 1e-14]).M == 2


@settings(max_examples=50)
@given(arrays(float, 5, elements=st.floats(0.01, 10)), st.integers(1, 5).flatmap(vectors))
def test_pinv_inverts_on_positive_spectrum(raw, x):
    spec = NoiseSpec(1.0, np.sort(raw)[::-1])
    back = apply_sqrtQ(spec, apply_pinv_sqrtQ(spec, x))
    np.testing.assert_allclose(back.coeffs, x.coeffs, rtol=1e-10, atol=1e-10)
