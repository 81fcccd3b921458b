import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dislocnet.errors import DomainError, InadmissibleKernelError
from dislocnet.kernel import (KernelOnCircle, MaterialCubic, cubic_symbol, fourier_symbol,
                              gamma_cubic, kernel_positivity, spectral_multiplier)

finite = st.floats(-10, 10, allow_nan=False)
nus = st.floats(-0.95, 0.49)


def test_material_validation():
    with pytest.raises(DomainError):
        MaterialCubic(mu=-1.0, nu=0.2)
    with pytest.raises(DomainError):
        MaterialCubic(mu=1.0, nu=0.5)
    with pytest.raises(DomainError):
        MaterialCubic(mu=1.0, nu=-1.0)
    m = MaterialCubic(mu=4 * np.pi, nu=1 / 3)
    assert m.eta == pytest.approx(0.5)
    assert m.unit == pytest.approx(1.0)
    assert MaterialCubic.from_eta(0.5).nu == pytest.approx(1 / 3)


@given(nus)
def test_eta_range(nu):
    eta = MaterialCubic(mu=1.0, nu=nu).eta
    assert -0.5 < eta < 1


def test_gamma_cubic_axis():
    m = MaterialCubic(mu=16 * np.pi * (2 / 3), nu=1 / 3)
    np.testing.assert_allclose(gamma_cubic([1, 0], m), [[4 / 3, 0], [0, 1 / 3]], atol=1e-14)


def test_gamma_cubic_degree_minus_three():
    m = MaterialCubic(mu=16 * np.pi * (2 / 3), nu=1 / 3)
    np.testing.assert_allclose(gamma_cubic([0, 2], m), np.array([[1 / 3, 0], [0, 4 / 3]]) / 8,
                               atol=1e-14)


def test_gamma_cubic_even_random():
    rng = np.random.default_rng(0)
    m = MaterialCubic(mu=3.0, nu=0.27)
    z = rng.normal(size=(20, 2))
    np.testing.assert_array_equal(gamma_cubic(z, m), gamma_cubic(-z, m))


def test_gamma_cubic_singular():
    with pytest.raises(DomainError):
        gamma_cubic([0.0, 0.0], MaterialCubic())


@given(st.floats(0, 2 * np.pi), nus, st.floats(0.1, 5))
def test_gamma_cubic_trace_identity(theta, nu, r):
    m = MaterialCubic(mu=2.5, nu=nu)
    z = r * np.array([np.cos(theta), np.sin(theta)])
    expected = m.mu * (2 - nu) / (16 * np.pi * (1 - nu) * r**3)
    assert np.trace(gamma_cubic(z, m)) == pytest.approx(expected, rel=1e-12)


def test_positivity_matches_brute_force_scan():
    # prefactor mu / (16 pi (1 - nu)) = 1
    m = MaterialCubic(mu=16 * np.pi * (2 / 3), nu=1 / 3)
    k = KernelOnCircle.cubic(m)
    theta = np.linspace(0, 2 * np.pi, 10_000, endpoint=False)
    z = np.column_stack([np.cos(theta), np.sin(theta)])
    eig = np.linalg.eigvalsh(gamma_cubic(z, m))
    c_low, c_high = kernel_positivity(k, 720)
    assert c_low == pytest.approx(eig.min(), rel=1e-12)
    assert c_high == pytest.approx(eig.max(), rel=1e-12)
    assert c_low == pytest.approx(1 / 3, rel=1e-12)
    assert c_high == pytest.approx(4 / 3, rel=1e-12)


def test_positivity_isotropic_nu_zero():
    m = MaterialCubic(mu=16 * np.pi, nu=0.0)
    c_low, c_high = kernel_positivity(KernelOnCircle.cubic(m))
    assert c_low == pytest.approx(1.0) and c_high == pytest.approx(1.0)


def test_positivity_rejects_negative_eigenvalue():
    k = KernelOnCircle.from_function(lambda z: np.diag([1.0, -0.1]), 2)
    with pytest.raises(InadmissibleKernelError):
        kernel_positivity(k, 16)


def test_positivity_rejects_odd_kernel():
    k = KernelOnCircle.from_function(lambda z: np.eye(2) * (2 + z[0]), 2)
    with pytest.raises(InadmissibleKernelError):
        kernel_positivity(k, 16)


def test_positivity_rejects_asymmetric():
    k = KernelOnCircle.from_function(lambda z: np.array([[1.0, 0.2], [0.0, 1.0]]), 2)
    with pytest.raises(InadmissibleKernelError):
        kernel_positivity(k, 16)


@settings(max_examples=30)
@given(st.floats(0, 2 * np.pi), st.floats(-0.9, 0.45), st.floats(-3, 3), st.floats(-3, 3))
def test_quadratic_form_bounds(theta, nu, v1, v2):
    k = KernelOnCircle.cubic(MaterialCubic(mu=1.0, nu=nu))
    c_low, c_high = kernel_positivity(k, 64)
    v = np.array([v1, v2])
    q = v @ k(np.array([np.cos(theta), np.sin(theta)])) @ v
    assert c_low * (v @ v) * (1 - 1e-12) <= q <= c_high * (v @ v) * (1 + 1e-12)


def test_spectral_multiplier_examples(cubic_kernel):
    np.testing.assert_array_equal(spectral_multiplier([0.0, 0.0], cubic_kernel), np.zeros((2, 2)))
    np.testing.assert_allclose(spectral_multiplier([2.0, 0.0], cubic_kernel),
                               2 * cubic_kernel([1.0, 0.0]), rtol=1e-14)


@given(finite, finite, st.floats(0.01, 10))
def test_spectral_multiplier_homogeneous_and_even(x, y, t):
    k = KernelOnCircle.cubic(MaterialCubic(mu=1.0, nu=0.3))
    xi = np.array([x, y])
    m = spectral_multiplier(xi, k)
    np.testing.assert_allclose(spectral_multiplier(t * xi, k), t * m, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(spectral_multiplier(-xi, k), m, rtol=1e-12, atol=1e-14)


def test_table_roundtrip_and_interpolation(tmp_path, cubic_kernel):
    path = tmp_path / "k.csv"
    cubic_kernel.to_csv(path, 720)
    k = KernelOnCircle.from_csv(path)
    theta = np.linspace(0, 2 * np.pi, 37)
    np.testing.assert_allclose(k.at_angles(theta), cubic_kernel.at_angles(theta), rtol=1e-4,
                               atol=1e-12)
    nodes = 2 * np.pi * np.arange(720) / 720
    np.testing.assert_allclose(k.at_angles(nodes), cubic_kernel.at_angles(nodes), rtol=1e-12,
                               atol=1e-15)


def test_table_shape_checks():
    with pytest.raises(DomainError):
        KernelOnCircle.from_table(np.ones((4, 2, 2)))
    with pytest.raises(DomainError):
        KernelOnCircle.from_table(np.ones((16, 2, 3)))


def test_numerical_symbol_matches_closed_form(mat, cubic_kernel):
    # the generic quadrature path against the closed cubic symbol
    tab = KernelOnCircle.from_function(lambda z: gamma_cubic(z, mat), 2)
    num = fourier_symbol(tab, m_ang=64)
    theta = 2 * np.pi * np.arange(64) / 64
    np.testing.assert_allclose(num.at_angles(theta), cubic_symbol(mat).at_angles(theta),
                               rtol=1e-10, atol=1e-12)


def test_symbol_of_isotropic_kernel():
    # S(w) = pi c int |cos| = 4 pi c for Gamma_hat = c I
    k = KernelOnCircle.from_function(lambda z: 0.7 * np.eye(1), 1)
    s = fourier_symbol(k, m_ang=16)
    np.testing.assert_allclose(s.at_angles(np.linspace(0, 6, 5)), 4 * np.pi * 0.7,
                               rtol=1e-12)
