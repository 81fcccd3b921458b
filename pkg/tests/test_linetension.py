import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dislocnet.errors import DomainError, InvalidNetworkError
from dislocnet.kernel import KernelOnCircle, MaterialCubic, kernel_positivity
from dislocnet.linetension import (DislocationNetwork, Psi0, check_frank,
                                   network_line_energy, psi0_cubic, psi0_quadrature)

from conftest import unit

angles = st.floats(0, 2 * np.pi)
comps = st.floats(-5, 5, allow_nan=False)


def test_psi0_cubic_screw_and_edge(mat):
    assert psi0_cubic([1, 0], [0, 1], mat) == pytest.approx(1.0, rel=1e-15)
    assert psi0_cubic([1, 0], [1, 0], mat) == pytest.approx(1.5, rel=1e-15)


@given(angles)
def test_psi0_cubic_nine_times(theta):
    m = MaterialCubic(mu=4 * np.pi, nu=0.3)
    n = unit(theta)
    assert psi0_cubic([3, 0], n, m) == pytest.approx(9 * psi0_cubic([1, 0], n, m), rel=1e-14)


def test_psi0_quadrature_edge(cubic_kernel):
    assert psi0_quadrature([1, 0], [1, 0], cubic_kernel) == pytest.approx(1.5, rel=1e-10)
    assert psi0_quadrature([0, 0], [1, 0], cubic_kernel) == 0.0


def test_psi0_quadrature_quadratic(cubic_kernel):
    b, n = np.array([0.3, -1.2]), unit(0.4)
    assert psi0_quadrature(2 * b, n, cubic_kernel) == pytest.approx(
        4 * psi0_quadrature(b, n, cubic_kernel), rel=1e-12)


def test_psi0_quadrature_constant_kernel():
    # 2 c |b|^2 int (1+t^2)^(-3/2) dt = 4 c |b|^2
    k = KernelOnCircle.from_function(lambda z: 0.25 * np.eye(2), 2)
    assert psi0_quadrature([1.0, 2.0], unit(1.0), k) == pytest.approx(5.0, rel=1e-10)


def test_quadrature_matches_closed_form_random():
    rng = np.random.default_rng(1)
    for _ in range(100):
        nu = rng.uniform(-0.9, 0.45)
        m = MaterialCubic(mu=rng.uniform(0.5, 20), nu=nu)
        b = rng.normal(size=2)
        n = unit(rng.uniform(0, 2 * np.pi))
        q = psi0_quadrature(b, n, KernelOnCircle.cubic(m), tol=1e-10)
        assert abs(q - psi0_cubic(b, n, m)) <= 1e-8 * psi0_cubic(b, n, m)


def test_non_unit_normal_rejected(mat, cubic_kernel):
    with pytest.raises(DomainError):
        psi0_cubic([1, 0], [1, 1], mat)
    with pytest.raises(DomainError):
        psi0_quadrature([1, 0], [0.5, 0], cubic_kernel)


@settings(max_examples=40)
@given(comps, comps, angles, st.floats(-0.9, 0.45))
def test_psi0_even_and_positive(b1, b2, theta, nu):
    m = MaterialCubic(mu=1.0, nu=nu)
    b, n = np.array([b1, b2]), unit(theta)
    v = psi0_cubic(b, n, m)
    assert v == pytest.approx(psi0_cubic(-b, n, m), rel=1e-14, abs=1e-300)
    assert v == pytest.approx(psi0_cubic(b, -n, m), rel=1e-14, abs=1e-300)
    c_low, _ = kernel_positivity(KernelOnCircle.cubic(m), 64)
    assert v >= 4 * c_low * (b @ b) * (1 - 1e-12)


def test_psi0_class_general_kernel_agrees_with_cubic(mat):
    k = KernelOnCircle.from_function(lambda z: KernelOnCircle.cubic(mat)(z), 2)
    general = Psi0(k)
    cubic = Psi0.cubic(mat)
    for theta in np.linspace(0, np.pi, 7):
        n = unit(theta)
        b = np.array([1.0, -2.0])
        assert general(b, n) == pytest.approx(cubic(b, n), rel=1e-9)


def test_network_single_segment(cubic_psi0):
    net = DislocationNetwork(nodes=[[0, 0], [0, 1]], segments=[(0, 1, [1, 0])],
                             open_ends={0, 1})
    assert network_line_energy(net, cubic_psi0) == pytest.approx(1.5, rel=1e-15)


def test_network_empty(cubic_psi0):
    assert network_line_energy(DislocationNetwork(nodes=np.zeros((0, 2))), cubic_psi0) == 0.0


def test_network_collinear_split(cubic_psi0):
    whole = DislocationNetwork(nodes=[[0, 0], [1, 2]], segments=[(0, 1, [1, 1])],
                               open_ends={0, 1})
    halves = DislocationNetwork(nodes=[[0, 0], [0.5, 1], [1, 2]],
                                segments=[(0, 1, [1, 1]), (1, 2, [1, 1])], open_ends={0, 2})
    assert network_line_energy(halves, cubic_psi0) == pytest.approx(
        network_line_energy(whole, cubic_psi0), rel=1e-14)


def test_frank_examples():
    crossing = DislocationNetwork(nodes=[[0, 0.5], [1, 0.5]], segments=[(0, 1, [1, 0])],
                                  domain=1.0)
    assert check_frank(crossing)
    split = DislocationNetwork(
        nodes=[[0, 0], [1, 0], [2, 1], [2, -1]],
        segments=[(0, 1, [1, 1]), (1, 2, [1, 0]), (1, 3, [0, 1])], open_ends={0, 2, 3})
    assert check_frank(split)
    bad = DislocationNetwork(nodes=[[0, 0], [1, 0], [2, 0]],
                             segments=[(0, 1, [1, 0]), (1, 2, [0, 1])], open_ends={0, 2})
    assert not check_frank(bad)


def test_frank_violation_rejected_by_energy(cubic_psi0):
    bad = DislocationNetwork(nodes=[[0, 0], [1, 0], [2, 0]],
                             segments=[(0, 1, [1, 0]), (1, 2, [0, 1])], open_ends={0, 2})
    with pytest.raises(InvalidNetworkError):
        network_line_energy(bad, cubic_psi0)


def test_zero_length_segment_rejected():
    with pytest.raises(InvalidNetworkError):
        DislocationNetwork(nodes=[[0, 0], [0, 0]], segments=[(0, 1, [1, 0])])


@settings(max_examples=25)
@given(st.floats(0.1, 5), angles)
def test_closed_loop_conserves_and_scales(r, theta):
    # a closed triangle loop with constant b satisfies Frank everywhere
    m = MaterialCubic(mu=4 * np.pi, nu=1 / 3)
    psi = Psi0.cubic(m)
    pts = np.array([[0, 0], [1, 0], [0.3, 0.8]]) @ np.array(
        [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]).T
    segs = [(0, 1, [1, 0]), (1, 2, [1, 0]), (2, 0, [1, 0])]
    a = network_line_energy(DislocationNetwork(pts, segs), psi)
    b = network_line_energy(DislocationNetwork(r * pts, segs), psi)
    assert b == pytest.approx(r * a, rel=1e-12)
