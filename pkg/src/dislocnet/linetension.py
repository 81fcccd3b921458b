"""Prelogarithmic factor and unrelaxed line-tension energy of networks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, InvalidNetworkError
from .kernel import KernelOnCircle, MaterialCubic, kernel_positivity

UNIT_TOL = 1e-12


def _unit_normal(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if n.shape != (2,) or abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
        raise DomainError(f"normal must be a unit 2-vector, got {n}")
    return n


def psi0_quadrature(b, n, k: KernelOnCircle, tol: float = 1e-10) -> float:
    """``2 * int_R Gamma(n + t n_perp) b . b dt`` by adaptive quadrature.

    With ``t = tan(theta)`` the integrand becomes
    ``cos(theta) * b . G(n cos(theta) + n_perp sin(theta)) b`` on (-pi/2, pi/2).
    """
    if tol <= 0:
        raise DomainError("tolerance must be positive")
    n = _unit_normal(n)
    b = np.asarray(b, dtype=float)
    if b.shape != (k.dim,):
        raise DomainError(f"Burgers vector must have {k.dim} components")
    if not np.any(b):
        return 0.0
    base = np.arctan2(n[1], n[0])

    def integrand(theta):
        g = k.at_angles(base + theta)
        return np.cos(theta) * (b @ g @ b)

    val, _ = integrate.quad(integrand, -np.pi / 2, np.pi / 2, epsrel=tol,
                            epsabs=0.0, limit=200)
    return 2.0 * val


def psi0_cubic(b, n, mat: MaterialCubic) -> float:
    """Closed form ``mu/(4 pi) * (|b|^2 + eta (b.n)^2)``."""
    n = _unit_normal(n)
    b = np.asarray(b, dtype=float)
    if b.shape != (2,):
        raise DomainError("the cubic closed form needs N = 2")
    return mat.unit * (b @ b + mat.eta * (b @ n) ** 2)


class Psi0:
    """Line-tension density ``psi0(b, n) = b . Q(n) b``.

    ``Q(n)`` is either the cubic closed form or the quadrature of the kernel.
    Accepts real Burgers vectors.
    """

    def __init__(self, kernel: KernelOnCircle | None = None, *,
                 material: MaterialCubic | None = None, tol: float = 1e-10):
        if kernel is None and material is None:
            raise DomainError("need a kernel or a cubic material")
        self.material = material
        self.kernel = kernel if kernel is not None else KernelOnCircle.cubic(material)
        self.tol = tol
        self.dim = self.kernel.dim
        self._cache = {}
        if material is None:
            kernel_positivity(self.kernel)

    @classmethod
    def cubic(cls, mat: MaterialCubic) -> "Psi0":
        return cls(material=mat)

    @property
    def unit(self) -> float:
        return self.material.unit if self.material is not None else 1.0

    def matrices_at(self, theta) -> np.ndarray:
        """``Q`` at normal angles ``theta`` (shape ``theta.shape + (N, N)``)."""
        theta = np.asarray(theta, dtype=float)
        if self.material is not None:
            c, s = np.cos(theta), np.sin(theta)
            nn = np.stack([np.stack([c * c, c * s], -1), np.stack([c * s, s * s], -1)], -2)
            return self.material.unit * (np.eye(2) + self.material.eta * nn)
        flat = theta.reshape(-1)
        out = np.empty((flat.size, self.dim, self.dim))
        for i, t in enumerate(flat):
            key = round(float(np.mod(t, 2 * np.pi)), 14)
            if key not in self._cache:
                self._cache[key] = self._quad_matrix(t)
            out[i] = self._cache[key]
        return out.reshape(theta.shape + (self.dim, self.dim))

    def _quad_matrix(self, base: float) -> np.ndarray:
        def integrand(theta):
            return np.cos(theta) * self.kernel.at_angles(base + theta)

        val, _ = integrate.quad_vec(integrand, -np.pi / 2, np.pi / 2,
                                    epsrel=self.tol, epsabs=0.0)
        return 2.0 * val

    def matrix(self, n) -> np.ndarray:
        n = _unit_normal(n)
        return self.matrices_at(np.arctan2(n[1], n[0]))

    def __call__(self, b, n) -> float:
        b = np.asarray(b, dtype=float)
        n = _unit_normal(n)
        if self.material is not None:
            return psi0_cubic(b, n, self.material)
        return float(b @ self.matrix(n) @ b)


# -- networks ----------------------------------------------------------------


@dataclass
class DislocationNetwork:
    """Polygonal network: node positions and oriented segments with Burgers vectors.

    Segments are ``(start, end, b)``.  Nodes listed in ``open_ends`` (or lying
    on the boundary of ``(0, domain)^2`` when ``domain`` is set) are exempt
    from the conservation check.
    """

    nodes: np.ndarray
    segments: list = field(default_factory=list)
    open_ends: frozenset = frozenset()
    domain: float | None = None

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        segs = []
        for i, j, b in self.segments:
            i, j = int(i), int(j)
            if not (0 <= i < len(self.nodes) and 0 <= j < len(self.nodes)):
                raise InvalidNetworkError(f"segment ({i}, {j}) refers to a missing node")
            if np.linalg.norm(self.nodes[j] - self.nodes[i]) == 0:
                raise InvalidNetworkError(f"segment ({i}, {j}) has zero length")
            segs.append((i, j, np.asarray(b)))
        self.segments = segs
        self.open_ends = frozenset(self.open_ends)

    @property
    def dim(self) -> int:
        return len(self.segments[0][2]) if self.segments else 0

    def is_open(self, node: int) -> bool:
        if node in self.open_ends:
            return True
        if self.domain is None:
            return False
        x = self.nodes[node]
        on = np.isclose(x, 0.0, atol=1e-12) | np.isclose(x, self.domain, atol=1e-12)
        return bool(np.any(on))

    def segment_geometry(self):
        """Yield ``(length, normal, b)``; the normal is the tangent turned by -90 deg."""
        for i, j, b in self.segments:
            v = self.nodes[j] - self.nodes[i]
            length = float(np.linalg.norm(v))
            yield length, np.array([v[1], -v[0]]) / length, b


def check_frank(net: DislocationNetwork) -> bool:
    """True iff Burgers vectors balance at every closed node."""
    if not net.segments:
        return True
    balance = np.zeros((len(net.nodes), net.dim))
    for i, j, b in net.segments:
        balance[i] -= b
        balance[j] += b
    for node in range(len(net.nodes)):
        if net.is_open(node):
            continue
        if not np.allclose(balance[node], 0.0, atol=1e-12):
            return False
    return True


def network_line_energy(net: DislocationNetwork, psi) -> float:
    """``sum_segments length * psi(b, normal)``."""
    if not check_frank(net):
        raise InvalidNetworkError("Burgers vectors are not conserved at some node")
    return float(sum(length * psi(b, n) for length, n, b in net.segment_geometry()))
