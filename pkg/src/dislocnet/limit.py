"""Strain-gradient limit functionals: self-energy, full limit energy, basis change."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, InvalidDensityError, OutOfSpanError
from .phasefield import TorusGrid, elastic_energy_spectral

_MATCH_TOL = 1e-9


def _polygon_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass
class AffineCell:
    """Polygon (counter-clockwise vertices) carrying ``u(x) = A x + d``."""

    vertices: np.ndarray
    A: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.d = np.atleast_1d(np.asarray(self.d, dtype=float))
        if len(self.vertices) < 3:
            raise DomainError("a cell needs at least three vertices")
        if self.A.shape != (self.d.size, 2):
            raise DomainError("cell map must have A of shape (N, 2) and d of length N")
        if _polygon_area(self.vertices) < 0:
            self.vertices = self.vertices[::-1]

    @property
    def area(self) -> float:
        return _polygon_area(self.vertices)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.A.T + self.d

    def edges(self):
        v = self.vertices
        return [(v[k], v[(k + 1) % len(v)]) for k in range(len(v))]


@dataclass
class PiecewiseAffineSlip:
    """Conforming polygonal partition of ``(0, L)^2`` with one affine slip per cell.

    ``periodic`` flags the axes along which opposite sides of the square are
    identified; edges on a non-identified side are domain boundary and carry
    no jump.
    """

    L: float
    cells: list
    periodic: tuple = (True, True)
    _edges: list = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError("L must be positive")
        self.cells = [c if isinstance(c, AffineCell) else AffineCell(**c) for c in self.cells]
        if not self.cells:
            raise DomainError("need at least one cell")
        dims = {c.d.size for c in self.cells}
        if len(dims) != 1:
            raise DomainError("all cells must have the same slip dimension")
        self.periodic = tuple(bool(p) for p in self.periodic)
        total = sum(c.area for c in self.cells)
        if abs(total - self.L**2) > 1e-9 * self.L**2:
            raise DomainError(f"cells cover area {total}, expected {self.L**2}")

    @property
    def dim(self) -> int:
        return self.cells[0].d.size

    def _shifts(self):
        s1 = [-self.L, 0.0, self.L] if self.periodic[0] else [0.0]
        s2 = [-self.L, 0.0, self.L] if self.periodic[1] else [0.0]
        return [np.array([a, b]) for a in s1 for b in s2]

    def interfaces(self):
        """``(cell, neighbour, p, q, shift)``: edge ``p -> q`` of ``cell`` glued to
        ``neighbour`` evaluated at ``x + shift``.  Each interface is listed once."""
        if self._edges is not None:
            return self._edges
        tol = _MATCH_TOL * self.L
        out, done = [], []
        for ci, c in enumerate(self.cells):
            for p, q in c.edges():
                mid = 0.5 * (p + q)
                if any(cj == ci and np.abs(m - mid).max() <= tol for cj, m in done):
                    continue
                hit = self._match(ci, p, q, tol)
                if hit is None:
                    if self._on_open_boundary(p, q):
                        continue
                    raise DomainError(f"edge {p.tolist()} -> {q.tolist()} has no matching "
                                      "neighbour edge (partition is not conforming)")
                nj, shift = hit
                out.append((ci, nj, p, q, shift))
                done.append((nj, mid + shift))
        self._edges = out
        return out

    def _match(self, ci, p, q, tol):
        for shift in self._shifts():
            for nj, nb in enumerate(self.cells):
                if nj == ci and not np.any(shift):
                    continue
                for a, b in nb.edges():
                    if (np.abs(a - (q + shift)).max() <= tol
                            and np.abs(b - (p + shift)).max() <= tol):
                        return nj, shift
        return None

    def _on_open_boundary(self, p, q) -> bool:
        tol = _MATCH_TOL * self.L
        for ax in range(2):
            if self.periodic[ax]:
                continue
            for side in (0.0, self.L):
                if abs(p[ax] - side) <= tol and abs(q[ax] - side) <= tol:
                    return True
        return False

    def jump(self, ci, nj, shift, x) -> np.ndarray:
        """``u_neighbour - u_cell`` at ``x`` on the interface."""
        return self.cells[nj](x + shift) - self.cells[ci](x)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {"L": self.L, "periodic": list(self.periodic),
                "cells": [{"vertices": c.vertices.tolist(), "A": c.A.tolist(),
                           "d": c.d.tolist()} for c in self.cells]}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, data) -> "PiecewiseAffineSlip":
        return cls(L=float(data["L"]), cells=[AffineCell(**c) for c in data["cells"]],
                   periodic=tuple(data.get("periodic", (True, True))))

    @classmethod
    def from_json(cls, path) -> "PiecewiseAffineSlip":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def strip_slip(A, L: float) -> PiecewiseAffineSlip:
    """``u(x) = A x`` on ``0 < x1 < L/2`` and zero elsewhere.

    Periodic in ``x1`` only: ``u`` is not ``L``-periodic in ``x2`` unless
    ``A e2 = 0``, so the sides ``x2 = 0, L`` are treated as boundary.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    h = L / 2
    strip = AffineCell([[0, 0], [h, 0], [h, L], [0, L]], A, np.zeros(n))
    rest = AffineCell([[h, 0], [L, 0], [L, L], [h, L]], np.zeros((n, 2)), np.zeros(n))
    return PiecewiseAffineSlip(L, [strip, rest], periodic=(True, False))


# -- densities ---------------------------------------------------------------


def check_homogeneous(g, samples, ts=(0.5, 2.0, 3.7), rtol: float = 1e-9):
    """Raise :class:`InvalidDensityError` unless ``g(tA) = t g(A)`` on the samples."""
    for A in samples:
        A = np.asarray(A, dtype=float)
        gA = g(A)
        for t in ts:
            if abs(g(t * A) - t * gA) > rtol * max(1.0, abs(t * gA)):
                raise InvalidDensityError("density is not positively 1-homogeneous")


def grid_density(psi_inf):
    """``g(A) = psi_inf(A e1, e1) + psi_inf(A e2, e2)`` (column-grid construction)."""
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])

    def g(A):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return float(psi_inf(A[:, 0], e1) + psi_inf(A[:, 1], e2))

    return g


def _edge_integral(g, jump_at, p, q, n, tol):
    """``int_edge g(jump (x) n) ds`` along the segment ``p -> q``."""
    length = float(np.linalg.norm(q - p))
    j0, j1 = jump_at(p), jump_at(q)
    # the jump is affine along the edge; two cases are exact by homogeneity
    if not np.any(j0) or not np.any(j1):
        return length * 0.5 * g(np.outer(j0 + j1, n))
    if np.allclose(j0, j1, atol=0, rtol=1e-15):
        return length * g(np.outer(j0, n))

    def f(s):
        return g(np.outer(jump_at(p + s * (q - p)), n))

    val, _ = integrate.quad(f, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    return length * val


def self_energy(u: PiecewiseAffineSlip, g, tol: float = 1e-12, detail: bool = False):
    """``sum_cells area g(A_c) + sum_edges int g([u] (x) n) ds``.

    ``[u]`` is the trace difference across the edge and ``n`` the unit normal
    pointing towards the side whose trace is taken first.
    """
    samples = [c.A for c in u.cells if np.any(c.A)]
    bulk = sum(c.area * g(c.A) for c in u.cells)
    jump = 0.0
    for ci, nj, p, q, shift in u.interfaces():
        t = q - p
        n = np.array([t[1], -t[0]]) / np.linalg.norm(t)  # outward for the cell

        def jump_at(x, ci=ci, nj=nj, shift=shift):
            return u.jump(ci, nj, shift, x)

        samples.append(np.outer(jump_at(0.5 * (p + q)), n))
        jump += _edge_integral(g, jump_at, p, q, n, tol)
    samples = [s for s in samples if np.any(s)]
    check_homogeneous(g, samples[:8])
    if detail:
        return {"bulk": float(bulk), "jump": float(jump), "total": float(bulk + jump)}
    return float(bulk + jump)


def network_bulk_energy(grad, L: float, g) -> float:
    """Midpoint quadrature of ``int g(grad u)`` from samples of shape ``(M, M, N, 2)``."""
    grad = np.asarray(grad, dtype=float)
    if grad.ndim != 4 or grad.shape[0] != grad.shape[1] or grad.shape[-1] != 2:
        raise DomainError("gradient samples must have shape (M, M, N, 2)")
    h = L / grad.shape[0]
    vals = [g(grad[i, j]) for i in range(grad.shape[0]) for j in range(grad.shape[1])]
    return float(h * h * np.sum(vals))


def limit_energy(u: TorusGrid, g, kernel, theta_j: float | None = None) -> dict:
    """Discrete ``E_0``: self-energy from forward differences plus the spectral term.

    An increment counts as a jump when ``|du| > theta_J``, by default
    ``10 h median|grad u|``.  Jumps contribute ``h g(du (x) e_k)``; the
    remaining increments form the absolutely continuous gradient.
    """
    v, h = u.values, u.h
    d1 = np.roll(v, -1, axis=0) - v
    d2 = np.roll(v, -1, axis=1) - v
    grad = np.stack([d1, d2], axis=-1) / h  # (M, M, N, 2)
    if theta_j is None:
        theta_j = 10 * h * float(np.median(np.linalg.norm(grad, axis=(2, 3))))
    j1 = np.linalg.norm(d1, axis=-1) > theta_j
    j2 = np.linalg.norm(d2, axis=-1) > theta_j
    grad[j1, :, 0] = 0.0
    grad[j2, :, 1] = 0.0
    bulk = network_bulk_energy(grad, u.L, g)
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    jump = h * (sum(g(np.outer(d, e1)) for d in d1[j1])
                + sum(g(np.outer(d, e2)) for d in d2[j2]))
    elastic = elastic_energy_spectral(u, kernel)
    return {"bulk": bulk, "jump": float(jump), "self": bulk + float(jump),
            "elastic": elastic, "total": bulk + float(jump) + elastic,
            "theta_J": float(theta_j)}


# -- change of basis ---------------------------------------------------------


@dataclass
class SlipBasis:
    """Burgers basis ``s_1..s_N`` of the slip plane ``R^2 x {0}``."""

    vectors: np.ndarray

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if s.shape[1] != 3:
            raise DomainError("basis vectors must be 3-vectors")
        if np.any(s[:, 2] != 0):
            raise DomainError("basis vectors must lie in the slip plane x3 = 0")
        if np.linalg.matrix_rank(s[:, :2], tol=1e-12 * max(1.0, np.abs(s).max())) < len(s):
            raise DomainError("basis vectors are linearly dependent")
        self.vectors = s

    @property
    def matrix(self) -> np.ndarray:
        """``3 x N`` matrix with columns ``s_i``."""
        return self.vectors.T

    def reconstruct(self, C) -> np.ndarray:
        return self.matrix @ np.asarray(C, dtype=float)


def basis_transform(G_phys, basis: SlipBasis, tol: float = 1e-12) -> np.ndarray:
    """``C`` with ``G_phys = sum_i s_i (x) C_i``; ``G_phys`` is ``3 x 2`` (or ``2 x 2``)."""
    G = np.atleast_2d(np.asarray(G_phys, dtype=float))
    if G.shape == (2, 2):
        G = np.vstack([G, np.zeros((1, 2))])
    if G.shape != (3, 2):
        raise DomainError("physical slip gradient must be 3 x 2 or 2 x 2")
    S = basis.matrix
    C, *_ = np.linalg.lstsq(S, G, rcond=None)
    if np.abs(S @ C - G).max() > tol * max(1.0, np.abs(G).max()):
        raise OutOfSpanError("slip gradient is not in the span of the basis")
    return C


def physical_density(g, basis: SlipBasis):
    """``f(G) = g(C)`` with ``C = basis_transform(G)``."""

    def f(G):
        return g(basis_transform(G, basis))

    return f
