"""Macroscopic self-energy density ``g(A)`` from periodic dislocation structures.

The density of a wall family is ``psi_inf``, the asymptotic relaxed line
tension, extended to real Burgers vectors.  ``g_upper`` takes the best of a
small library of periodic constructions: the column grid, rank-one laminates,
the diagonal zig-zag composite and user-supplied network topologies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, product
from math import gcd

import numpy as np
from scipy.spatial import ConvexHull

from .errors import DomainError, InfeasibleTopologyError
from .kernel import KernelOnCircle, MaterialCubic
from .linetension import Psi0, _unit_normal
from .relax import DEFAULT_M_DIRS, Relaxation, relaxation_for

DEFAULT_BOX = 4
DEFAULT_Q_MAX = 12
DEFAULT_N_NORMALS = 180
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
E1, E2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])


def _rot(v):
    """Normal of a segment with tangent ``v``: ``v`` turned by -90 degrees."""
    v = np.asarray(v, dtype=float)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def as_affine_slip(A, dim: int | None = None) -> np.ndarray:
    """Validate a macroscopic slip gradient (real ``N x 2`` matrix)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[1] != 2:
        raise DomainError(f"slip gradient must be N x 2, got shape {A.shape}")
    if dim is not None and A.shape[0] != dim:
        raise DomainError(f"slip gradient must have {dim} rows")
    if not np.all(np.isfinite(A)):
        raise DomainError("slip gradient must be finite")
    return A


# -- psi_inf on real Burgers vectors ----------------------------------------


def _primitive_vectors(dim: int, box: int) -> np.ndarray:
    """Primitive integer vectors in ``[-box, box]^dim``, one per +- pair."""
    out = []
    for c in product(range(-box, box + 1), repeat=dim):
        if not any(c):
            continue
        g = 0
        for x in c:
            g = gcd(g, abs(x))
        first = next(x for x in c if x != 0)
        if g == 1 and first > 0:
            out.append(c)
    return np.array(out, dtype=float)


class BGauge:
    """Gauge of a centrally symmetric polytope in Burgers space, via hull facets."""

    def __init__(self, points: np.ndarray):
        pts = np.concatenate([points, -points])
        if pts.shape[1] == 1:
            r = np.abs(pts[:, 0]).max()
            self._a = np.array([[1.0], [-1.0]]) / r
        else:
            hull = ConvexHull(pts)
            a, c = hull.equations[:, :-1], hull.equations[:, -1]
            self._a = a / (-c)[:, None]
        self.vertices = pts

    def __call__(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        return np.max(b @ self._a.T, axis=-1)

    def inradius(self) -> float:
        return float(1.0 / np.linalg.norm(self._a, axis=1).max())

    def circumradius(self) -> float:
        return float(np.linalg.norm(self.vertices, axis=1).max())


class PsiInfinity:
    """``psi_inf(b, n)`` for real ``b`` as a conic closure over lattice directions.

    For fixed ``n`` the value is the largest 1-homogeneous convex function of
    ``b`` lying below the relaxed facet energies of all primitive integer
    vectors in ``[-box, box]^N``.  Every value is realized by superposing
    parallel walls of lattice dislocations at suitable densities, so it is an
    upper bound for the exact asymptotic density.
    """

    def __init__(self, psi0: Psi0, box: int = DEFAULT_BOX, m_dirs: int = DEFAULT_M_DIRS,
                 relaxation: Relaxation | None = None):
        if box < 1:
            raise DomainError("box must be at least 1")
        self.psi0 = psi0
        self.dim = psi0.dim
        self.box = box
        self.relax = relaxation if relaxation is not None else relaxation_for(psi0, m_dirs)
        self.prims = _primitive_vectors(self.dim, box)
        self._gauges = {}

    @classmethod
    def cubic(cls, mat: MaterialCubic, **kw) -> "PsiInfinity":
        return cls(Psi0.cubic(mat), **kw)

    @property
    def unit(self) -> float:
        return self.psi0.unit

    def gauge_at(self, n) -> BGauge:
        n = _unit_normal(n)
        if n[0] < 0 or (n[0] == 0 and n[1] < 0):
            n = -n  # even in n
        key = (round(float(n[0]), 13), round(float(n[1]), 13))
        g = self._gauges.get(key)
        if g is None:
            vals = np.array([self.relax.envelope_value(c, n) for c in self.prims])
            g = BGauge(self.prims / vals[:, None])
            self._gauges[key] = g
        return g

    def __call__(self, b, n) -> float:
        b = np.asarray(b, dtype=float)
        if b.shape != (self.dim,):
            raise DomainError(f"Burgers vector must have {self.dim} components")
        if not np.any(b):
            return 0.0
        return float(self.gauge_at(n)(b))

    def rational(self, b, n, q_max: int = DEFAULT_Q_MAX, tol: float = 1e-9) -> float:
        """Alternative extension through commensurate multiples ``q b``.

        Uses ``min_q psi_infinity(q b, n) / q`` over ``q <= q_max`` with ``q b``
        integral; otherwise ``|b|`` times the value at the best rational
        approximation of the direction of ``b``.
        """
        b = np.asarray(b, dtype=float)
        if not np.any(b):
            return 0.0
        n = _unit_normal(n)
        vals = []
        for q in range(1, q_max + 1):
            c = np.round(q * b)
            if np.abs(q * b - c).max() <= tol and np.any(c):
                vals.append(self.relax.psi_infinity(c.astype(int), n) / q)
        if vals:
            return float(min(vals))
        d = b / np.linalg.norm(b)
        best = None
        for q in range(1, q_max + 1):
            c = np.round(q * d)
            if not np.any(c):
                continue
            err = np.linalg.norm(c / np.linalg.norm(c) - d)
            if best is None or err < best[0] - 1e-15:
                best = (err, c)
        c = best[1]
        return float(np.linalg.norm(b) * self.relax.psi_infinity(c.astype(int), n)
                     / np.linalg.norm(c))

    def growth_constants(self, n_normals: int = DEFAULT_N_NORMALS):
        """``(c_low, c_high)`` with ``c_low |b| <= psi_inf(b, n) <= c_high |b|``."""
        lo, hi = np.inf, 0.0
        for th in np.pi * np.arange(n_normals) / n_normals:
            g = self.gauge_at(np.array([np.cos(th), np.sin(th)]))
            lo = min(lo, 1.0 / g.circumradius())
            hi = max(hi, 1.0 / g.inradius())
        return lo, hi


def cubic_psi_infinity(b, n, mat: MaterialCubic) -> float:
    """Closed forms of ``psi_inf`` for the cubic crystal.

    Covers ``b`` parallel to a coordinate axis (any ``n``) and
    ``b`` parallel to ``e1 +- e2`` with ``n`` orthogonal to ``b``.
    """
    b = np.asarray(b, dtype=float)
    n = _unit_normal(n)
    if not np.any(b):
        return 0.0
    for i in range(2):
        if b[1 - i] == 0:
            return mat.unit * abs(b[i]) * (1 + mat.eta * n[i] ** 2)
    if abs(abs(b[0]) - abs(b[1])) <= 1e-14 * abs(b[0]) and abs(b @ n) <= 1e-12 * abs(b[0]):
        return mat.unit * 2 * abs(b[0])
    raise DomainError("no cubic closed form for this (b, n); use PsiInfinity")


def as_psi_infinity(density) -> PsiInfinity:
    """Accept a PsiInfinity, Psi0, KernelOnCircle or MaterialCubic."""
    if isinstance(density, PsiInfinity):
        return density
    if isinstance(density, MaterialCubic):
        return _cubic_closure(density)
    if isinstance(density, KernelOnCircle):
        return PsiInfinity(Psi0(density))
    if isinstance(density, Psi0):
        return PsiInfinity(density)
    raise DomainError(f"cannot build psi_inf from {type(density).__name__}")


_CUBIC_CLOSURES = {}


def _cubic_closure(mat: MaterialCubic) -> PsiInfinity:
    if mat not in _CUBIC_CLOSURES:
        _CUBIC_CLOSURES[mat] = PsiInfinity.cubic(mat)
    return _CUBIC_CLOSURES[mat]


# -- grid and zig-zag --------------------------------------------------------


def grid_energy(A, psi_inf) -> float:
    """Energy per area of the column grid: ``psi_inf(A e1, e1) + psi_inf(A e2, e2)``."""
    A = as_affine_slip(A)
    return float(psi_inf(A[:, 0], E1) + psi_inf(A[:, 1], E2))


@dataclass(frozen=True)
class ZigzagConfig:
    """Zig-zag cell of side ``sigma``; the reacted segment has half-width ``delta``.

    ``angle`` is the inclination of the reacted segment (45 degrees by default).
    """

    sigma: float
    delta: float
    mat: MaterialCubic = field(default_factory=MaterialCubic)
    angle: float = np.pi / 4

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if not 0 < self.angle < np.pi / 2:
            raise DomainError("angle must lie in (0, pi/2)")
        lim = self.sigma / 2
        if not (0 <= self.delta < lim and self.delta * np.tan(self.angle) < lim):
            raise DomainError(f"delta must lie in [0, sigma/2), got {self.delta}")


def _zigzag_segments(sigma, delta, angle):
    """Tangent vectors and Burgers vectors (per unit sigma) of the three segments."""
    h = 2 * delta * np.tan(angle)
    return [
        (np.array([2 * delta, h]), np.array([1.0, 1.0])),
        (np.array([-2 * delta, sigma - h]), np.array([1.0, 0.0])),
        (np.array([sigma - 2 * delta, -h]), np.array([0.0, 1.0])),
    ]


def zigzag_energy(cfg: ZigzagConfig, psi_inf=None):
    """Energy ``e(delta)`` of the zig-zag cell; returns ``(cell, per_area)``.

    With the default 45 degree angle and no ``psi_inf`` the cubic closed forms
    are used; otherwise ``psi_inf`` (default: the cubic closure) is evaluated.
    """
    s = cfg.sigma
    if psi_inf is None:
        if abs(cfg.angle - np.pi / 4) <= 1e-15:
            def psi_inf(b, n):
                return cubic_psi_infinity(b, n, cfg.mat)
        else:
            psi_inf = _cubic_closure(cfg.mat)
    e = 0.0
    for v, b in _zigzag_segments(s, cfg.delta, cfg.angle):
        length = float(np.hypot(v[0], v[1]))
        if length > 0:
            e += length * psi_inf(s * b, _rot(v) / length)
    return e, e / s**2


def golden_section(f, a: float, b: float, tol: float):
    """Minimize a unimodal ``f`` on ``[a, b]`` to an interval of width ``tol``."""
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def zigzag_optimize(sigma: float = 1.0, mat: MaterialCubic | None = None, *,
                    angle: float = np.pi / 4, psi_inf=None, rtol: float = 1e-12):
    """Optimal half-width ``delta*`` and cell energy ``e(delta*)``.

    ``delta* = 0`` is returned unless the interior candidate beats ``e(0)`` by
    more than ``rtol`` relative.
    """
    mat = MaterialCubic() if mat is None else mat
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    hi = min(sigma / 2, sigma / 2 / np.tan(angle)) - 1e-12 * sigma

    def e(d):
        return zigzag_energy(ZigzagConfig(sigma, d, mat, angle), psi_inf)[0]

    e0 = e(0.0)
    d, ed = golden_section(e, 0.0, hi, 1e-9 * sigma)
    if ed < e0 * (1 - rtol):
        return d, ed
    return 0.0, e0


def zigzag_threshold(param: str = "eta", lo: float | None = None, hi: float | None = None,
                     tol: float = 1e-6, sigma: float = 1.0) -> float:
    """Bisect the smallest ``eta`` (or ``nu``) for which ``delta* > 0``."""
    if param == "eta":
        make = MaterialCubic.from_eta
        lo = 0.0 if lo is None else lo
        hi = 0.9 if hi is None else hi
    elif param == "nu":
        def make(nu):
            return MaterialCubic(nu=nu)
        lo = 0.0 if lo is None else lo
        hi = 0.45 if hi is None else hi
    else:
        raise DomainError("param must be 'eta' or 'nu'")

    def active(x):
        return zigzag_optimize(sigma, make(x))[0] > 0

    if active(lo) or not active(hi):
        raise DomainError("threshold is not bracketed by [lo, hi]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if active(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def zigzag_scan(sigma: float, mat: MaterialCubic, steps: int = 200):
    """Rows ``(delta, e, e / sigma^2)`` on a uniform grid of ``[0, sigma/2)``."""
    rows = []
    for k in range(steps):
        d = 0.5 * sigma * k / steps
        cell, per = zigzag_energy(ZigzagConfig(sigma, d, mat))
        rows.append((d, cell, per))
    return rows


def threshold_scan(etas, sigma: float = 1.0):
    """Rows ``(eta, nu, delta*/sigma, e*/sigma^2)``."""
    rows = []
    for eta in etas:
        mat = MaterialCubic.from_eta(float(eta))
        d, e = zigzag_optimize(sigma, mat)
        rows.append((float(eta), mat.nu, d / sigma, e / sigma**2))
    return rows


# -- periodic networks -------------------------------------------------------


@dataclass
class PeriodicNetworkTopology:
    """Network in the unit cell with periodic identifications.

    Each segment ``(i, j, shift, b)`` joins node ``i`` to the image of node
    ``j`` in the cell displaced by the integer vector ``shift``.  The flux
    ``sum b (x) rot(x_j + shift - x_i)`` must equal ``A``.
    """

    nodes: np.ndarray
    segments: list
    A: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        self.A = as_affine_slip(self.A)
        segs = []
        for i, j, shift, b in self.segments:
            b = np.asarray(b, dtype=float)
            if b.shape != (self.A.shape[0],):
                raise InfeasibleTopologyError("Burgers vector dimension does not match A")
            segs.append((int(i), int(j), np.asarray(shift, dtype=float), b))
        self.segments = segs
        self._check()

    def _check(self):
        k = len(self.nodes)
        bal = np.zeros((k, self.A.shape[0]))
        for i, j, _, b in self.segments:
            if not (0 <= i < k and 0 <= j < k):
                raise InfeasibleTopologyError("segment refers to a missing node")
            bal[i] -= b
            bal[j] += b
        scale = max(1.0, np.abs(self.A).max())
        if not np.allclose(bal, 0.0, atol=1e-12 * scale):
            raise InfeasibleTopologyError("Burgers vectors are not conserved at a node")
        if not np.allclose(self.flux(), self.A, atol=1e-12 * scale, rtol=0):
            raise InfeasibleTopologyError(
                f"cut fluxes {self.flux().tolist()} disagree with A = {self.A.tolist()}")

    def flux(self, nodes=None) -> np.ndarray:
        nodes = self.nodes if nodes is None else nodes
        out = np.zeros_like(self.A)
        for i, j, shift, b in self.segments:
            out += np.outer(b, _rot(nodes[j] + shift - nodes[i]))
        return out

    def energy(self, psi_inf, nodes=None) -> float:
        """Line energy per unit cell area at the given node positions."""
        nodes = self.nodes if nodes is None else np.asarray(nodes, dtype=float)
        e = 0.0
        for i, j, shift, b in self.segments:
            v = nodes[j] + shift - nodes[i]
            length = float(np.hypot(v[0], v[1]))
            if length > 0:
                e += length * psi_inf(b, _rot(v) / length)
        return e


def grid_topology(A) -> PeriodicNetworkTopology:
    """One node, one vertical and one horizontal wall per cell."""
    A = as_affine_slip(A)
    return PeriodicNetworkTopology(
        nodes=[[0.0, 0.0]],
        segments=[(0, 0, (0, 1), A[:, 0]), (0, 0, (1, 0), -A[:, 1])],
        A=A)


def _zigzag_sign(A):
    """``(t, sign)`` for ``A = sign * t * diag(1, -1)``, else ``None``.

    Same-sign diagonals are excluded: the junction ``e1 - e2`` they would need
    meets the walls at an angle that only adds length.
    """
    A = as_affine_slip(A, dim=2)
    t = abs(A[0, 0])
    if t == 0 or A[0, 1] != 0 or A[1, 0] != 0 or abs(A[1, 1] + A[0, 0]) > 1e-14 * t:
        return None
    return t, float(np.sign(A[0, 0]))


def zigzag_topology(A, delta: float = 0.125, angle: float = np.pi / 4):
    """Zig-zag composite for ``A = a diag(1, -1)`` in the unit cell."""
    sig = _zigzag_sign(A)
    if sig is None:
        raise InfeasibleTopologyError("zig-zag needs A = a diag(1, -1) with a != 0")
    t, s1 = sig
    h = 2 * delta * np.tan(angle)
    nodes = np.array([[0.0, 0.0], [2 * delta, h]])
    segs = [(0, 1, (0, 0), s1 * t * np.array([1.0, 1.0])),
            (1, 0, (0, 1), s1 * t * E1),
            (1, 0, (1, 0), s1 * t * E2)]
    return PeriodicNetworkTopology(nodes=nodes, segments=segs, A=A)


_POLL = np.array([[1, 0], [-1, 0], [0, 1], [0, -1],
                  [1, 1], [-1, -1], [1, -1], [-1, 1]], dtype=float)
_POLL[4:] /= np.sqrt(2.0)


def periodic_network_optimize(top: PeriodicNetworkTopology, psi_inf, iters: int = 10_000,
                              step: float = 0.125, step_min: float = 1e-6, trace=None):
    """Pattern search over node positions with the topology held fixed.

    Node 0 is pinned (translations are free).  Every poll direction of every
    node is tried; the first improvement is accepted and the step halves after
    an unsuccessful sweep.  Returns ``(energy per area, nodes)``.
    """
    if not callable(psi_inf):
        psi_inf = as_psi_infinity(psi_inf)
    top._check()
    x = top.nodes.copy()
    best = top.energy(psi_inf, x)
    if trace is not None:
        trace.append(best)
    sweeps = 0
    while step >= step_min and sweeps < iters:
        sweeps += 1
        improved = False
        for k in range(1, len(x)):
            for d in _POLL:
                y = x.copy()
                y[k] += step * d
                e = top.energy(psi_inf, y)
                if e < best * (1 - 1e-15) - 1e-300:
                    x, best, improved = y, e, True
                    break
        if trace is not None:
            trace.append(best)
        if not improved:
            step *= 0.5
    return best, x


# -- g upper bound ------------------------------------------------------------


def _normals(n_normals: int) -> np.ndarray:
    th = np.pi * np.arange(n_normals) / n_normals
    return np.column_stack([np.cos(th), np.sin(th)])


def _grouped_energy(gauges, idx, bvec):
    """Sum of ``gauge[idx[p]](bvec[p])`` evaluated group by group."""
    out = np.empty(len(idx))
    order = np.argsort(idx, kind="stable")
    bounds = np.searchsorted(idx[order], np.arange(len(gauges) + 1))
    for q, g in enumerate(gauges):
        sel = order[bounds[q]:bounds[q + 1]]
        if len(sel):
            out[sel] = g(bvec[sel])
    return out


@lru_cache(maxsize=4)
def _laminate_geometry(n_normals: int):
    """Index tuples and the A-independent solves for pairs and triples of normals."""
    m = _normals(n_normals)
    pairs = np.array(list(combinations(range(n_normals), 2)))
    pinv = np.linalg.inv(m[pairs])  # rows m_j, m_k
    tri = np.array(list(combinations(range(n_normals), 3)))
    M = m[tri]
    tproj = np.einsum("tkl,tjl->tkj", np.linalg.inv(np.einsum("tki,tkj->tij", M, M)), M)
    return pairs, pinv, tri, tproj


def laminate_search(A, psi_inf: PsiInfinity, n_normals: int = DEFAULT_N_NORMALS,
                    triples: bool = True):
    """Best superposition of at most three rank-one wall families.

    ``A = sum_k b_k (x) m_k`` with ``m_k`` from a grid of ``n_normals`` normals
    on the half circle; pairs are solved exactly, triples by the least-norm
    Burgers vectors.  Returns ``(value, witness)``.
    """
    A = as_affine_slip(A, dim=psi_inf.dim)
    m = _normals(n_normals)
    gauges = [psi_inf.gauge_at(mi) for mi in m]
    best = (np.inf, None)

    # single families: A = b (x) m requires rank one
    for q, mi in enumerate(m):
        b = A @ mi
        if np.allclose(np.outer(b, mi), A, atol=1e-14 * max(1.0, np.abs(A).max()), rtol=0):
            v = float(gauges[q](b))
            if v < best[0]:
                best = (v, ([q], [b]))

    pairs, pinv, tri, tproj = _laminate_geometry(n_normals)
    B = np.einsum("ik,pkj->pij", A, pinv)  # A M^{-1}: columns b_j, b_k
    val = (_grouped_energy(gauges, pairs[:, 0], B[:, :, 0])
           + _grouped_energy(gauges, pairs[:, 1], B[:, :, 1]))
    p = int(np.argmin(val))
    if val[p] < best[0] * (1 - 1e-15):
        best = (float(val[p]), (pairs[p].tolist(), [B[p, :, 0], B[p, :, 1]]))

    if triples:
        B = np.einsum("ik,tkj->tij", A, tproj)  # (T, N, 3)
        val = sum(_grouped_energy(gauges, tri[:, k], B[:, :, k]) for k in range(3))
        p = int(np.argmin(val))
        if val[p] < best[0] * (1 - 1e-15):
            best = (float(val[p]), (tri[p].tolist(), [B[p, :, k] for k in range(3)]))

    value, (idx, bs) = best
    witness = {"family": "laminate", "value": value,
               "normals": [m[q].tolist() for q in idx],
               "burgers": [np.asarray(b).tolist() for b in bs]}
    return value, witness


def zigzag_family(A, psi_inf, angle: float = np.pi / 4):
    """Best zig-zag composite for diagonal-type ``A``, or ``None``."""
    sig = _zigzag_sign(A)
    if sig is None:
        return None
    t = sig[0]
    hi = min(0.5, 0.5 / np.tan(angle)) - 1e-12

    def e(d):
        return zigzag_topology(A, d, angle).energy(psi_inf)

    d, ed = golden_section(e, 0.0, hi, 1e-9)
    e0 = e(0.0)
    if not ed < e0 * (1 - 1e-12):
        d, ed = 0.0, e0
    return ed, {"family": "zigzag", "value": ed, "delta": d, "scale": t}


def g_upper(A, density, *, n_normals: int = DEFAULT_N_NORMALS, triples: bool = True,
            topologies=(), library=("grid", "laminate", "zigzag", "topologies")):
    """Upper bound for ``g(A)``: best construction of the library.

    Returns ``(value, witness)`` where the witness names the winning family and
    its parameters.
    """
    psi = as_psi_infinity(density)
    A = as_affine_slip(A, dim=psi.dim)
    if not np.any(A):
        return 0.0, {"family": "zero", "value": 0.0}
    cands = []
    if "grid" in library:
        v = grid_energy(A, psi)
        cands.append((v, {"family": "grid", "value": v}))
    if "laminate" in library:
        cands.append(laminate_search(A, psi, n_normals, triples))
    if "zigzag" in library and psi.dim == 2:
        z = zigzag_family(A, psi)
        if z is not None:
            cands.append(z)
    if "topologies" in library:
        for top in topologies:
            t = _proportional(A, top.A)
            if t is None:
                continue
            v, x = periodic_network_optimize(top, psi)
            cands.append((t * v, {"family": "network", "value": t * v,
                                  "nodes": x.tolist(), "scale": t}))
    if not cands:
        raise DomainError("empty construction library")
    best = cands[0]
    for c in cands[1:]:
        if c[0] < best[0] * (1 - 1e-15):
            best = c
    return float(best[0]), best[1]


def _proportional(A, B):
    """``t > 0`` with ``A = t B``, else ``None``."""
    if A.shape != B.shape or not np.any(B):
        return None
    k = np.unravel_index(np.argmax(np.abs(B)), B.shape)
    t = A[k] / B[k]
    if t > 0 and np.allclose(A, t * B, atol=1e-12 * np.abs(A).max(), rtol=0):
        return float(t)
    return None


def g_scan(As, density, **kw):
    """Rows ``(A11, A12, A21, A22, g_upper, grid, family)`` for a list of matrices."""
    psi = as_psi_infinity(density)
    rows = []
    for A in As:
        A = as_affine_slip(A)
        v, w = g_upper(A, psi, **kw)
        rows.append(tuple(A.reshape(-1).tolist()) + (v, grid_energy(A, psi), w["family"]))
    return rows
