"""Certified upper bounds for the relaxed line-tension density.

Two constructions are combined:

* faceting: a straight line with normal ``n`` is replaced by a zig-zag with two
  facet orientations.  The best value is the 1-homogeneous convex envelope of
  ``x -> |x| psi0(b, x/|x|)``, computed as the gauge of the convex hull of the
  sampled unit level set.
* splitting: the Burgers vector is split into parallel dislocations
  ``b = b_1 + ... + b_P`` which are well separated and whose energies add.

Part costs are themselves relaxed by one level of splitting, so a single
search can realize up to ``P_max**2`` parallel dislocations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd

import numpy as np
from scipy.spatial import ConvexHull

from .errors import DomainError
from .linetension import Psi0, _unit_normal

DEFAULT_M_DIRS = 720
DEFAULT_P_MAX = 4
DEFAULT_S_MAX = 3
_RTOL_TIE = 1e-12


def _angle(n) -> float:
    return float(np.arctan2(n[1], n[0]))


class ConvexGauge:
    """Gauge of a convex polygon containing the origin in its interior.

    ``vertices`` are listed counter-clockwise.  ``gauge(x) = min{t : x in t K}``.
    """

    def __init__(self, vertices: np.ndarray, labels=None):
        vertices = np.asarray(vertices, dtype=float)
        ang = np.arctan2(vertices[:, 1], vertices[:, 0])
        order = np.argsort(ang, kind="stable")
        self.vertices = vertices[order]
        self.angles = ang[order]
        self.labels = None if labels is None else np.asarray(labels)[order]

    def _edges(self, x):
        alpha = np.arctan2(x[..., 1], x[..., 0])
        k = len(self.angles)
        i = (np.searchsorted(self.angles, alpha, side="right") - 1) % k
        return i, (i + 1) % k

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        i, j = self._edges(x)
        vi, vj = self.vertices[i], self.vertices[j]
        d = vj - vi
        num = x[..., 0] * d[..., 1] - x[..., 1] * d[..., 0]
        den = vi[..., 0] * d[..., 1] - vi[..., 1] * d[..., 0]
        return num / den

    def decompose(self, x):
        """Write ``x = w_i v_i + w_j v_j`` over the edge hit by the ray through x."""
        x = np.asarray(x, dtype=float)
        i, j = self._edges(x)
        m = np.column_stack([self.vertices[i], self.vertices[j]])
        w = np.linalg.solve(m, x)
        return (int(i), int(j)), w

    def inradius(self) -> float:
        v = self.vertices
        d = np.roll(v, -1, axis=0) - v
        return float(np.min(np.abs(v[:, 0] * d[:, 1] - v[:, 1] * d[:, 0])
                            / np.linalg.norm(d, axis=1)))

    def circumradius(self) -> float:
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))


def _hull_gauge(points: np.ndarray, labels=None) -> ConvexGauge:
    hull = ConvexHull(points)
    idx = hull.vertices
    return ConvexGauge(points[idx], None if labels is None else np.asarray(labels)[idx])


class FacetEnvelope:
    """Optimal two-facet zig-zag energy of a Burgers vector as a function of the normal."""

    def __init__(self, b, psi0: Psi0, m_dirs: int = DEFAULT_M_DIRS):
        if m_dirs < 16:
            raise DomainError("need at least 16 sample directions")
        self.b = np.asarray(b, dtype=float)
        self.psi0 = psi0
        self.m_dirs = m_dirs
        self.zero = not np.any(self.b)
        if self.zero:
            self.gauge = None
            return
        theta = 2 * np.pi * np.arange(m_dirs) / m_dirs
        q = _matrices(psi0, m_dirs)
        phi = np.einsum("i,aij,j->a", self.b, q, self.b)
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        self.gauge = _hull_gauge(dirs / phi[:, None], labels=np.arange(m_dirs))
        self._phi = phi
        self._dirs = dirs

    def extension(self, x) -> float:
        """1-homogeneous extension ``|x| * envelope(x/|x|)``."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x)
        return 0.0 if r == 0 else r * self(x / r)

    def __call__(self, n) -> float:
        n = _unit_normal(n)
        if self.zero:
            return 0.0
        direct = self.psi0(self.b, n)
        hull = float(self.gauge(n))
        return float(hull if hull < direct * (1 - _RTOL_TIE) else direct)

    def witness(self, n) -> dict:
        """Facet normals, lengths per unit macroscopic length and convex weights."""
        n = _unit_normal(n)
        if self.zero:
            return {"normals": [], "lengths": [], "weights": [], "value": 0.0}
        direct = self.psi0(self.b, n)
        if direct * (1 - _RTOL_TIE) <= self.gauge(n):
            return {"normals": [n.tolist()], "lengths": [1.0], "weights": [1.0],
                    "value": float(direct)}
        (i, j), w = self.gauge.decompose(n)
        li, lj = (self.gauge.labels[i], self.gauge.labels[j])
        # v = d / phi, so n = w_i d_i / phi_i + w_j d_j / phi_j
        lengths = np.array([w[0] / self._phi[li], w[1] / self._phi[lj]])
        return {
            "normals": [self._dirs[li].tolist(), self._dirs[lj].tolist()],
            "lengths": lengths.tolist(),
            "weights": (lengths / lengths.sum()).tolist(),
            "value": float(w.sum()),
        }


@lru_cache(maxsize=32)
def _matrices(psi0: Psi0, m_dirs: int) -> np.ndarray:
    theta = 2 * np.pi * np.arange(m_dirs) / m_dirs
    return psi0.matrices_at(theta)


def facet_envelope(b, psi0: Psi0, m_dirs: int = DEFAULT_M_DIRS) -> FacetEnvelope:
    return FacetEnvelope(b, psi0, m_dirs)


@dataclass
class SplitDecomposition:
    """Microstructure witness: parallel parts, each with its facet pair."""

    b: list
    n: list
    value: float
    parts: list = field(default_factory=list)
    facets: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"b": self.b, "n": self.n, "value": self.value,
                "parts": self.parts, "facets": self.facets}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _primitive(c):
    g = 0
    for x in c:
        g = gcd(g, abs(int(x)))
    p = tuple(int(x) // g for x in c)
    first = next(x for x in p if x != 0)
    if first < 0:
        p = tuple(-x for x in p)
    return p, g


class _Closure:
    """Min-plus sums of at most ``k`` parts on an integer box, with back-pointers."""

    def __init__(self, cost: np.ndarray, radius: int, k_max: int):
        self.radius = radius
        self.ndim = cost.ndim
        self.cost = cost  # parts cost on radius grid, inf at the origin
        self.parts = [np.array(idx) - radius for idx in np.ndindex(cost.shape)
                      if np.isfinite(cost[idx]) and any(np.array(idx) != radius)]
        self.levels = {}
        self._build(k_max)

    def _build(self, k_max):
        r = self.radius
        u = self.cost.copy()
        u[(r,) * self.ndim] = 0.0
        cnt = np.where(np.isfinite(u), 1, 0)
        cnt[(r,) * self.ndim] = 0
        self.levels[1] = (u, cnt, np.full(u.shape, -1))
        for k in range(2, k_max + 1):
            prev, pcnt, _ = self.levels[k - 1]
            rk = k * r
            shape = (2 * rk + 1,) * self.ndim
            u = np.full(shape, np.inf)
            cnt = np.zeros(shape, dtype=int)
            bp = np.full(shape, -1)
            inner = tuple(slice(r, r + prev.shape[0]) for _ in range(self.ndim))
            u[inner] = prev
            cnt[inner] = pcnt
            for pi, p in enumerate(self.parts):
                sl = tuple(slice(r + int(pk), r + int(pk) + prev.shape[0]) for pk in p)
                cand = prev + self.cost[tuple(int(pk) + r for pk in p)]
                ccnt = pcnt + 1
                cur, curc = u[sl], cnt[sl]
                better = _better(cand, ccnt, cur, curc)
                cur[better] = cand[better]
                curc[better] = ccnt[better]
                bp[sl][better] = pi
            self.levels[k] = (u, cnt, bp)

    def value(self, k, x):
        u, _, _ = self.levels[k]
        rk = (u.shape[0] - 1) // 2
        if np.any(np.abs(x) > rk):
            return np.inf
        return u[tuple(int(xi) + rk for xi in x)]

    def count(self, k, x):
        _, c, _ = self.levels[k]
        rk = (c.shape[0] - 1) // 2
        return c[tuple(int(xi) + rk for xi in x)]

    def unwind(self, k, x) -> list:
        x = np.array(x, dtype=int)
        out = []
        while k >= 1 and np.any(x):
            u, _, bp = self.levels[k]
            rk = (u.shape[0] - 1) // 2
            p = bp[tuple(int(xi) + rk for xi in x)]
            if k == 1:
                out.append(x.copy())
                break
            if p >= 0:
                out.append(self.parts[p].copy())
                x = x - self.parts[p]
            k -= 1
        return out


def _better(cand, ccnt, cur, curc):
    scale = np.where(np.isfinite(cur), np.abs(cur), 0.0)
    tol = _RTOL_TIE * np.maximum(scale, 1e-300)
    strictly = cand < cur - tol
    tie = (np.abs(cand - cur) <= tol) & (ccnt < curc)
    return strictly | tie


def _split_all(closure: _Closure, p_max: int, targets_radius: int):
    """Best value over <= p_max parts for every target in the box of given radius.

    Returns ``(values, counts, split)`` where ``split[t]`` is the first-half
    sum used for target ``t``.
    """
    a, b = (p_max + 1) // 2, p_max // 2
    ua, ca, _ = closure.levels[a]
    ra = (ua.shape[0] - 1) // 2
    nd = closure.ndim
    shape = (2 * targets_radius + 1,) * nd
    best = np.full(shape, np.inf)
    bcnt = np.zeros(shape, dtype=int)
    split = np.zeros(shape + (nd,), dtype=int)
    if b == 0:
        sl = tuple(slice(ra - targets_radius, ra + targets_radius + 1) for _ in range(nd))
        own = np.stack(np.meshgrid(*[np.arange(-targets_radius, targets_radius + 1)] * nd,
                                   indexing="ij"), axis=-1)
        return ua[sl].copy(), ca[sl].copy(), own
    ub, cb, _ = closure.levels[b]
    rb = (ub.shape[0] - 1) // 2
    t = targets_radius
    # x ranges over first-half sums; target - x must stay inside the second grid.
    for x in np.ndindex(ua.shape):
        vx = ua[x]
        if not np.isfinite(vx):
            continue
        xv = np.array(x) - ra
        lo = -t - xv + rb
        hi = t - xv + rb
        src = []
        dst = []
        ok = True
        for d in range(nd):
            s0, s1 = max(lo[d], 0), min(hi[d], 2 * rb)
            if s0 > s1:
                ok = False
                break
            src.append(slice(s0, s1 + 1))
            dst.append(slice(s0 - lo[d], s1 - lo[d] + 1))
        if not ok:
            continue
        src, dst = tuple(src), tuple(dst)
        cand = vx + ub[src]
        ccnt = ca[x] + cb[src]
        cur, curc = best[dst], bcnt[dst]
        better = _better(cand, ccnt, cur, curc)
        cur[better] = cand[better]
        curc[better] = ccnt[better]
        split[dst][better] = xv
    return best, bcnt, split


class Relaxation:
    """Splitting + faceting upper bounds for one line-tension density."""

    def __init__(self, psi0: Psi0, m_dirs: int = DEFAULT_M_DIRS,
                 p_max: int = DEFAULT_P_MAX, s_max: int = DEFAULT_S_MAX):
        if p_max < 1:
            raise DomainError("P_max must be at least 1")
        self.psi0 = psi0
        self.m_dirs = m_dirs
        self.p_max = p_max
        self.s_max = s_max
        self._env = {}
        self._rel = {}

    @property
    def dim(self) -> int:
        return self.psi0.dim

    def envelope(self, b) -> FacetEnvelope:
        """Facet envelope, cached per primitive integer direction."""
        b = np.asarray(b)
        if np.issubdtype(b.dtype, np.integer) or np.all(b == np.round(b)):
            bi = tuple(int(x) for x in np.round(b))
            if not any(bi):
                return FacetEnvelope(np.zeros(self.dim), self.psi0, self.m_dirs)
            p, _ = _primitive(bi)
            if p not in self._env:
                self._env[p] = FacetEnvelope(np.array(p, dtype=float), self.psi0, self.m_dirs)
            return self._env[p]
        return FacetEnvelope(b, self.psi0, self.m_dirs)

    def envelope_value(self, b, n) -> float:
        bi = tuple(int(x) for x in np.round(b))
        if not any(bi):
            return 0.0
        _, g = _primitive(bi)
        return g * g * self.envelope(bi)(n)

    def _level0(self, radius, n):
        shape = (2 * radius + 1,) * self.dim
        cost = np.full(shape, np.inf)
        for idx in np.ndindex(shape):
            c = np.array(idx) - radius
            if np.any(c):
                cost[idx] = self.envelope_value(c, n)
        return cost

    def split_search(self, b, n, p_max: int | None = None, b_max: int | None = None):
        """Minimal splitting + faceting energy of ``b`` across a unit segment with normal n."""
        b = np.asarray(b)
        if b.shape != (self.dim,) or not np.all(b == np.round(b)):
            raise DomainError(f"Burgers vector must be an integer {self.dim}-vector")
        b = np.round(b).astype(int)
        if not np.any(b):
            raise DomainError("Burgers vector must be nonzero")
        n = _unit_normal(n)
        p_max = self.p_max if p_max is None else int(p_max)
        if p_max < 1:
            raise DomainError("P_max must be at least 1")
        bound = int(np.abs(b).max())
        b_max = 2 * bound if b_max is None else int(b_max)
        if b_max < bound:
            raise DomainError("B_max must be at least the largest |component| of b")
        key = (tuple(b), round(_angle(n), 14), p_max, b_max)
        if key in self._rel:
            return self._rel[key]

        r = b_max
        cost0 = self._level0(r, n)
        inner = _Closure(cost0, r, (p_max + 1) // 2)
        cost1, cnt1, split1 = _split_all(inner, p_max, r)
        cost1[(r,) * self.dim] = np.inf
        outer = _Closure(cost1, r, (p_max + 1) // 2)
        top, _, tsplit = _split_all(outer, p_max, bound)
        centre = tuple(int(x) + bound for x in b)
        value = float(top[centre])

        # Reconstruct: top-level parts, each expanded by its own level-1 split.
        x = tsplit[centre]
        a, bb = (p_max + 1) // 2, p_max // 2
        top_parts = outer.unwind(a, x) + (outer.unwind(bb, b - x) if bb else [])
        leaves = []
        for c in top_parts:
            ci = tuple(int(v) + r for v in c)
            y = split1[ci]
            sub = inner.unwind(a, y) + (inner.unwind(bb, c - y) if bb else [])
            leaves.extend(sub)
        leaves = [lf for lf in leaves if np.any(lf)]
        leaves.sort(key=lambda v: tuple(v))
        facets = []
        for c in leaves:
            _, g = _primitive(c)
            w = self.envelope(c).witness(n)
            w = dict(w, value=g * g * w["value"])
            facets.append(w)
        witness = SplitDecomposition(b=b.tolist(), n=n.tolist(), value=value,
                                     parts=[c.tolist() for c in leaves], facets=facets)
        self._rel[key] = (value, witness)
        return value, witness

    def psi_rel_upper(self, b, n, p_max=None, b_max=None) -> float:
        return self.split_search(b, n, p_max, b_max)[0]

    def psi_infinity(self, b, n, s_max: int | None = None, p_max=None) -> float:
        """``min_{1 <= s <= S_max} psi_rel_upper(s b, n) / s``."""
        s_max = self.s_max if s_max is None else int(s_max)
        if s_max < 1:
            raise DomainError("S_max must be at least 1")
        b = np.asarray(b)
        if not np.any(b):
            raise DomainError("Burgers vector must be nonzero")
        return min(self.psi_rel_upper(s * np.round(b).astype(int), n, p_max) / s
                   for s in range(1, s_max + 1))


@lru_cache(maxsize=16)
def relaxation_for(psi0: Psi0, m_dirs: int = DEFAULT_M_DIRS, p_max: int = DEFAULT_P_MAX,
                   s_max: int = DEFAULT_S_MAX) -> Relaxation:
    return Relaxation(psi0, m_dirs, p_max, s_max)


def split_search(b, n, psi0: Psi0, p_max: int = DEFAULT_P_MAX, b_max: int | None = None,
                 m_dirs: int = DEFAULT_M_DIRS):
    return relaxation_for(psi0, m_dirs).split_search(b, n, p_max, b_max)


def psi_rel_upper(b, n, psi0: Psi0, p_max: int = DEFAULT_P_MAX, b_max: int | None = None,
                  m_dirs: int = DEFAULT_M_DIRS) -> float:
    return relaxation_for(psi0, m_dirs).psi_rel_upper(b, n, p_max, b_max)


def psi_infinity(b, n, psi0: Psi0, s_max: int = DEFAULT_S_MAX, p_max: int = DEFAULT_P_MAX,
                 m_dirs: int = DEFAULT_M_DIRS) -> float:
    return relaxation_for(psi0, m_dirs).psi_infinity(b, n, s_max, p_max)
