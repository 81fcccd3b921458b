"""Angular part of the singular interaction kernel.

The singular part of the slip-slip interaction is ``Gamma(z) = G(z/|z|) / |z|**3``
where ``G`` maps the unit circle to symmetric positive definite N x N matrices.
:class:`KernelOnCircle` stores ``G``; the Fourier multiplier of the associated
nonlocal quadratic form is ``|xi| * S(xi/|xi|)`` with the symbol ``S`` returned
by :func:`fourier_symbol`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, InadmissibleKernelError

DEFAULT_M_ANG = 720


@dataclass(frozen=True)
class MaterialCubic:
    """Elastically isotropic cubic crystal.

    ``mu`` is the shear modulus, ``nu`` the Poisson ratio.  The default
    ``mu = 4*pi`` makes the line-tension unit ``mu/(4*pi)`` equal to one.
    """

    mu: float = 4 * np.pi
    nu: float = 1.0 / 3.0

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"shear modulus must be positive, got {self.mu}")
        if not -1.0 < self.nu < 0.5:
            raise DomainError(f"Poisson ratio must lie in (-1, 1/2), got {self.nu}")

    @property
    def eta(self) -> float:
        return self.nu / (1.0 - self.nu)

    @property
    def unit(self) -> float:
        """Line-tension energy unit mu/(4 pi)."""
        return self.mu / (4 * np.pi)

    @classmethod
    def from_eta(cls, eta: float, mu: float = 4 * np.pi) -> "MaterialCubic":
        return cls(mu=mu, nu=eta / (1.0 + eta))


def _as_direction(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 2:
        raise DomainError(f"expected 2-vectors, got shape {z.shape}")
    r = np.linalg.norm(z, axis=-1)
    if np.any(r == 0):
        raise DomainError("kernel is singular at z = 0")
    return z, r


def gamma_cubic(z, mat: MaterialCubic) -> np.ndarray:
    """Singular kernel ``Gamma(z)`` of an isotropic cubic crystal (vectorized over z)."""
    z, r = _as_direction(z)
    z1 = z[..., 0] / r
    z2 = z[..., 1] / r
    nu = mat.nu
    pref = mat.mu / (16 * np.pi * (1 - nu) * r**3)
    out = np.empty(z.shape[:-1] + (2, 2))
    out[..., 0, 0] = nu + 1 - 3 * nu * z2**2
    out[..., 1, 1] = nu + 1 - 3 * nu * z1**2
    out[..., 0, 1] = out[..., 1, 0] = 3 * nu * z1 * z2
    return pref[..., None, None] * out


class KernelOnCircle:
    """Matrix-valued function on the unit circle, evaluated by angle.

    ``angular(theta)`` must accept an array of angles and return an array of
    shape ``theta.shape + (N, N)``.  Instances are immutable.
    """

    def __init__(self, angular, dim: int, *, name: str = "custom", material=None,
                 table=None):
        if dim < 1:
            raise DomainError("kernel dimension must be positive")
        self._angular = angular
        self.dim = int(dim)
        self.name = name
        self.material = material
        self.table = table

    def __repr__(self):
        return f"KernelOnCircle(name={self.name!r}, dim={self.dim})"

    def at_angles(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.asarray(self._angular(theta), dtype=float)

    def __call__(self, z) -> np.ndarray:
        z, _ = _as_direction(z)
        return self.at_angles(np.arctan2(z[..., 1], z[..., 0]))

    def sample(self, m_ang: int = DEFAULT_M_ANG):
        theta = 2 * np.pi * np.arange(m_ang) / m_ang
        return theta, self.at_angles(theta)

    # -- constructors -----------------------------------------------------

    @classmethod
    def cubic(cls, mat: MaterialCubic) -> "KernelOnCircle":
        def angular(theta):
            return gamma_cubic(np.stack([np.cos(theta), np.sin(theta)], axis=-1), mat)

        return cls(angular, 2, name="cubic", material=mat)

    @classmethod
    def from_function(cls, func, dim: int, name: str = "custom") -> "KernelOnCircle":
        """Wrap ``func(z) -> (N, N)`` defined on unit vectors."""

        def angular(theta):
            theta = np.asarray(theta, dtype=float)
            flat = theta.reshape(-1)
            vals = np.array([func(np.array([np.cos(t), np.sin(t)])) for t in flat])
            return vals.reshape(theta.shape + (dim, dim))

        return cls(angular, dim, name=name)

    @classmethod
    def from_table(cls, values, name: str = "table") -> "KernelOnCircle":
        """Kernel tabulated at ``M_ang`` uniform angles ``2 pi k / M_ang``.

        Values between nodes are linearly interpolated in angle.
        """
        values = np.asarray(values, dtype=float)
        if values.ndim != 3 or values.shape[1] != values.shape[2]:
            raise DomainError("kernel table must have shape (M_ang, N, N)")
        m_ang = values.shape[0]
        if m_ang < 8:
            raise DomainError("kernel table needs at least 8 angles")
        ext = np.concatenate([values, values[:1]], axis=0)

        def angular(theta):
            s = np.mod(np.asarray(theta, dtype=float), 2 * np.pi) * m_ang / (2 * np.pi)
            i = np.floor(s).astype(int) % m_ang
            w = (s - np.floor(s))[..., None, None]
            return (1 - w) * ext[i] + w * ext[i + 1]

        return cls(angular, values.shape[1], name=name, table=values)

    @classmethod
    def from_csv(cls, path) -> "KernelOnCircle":
        """Read rows ``theta, g11, g12, ..., gNN`` (theta in radians, uniform grid)."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(x) for x in row])
                except ValueError:
                    continue  # header line
        data = np.array(rows)
        n = int(round(np.sqrt(data.shape[1] - 1)))
        if n * n != data.shape[1] - 1:
            raise DomainError("kernel CSV rows must hold theta and N*N entries")
        theta = data[:, 0]
        m_ang = len(theta)
        expected = 2 * np.pi * np.arange(m_ang) / m_ang
        if not np.allclose(np.mod(theta, 2 * np.pi), expected, atol=1e-9):
            raise DomainError("kernel CSV angles must be uniform on [0, 2 pi)")
        return cls.from_table(data[:, 1:].reshape(m_ang, n, n), name=str(path))

    def to_csv(self, path, m_ang: int = DEFAULT_M_ANG):
        theta, vals = self.sample(m_ang)
        n = self.dim
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta"] + [f"g{i + 1}{j + 1}" for i in range(n) for j in range(n)])
            for t, g in zip(theta, vals):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in g.reshape(-1)])

    @cached_property
    def symbol(self) -> "KernelOnCircle":
        return fourier_symbol(self)


def kernel_positivity(k: KernelOnCircle, m_ang: int = DEFAULT_M_ANG):
    """Return ``(c_low, c_high)``, the extreme eigenvalues of ``k`` over ``m_ang`` angles.

    Raises :class:`InadmissibleKernelError` if a sampled matrix is not
    symmetric, if ``k(z) != k(-z)``, or if an eigenvalue is not positive.
    """
    if m_ang < 8:
        raise DomainError("need at least 8 sample angles")
    m_ang += m_ang % 2  # even count so that every sample has its antipode
    _, vals = k.sample(m_ang)
    scale = max(np.abs(vals).max(), np.finfo(float).tiny)
    if not np.allclose(vals, np.swapaxes(vals, -1, -2), atol=1e-12 * scale, rtol=0):
        raise InadmissibleKernelError("kernel matrices are not symmetric")
    half = m_ang // 2
    if not np.allclose(vals, np.roll(vals, half, axis=0), atol=1e-12 * scale, rtol=0):
        raise InadmissibleKernelError("kernel is not even: G(z) != G(-z)")
    eig = np.linalg.eigvalsh(vals)
    c_low, c_high = float(eig.min()), float(eig.max())
    if c_low <= 0:
        raise InadmissibleKernelError(f"kernel has a non-positive eigenvalue {c_low:g}")
    return c_low, c_high


def spectral_multiplier(xi, k: KernelOnCircle) -> np.ndarray:
    """``|xi| * k(xi/|xi|)``, zero at ``xi = 0`` (vectorized over xi)."""
    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(xi, axis=-1)
    theta = np.arctan2(xi[..., 1], xi[..., 0])
    out = r[..., None, None] * k.at_angles(theta)
    out[r == 0] = 0.0
    return out


def cubic_symbol(mat: MaterialCubic) -> KernelOnCircle:
    """Closed-form Fourier symbol of the cubic kernel.

    ``S(w) = mu / (4 (1 - nu)) * (I - nu * w_perp w_perp^T)``.
    """
    pref = mat.mu / (4 * (1 - mat.nu))

    def angular(theta):
        c, s = np.cos(theta), np.sin(theta)
        out = np.empty(np.shape(theta) + (2, 2))
        out[..., 0, 0] = 1 - mat.nu * s * s
        out[..., 1, 1] = 1 - mat.nu * c * c
        out[..., 0, 1] = out[..., 1, 0] = mat.nu * s * c
        return pref * out

    return KernelOnCircle(angular, 2, name="cubic-symbol", material=mat)


def fourier_symbol(k: KernelOnCircle, m_ang: int = DEFAULT_M_ANG,
                   n_gauss: int = 96) -> KernelOnCircle:
    """Fourier symbol of ``z -> k(z/|z|) / |z|**3``.

    The quadratic form ``int int Gamma(z) (u(x)-u(x+z)).(u(x)-u(x+z)) dx dz``
    has multiplier ``2 int Gamma(z) (1 - cos(xi.z)) dz = |xi| S(xi/|xi|)`` with
    ``S(w) = pi * int_0^{2 pi} k(e_phi) |w . e_phi| dphi``.
    """
    if k.name == "cubic" and k.material is not None:
        return cubic_symbol(k.material)
    # Gauss-Legendre on each half circle where cos(phi - theta) keeps its sign.
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    t = 0.5 * np.pi * x  # nodes in (-pi/2, pi/2)
    wq = 0.5 * np.pi * w * np.cos(t)
    theta = 2 * np.pi * np.arange(m_ang) / m_ang
    phi = theta[:, None] + t[None, :]
    g = k.at_angles(phi) + k.at_angles(phi + np.pi)
    table = np.pi * np.einsum("q,aqij->aij", wq, g)
    return KernelOnCircle.from_table(table, name=f"symbol({k.name})")
