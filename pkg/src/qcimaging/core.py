"""Grids, wavefunctions, potentials and the coordinate/momentum transform.

Conventions
-----------
Atomic units by default (``hbar = m = 1``).  The momentum representation uses
the symmetric transform

    phi(p) = (2 pi hbar)^(-1/2) \\int exp(-i p x / hbar) psi(x) dx,

realized on the grid as a phase-corrected FFT so that the result does not
depend on where the box starts.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import CubicSpline
from scipy.special import erfc

from . import _validation as v
from .exceptions import GridTooCoarse, MomentumOutOfRange, PacketClipped, UnsupportedPotential, ValidationError

__all__ = [
    "Units",
    "SpatialGrid",
    "MomentumGrid",
    "WaveFunction",
    "MomentumWaveFunction",
    "PotentialSpec",
    "PhaseSpacePoint",
    "gaussian_packet",
    "to_momentum",
    "from_momentum",
    "potential_eval",
]

MAX_POLY_DEGREE = 6


@dataclass(frozen=True)
class Units:
    """Reduced Planck constant and particle mass (atomic units by default)."""

    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hbar", v.check_positive(self.hbar, "hbar"))
        object.__setattr__(self, "mass", v.check_positive(self.mass, "mass"))


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid ``x_j = x_min + j*dx``, ``j = 0..n-1``."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        v.check_finite(self.x_min, "x_min")
        v.check_finite(self.x_max, "x_max")
        if not self.x_max > self.x_min:
            raise ValidationError("x_max must exceed x_min")
        if not isinstance(self.n, (int, np.integer)) or not v.is_power_of_two(int(self.n)):
            raise ValidationError(f"n must be a power of two, got {self.n!r}")
        if self.n < 16:
            raise ValidationError("n must be at least 16")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def symmetric(cls, half_width, n):
        return cls(-float(half_width), float(half_width), n)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.n

    @property
    def length(self):
        return self.x_max - self.x_min

    @cached_property
    def x(self):
        x = self.x_min + self.dx * np.arange(self.n)
        x.setflags(write=False)
        return x

    def momentum_grid(self, units=None):
        units = units or Units()
        return MomentumGrid(self, units.hbar)

    def nearest_index(self, x):
        j = int(round((x - self.x_min) / self.dx))
        return min(max(j, 0), self.n - 1)


@dataclass(frozen=True)
class MomentumGrid:
    """Momenta conjugate to a :class:`SpatialGrid`, in ascending order.

    ``p_k = 2 pi hbar k / (n dx)`` for ``k = -n/2 .. n/2 - 1``.
    """

    spatial: SpatialGrid
    hbar: float = 1.0

    @property
    def n(self):
        return self.spatial.n

    @property
    def dp(self):
        return 2.0 * math.pi * self.hbar / (self.spatial.n * self.spatial.dx)

    @cached_property
    def p(self):
        p = self.dp * np.arange(-self.n // 2, self.n // 2)
        p.setflags(write=False)
        return p

    @property
    def p_min(self):
        return self.p[0]

    @property
    def p_max(self):
        return self.p[-1]


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex amplitudes ``psi(x_j, t)`` on a spatial grid."""

    grid: SpatialGrid
    amps: np.ndarray
    t: float = 0.0
    units: Units = field(default_factory=Units)

    def __post_init__(self):
        object.__setattr__(self, "amps", v.check_amplitudes(self.amps, self.grid.n))
        object.__setattr__(self, "t", v.check_finite(self.t, "t"))

    @property
    def x(self):
        return self.grid.x

    @property
    def density(self):
        return np.abs(self.amps) ** 2

    def norm2(self):
        return float(np.sum(self.density) * self.grid.dx)

    def with_amps(self, amps, t=None):
        return WaveFunction(self.grid, amps, self.t if t is None else t, self.units)

    def expectation_x(self):
        return float(np.sum(self.x * self.density) * self.grid.dx / self.norm2())

    def overlap(self, other):
        """``<self|other>`` on the common grid."""
        if other.grid != self.grid:
            raise ValidationError("wavefunctions live on different grids")
        return complex(np.vdot(self.amps, other.amps) * self.grid.dx)


@dataclass(frozen=True, eq=False)
class MomentumWaveFunction:
    """Complex amplitudes ``phi(p_k, t)`` on the conjugate momentum grid."""

    grid: MomentumGrid
    amps: np.ndarray
    t: float = 0.0
    units: Units = field(default_factory=Units)

    def __post_init__(self):
        object.__setattr__(self, "amps", v.check_amplitudes(self.amps, self.grid.n))
        object.__setattr__(self, "t", v.check_finite(self.t, "t"))

    @property
    def p(self):
        return self.grid.p

    @property
    def density(self):
        return np.abs(self.amps) ** 2

    def norm2(self):
        return float(np.sum(self.density) * self.grid.dp)

    @cached_property
    def spline(self):
        return CubicSpline(self.grid.p, self.amps)

    def __call__(self, p):
        """Cubic interpolation of the amplitude at off-grid momenta."""
        p = np.asarray(p, dtype=float)
        if np.any(p < self.grid.p_min) or np.any(p > self.grid.p_max):
            raise MomentumOutOfRange(
                f"momentum outside grid range [{self.grid.p_min:g}, {self.grid.p_max:g}]"
            )
        return self.spline(p)

    def expectation_p(self):
        return float(np.sum(self.p * self.density) * self.grid.dp / self.norm2())


@dataclass(frozen=True)
class PotentialSpec:
    """Closed-form potential ``V(x)``.

    Build instances with :meth:`free`, :meth:`linear`, :meth:`harmonic` or
    :meth:`polynomial`.  A uniform field of force ``F`` is ``V = -F x``; the
    harmonic well is ``V = m omega^2 x^2 / 2`` with the mass taken from the
    :class:`Units` in use.
    """

    kind: str = "free"
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in ("free", "linear", "harmonic", "polynomial"):
            raise UnsupportedPotential(f"unknown potential kind {self.kind!r}")
        params = tuple(float(c) for c in self.params)
        for c in params:
            v.check_finite(c, "potential parameter")
        if self.kind == "free" and params:
            raise ValidationError("free potential takes no parameters")
        if self.kind in ("linear", "harmonic") and len(params) != 1:
            raise ValidationError(f"{self.kind} potential takes exactly one parameter")
        if self.kind == "harmonic" and params[0] <= 0:
            raise ValidationError("omega must be positive")
        if self.kind == "polynomial" and not 1 <= len(params) <= MAX_POLY_DEGREE + 1:
            raise UnsupportedPotential(f"polynomial degree must be at most {MAX_POLY_DEGREE}")
        object.__setattr__(self, "params", params)

    @classmethod
    def free(cls):
        return cls("free")

    @classmethod
    def linear(cls, force):
        return cls("linear", (force,))

    @classmethod
    def harmonic(cls, omega):
        return cls("harmonic", (omega,))

    @classmethod
    def polynomial(cls, coefficients):
        """``V(x) = sum_k c_k x^k`` with ``coefficients = (c_0, c_1, ...)``."""
        return cls("polynomial", tuple(coefficients))

    @property
    def force(self):
        return self.params[0] if self.kind == "linear" else None

    @property
    def omega(self):
        return self.params[0] if self.kind == "harmonic" else None

    def coefficients(self, mass=1.0):
        """Power-series coefficients ``c_k`` with ``V(x) = sum_k c_k x^k``."""
        if self.kind == "free":
            return np.zeros(1)
        if self.kind == "linear":
            return np.array([0.0, -self.params[0]])
        if self.kind == "harmonic":
            return np.array([0.0, 0.0, 0.5 * mass * self.params[0] ** 2])
        return np.array(self.params)

    def degree(self):
        c = np.trim_zeros(self.coefficients(), "b")
        return max(len(c) - 1, 0)

    @property
    def is_reference(self):
        """True for the variants with closed-form quantum propagators."""
        return self.kind in ("free", "linear", "harmonic")

    def __str__(self):
        if self.kind == "free":
            return "free"
        if self.kind == "linear":
            return f"linear:F={self.params[0]:g}"
        if self.kind == "harmonic":
            return f"harmonic:omega={self.params[0]:g}"
        return "polynomial:c=" + ",".join(f"{c:g}" for c in self.params)

    @classmethod
    def from_string(cls, text):
        """Parse ``free``, ``linear:F=1``, ``harmonic:omega=1`` or ``polynomial:c=0,0,-1,0,0.25``."""
        kind, _, rest = text.strip().partition(":")
        kind = kind.strip().lower()
        if kind == "free":
            return cls.free()
        key, _, value = rest.partition("=")
        key = key.strip().lower()
        try:
            numbers = [float(c) for c in value.split(",")]
        except ValueError:
            numbers = None
        if numbers is not None:
            if kind == "linear" and key in ("f", "force") and len(numbers) == 1:
                return cls.linear(numbers[0])
            if kind == "harmonic" and key in ("omega", "w") and len(numbers) == 1:
                return cls.harmonic(numbers[0])
            if kind == "polynomial" and key in ("c", "coefficients"):
                return cls.polynomial(numbers)
        raise UnsupportedPotential(f"cannot parse potential {text!r}")

    def to_dict(self):
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, str):
            return cls.from_string(d)
        return cls(d["kind"], tuple(d.get("params", ())))


@dataclass(frozen=True)
class PhaseSpacePoint:
    x: float
    p: float
    t: float = 0.0

    def __post_init__(self):
        for name in ("x", "p", "t"):
            object.__setattr__(self, name, v.check_finite(getattr(self, name), name))


def potential_eval(V, x, units=None):
    """Return ``(V(x), V'(x), V''(x))``.

    Works elementwise on arrays.
    """
    units = units or Units()
    c = V.coefficients(units.mass)
    x = np.asarray(x, dtype=float)
    d1 = P.polyder(c) if len(c) > 1 else np.zeros(1)
    d2 = P.polyder(d1) if len(d1) > 1 else np.zeros(1)
    out = P.polyval(x, c), P.polyval(x, d1), P.polyval(x, d2)
    if x.ndim == 0:
        return tuple(float(o) for o in out)
    return tuple(np.broadcast_to(o, x.shape).astype(float) for o in out)


def gaussian_packet(grid, sigma, x0=0.0, p0=0.0, units=None, t=0.0):
    """Normalized Gaussian ``(pi sigma^2)^(-1/4) exp(-(x-x0)^2/2sigma^2 + i p0 (x-x0)/hbar)``.

    Raises
    ------
    GridTooCoarse
        If ``sigma < 4 dx``.
    PacketClipped
        If more than 1e-12 of the probability lies outside the box.
    """
    units = units or Units()
    sigma = v.check_positive(sigma, "sigma")
    x0 = v.check_finite(x0, "x0")
    p0 = v.check_finite(p0, "p0")
    if sigma < 4.0 * grid.dx:
        raise GridTooCoarse(f"sigma={sigma:g} is below 4*dx={4 * grid.dx:g}")
    # |psi|^2 has variance sigma^2/2, so the mass beyond distance d is erfc(d/sigma)/2
    tail = 0.5 * erfc((x0 - grid.x_min) / sigma) + 0.5 * erfc((grid.x_max - x0) / sigma)
    if x0 <= grid.x_min or x0 >= grid.x_max or tail > 1e-12:
        raise PacketClipped(f"packet tail mass outside the box is {tail:.3g}")
    xi = grid.x - x0
    amps = (math.pi * sigma**2) ** -0.25 * np.exp(-(xi**2) / (2 * sigma**2) + 1j * p0 * xi / units.hbar)
    return WaveFunction(grid, amps, t, units)


def to_momentum(psi):
    """Coordinate to momentum representation (symmetric ``(2 pi hbar)^-1/2`` convention)."""
    v.check_normalized(psi.norm2())
    hbar = psi.units.hbar
    pgrid = psi.grid.momentum_grid(psi.units)
    p = pgrid.p
    coef = psi.grid.dx / math.sqrt(2 * math.pi * hbar)
    amps = coef * np.exp(-1j * p * psi.grid.x_min / hbar) * np.fft.fftshift(np.fft.fft(psi.amps))
    return MomentumWaveFunction(pgrid, amps, psi.t, psi.units)


def from_momentum(phi):
    """Inverse of :func:`to_momentum`."""
    grid = phi.grid.spatial
    hbar = phi.units.hbar
    shifted = np.fft.ifftshift(phi.amps * np.exp(1j * phi.p * grid.x_min / hbar))
    amps = np.fft.ifft(shifted) * (math.sqrt(2 * math.pi * hbar) / grid.dx)
    return WaveFunction(grid, amps, phi.t, phi.units)
