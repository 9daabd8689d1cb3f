"""Imaging-theorem wavefunctions, trajectory densities and probability transport.

For a single classical trajectory from ``(x_i, t_i)`` to ``(x_f, t_f)`` with
initial momentum ``p_i`` the asymptotic wavefunction is

    psi_IT(x_f, t_f) = exp(-i pi/4) |M12|^(-1/2) exp(i S/hbar) phi(p_i, t_i),

where ``M12 = dx_f/dp_i`` and ``S`` is the two-point action.  The Maslov
phase is not tracked; trajectories at or near caustics are refused.
"""

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np

from . import _validation as v
from .classical import (
    CAUSTIC_EPS,
    integrate_batch,
    multi_start_scan,
    shoot,
    shoot_batch,
    van_vleck_amp,
)
from .core import Units
from .exceptions import CausticSingular, DivisionNearZero, MomentumOutOfRange, MultipleRoots, ValidationError

__all__ = [
    "ItSample",
    "ValidityReport",
    "DensityRatio",
    "TransportBin",
    "it_wavefunction",
    "it_wavefunction_batch",
    "free_it",
    "density_ratio_check",
    "probability_transport",
    "transport_invariance",
    "validity_report",
    "zone_start",
]

CONSTANT_PHASE = -math.pi / 4
F_MIN_DEFAULT = 10.0
TAIL_FLOOR = 1e-30

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True)
class ItSample:
    x_f: float
    t_f: float
    p_i: float
    prefactor: float
    phase: float
    amp: complex
    action_S: float = 0.0
    phi_value: complex = 0j

    def to_dict(self):
        return {
            "x_f": self.x_f,
            "t_f": self.t_f,
            "p_i": self.p_i,
            "prefactor": self.prefactor,
            "phase": self.phase,
            "amp_re": self.amp.real,
            "amp_im": self.amp.imag,
            "abs_amp": abs(self.amp),
            "action_S": self.action_S,
        }


@dataclass(frozen=True)
class ValidityReport:
    sigma: float
    t: float
    ratio: float
    f: float
    mean_E: float
    action_ratio: float
    verdict: str

    @property
    def inside(self):
        return self.verdict == "inside_zone"

    @property
    def x_i(self):
        return self.f * self.sigma


class DensityRatio(NamedTuple):
    lhs: float
    rhs: float
    deviation: float
    x_f: float
    p_i: float


class TransportBin(NamedTuple):
    p_a: float
    p_b: float
    x_a: float
    x_b: float
    prob_momentum: float
    prob_it: float
    prob_exact: float = float("nan")

    @property
    def identity_deviation(self):
        return abs(self.prob_it - self.prob_momentum)

    @property
    def exact_deviation(self):
        return abs(self.prob_exact - self.prob_momentum)


def _t_initial(phi, t_i):
    return phi.t if t_i is None else float(t_i)


def _p_range(phi):
    return (float(phi.grid.p_min), float(phi.grid.p_max))


def _phi_at(phi, p):
    try:
        return phi(p)
    except MomentumOutOfRange as exc:
        raise MomentumOutOfRange(f"{exc} (classical momentum {np.min(p):g}..{np.max(p):g})") from None


def it_wavefunction(x_f, t_f, phi, V, x_i=0.0, t_i=None, dt=None, certify=True, n_starts=16):
    """Imaging-theorem amplitude at ``(x_f, t_f)`` from the momentum wavefunction ``phi``.

    ``t_i`` defaults to ``phi.t``.  With ``certify`` the shooting problem is
    first scanned for additional roots across the momentum grid.

    Raises
    ------
    CausticSingular
        If the connecting trajectory sits on or near a caustic.
    MultipleRoots
        If more than one trajectory connects the endpoints.
    MomentumOutOfRange
        If ``p_i`` lies outside the momentum grid.
    """
    units = phi.units
    t_i = _t_initial(phi, t_i)
    sol = shoot(
        x_i, t_i, x_f, t_f, V, units=units, dt=dt, certify=certify, p_range=_p_range(phi), n_starts=n_starts
    )
    traj = sol.trajectory
    pref = van_vleck_amp(traj)
    phi_val = complex(_phi_at(phi, sol.p_i))
    phase = traj.action_S / units.hbar + CONSTANT_PHASE
    amp = pref * np.exp(1j * phase) * phi_val
    return ItSample(float(x_f), float(t_f), sol.p_i, pref, phase, complex(amp), traj.action_S, phi_val)


def it_wavefunction_batch(x_f, t_f, phi, V, x_i=0.0, t_i=None, dt=None, certify_points=0):
    """Vectorized :func:`it_wavefunction` over an array of detector positions.

    Uniqueness is certified at ``certify_points`` evenly spaced positions
    only.  Returns a dict of arrays ``x_f, p_i, prefactor, phase, amp, M12``.
    """
    units = phi.units
    t_i = _t_initial(phi, t_i)
    x_f = np.atleast_1d(np.asarray(x_f, dtype=float))
    if certify_points:
        for xc in x_f[np.linspace(0, x_f.size - 1, certify_points).astype(int)]:
            roots = multi_start_scan(x_i, t_i, xc, t_f, V, _p_range(phi), 16, units=units, dt=dt)
            if len(roots) > 1:
                raise MultipleRoots(f"{len(roots)} classical trajectories reach x_f={xc:g}", roots)
    res = shoot_batch(x_i, t_i, x_f, t_f, V, units=units, dt=dt)
    p_i = res["p_i"]
    phi_val = _phi_at(phi, p_i)
    pref = np.abs(res["M12"]) ** -0.5
    phase = res["S"] / units.hbar + CONSTANT_PHASE
    return {
        "x_f": x_f,
        "p_i": p_i,
        "prefactor": pref,
        "phase": phase,
        "amp": pref * np.exp(1j * phase) * phi_val,
        "M12": res["M12"],
    }


def free_it(x, t, phi):
    """Free-particle imaging amplitude ``(m/it)^(1/2) exp(i p^2 t/2m hbar) phi(p)`` with ``p = m x/t``.

    ``t`` is the flight time from the origin.
    """
    t = v.check_positive(t, "t")
    hbar, m = phi.units.hbar, phi.units.mass
    x = np.asarray(x, dtype=float)
    p = m * x / t
    out = np.sqrt(m / t) * np.exp(-0.25j * math.pi) * np.exp(1j * p**2 * t / (2 * m * hbar)) * _phi_at(phi, p)
    return complex(out) if out.ndim == 0 else out


def density_ratio_check(x_f, t_f, psi_exact, phi, V, x_i=0.0, t_i=None, dt=None):
    """Compare ``|psi_exact(x_f)|^2 / |phi(p_i)|^2`` with the Van Vleck density ``1/|M12|``.

    ``x_f`` is snapped to the nearest grid point of ``psi_exact``.

    Raises
    ------
    DivisionNearZero
        If ``|phi(p_i)|^2 < 1e-30``.
    """
    units = phi.units
    t_i = _t_initial(phi, t_i)
    j = psi_exact.grid.nearest_index(x_f)
    xs = float(psi_exact.grid.x[j])
    sol = shoot(x_i, t_i, xs, t_f, V, units=units, dt=dt)
    if sol.trajectory.near_caustic:
        raise CausticSingular(f"caustic at x_f={xs:g}")
    phi2 = float(np.abs(_phi_at(phi, sol.p_i)) ** 2)
    if phi2 < TAIL_FLOOR:
        raise DivisionNearZero(f"|phi(p_i={sol.p_i:g})|^2 = {phi2:.3g} is below {TAIL_FLOOR:g}")
    lhs = float(psi_exact.density[j]) / phi2
    rhs = 1.0 / abs(sol.trajectory.M12)
    return DensityRatio(lhs, rhs, abs(lhs - rhs) / rhs, xs, sol.p_i)


def _exact_interval_probability(psi, a, b):
    a, b = min(a, b), max(a, b)
    x = psi.grid.x
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (psi.density[1:] + psi.density[:-1]) * psi.grid.dx)))
    return float(np.interp(b, x, cum) - np.interp(a, x, cum))


def probability_transport(phi, V, x_i, t_i, t_f, p_bins, psi_exact=None, dt=None):
    """Map momentum bins onto detector intervals and compare their probabilities.

    For each bin ``[p_a, p_b]`` returns a :class:`TransportBin` holding
    ``int |phi|^2 dp`` over the bin and ``int |psi_IT|^2 dx_f`` over
    ``[x_f(p_a), x_f(p_b)]``.  If ``psi_exact`` (a state at ``t_f``) is given,
    its probability over the same interval is included as well.

    Both integrals are evaluated exactly for the cubic interpolant of
    ``phi``: the momentum side by 4-point Gauss-Legendre on every
    interpolation cell, the coordinate side by 4-point Gauss-Legendre on the
    images of those cells, with each node reached by shooting from ``x_f``.
    """
    units = phi.units
    t_i = _t_initial(phi, t_i)
    p_knots = np.asarray(phi.grid.p)
    spline = phi.spline
    edges = np.asarray(p_bins, dtype=float)
    if edges.ndim == 1:
        edges = np.column_stack((edges[:-1], edges[1:]))
    if np.any(edges < p_knots[0]) or np.any(edges > p_knots[-1]):
        raise MomentumOutOfRange("transport bins must lie inside the momentum grid")

    out = []
    for p_a, p_b in edges:
        if not p_b > p_a:
            raise ValidationError("bins must have p_b > p_a")
        cells = np.concatenate(([p_a], p_knots[(p_knots > p_a) & (p_knots < p_b)], [p_b]))
        # momentum side
        lo, hi = cells[:-1], cells[1:]
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        prob_p = float(np.sum(half[:, None] * _GL_WEIGHTS[None, :] * np.abs(spline(nodes)) ** 2))

        # images of the cell boundaries
        img = integrate_batch(x_i, cells, t_i, t_f, V, units, dt)
        if np.any(np.abs(img["M12"]) < CAUSTIC_EPS * (t_f - t_i) / units.mass):
            raise CausticSingular("caustic inside a transport bin")
        xc = img["x_f"]
        if np.any(np.diff(xc) * np.sign(xc[-1] - xc[0]) <= 0):
            raise MultipleRoots("momentum-to-position map folds inside the bin")
        xlo, xhi = xc[:-1], xc[1:]
        xhalf, xmid = 0.5 * (xhi - xlo), 0.5 * (xhi + xlo)
        xnodes = (xmid[:, None] + xhalf[:, None] * _GL_NODES[None, :]).ravel()
        guess = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
        sol = shoot_batch(x_i, t_i, xnodes, t_f, V, p_guess=guess, units=units, dt=dt)
        dens = np.abs(spline(sol["p_i"])) ** 2 / np.abs(sol["M12"])
        prob_x = float(np.sum((np.abs(xhalf)[:, None] * _GL_WEIGHTS[None, :]).ravel() * dens))

        prob_ex = float("nan") if psi_exact is None else _exact_interval_probability(psi_exact, xc[0], xc[-1])
        out.append(TransportBin(float(p_a), float(p_b), float(xc[0]), float(xc[-1]), prob_p, prob_x, prob_ex))
    return out


def transport_invariance(phi, V, x_i, t_i, p, t_a, t_b, dt=None):
    """``|psi_IT(x_f, t)|^2 |dx_f/dp|`` at two times along the trajectory launched with momentum ``p``.

    Both values equal ``|phi(p)|^2`` when probability is carried along the
    classical flow.  Each amplitude is obtained by shooting back from the
    detector position, and the Jacobian ``dx_f/dp`` by central differences
    of forward trajectories, independently of the monodromy used inside the
    amplitude.
    """
    units = phi.units
    t_i = _t_initial(phi, t_i)
    h = 1e-4 * max(1.0, abs(p))
    values = []
    for t in (t_a, t_b):
        fwd = integrate_batch(x_i, np.array([p - h, p, p + h]), t_i, t, V, units, dt)
        jac = abs(fwd["x_f"][2] - fwd["x_f"][0]) / (2 * h)
        sample = it_wavefunction(float(fwd["x_f"][1]), t, phi, V, x_i, t_i, dt, certify=False)
        values.append(abs(sample.amp) ** 2 * jac)
    return tuple(values)


def validity_report(sigma, t_i, units=None, f_min=F_MIN_DEFAULT):
    """Transition-zone diagnostics for a packet of width ``sigma`` at time ``t_i``.

    ``f = sqrt(hbar t_i/m)/sigma`` and the action ratio ``E t_i/hbar`` equals
    ``f^2/2`` by construction.  The verdict is ``inside_zone`` iff
    ``f >= f_min``.
    """
    units = units or Units()
    sigma = v.check_positive(sigma, "sigma")
    t_i = v.check_positive(t_i, "t_i")
    hbar, m = units.hbar, units.mass
    ratio = hbar * t_i / (m * sigma**2)
    f = math.sqrt(hbar * t_i / m) / sigma
    mean_E = hbar**2 / (2 * m * sigma**2)
    verdict = "inside_zone" if f >= f_min else "outside_zone"
    return ValidityReport(sigma, t_i, ratio, f, mean_E, mean_E * t_i / hbar, verdict)


def zone_start(sigma, f, units=None):
    """Start of the transition zone: ``(t_i, x_i) = (m f^2 sigma^2 / hbar, f sigma)``."""
    units = units or Units()
    sigma = v.check_positive(sigma, "sigma")
    f = v.check_positive(f, "f")
    return units.mass * f**2 * sigma**2 / units.hbar, f * sigma
