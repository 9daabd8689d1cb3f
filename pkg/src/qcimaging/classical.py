"""Classical trajectories, two-point shooting, Van Vleck amplitudes and mixed actions.

All trajectories are integrated with velocity Verlet.  The action is the sum
of the discrete Lagrangian of the Verlet map (with a constant-force
correction that is exact for affine potentials), so the endpoint relations
``dS/dx_f = p_f`` and ``dS/dx_i = -p_i`` hold for the discrete flow up to
``O(dt^2)``, and the monodromy matrix is the exact tangent map of the same
flow.  Shooting with Newton's method therefore converges quadratically.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from numpy.polynomial import polynomial as P

from . import _validation as v
from ._kernels import verlet_batch
from .core import PhaseSpacePoint, Units
from .exceptions import (
    CausticSingular,
    MultipleRoots,
    NearCaustic,
    NoConvergence,
    StepTooLarge,
    ValidationError,
)

__all__ = [
    "TrajectoryResult",
    "ShootingResult",
    "default_dt",
    "integrate",
    "integrate_batch",
    "shoot",
    "shoot_batch",
    "multi_start_scan",
    "van_vleck_amp",
    "mixed_action",
    "launch_point",
    "check_determinant_identity",
    "action_gradient_fd",
]

CAUSTIC_EPS = 1e-3
ENERGY_DRIFT_TOL = 1e-8
MAX_ITER = 50
ROOT_MERGE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class TrajectoryResult:
    start: PhaseSpacePoint
    end: PhaseSpacePoint
    action_S: float
    M: np.ndarray
    near_caustic: bool
    energy_drift: float = 0.0
    n_steps: int = 0

    @property
    def M11(self):
        return float(self.M[0, 0])

    @property
    def M12(self):
        return float(self.M[0, 1])

    @property
    def M21(self):
        return float(self.M[1, 0])

    @property
    def M22(self):
        return float(self.M[1, 1])

    @property
    def det_M(self):
        return self.M11 * self.M22 - self.M12 * self.M21

    def to_dict(self):
        return {
            "x_i": self.start.x,
            "p_i": self.start.p,
            "t_i": self.start.t,
            "x_f": self.end.x,
            "p_f": self.end.p,
            "t_f": self.end.t,
            "action_S": self.action_S,
            "M11": self.M11,
            "M12": self.M12,
            "M21": self.M21,
            "M22": self.M22,
            "det_M": self.det_M,
            "near_caustic": self.near_caustic,
            "energy_drift": self.energy_drift,
            "n_steps": self.n_steps,
        }


@dataclass(frozen=True, eq=False)
class ShootingResult:
    p_i: float
    trajectory: TrajectoryResult
    iterations: int
    residual: float


@dataclass(frozen=True)
class _Poly:
    c: np.ndarray = field(repr=False)
    d1: np.ndarray = field(repr=False)
    d2: np.ndarray = field(repr=False)

    @classmethod
    def of(cls, V, units):
        c = np.ascontiguousarray(V.coefficients(units.mass), dtype=float)
        d1 = P.polyder(c) if len(c) > 1 else np.zeros(1)
        d2 = P.polyder(d1) if len(d1) > 1 else np.zeros(1)
        return cls(c, np.ascontiguousarray(d1, dtype=float), np.ascontiguousarray(d2, dtype=float))


def default_dt(V, units=None, duration=None):
    """Default Verlet step for a potential.

    Verlet and the corrected action are exact for affine potentials, so eight
    steps per flight suffice there; curved potentials get a step small enough
    for the 1e-8 energy budget at unit frequency (scaled by ``1/omega`` for
    the harmonic well).
    """
    if V.degree() <= 1:
        return duration / 8 if duration else 1e-2
    if V.kind == "harmonic":
        return 1e-4 / V.omega
    return 1e-4


def _steps(duration, dt):
    n = max(1, math.ceil(duration / dt - 1e-9))
    return n, duration / n


def _caustic_scale(duration, units):
    return duration / units.mass


def integrate_batch(x0, p0, t_i, t_f, V, units=None, dt=None, check_energy=True):
    """Integrate many trajectories over ``[t_i, t_f]``.

    Returns a dict of arrays ``x_f, p_f, S, M11, M12, M21, M22, drift`` and the
    step count under ``n_steps``.
    """
    units = units or Units()
    duration = float(t_f) - float(t_i)
    if not duration > 0:
        raise ValidationError("t_f must be later than t_i")
    dt = default_dt(V, units, duration) if dt is None else v.check_positive(dt, "dt")
    n, h = _steps(duration, dt)
    poly = _Poly.of(V, units)
    x0 = np.ascontiguousarray(np.atleast_1d(np.asarray(x0, dtype=float)))
    p0 = np.ascontiguousarray(np.atleast_1d(np.asarray(p0, dtype=float)))
    x0, p0 = np.broadcast_arrays(x0, p0)
    out = verlet_batch(np.ascontiguousarray(x0), np.ascontiguousarray(p0), n, h, poly.c, poly.d1, poly.d2, units.mass)
    res = dict(zip(("x_f", "p_f", "S", "M11", "M12", "M21", "M22", "drift"), out.T))
    if check_energy:
        worst = float(np.max(res["drift"])) if len(res["drift"]) else 0.0
        if not worst <= ENERGY_DRIFT_TOL:
            raise StepTooLarge(f"relative energy drift {worst:.3g} exceeds {ENERGY_DRIFT_TOL:g}; reduce dt")
    res["n_steps"] = n
    return res


def _result(x_i, p_i, t_i, t_f, row, n, units, caustic_eps):
    M = np.array([[row["M11"], row["M12"]], [row["M21"], row["M22"]]])
    M.setflags(write=False)
    near = abs(row["M12"]) < caustic_eps * _caustic_scale(t_f - t_i, units)
    return TrajectoryResult(
        start=PhaseSpacePoint(x_i, p_i, t_i),
        end=PhaseSpacePoint(row["x_f"], row["p_f"], t_f),
        action_S=float(row["S"]),
        M=M,
        near_caustic=bool(near),
        energy_drift=float(row["drift"]),
        n_steps=n,
    )


def integrate(start, t_f, V, dt=None, units=None, caustic_eps=CAUSTIC_EPS):
    """Integrate one trajectory from ``start`` to time ``t_f``.

    Raises
    ------
    StepTooLarge
        If the relative energy drift exceeds 1e-8.
    """
    units = units or Units()
    res = integrate_batch(start.x, start.p, start.t, t_f, V, units, dt)
    row = {k: float(val[0]) for k, val in res.items() if k != "n_steps"}
    return _result(start.x, start.p, start.t, float(t_f), row, res["n_steps"], units, caustic_eps)


def _tol_x(x_f):
    return 1e-10 * max(1.0, abs(x_f))


def _newton(x_i, t_i, x_f, t_f, V, p, units, dt, caustic_eps, max_iter, tol):
    """Vectorized Newton on ``x_f(p) = target`` for starting momenta ``p``.

    Returns ``(p, residual, iterations, status)`` arrays where status is
    0 converged, 1 caustic, 2 not converged.
    """
    p = np.array(p, dtype=float, copy=True)
    x_f = np.broadcast_to(np.asarray(x_f, dtype=float), p.shape)
    x_i = np.broadcast_to(np.asarray(x_i, dtype=float), p.shape)
    tol = np.broadcast_to(tol, p.shape)
    status = np.full(p.shape, 2, dtype=int)
    resid = np.full(p.shape, np.inf)
    iters = np.zeros(p.shape, dtype=int)
    threshold = caustic_eps * _caustic_scale(t_f - t_i, units)
    active = np.ones(p.shape, dtype=bool)
    for it in range(max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        res = integrate_batch(x_i[idx], p[idx], t_i, t_f, V, units, dt, check_energy=False)
        r = res["x_f"] - x_f[idx]
        resid[idx] = np.abs(r)
        iters[idx] = it
        done = np.abs(r) <= tol[idx]
        status[idx[done]] = 0
        # one free polishing step on converged entries: the residual is already in hand
        polish = done & (np.abs(res["M12"]) >= threshold)
        p[idx[polish]] -= r[polish] / res["M12"][polish]
        caustic = ~done & (np.abs(res["M12"]) < threshold)
        status[idx[caustic]] = 1
        go = ~done & ~caustic
        if it == max_iter:
            break
        p[idx[go]] -= r[go] / res["M12"][go]
        bad = ~np.isfinite(p[idx[go]])
        status[idx[go][bad]] = 2
        active[idx[done | caustic]] = False
        active[idx[go][bad]] = False
    return p, resid, iters, status


def shoot(
    x_i,
    t_i,
    x_f,
    t_f,
    V,
    p_guess=None,
    units=None,
    dt=None,
    caustic_eps=CAUSTIC_EPS,
    max_iter=MAX_ITER,
    certify=False,
    p_range=None,
    n_starts=16,
):
    """Find the initial momentum whose trajectory joins ``(x_i, t_i)`` to ``(x_f, t_f)``.

    Newton iteration ``p <- p - (x_f(p) - x_f) / M12(p)`` to
    ``|residual| <= 1e-10 max(1, |x_f|)``.  With ``certify=True`` a
    :func:`multi_start_scan` over ``p_range`` is run first and more than one
    root raises :class:`MultipleRoots`.

    Raises
    ------
    NearCaustic
        If ``|M12|`` drops below ``caustic_eps * (t_f - t_i)/m``.
    NoConvergence
        After ``max_iter`` iterations.
    MultipleRoots
        When certifying and the scan finds several roots.
    """
    units = units or Units()
    t_i, t_f = float(t_i), float(t_f)
    if not t_f > t_i:
        raise ValidationError("t_f must be later than t_i")
    if p_guess is None:
        p_guess = units.mass * (x_f - x_i) / (t_f - t_i)
    if certify:
        if p_range is None:
            raise ValidationError("certify=True needs p_range")
        roots = multi_start_scan(x_i, t_i, x_f, t_f, V, p_range, n_starts, units=units, dt=dt, caustic_eps=caustic_eps)
        if len(roots) > 1:
            raise MultipleRoots(f"{len(roots)} classical trajectories reach x_f={x_f:g}", roots)
        if len(roots) == 1:
            p_guess = roots[0]
    tol = _tol_x(x_f)
    p, resid, iters, status = _newton(x_i, t_i, x_f, t_f, V, [p_guess], units, dt, caustic_eps, max_iter, tol)
    if status[0] == 1:
        raise NearCaustic(f"caustic: dx_f/dp_i vanishes near p={p[0]:g} (x_f={x_f:g}, t={t_f - t_i:g})")
    if status[0] != 0:
        raise NoConvergence(f"shooting did not converge to x_f={x_f:g} in {max_iter} iterations")
    traj = integrate(PhaseSpacePoint(x_i, p[0], t_i), t_f, V, dt, units, caustic_eps)
    return ShootingResult(float(p[0]), traj, int(iters[0]), float(resid[0]))


def shoot_batch(x_i, t_i, x_f, t_f, V, p_guess=None, units=None, dt=None, caustic_eps=CAUSTIC_EPS, max_iter=MAX_ITER):
    """Shoot to many targets ``x_f`` at once.

    Returns a dict of arrays (``p_i`` plus the :func:`integrate_batch`
    columns) evaluated on the converged trajectories.  Any caustic or
    non-convergent target raises like :func:`shoot`.
    """
    units = units or Units()
    x_f = np.atleast_1d(np.asarray(x_f, dtype=float))
    if p_guess is None:
        p_guess = units.mass * (x_f - x_i) / (t_f - t_i)
    p_guess = np.broadcast_to(np.asarray(p_guess, dtype=float), x_f.shape)
    tol = 1e-10 * np.maximum(1.0, np.abs(x_f))
    p, resid, iters, status = _newton(x_i, t_i, x_f, t_f, V, p_guess, units, dt, caustic_eps, max_iter, tol)
    if np.any(status == 1):
        bad = x_f[status == 1][0]
        raise NearCaustic(f"caustic: dx_f/dp_i vanishes on the way to x_f={bad:g} (t={t_f - t_i:g})")
    if np.any(status != 0):
        bad = x_f[status != 0][0]
        raise NoConvergence(f"shooting did not converge to x_f={bad:g} in {max_iter} iterations")
    res = integrate_batch(x_i, p, t_i, t_f, V, units, dt)
    res["p_i"] = p
    res["residual"] = resid
    res["iterations"] = iters
    return res


def multi_start_scan(x_i, t_i, x_f, t_f, V, p_range, n_starts=16, units=None, dt=None, caustic_eps=CAUSTIC_EPS):
    """All distinct shooting roots reachable from ``n_starts`` evenly spaced guesses in ``p_range``.

    Starts that hit a caustic or fail to converge are dropped; roots within
    1e-6 of each other are merged and only roots inside ``p_range`` are
    kept.  An empty list is a valid answer.
    """
    if n_starts < 8:
        raise ValidationError("n_starts must be at least 8")
    units = units or Units()
    lo, hi = sorted(float(b) for b in p_range)
    starts = np.linspace(lo, hi, int(n_starts))
    p, _, _, status = _newton(x_i, t_i, x_f, t_f, V, starts, units, dt, caustic_eps, MAX_ITER, _tol_x(x_f))
    found = np.sort(p[(status == 0) & (p >= lo - ROOT_MERGE_TOL) & (p <= hi + ROOT_MERGE_TOL)])
    roots = []
    for r in found:
        if not roots or r - roots[-1] > ROOT_MERGE_TOL:
            roots.append(float(r))
    return roots


def van_vleck_amp(traj):
    """``|d^2 S / dx_f dx_i|^(1/2) = |M12|^(-1/2)``.

    Raises
    ------
    CausticSingular
        If the trajectory is flagged near a caustic.
    """
    if traj.near_caustic:
        raise CausticSingular(f"caustic: Van Vleck amplitude diverges (M12={traj.M12:.3g})")
    return abs(traj.M12) ** -0.5


def launch_point(x_f, t_f, p, t_i, V, units=None, dt=None, x_guess=None, caustic_eps=CAUSTIC_EPS, max_iter=MAX_ITER):
    """Trajectory launched with momentum ``p`` at ``t_i`` that reaches ``x_f`` at ``t_f``.

    Newton on the launch position with derivative ``M11``.  Raises
    :class:`CausticSingular` when ``|M11| < caustic_eps`` (the launch point
    is then not a function of ``(x_f, p)``).
    """
    units = units or Units()
    x = x_f - p * (t_f - t_i) / units.mass if x_guess is None else float(x_guess)
    tol = 1e-13 * max(1.0, abs(x_f))
    for it in range(max_iter + 1):
        res = integrate_batch(x, p, t_i, t_f, V, units, dt, check_energy=False)
        r = float(res["x_f"][0]) - x_f
        if abs(r) <= tol:
            return integrate(PhaseSpacePoint(x, p, t_i), t_f, V, dt, units, caustic_eps)
        m11 = float(res["M11"][0])
        if abs(m11) < caustic_eps:
            raise CausticSingular(f"caustic in the mixed representation: dx_f/dx_i = {m11:.3g}")
        x -= r / m11
        if not math.isfinite(x):
            break
    raise NoConvergence(f"launch-point shooting to x_f={x_f:g} did not converge")


def mixed_action(x_f, t_f, p, t_i, x_ref=0.0, V=None, units=None, dt=None, x_guess=None):
    """Legendre-transformed action ``S(x_f, t_f; x, t_i) + p (x - x_ref)``.

    ``x`` is the launch point reached by :func:`launch_point`.  Its
    derivative in ``p`` is ``x - x_ref``.
    """
    traj = launch_point(x_f, t_f, p, t_i, V, units, dt, x_guess)
    return traj.action_S + p * (traj.start.x - x_ref)


def _second_difference(f, x0, h):
    return (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h)


def check_determinant_identity(x_f, t_f, x_i, t_i, V, units=None, dt=None, h=None):
    """Relative deviation between the two sides of the Van Vleck determinant identity.

    Left side ``|dx_f/dx_i|^(-1/2) |d^2 S_mixed/dp^2|^(-1/2)`` uses the
    monodromy entry ``M11`` and a Richardson-extrapolated central second
    difference of :func:`mixed_action`; right side
    ``|d^2 S/dx_f dx_i|^(1/2) = |M12|^(-1/2)`` uses the monodromy alone.
    """
    units = units or Units()
    sol = shoot(x_i, t_i, x_f, t_f, V, units=units, dt=dt)
    traj = sol.trajectory
    rhs = van_vleck_amp(traj)
    if abs(traj.M11) < CAUSTIC_EPS:
        raise CausticSingular(f"caustic in the mixed representation: dx_f/dx_i = {traj.M11:.3g}")
    p0 = sol.p_i
    if h is None:
        h = 1e-2 * max(1.0, abs(p0))

    def s_mixed(p):
        return mixed_action(x_f, t_f, p, t_i, x_i, V, units, dt, x_guess=x_i)

    d_h = _second_difference(s_mixed, p0, h)
    d_h2 = _second_difference(s_mixed, p0, h / 2)
    hess = (4.0 * d_h2 - d_h) / 3.0
    lhs = abs(traj.M11) ** -0.5 * abs(hess) ** -0.5
    return abs(lhs - rhs) / rhs


def action_gradient_fd(x_i, t_i, x_f, t_f, V, units=None, dt=None, h=1e-4):
    """Central-difference ``(dS/dx_f, dS/dx_i)`` of the two-point action."""
    units = units or Units()

    def S(a, b):
        return shoot(a, t_i, b, t_f, V, units=units, dt=dt).trajectory.action_S

    dS_dxf = (S(x_i, x_f + h) - S(x_i, x_f - h)) / (2 * h)
    dS_dxi = (S(x_i + h, x_f) - S(x_i - h, x_f)) / (2 * h)
    return dS_dxf, dS_dxi
