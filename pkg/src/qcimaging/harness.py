"""Scenarios, metric tables, convergence scans and transition-zone tables.

A :class:`Scenario` fixes a potential, an initial Gaussian, a grid and a list
of observation times.  :func:`run_scenario` propagates the packet exactly
with the split-operator solver, builds the imaging-theorem wavefunction from
the initial momentum distribution, and emits one :class:`MetricRow` per time.
"""

from dataclasses import asdict, dataclass, field, fields, replace
import json
import logging
import math

import numpy as np

from .classical import check_determinant_identity, integrate_batch
from .core import PotentialSpec, SpatialGrid, Units, gaussian_packet, potential_eval, to_momentum
from .exceptions import ImagingError, ValidationError
from .imaging import (
    F_MIN_DEFAULT,
    density_ratio_check,
    it_wavefunction_batch,
    probability_transport,
    validity_report,
    zone_start,
)
from .qprop import PropagatorConfig, propagate

__all__ = [
    "Scenario",
    "MetricRow",
    "ScanResult",
    "ZoneRow",
    "CHECKS",
    "BUILTINS",
    "builtin",
    "run_scenario",
    "scenario_metadata",
    "convergence_scan",
    "transition_zone_table",
    "auto_grid",
]

logger = logging.getLogger(__name__)

CHECKS = ("density_ratio", "transport", "determinant_identity", "convergence", "validity")
# spelling used in scenario files
_CHECK_ALIASES = {"identity_eq5": "determinant_identity"}
SUPPORT_FLOOR = 1e-12
ALIAS_SAFETY = 0.5


@dataclass(frozen=True)
class Scenario:
    name: str
    potential: PotentialSpec = field(default_factory=PotentialSpec.free)
    sigma: float = 1.0
    x0: float = 0.0
    p0: float = 0.0
    units: Units = field(default_factory=Units)
    grid: SpatialGrid = None
    schedule: tuple = (1.0,)
    checks: tuple = CHECKS
    x_i: float = 0.0
    dt_quantum: float = None
    dt_classical: float = None
    f_min: float = F_MIN_DEFAULT
    evidences: tuple = ()
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(float(t) for t in self.schedule))
        checks = tuple(_CHECK_ALIASES.get(c, c) for c in self.checks)
        object.__setattr__(self, "checks", checks)
        object.__setattr__(self, "evidences", tuple(self.evidences))

    def validate(self):
        """Raise :class:`ValidationError` describing the first problem found."""
        if not self.name:
            raise ValidationError("scenario needs a name")
        if not self.schedule:
            raise ValidationError("schedule is empty")
        ts = np.array(self.schedule)
        if np.any(ts <= 0) or np.any(~np.isfinite(ts)):
            raise ValidationError("observation times must be positive and finite")
        if np.any(np.diff(ts) <= 0):
            raise ValidationError("schedule must be strictly increasing")
        unknown = set(self.checks) - set(CHECKS)
        if unknown:
            raise ValidationError(f"unknown checks: {sorted(unknown)}")
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")
        return self

    def to_dict(self):
        d = {
            "name": self.name,
            "potential": self.potential.to_dict(),
            "initial": {"sigma": self.sigma, "x0": self.x0, "p0": self.p0},
            "units": {"hbar": self.units.hbar, "mass": self.units.mass},
            "grid": None if self.grid is None else {"x_min": self.grid.x_min, "x_max": self.grid.x_max, "n": self.grid.n},
            "schedule": list(self.schedule),
            "checks": list(self.checks),
            "x_i": self.x_i,
            "dt_quantum": self.dt_quantum,
            "dt_classical": self.dt_classical,
            "f_min": self.f_min,
            "evidences": list(self.evidences),
            "description": self.description,
        }
        return d

    @classmethod
    def from_dict(cls, d):
        """Build a scenario from its JSON form.  A top-level ``scenario`` key is unwrapped."""
        if "scenario" in d and isinstance(d["scenario"], dict):
            d = d["scenario"]
        try:
            init = d.get("initial", {})
            grid = d.get("grid")
            units = d.get("units", {})
            return cls(
                name=d["name"],
                potential=PotentialSpec.from_dict(d.get("potential", "free")),
                sigma=float(init.get("sigma", 1.0)),
                x0=float(init.get("x0", 0.0)),
                p0=float(init.get("p0", 0.0)),
                units=Units(float(units.get("hbar", 1.0)), float(units.get("mass", 1.0))),
                grid=None if grid is None else SpatialGrid(float(grid["x_min"]), float(grid["x_max"]), int(grid["n"])),
                schedule=tuple(d.get("schedule", (1.0,))),
                checks=tuple(d.get("checks", CHECKS)),
                x_i=float(d.get("x_i", 0.0)),
                dt_quantum=d.get("dt_quantum"),
                dt_classical=d.get("dt_classical"),
                f_min=float(d.get("f_min", F_MIN_DEFAULT)),
                evidences=tuple(d.get("evidences", ())),
                description=d.get("description", ""),
            ).validate()
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"invalid scenario: {exc}") from exc

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class MetricRow:
    scenario: str
    t: float
    validity_ratio: float
    l2_density_error: float
    sup_density_error_at_classical_points: float
    fidelity: float
    eq5_deviation: float
    transport_deviation: float

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ScanResult:
    slope: float
    intercept: float
    ratios: tuple
    errors: tuple


@dataclass(frozen=True)
class ZoneRow:
    mass: float
    sigma: float
    f: float
    t_i: float
    x_i: float
    action_ratio: float


BUILTINS = {
    "free-gaussian": Scenario(
        name="free-gaussian",
        schedule=(1.0, 3.0, 10.0, 30.0, 100.0),
        evidences=(
            "mixed-propagator evolution (exact split-operator oracle)",
            "exact free spreading of a Gaussian",
            "free-particle imaging theorem",
            "trajectory density as Van Vleck determinant",
            "probability transport along trajectories",
            "Van Vleck determinant identity",
        ),
        description="Gaussian of width 1 a.u. released at rest, free flight (electron units).",
    ),
    "linear-field": Scenario(
        name="linear-field",
        potential=PotentialSpec.linear(0.05),
        schedule=(10.0, 20.0, 50.0, 100.0),
        evidences=(
            "generalized imaging theorem in a uniform extraction field",
            "trajectory density as Van Vleck determinant",
            "probability transport along trajectories",
            "Van Vleck determinant identity",
        ),
        description="Gaussian of width 1 a.u. extracted by a uniform field F = 0.05 a.u.",
    ),
    "harmonic": Scenario(
        name="harmonic",
        potential=PotentialSpec.harmonic(1.0),
        sigma=0.5,
        schedule=(0.5, 1.0, 1.4, 2.0, 2.5),
        evidences=(
            "generalized imaging theorem in a confining field",
            "probability transport along trajectories",
            "Van Vleck determinant identity",
        ),
        description="Squeezed Gaussian in a harmonic well, observed before the first focus.",
    ),
    "harmonic-caustic": Scenario(
        name="harmonic-caustic",
        potential=PotentialSpec.harmonic(1.0),
        sigma=0.5,
        schedule=(1.0, math.pi),
        evidences=("single-trajectory restriction: refusal at a caustic",),
        description="Harmonic well observed at the focal time pi/omega, where the imaging amplitude diverges.",
    ),
    "hydrogen-electron": Scenario(
        name="hydrogen-electron",
        schedule=(100.0, 1000.0, 10000.0),
        checks=("density_ratio", "validity"),
        evidences=(
            "transition-zone numbers for an ionized electron (x_i ~ 100 a.u., t_i = 1e4 a.u. at f = 100)",
            "free-particle imaging theorem",
        ),
        description="Electron wavepacket of width 1 Bohr radius followed to the start of the f = 100 zone.",
    ),
}


def builtin(name):
    try:
        return BUILTINS[name]
    except KeyError:
        raise ValidationError(f"unknown builtin scenario {name!r}; choose from {sorted(BUILTINS)}") from None


def _free_spread(sigma, t, units):
    tau = units.hbar * t / (units.mass * sigma**2)
    return sigma * math.sqrt(1.0 + tau**2)


def auto_grid(s, min_n=256):
    """Grid whose box contains the packet at every observation time.

    Half-width is ``max_t (|x_c(t)| + 8 sigma_spread(t))`` with the centre
    ``x_c`` from the classical trajectory of ``(x0, p0)`` and the width from
    the free-spreading law.  The spacing resolves the largest classical
    momentum reached by the ``(x0 +- 6 sigma, p0 +- 10 hbar/sigma)`` fan.
    """
    u = s.units
    ts = np.array(s.schedule)
    xs, ps = np.meshgrid(np.linspace(-6, 6, 5) * s.sigma + s.x0, np.linspace(-10, 10, 9) * u.hbar / s.sigma + s.p0)
    half = abs(s.x0) + 8 * s.sigma
    p_need = np.max(np.abs(ps))
    centre = ([s.x0], [s.p0])
    for t in ts:
        c = integrate_batch(*centre, 0.0, t, s.potential, u, s.dt_classical, check_energy=False)
        half = max(half, abs(float(c["x_f"][0])) + 8 * _free_spread(s.sigma, t, u))
        fan = integrate_batch(xs.ravel(), ps.ravel(), 0.0, t, s.potential, u, s.dt_classical, check_energy=False)
        p_need = max(p_need, float(np.max(np.abs(fan["p_f"]))))
    dx_max = min(math.pi * u.hbar / p_need, s.sigma / 4)
    n = max(min_n, 1 << math.ceil(math.log2(2 * half / dx_max)))
    return SpatialGrid.symmetric(half, n)


def _quantum_config(s, grid, duration):
    u = s.units
    pgrid = grid.momentum_grid(u)
    p_max = abs(pgrid.p_min)
    limit = ALIAS_SAFETY * (math.pi / 4) * u.mass * u.hbar / (p_max * pgrid.dp)
    _, dV, d2V = potential_eval(s.potential, grid.x, u)
    slope = float(np.max(np.abs(dV)))
    if slope > 0:
        limit = min(limit, ALIAS_SAFETY * (math.pi / 4) * u.hbar / (slope * grid.dx))
    curv = float(np.max(np.abs(d2V)))
    if curv > 0:
        limit = min(limit, 1e-3 / math.sqrt(curv / u.mass))
    if s.dt_quantum is not None:
        limit = min(limit, float(s.dt_quantum))
    return PropagatorConfig.for_duration(duration, limit)


def _checked(name, check, t, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ImagingError as exc:
        raise type(exc)(f"scenario {name!r}: check {check!r} failed at t={t:g}: {exc}") from exc


def _core_metrics(psi, phi0, s, t):
    rho = psi.density
    mask = rho > SUPPORT_FLOOR * rho.max()
    xs = psi.grid.x[mask]
    it = it_wavefunction_batch(xs, t, phi0, s.potential, s.x_i, 0.0, s.dt_classical, certify_points=3)
    amp_it = it["amp"]
    amp_ex = psi.amps[mask]
    rho_it = np.abs(amp_it) ** 2
    l2 = math.sqrt(float(np.sum((rho[mask] - rho_it) ** 2)) / float(np.sum(rho[mask] ** 2)))
    overlap = abs(np.vdot(amp_ex, amp_it))
    fid = overlap / math.sqrt(float(np.sum(np.abs(amp_ex) ** 2) * np.sum(rho_it)))
    return l2, float(fid)


def _classical_points(s, t, phi0):
    u = s.units
    ps = s.p0 + np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * u.hbar / s.sigma
    res = integrate_batch(s.x_i, ps, 0.0, t, s.potential, u, s.dt_classical)
    return res["x_f"]


def run_scenario(s):
    """Run a scenario and return one :class:`MetricRow` per observation time.

    Metrics of checks not listed in ``s.checks`` are reported as NaN.  Any
    numerical failure aborts the run with the failing check named in the
    error message.
    """
    s.validate()
    u = s.units
    grid = s.grid or _checked(s.name, "grid", s.schedule[-1], auto_grid, s)
    psi = _checked(s.name, "initial", 0.0, gaussian_packet, grid, s.sigma, s.x0, s.p0, u)
    phi0 = to_momentum(psi)
    rows = []
    t_prev = 0.0
    for t in s.schedule:
        cfg = _quantum_config(s, grid, t - t_prev)
        psi = _checked(s.name, "propagate", t, propagate, psi, s.potential, cfg)
        t_prev = t
        logger.info("%s: t=%g (%d split-operator steps)", s.name, t, cfg.n_steps)

        l2, fid = _checked(s.name, "imaging", t, _core_metrics, psi, phi0, s, t)

        sup = float("nan")
        if "density_ratio" in s.checks:
            devs = []
            for xf in _classical_points(s, t, phi0):
                r = _checked(s.name, "density_ratio", t, density_ratio_check, xf, t, psi, phi0, s.potential, s.x_i, 0.0, s.dt_classical)
                devs.append(r.deviation)
            sup = max(devs)

        ident = float("nan")
        if "determinant_identity" in s.checks:
            xc = float(_classical_points(s, t, phi0)[2])
            ident = _checked(s.name, "determinant_identity", t, check_determinant_identity, xc, t, s.x_i, 0.0, s.potential, u, s.dt_classical)

        tr = float("nan")
        if "transport" in s.checks:
            bins = s.p0 + np.arange(-3.0, 4.0) * u.hbar / s.sigma
            out = _checked(s.name, "transport", t, probability_transport, phi0, s.potential, s.x_i, 0.0, t, bins, psi, s.dt_classical)
            tr = max(b.exact_deviation for b in out)

        ratio = validity_report(s.sigma, t, u, s.f_min).ratio
        rows.append(MetricRow(s.name, t, ratio, l2, sup, fid, ident, tr))
    return rows


def scenario_metadata(s):
    """Descriptive metadata emitted next to the metric table."""
    meta = {
        "scenario": s.to_dict(),
        "evidences": list(s.evidences),
        "metric_fields": MetricRow.field_names(),
    }
    if "validity" in s.checks:
        meta["validity"] = [asdict(validity_report(s.sigma, t, s.units, s.f_min)) for t in s.schedule]
    return meta


def convergence_scan(s, t_grid, f_min=None):
    """Least-squares log-log slope of ``l2_density_error`` against the validity ratio.

    Preconditions: at least five times spanning at least one decade, all
    inside the transition zone per :func:`validity_report` with ``f_min``
    (defaults to the scenario's).
    """
    ts = np.asarray(sorted(t_grid), dtype=float)
    if ts.size < 5:
        raise ValidationError("convergence scan needs at least 5 times")
    if ts[-1] / ts[0] < 10 * (1 - 1e-12):
        raise ValidationError("convergence scan must span at least one decade")
    f_min = s.f_min if f_min is None else f_min
    for t in ts:
        rep = validity_report(s.sigma, t, s.units, f_min)
        if not rep.inside:
            raise ValidationError(f"t={t:g} lies outside the transition zone (f={rep.f:.3g} < {f_min:g})")
    scan = replace(s, schedule=tuple(ts), checks=(), grid=s.grid)
    rows = run_scenario(scan)
    ratios = np.array([r.validity_ratio for r in rows])
    errs = np.array([r.l2_density_error for r in rows])
    slope, intercept = np.polyfit(np.log(ratios), np.log(errs), 1)
    return ScanResult(float(slope), float(intercept), tuple(ratios), tuple(errs))


def transition_zone_table(masses, sigma, fs, units=None):
    """Rows ``(m, sigma, f, t_i, x_i, action_ratio)`` with ``t_i = m f^2 sigma^2/hbar`` and ``x_i = f sigma``."""
    hbar = (units or Units()).hbar
    rows = []
    for m in masses:
        u = Units(hbar, m)
        for f in fs:
            t_i, x_i = zone_start(sigma, f, u)
            rows.append(ZoneRow(float(m), float(sigma), float(f), t_i, x_i, f**2 / 2))
    return rows
