"""Exact quantum propagation on a periodic grid.

Two independent routes are provided.  :func:`propagate` is a Strang
split-operator integrator that works for any closed-form potential;
:func:`analytic_propagate` applies the closed-form propagators of the free
particle, the uniform field and the harmonic oscillator.  The two agree to
the splitting order and serve as oracles for each other.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import _validation as v
from .core import Units, WaveFunction, from_momentum, potential_eval, to_momentum
from .exceptions import AliasRisk, BoxEscape, UnsupportedPotential, ValidationError

__all__ = [
    "PropagatorConfig",
    "propagate",
    "analytic_free_gaussian",
    "analytic_propagate",
    "boundary_probability",
    "ehrenfest_series",
]

BOX_ESCAPE_THRESHOLD = 1e-10
ALIAS_PHASE_LIMIT = math.pi / 4


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float
    n_steps: int
    order: str = "strang2"

    def __post_init__(self):
        object.__setattr__(self, "dt", v.check_positive(self.dt, "dt"))
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ValidationError("n_steps must be a non-negative integer")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        if self.order != "strang2":
            raise ValidationError("only 'strang2' splitting is supported")

    @classmethod
    def for_duration(cls, duration, dt_max):
        """Smallest number of equal steps of size at most ``dt_max`` covering ``duration``."""
        duration = v.check_positive(duration, "duration")
        n = max(1, math.ceil(duration / dt_max - 1e-12))
        return cls(duration / n, n)

    @property
    def duration(self):
        return self.dt * self.n_steps


def _fft_momenta(grid, hbar):
    return 2 * math.pi * hbar * np.fft.fftfreq(grid.n, d=grid.dx)


def check_alias(grid, V, dt, units):
    """Raise :class:`AliasRisk` if one step moves phase too fast between neighbouring cells.

    Kinetic: the phase increment between adjacent momentum cells,
    ``p_max dp dt / (m hbar)``.  Potential: the increment between adjacent
    spatial cells, ``max|V'| dx dt / hbar``.  Both must stay below pi/4.
    """
    pgrid = grid.momentum_grid(units)
    p_max = abs(pgrid.p_min)
    kin = p_max * pgrid.dp * dt / (units.mass * units.hbar)
    _, dV, _ = potential_eval(V, grid.x, units)
    pot = float(np.max(np.abs(dV))) * grid.dx * dt / units.hbar
    if kin >= ALIAS_PHASE_LIMIT or pot >= ALIAS_PHASE_LIMIT:
        raise AliasRisk(
            f"time step {dt:g} too large for the grid: kinetic phase/cell {kin:.3g}, "
            f"potential phase/cell {pot:.3g} (limit pi/4)"
        )


def boundary_probability(psi, fraction=1 / 32):
    """Probability in the outer ``fraction`` of the box on each side."""
    k = max(1, int(psi.grid.n * fraction))
    rho = psi.density
    return float((rho[:k].sum() + rho[-k:].sum()) * psi.grid.dx)


def _check_box(psi, threshold=BOX_ESCAPE_THRESHOLD):
    edge = boundary_probability(psi)
    if edge > threshold:
        raise BoxEscape(f"boundary probability {edge:.3g} exceeds {threshold:g} at t={psi.t:g}")


def propagate(psi, V, cfg, check_box=True):
    """Strang split-operator propagation ``exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2)``.

    Returns the state at ``psi.t + cfg.n_steps * cfg.dt``.

    Raises
    ------
    AliasRisk
        If the step is too large for the grid (see :func:`check_alias`).
    BoxEscape
        If more than 1e-10 probability reaches the box edges.
    """
    if cfg.n_steps == 0:
        return psi.with_amps(psi.amps)
    units, grid = psi.units, psi.grid
    check_alias(grid, V, cfg.dt, units)
    hbar, m, dt = units.hbar, units.mass, cfg.dt
    pot, _, _ = potential_eval(V, grid.x, units)
    half_kick = np.exp(-0.5j * pot * dt / hbar)
    full_kick = half_kick * half_kick
    p = _fft_momenta(grid, hbar)
    drift = np.exp(-1j * p**2 * dt / (2 * m * hbar))

    a = psi.amps * half_kick
    for _ in range(cfg.n_steps - 1):
        a = np.fft.ifft(np.fft.fft(a) * drift) * full_kick
    a = np.fft.ifft(np.fft.fft(a) * drift) * half_kick

    out = WaveFunction(grid, a, psi.t + cfg.duration, units)
    if check_box:
        _check_box(out)
    return out


def ehrenfest_series(psi, V, cfg, every=1):
    """Expectation values along a split-operator run.

    Returns a dict of arrays ``t, x, p, force`` where ``force = -<V'(x)>``,
    sampled every ``every`` steps (including the initial state).
    """
    units, grid = psi.units, psi.grid
    _, dV, _ = potential_eval(V, grid.x, units)
    rows = []

    def sample(state):
        phi = to_momentum(state)
        rho = state.density
        rows.append(
            (
                state.t,
                float(np.sum(grid.x * rho) * grid.dx),
                phi.expectation_p(),
                float(-np.sum(dV * rho) * grid.dx),
            )
        )

    state = psi
    sample(state)
    step = PropagatorConfig(cfg.dt, every)
    for _ in range(cfg.n_steps // every):
        state = propagate(state, V, step)
        sample(state)
    t, x, p, f = (np.array(c) for c in zip(*rows))
    return {"t": t, "x": x, "p": p, "force": f}


def analytic_free_gaussian(sigma, x, t, units=None):
    """Freely spread Gaussian of initial width ``sigma`` centred at the origin at rest."""
    units = units or Units()
    sigma = v.check_positive(sigma, "sigma")
    if t < 0:
        raise ValidationError("t must be non-negative")
    tau = units.hbar * t / units.mass
    x = np.asarray(x, dtype=float)
    s2 = sigma**2
    return (
        (s2 / math.pi) ** 0.25
        * (s2 + 1j * tau) ** -0.5
        * np.exp(-0.5 * x**2 * (s2 - 1j * tau) / (s2**2 + tau**2))
    )


def analytic_propagate(psi, V, t):
    """Apply the closed-form propagator of a free, linear or harmonic potential for time ``t``.

    The uniform-field kernel is composed as a momentum-space phase followed by
    the boost ``exp(i F t x / hbar)``; the harmonic kernel as
    kick-drift-kick factors on sub-intervals of at most a quarter of pi/omega,
    which is exact including the global phase.
    """
    if not V.is_reference:
        raise UnsupportedPotential(f"no closed-form propagator for {V}")
    t = v.check_finite(t, "t")
    units, grid = psi.units, psi.grid
    hbar, m = units.hbar, units.mass
    if t == 0:
        return psi.with_amps(psi.amps)

    if V.kind == "free":
        phi = to_momentum(psi)
        out = phi.amps * np.exp(-1j * phi.p**2 * t / (2 * m * hbar))
        return from_momentum(type(phi)(phi.grid, out, psi.t + t, units))

    if V.kind == "linear":
        F = V.force
        phi = to_momentum(psi)
        p = phi.p
        phase = p**2 * t / (2 * m) + p * F * t**2 / (2 * m) + F**2 * t**3 / (6 * m)
        out = from_momentum(type(phi)(phi.grid, phi.amps * np.exp(-1j * phase / hbar), psi.t + t, units))
        return out.with_amps(out.amps * np.exp(1j * F * t * grid.x / hbar))

    w = V.omega
    n_seg = max(1, math.ceil(abs(w * t) / (math.pi / 4)))
    tau = t / n_seg
    kick = np.exp(-1j * math.tan(w * tau / 2) * m * w * grid.x**2 / (2 * hbar))
    p = _fft_momenta(grid, hbar)
    drift = np.exp(-1j * p**2 * (math.sin(w * tau) / w) / (2 * m * hbar))
    a = psi.amps
    for _ in range(n_seg):
        a = np.fft.ifft(np.fft.fft(a * kick) * drift) * kick
    return WaveFunction(grid, a, psi.t + t, units)
