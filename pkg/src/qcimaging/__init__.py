"""Numerical laboratory for the quantum imaging theorem.

At large times the position-space wavefunction of a released packet becomes
proportional to its initial momentum-space wavefunction, evaluated at the
momentum of the classical trajectory that reaches the detector.  This package
provides an exact split-operator reference, a classical trajectory engine, the
imaging construction itself and a scenario harness that compares them.
"""

from .classical import (
    ShootingResult,
    TrajectoryResult,
    check_determinant_identity,
    integrate,
    integrate_batch,
    launch_point,
    mixed_action,
    multi_start_scan,
    shoot,
    shoot_batch,
    van_vleck_amp,
)
from .core import (
    MomentumGrid,
    MomentumWaveFunction,
    PhaseSpacePoint,
    PotentialSpec,
    SpatialGrid,
    Units,
    WaveFunction,
    from_momentum,
    gaussian_packet,
    potential_eval,
    to_momentum,
)
from .estimators import ImagingTheoremEstimator, SplitOperatorPropagator
from .exceptions import *  # noqa: F401,F403
from .harness import (
    BUILTINS,
    MetricRow,
    Scenario,
    builtin,
    convergence_scan,
    run_scenario,
    scenario_metadata,
    transition_zone_table,
)
from .imaging import (
    ItSample,
    ValidityReport,
    density_ratio_check,
    free_it,
    it_wavefunction,
    it_wavefunction_batch,
    probability_transport,
    transport_invariance,
    validity_report,
    zone_start,
)
from .qprop import (
    PropagatorConfig,
    analytic_free_gaussian,
    analytic_propagate,
    check_alias,
    ehrenfest_series,
    propagate,
)

__version__ = "0.1.0"
