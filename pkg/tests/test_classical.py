import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcimaging import (
    PhaseSpacePoint,
    PotentialSpec,
    Units,
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
from qcimaging.classical import action_gradient_fd
from qcimaging.exceptions import (
    CausticSingular,
    MultipleRoots,
    NearCaustic,
    StepTooLarge,
    ValidationError,
)

FREE = PotentialSpec.free()
LINEAR = PotentialSpec.linear(0.1)
HARMONIC = PotentialSpec.harmonic(1.0)
DOUBLE_WELL = PotentialSpec.polynomial([0, 0, -0.5, 0, 1 / 16])


class TestClosedForms:
    def test_free(self):
        tr = integrate(PhaseSpacePoint(0.0, 2.0, 0.0), 5.0, FREE)
        assert (tr.end.x, tr.end.p, tr.action_S) == pytest.approx((10.0, 2.0, 10.0), abs=1e-12)
        assert tr.M12 == pytest.approx(5.0, abs=1e-12)

    def test_linear_action_exact(self):
        # x = t^2/2 under unit force; S = int (p^2/2 + x) dt = t^3/3 + t^3/6 over [0, 2]
        tr = integrate(PhaseSpacePoint(0.0, 0.0, 0.0), 2.0, PotentialSpec.linear(1.0))
        assert tr.end.x == pytest.approx(2.0, abs=1e-12)
        assert tr.end.p == pytest.approx(2.0, abs=1e-12)
        assert tr.action_S == pytest.approx(8.0 / 3.0, abs=1e-12)

    def test_harmonic(self):
        t = 1.1
        tr = integrate(PhaseSpacePoint(0.5, -0.2, 0.0), t, HARMONIC)
        assert tr.end.x == pytest.approx(0.5 * math.cos(t) - 0.2 * math.sin(t), abs=1e-9)
        np.testing.assert_allclose(
            tr.M, [[math.cos(t), math.sin(t)], [-math.sin(t), math.cos(t)]], atol=1e-9
        )

    def test_harmonic_action(self):
        # S = (m w / 2 sin wt) ((x_i^2 + x_f^2) cos wt - 2 x_i x_f)
        x_i, x_f, t = 0.3, -0.7, 1.2
        sol = shoot(x_i, 0.0, x_f, t, HARMONIC)
        ref = ((x_i**2 + x_f**2) * math.cos(t) - 2 * x_i * x_f) / (2 * math.sin(t))
        assert sol.trajectory.action_S == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("V", [FREE, LINEAR, HARMONIC, DOUBLE_WELL], ids=str)
@given(x0=st.floats(-2, 2), p0=st.floats(-1.5, 1.5), t=st.floats(0.1, 2.5))
@settings(max_examples=15, deadline=None)
def test_symplectic_and_energy(V, x0, p0, t):
    tr = integrate(PhaseSpacePoint(x0, p0, 0.0), t, V)
    assert tr.det_M == pytest.approx(1.0, abs=1e-9)
    assert tr.energy_drift <= 1e-8


@pytest.mark.parametrize("V", [FREE, LINEAR, HARMONIC, DOUBLE_WELL], ids=str)
@given(x0=st.floats(-1.5, 1.5), p0=st.floats(-1, 1), t=st.floats(0.2, 1.3))
@settings(max_examples=10, deadline=None)
def test_shoot_round_trip(V, x0, p0, t):
    tr = integrate(PhaseSpacePoint(x0, p0, 0.0), t, V)
    sol = shoot(x0, 0.0, tr.end.x, t, V)
    assert sol.p_i == pytest.approx(p0, abs=1e-9)


def test_monodromy_matches_finite_differences():
    h = 1e-6
    base = integrate_batch([0.4, 0.4 + h, 0.4 - h, 0.4, 0.4], [0.2, 0.2, 0.2, 0.2 + h, 0.2 - h], 0.0, 2.0, DOUBLE_WELL)
    fd = np.array(
        [[(base["x_f"][1] - base["x_f"][2]) / (2 * h), (base["x_f"][3] - base["x_f"][4]) / (2 * h)],
         [(base["p_f"][1] - base["p_f"][2]) / (2 * h), (base["p_f"][3] - base["p_f"][4]) / (2 * h)]]
    )
    M = np.array([[base["M11"][0], base["M12"][0]], [base["M21"][0], base["M22"][0]]])
    np.testing.assert_allclose(M, fd, atol=1e-6)


def test_action_generates_momenta():
    # dS/dx_f = p_f and dS/dx_i = -p_i
    sol = shoot(0.2, 0.0, 1.0, 1.5, DOUBLE_WELL)
    gf, gi = action_gradient_fd(0.2, 0.0, 1.0, 1.5, DOUBLE_WELL)
    assert gf == pytest.approx(sol.trajectory.end.p, abs=1e-6)
    assert gi == pytest.approx(-sol.p_i, abs=1e-6)


def test_caustic_at_half_period():
    with pytest.raises(NearCaustic, match="caustic"):
        shoot(0.0, 0.0, 1.0, math.pi, HARMONIC)
    tr = integrate(PhaseSpacePoint(0.0, 1.0, 0.0), math.pi, HARMONIC)
    assert tr.near_caustic
    with pytest.raises(CausticSingular):
        van_vleck_amp(tr)


def test_double_well_roots_match_brute_force():
    x_i, t, target = 0.3, 6.0, 1.0
    p = np.linspace(-2.5, 2.5, 2001)
    xf = integrate_batch(x_i, p, 0.0, t, DOUBLE_WELL)["x_f"]
    crossings = p[:-1][np.diff(np.sign(xf - target)) != 0]
    roots = multi_start_scan(x_i, 0.0, target, t, DOUBLE_WELL, (-2.5, 2.5), 64)
    assert len(roots) >= 2
    assert len(roots) == len(crossings)
    np.testing.assert_allclose(roots, crossings, atol=p[1] - p[0])
    with pytest.raises(MultipleRoots) as info:
        shoot(x_i, 0.0, target, t, DOUBLE_WELL, certify=True, p_range=(-2.5, 2.5), n_starts=64)
    assert len(info.value.roots) == len(roots)


def test_shoot_batch_matches_scalar():
    targets = np.array([-1.0, 0.5, 2.0])
    res = shoot_batch(0.0, 0.0, targets, 1.5, LINEAR)
    for x, p in zip(targets, res["p_i"]):
        assert shoot(0.0, 0.0, x, 1.5, LINEAR).p_i == pytest.approx(p, abs=1e-12)


def test_mixed_action_derivative_is_launch_offset():
    h = 1e-5
    dS = (mixed_action(1.0, 1.0, 0.3 + h, 0.0, 0.0, HARMONIC) - mixed_action(1.0, 1.0, 0.3 - h, 0.0, 0.0, HARMONIC)) / (2 * h)
    tr = launch_point(1.0, 1.0, 0.3, 0.0, HARMONIC)
    assert dS == pytest.approx(tr.start.x, abs=1e-7)


def test_mixed_caustic_refused():
    # dx_f/dx_i = cos(wt) vanishes at a quarter period
    with pytest.raises(CausticSingular):
        launch_point(1.0, math.pi / 2, 0.5, 0.0, HARMONIC)


@pytest.mark.parametrize("V", [FREE, LINEAR, HARMONIC, DOUBLE_WELL], ids=str)
def test_determinant_identity(V):
    assert check_determinant_identity(1.0, 1.0, 0.0, 0.0, V) < 1e-5


def test_energy_guard():
    with pytest.raises(StepTooLarge):
        integrate(PhaseSpacePoint(1.0, 0.0, 0.0), 5.0, DOUBLE_WELL, dt=0.05)


def test_validation():
    with pytest.raises(ValidationError):
        integrate(PhaseSpacePoint(0.0, 1.0, 1.0), 0.5, FREE)
    with pytest.raises(ValidationError):
        multi_start_scan(0, 0, 1, 1, FREE, (-1, 1), n_starts=4)
    with pytest.raises(ValidationError):
        shoot(0, 0, 1, 1, FREE, certify=True)


def test_mass_scaling():
    tr = integrate(PhaseSpacePoint(0.0, 2.0, 0.0), 5.0, FREE, units=Units(mass=4.0))
    assert tr.end.x == pytest.approx(2.5) and tr.M12 == pytest.approx(1.25)
