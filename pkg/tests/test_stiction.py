from dataclasses import replace

import numpy as np
import pytest

from freemembrane.beam import DeflectionField
from freemembrane.device import stiction_device, switch_device
from freemembrane.electrostatic import ActuationState
from freemembrane.errors import NoContact, NoUnstickBelowVmax
from freemembrane.solver import SolverSettings, make_model
from freemembrane.stiction import (
    ARCHETYPES,
    AdhesionModel,
    BeamArchetype,
    StuckState,
    archetype_restoring_force,
    holding_margins,
    min_pressure_to_contact,
    restoring_force,
    stuck_state,
    unstick_voltage,
)

FAST = SolverSettings(n_elements=100)


def uniform_device(**kw):
    # uniform width so the cantilever closed form applies exactly
    return switch_device(leg_width=250e-6, bar_width=250e-6, **kw)


def test_cantilever_pressure_closed_form():
    dev = uniform_device(youngs_modulus=78e9)
    p = min_pressure_to_contact(BeamArchetype("cantilever", dev))
    # tip deflection 3 p L^4 / (2 E t^3) equals the gap
    ref = 2.0 / 3.0 * 78e9 * (1e-6) ** 3 * 1e-6 / (360e-6) ** 4
    assert ref == pytest.approx(3.10, abs=0.01)
    assert p == pytest.approx(ref, rel=5e-3)


def test_clamped_clamped_closed_form():
    dev = uniform_device(youngs_modulus=78e9)
    p = min_pressure_to_contact(BeamArchetype("clamped-clamped", dev))
    # midspan deflection p L^4 / (32 E t^3)
    ref = 32 * 78e9 * (1e-6) ** 3 * 1e-6 / (360e-6) ** 4
    assert p == pytest.approx(ref, rel=5e-3)


@pytest.mark.parametrize("kind", ARCHETYPES[:3])
def test_pressure_scales_with_gap(kind):
    arch = BeamArchetype(kind, uniform_device())
    p1 = min_pressure_to_contact(arch, 1e-6, FAST)
    p2 = min_pressure_to_contact(arch, 2e-6, FAST)
    assert p2 == pytest.approx(2 * p1, rel=1e-9)


@pytest.mark.parametrize("kind", ARCHETYPES[:3])
def test_pressure_mesh_invariant(kind):
    arch = BeamArchetype(kind, switch_device())
    a = min_pressure_to_contact(arch, settings=SolverSettings(n_elements=100))
    b = min_pressure_to_contact(arch, settings=SolverSettings(n_elements=400))
    assert a == pytest.approx(b, rel=0.01)


def test_linear_archetype_ordering():
    dev = switch_device()
    p = {k: min_pressure_to_contact(BeamArchetype(k, dev), settings=FAST) for k in ARCHETYPES[:3]}
    assert p["cantilever"] < p["free-membrane"] < p["clamped-clamped"]


def test_restoring_force_linear_in_depth():
    arch = BeamArchetype("clamped-clamped", uniform_device())
    f1 = archetype_restoring_force(arch, 0.5e-6, FAST)
    f2 = archetype_restoring_force(arch, 1e-6, FAST)
    assert f1 > 0
    assert f2 == pytest.approx(2 * f1, rel=1e-9)
    # center point load on a clamped-clamped beam: k = 192 EI / L^3
    ei = 78e9 * 250e-6 * (1e-6) ** 3 / 12
    assert f2 == pytest.approx(192 * ei / (360e-6) ** 3 * 1e-6, rel=5e-3)


def test_unknown_archetype():
    with pytest.raises(ValueError):
        BeamArchetype("floating", switch_device())


def test_restoring_force_requires_contact():
    dev = switch_device()
    m = make_model(dev, FAST)
    flat = DeflectionField(np.zeros(m.mesh.n_dofs), m.mesh)
    with pytest.raises(NoContact):
        restoring_force(dev, flat, FAST, model=m)
    forces = restoring_force(dev, m.contacted_guess("internal", depth=1.0), FAST, model=m)
    assert forces and all(np.isfinite(list(forces.values())))


def test_zero_charge_is_not_stuck():
    dev = switch_device(gap=0.7e-6)
    s = stuck_state(dev, 0.0, settings=FAST)
    assert s.stuck is False
    assert not s.equilibrium.has_contact


def test_adhesion_validation_and_margins():
    with pytest.raises(ValueError):
        AdhesionModel(-1.0)
    dev = switch_device(gap=0.7e-6)
    m = make_model(dev, FAST)
    r = m.solve(ActuationState(v_internal=20.0), m.contacted_guess("internal"))
    margins = holding_margins(r, AdhesionModel(1e-6))
    assert set(margins) >= set(r.contact_forces)
    for n, f in r.contact_forces.items():
        extra = 1e-6 if n in r.stop_contacts else 0.0
        assert margins[n] == pytest.approx(f + extra)


@pytest.fixture(scope="module")
def charged():
    dev = stiction_device()
    return dev, make_model(dev, FAST)


def _unstick(dev, m, v_charge):
    st = stuck_state(dev, v_charge, settings=FAST, model=m)
    return unstick_voltage(dev, st, 40.0, FAST, model=m) if st.stuck else 0.0


@pytest.mark.slow
def test_unstick_nondecreasing_in_charge(charged):
    dev, m = charged
    v = [_unstick(dev, m, c) for c in (1.6, 2.0, 2.4)]
    assert v[0] <= v[1] <= v[2]
    # 2 V exceeds the pull-out voltage, so actuation is needed
    assert v[1] > 0


def test_forced_contact_without_charge_releases_at_zero(charged):
    dev, m = charged
    held = m.solve(ActuationState(v_internal=20.0), m.contacted_guess("internal"))
    assert held.has_contact
    forced = StuckState(replace(held, state=ActuationState()), {}, 0.0, AdhesionModel())
    assert unstick_voltage(dev, forced, 5.0, FAST, model=m) == 0.0


def test_unstick_ceiling_reports_margin(charged):
    dev, m = charged
    st = stuck_state(dev, 2.0, settings=FAST, model=m)
    assert st.stuck
    with pytest.raises(NoUnstickBelowVmax) as err:
        unstick_voltage(dev, st, 1.0, FAST, model=m)
    assert err.value.details["v_ext_max"] == 1.0 and "max_margin" in err.value.details
