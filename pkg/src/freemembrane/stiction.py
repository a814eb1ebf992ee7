"""Stuck states under dielectric charging, the external unstick voltage and
restoring-force comparisons between beam archetypes.

Charging is represented by a voltage offset on the internal electrodes; it
acts even when the applied internal voltage is zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
import scipy.optimize as so

from .beam import DeflectionField, _solve, assemble, pressure_load, solve_constrained
from .device import EXTERNAL, INTERNAL, ContactSpec, DeviceSpec, ValidatedSpec, build_mesh, electrode_mask
from .electrostatic import ActuationState
from .errors import NoContact, NoConvergence, NoUnstickBelowVmax
from .solver import CoupledModel, EquilibriumResult, SolverSettings, find_pullin, make_model

log = logging.getLogger(__name__)

ArchetypeKind = Literal["cantilever", "clamped-clamped", "free-membrane", "free-membrane-with-external-hold"]
ARCHETYPES = ("cantilever", "clamped-clamped", "free-membrane", "free-membrane-with-external-hold")


@dataclass(frozen=True)
class AdhesionModel:
    """Pull-off force (N) that each adhered ohmic bump can hold in tension."""

    force: float = 0.0

    def __post_init__(self):
        if not self.force >= 0:
            raise ValueError(f"adhesion force must be >= 0, got {self.force}")


@dataclass(frozen=True, eq=False)
class StuckState:
    equilibrium: EquilibriumResult
    margins: dict  # contact node -> holding margin (N)
    v_charge: float
    adhesion: AdhesionModel = field(default_factory=AdhesionModel)

    stuck = True

    @property
    def contact_nodes(self) -> frozenset:
        return self.equilibrium.contact_nodes


@dataclass(frozen=True, eq=False)
class NotStuck:
    equilibrium: EquilibriumResult
    v_charge: float

    stuck = False


# Newton budget multiplier for solves that slide across a snap-through
_SNAP_ITERS = 5

def _model(device, settings, model):
    return model if model is not None else make_model(device, settings)


def _sticky(model: CoupledModel, adhesion: AdhesionModel) -> dict:
    if adhesion.force > 0:
        return {"adhesion": adhesion.force, "sticky": model.mesh.contact_nodes}
    return {}


def holding_margins(res: EquilibriumResult, adhesion: AdhesionModel = AdhesionModel()) -> dict:
    """Per contact node: compressive contact force plus unused adhesion (N).

    A node held in tension keeps ``adhesion - tension``; a non-negative margin
    means the contact can stay closed.
    """
    out = {}
    for n, f in res.contact_forces.items():
        out[n] = f + (adhesion.force if n in res.stop_contacts else 0.0)
    for n, t in res.adhesive_forces.items():
        out[n] = adhesion.force - t
    return out


def stuck_state(device, v_charge_internal: float, adhesion: AdhesionModel = AdhesionModel(),
                settings: SolverSettings = SolverSettings(), model: CoupledModel | None = None
                ) -> StuckState | NotStuck:
    """Equilibrium at zero applied voltage with the charge offset active, started
    from a configuration resting on the internal electrodes."""
    model = _model(device, settings, model)
    state = ActuationState(v_charge_internal=v_charge_internal)
    kw = _sticky(model, adhesion)
    res = model.solve(state, model.contacted_guess(INTERNAL), **kw)
    if not res.converged:
        log.info("contacted start did not converge at %s V charge; retrying from flat", v_charge_internal)
        res = model.solve(state, None, **kw)
    if not res.converged:
        raise NoConvergence("no equilibrium for the charged state", voltage=v_charge_internal)
    if not res.has_contact:
        return NotStuck(res, v_charge_internal)
    margins = holding_margins(res, adhesion)
    if min(margins.values()) < 0:
        return NotStuck(res, v_charge_internal)
    return StuckState(res, margins, v_charge_internal, adhesion)


def _internal_contacts(model: CoupledModel, res: EquilibriumResult) -> set:
    ext = electrode_mask(model.mesh, [EXTERNAL])
    return {n for n in res.contact_nodes if not ext[n]}


def unstick_voltage(device, stuck: StuckState, v_ext_max: float = 20.0,
                    settings: SolverSettings = SolverSettings(), model: CoupledModel | None = None) -> float:
    """Smallest external voltage that frees every internal contact.

    Ascending scan of ``v_external`` warm-started along the stuck branch, then
    bisection. Contacts on the external electrodes are allowed (they provide
    the lever). Returns 0 when the state releases without actuation.
    """
    model = _model(device, settings, model)
    settings = model.settings
    base = stuck.equilibrium.state
    kw = _sticky(model, stuck.adhesion)

    def solve(v, start):
        state = base.with_voltage(EXTERNAL, v)
        r = model.solve(state, start, **kw)
        # a release is a snap: the slide to the far state needs a longer budget,
        # and it is sometimes easier to reach from other starts
        for alt in (start, None, model.contacted_guess(EXTERNAL)):
            if r.converged:
                break
            r = model.solve(state, alt, max_iters=_SNAP_ITERS * settings.max_newton_iters, **kw)
        if not r.converged:
            raise NoConvergence(f"no equilibrium at v_external = {v} V", voltage=v)
        return r

    def hold(r):
        nodes = _internal_contacts(model, r)
        return sum(r.contact_forces.get(n, 0.0) for n in nodes), bool(nodes)

    prev = solve(0.0, stuck.equilibrium.deflection)
    if not hold(prev)[1]:
        return 0.0
    best = -hold(prev)[0]
    n_steps = int(np.ceil(v_ext_max / settings.v_step - 1e-9))
    v_prev = 0.0
    for k in range(1, n_steps + 1):
        v = min(k * settings.v_step, v_ext_max)
        r = solve(v, prev.deflection)
        force, held = hold(r)
        if not held:
            lo, hi = v_prev, v
            lo_res = prev
            while hi - lo > settings.bisect_tol:
                mid = 0.5 * (lo + hi)
                rm = solve(mid, lo_res.deflection)
                if hold(rm)[1]:
                    lo, lo_res = mid, rm
                else:
                    hi = mid
            return 0.5 * (lo + hi)
        best = max(best, -force)
        prev, v_prev = r, v
    raise NoUnstickBelowVmax(f"still stuck at {v_ext_max} V on the external electrodes",
                             v_ext_max=v_ext_max, max_margin=best)


def restoring_force(device, deflection_at_contact: DeflectionField, settings: SolverSettings = SolverSettings(),
                    model: CoupledModel | None = None, tol: float = 1e-3) -> dict:
    """Upward elastic force (N) at each contact node with every voltage off.

    Contact nodes (those within ``tol * gap`` of their contact surface) are held
    at their current deflection; the rest of the membrane relaxes.
    """
    model = _model(device, settings, model)
    u = deflection_at_contact.u
    pen = model.penetration(u)
    nodes = np.flatnonzero(pen >= -tol * model.gap)
    if len(nodes) == 0:
        raise NoContact("deflection does not touch any contact surface")
    return _held_reactions(model.K, model.pins, 2 * nodes, u[2 * nodes])


def _held_reactions(K, supports, held_dofs, held_values) -> dict:
    n = K.shape[0]
    fixed = np.union1d(supports, held_dofs)
    free = np.setdiff1d(np.arange(n), fixed)
    u = np.zeros(n)
    u[held_dofs] = held_values
    Kc = K.tocsr()
    rhs = -(Kc[free][:, fixed] @ u[fixed])
    u[free] = _solve(Kc[free][:, free], rhs)
    r = Kc @ u
    return {int(d // 2): float(-r[d]) for d in held_dofs}


# ---------------------------------------------------------------------------
# comparison beam archetypes for the minimum contact pressure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BeamArchetype:
    """A support condition applied to the geometry of ``device``.

    The cantilever is clamped at ``x = 0``, the clamped-clamped beam at both
    ends; the membrane kinds rest on the device pillars and take pressure on the
    internal span only.
    """

    kind: ArchetypeKind
    device: DeviceSpec

    def __post_init__(self):
        if self.kind not in ARCHETYPES:
            raise ValueError(f"unknown archetype {self.kind!r}")

    @property
    def is_membrane(self) -> bool:
        return self.kind.startswith("free-membrane")

    def spec(self, gap: float | None = None) -> DeviceSpec:
        dev = self.device.spec if isinstance(self.device, ValidatedSpec) else self.device
        # the comparison concerns the membrane itself: no bump stops
        dev = replace(dev, contacts=ContactSpec())
        return dev if gap is None else replace(dev, gap=gap)

    def supports(self, mesh) -> list[int]:
        if self.kind == "cantilever":
            return [0, 1]
        if self.kind == "clamped-clamped":
            last = 2 * (mesh.n_nodes - 1)
            return [0, 1, last, last + 1]
        return [2 * n for n in mesh.pillar_nodes]

    def loaded(self, mesh) -> np.ndarray:
        """Element mask receiving the pressure."""
        if not self.is_membrane:
            return np.ones(mesh.n_elements, dtype=bool)
        p1, p2 = mesh.device.geometry.pillar_positions
        m = mesh.midpoints
        return (m > p1) & (m < p2)

    def watched(self, mesh) -> np.ndarray:
        """Node mask where reaching the gap counts as contact."""
        if not self.is_membrane:
            return np.ones(mesh.n_nodes, dtype=bool)
        p1, p2 = mesh.device.geometry.pillar_positions
        return (mesh.nodes >= p1) & (mesh.nodes <= p2)


def unit_pressure_deflection(archetype: BeamArchetype, settings: SolverSettings = SolverSettings()):
    """Linear deflection under 1 Pa (downward) on the loaded part."""
    mesh = build_mesh(archetype.spec(), settings.n_elements)
    K = assemble(mesh)
    f = pressure_load(mesh, 1.0, archetype.loaded(mesh))
    return solve_constrained(K, archetype.supports(mesh), f, mesh=mesh).deflection


def min_pressure_to_contact(archetype: BeamArchetype, gap: float | None = None,
                            settings: SolverSettings = SolverSettings(), v_max: float = 40.0) -> float:
    """Smallest uniform pressure (Pa) that brings any watched point down by ``gap``."""
    spec = archetype.spec(gap)
    gap = spec.gap
    if not gap > 0:
        raise ValueError("gap must be > 0")
    if archetype.kind != "free-membrane-with-external-hold":
        d = unit_pressure_deflection(replace(archetype, device=spec), settings)
        down = float(np.max(-d.w[archetype.watched(d.mesh)]))
        return gap / down
    return _held_min_pressure(archetype, spec, settings, v_max)


def _held_min_pressure(archetype, spec, settings, v_max) -> float:
    model = make_model(spec, settings)
    mesh = model.mesh
    pi = find_pullin(spec, EXTERNAL, v_max, settings, model=model)
    v_hold = 1.1 * pi.v_pullin
    state = ActuationState(v_external=v_hold)
    held = model.solve(state, pi.collapsed.deflection)
    if not held.converged:
        raise NoConvergence("no held equilibrium under external actuation", voltage=v_hold)
    watch = archetype.watched(mesh)
    unit = pressure_load(mesh, 1.0, archetype.loaded(mesh))

    def solve(p, start):
        r = model.solve(state, start, f_ext=p * unit)
        if not r.converged:
            r = model.solve(state, start, f_ext=p * unit, max_iters=_SNAP_ITERS * settings.max_newton_iters)
        return r

    def excess(r):
        return float(np.max(-r.deflection.w[watch])) - spec.gap

    # march the pressure up along the held branch (the free-membrane value is a
    # lower bound), halving the increment whenever a warm start fails
    step = min_pressure_to_contact(replace(archetype, kind="free-membrane"), spec.gap, settings)
    lo, lo_res = 0.0, held
    while True:
        hi = lo + step
        r = solve(hi, lo_res.deflection)
        if not r.converged:
            step *= 0.5
            if step < 1e-6 * max(lo, 1.0):
                raise NoConvergence(f"no equilibrium near pressure {hi} Pa", pressure=hi)
            continue
        if excess(r) >= 0:
            break
        lo, lo_res = hi, r
        step *= 1.5

    hi_res = r

    def f(p):
        # past the fold the open branch is gone: follow the contacted one instead
        r = solve(p, lo_res.deflection)
        if not r.converged:
            r = solve(p, hi_res.deflection)
        if not r.converged:
            raise NoConvergence(f"no equilibrium at pressure {p} Pa", pressure=p)
        return excess(r)

    return float(so.brentq(f, lo, hi, xtol=1e-9 * hi, rtol=1e-10))


def archetype_restoring_force(archetype: BeamArchetype, depth: float | None = None,
                              settings: SolverSettings = SolverSettings()) -> float:
    """Upward elastic force (N) when the archetype is pushed down by ``depth``
    (default: the gap) at its most compliant point: the cantilever tip, the
    center otherwise."""
    spec = archetype.spec()
    depth = spec.gap if depth is None else depth
    mesh = build_mesh(spec, settings.n_elements)
    # the cantilever is clamped at x = 0, so its free end is the last node
    node = mesh.n_nodes - 1 if archetype.kind == "cantilever" else mesh.center_node
    forces = _held_reactions(assemble(mesh), archetype.supports(mesh), np.array([2 * node]), np.array([-depth]))
    return forces[node]
