"""Electromechanical simulation of a free-free membrane RF-MEMS ohmic switch.

The membrane is an Euler-Bernoulli beam resting on two pillars; internal and
external electrodes pull it down or lever it up. ``solver`` finds pull-in and
pull-out voltages, ``stiction`` the charged stuck state and the unstick
voltage, ``rf`` the lumped S-parameter model.
"""

__version__ = "0.1.0"

from .beam import DeflectionField, StaticSolution, assemble, solve_constrained, uniform_load
from .device import (
    EXTERNAL,
    INTERNAL,
    BeamGeometry,
    ContactSpec,
    DeviceSpec,
    ElectrodeZone,
    MaterialProps,
    Mesh,
    ValidatedSpec,
    build_mesh,
    default_device,
    stiction_device,
    switch_device,
    validate_spec,
    with_ratio,
)
from .electrostatic import ActuationState, ElectrodeMap, build_traction, effective_gap, traction, traction_jacobian
from .errors import FreeMembraneError
from .rf import (
    ContactLaw,
    SwitchCircuit,
    TwoPortResponse,
    contact_resistance,
    export_touchstone,
    fit_lumped,
    read_touchstone,
    shunt_sparams,
)
from .solver import (
    CoupledModel,
    EquilibriumResult,
    LumpedActuator,
    PullInResult,
    PullOutResult,
    SolverSettings,
    equilibrium,
    find_pullin,
    find_pullout,
    make_model,
    sweep_ratio,
    trace_cv_curve,
)
from .stiction import (
    AdhesionModel,
    BeamArchetype,
    NotStuck,
    StuckState,
    min_pressure_to_contact,
    restoring_force,
    stuck_state,
    unstick_voltage,
)
from .tables import ResultTable, emit_csv, read_csv
