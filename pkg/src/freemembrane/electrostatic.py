"""Parallel-plate electrostatic traction on the electrode zones.

Tractions are forces per unit length (N/m), negative when pointing toward the
substrate. The air gap is measured from the membrane to the dielectric face;
the dielectric adds ``t_d / eps_r`` in series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import epsilon_0

from .beam import DeflectionField, element_dofs
from .device import EXTERNAL, INTERNAL, Mesh
from .errors import InvalidPermittivity, PenetrationWithoutContact, ZeroGap

EPS0 = epsilon_0


@dataclass(frozen=True)
class ActuationState:
    v_internal: float = 0.0
    v_external: float = 0.0
    v_charge_internal: float = 0.0
    v_charge_external: float = 0.0

    def __post_init__(self):
        for name in ("v_internal", "v_external", "v_charge_internal", "v_charge_external"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def effective(self, kind: str) -> float:
        """Voltage seen by a zone; the charge offset adds before squaring."""
        if kind == INTERNAL:
            return self.v_internal + self.v_charge_internal
        if kind == EXTERNAL:
            return self.v_external + self.v_charge_external
        raise ValueError(f"unknown electrode kind {kind!r}")

    def with_voltage(self, kind: str, v: float) -> "ActuationState":
        if kind == INTERNAL:
            return ActuationState(v, self.v_external, self.v_charge_internal, self.v_charge_external)
        if kind == EXTERNAL:
            return ActuationState(self.v_internal, v, self.v_charge_internal, self.v_charge_external)
        raise ValueError(f"unknown electrode kind {kind!r}")


def effective_gap(g_mech: float, t_d: float, eps_r: float):
    """Electrically equivalent air gap of an air gap in series with a dielectric."""
    if np.any(np.asarray(eps_r) < 1):
        raise InvalidPermittivity(f"relative permittivity must be >= 1, got {eps_r}")
    if np.any(np.asarray(g_mech) < 0) or np.any(np.asarray(t_d) < 0):
        raise ValueError("gap and dielectric thickness must be non-negative")
    return g_mech + t_d / eps_r


def traction(v_eff, g_e, width, fringing: bool = False):
    """Signed traction ``-eps0 * w * V^2 / (2 g_e^2)`` (N/m).

    ``fringing`` applies the ``1 + 0.65 g_e / w`` first-order edge correction.
    """
    g_e = np.asarray(g_e, dtype=float)
    if np.any(g_e <= 0):
        raise ZeroGap("effective gap must be > 0")
    f = -EPS0 * np.asarray(width) * np.square(v_eff) / (2.0 * g_e ** 2)
    if fringing:
        f = f * (1.0 + 0.65 * g_e / np.asarray(width))
    return f if f.ndim else float(f)


def traction_jacobian(v_eff, g_e, width, fringing: bool = False):
    """Derivative of ``|traction|`` with respect to deflection toward the electrode."""
    g_e = np.asarray(g_e, dtype=float)
    if np.any(g_e <= 0):
        raise ZeroGap("effective gap must be > 0")
    mag = EPS0 * np.asarray(width) * np.square(v_eff) / (2.0 * g_e ** 2)
    d = 2.0 * mag / g_e
    if fringing:
        w = np.asarray(width)
        # d/dg_down of mag*(1 + 0.65 g/w), with dg = -dw_down
        d = d * (1.0 + 0.65 * g_e / w) - mag * 0.65 / w
    return d if d.ndim else float(d)


@dataclass(frozen=True, eq=False)
class TractionProfile:
    """Per-element traction (N/m) and ``d|q|/dw_down`` (N/m^2)."""

    q: np.ndarray
    dq: np.ndarray

    @property
    def pressure(self) -> np.ndarray:
        return self.q


class ElectrodeMap:
    """Per-element constants needed to evaluate tractions quickly."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        zones = mesh.device.electrodes
        ez = mesh.elem_zone
        self.active = ez >= 0
        self.kind = np.array([zones[k].kind if k >= 0 else "" for k in ez])
        self.t_over_eps = np.array([
            zones[k].dielectric_thickness / zones[k].dielectric_rel_permittivity if k >= 0 else 0.0
            for k in ez
        ])
        self.gap0 = mesh.device.gap
        self.dofs = element_dofs(mesh)

    def midpoint_w(self, u: np.ndarray) -> np.ndarray:
        le = self.mesh.lengths
        ue = u[self.dofs]
        return 0.5 * (ue[:, 0] + ue[:, 2]) + 0.125 * le * (ue[:, 1] - ue[:, 3])

    def voltages(self, state: ActuationState) -> np.ndarray:
        v = np.zeros(len(self.kind))
        v[self.kind == INTERNAL] = state.effective(INTERNAL)
        v[self.kind == EXTERNAL] = state.effective(EXTERNAL)
        return v

    def evaluate(self, state: ActuationState, u: np.ndarray, clamp: bool = True,
                 fringing: bool = False) -> TractionProfile:
        """Traction at element midpoints.

        With ``clamp`` a closed (or penetrated) air gap is held at zero, so the
        traction saturates at its contact value; otherwise penetration raises.
        """
        g_air = self.gap0 + self.midpoint_w(u)
        act = self.active
        if not clamp and np.any(g_air[act] <= 0):
            raise PenetrationWithoutContact("membrane penetrates an electrode without contact handling")
        closed = g_air <= 0
        g_e = np.maximum(g_air, 0.0) + self.t_over_eps
        v = self.voltages(state)
        q = np.zeros(len(v))
        dq = np.zeros(len(v))
        on = act & (v != 0)
        if np.any(on & (g_e <= 0)):
            raise ZeroGap("zero effective gap on an energized electrode without dielectric")
        w = self.mesh.width
        q[on] = traction(v[on], g_e[on], w[on], fringing)
        dq[on] = traction_jacobian(v[on], g_e[on], w[on], fringing)
        dq[closed] = 0.0
        return TractionProfile(q, dq)


    def energy(self, state: ActuationState, u: np.ndarray, fringing: bool = False) -> float:
        """Midpoint-sampled electrostatic co-energy ``-sum C'(g) V^2 le / 2`` (J).

        Beyond closure the energy continues linearly, matching the saturated
        traction used by ``evaluate``.
        """
        v = self.voltages(state)
        on = self.active & (v != 0)
        if not np.any(on):
            return 0.0
        g_air = (self.gap0 + self.midpoint_w(u))[on]
        g_c = np.maximum(g_air, 0.0)
        g_e = g_c + self.t_over_eps[on]
        w = self.mesh.width[on]
        le = self.mesh.lengths[on]
        v2 = v[on] ** 2
        e = -EPS0 * w * v2 / (2.0 * g_e)
        if fringing:
            e = e + 0.325 * EPS0 * v2 * np.log(g_e)
        closed = g_air < 0
        if np.any(closed):
            mag = -traction(v[on][closed], g_e[closed], w[closed], fringing)
            e[closed] += mag * g_air[closed]
        return float(np.sum(e * le))


def build_traction(mesh: Mesh, state: ActuationState, deflection: DeflectionField | None = None,
                   clamp: bool = False) -> TractionProfile:
    """Traction profile for a deflection (flat membrane when omitted)."""
    u = np.zeros(mesh.n_dofs) if deflection is None else deflection.u
    return ElectrodeMap(mesh).evaluate(state, u, clamp=clamp)
