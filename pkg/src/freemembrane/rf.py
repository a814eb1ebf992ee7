"""Lumped shunt model of the ohmic switch and Touchstone I/O.

The switch is a shunt admittance across a matched line: a contact resistance
(plus optional inductance) when down, the membrane-to-line capacitance when up.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import EmptyGrid, IoFailure, NonAscendingGrid, NonPositiveForce, UnreachableTarget

SwitchState = Literal["up", "down"]


@dataclass(frozen=True)
class ContactLaw:
    """Power law ``R = r_ref * (F / f_ref) ** exponent``."""

    r_ref: float = 1.0
    f_ref: float = 100e-6
    exponent: float = -1.0 / 3.0

    def __post_init__(self):
        if not (self.r_ref > 0 and self.f_ref > 0):
            raise ValueError("r_ref and f_ref must be > 0")


def contact_resistance(force: float, law: ContactLaw = ContactLaw()) -> float:
    if not force > 0:
        raise NonPositiveForce(f"contact force must be > 0, got {force}")
    return law.r_ref * (force / law.f_ref) ** law.exponent


@dataclass(frozen=True)
class SwitchCircuit:
    r_down: float
    c_up: float
    l_down: float = 0.0
    z0: float = 50.0

    def __post_init__(self):
        if min(self.r_down, self.c_up, self.l_down) < 0:
            raise ValueError("circuit elements must be non-negative")
        if not self.z0 > 0:
            raise ValueError("z0 must be > 0")

    def admittance(self, state: SwitchState, freqs: np.ndarray) -> np.ndarray:
        w = 2 * np.pi * np.asarray(freqs, dtype=float)
        if state == "up":
            return 1j * w * self.c_up
        if state == "down":
            z = self.r_down + 1j * w * self.l_down
            with np.errstate(divide="ignore", over="ignore"):
                return np.where(z == 0, np.inf + 0j, 1.0 / np.where(z == 0, 1.0, z))
        raise ValueError(f"state must be 'up' or 'down', got {state!r}")


@dataclass(frozen=True, eq=False)
class TwoPortResponse:
    freqs: np.ndarray
    s11: np.ndarray
    s21: np.ndarray
    z0: float = 50.0

    @property
    def s12(self) -> np.ndarray:
        return self.s21

    @property
    def s22(self) -> np.ndarray:
        return self.s11

    def s21_db(self) -> np.ndarray:
        return to_db(self.s21)

    def s11_db(self) -> np.ndarray:
        return to_db(self.s11)

    def power_sum(self) -> np.ndarray:
        return np.abs(self.s11) ** 2 + np.abs(self.s21) ** 2


def to_db(s) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(np.abs(s))


def _check_grid(freqs) -> np.ndarray:
    f = np.atleast_1d(np.asarray(freqs, dtype=float))
    if f.size == 0:
        raise EmptyGrid("frequency grid is empty")
    if np.any(f <= 0):
        raise NonAscendingGrid("frequencies must be > 0")
    if np.any(np.diff(f) <= 0):
        raise NonAscendingGrid("frequencies must be strictly ascending")
    return f


def shunt_sparams(circuit: SwitchCircuit, state: SwitchState, freqs) -> TwoPortResponse:
    """S-parameters of a shunt admittance ``Y`` on a ``z0`` line."""
    f = _check_grid(freqs)
    # an ideal short (R = 0) has infinite admittance: S21 = 0, S11 = -1
    with np.errstate(all="ignore"):
        yz = circuit.admittance(state, f) * circuit.z0
        finite = np.isfinite(yz)
        den = np.where(finite, 2.0 + yz, 1.0)
        s21 = np.where(finite, 2.0 / den, 0.0 + 0j)
        s11 = np.where(finite, -yz / den, -1.0 + 0j)
    return TwoPortResponse(f, s11, s21, circuit.z0)


def fit_lumped(isolation_db_at_f: tuple[float, float], insertion_db_at_f: tuple[float, float],
               z0: float = 50.0) -> SwitchCircuit:
    """Closed-form ``r_down`` and ``c_up`` matching one isolation and one
    insertion-loss point (``l_down = 0``)."""
    iso_db, f_iso = isolation_db_at_f
    il_db, f_il = insertion_db_at_f
    if not z0 > 0:
        raise ValueError("z0 must be > 0")
    if not iso_db < 0:
        raise UnreachableTarget(f"isolation must be below 0 dB, got {iso_db}")
    if not -3.0 < il_db <= 0:
        raise UnreachableTarget(f"insertion loss must be in (-3, 0] dB, got {il_db}")
    if not (f_iso > 0 and f_il > 0):
        raise UnreachableTarget("target frequencies must be > 0")
    a = 10.0 ** (iso_db / 20.0)
    # |S21| = 2R / (2R + z0)
    r_down = a * z0 / (2.0 * (1.0 - a))
    b = 10.0 ** (il_db / 20.0)
    # |S21| = 2 / |2 + j w C z0|
    c_up = 2.0 * np.sqrt(max(1.0 / b ** 2 - 1.0, 0.0)) / (2 * np.pi * f_il * z0)
    return SwitchCircuit(r_down=float(r_down), c_up=float(c_up), z0=z0)


def circuit_from_contact(contact_force: float, c_up: float, law: ContactLaw = ContactLaw(),
                         z0: float = 50.0) -> SwitchCircuit:
    """Down-state resistance taken from a mechanical contact force."""
    return SwitchCircuit(r_down=contact_resistance(contact_force, law), c_up=c_up, z0=z0)


# ---------------------------------------------------------------------------
# Touchstone v1
# ---------------------------------------------------------------------------

def _ma(s):
    m = np.abs(s)
    # a zero entry has no phase; avoid the -0.0 sign showing up as 180 degrees
    return m, np.where(m == 0, 0.0, np.degrees(np.angle(s)))


def export_touchstone(response: TwoPortResponse, path) -> Path:
    """Write a 2-port ``.s2p`` in magnitude/angle format."""
    f = _check_grid(response.freqs)
    cols = [f]
    for s in (response.s11, response.s21, response.s12, response.s22):
        m, a = _ma(s)
        cols += [m, a]
    path = Path(path)
    lines = ["! two-port S-parameters of the shunt switch model",
             f"# HZ S MA R {response.z0:g}"]
    for row in np.column_stack(cols):
        lines.append(" ".join(f"{v:.12e}" for v in row))
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}", path=str(path)) from exc
    return path


_FREQ_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}


@dataclass(frozen=True, eq=False)
class TouchstoneData:
    freqs: np.ndarray
    s: np.ndarray  # (n, 4) complex, columns S11 S21 S12 S22
    z0: float

    def response(self) -> TwoPortResponse:
        return TwoPortResponse(self.freqs, self.s[:, 0], self.s[:, 1], self.z0)


def read_touchstone(path) -> TouchstoneData:
    """Parse a 2-port Touchstone v1 file written in MA, DB or RI format."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}", path=str(path)) from exc
    unit, fmt, z0 = 1e9, "MA", 50.0
    rows = []
    for raw in text.splitlines():
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            tok = line[1:].upper().split()
            for i, t in enumerate(tok):
                if t in _FREQ_UNITS:
                    unit = _FREQ_UNITS[t]
                elif t in ("MA", "DB", "RI"):
                    fmt = t
                elif t == "R" and i + 1 < len(tok):
                    z0 = float(tok[i + 1])
            continue
        rows.append([float(v) for v in line.split()])
    data = np.asarray(rows, dtype=float)
    if data.size == 0:
        raise EmptyGrid(f"{path} holds no data rows")
    if data.ndim != 2 or data.shape[1] != 9:
        raise IoFailure(f"{path}: expected 9 columns per row", path=str(path))

    def pair(c):
        x, y = data[:, c], data[:, c + 1]
        if fmt == "RI":
            return x + 1j * y
        mag = 10.0 ** (x / 20.0) if fmt == "DB" else x
        return mag * np.exp(1j * np.radians(y))

    s = np.column_stack([pair(c) for c in (1, 3, 5, 7)])
    return TouchstoneData(data[:, 0] * unit, s, z0)
