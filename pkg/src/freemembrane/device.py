"""Device description of the free membrane switch and its 1D beam mesh.

Lengths are in meters throughout. The membrane lies along ``x`` in
``[0, length]`` and rests on two pillars; electrodes sit on the substrate a
distance ``gap`` (air gap above the dielectric face) below the flat membrane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .errors import (
    ElectrodeOnWrongSideOfPillar,
    InvalidSpec,
    NegativeDimension,
    OutOfRange,
    OverlappingSegments,
    PillarOutsideBeam,
    TooFewElements,
)

INTERNAL = "internal"
EXTERNAL = "external"
ZoneKind = Literal["internal", "external"]

_REL = 1e-9  # relative tolerance for tiling/boundary comparisons


@dataclass(frozen=True)
class MaterialProps:
    youngs_modulus: float = 78e9
    poisson_ratio: float = 0.42


@dataclass(frozen=True)
class BeamGeometry:
    length: float
    thickness: float
    width_segments: tuple[tuple[float, float, float], ...]
    pillar_positions: tuple[float, float]

    @property
    def ratio(self) -> float:
        """Overhang outside the first pillar divided by total length (S/L)."""
        return self.pillar_positions[0] / self.length


@dataclass(frozen=True)
class ElectrodeZone:
    x_start: float
    x_end: float
    kind: ZoneKind
    dielectric_thickness: float = 200e-9
    dielectric_rel_permittivity: float = 7.5

    @property
    def span(self) -> float:
        return self.x_end - self.x_start


@dataclass(frozen=True)
class ContactSpec:
    positions: tuple[float, ...] = ()
    stop_height: float = 0.0


@dataclass(frozen=True)
class DeviceSpec:
    material: MaterialProps
    geometry: BeamGeometry
    electrodes: tuple[ElectrodeZone, ...]
    gap: float
    contacts: ContactSpec = field(default_factory=ContactSpec)
    plate_modulus: bool = False  # use E/(1 - nu^2) for the flexural rigidity

    def with_gap(self, gap: float, stop_height: float | None = None) -> "DeviceSpec":
        """Copy with a new air gap; the contact stop keeps its fraction of the gap
        unless ``stop_height`` is given."""
        if stop_height is None:
            stop_height = self.contacts.stop_height * gap / self.gap
        return replace(self, gap=gap, contacts=replace(self.contacts, stop_height=stop_height))


@dataclass(frozen=True)
class ValidatedSpec:
    """A device that passed every invariant, with derived quantities."""

    spec: DeviceSpec
    ratio: float
    internal_area: float
    external_area: float

    # convenience pass-throughs
    @property
    def geometry(self) -> BeamGeometry:
        return self.spec.geometry

    @property
    def material(self) -> MaterialProps:
        return self.spec.material

    @property
    def electrodes(self) -> tuple[ElectrodeZone, ...]:
        return self.spec.electrodes

    @property
    def gap(self) -> float:
        return self.spec.gap

    @property
    def contacts(self) -> ContactSpec:
        return self.spec.contacts

    @property
    def bending_modulus(self) -> float:
        m = self.spec.material
        if self.spec.plate_modulus:
            return m.youngs_modulus / (1.0 - m.poisson_ratio ** 2)
        return m.youngs_modulus


def _close(a: float, b: float, scale: float) -> bool:
    return abs(a - b) <= _REL * scale


def validate_spec(spec: DeviceSpec | ValidatedSpec) -> ValidatedSpec:
    """Check every device invariant and compute derived quantities.

    All violations are collected and raised together as :class:`InvalidSpec`,
    whose ``issues`` hold one typed error per violated invariant.
    """
    if isinstance(spec, ValidatedSpec):
        spec = spec.spec
    issues = []
    geo = spec.geometry
    mat = spec.material
    L = geo.length

    if not L > 0:
        issues.append(NegativeDimension(f"length must be > 0, got {L}"))
    if not geo.thickness > 0:
        issues.append(NegativeDimension(f"thickness must be > 0, got {geo.thickness}"))
    if not spec.gap > 0:
        issues.append(NegativeDimension(f"gap must be > 0, got {spec.gap}"))
    if not mat.youngs_modulus > 0:
        issues.append(NegativeDimension(f"youngs_modulus must be > 0, got {mat.youngs_modulus}"))
    if not 0 <= mat.poisson_ratio < 0.5:
        issues.append(NegativeDimension(f"poisson_ratio must be in [0, 0.5), got {mat.poisson_ratio}"))

    scale = abs(L) if L else 1.0
    segs = sorted(geo.width_segments, key=lambda s: s[0])
    if not segs:
        issues.append(OverlappingSegments("width_segments is empty"))
    else:
        if not _close(segs[0][0], 0.0, scale):
            issues.append(OverlappingSegments(f"width segments start at {segs[0][0]}, not 0"))
        if not _close(segs[-1][1], L, scale):
            issues.append(OverlappingSegments(f"width segments end at {segs[-1][1]}, not {L}"))
        for a, b in zip(segs, segs[1:]):
            if a[1] > b[0] + _REL * scale:
                issues.append(OverlappingSegments(f"segments {a} and {b} overlap"))
            elif a[1] < b[0] - _REL * scale:
                issues.append(OverlappingSegments(f"hole between segments {a} and {b}"))
        for s in segs:
            if not s[2] > 0:
                issues.append(NegativeDimension(f"segment width must be > 0, got {s}"))
            if not s[1] > s[0]:
                issues.append(NegativeDimension(f"segment {s} has non-positive length"))

    p1, p2 = geo.pillar_positions
    for p in (p1, p2):
        if not 0 < p < L:
            issues.append(PillarOutsideBeam(f"pillar at {p} outside (0, {L})"))
    if not p1 < p2:
        issues.append(PillarOutsideBeam(f"pillars must be ordered, got {p1}, {p2}"))

    zones = sorted(spec.electrodes, key=lambda z: z.x_start)
    for z in zones:
        if not z.x_end > z.x_start:
            issues.append(NegativeDimension(f"electrode {z} has non-positive span"))
        if z.x_start < -_REL * scale or z.x_end > L + _REL * scale:
            issues.append(OutOfRange(f"electrode {z} extends outside the beam"))
        if z.dielectric_thickness < 0:
            issues.append(NegativeDimension(f"dielectric thickness of {z} is negative"))
        if z.dielectric_rel_permittivity < 1:
            issues.append(NegativeDimension(f"relative permittivity of {z} below 1"))
        if z.kind == INTERNAL:
            if z.x_start < p1 or z.x_end > p2:
                issues.append(ElectrodeOnWrongSideOfPillar(f"internal electrode {z} not between pillars"))
        elif z.kind == EXTERNAL:
            if not (z.x_end <= p1 or z.x_start >= p2):
                issues.append(ElectrodeOnWrongSideOfPillar(f"external electrode {z} not outside pillars"))
        else:
            issues.append(ElectrodeOnWrongSideOfPillar(f"unknown electrode kind {z.kind!r}"))
    for a, b in zip(zones, zones[1:]):
        if a.x_end > b.x_start + _REL * scale:
            issues.append(OverlappingSegments(f"electrodes {a} and {b} overlap"))

    c = spec.contacts
    if c.positions:
        if c.stop_height < 0:
            issues.append(NegativeDimension(f"stop_height is negative: {c.stop_height}"))
        if spec.gap > 0 and c.stop_height > spec.gap * (1 + _REL):
            issues.append(OutOfRange(f"stop_height {c.stop_height} exceeds gap {spec.gap}"))
        for x in c.positions:
            if not p1 < x < p2:
                issues.append(OutOfRange(f"contact at {x} outside the internal span"))

    if issues:
        raise InvalidSpec(issues)

    def area(kind):
        total = 0.0
        for z in spec.electrodes:
            if z.kind == kind:
                total += _integrate_width(segs, z.x_start, z.x_end)
        return total

    return ValidatedSpec(spec=spec, ratio=p1 / L,
                         internal_area=area(INTERNAL), external_area=area(EXTERNAL))


def _integrate_width(segs, a, b) -> float:
    total = 0.0
    for x0, x1, w in segs:
        lo, hi = max(a, x0), min(b, x1)
        if hi > lo:
            total += (hi - lo) * w
    return total


def width_at(spec: ValidatedSpec | DeviceSpec, x: float) -> float:
    """Piecewise-constant width; a boundary belongs to the segment on its right,
    except ``x = length`` which belongs to the last segment."""
    geo = spec.geometry
    L = geo.length
    if x < -_REL * L or x > L * (1 + _REL):
        raise OutOfRange(f"x = {x} outside [0, {L}]")
    segs = sorted(geo.width_segments, key=lambda s: s[0])
    for x0, x1, w in segs:
        if x0 - _REL * L <= x < x1 - _REL * L:
            return w
    return segs[-1][2]


# ---------------------------------------------------------------------------
# Mesh
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Mesh:
    """Nodes, 2-node elements and per-element/per-node device data.

    ``node_zone[i]`` / ``elem_zone[e]`` hold the index into ``device.electrodes``
    (or -1); ``contact_nodes`` are the nodes carrying an ohmic bump.
    """

    nodes: np.ndarray
    elements: np.ndarray
    width: np.ndarray
    ei: np.ndarray
    pillar_nodes: tuple[int, int]
    node_zone: np.ndarray
    elem_zone: np.ndarray
    contact_nodes: tuple[int, ...]
    device: ValidatedSpec

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_dofs(self) -> int:
        return 2 * len(self.nodes)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def node_at(self, x: float) -> int:
        return int(np.argmin(np.abs(self.nodes - x)))

    @property
    def center_node(self) -> int:
        return self.node_at(0.5 * self.device.geometry.length)

    def tributary_lengths(self) -> np.ndarray:
        le = self.lengths
        out = np.zeros(self.n_nodes)
        out[:-1] += 0.5 * le
        out[1:] += 0.5 * le
        return out


def _breakpoints(vs: ValidatedSpec) -> list[float]:
    geo = vs.geometry
    pts = [0.0, geo.length, *geo.pillar_positions]
    for x0, x1, _ in geo.width_segments:
        pts += [x0, x1]
    for z in vs.electrodes:
        pts += [z.x_start, z.x_end]
    pts += list(vs.contacts.positions)
    pts = sorted(min(max(p, 0.0), geo.length) for p in pts)
    merged = [pts[0]]
    for p in pts[1:]:
        if p - merged[-1] > _REL * geo.length:
            merged.append(p)
    merged[-1] = geo.length
    return merged


def build_mesh(spec: ValidatedSpec | DeviceSpec, n_elements: int) -> Mesh:
    """Uniform target element size ``length / n_elements`` with nodes forced at
    every pillar, width, electrode and contact boundary."""
    if n_elements < 10:
        raise TooFewElements(f"n_elements must be >= 10, got {n_elements}")
    vs = validate_spec(spec)
    geo = vs.geometry
    h = geo.length / n_elements
    bps = _breakpoints(vs)
    nodes = [bps[0]]
    for a, b in zip(bps, bps[1:]):
        n_sub = max(1, math.ceil((b - a) / h - 1e-9))
        nodes.extend(a + (b - a) * k / n_sub for k in range(1, n_sub + 1))
    nodes = np.asarray(nodes)
    nodes[-1] = geo.length
    n = len(nodes)
    elements = np.column_stack([np.arange(n - 1), np.arange(1, n)])

    mids = 0.5 * (nodes[:-1] + nodes[1:])
    width = np.array([width_at(vs, x) for x in mids])
    ei = vs.bending_modulus * width * geo.thickness ** 3 / 12.0

    def nearest(x):
        return int(np.argmin(np.abs(nodes - x)))

    elem_zone = np.full(n - 1, -1, dtype=int)
    node_zone = np.full(n, -1, dtype=int)
    for k, z in enumerate(vs.electrodes):
        elem_zone[(mids > z.x_start) & (mids < z.x_end)] = k
        lo, hi = nearest(z.x_start), nearest(z.x_end)
        node_zone[lo:hi + 1] = k

    return Mesh(
        nodes=nodes,
        elements=elements,
        width=width,
        ei=ei,
        pillar_nodes=(nearest(geo.pillar_positions[0]), nearest(geo.pillar_positions[1])),
        node_zone=node_zone,
        elem_zone=elem_zone,
        contact_nodes=tuple(nearest(x) for x in vs.contacts.positions),
        device=vs,
    )


# ---------------------------------------------------------------------------
# Default device and geometric transformations
# ---------------------------------------------------------------------------

DEFAULT_LENGTH = 360e-6
DEFAULT_WIDTH = 250e-6
DEFAULT_THICKNESS = 1e-6
DEFAULT_RATIO = 0.1


def switch_device(
    gap: float = 1e-6,
    youngs_modulus: float = 78e9,
    eps_r: float = 7.5,
    dielectric_thickness: float = 200e-9,
    length: float = DEFAULT_LENGTH,
    thickness: float = DEFAULT_THICKNESS,
    ratio: float = DEFAULT_RATIO,
    leg_width: float = DEFAULT_WIDTH,
    bar_width: float = DEFAULT_WIDTH,
    leg_inset: float = 0.0,
    internal_offset: float = 20e-6,
    internal_length: float = 94e-6,
    external_clearance: float = 4e-6,
    stop_fraction: float = 0.85,
    center_width: float | None = None,
    center_length: float = 0.0,
) -> DeviceSpec:
    """Symmetric H-shaped membrane on two pillars.

    The wide legs (``leg_width``) cover each overhang and ``leg_inset`` past the
    pillar; the cross bar between them has ``bar_width``. Internal electrodes
    start ``internal_offset`` inside each pillar and run ``internal_length``
    toward the center; external electrodes run from the tips to
    ``external_clearance`` short of the pillars. An optional central plate of
    ``center_width`` spans ``center_length`` around the middle. One ohmic bump
    sits at the center with its stop at ``stop_fraction * gap``.
    """
    L = length
    S = ratio * L
    a = S + leg_inset
    bounds = [0.0, a, L - a, L]
    widths = [leg_width, bar_width, leg_width]
    if center_width is not None and center_length > 0:
        c0, c1 = 0.5 * (L - center_length), 0.5 * (L + center_length)
        bounds = [0.0, a, c0, c1, L - a, L]
        widths = [leg_width, bar_width, center_width, bar_width, leg_width]
    segs = []
    for x0, x1, w in zip(bounds, bounds[1:], widths):
        if x1 <= x0:
            continue
        if segs and segs[-1][2] == w:
            segs[-1] = (segs[-1][0], x1, w)
        else:
            segs.append((x0, x1, w))
    segs = tuple(segs)
    ins = dict(dielectric_thickness=dielectric_thickness, dielectric_rel_permittivity=eps_r)
    zones = (
        ElectrodeZone(0.0, S - external_clearance, EXTERNAL, **ins),
        ElectrodeZone(S + internal_offset, S + internal_offset + internal_length, INTERNAL, **ins),
        ElectrodeZone(L - S - internal_offset - internal_length, L - S - internal_offset, INTERNAL, **ins),
        ElectrodeZone(L - S + external_clearance, L, EXTERNAL, **ins),
    )
    return DeviceSpec(
        material=MaterialProps(youngs_modulus=youngs_modulus),
        geometry=BeamGeometry(L, thickness, segs, (S, L - S)),
        electrodes=zones,
        gap=gap,
        contacts=ContactSpec((0.5 * L,), stop_fraction * gap),
    )


# calibrated against the anchor values; see README "Calibration"
CALIBRATION: dict = {
    "youngs_modulus": 60e9,
    "leg_width": 225e-6,
    "leg_inset": 34e-6,
    "bar_width": 14e-6,
    "center_width": 100e-6,
    "center_length": 90e-6,
    "internal_offset": 7e-6,
    "internal_length": 27e-6,
    "external_clearance": 14e-6,
    "stop_fraction": 0.76,
}


def default_device(gap: float = 1e-6, **overrides) -> DeviceSpec:
    """Calibrated default device (``gap`` defaults to 1 um)."""
    params = {**CALIBRATION, **overrides}
    return switch_device(gap=gap, **params)


def stiction_device(**overrides) -> DeviceSpec:
    """The 0.7 um-gap variant used for the anti-stiction scenario."""
    return default_device(gap=0.7e-6, **overrides)


def _ratio_map(x: float, L: float, s_old: float, s_new: float) -> float:
    """Piecewise-affine map moving the pillars from ``s_old`` to ``s_new`` inset."""
    if x <= s_old:
        return x * s_new / s_old
    if x >= L - s_old:
        return L - (L - x) * s_new / s_old
    return s_new + (x - s_old) * (L - 2 * s_new) / (L - 2 * s_old)


def with_ratio(spec: DeviceSpec, ratio: float) -> DeviceSpec:
    """Move both pillars to inset ``ratio * length``; electrode, width and
    contact boundaries are rescaled proportionally inside each region."""
    if not 0 < ratio < 0.5:
        raise OutOfRange(f"ratio must be in (0, 0.5), got {ratio}")
    geo = spec.geometry
    L = geo.length
    s_old = geo.pillar_positions[0]
    if not _close(L - geo.pillar_positions[1], s_old, L):
        raise OutOfRange("ratio rescaling needs a symmetric pillar layout")
    s_new = ratio * L

    def m(x):
        return _ratio_map(x, L, s_old, s_new)

    segs = tuple((m(a), m(b), w) for a, b, w in geo.width_segments)
    zones = tuple(replace(z, x_start=m(z.x_start), x_end=m(z.x_end)) for z in spec.electrodes)
    contacts = replace(spec.contacts, positions=tuple(m(x) for x in spec.contacts.positions))
    return replace(spec, geometry=replace(geo, width_segments=segs, pillar_positions=(s_new, L - s_new)),
                   electrodes=zones, contacts=contacts)


def zones_of_kind(spec: ValidatedSpec | DeviceSpec, kind: str) -> list[int]:
    return [k for k, z in enumerate(spec.electrodes) if z.kind == kind]


def electrode_mask(mesh: Mesh, kinds: Sequence[str]) -> np.ndarray:
    """Boolean node mask of nodes lying on electrodes of the given kinds."""
    ks = [k for k, z in enumerate(mesh.device.electrodes) if z.kind in kinds]
    return np.isin(mesh.node_zone, ks)
