import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from freemembrane.device import (
    EXTERNAL,
    INTERNAL,
    BeamGeometry,
    DeviceSpec,
    ElectrodeZone,
    MaterialProps,
    build_mesh,
    switch_device,
    validate_spec,
    width_at,
    with_ratio,
)
from freemembrane.errors import (
    ElectrodeOnWrongSideOfPillar,
    InvalidSpec,
    NegativeDimension,
    OutOfRange,
    OverlappingSegments,
    PillarOutsideBeam,
    TooFewElements,
)

L = 360e-6


def uniform_spec(**kw):
    base = dict(
        material=MaterialProps(78e9, 0.42),
        geometry=BeamGeometry(L, 1e-6, ((0.0, L, 250e-6),), (36e-6, L - 36e-6)),
        electrodes=(ElectrodeZone(0.0, 30e-6, EXTERNAL), ElectrodeZone(60e-6, 100e-6, INTERNAL),
                    ElectrodeZone(260e-6, 300e-6, INTERNAL), ElectrodeZone(330e-6, L, EXTERNAL)),
        gap=1e-6,
    )
    base.update(kw)
    return DeviceSpec(**base)


def codes(exc_info):
    return set(exc_info.value.codes)


def test_default_device_is_valid_with_ratio():
    vs = validate_spec(uniform_spec())
    assert vs.ratio == pytest.approx(0.1)
    assert vs.internal_area == pytest.approx(2 * 40e-6 * 250e-6)
    assert vs.external_area == pytest.approx((30e-6 + 30e-6) * 250e-6)


def test_switch_device_dimensions():
    vs = validate_spec(switch_device())
    g = vs.geometry
    assert g.length == pytest.approx(360e-6)
    assert g.thickness == pytest.approx(1e-6)
    assert vs.ratio == pytest.approx(0.1)
    assert g.pillar_positions[0] == pytest.approx(L - g.pillar_positions[1])


def test_pillar_outside_beam():
    spec = uniform_spec(geometry=BeamGeometry(L, 1e-6, ((0.0, L, 250e-6),), (36e-6, 400e-6)))
    with pytest.raises(InvalidSpec) as e:
        validate_spec(spec)
    assert "PillarOutsideBeam" in codes(e)
    assert any(isinstance(i, PillarOutsideBeam) for i in e.value.issues)


def test_zero_gap_is_negative_dimension():
    with pytest.raises(InvalidSpec) as e:
        validate_spec(uniform_spec(gap=0.0))
    assert "NegativeDimension" in codes(e)
    assert any(isinstance(i, NegativeDimension) for i in e.value.issues)


def test_every_violation_is_listed():
    geo = BeamGeometry(L, -1e-6, ((0.0, 200e-6, 250e-6), (150e-6, L, 250e-6)), (36e-6, 400e-6))
    electrodes = (ElectrodeZone(0.0, 50e-6, INTERNAL),)
    with pytest.raises(InvalidSpec) as e:
        validate_spec(uniform_spec(geometry=geo, electrodes=electrodes, gap=-1.0))
    assert {"NegativeDimension", "OverlappingSegments", "PillarOutsideBeam",
            "ElectrodeOnWrongSideOfPillar"} <= codes(e)


def test_segment_hole_and_overlap():
    geo = BeamGeometry(L, 1e-6, ((0.0, 100e-6, 250e-6), (120e-6, L, 250e-6)), (36e-6, L - 36e-6))
    with pytest.raises(InvalidSpec) as e:
        validate_spec(uniform_spec(geometry=geo))
    assert any(isinstance(i, OverlappingSegments) for i in e.value.issues)


def test_external_electrode_between_pillars_rejected():
    electrodes = (ElectrodeZone(100e-6, 120e-6, EXTERNAL),)
    with pytest.raises(InvalidSpec) as e:
        validate_spec(uniform_spec(electrodes=electrodes))
    assert any(isinstance(i, ElectrodeOnWrongSideOfPillar) for i in e.value.issues)


def test_overlapping_electrodes_rejected():
    electrodes = (ElectrodeZone(60e-6, 100e-6, INTERNAL), ElectrodeZone(90e-6, 120e-6, INTERNAL))
    with pytest.raises(InvalidSpec):
        validate_spec(uniform_spec(electrodes=electrodes))


def test_validate_is_idempotent():
    vs = validate_spec(uniform_spec())
    again = validate_spec(vs)
    assert again == vs


def test_width_at_boundaries():
    geo = BeamGeometry(L, 1e-6, ((0.0, 100e-6, 250e-6), (100e-6, L, 40e-6)), (36e-6, L - 36e-6))
    spec = uniform_spec(geometry=geo)
    assert width_at(spec, 0.0) == 250e-6
    assert width_at(spec, 100e-6) == 40e-6  # boundary belongs to the right segment
    assert width_at(spec, L) == 40e-6
    assert width_at(uniform_spec(), 180e-6) == 250e-6
    with pytest.raises(OutOfRange):
        width_at(spec, -1e-6)


def test_mesh_counts_and_forced_nodes():
    m = build_mesh(uniform_spec(), 360)
    assert m.n_nodes >= 361
    assert np.all(np.diff(m.nodes) > 0)
    assert np.max(m.lengths) <= 1e-6 * (1 + 1e-9)
    m10 = build_mesh(uniform_spec(), 10)
    assert np.any(m10.nodes == 36e-6)
    assert m10.n_elements >= 10
    with pytest.raises(TooFewElements):
        build_mesh(uniform_spec(), 2)


def test_mesh_ei():
    m = build_mesh(uniform_spec(), 50)
    np.testing.assert_allclose(m.ei, 78e9 * 250e-6 * 1e-18 / 12.0, rtol=1e-14)


def test_plate_modulus_flag():
    m = build_mesh(uniform_spec(plate_modulus=True), 50)
    np.testing.assert_allclose(m.ei, 78e9 / (1 - 0.42 ** 2) * 250e-6 * 1e-18 / 12.0, rtol=1e-14)


def test_electrode_boundaries_are_nodes():
    spec = uniform_spec()
    m = build_mesh(spec, 37)
    for z in spec.electrodes:
        assert np.min(np.abs(m.nodes - z.x_start)) < 1e-15
        assert np.min(np.abs(m.nodes - z.x_end)) < 1e-15


@settings(max_examples=40, deadline=None)
@given(n=st.integers(10, 400))
def test_mesh_lengths_sum_and_nesting(n):
    spec = switch_device()
    m = build_mesh(spec, n)
    assert abs(m.lengths.sum() - L) <= 1e-12 * L
    m2 = build_mesh(spec, 2 * n)
    bps = [0.0, L, *spec.geometry.pillar_positions] + [z.x_start for z in spec.electrodes]
    for x in bps:
        assert np.min(np.abs(m.nodes - x)) < 1e-15
        assert np.min(np.abs(m2.nodes - x)) < 1e-15


@settings(max_examples=30, deadline=None)
@given(r=st.floats(0.03, 0.3))
def test_with_ratio_moves_pillars(r):
    spec = with_ratio(switch_device(), r)
    vs = validate_spec(spec)
    assert vs.ratio == pytest.approx(r, rel=1e-12)
    p1, p2 = spec.geometry.pillar_positions
    assert p1 == pytest.approx(L - p2, rel=1e-12)


def test_with_gap_keeps_stop_fraction():
    spec = switch_device(gap=1e-6)
    g7 = spec.with_gap(0.7e-6)
    assert g7.contacts.stop_height / g7.gap == pytest.approx(spec.contacts.stop_height / spec.gap)
    assert replace(spec, gap=2e-6).gap == 2e-6
