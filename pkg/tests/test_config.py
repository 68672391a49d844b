"""Scene document parsing, validation, and contrast derivation."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resoscat.config import (
    ClusterConfig,
    ConfigError,
    IncidentWave,
    ReferenceShape,
    Regime,
    SpacingLaw,
    derive_contrasts,
    parse_config,
    serialize,
)

MINIMAL_3D = {
    "dim": 3,
    "shape": {"kind": "ball3d", "diameter": 1.0},
    "delta": 0.05,
    "centers": [[0.0, 0.0, 0.0]],
    "regime": {"kind": "third", "c_b": 1.0},
    "incident": {"theta": [0.0, 0.0, 1.0], "h": 0.5, "sign": 1},
}


def test_minimal_single_particle_document():
    cfg = parse_config(json.dumps(MINIMAL_3D))
    assert cfg.m_particles == 1
    assert cfg.min_support_distance() is None  # d undefined for M = 1
    assert cfg.delta == 0.05


def test_overlap_is_rejected_with_pair_names():
    doc = dict(MINIMAL_3D, centers=[[0.0, 0.0, 0.0], [0.04, 0.0, 0.0], [9.0, 0.0, 0.0]])
    with pytest.raises(ConfigError, match=r"particles overlap: j=0,1"):
        parse_config(json.dumps(doc))


def test_spacing_law_accepts_quarter_separation():
    # t=0.5, d0=1, delta=0.04: d >= 1 * 0.04^0.5 = 0.2; centers 0.25 apart
    # leave a 0.21 surface gap for diameter-1 balls, which passes
    doc = dict(
        MINIMAL_3D,
        delta=0.04,
        centers=[[0.0, 0.0, 0.0], [0.25, 0.0, 0.0]],
        spacing={"t": 0.5, "d0": 1.0},
    )
    cfg = parse_config(json.dumps(doc))
    assert cfg.min_support_distance() == pytest.approx(0.25 - 0.04, rel=1e-12)


def test_spacing_law_violation_raises():
    doc = dict(
        MINIMAL_3D,
        delta=0.04,
        centers=[[0.0, 0.0, 0.0], [0.2, 0.0, 0.0]],
        spacing={"t": 0.5, "d0": 1.0},
    )
    with pytest.raises(ConfigError, match="spacing law violated"):
        parse_config(json.dumps(doc))


def test_syntax_error_is_position_annotated():
    with pytest.raises(ConfigError, match=r"syntax error at line \d+, column \d+"):
        parse_config('{"dim": 3,,}')


def test_missing_field_named():
    with pytest.raises(ConfigError, match="missing required field 'delta'"):
        parse_config(json.dumps({k: v for k, v in MINIMAL_3D.items() if k != "delta"}))


def test_non_unit_direction_rejected():
    doc = dict(MINIMAL_3D, incident={"theta": [0.0, 0.0, 1.0 + 1e-9], "h": 0.5, "sign": 1})
    with pytest.raises(ConfigError, match="unit length"):
        parse_config(json.dumps(doc))


def test_delta_and_diameter_bounds():
    with pytest.raises(ConfigError, match="delta"):
        parse_config(json.dumps(dict(MINIMAL_3D, delta=1.0)))
    with pytest.raises(ConfigError, match="diameter"):
        parse_config(json.dumps(dict(MINIMAL_3D, shape={"kind": "ball3d", "diameter": 1.2})))


def test_offset_must_keep_origin_inside():
    with pytest.raises(ConfigError, match="origin outside"):
        ReferenceShape(kind="ball3d", diameter=1.0, offset=(0.6, 0.0, 0.0))
    ReferenceShape(kind="ball3d", diameter=1.0, offset=(0.45, 0.0, 0.0))


def test_dimension_mismatch():
    with pytest.raises(ConfigError):
        parse_config(json.dumps(dict(MINIMAL_3D, dim=2)))


def test_round_trip_identity():
    doc = dict(
        MINIMAL_3D,
        centers=[[0.0, 0.0, 0.0], [0.7, 0.1, -0.2]],
        shape={"kind": "ball3d", "diameter": 0.875, "offset": [0.25, 0.0, 0.0]},
        regime={"kind": "third", "c_b": [2.0, 3.0]},
        spacing={"t": 0.0, "d0": 0.5},
    )
    cfg = parse_config(json.dumps(doc))
    again = parse_config(serialize(cfg))
    assert again.shape == cfg.shape
    assert again.delta == cfg.delta
    assert np.array_equal(again.centers, cfg.centers)
    assert again.regime == cfg.regime
    assert again.incident == cfg.incident
    assert again.spacing == cfg.spacing
    assert serialize(again) == serialize(cfg)


@given(
    delta=st.floats(0.005, 0.5),
    cb=st.floats(0.1, 50.0),
    h=st.floats(0.0, 1.0),
    d0=st.floats(0.2, 4.0),
)
@settings(max_examples=40)
def test_round_trip_property(delta, cb, h, d0):
    cfg = ClusterConfig(
        dim=3,
        shape=ReferenceShape(kind="ball3d", diameter=1.0),
        delta=delta,
        centers=np.zeros((1, 3)),
        spacing=SpacingLaw(t=0.3, d0=d0),
        regime=Regime(kind="third", c_b=cb),
        incident=IncidentWave(theta=(0.0, 0.0, 1.0), h=h),
    )
    assert serialize(parse_config(serialize(cfg))) == serialize(cfg)


def test_contrast_scaling_3d():
    cfg = parse_config(json.dumps(dict(MINIMAL_3D, delta=0.1)))
    contrasts = derive_contrasts(cfg)
    assert contrasts.tau == pytest.approx(100.0, rel=1e-14)
    assert contrasts.alpha == 0.0
    assert contrasts.gammas == contrasts.taus


def test_contrast_scaling_2d():
    doc = {
        "dim": 2,
        "shape": {"kind": "disc2d", "diameter": 1.0},
        "delta": float(np.exp(-1.0)),
        "centers": [[0.0, 0.0]],
        "regime": {"kind": "third", "c_b": 1.0},
        "incident": {"theta": [0.0, 1.0], "h": 0.5, "sign": 1},
    }
    contrasts = derive_contrasts(parse_config(json.dumps(doc)))
    assert contrasts.tau == pytest.approx(np.e**2, rel=1e-14)


@given(cb=st.floats(0.01, 100.0))
@settings(max_examples=40)
def test_contrast_homogeneity(cb):
    base = ClusterConfig(
        dim=3,
        shape=ReferenceShape(kind="ball3d"),
        delta=0.07,
        centers=np.zeros((1, 3)),
        regime=Regime(kind="third", c_b=cb),
        incident=IncidentWave(theta=(0.0, 0.0, 1.0)),
    )
    doubled = ClusterConfig(
        dim=3,
        shape=base.shape,
        delta=0.07,
        centers=np.zeros((1, 3)),
        regime=Regime(kind="third", c_b=2.0 * cb),
        incident=base.incident,
    )
    assert derive_contrasts(doubled).tau == 2.0 * derive_contrasts(base).tau


def test_contrast_requires_third_regime():
    doc = dict(MINIMAL_3D, regime={"kind": "first", "c_a": 1.0, "c_b": 1.0})
    with pytest.raises(ConfigError, match="third regime"):
        derive_contrasts(parse_config(json.dumps(doc)))


def test_per_particle_taus():
    doc = dict(
        MINIMAL_3D,
        centers=[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
        regime={"kind": "third", "c_b": [1.0, 2.0]},
        spacing={"t": 0.0, "d0": 0.9},
    )
    contrasts = derive_contrasts(parse_config(json.dumps(doc)))
    assert contrasts.taus[1] == pytest.approx(2.0 * contrasts.taus[0], rel=1e-14)
    with pytest.raises(ValueError, match="heterogeneous"):
        _ = contrasts.tau


def test_total_b_variant_shifts_coupling_by_background():
    doc = dict(MINIMAL_3D, regime={"kind": "third", "c_b": 1.0, "use_total_b": True})
    cfg = parse_config(json.dumps(doc))
    contrasts = derive_contrasts(cfg)
    assert contrasts.coupling(0) == pytest.approx(contrasts.taus[0] + 1.0, rel=1e-14)
