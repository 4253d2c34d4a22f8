"""Reference frame and measurement tests, anchored on trigonometric oracles."""

import math

import numpy as np
import pytest

from hipmetrics import (
    AngleTargets,
    CroweGrade,
    HipKeypoints,
    HipSide,
    KeypointsPair,
    PelvisTemplate,
    Point2D,
    build_reference_frame,
    ce_angle,
    crowe_grade,
    measure_hip,
    pelvic_height,
    proximal_displacement,
    sharp_angle,
    synth_annotation,
    tonnis_angle,
)
from hipmetrics.errors import DegenerateGeometry, InvalidRatio

S2 = math.sqrt(2.0) / 2.0


def axis_frame(y=200.0):
    return build_reference_frame(Point2D(100.0, y), Point2D(300.0, y))


# --- reference frame ---------------------------------------------------------


def test_frame_axis_aligned():
    frame = build_reference_frame(Point2D(100, 200), Point2D(300, 200))
    assert frame.u_horizontal == pytest.approx((1.0, 0.0), abs=1e-12)
    assert frame.u_vertical == pytest.approx((0.0, -1.0), abs=1e-12)
    assert frame.origin == Point2D(100, 200)


def test_frame_diagonal_matches_rotation():
    frame = build_reference_frame(Point2D(0, 0), Point2D(100, 100))
    assert frame.u_horizontal == pytest.approx((S2, S2), abs=1e-12)
    assert frame.u_vertical == pytest.approx((S2, -S2), abs=1e-12)


def test_frame_invariants_random():
    rng = np.random.default_rng(11)
    for _ in range(200):
        r = Point2D(*rng.uniform(-500, 500, 2))
        l = Point2D(r.x + rng.uniform(50, 300), r.y + rng.uniform(-100, 100))
        frame = build_reference_frame(r, l)
        uh, uv = frame.u_horizontal, frame.u_vertical
        assert math.hypot(*uh) == pytest.approx(1.0, abs=1e-12)
        assert math.hypot(*uv) == pytest.approx(1.0, abs=1e-12)
        assert uh[0] * uv[0] + uh[1] * uv[1] == pytest.approx(0.0, abs=1e-12)
        assert uv[1] <= 0  # superior


def test_frame_coincident_teardrops():
    with pytest.raises(DegenerateGeometry):
        build_reference_frame(Point2D(5, 5), Point2D(5, 5))


# --- CE angle ----------------------------------------------------------------


def test_ce_angle_zero_when_vertical():
    frame = axis_frame()
    assert ce_angle(frame, HipSide.RIGHT, Point2D(100, 100), Point2D(100, 80)) == pytest.approx(0.0)


def test_ce_angle_signs_right_hip():
    frame = axis_frame()
    expected = math.degrees(math.atan(10.0 / 20.0))
    # lateral for the right hip is -x
    lateral = ce_angle(frame, HipSide.RIGHT, Point2D(100, 100), Point2D(90, 80))
    medial = ce_angle(frame, HipSide.RIGHT, Point2D(100, 100), Point2D(110, 80))
    assert lateral == pytest.approx(expected, abs=1e-9)
    assert medial == pytest.approx(-expected, abs=1e-9)


def test_ce_angle_signs_left_hip_mirror():
    frame = axis_frame()
    expected = math.degrees(math.atan(10.0 / 20.0))
    assert ce_angle(frame, HipSide.LEFT, Point2D(100, 100), Point2D(110, 80)) == pytest.approx(
        expected, abs=1e-9
    )
    assert ce_angle(frame, HipSide.LEFT, Point2D(100, 100), Point2D(90, 80)) == pytest.approx(
        -expected, abs=1e-9
    )


def test_ce_angle_degenerate():
    with pytest.raises(DegenerateGeometry):
        ce_angle(axis_frame(), HipSide.RIGHT, Point2D(1, 1), Point2D(1, 1))


# --- Tonnis angle --------------------------------------------------------------


def test_tonnis_flat_sourcil():
    frame = axis_frame()
    assert tonnis_angle(frame, HipSide.RIGHT, Point2D(10, 0), Point2D(0, 0)) == pytest.approx(0.0)


def test_tonnis_45_and_oracle():
    frame = axis_frame()
    assert tonnis_angle(frame, HipSide.RIGHT, Point2D(10, -10), Point2D(0, 0)) == pytest.approx(
        45.0, abs=1e-9
    )
    expected = math.degrees(math.atan(10.0 / 20.0))
    assert tonnis_angle(frame, HipSide.RIGHT, Point2D(20, -10), Point2D(0, 0)) == pytest.approx(
        expected, abs=1e-9
    )


def test_tonnis_negative_when_c_inferior():
    frame = axis_frame()
    assert tonnis_angle(frame, HipSide.LEFT, Point2D(10, 10), Point2D(0, 0)) == pytest.approx(
        -45.0, abs=1e-9
    )


# --- Sharp angle ----------------------------------------------------------------


def test_sharp_symmetric_45():
    frame = axis_frame()
    assert sharp_angle(frame, Point2D(0, 0), Point2D(20, -20)) == pytest.approx(45.0, abs=1e-9)


def test_sharp_zero_on_horizontal():
    frame = axis_frame()
    assert sharp_angle(frame, Point2D(0, 0), Point2D(30, 0)) == pytest.approx(0.0)


def test_sharp_60_from_sqrt3():
    frame = axis_frame()
    exact = sharp_angle(frame, Point2D(0, 0), Point2D(10, -10 * math.sqrt(3.0)))
    assert exact == pytest.approx(60.0, abs=1e-9)
    rounded = sharp_angle(frame, Point2D(0, 0), Point2D(10, -17.3205))
    assert rounded == pytest.approx(60.0, abs=1e-4)


def test_sharp_unsigned():
    frame = axis_frame()
    assert sharp_angle(frame, Point2D(0, 0), Point2D(-20, 20)) == pytest.approx(45.0, abs=1e-9)


# --- displacement and height ------------------------------------------------------


def test_displacement_axis_aligned():
    frame = axis_frame(y=200.0)
    assert proximal_displacement(frame, Point2D(150, 170)) == pytest.approx(30.0, abs=1e-9)
    assert proximal_displacement(frame, Point2D(150, 200)) == pytest.approx(0.0, abs=1e-9)


def test_displacement_rotated_point_line_oracle():
    frame = build_reference_frame(Point2D(0, 0), Point2D(100, 100))
    # line y = x; (0, 10) sits 10/sqrt(2) px on the inferior side
    assert proximal_displacement(frame, Point2D(0, 10)) == pytest.approx(
        -10.0 / math.sqrt(2.0), abs=1e-9
    )


def test_pelvic_height_trivial_and_midpoint_oracle():
    frame = axis_frame(y=100.0)
    assert pelvic_height(
        frame, Point2D(90, 250), Point2D(210, 250), Point2D(80, 50), Point2D(220, 50)
    ) == pytest.approx(200.0, abs=1e-9)
    assert pelvic_height(
        frame, Point2D(90, 240), Point2D(210, 260), Point2D(80, 40), Point2D(220, 60)
    ) == pytest.approx(200.0, abs=1e-9)


def test_pelvic_height_degenerate():
    frame = axis_frame(y=100.0)
    with pytest.raises(DegenerateGeometry):
        pelvic_height(
            frame, Point2D(90, 100), Point2D(210, 100), Point2D(80, 100), Point2D(220, 100)
        )


# --- Crowe grading -----------------------------------------------------------------


@pytest.mark.parametrize(
    "ratio,grade",
    [
        (0.0, CroweGrade.I),
        (0.05, CroweGrade.I),
        (0.0999, CroweGrade.I),
        (0.1, CroweGrade.II),
        (0.15, CroweGrade.II),
        (0.1501, CroweGrade.III),
        (0.2, CroweGrade.III),
        (0.2001, CroweGrade.IV),
        (0.25, CroweGrade.IV),
    ],
)
def test_crowe_grade_boundaries(ratio, grade):
    assert crowe_grade(ratio) is grade


def test_crowe_grade_invalid():
    with pytest.raises(InvalidRatio):
        crowe_grade(-0.01)
    with pytest.raises(InvalidRatio):
        crowe_grade(float("nan"))


# --- whole-hip measurement ------------------------------------------------------------


def annotation_for(targets_right, targets_left, rotation=0.0, seed=0):
    tpl = PelvisTemplate(rotation_deg=rotation)
    return synth_annotation(targets_right, targets_left, template=tpl, rng=seed)


def test_measure_hip_recovers_synthetic_targets():
    ann = annotation_for((30.0, 5.0, 40.0, 0.0), (30.0, 5.0, 40.0, 0.0), rotation=3.0)
    for side in HipSide:
        m = measure_hip(ann, side)
        assert m.ce_deg == pytest.approx(30.0, abs=1e-9)
        assert m.tonnis_deg == pytest.approx(5.0, abs=1e-9)
        assert m.sharp_deg == pytest.approx(40.0, abs=1e-9)
        assert m.crowe_ratio_r == pytest.approx(0.0, abs=1e-12)
        assert crowe_grade(m.crowe_ratio_r) is CroweGrade.I


def _transform_annotation(ann, angle_deg, tx, ty):
    """Rigidly move every landmark of both hips."""
    rho = math.radians(angle_deg)
    c, s = math.cos(rho), math.sin(rho)

    def move(p):
        return Point2D(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty)

    def move_hip(hip):
        return HipKeypoints(
            **{f: move(getattr(hip, f)) for f in HipKeypoints.__dataclass_fields__}
        )

    return KeypointsPair(right=move_hip(ann.keypoints.right), left=move_hip(ann.keypoints.left))


def test_rigid_motion_invariance():
    # rotations stay under a quarter turn: the vertical axis is resolved
    # from image orientation, so an upside-down pelvis is out of contract
    rng = np.random.default_rng(23)
    ann = annotation_for((22.0, 12.0, 44.0, 0.12), (-5.0, 18.0, 50.0, 0.3), seed=5)
    base = {side: measure_hip(ann, side) for side in HipSide}
    for _ in range(25):
        moved = _transform_annotation(
            ann, rng.uniform(-60, 60), rng.uniform(-900, 900), rng.uniform(-900, 900)
        )
        for side in HipSide:
            m = measure_hip(moved, side)
            b = base[side]
            assert m.ce_deg == pytest.approx(b.ce_deg, abs=1e-9)
            assert m.tonnis_deg == pytest.approx(b.tonnis_deg, abs=1e-9)
            assert m.sharp_deg == pytest.approx(b.sharp_deg, abs=1e-9)
            assert m.proximal_displacement_px == pytest.approx(
                b.proximal_displacement_px, abs=1e-9
            )
            assert m.pelvic_height_px == pytest.approx(b.pelvic_height_px, abs=1e-9)
            assert m.crowe_ratio_r == pytest.approx(b.crowe_ratio_r, abs=1e-12)


def test_uniform_scale_invariance_of_angles_and_ratio():
    ann = annotation_for((27.0, 9.0, 43.0, 0.18), (15.0, 14.0, 48.0, 0.02), seed=9)

    def scale_hip(hip, factor):
        return HipKeypoints(
            **{
                f: Point2D(getattr(hip, f).x * factor, getattr(hip, f).y * factor)
                for f in HipKeypoints.__dataclass_fields__
            }
        )

    for factor in (0.25, 3.0):
        scaled = KeypointsPair(
            right=scale_hip(ann.keypoints.right, factor),
            left=scale_hip(ann.keypoints.left, factor),
        )
        for side in HipSide:
            m, b = measure_hip(scaled, side), measure_hip(ann, side)
            assert m.ce_deg == pytest.approx(b.ce_deg, abs=1e-9)
            assert m.tonnis_deg == pytest.approx(b.tonnis_deg, abs=1e-9)
            assert m.sharp_deg == pytest.approx(b.sharp_deg, abs=1e-9)
            assert m.crowe_ratio_r == pytest.approx(b.crowe_ratio_r, abs=1e-9)
            assert m.pelvic_height_px == pytest.approx(b.pelvic_height_px * factor, rel=1e-9)


def test_mirror_swap_preserves_measurements():
    ann = annotation_for((21.0, 11.0, 46.0, 0.07), (33.0, 2.0, 37.0, 0.0), seed=3)

    def mirror_hip(hip):
        return HipKeypoints(
            **{
                f: Point2D(600.0 - getattr(hip, f).x, getattr(hip, f).y)
                for f in HipKeypoints.__dataclass_fields__
            }
        )

    mirrored = KeypointsPair(
        right=mirror_hip(ann.keypoints.left), left=mirror_hip(ann.keypoints.right)
    )
    swap = {HipSide.RIGHT: HipSide.LEFT, HipSide.LEFT: HipSide.RIGHT}
    for side in HipSide:
        m = measure_hip(mirrored, side)
        b = measure_hip(ann, swap[side])
        assert m.ce_deg == pytest.approx(b.ce_deg, abs=1e-9)
        assert m.tonnis_deg == pytest.approx(b.tonnis_deg, abs=1e-9)
        assert m.sharp_deg == pytest.approx(b.sharp_deg, abs=1e-9)
        assert m.crowe_ratio_r == pytest.approx(b.crowe_ratio_r, abs=1e-12)


def test_measurement_ranges_on_random_targets():
    rng = np.random.default_rng(77)
    for _ in range(50):
        targets = AngleTargets(
            ce_deg=float(rng.uniform(-60, 60)),
            tonnis_deg=float(rng.uniform(-30, 40)),
            sharp_deg=float(rng.uniform(0, 80)),
            crowe_r=float(rng.uniform(0, 0.6)),
        )
        ann = annotation_for(targets, targets, rotation=float(rng.uniform(-20, 20)), seed=int(rng.integers(1 << 31)))
        for side in HipSide:
            m = measure_hip(ann, side)
            assert 0.0 <= m.sharp_deg < 90.0
            assert abs(m.ce_deg) <= 90.0
            assert abs(m.tonnis_deg) <= 90.0
            assert m.pelvic_height_px > 0


def test_measure_hip_names_offending_landmark():
    ann = annotation_for((30.0, 5.0, 40.0, 0.0), (30.0, 5.0, 40.0, 0.0))
    hip = ann.keypoints.right
    broken = HipKeypoints(
        teardrop_A=hip.teardrop_A,
        fh_center_B=hip.fh_center_B,
        lat_sourcil_C=hip.fh_center_B,  # C collapses onto B
        med_sourcil_D=hip.med_sourcil_D,
        fhn_junction_E=hip.fhn_junction_E,
        inf_ischium_F=hip.inf_ischium_F,
        sup_ilium_G=hip.sup_ilium_G,
    )
    pair = KeypointsPair(right=broken, left=ann.keypoints.left)
    with pytest.raises(DegenerateGeometry, match="fh_center_B and lat_sourcil_C"):
        measure_hip(pair, HipSide.RIGHT)
