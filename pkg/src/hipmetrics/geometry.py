"""Pelvic reference frame and radiological hip measurements.

Coordinates follow the raster convention of annotation tools: x grows
rightward along image columns, y grows downward along image rows, so
"superior" (toward the patient's head) means a smaller projected vertical
coordinate.

The reference frame is anchored on the two teardrop landmarks: the
horizontal axis runs from the right teardrop toward the left one, and the
vertical axis is its superior-pointing perpendicular. Every angle and
distance below is defined against that frame, which makes all measurements
invariant under rigid motion of the whole radiograph.

Sign conventions (the clinical cut points assume these):

- CE angle: positive when the lateral acetabular edge (C) lies lateral to
  the vertical line through the femoral head center (B). Normal hips are
  positive; subluxated hips can go negative.
- Tonnis angle: positive when the lateral sourcil edge (C) sits superior to
  the medial edge (D), i.e. the roof inclines upward laterally.
- Sharp angle: unsigned acute inclination of the teardrop-to-lateral-edge
  line against the horizontal axis.
- "Lateral" for a given hip is the horizontal-axis direction pointing from
  the contralateral teardrop toward the ipsilateral one, so a horizontally
  flipped radiograph measures identically.

Because "superior" is resolved from image orientation, all measurements are
invariant under rigid motions that keep the pelvis upright (rotations under
a quarter turn). An upside-down input flips the two superior-referenced
signs (Tonnis, displacement); magnitudes are always preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Tuple, Union

from .errors import DegenerateGeometry, InvalidRatio

if TYPE_CHECKING:  # pragma: no cover
    from .data import PelvisAnnotation

# Two landmarks closer than this (in pixels) are treated as coincident.
COINCIDENCE_TOL = 1e-6

# Canonical landmark names (document schema key -> HipKeypoints field).
KEYPOINT_FIELDS = {
    "teardrop": "teardrop_A",
    "fh_center": "fh_center_B",
    "lat_sourcil": "lat_sourcil_C",
    "med_sourcil": "med_sourcil_D",
    "fhn_junction": "fhn_junction_E",
    "inf_ischium": "inf_ischium_F",
    "sup_ilium": "sup_ilium_G",
}
KEYPOINT_NAMES = tuple(KEYPOINT_FIELDS)


@dataclass(frozen=True)
class Point2D:
    """Image-space point in pixels; both coordinates must be finite."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def distance_to(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


class HipSide(Enum):
    RIGHT = "right"
    LEFT = "left"

    @property
    def opposite(self) -> "HipSide":
        return HipSide.LEFT if self is HipSide.RIGHT else HipSide.RIGHT


class CroweGrade(Enum):
    I = 1
    II = 2
    III = 3
    IV = 4

    @property
    def label(self) -> str:
        return self.name


@dataclass(frozen=True)
class HipKeypoints:
    """The seven landmarks of one hip.

    teardrop_A: inferior boundary of the teardrop
    fh_center_B: center of the femoral head
    lat_sourcil_C: lateral edge of the acetabulum
    med_sourcil_D: medial aspect of the acetabulum
    fhn_junction_E: caudal femoral head-neck junction
    inf_ischium_F: inferior ischial tuberosity
    sup_ilium_G: superior edge of the iliac crest
    """

    teardrop_A: Point2D
    fh_center_B: Point2D
    lat_sourcil_C: Point2D
    med_sourcil_D: Point2D
    fhn_junction_E: Point2D
    inf_ischium_F: Point2D
    sup_ilium_G: Point2D


@dataclass(frozen=True)
class KeypointsPair:
    """Both hips' landmarks for one pelvis."""

    right: HipKeypoints
    left: HipKeypoints

    def for_side(self, side: HipSide) -> HipKeypoints:
        return self.right if side is HipSide.RIGHT else self.left


@dataclass(frozen=True)
class ReferenceFrame:
    """Teardrop-anchored orthonormal frame.

    origin is the right teardrop; u_horizontal points toward the left
    teardrop; u_vertical is the superior perpendicular (negative image-y
    side). Both axes are unit length and orthogonal to 1e-12.
    """

    origin: Point2D
    u_horizontal: Tuple[float, float]
    u_vertical: Tuple[float, float]

    def to_frame(self, p: Point2D) -> Tuple[float, float]:
        """Project p into (horizontal, vertical) frame coordinates."""
        dx = p.x - self.origin.x
        dy = p.y - self.origin.y
        h = dx * self.u_horizontal[0] + dy * self.u_horizontal[1]
        v = dx * self.u_vertical[0] + dy * self.u_vertical[1]
        return h, v

    def lateral_sign(self, side: HipSide) -> float:
        """Multiplier turning horizontal components into lateral ones.

        Lateral points from the contralateral teardrop to the ipsilateral
        one: -u_horizontal for the right hip, +u_horizontal for the left.
        """
        return -1.0 if side is HipSide.RIGHT else 1.0


@dataclass(frozen=True)
class AngleMeasurements:
    """All radiological measurements for one hip."""

    side: HipSide
    ce_deg: float
    tonnis_deg: float
    sharp_deg: float
    proximal_displacement_px: float
    pelvic_height_px: float
    crowe_ratio_r: float


def build_reference_frame(right_teardrop: Point2D, left_teardrop: Point2D) -> ReferenceFrame:
    """Construct the teardrop frame; raises DegenerateGeometry if they coincide."""
    dx = left_teardrop.x - right_teardrop.x
    dy = left_teardrop.y - right_teardrop.y
    norm = math.hypot(dx, dy)
    if norm <= COINCIDENCE_TOL:
        raise DegenerateGeometry(
            f"teardrops coincide (distance {norm:.3g} px <= {COINCIDENCE_TOL})"
        )
    uh = (dx / norm, dy / norm)
    # Superior perpendicular: of the two candidates pick the one with a
    # negative image-y component; for a perfectly vertical inter-teardrop
    # line (no meaningful "superior") keep (uh_y, -uh_x) deterministically.
    uv = (uh[1], -uh[0])
    if uv[1] > 0.0:
        uv = (-uv[0], -uv[1])
    return ReferenceFrame(origin=right_teardrop, u_horizontal=uh, u_vertical=uv)


def _frame_delta(frame: ReferenceFrame, start: Point2D, end: Point2D, what: str) -> Tuple[float, float]:
    """Frame components of (end - start); raises if the segment degenerates."""
    dx = end.x - start.x
    dy = end.y - start.y
    if math.hypot(dx, dy) <= COINCIDENCE_TOL:
        raise DegenerateGeometry(f"{what} coincide at ({start.x}, {start.y})")
    h = dx * frame.u_horizontal[0] + dy * frame.u_horizontal[1]
    v = dx * frame.u_vertical[0] + dy * frame.u_vertical[1]
    return h, v


def ce_angle(frame: ReferenceFrame, side: HipSide, B: Point2D, C: Point2D) -> float:
    """Center-edge angle: line BC against the vertical axis, in degrees.

    Magnitude is the acute line-to-line angle in [0, 90]; the sign is
    positive when C is lateral to the vertical line through B.
    """
    h, v = _frame_delta(frame, B, C, "fh_center_B and lat_sourcil_C")
    magnitude = math.degrees(math.atan2(abs(h), abs(v)))
    lateral = h * frame.lateral_sign(side)
    return magnitude if lateral >= 0.0 else -magnitude


def tonnis_angle(frame: ReferenceFrame, side: HipSide, C: Point2D, D: Point2D) -> float:
    """Sourcil inclination: line DC against the horizontal through D, in degrees.

    Positive when C is superior to D. The sign does not depend on the side;
    the parameter is kept so all angle operations share one call shape.
    """
    del side
    h, v = _frame_delta(frame, D, C, "lat_sourcil_C and med_sourcil_D")
    magnitude = math.degrees(math.atan2(abs(v), abs(h)))
    return magnitude if v >= 0.0 else -magnitude


def sharp_angle(frame: ReferenceFrame, A: Point2D, C: Point2D) -> float:
    """Acetabular inclination: unsigned angle of line AC to the horizontal axis."""
    h, v = _frame_delta(frame, A, C, "teardrop_A and lat_sourcil_C")
    return math.degrees(math.atan2(abs(v), abs(h)))


def proximal_displacement(frame: ReferenceFrame, E: Point2D) -> float:
    """Signed distance of E from the inter-teardrop line, positive superior."""
    _, v = frame.to_frame(E)
    return v


def pelvic_height(
    frame: ReferenceFrame,
    F_right: Point2D,
    F_left: Point2D,
    G_right: Point2D,
    G_left: Point2D,
) -> float:
    """Vertical span between the ilium-midpoint and ischium-midpoint lines.

    Both midpoints are projected on the vertical axis; the result is their
    absolute separation and must be strictly positive.
    """
    mid_g = Point2D((G_right.x + G_left.x) / 2.0, (G_right.y + G_left.y) / 2.0)
    mid_f = Point2D((F_right.x + F_left.x) / 2.0, (F_right.y + F_left.y) / 2.0)
    _, vg = frame.to_frame(mid_g)
    _, vf = frame.to_frame(mid_f)
    height = abs(vg - vf)
    if height < COINCIDENCE_TOL:
        raise DegenerateGeometry(
            "sup_ilium_G and inf_ischium_F midpoints project to the same "
            f"vertical coordinate (separation {height:.3g} px)"
        )
    return height


def crowe_ratio(displacement_px: float, pelvic_height_px: float) -> float:
    """Displacement-to-height ratio; negative displacement clamps to zero."""
    return max(0.0, displacement_px) / pelvic_height_px


def crowe_grade(r: float) -> CroweGrade:
    """Map the displacement ratio onto grades I-IV.

    I: r < 0.1, II: 0.1 <= r <= 0.15, III: 0.15 < r <= 0.20, IV: r > 0.2.
    """
    if not math.isfinite(r) or r < 0.0:
        raise InvalidRatio(f"ratio must be finite and >= 0, got {r!r}")
    if r < 0.1:
        return CroweGrade.I
    if r <= 0.15:
        return CroweGrade.II
    if r <= 0.20:
        return CroweGrade.III
    return CroweGrade.IV


def measure_hip(
    annotation: Union["PelvisAnnotation", KeypointsPair], side: HipSide
) -> AngleMeasurements:
    """Compute every measurement for one hip of an annotated pelvis.

    Accepts a full annotation or a bare keypoints pair; the frame always
    needs both hips (teardrops for the axes, F/G points for the pelvic
    height). DegenerateGeometry errors name the offending landmarks.
    """
    pair: KeypointsPair = getattr(annotation, "keypoints", annotation)
    right, left = pair.right, pair.left
    frame = build_reference_frame(right.teardrop_A, left.teardrop_A)
    hip = pair.for_side(side)

    try:
        ce = ce_angle(frame, side, hip.fh_center_B, hip.lat_sourcil_C)
        tonnis = tonnis_angle(frame, side, hip.lat_sourcil_C, hip.med_sourcil_D)
        sharp = sharp_angle(frame, hip.teardrop_A, hip.lat_sourcil_C)
    except DegenerateGeometry as exc:
        raise DegenerateGeometry(f"{side.value} hip: {exc}") from None
    displacement = proximal_displacement(frame, hip.fhn_junction_E)
    height = pelvic_height(
        frame,
        right.inf_ischium_F,
        left.inf_ischium_F,
        right.sup_ilium_G,
        left.sup_ilium_G,
    )
    return AngleMeasurements(
        side=side,
        ce_deg=ce,
        tonnis_deg=tonnis,
        sharp_deg=sharp,
        proximal_displacement_px=displacement,
        pelvic_height_px=height,
        crowe_ratio_r=crowe_ratio(displacement, height),
    )


def measure_pelvis(annotation: Union["PelvisAnnotation", KeypointsPair]):
    """Measurements for both hips, keyed by side."""
    return {side: measure_hip(annotation, side) for side in HipSide}
