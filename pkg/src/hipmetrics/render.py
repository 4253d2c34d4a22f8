"""SVG overlays: landmarks, reference lines, and the per-hip verdict block.

SVG keeps golden tests text-diffable. Angle values whose class is
dysplastic are highlighted in red, mirroring the clinical convention of
flagging out-of-range measurements.
"""

from __future__ import annotations

from typing import Optional

from .data import Study
from .geometry import (
    KEYPOINT_FIELDS,
    HipSide,
    Point2D,
    build_reference_frame,
)
from .pipeline import SIDE_ORDER, diagnose_both
from .scoring import ANGLE_ORDER, AngleClass, AngleRanges, ScoringParams

RED = "#c62828"
ACCENT = "#1565c0"
LINE = "#fdd835"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _line(a: Point2D, b: Point2D, stroke: str, dash: str = "", klass: str = "") -> str:
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    klass_attr = f' class="{klass}"' if klass else ""
    return (
        f'<line x1="{_fmt(a.x)}" y1="{_fmt(a.y)}" x2="{_fmt(b.x)}" y2="{_fmt(b.y)}"'
        f' stroke="{stroke}" stroke-width="1.5"{dash_attr}{klass_attr} />'
    )


def render_study_svg(
    study: Study,
    params: Optional[ScoringParams] = None,
    ranges: Optional[AngleRanges] = None,
) -> str:
    """Standalone SVG document for one study's reference annotation."""
    ann = study.reference_annotation()
    results = diagnose_both(ann, params, ranges)

    if study.image is not None:
        width, height = study.image.width, study.image.height
    else:
        x, y, w, h = ann.bbox
        width, height = int(x + w + 40), int(y + h + 120)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" data-study="{study.study_id}">',
        f'<rect width="{width}" height="{height}" fill="#111" />',
    ]
    if study.image is not None:
        parts.append(
            f'<image href="{study.image.path}" x="0" y="0" '
            f'width="{width}" height="{height}" />'
        )

    right = ann.keypoints.right
    left = ann.keypoints.left
    frame = build_reference_frame(right.teardrop_A, left.teardrop_A)
    vx, vy = frame.u_vertical

    # horizontal reference through the teardrops, stretched across both hips
    extent = 1.6 * right.teardrop_A.distance_to(left.teardrop_A)
    hx, hy = frame.u_horizontal
    mid = Point2D(
        (right.teardrop_A.x + left.teardrop_A.x) / 2.0,
        (right.teardrop_A.y + left.teardrop_A.y) / 2.0,
    )
    parts.append(
        _line(
            Point2D(mid.x - extent / 2 * hx, mid.y - extent / 2 * hy),
            Point2D(mid.x + extent / 2 * hx, mid.y + extent / 2 * hy),
            LINE,
            dash="6 4",
            klass="reference-horizontal",
        )
    )

    for side in SIDE_ORDER:
        hip = ann.keypoints.for_side(side)
        m, diag = results[side]
        b = hip.fh_center_B
        # vertical reference through the femoral head center
        span = 90.0
        parts.append(
            _line(
                Point2D(b.x - span * vx, b.y - span * vy),
                Point2D(b.x + span * vx, b.y + span * vy),
                ACCENT,
                dash="6 4",
                klass=f"reference-vertical-{side.value}",
            )
        )
        parts.append(_line(hip.fh_center_B, hip.lat_sourcil_C, ACCENT, klass="segment-ce"))
        parts.append(_line(hip.med_sourcil_D, hip.lat_sourcil_C, "#43a047", klass="segment-tonnis"))
        parts.append(_line(hip.teardrop_A, hip.lat_sourcil_C, "#8e24aa", klass="segment-sharp"))

        values = {"ce": m.ce_deg, "tonnis": m.tonnis_deg, "sharp": m.sharp_deg}
        anchor_x = hip.lat_sourcil_C.x + (-110.0 if side is HipSide.RIGHT else 18.0)
        text_y = hip.lat_sourcil_C.y - 40.0
        for kind in ANGLE_ORDER:
            is_ddh = diag.per_angle_class[kind] is AngleClass.DDH
            color = RED if is_ddh else "#eeeeee"
            klass = f"angle-{kind.value}" + (" ddh" if is_ddh else "")
            parts.append(
                f'<text x="{_fmt(anchor_x)}" y="{_fmt(text_y)}" fill="{color}" '
                f'font-size="12" class="{klass}" data-side="{side.value}">'
                f"{kind.value} {values[kind.value]:.1f}&#176;</text>"
            )
            text_y += 14.0

        verdict = "DDH present" if diag.ddh_present else "DDH absent"
        staging = f", Crowe {diag.crowe.label}" if diag.crowe is not None else ""
        vcolor = RED if diag.ddh_present else "#eeeeee"
        parts.append(
            f'<text x="{_fmt(anchor_x)}" y="{height - 18}" fill="{vcolor}" '
            f'font-size="13" class="verdict" data-side="{side.value}">'
            f"{side.value}: {verdict} (score {diag.total_score}{staging})</text>"
        )

    for side in SIDE_ORDER:
        hip = ann.keypoints.for_side(side)
        for name, field_name in KEYPOINT_FIELDS.items():
            p = getattr(hip, field_name)
            parts.append(
                f'<circle cx="{_fmt(p.x)}" cy="{_fmt(p.y)}" r="3" fill="{RED}" '
                f'class="keypoint" data-keypoint="{side.value}.{name}" />'
            )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
