"""Shared measurement/diagnosis plumbing for the CLI and the HTTP service.

Both surfaces compute through these helpers so their numbers are identical
by construction; formatting is fixed at six decimal places everywhere.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

from .data import Study, format_float
from .geometry import (
    AngleMeasurements,
    HipSide,
    KeypointsPair,
    crowe_grade,
    measure_hip,
)
from .scoring import (
    ANGLE_ORDER,
    AngleRanges,
    Diagnosis,
    ScoringParams,
    default_params,
    score_hip,
)

# Row order: right hip first, then left, per study.
SIDE_ORDER = (HipSide.RIGHT, HipSide.LEFT)


def measure_both(pair_or_annotation) -> Dict[HipSide, AngleMeasurements]:
    return {side: measure_hip(pair_or_annotation, side) for side in SIDE_ORDER}


def diagnose_both(
    pair_or_annotation,
    params: Optional[ScoringParams] = None,
    ranges: Optional[AngleRanges] = None,
) -> Dict[HipSide, Tuple[AngleMeasurements, Diagnosis]]:
    params = params or default_params()
    out: Dict[HipSide, Tuple[AngleMeasurements, Diagnosis]] = {}
    for side in SIDE_ORDER:
        m = measure_hip(pair_or_annotation, side)
        out[side] = (m, score_hip(m, params, ranges))
    return out


def measurement_row(study_id: str, m: AngleMeasurements) -> Dict[str, str]:
    return {
        "study_id": study_id,
        "side": m.side.value,
        "ce_deg": format_float(m.ce_deg),
        "tonnis_deg": format_float(m.tonnis_deg),
        "sharp_deg": format_float(m.sharp_deg),
        "displacement_px": format_float(m.proximal_displacement_px),
        "pelvic_height_px": format_float(m.pelvic_height_px),
        "crowe_r": format_float(m.crowe_ratio_r),
        "crowe_grade": crowe_grade(m.crowe_ratio_r).label,
    }


def diagnosis_row(study_id: str, m: AngleMeasurements, d: Diagnosis) -> Dict[str, str]:
    row = measurement_row(study_id, m)
    # staging is reported only for positive verdicts
    row["crowe_grade"] = d.crowe.label if d.crowe is not None else ""
    for kind in ANGLE_ORDER:
        row[f"{kind.value}_class"] = d.per_angle_class[kind].value
    row["total_score"] = str(d.total_score)
    row["verdict"] = "present" if d.ddh_present else "absent"
    return row


def measurements_payload(m: AngleMeasurements) -> dict:
    """JSON-ready measurements; `display` carries the 6-decimal strings."""
    values = {
        "ce_deg": m.ce_deg,
        "tonnis_deg": m.tonnis_deg,
        "sharp_deg": m.sharp_deg,
        "displacement_px": m.proximal_displacement_px,
        "pelvic_height_px": m.pelvic_height_px,
        "crowe_r": m.crowe_ratio_r,
    }
    return {
        "side": m.side.value,
        **values,
        "display": {key: format_float(val) for key, val in values.items()},
    }


def diagnosis_payload(d: Diagnosis) -> dict:
    return {
        "side": d.side.value,
        "per_angle_class": {k.value: d.per_angle_class[k].value for k in ANGLE_ORDER},
        "per_angle_score": {k.value: d.per_angle_score[k] for k in ANGLE_ORDER},
        "total_score": d.total_score,
        "verdict": "present" if d.ddh_present else "absent",
        "crowe_grade": d.crowe.label if d.crowe is not None else None,
    }


def study_reference_pair(study: Study) -> KeypointsPair:
    return study.reference_annotation().keypoints


def labeled_measurements(
    studies: Sequence[Study], exclude_other: bool = True
) -> List[Tuple[AngleMeasurements, bool]]:
    """(measurements, is-positive) pairs for fitting, from labeled hips.

    Hips without a diagnosis are skipped; "other" hips are excluded from
    fitting by default since agreement against them is undefined.
    """
    pairs: List[Tuple[AngleMeasurements, bool]] = []
    for study in studies:
        ann = study.reference_annotation()
        if not ann.diagnosis:
            continue
        for side in SIDE_ORDER:
            label = ann.diagnosis.get(side)
            if label is None:
                continue
            if label == "other" and exclude_other:
                continue
            pairs.append((measure_hip(ann, side), label == "ddh"))
    return pairs
