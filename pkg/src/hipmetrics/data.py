"""Annotation schema, document I/O, ground-truth fusion, and table export.

Datasets are JSON documents versioned "hipmetrics/1":

    {
      "schema": "hipmetrics/1",
      "studies": [
        {
          "study_id": "...",
          "image": {"path": "...", "width": 1024, "height": 768},   # optional
          "annotations": [
            {
              "annotator": "...",
              "bbox": [x, y, w, h],
              "keypoints": {
                "right": {"teardrop": [x, y], "fh_center": [...], ...},
                "left":  {...}
              },
              "diagnosis": {"right": "normal|ddh|other", "left": ...},  # optional
              "crowe": {"right": "I".."IV", "left": ...}                # optional
            }
          ],
          "ground_truth": { same shape, annotator "fused" }             # optional
        }
      ]
    }

Serialization is deterministic: fixed key order, two-space indent,
coordinates rounded to 1e-6, so serialize(parse(serialize(x))) is
byte-identical to serialize(x).
"""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import MissingKeypoint, NoMajorityWarning, SchemaError
from .geometry import (
    KEYPOINT_FIELDS,
    CroweGrade,
    HipKeypoints,
    HipSide,
    KeypointsPair,
    Point2D,
)

SCHEMA_VERSION = "hipmetrics/1"
DIAGNOSIS_LABELS = ("normal", "ddh", "other")
GROUND_TRUTH_ANNOTATOR = "fused"


@dataclass(frozen=True)
class ImageRef:
    path: str
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True)
class PelvisAnnotation:
    """One annotator's landmarks, bounding box, and optional labels."""

    annotator_id: str
    keypoints: KeypointsPair
    bbox: Tuple[float, float, float, float]  # x, y, w, h
    diagnosis: Optional[Dict[HipSide, str]] = None
    crowe: Optional[Dict[HipSide, CroweGrade]] = None

    def __post_init__(self):
        x, y, w, h = self.bbox
        if not (w > 0 and h > 0):
            raise ValueError(f"bbox must have positive extent, got w={w}, h={h}")
        if self.diagnosis:
            for side, label in self.diagnosis.items():
                if label not in DIAGNOSIS_LABELS:
                    raise ValueError(f"unknown diagnosis label {label!r} for {side.value}")

    def bbox_area(self) -> float:
        return self.bbox[2] * self.bbox[3]


@dataclass
class Study:
    study_id: str
    annotations: List[PelvisAnnotation] = field(default_factory=list)
    ground_truth: Optional[PelvisAnnotation] = None
    image: Optional[ImageRef] = None

    def reference_annotation(self) -> PelvisAnnotation:
        """Annotation the pipeline measures: fused ground truth first.

        Without a stored ground truth, a single annotation is used as-is
        and multiple annotations are fused coordinate-first.
        """
        if self.ground_truth is not None:
            return self.ground_truth
        if not self.annotations:
            raise SchemaError(f"study {self.study_id!r} has no annotations")
        if len(self.annotations) == 1:
            return self.annotations[0]
        return fuse_ground_truth(self.annotations)


# --- fusion -----------------------------------------------------------------


def _majority(labels: Sequence[str], what: str) -> str:
    votes = Counter(labels)
    top = votes.most_common()
    if len(top) > 1 and top[0][1] == top[1][1]:
        warnings.warn(
            f"{what}: diagnosis vote tied {dict(votes)}; falling back to 'other'",
            NoMajorityWarning,
            stacklevel=3,
        )
        return "other"
    return top[0][0]


def fuse_ground_truth(annotations: Sequence[PelvisAnnotation]) -> PelvisAnnotation:
    """Coordinate-wise mean of the annotators, majority-voted labels.

    Keypoints and the bounding box average component-wise; the per-side
    diagnosis takes the majority (ties resolve to "other" with a warning).
    """
    if not annotations:
        raise ValueError("need at least one annotation to fuse")
    n = len(annotations)

    def mean_point(side: HipSide, field_name: str) -> Point2D:
        xs = [getattr(a.keypoints.for_side(side), field_name) for a in annotations]
        return Point2D(sum(p.x for p in xs) / n, sum(p.y for p in xs) / n)

    hips = {}
    for side in HipSide:
        hips[side] = HipKeypoints(
            **{f: mean_point(side, f) for f in KEYPOINT_FIELDS.values()}
        )
    bbox = tuple(
        sum(a.bbox[i] for a in annotations) / n for i in range(4)
    )

    diagnosis = None
    voted = {
        side: [a.diagnosis[side] for a in annotations if a.diagnosis and side in a.diagnosis]
        for side in HipSide
    }
    if any(voted.values()):
        diagnosis = {
            side: _majority(labels, f"{side.value} hip")
            for side, labels in voted.items()
            if labels
        }

    return PelvisAnnotation(
        annotator_id=GROUND_TRUTH_ANNOTATOR,
        keypoints=KeypointsPair(right=hips[HipSide.RIGHT], left=hips[HipSide.LEFT]),
        bbox=bbox,
        diagnosis=diagnosis,
    )


# --- document parsing ---------------------------------------------------------


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    return obj[key]


def _coords(value, where: str) -> Point2D:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(c, (int, float)) for c in value)
    ):
        raise SchemaError(f"{where}: expected [x, y], got {value!r}")
    x, y = float(value[0]), float(value[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise SchemaError(f"{where}: coordinates must be finite")
    return Point2D(x, y)


def _hip_from_dict(obj, side: HipSide, where: str) -> HipKeypoints:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}.{side.value}: expected a keypoint object")
    fields = {}
    for name, field_name in KEYPOINT_FIELDS.items():
        if name not in obj:
            raise MissingKeypoint(f"{side.value}.{name}")
        fields[field_name] = _coords(obj[name], f"{where}.{side.value}.{name}")
    return HipKeypoints(**fields)


def keypoints_pair_from_dict(obj: dict, where: str = "keypoints") -> KeypointsPair:
    """Parse a {"right": {...}, "left": {...}} keypoint object."""
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    for side in HipSide:
        if side.value not in obj:
            raise SchemaError(f"{where}: missing side {side.value!r}")
    return KeypointsPair(
        right=_hip_from_dict(obj["right"], HipSide.RIGHT, where),
        left=_hip_from_dict(obj["left"], HipSide.LEFT, where),
    )


def keypoints_pair_to_dict(pair: KeypointsPair) -> dict:
    return {"right": _hip_to_dict(pair.right), "left": _hip_to_dict(pair.left)}


def annotation_from_dict(obj: dict, where: str) -> PelvisAnnotation:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an annotation object")
    annotator = _require(obj, "annotator", where)
    bbox_raw = _require(obj, "bbox", where)
    if not (isinstance(bbox_raw, (list, tuple)) and len(bbox_raw) == 4):
        raise SchemaError(f"{where}.bbox: expected [x, y, w, h], got {bbox_raw!r}")
    bbox = tuple(float(v) for v in bbox_raw)
    if not (bbox[2] > 0 and bbox[3] > 0):
        raise SchemaError(f"{where}.bbox: width and height must be positive")
    pair = keypoints_pair_from_dict(_require(obj, "keypoints", where), f"{where}.keypoints")

    diagnosis = None
    if obj.get("diagnosis") is not None:
        diagnosis = {}
        for side in HipSide:
            label = obj["diagnosis"].get(side.value)
            if label is None:
                continue
            if label not in DIAGNOSIS_LABELS:
                raise SchemaError(
                    f"{where}.diagnosis.{side.value}: unknown label {label!r}"
                )
            diagnosis[side] = label

    crowe = None
    if obj.get("crowe") is not None:
        crowe = {}
        for side in HipSide:
            grade = obj["crowe"].get(side.value)
            if grade is None:
                continue
            try:
                crowe[side] = CroweGrade[grade]
            except KeyError:
                raise SchemaError(
                    f"{where}.crowe.{side.value}: unknown grade {grade!r}"
                ) from None

    return PelvisAnnotation(
        annotator_id=str(annotator),
        keypoints=pair,
        bbox=bbox,
        diagnosis=diagnosis,
        crowe=crowe,
    )


def study_from_dict(obj: dict, where: str = "study") -> Study:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected a study object")
    study_id = str(_require(obj, "study_id", where))

    image = None
    if obj.get("image") is not None:
        img = obj["image"]
        for key in ("path", "width", "height"):
            _require(img, key, f"{where}.image")
        try:
            image = ImageRef(path=str(img["path"]), width=int(img["width"]), height=int(img["height"]))
        except ValueError as exc:
            raise SchemaError(f"{where}.image: {exc}") from None

    annotations = [
        annotation_from_dict(a, f"{where}.annotations[{i}]")
        for i, a in enumerate(obj.get("annotations", []))
    ]

    ground_truth = None
    if obj.get("ground_truth") is not None:
        ground_truth = annotation_from_dict(obj["ground_truth"], f"{where}.ground_truth")
        if ground_truth.annotator_id != GROUND_TRUTH_ANNOTATOR:
            raise SchemaError(
                f"{where}.ground_truth.annotator: must be {GROUND_TRUTH_ANNOTATOR!r},"
                f" got {ground_truth.annotator_id!r}"
            )

    study = Study(study_id=study_id, annotations=annotations, ground_truth=ground_truth, image=image)
    if image is not None:
        _check_bounds(study, where)
    return study


def _check_bounds(study: Study, where: str):
    w, h = study.image.width, study.image.height
    everything = list(study.annotations)
    if study.ground_truth is not None:
        everything.append(study.ground_truth)
    for ann in everything:
        for side in HipSide:
            hip = ann.keypoints.for_side(side)
            for name, field_name in KEYPOINT_FIELDS.items():
                p = getattr(hip, field_name)
                if not (0 <= p.x <= w and 0 <= p.y <= h):
                    raise SchemaError(
                        f"{where}: keypoint {side.value}.{name} at ({p.x}, {p.y}) "
                        f"outside image {w}x{h} (annotator {ann.annotator_id!r})"
                    )


def parse_dataset(source: Union[str, Path]) -> List[Study]:
    """Parse a dataset document from a path; raises SchemaError with field paths."""
    path = Path(source)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return dataset_from_dict(doc, where=str(path))


def dataset_from_dict(doc: dict, where: str = "dataset") -> List[Study]:
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: expected a top-level object")
    version = _require(doc, "schema", where)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{where}: unsupported schema {version!r}, expected {SCHEMA_VERSION!r}")
    studies_raw = _require(doc, "studies", where)
    if not isinstance(studies_raw, list):
        raise SchemaError(f"{where}.studies: expected a list")
    studies = [
        study_from_dict(s, f"{where}.studies[{i}]") for i, s in enumerate(studies_raw)
    ]
    seen = set()
    for s in studies:
        if s.study_id in seen:
            raise SchemaError(f"{where}: duplicate study_id {s.study_id!r}")
        seen.add(s.study_id)
    return studies


# --- serialization -------------------------------------------------------------


def _num(value: float):
    """Round to 1e-6 and collapse integral floats for stable JSON output."""
    r = round(float(value), 6)
    return int(r) if r == int(r) else r


def _hip_to_dict(hip: HipKeypoints) -> dict:
    return {
        name: [_num(getattr(hip, field_name).x), _num(getattr(hip, field_name).y)]
        for name, field_name in KEYPOINT_FIELDS.items()
    }


def annotation_to_dict(ann: PelvisAnnotation) -> dict:
    out = {
        "annotator": ann.annotator_id,
        "bbox": [_num(v) for v in ann.bbox],
        "keypoints": {
            "right": _hip_to_dict(ann.keypoints.right),
            "left": _hip_to_dict(ann.keypoints.left),
        },
    }
    if ann.diagnosis:
        out["diagnosis"] = {
            side.value: ann.diagnosis[side] for side in HipSide if side in ann.diagnosis
        }
    if ann.crowe:
        out["crowe"] = {
            side.value: ann.crowe[side].label for side in HipSide if side in ann.crowe
        }
    return out


def study_to_dict(study: Study) -> dict:
    out = {"study_id": study.study_id}
    if study.image is not None:
        out["image"] = {
            "path": study.image.path,
            "width": study.image.width,
            "height": study.image.height,
        }
    out["annotations"] = [annotation_to_dict(a) for a in study.annotations]
    if study.ground_truth is not None:
        out["ground_truth"] = annotation_to_dict(study.ground_truth)
    return out


def dumps_dataset(studies: Sequence[Study]) -> str:
    doc = {"schema": SCHEMA_VERSION, "studies": [study_to_dict(s) for s in studies]}
    return json.dumps(doc, indent=2) + "\n"


def serialize_dataset(studies: Sequence[Study], target: Union[str, Path]) -> None:
    Path(target).write_text(dumps_dataset(studies))


# --- measurement table ----------------------------------------------------------

MEASURE_COLUMNS = (
    "study_id",
    "side",
    "ce_deg",
    "tonnis_deg",
    "sharp_deg",
    "displacement_px",
    "pelvic_height_px",
    "crowe_r",
    "crowe_grade",
)

DIAGNOSIS_COLUMNS = MEASURE_COLUMNS + (
    "ce_class",
    "tonnis_class",
    "sharp_class",
    "total_score",
    "verdict",
)


def format_float(value: float) -> str:
    return f"{value:.6f}"


def rows_to_csv(rows: Sequence[Dict[str, str]], columns: Sequence[str]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(row[c] for c in columns))
    return "\n".join(lines) + "\n"
