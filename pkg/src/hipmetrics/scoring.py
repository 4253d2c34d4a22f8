"""Additive three-angle scoring rule for hip dysplasia and its fitting.

Each angle is classified as normal / borderline / dysplastic against fixed
clinical ranges, the classes map to integer scores, and the verdict is
"present" when the total reaches a threshold. The default rule scores
borderline as 1 everywhere and the dysplastic class as 3 for CE and 2 for
the other two angles, with threshold 5, so no single angle can trigger the
verdict alone.

Parameters can also be learned: an exhaustive grid search over score
assignments and thresholds picks the rule whose binary verdicts maximize
Cohen's kappa against labeled hips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .errors import DegenerateDataset, SchemaError
from .geometry import AngleMeasurements, CroweGrade, HipSide, crowe_grade


class AngleKind(Enum):
    CE = "ce"
    TONNIS = "tonnis"
    SHARP = "sharp"


class AngleClass(Enum):
    NORMAL = "normal"
    BORDERLINE = "borderline"
    DDH = "ddh"


# Index order used by the fitting kernel and the score tables.
ANGLE_ORDER: Tuple[AngleKind, ...] = (AngleKind.CE, AngleKind.TONNIS, AngleKind.SHARP)
CLASS_ORDER: Tuple[AngleClass, ...] = (AngleClass.NORMAL, AngleClass.BORDERLINE, AngleClass.DDH)


@dataclass(frozen=True)
class AngleRange:
    """Borderline band plus which side of it is the dysplastic one."""

    borderline_lo: float
    borderline_hi: float
    ddh_above: bool

    def __post_init__(self):
        if not self.borderline_lo < self.borderline_hi:
            raise ValueError("borderline_lo must be < borderline_hi")


@dataclass(frozen=True)
class AngleRanges:
    """Clinical class bands per angle; band endpoints classify as borderline."""

    ce: AngleRange = AngleRange(20.0, 25.0, ddh_above=False)
    tonnis: AngleRange = AngleRange(10.0, 13.0, ddh_above=True)
    sharp: AngleRange = AngleRange(42.0, 47.0, ddh_above=True)

    def for_kind(self, kind: AngleKind) -> AngleRange:
        return {AngleKind.CE: self.ce, AngleKind.TONNIS: self.tonnis, AngleKind.SHARP: self.sharp}[kind]


def default_ranges() -> AngleRanges:
    return AngleRanges()


def classify_angle(kind: AngleKind, value: float, ranges: Optional[AngleRanges] = None) -> AngleClass:
    """Normal / borderline / dysplastic classification of one angle value."""
    if not math.isfinite(value):
        raise ValueError(f"angle value must be finite, got {value!r}")
    band = (ranges or DEFAULT_RANGES).for_kind(kind)
    if band.borderline_lo <= value <= band.borderline_hi:
        return AngleClass.BORDERLINE
    beyond_hi = value > band.borderline_hi
    if band.ddh_above:
        return AngleClass.DDH if beyond_hi else AngleClass.NORMAL
    return AngleClass.NORMAL if beyond_hi else AngleClass.DDH


@dataclass(frozen=True)
class ScoringParams:
    """Integer scores per class per angle plus the decision threshold.

    Normal always scores 0. The dysplastic score must exceed the borderline
    score for every angle, and the threshold must be reachable.
    """

    borderline_score: Dict[AngleKind, int]
    ddh_score: Dict[AngleKind, int]
    threshold: int

    def __post_init__(self):
        for kind in ANGLE_ORDER:
            b = self.borderline_score[kind]
            d = self.ddh_score[kind]
            if not (isinstance(b, int) and isinstance(d, int)) or b < 0 or d < 1:
                raise ValueError(f"scores for {kind.value} must be ints with borderline >= 0, ddh >= 1")
            if d <= b:
                raise ValueError(f"ddh score must exceed borderline score for {kind.value}")
        max_total = sum(self.ddh_score[k] for k in ANGLE_ORDER)
        if not (isinstance(self.threshold, int) and 1 <= self.threshold <= max_total):
            raise ValueError(f"threshold must be in [1, {max_total}], got {self.threshold!r}")

    def score_for(self, kind: AngleKind, klass: AngleClass) -> int:
        if klass is AngleClass.NORMAL:
            return 0
        if klass is AngleClass.BORDERLINE:
            return self.borderline_score[kind]
        return self.ddh_score[kind]

    def max_total(self) -> int:
        return sum(self.ddh_score[k] for k in ANGLE_ORDER)

    def to_text(self) -> str:
        lines = ["# scoring parameters (normal always scores 0)"]
        for kind in ANGLE_ORDER:
            lines.append(f"{kind.value}.borderline = {self.borderline_score[kind]}")
            lines.append(f"{kind.value}.ddh = {self.ddh_score[kind]}")
        lines.append(f"threshold = {self.threshold}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "ScoringParams":
        values: Dict[str, int] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"params line {lineno}: expected 'key = value', got {raw!r}")
            key, _, val = line.partition("=")
            try:
                values[key.strip()] = int(val.strip())
            except ValueError:
                raise SchemaError(f"params line {lineno}: non-integer value {val.strip()!r}") from None
        try:
            return ScoringParams(
                borderline_score={k: values[f"{k.value}.borderline"] for k in ANGLE_ORDER},
                ddh_score={k: values[f"{k.value}.ddh"] for k in ANGLE_ORDER},
                threshold=values["threshold"],
            )
        except KeyError as exc:
            raise SchemaError(f"params file missing key {exc.args[0]!r}") from None


def default_params() -> ScoringParams:
    """Borderline 1 everywhere, dysplastic 3/2/2 (CE weighted), threshold 5."""
    return ScoringParams(
        borderline_score={k: 1 for k in ANGLE_ORDER},
        ddh_score={AngleKind.CE: 3, AngleKind.TONNIS: 2, AngleKind.SHARP: 2},
        threshold=5,
    )


DEFAULT_RANGES = AngleRanges()


@dataclass(frozen=True)
class Diagnosis:
    """Score breakdown and verdict for one hip."""

    side: HipSide
    per_angle_class: Dict[AngleKind, AngleClass]
    per_angle_score: Dict[AngleKind, int]
    total_score: int
    ddh_present: bool
    crowe: Optional[CroweGrade]


def classify_measurements(
    m: AngleMeasurements, ranges: Optional[AngleRanges] = None
) -> Dict[AngleKind, AngleClass]:
    return {
        AngleKind.CE: classify_angle(AngleKind.CE, m.ce_deg, ranges),
        AngleKind.TONNIS: classify_angle(AngleKind.TONNIS, m.tonnis_deg, ranges),
        AngleKind.SHARP: classify_angle(AngleKind.SHARP, m.sharp_deg, ranges),
    }


def score_hip(
    m: AngleMeasurements,
    params: Optional[ScoringParams] = None,
    ranges: Optional[AngleRanges] = None,
) -> Diagnosis:
    """Classify the three angles, sum scores, and decide the verdict.

    The severity grade from the displacement ratio is attached only when
    the verdict is positive; a negative hip carries no staging.
    """
    params = params or default_params()
    classes = classify_measurements(m, ranges)
    scores = {k: params.score_for(k, classes[k]) for k in ANGLE_ORDER}
    total = sum(scores.values())
    present = total >= params.threshold
    return Diagnosis(
        side=m.side,
        per_angle_class=classes,
        per_angle_score=scores,
        total_score=total,
        ddh_present=present,
        crowe=crowe_grade(m.crowe_ratio_r) if present else None,
    )


def verdict_for_classes(params: ScoringParams, classes: Sequence[AngleClass]) -> bool:
    """Verdict for an explicit (CE, Tonnis, Sharp) class triple."""
    total = sum(params.score_for(kind, klass) for kind, klass in zip(ANGLE_ORDER, classes))
    return total >= params.threshold


@dataclass(frozen=True)
class SearchSpace:
    """Grid for the parameter search; normal stays fixed at 0."""

    borderline_choices: Tuple[int, ...] = (0, 1, 2)
    ddh_choices: Tuple[int, ...] = (1, 2, 3, 4)


@dataclass(frozen=True)
class FitResult:
    params: ScoringParams
    train_kappa: float
    # (threshold, kappa) for every threshold of the selected score table,
    # so the agreement-vs-threshold curve can be re-plotted.
    threshold_curve: Tuple[Tuple[int, float], ...]


def _class_index_matrix(measurements: Sequence[AngleMeasurements], ranges: AngleRanges) -> np.ndarray:
    idx = np.empty((len(measurements), 3), dtype=np.int64)
    lut = {klass: i for i, klass in enumerate(CLASS_ORDER)}
    for row, m in enumerate(measurements):
        classes = classify_measurements(m, ranges)
        for col, kind in enumerate(ANGLE_ORDER):
            idx[row, col] = lut[classes[kind]]
    return idx


def _enumerate_candidates(space: SearchSpace) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All (per-angle borderline, ddh) score tables with ddh > borderline.

    Returns (combos, tables, sum_ddh): combos is (C, 6) ordered
    (ddh_ce, ddh_t, ddh_s, b_ce, b_t, b_s) for tie-breaking, tables is the
    (C, 3, 3) score lookup, sum_ddh the per-candidate maximal total.
    """
    pairs = [
        (d, b)
        for b in space.borderline_choices
        for d in space.ddh_choices
        if d > b
    ]
    combos = []
    for d_ce, b_ce in pairs:
        for d_t, b_t in pairs:
            for d_s, b_s in pairs:
                combos.append((d_ce, d_t, d_s, b_ce, b_t, b_s))
    combos = np.array(sorted(combos), dtype=np.int64)
    n = combos.shape[0]
    tables = np.zeros((n, 3, 3), dtype=np.int64)
    tables[:, :, 1] = combos[:, 3:6]
    tables[:, :, 2] = combos[:, 0:3]
    sum_ddh = combos[:, 0:3].sum(axis=1)
    return combos, tables, sum_ddh


def fit_scoring_params(
    dataset: Sequence[Tuple[AngleMeasurements, bool]],
    search_space: Optional[SearchSpace] = None,
    ranges: Optional[AngleRanges] = None,
) -> FitResult:
    """Exhaustive kappa-maximizing search over scores and thresholds.

    Ties break toward the lexicographically smallest
    (threshold, ddh_ce, ddh_tonnis, ddh_sharp, borderline_ce,
    borderline_tonnis, borderline_sharp), so equal-verdict rules resolve to
    one canonical representative and the result is independent of dataset
    order.
    """
    if not dataset:
        raise DegenerateDataset("empty dataset")
    labels = np.array([1 if lab else 0 for _, lab in dataset], dtype=np.int64)
    if labels.min() == labels.max():
        raise DegenerateDataset("dataset contains a single class; kappa is undefined")
    ranges = ranges or DEFAULT_RANGES
    space = search_space or SearchSpace()
    class_idx = _class_index_matrix([m for m, _ in dataset], ranges)
    combos, tables, sum_ddh = _enumerate_candidates(space)
    max_total = int(sum_ddh.max())

    kappas = _kernels.scoring_grid_kappa(class_idx, labels, tables, sum_ddh, max_total)

    best_kappa = np.nanmax(kappas)
    cand_idx, thr_idx = np.nonzero(kappas == best_kappa)
    # (threshold, ddh..., borderline...) lexicographic minimum among maximizers
    keys = [
        (int(thr_idx[i]) + 1, *map(int, combos[cand_idx[i]]))
        for i in range(len(cand_idx))
    ]
    best = min(range(len(keys)), key=keys.__getitem__)
    threshold = keys[best][0]
    d_ce, d_t, d_s, b_ce, b_t, b_s = keys[best][1:]
    params = ScoringParams(
        borderline_score={AngleKind.CE: b_ce, AngleKind.TONNIS: b_t, AngleKind.SHARP: b_s},
        ddh_score={AngleKind.CE: d_ce, AngleKind.TONNIS: d_t, AngleKind.SHARP: d_s},
        threshold=threshold,
    )
    row = kappas[cand_idx[best]]
    curve = tuple(
        (t, float(row[t - 1])) for t in range(1, int(sum_ddh[cand_idx[best]]) + 1)
    )
    return FitResult(params=params, train_kappa=float(best_kappa), threshold_curve=curve)
