"""Evaluation statistics: keypoint similarity, detection AP/AR sweeps, and
agreement measures (kappa, intraclass correlation, difference limits,
confusion/F1).

Keypoint similarity is a Gaussian of the prediction-truth distance,
normalized by the object scale s (square root of the pelvic bounding-box
area) and a per-keypoint falloff constant k:

    similarity = exp(-d^2 / (2 s^2 k^2))

The falloff constants are twice the normalized repeat-labeling spread,
estimated from redundantly annotated studies. A bundled table of the 14
defaults ships below; all are overridable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import f as f_dist

from .errors import (
    DegenerateAgreement,
    DegenerateConstant,
    DegenerateVariance,
    EmptyGroundTruth,
    InsufficientData,
    InsufficientRedundancy,
    InvalidScale,
    SchemaError,
)
from .geometry import KEYPOINT_FIELDS, KEYPOINT_NAMES, HipSide, KeypointsPair, Point2D

# Threshold sweep 0.50, 0.55, ..., 0.95.
DEFAULT_OKS_THRESHOLDS: Tuple[float, ...] = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


# --- keypoint similarity ---------------------------------------------------


@dataclass(frozen=True)
class OksInput:
    """Distance d (px), object scale s (px), falloff constant k."""

    d: float
    s: float
    k: float


def oks(inp: OksInput) -> float:
    """Gaussian keypoint similarity in (0, 1]; 1 exactly when d = 0."""
    if not (inp.s > 0.0 and math.isfinite(inp.s)):
        raise InvalidScale(f"object scale must be positive and finite, got {inp.s!r}")
    if not (inp.k > 0.0 and math.isfinite(inp.k)):
        raise InvalidScale(f"keypoint constant must be positive and finite, got {inp.k!r}")
    if not (inp.d >= 0.0 and math.isfinite(inp.d)):
        raise ValueError(f"distance must be finite and >= 0, got {inp.d!r}")
    return math.exp(-(inp.d * inp.d) / (2.0 * inp.s * inp.s * inp.k * inp.k))


@dataclass(frozen=True)
class KConstants:
    """Per-keypoint similarity falloff constants, one for each of the 14 landmarks."""

    values: Mapping[Tuple[HipSide, str], float]

    def __post_init__(self):
        for side in HipSide:
            for name in KEYPOINT_NAMES:
                k = self.values.get((side, name))
                if k is None:
                    raise ValueError(f"missing constant for {side.value}.{name}")
                if not (k > 0.0 and math.isfinite(k)):
                    raise ValueError(f"constant for {side.value}.{name} must be positive, got {k!r}")

    def get(self, side: HipSide, name: str) -> float:
        return self.values[(side, name)]

    def to_text(self) -> str:
        lines = ["# keypoint similarity constants"]
        for side in HipSide:
            for name in KEYPOINT_NAMES:
                lines.append(f"{side.value}.{name} = {self.values[(side, name)]:.6f}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "KConstants":
        values: Dict[Tuple[HipSide, str], float] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, val = line.partition("=")
            if not eq:
                raise SchemaError(f"constants line {lineno}: expected 'side.keypoint = value'")
            try:
                side_name, kp_name = key.strip().split(".", 1)
                values[(HipSide(side_name), kp_name)] = float(val.strip())
            except (ValueError, KeyError):
                raise SchemaError(f"constants line {lineno}: cannot parse {raw!r}") from None
        return KConstants(values=values)


DEFAULT_K_CONSTANTS = KConstants(
    values={
        (HipSide.RIGHT, "teardrop"): 0.0080,
        (HipSide.RIGHT, "fh_center"): 0.0072,
        (HipSide.RIGHT, "lat_sourcil"): 0.0098,
        (HipSide.RIGHT, "med_sourcil"): 0.0218,
        (HipSide.RIGHT, "fhn_junction"): 0.0097,
        (HipSide.RIGHT, "inf_ischium"): 0.0331,
        (HipSide.RIGHT, "sup_ilium"): 0.0222,
        (HipSide.LEFT, "teardrop"): 0.0087,
        (HipSide.LEFT, "fh_center"): 0.0076,
        (HipSide.LEFT, "lat_sourcil"): 0.0110,
        (HipSide.LEFT, "med_sourcil"): 0.0165,
        (HipSide.LEFT, "fhn_junction"): 0.0086,
        (HipSide.LEFT, "inf_ischium"): 0.0318,
        (HipSide.LEFT, "sup_ilium"): 0.0250,
    }
)


def estimate_k_constants(
    redundant: Sequence[Tuple[Sequence[object], float]],
) -> KConstants:
    """Falloff constants from repeat annotations.

    ``redundant`` holds (repeats, bbox_area) per study, where each repeat
    exposes ``.right``/``.left`` hip keypoints (a keypoints pair or a full
    annotation). Distances are measured from each repeat to the per-study
    mean location of that keypoint; the constant is twice the root mean of
    d^2/s^2 pooled over repeats and studies. Studies with fewer than two
    repeats carry no spread information and are skipped.
    """
    sq_sums: Dict[Tuple[HipSide, str], float] = {}
    counts: Dict[Tuple[HipSide, str], int] = {}
    for side in HipSide:
        for name in KEYPOINT_NAMES:
            sq_sums[(side, name)] = 0.0
            counts[(side, name)] = 0

    usable = 0
    for repeats, area in redundant:
        if len(repeats) < 2:
            continue
        if not (area > 0.0 and math.isfinite(area)):
            raise InvalidScale(f"bounding-box area must be positive, got {area!r}")
        usable += 1
        s_sq = float(area)  # s^2 = area, so d^2/s^2 = d^2/area
        for side in HipSide:
            for name in KEYPOINT_NAMES:
                field = KEYPOINT_FIELDS[name]
                pts = [
                    getattr(_pair_of(rep).for_side(side), field) for rep in repeats
                ]
                mx = sum(p.x for p in pts) / len(pts)
                my = sum(p.y for p in pts) / len(pts)
                for p in pts:
                    d_sq = (p.x - mx) ** 2 + (p.y - my) ** 2
                    sq_sums[(side, name)] += d_sq / s_sq
                    counts[(side, name)] += 1
    if usable == 0:
        raise InsufficientRedundancy("no study carries two or more repeat annotations")

    values: Dict[Tuple[HipSide, str], float] = {}
    for key, total in sq_sums.items():
        sigma = math.sqrt(total / counts[key])
        k = 2.0 * sigma
        if k == 0.0:
            side, name = key
            raise DegenerateConstant(
                f"all repeats identical for {side.value}.{name}; constant would be 0"
            )
        values[key] = k
    return KConstants(values=values)


def _pair_of(obj) -> KeypointsPair:
    return getattr(obj, "keypoints", obj)


# --- detection AP / AR sweep ------------------------------------------------


@dataclass(frozen=True)
class KeypointTruth:
    study_id: str
    side: HipSide
    keypoint: str
    location: Point2D
    scale: float  # s, square root of the pelvic bounding-box area


@dataclass(frozen=True)
class KeypointDetection:
    study_id: str
    side: HipSide
    keypoint: str
    location: Point2D
    score: float = 1.0


@dataclass(frozen=True)
class MapMarResult:
    map: float
    mar: float
    per_threshold: Tuple[Tuple[float, float, float], ...]  # (threshold, AP, AR)
    per_keypoint: Mapping[Tuple[HipSide, str], Tuple[float, float]]  # mean AP, AR over thresholds


def _ap_all_points(flags: Sequence[bool], n_truth: int) -> float:
    """Area under the ranked precision-recall curve, all-points interpolation."""
    if n_truth == 0:
        return 0.0
    precisions: List[float] = []
    recalls: List[float] = []
    tp = fp = 0
    for flag in flags:
        if flag:
            tp += 1
        else:
            fp += 1
        precisions.append(tp / (tp + fp))
        recalls.append(tp / n_truth)
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    ap = 0.0
    prev_recall = 0.0
    for p, r in zip(precisions, recalls):
        ap += (r - prev_recall) * p
        prev_recall = r
    return ap


def map_mar(
    detections: Sequence[KeypointDetection],
    truth: Sequence[KeypointTruth],
    k: Optional[KConstants] = None,
    thresholds: Sequence[float] = DEFAULT_OKS_THRESHOLDS,
) -> MapMarResult:
    """Similarity-thresholded AP/AR sweep over the 14 keypoint categories.

    At each threshold a detection counts as a true positive when its
    similarity strictly exceeds the threshold and its ground-truth keypoint
    is not already matched by a higher-scored detection; everything else is
    a false positive, and unmatched ground truths are false negatives.
    AP integrates the score-ranked precision-recall curve; AR is the final
    recall. Both average over thresholds (and keypoint categories).
    """
    if not truth:
        raise EmptyGroundTruth("no ground-truth keypoints to evaluate against")
    if not thresholds:
        raise ValueError("thresholds must be nonempty")
    for t in thresholds:
        if not (0.0 < t < 1.0):
            raise ValueError(f"thresholds must lie in (0, 1), got {t!r}")
    k = k or DEFAULT_K_CONSTANTS

    truth_by_key: Dict[Tuple[str, HipSide, str], KeypointTruth] = {}
    for entry in truth:
        key = (entry.study_id, entry.side, entry.keypoint)
        if key in truth_by_key:
            raise SchemaError(f"duplicate ground-truth keypoint {key}")
        truth_by_key[key] = entry

    # similarity per detection, grouped by ground-truth keypoint
    groups: Dict[Tuple[str, HipSide, str], List[Tuple[float, float]]] = {}
    for det in detections:
        key = (det.study_id, det.side, det.keypoint)
        ref = truth_by_key.get(key)
        if ref is None:
            raise SchemaError(f"detection references unknown ground truth {key}")
        d = det.location.distance_to(ref.location)
        sim = oks(OksInput(d=d, s=ref.scale, k=k.get(det.side, det.keypoint)))
        groups.setdefault(key, []).append((det.score, sim))

    categories = sorted(
        {(side, name) for (_, side, name) in truth_by_key},
        key=lambda c: (c[0].value, c[1]),
    )
    per_threshold: List[Tuple[float, float, float]] = []
    cat_ap_sums = {c: 0.0 for c in categories}
    cat_ar_sums = {c: 0.0 for c in categories}
    for t in thresholds:
        ap_values = []
        ar_values = []
        for cat in categories:
            side, name = cat
            n_truth = sum(1 for key in truth_by_key if key[1] is side and key[2] == name)
            ranked: List[Tuple[float, str, bool]] = []
            total_tp = 0
            for key, dets in groups.items():
                if key[1] is not side or key[2] != name:
                    continue
                # score-desc greedy match; among score ties try the best
                # similarity first
                ordered = sorted(dets, key=lambda sc: (-sc[0], -sc[1]))
                matched = False
                for score, sim in ordered:
                    is_tp = (not matched) and sim > t
                    matched = matched or is_tp
                    ranked.append((score, key[0], is_tp))
                    total_tp += 1 if is_tp else 0
            ranked.sort(key=lambda item: (-item[0], item[1]))
            flags = [is_tp for _, _, is_tp in ranked]
            ap_values.append(_ap_all_points(flags, n_truth))
            ar_values.append(total_tp / n_truth if n_truth else 0.0)
            cat_ap_sums[cat] += ap_values[-1]
            cat_ar_sums[cat] += ar_values[-1]
        per_threshold.append((t, float(np.mean(ap_values)), float(np.mean(ar_values))))

    n_t = len(thresholds)
    per_keypoint = {
        cat: (cat_ap_sums[cat] / n_t, cat_ar_sums[cat] / n_t) for cat in categories
    }
    return MapMarResult(
        map=float(np.mean([ap for _, ap, _ in per_threshold])),
        mar=float(np.mean([ar for _, _, ar in per_threshold])),
        per_threshold=tuple(per_threshold),
        per_keypoint=per_keypoint,
    )


# --- agreement statistics ----------------------------------------------------


def kappa_from_counts(counts: Sequence[Sequence[float]]) -> float:
    """Chance-corrected agreement from a square cross-tabulation."""
    table = np.asarray(counts, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] != table.shape[1]:
        raise ValueError(f"counts must be square, got shape {table.shape}")
    n = table.sum()
    if n <= 0:
        raise InsufficientData("empty cross-tabulation")
    po = float(np.trace(table)) / n
    pe = float((table.sum(axis=1) * table.sum(axis=0)).sum()) / (n * n)
    if pe >= 1.0:
        raise DegenerateAgreement("both raters constant on one label; kappa undefined")
    return (po - pe) / (1.0 - pe)


def cohen_kappa(a: Sequence, b: Sequence) -> float:
    """Cohen's kappa between two equal-length label sequences."""
    if len(a) != len(b):
        raise ValueError(f"sequences differ in length: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise InsufficientData("empty label sequences")
    labels = sorted({*a, *b}, key=str)
    index = {lab: i for i, lab in enumerate(labels)}
    table = np.zeros((len(labels), len(labels)), dtype=np.float64)
    for la, lb in zip(a, b):
        table[index[la], index[lb]] += 1
    return kappa_from_counts(table)


@dataclass(frozen=True)
class IccResult:
    icc: float
    ci95: Tuple[float, float]


def icc_absolute_agreement(matrix: Sequence[Sequence[float]]) -> IccResult:
    """Two-way random-effects, absolute-agreement, single-measurement ICC.

    Rows are subjects, columns raters. The point estimate comes from the
    two-way ANOVA mean squares; the 95% CI uses the standard F-distribution
    bounds with a Satterthwaite denominator degree of freedom.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D ratings matrix, got ndim={x.ndim}")
    n, k = x.shape
    if n < 2 or k < 2:
        raise InsufficientData(f"need >= 2 subjects and >= 2 raters, got {n}x{k}")
    if not np.all(np.isfinite(x)):
        raise ValueError("ratings must be finite (no missing cells)")
    if np.all(x == x.flat[0]):
        raise DegenerateVariance("all ratings identical; correlation undefined")

    grand = x.mean()
    row_means = x.mean(axis=1)
    col_means = x.mean(axis=0)
    msr = k * ((row_means - grand) ** 2).sum() / (n - 1)
    msc = n * ((col_means - grand) ** 2).sum() / (k - 1)
    residual = x - row_means[:, None] - col_means[None, :] + grand
    mse = (residual ** 2).sum() / ((n - 1) * (k - 1))

    icc = (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n)

    if 1.0 - icc < 1e-12:
        return IccResult(icc=float(icc), ci95=(float(icc), float(icc)))

    a = k * icc / (n * (1.0 - icc))
    b = 1.0 + k * icc * (n - 1) / (n * (1.0 - icc))
    num = (a * msc + b * mse) ** 2
    den = (a * msc) ** 2 / (k - 1) + (b * mse) ** 2 / ((n - 1) * (k - 1))
    v = num / den if den > 0 else float(n - 1)
    # Satterthwaite df degenerates when the estimate is <= 0; the interval
    # carries no information there, so fall back to the full range
    if not (math.isfinite(v) and v > 0):
        return IccResult(icc=float(icc), ci95=(-1.0, 1.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        f_lower = f_dist.ppf(0.975, n - 1, v)
        f_upper = f_dist.ppf(0.975, v, n - 1)
        lo = n * (msr - f_lower * mse) / (
            f_lower * (k * msc + (k * n - k - n) * mse) + n * msr
        )
        hi = n * (f_upper * msr - mse) / (
            k * msc + (k * n - k - n) * mse + n * f_upper * msr
        )
    if not math.isfinite(lo):
        lo = -1.0
    if not math.isfinite(hi):
        hi = 1.0
    return IccResult(icc=float(icc), ci95=(float(max(lo, -1.0)), float(min(hi, 1.0))))


@dataclass(frozen=True)
class BlandAltman:
    mean_diff: float
    sd_diff: float
    loa_low: float
    loa_high: float


def bland_altman(pairs: Sequence[Tuple[float, float]]) -> BlandAltman:
    """Bias and 95% limits of agreement for (measured, reference) pairs."""
    if len(pairs) < 2:
        raise InsufficientData(f"need >= 2 pairs, got {len(pairs)}")
    diffs = np.array([m - r for m, r in pairs], dtype=np.float64)
    mean = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    return BlandAltman(
        mean_diff=mean,
        sd_diff=sd,
        loa_low=mean - 1.96 * sd,
        loa_high=mean + 1.96 * sd,
    )


@dataclass(frozen=True)
class ConfusionResult:
    classes: Tuple
    matrix: np.ndarray  # rows = truth, columns = predicted
    f1_per_class: Tuple[float, ...]
    kappa: float  # NaN when chance agreement is 1


def confusion_f1(predicted: Sequence, truth: Sequence, classes: Sequence) -> ConfusionResult:
    """Confusion matrix, per-class F1, and overall kappa for grade sequences."""
    if len(predicted) != len(truth):
        raise ValueError(f"sequences differ in length: {len(predicted)} vs {len(truth)}")
    index = {c: i for i, c in enumerate(classes)}
    matrix = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for p, t in zip(predicted, truth):
        if p not in index or t not in index:
            raise ValueError(f"label outside the class list: {p!r} / {t!r}")
        matrix[index[t], index[p]] += 1
    f1 = []
    for i in range(len(classes)):
        tp = matrix[i, i]
        fp = matrix[:, i].sum() - tp
        fn = matrix[i, :].sum() - tp
        denom = 2 * tp + fp + fn
        f1.append(2.0 * tp / denom if denom > 0 else 0.0)
    try:
        kap = cohen_kappa(list(truth), list(predicted)) if len(truth) else float("nan")
    except DegenerateAgreement:
        kap = float("nan")
    return ConfusionResult(
        classes=tuple(classes),
        matrix=matrix,
        f1_per_class=tuple(f1),
        kappa=kap,
    )


@dataclass(frozen=True)
class AgreementReport:
    """Bundle of agreement statistics, serializable as flat key-value text."""

    icc: Optional[IccResult] = None
    kappa: Optional[float] = None
    bland_altman: Optional[BlandAltman] = None
    confusion: Optional[ConfusionResult] = None

    def to_pairs(self) -> List[Tuple[str, str]]:
        pairs: List[Tuple[str, str]] = []
        if self.icc is not None:
            pairs.append(("icc", f"{self.icc.icc:.6f}"))
            pairs.append(("icc_ci95_low", f"{self.icc.ci95[0]:.6f}"))
            pairs.append(("icc_ci95_high", f"{self.icc.ci95[1]:.6f}"))
        if self.kappa is not None:
            pairs.append(("kappa", f"{self.kappa:.6f}"))
        if self.bland_altman is not None:
            ba = self.bland_altman
            pairs.append(("mean_diff", f"{ba.mean_diff:.6f}"))
            pairs.append(("sd_diff", f"{ba.sd_diff:.6f}"))
            pairs.append(("loa_low", f"{ba.loa_low:.6f}"))
            pairs.append(("loa_high", f"{ba.loa_high:.6f}"))
        if self.confusion is not None:
            conf = self.confusion
            pairs.append(("confusion_kappa", f"{conf.kappa:.6f}"))
            for i, ci in enumerate(conf.classes):
                for j, cj in enumerate(conf.classes):
                    pairs.append((f"confusion[{ci}][{cj}]", str(int(conf.matrix[i, j]))))
            for i, ci in enumerate(conf.classes):
                pairs.append((f"f1[{ci}]", f"{conf.f1_per_class[i]:.6f}"))
        return pairs

    def to_report_text(self) -> str:
        return "".join(f"{key} = {value}\n" for key, value in self.to_pairs())

    def to_table_text(self) -> str:
        return "key,value\n" + "".join(f"{key},{value}\n" for key, value in self.to_pairs())
