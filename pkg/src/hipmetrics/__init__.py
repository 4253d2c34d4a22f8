"""Hip dysplasia measurement, scoring, and evaluation toolkit.

From fourteen named pelvic landmarks this package computes the classic
radiological angles (center-edge, Tonnis, Sharp), the proximal displacement
ratio and its severity grade, and an additive three-angle scoring verdict;
it also ships the full evaluation stack (keypoint similarity with fitted
falloff constants, AP/AR sweeps, kappa, ICC, difference limits, focal
keypoint loss) plus dataset tooling, a CLI, and a review HTTP service.
"""

from .detection import (
    FocalLossInput,
    KeypointMask,
    binary_mask,
    cross_entropy_loss,
    focal_keypoint_loss,
    focal_loss_gradient,
    heatmap_mask,
)
from .data import (
    PelvisAnnotation,
    Study,
    fuse_ground_truth,
    parse_dataset,
    serialize_dataset,
)
from .geometry import (
    AngleMeasurements,
    CroweGrade,
    HipKeypoints,
    HipSide,
    KeypointsPair,
    Point2D,
    ReferenceFrame,
    build_reference_frame,
    ce_angle,
    crowe_grade,
    crowe_ratio,
    measure_hip,
    measure_pelvis,
    pelvic_height,
    proximal_displacement,
    sharp_angle,
    tonnis_angle,
)
from .metrics import (
    DEFAULT_K_CONSTANTS,
    DEFAULT_OKS_THRESHOLDS,
    AgreementReport,
    BlandAltman,
    KConstants,
    KeypointDetection,
    KeypointTruth,
    OksInput,
    bland_altman,
    cohen_kappa,
    confusion_f1,
    estimate_k_constants,
    icc_absolute_agreement,
    kappa_from_counts,
    map_mar,
    oks,
)
from .scoring import (
    AngleClass,
    AngleKind,
    AngleRanges,
    Diagnosis,
    ScoringParams,
    classify_angle,
    default_params,
    default_ranges,
    fit_scoring_params,
    score_hip,
)
from .synth import (
    AngleDistributions,
    AngleTargets,
    PelvisTemplate,
    synth_annotation,
    synth_dataset,
    synth_hip,
)

__version__ = "0.1.0"
