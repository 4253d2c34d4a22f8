"""Synthetic pelvis construction by inverting the measurement definitions.

Given target values for the three angles and the displacement ratio, the
constructor places the seven landmarks of a hip so that measuring them
recovers the targets to better than 1e-9. The layout rests on a template
skeleton (teardrop span, pelvic height, segment lengths); template numbers
are plumbing constants for test geometry, not clinical anatomy.

Construction, for one hip with lateral unit L and superior unit V:

    A  = teardrop (template)
    C  = A + len_AC * (cos(sharp) L + sin(sharp) V)
    B  = C - len_BC * (sin(ce) L + cos(ce) V)
    D  = C - len_CD * (cos(tonnis) L + sin(tonnis) V)
    E  = A + jitter L + (r * height) V
    G  = A + jitter L + rise V            (rise fixed by the template)
    F  = A + jitter L + (rise - height) V

Segment lengths and lateral offsets may jitter freely (they cancel out of
every measurement); vertical template offsets must not, so they stay fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .data import GROUND_TRUTH_ANNOTATOR, PelvisAnnotation, Study
from .errors import InvalidNoiseRate, InvalidTarget
from .geometry import (
    HipKeypoints,
    HipSide,
    KeypointsPair,
    Point2D,
    build_reference_frame,
)
from .scoring import (
    ANGLE_ORDER,
    AngleRanges,
    ScoringParams,
    classify_angle,
    default_params,
    verdict_for_classes,
)


@dataclass(frozen=True)
class AngleTargets:
    ce_deg: float
    tonnis_deg: float
    sharp_deg: float
    crowe_r: float

    def __post_init__(self):
        values = (self.ce_deg, self.tonnis_deg, self.sharp_deg, self.crowe_r)
        if not all(math.isfinite(v) for v in values):
            raise InvalidTarget(f"targets must be finite, got {values}")
        if abs(self.ce_deg) >= 90.0 or abs(self.tonnis_deg) >= 90.0:
            raise InvalidTarget("ce and tonnis targets must lie in (-90, 90)")
        if not 0.0 <= self.sharp_deg < 90.0:
            raise InvalidTarget("sharp target must lie in [0, 90)")
        if self.crowe_r < 0.0:
            raise InvalidTarget("crowe ratio target must be >= 0")


@dataclass(frozen=True)
class PelvisTemplate:
    """Skeleton constants; all lengths in pixels."""

    teardrop_span: float = 160.0
    pelvic_height: float = 200.0
    center: Tuple[float, float] = (300.0, 300.0)
    rotation_deg: float = 0.0
    len_ac: float = 70.0
    len_bc: float = 45.0
    len_cd: float = 35.0
    ilium_rise: float = 70.0  # vertical offset of G above the teardrop line

    def teardrops(self) -> Tuple[Point2D, Point2D]:
        rho = math.radians(self.rotation_deg)
        ux, uy = math.cos(rho), math.sin(rho)
        cx, cy = self.center
        half = self.teardrop_span / 2.0
        right = Point2D(cx - half * ux, cy - half * uy)
        left = Point2D(cx + half * ux, cy + half * uy)
        return right, left


def _as_rng(rng: Union[np.random.Generator, int, None]) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def synth_hip(
    targets: Union[AngleTargets, Tuple[float, float, float, float]],
    side: HipSide,
    template: Optional[PelvisTemplate] = None,
    rng: Union[np.random.Generator, int, None] = None,
) -> HipKeypoints:
    """Landmarks for one hip hitting the targets exactly (to float rounding)."""
    if not isinstance(targets, AngleTargets):
        targets = AngleTargets(*targets)
    template = template or PelvisTemplate()
    rng = _as_rng(rng)

    right_td, left_td = template.teardrops()
    frame = build_reference_frame(right_td, left_td)
    lat_sign = frame.lateral_sign(side)
    lx, ly = (lat_sign * frame.u_horizontal[0], lat_sign * frame.u_horizontal[1])
    vx, vy = frame.u_vertical

    anchor = right_td if side is HipSide.RIGHT else left_td

    def offset(base: Point2D, lateral: float, superior: float) -> Point2D:
        return Point2D(
            base.x + lateral * lx + superior * vx,
            base.y + lateral * ly + superior * vy,
        )

    len_ac = template.len_ac * float(rng.uniform(0.92, 1.12))
    len_bc = template.len_bc * float(rng.uniform(0.9, 1.2))
    len_cd = template.len_cd * float(rng.uniform(0.9, 1.15))

    sharp = math.radians(targets.sharp_deg)
    ce = math.radians(targets.ce_deg)
    tonnis = math.radians(targets.tonnis_deg)

    a = anchor
    c = offset(a, len_ac * math.cos(sharp), len_ac * math.sin(sharp))
    b = offset(c, -len_bc * math.sin(ce), -len_bc * math.cos(ce))
    d = offset(c, -len_cd * math.cos(tonnis), -len_cd * math.sin(tonnis))
    e = offset(a, float(rng.uniform(8.0, 20.0)), targets.crowe_r * template.pelvic_height)
    g = offset(a, float(rng.uniform(20.0, 45.0)), template.ilium_rise)
    f = offset(
        a,
        float(rng.uniform(0.0, 14.0)),
        template.ilium_rise - template.pelvic_height,
    )
    return HipKeypoints(
        teardrop_A=a,
        fh_center_B=b,
        lat_sourcil_C=c,
        med_sourcil_D=d,
        fhn_junction_E=e,
        inf_ischium_F=f,
        sup_ilium_G=g,
    )


def synth_annotation(
    targets_right: Union[AngleTargets, Tuple[float, float, float, float]],
    targets_left: Union[AngleTargets, Tuple[float, float, float, float]],
    template: Optional[PelvisTemplate] = None,
    rng: Union[np.random.Generator, int, None] = None,
    annotator_id: str = GROUND_TRUTH_ANNOTATOR,
    diagnosis: Optional[Dict[HipSide, str]] = None,
) -> PelvisAnnotation:
    """Full two-hip annotation; the bbox hugs the landmarks with a margin."""
    template = template or PelvisTemplate()
    rng = _as_rng(rng)
    right = synth_hip(targets_right, HipSide.RIGHT, template, rng)
    left = synth_hip(targets_left, HipSide.LEFT, template, rng)
    pts = [
        getattr(hip, name)
        for hip in (right, left)
        for name in (
            "teardrop_A",
            "fh_center_B",
            "lat_sourcil_C",
            "med_sourcil_D",
            "fhn_junction_E",
            "inf_ischium_F",
            "sup_ilium_G",
        )
    ]
    pad = 20.0
    x0 = min(p.x for p in pts) - pad
    y0 = min(p.y for p in pts) - pad
    x1 = max(p.x for p in pts) + pad
    y1 = max(p.y for p in pts) + pad
    return PelvisAnnotation(
        annotator_id=annotator_id,
        keypoints=KeypointsPair(right=right, left=left),
        bbox=(x0, y0, x1 - x0, y1 - y0),
        diagnosis=diagnosis,
    )


# --- dataset generation -------------------------------------------------------


@dataclass(frozen=True)
class BandSampler:
    """Samples one angle by picking a class band, then a value inside it.

    Band edges stay a small margin away from the clinical cut points so the
    sampled value's class never flips across float rounding.
    """

    normal: Tuple[float, float]
    borderline: Tuple[float, float]
    ddh: Tuple[float, float]
    probs: Tuple[float, float, float] = (0.5, 0.2, 0.3)

    def sample(self, rng: np.random.Generator) -> float:
        band = (self.normal, self.borderline, self.ddh)[
            int(rng.choice(3, p=self.probs))
        ]
        return float(rng.uniform(band[0], band[1]))


@dataclass(frozen=True)
class AngleDistributions:
    ce: BandSampler = BandSampler(normal=(25.01, 40.0), borderline=(20.01, 24.99), ddh=(5.0, 19.99))
    tonnis: BandSampler = BandSampler(normal=(0.0, 9.99), borderline=(10.01, 12.99), ddh=(13.01, 25.0))
    sharp: BandSampler = BandSampler(normal=(30.0, 41.99), borderline=(42.01, 46.99), ddh=(47.01, 55.0))
    crowe_r: Tuple[float, float] = (0.0, 0.3)

    def sample_targets(self, rng: np.random.Generator) -> AngleTargets:
        return AngleTargets(
            ce_deg=self.ce.sample(rng),
            tonnis_deg=self.tonnis.sample(rng),
            sharp_deg=self.sharp.sample(rng),
            crowe_r=float(rng.uniform(*self.crowe_r)),
        )


def synth_dataset(
    n_studies: int,
    distributions: Optional[AngleDistributions] = None,
    planted: Optional[ScoringParams] = None,
    noise_rate: float = 0.0,
    seed: int = 0,
    ranges: Optional[AngleRanges] = None,
    template: Optional[PelvisTemplate] = None,
) -> List[Study]:
    """Labeled synthetic studies: planted-rule verdicts with optional flips.

    Each study holds a fused ground-truth annotation whose per-side
    diagnosis is the planted rule's verdict on the sampled targets, flipped
    independently with the given noise rate. Reproducible per seed.
    """
    if n_studies < 1:
        raise ValueError(f"need at least one study, got {n_studies}")
    if not (0.0 <= noise_rate < 0.5):
        raise InvalidNoiseRate(f"noise rate must lie in [0, 0.5), got {noise_rate!r}")
    distributions = distributions or AngleDistributions()
    planted = planted or default_params()
    base = template or PelvisTemplate()
    rng = np.random.default_rng(seed)

    studies: List[Study] = []
    width = max(5, len(str(n_studies - 1)))
    for i in range(n_studies):
        tpl = PelvisTemplate(
            teardrop_span=base.teardrop_span,
            pelvic_height=base.pelvic_height,
            center=base.center,
            rotation_deg=float(rng.uniform(-8.0, 8.0)),
            len_ac=base.len_ac,
            len_bc=base.len_bc,
            len_cd=base.len_cd,
            ilium_rise=base.ilium_rise,
        )
        targets = {side: distributions.sample_targets(rng) for side in HipSide}
        diagnosis: Dict[HipSide, str] = {}
        for side in HipSide:
            t = targets[side]
            classes = [
                classify_angle(kind, value, ranges)
                for kind, value in zip(
                    ANGLE_ORDER, (t.ce_deg, t.tonnis_deg, t.sharp_deg)
                )
            ]
            label = verdict_for_classes(planted, classes)
            if noise_rate > 0.0 and rng.random() < noise_rate:
                label = not label
            diagnosis[side] = "ddh" if label else "normal"
        annotation = synth_annotation(
            targets[HipSide.RIGHT],
            targets[HipSide.LEFT],
            template=tpl,
            rng=rng,
            diagnosis=diagnosis,
        )
        studies.append(
            Study(study_id=f"synth-{i:0{width}d}", ground_truth=annotation)
        )
    return studies
