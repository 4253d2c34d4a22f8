"""Scoring rule tests: classification bands, the additive verdict, fitting."""

import itertools

import numpy as np
import pytest

from hipmetrics import (
    AngleClass,
    AngleKind,
    AngleMeasurements,
    CroweGrade,
    HipSide,
    ScoringParams,
    classify_angle,
    default_params,
    fit_scoring_params,
    score_hip,
)
from hipmetrics.errors import DegenerateDataset, SchemaError
from hipmetrics.pipeline import labeled_measurements
from hipmetrics.scoring import ANGLE_ORDER, SearchSpace, verdict_for_classes
from hipmetrics.synth import synth_dataset

from oracles import oracle_table1_verdict

# representative angle values per (kind, class)
CLASS_VALUES = {
    AngleKind.CE: {AngleClass.NORMAL: 30.0, AngleClass.BORDERLINE: 22.0, AngleClass.DDH: 15.0},
    AngleKind.TONNIS: {AngleClass.NORMAL: 5.0, AngleClass.BORDERLINE: 11.5, AngleClass.DDH: 18.0},
    AngleKind.SHARP: {AngleClass.NORMAL: 38.0, AngleClass.BORDERLINE: 44.0, AngleClass.DDH: 50.0},
}


def measurements_for(ce, tonnis, sharp, r=0.05, side=HipSide.RIGHT):
    return AngleMeasurements(
        side=side,
        ce_deg=ce,
        tonnis_deg=tonnis,
        sharp_deg=sharp,
        proximal_displacement_px=r * 200.0,
        pelvic_height_px=200.0,
        crowe_ratio_r=r,
    )


# --- classification -----------------------------------------------------------


@pytest.mark.parametrize(
    "kind,value,expected",
    [
        (AngleKind.CE, 30.0, AngleClass.NORMAL),
        (AngleKind.CE, 25.0, AngleClass.BORDERLINE),
        (AngleKind.CE, 20.0, AngleClass.BORDERLINE),
        (AngleKind.CE, 19.999, AngleClass.DDH),
        (AngleKind.CE, -5.0, AngleClass.DDH),
        (AngleKind.TONNIS, 5.0, AngleClass.NORMAL),
        (AngleKind.TONNIS, 10.0, AngleClass.BORDERLINE),
        (AngleKind.TONNIS, 13.0, AngleClass.BORDERLINE),
        (AngleKind.TONNIS, 13.001, AngleClass.DDH),
        (AngleKind.SHARP, 41.999, AngleClass.NORMAL),
        (AngleKind.SHARP, 42.0, AngleClass.BORDERLINE),
        (AngleKind.SHARP, 47.0, AngleClass.BORDERLINE),
        (AngleKind.SHARP, 47.1, AngleClass.DDH),
    ],
)
def test_classify_angle_bands(kind, value, expected):
    assert classify_angle(kind, value) is expected


def test_classify_rejects_non_finite():
    with pytest.raises(ValueError):
        classify_angle(AngleKind.CE, float("nan"))


# --- default parameters ---------------------------------------------------------


def test_default_params_values():
    params = default_params()
    assert params.ddh_score[AngleKind.CE] == 3
    assert params.ddh_score[AngleKind.TONNIS] == 2
    assert params.ddh_score[AngleKind.SHARP] == 2
    assert all(params.borderline_score[k] == 1 for k in ANGLE_ORDER)
    assert params.threshold == 5
    assert params.score_for(AngleKind.CE, AngleClass.NORMAL) == 0


def test_params_validation():
    with pytest.raises(ValueError):
        ScoringParams(
            borderline_score={k: 2 for k in ANGLE_ORDER},
            ddh_score={k: 2 for k in ANGLE_ORDER},  # not > borderline
            threshold=3,
        )
    with pytest.raises(ValueError):
        ScoringParams(
            borderline_score={k: 0 for k in ANGLE_ORDER},
            ddh_score={k: 2 for k in ANGLE_ORDER},
            threshold=7,  # unreachable
        )


def test_params_text_round_trip():
    params = default_params()
    assert ScoringParams.from_text(params.to_text()) == params
    with pytest.raises(SchemaError):
        ScoringParams.from_text("threshold = not-a-number\n")
    with pytest.raises(SchemaError):
        ScoringParams.from_text("threshold = 5\n")  # missing angle scores


# --- verdicts ---------------------------------------------------------------------


def test_score_hip_worked_examples():
    # CE dysplastic + two borderline angles reaches the cut
    d = score_hip(measurements_for(19.0, 11.0, 43.0))
    assert [d.per_angle_score[k] for k in ANGLE_ORDER] == [3, 1, 1]
    assert d.total_score == 5
    assert d.ddh_present

    # all normal
    d = score_hip(measurements_for(30.0, 5.0, 40.0))
    assert d.total_score == 0
    assert not d.ddh_present
    assert d.crowe is None

    # CE dysplastic alone is not enough
    d = score_hip(measurements_for(18.0, 8.0, 40.0))
    assert d.total_score == 3
    assert not d.ddh_present


def test_score_hip_other_positive_combination():
    # Tonnis + Sharp dysplastic plus CE borderline: 2 + 2 + 1
    d = score_hip(measurements_for(22.0, 18.0, 50.0))
    assert d.total_score == 5
    assert d.ddh_present


def test_crowe_attached_only_when_present():
    d = score_hip(measurements_for(19.0, 11.0, 43.0, r=0.18))
    assert d.ddh_present
    assert d.crowe is CroweGrade.III
    d = score_hip(measurements_for(30.0, 5.0, 40.0, r=0.18))
    assert d.crowe is None


def test_exhaustive_27_combinations_match_published_rule():
    params = default_params()
    for combo in itertools.product(AngleClass, repeat=3):
        ce_c, t_c, s_c = combo
        m = measurements_for(
            CLASS_VALUES[AngleKind.CE][ce_c],
            CLASS_VALUES[AngleKind.TONNIS][t_c],
            CLASS_VALUES[AngleKind.SHARP][s_c],
        )
        d = score_hip(m, params)
        expected = oracle_table1_verdict(ce_c.value, t_c.value, s_c.value)
        assert d.ddh_present == expected, combo
        assert verdict_for_classes(params, combo) == expected


def test_verdict_monotone_in_class_severity():
    rng = np.random.default_rng(4)
    space = SearchSpace()
    order = [AngleClass.NORMAL, AngleClass.BORDERLINE, AngleClass.DDH]
    for _ in range(60):
        scores = {}
        for k in ANGLE_ORDER:
            b = int(rng.choice(space.borderline_choices))
            d_choices = [d for d in space.ddh_choices if d > b]
            scores[k] = (b, int(rng.choice(d_choices)))
        params = ScoringParams(
            borderline_score={k: scores[k][0] for k in ANGLE_ORDER},
            ddh_score={k: scores[k][1] for k in ANGLE_ORDER},
            threshold=int(rng.integers(1, sum(scores[k][1] for k in ANGLE_ORDER) + 1)),
        )
        for combo in itertools.product(order, repeat=3):
            if not verdict_for_classes(params, combo):
                continue
            for i in range(3):
                worse = list(combo)
                for severity in order[order.index(combo[i]) :]:
                    worse[i] = severity
                    assert verdict_for_classes(params, worse)


# --- fitting -----------------------------------------------------------------------


def fit_pairs(n_studies, noise, seed):
    return labeled_measurements(synth_dataset(n_studies, noise_rate=noise, seed=seed))


def test_fit_recovers_planted_rule_noiseless():
    result = fit_scoring_params(fit_pairs(250, 0.0, seed=31))
    planted = default_params()
    assert result.train_kappa == pytest.approx(1.0)
    # same verdicts on every class combination
    for combo in itertools.product(AngleClass, repeat=3):
        assert verdict_for_classes(result.params, combo) == verdict_for_classes(planted, combo)


def test_fit_single_class_raises():
    pairs = [(measurements_for(30.0, 5.0, 40.0), False) for _ in range(10)]
    with pytest.raises(DegenerateDataset):
        fit_scoring_params(pairs)


def test_fit_invariant_to_shuffling():
    pairs = fit_pairs(120, 0.05, seed=8)
    result = fit_scoring_params(pairs)
    rng = np.random.default_rng(0)
    shuffled = list(pairs)
    rng.shuffle(shuffled)
    again = fit_scoring_params(shuffled)
    assert again.params == result.params
    assert again.train_kappa == result.train_kappa
    assert again.threshold_curve == result.threshold_curve


def test_fit_curve_covers_thresholds_and_peaks_at_selected():
    result = fit_scoring_params(fit_pairs(250, 0.0, seed=31))
    thresholds = [t for t, _ in result.threshold_curve]
    assert thresholds == list(range(1, result.params.max_total() + 1))
    best_t = max(result.threshold_curve, key=lambda tk: tk[1])[0]
    assert result.threshold_curve[result.params.threshold - 1][1] == result.train_kappa
    assert result.threshold_curve[best_t - 1][1] == result.train_kappa


def test_fit_noisy_recovery_close_to_planted():
    result = fit_scoring_params(fit_pairs(500, 0.05, seed=13))
    planted = default_params()
    held = fit_pairs(400, 0.05, seed=14)
    from hipmetrics.metrics import cohen_kappa
    from hipmetrics.scoring import classify_measurements

    def verdicts(params):
        out = []
        for m, _ in held:
            classes = classify_measurements(m)
            out.append(verdict_for_classes(params, [classes[k] for k in ANGLE_ORDER]))
        return out

    labels = [lab for _, lab in held]
    kappa_fit = cohen_kappa(verdicts(result.params), labels)
    kappa_planted = cohen_kappa(verdicts(planted), labels)
    assert abs(kappa_fit - kappa_planted) <= 0.02
