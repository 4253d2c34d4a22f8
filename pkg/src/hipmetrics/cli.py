"""Command-line interface.

Subcommands: measure, diagnose, fit, eval-keypoints, eval-angles,
eval-diagnosis, kconst, synth, render, serve.

All outputs are deterministic for identical inputs and flags: floats are
formatted with six decimals and rows are ordered by study_id, then side
(right before left). Exit codes: 0 ok, 2 schema/input error, 3 geometry
degeneracy, 4 degenerate statistics.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import pipeline
from .data import (
    DIAGNOSIS_COLUMNS,
    MEASURE_COLUMNS,
    Study,
    format_float,
    parse_dataset,
    rows_to_csv,
    serialize_dataset,
)
from .errors import (
    DegenerateAgreement,
    DegenerateConstant,
    DegenerateDataset,
    DegenerateGeometry,
    DegenerateVariance,
    EmptyGroundTruth,
    HipmetricsError,
    InsufficientData,
    InsufficientRedundancy,
    InvalidNoiseRate,
    InvalidScale,
    SchemaError,
)
from .geometry import HipSide, Point2D
from .metrics import (
    DEFAULT_K_CONSTANTS,
    DEFAULT_OKS_THRESHOLDS,
    AgreementReport,
    KConstants,
    KeypointDetection,
    KeypointTruth,
    bland_altman,
    confusion_f1,
    estimate_k_constants,
    icc_absolute_agreement,
    map_mar,
)
from .render import render_study_svg
from .scoring import ScoringParams, default_params, fit_scoring_params
from .synth import synth_dataset

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_GEOMETRY = 3
EXIT_DEGENERATE = 4

_DEGENERATE_ERRORS = (
    DegenerateDataset,
    DegenerateAgreement,
    DegenerateVariance,
    InsufficientData,
    InsufficientRedundancy,
    DegenerateConstant,
    EmptyGroundTruth,
    InvalidScale,
    InvalidNoiseRate,
)


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _load_params(path: Optional[str]) -> ScoringParams:
    if path is None:
        return default_params()
    return ScoringParams.from_text(Path(path).read_text())


def _load_kconst(path: Optional[str]) -> KConstants:
    if path is None:
        return DEFAULT_K_CONSTANTS
    return KConstants.from_text(Path(path).read_text())


def _parse_thresholds(spec: Optional[str]) -> Tuple[float, ...]:
    if spec is None:
        return DEFAULT_OKS_THRESHOLDS
    if ":" in spec:
        try:
            start, step, stop = (float(v) for v in spec.split(":"))
        except ValueError:
            raise SchemaError(f"--thresholds: expected start:step:stop, got {spec!r}") from None
        values = []
        t = start
        while t <= stop + 1e-9:
            values.append(round(t, 6))
            t += step
        return tuple(values)
    try:
        return tuple(round(float(v), 6) for v in spec.split(","))
    except ValueError:
        raise SchemaError(f"--thresholds: cannot parse {spec!r}") from None


def _sorted_studies(studies: Sequence[Study]) -> List[Study]:
    return sorted(studies, key=lambda s: s.study_id)


# --- measure / diagnose ----------------------------------------------------


def _measurement_rows(studies, lenient: bool, diagnose: bool, params, columns):
    rows = []
    for study in _sorted_studies(studies):
        try:
            ann = study.reference_annotation()
            if diagnose:
                for side, (m, d) in pipeline.diagnose_both(ann, params).items():
                    rows.append(pipeline.diagnosis_row(study.study_id, m, d))
            else:
                for side, m in pipeline.measure_both(ann).items():
                    rows.append(pipeline.measurement_row(study.study_id, m))
        except DegenerateGeometry as exc:
            if not lenient:
                raise
            print(f"warning: skipping study {study.study_id}: {exc}", file=sys.stderr)
    return rows


def _report_from_rows(rows: List[Dict[str, str]], columns) -> str:
    lines = []
    for row in rows:
        fields = " ".join(f"{c}={row[c]}" for c in columns[2:])
        lines.append(f"{row['study_id']} {row['side']}: {fields}")
    return "\n".join(lines) + "\n"


def cmd_measure(args) -> int:
    studies = parse_dataset(args.input)
    rows = _measurement_rows(studies, args.lenient, False, None, MEASURE_COLUMNS)
    if args.format == "report":
        _emit(_report_from_rows(rows, MEASURE_COLUMNS), args.output)
    else:
        _emit(rows_to_csv(rows, MEASURE_COLUMNS), args.output)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    studies = parse_dataset(args.input)
    params = _load_params(args.params)
    rows = _measurement_rows(studies, args.lenient, True, params, DIAGNOSIS_COLUMNS)
    if args.format == "report":
        _emit(_report_from_rows(rows, DIAGNOSIS_COLUMNS), args.output)
    else:
        _emit(rows_to_csv(rows, DIAGNOSIS_COLUMNS), args.output)
    if args.render:
        _render_all(studies, params, args.render, args.lenient)
    return EXIT_OK


def _render_all(studies, params, out_dir: str, lenient: bool) -> None:
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    for study in _sorted_studies(studies):
        try:
            svg = render_study_svg(study, params)
        except DegenerateGeometry as exc:
            if not lenient:
                raise
            print(f"warning: not rendering {study.study_id}: {exc}", file=sys.stderr)
            continue
        (target / f"{study.study_id}.svg").write_text(svg)


def cmd_render(args) -> int:
    studies = parse_dataset(args.input)
    params = _load_params(args.params)
    _render_all(studies, params, args.output or "overlays", args.lenient)
    return EXIT_OK


# --- fitting -----------------------------------------------------------------


def cmd_fit(args) -> int:
    studies = parse_dataset(args.input)
    pairs = pipeline.labeled_measurements(studies)
    result = fit_scoring_params(pairs)
    params_text = result.params.to_text()
    if args.output:
        Path(args.output).write_text(params_text)
    curve_lines = ["threshold,kappa"] + [
        f"{t},{format_float(k)}" for t, k in result.threshold_curve
    ]
    curve_text = "\n".join(curve_lines) + "\n"
    if args.curve:
        Path(args.curve).write_text(curve_text)
    if args.format == "report":
        sys.stdout.write(
            f"fitted on {len(pairs)} hips\n"
            f"train_kappa = {format_float(result.train_kappa)}\n"
            + params_text
            + "kappa by threshold:\n"
            + "".join(f"  {t}: {format_float(k)}\n" for t, k in result.threshold_curve)
        )
    else:
        sys.stdout.write(params_text)
        sys.stdout.write(f"train_kappa = {format_float(result.train_kappa)}\n")
        sys.stdout.write(curve_text)
    return EXIT_OK


# --- evaluation ----------------------------------------------------------------


def _load_detections(path: str) -> List[KeypointDetection]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict) or "detections" not in doc:
        raise SchemaError(f"{path}: expected a top-level object with 'detections'")
    out = []
    for i, det in enumerate(doc["detections"]):
        where = f"{path}.detections[{i}]"
        try:
            out.append(
                KeypointDetection(
                    study_id=str(det["study_id"]),
                    side=HipSide(det["side"]),
                    keypoint=str(det["keypoint"]),
                    location=Point2D(float(det["x"]), float(det["y"])),
                    score=float(det.get("score", 1.0)),
                )
            )
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"{where}: {exc}") from None
    return out


def truth_from_studies(studies: Sequence[Study]) -> List[KeypointTruth]:
    from .geometry import KEYPOINT_FIELDS

    out = []
    for study in _sorted_studies(studies):
        ann = study.reference_annotation()
        scale = ann.bbox_area() ** 0.5
        for side in pipeline.SIDE_ORDER:
            hip = ann.keypoints.for_side(side)
            for name, field_name in KEYPOINT_FIELDS.items():
                out.append(
                    KeypointTruth(
                        study_id=study.study_id,
                        side=side,
                        keypoint=name,
                        location=getattr(hip, field_name),
                        scale=scale,
                    )
                )
    return out


def cmd_eval_keypoints(args) -> int:
    studies = parse_dataset(args.input)
    detections = _load_detections(args.detections)
    k = _load_kconst(args.kconst)
    thresholds = _parse_thresholds(args.thresholds)
    result = map_mar(detections, truth_from_studies(studies), k, thresholds)
    lines = [f"map = {format_float(result.map)}", f"mar = {format_float(result.mar)}"]
    if args.format == "report":
        lines.append("threshold sweep:")
        for t, ap, ar in result.per_threshold:
            lines.append(f"  t={t:.2f} ap={format_float(ap)} ar={format_float(ar)}")
        lines.append("per keypoint (mean over thresholds):")
        for (side, name), (ap, ar) in sorted(
            result.per_keypoint.items(), key=lambda kv: (kv[0][0].value, kv[0][1])
        ):
            lines.append(f"  {side.value}.{name} ap={format_float(ap)} ar={format_float(ar)}")
        _emit("\n".join(lines) + "\n", args.output)
    else:
        rows = ["threshold,ap,ar"]
        for t, ap, ar in result.per_threshold:
            rows.append(f"{t:.2f},{format_float(ap)},{format_float(ar)}")
        rows.append(f"mean,{format_float(result.map)},{format_float(result.mar)}")
        _emit("\n".join(rows) + "\n", args.output)
    return EXIT_OK


def _read_table(path: str) -> Dict[Tuple[str, str], Dict[str, str]]:
    with open(path, newline="") as handle:
        rows = {
            (row["study_id"], row["side"]): row for row in csv.DictReader(handle)
        }
    if not rows:
        raise SchemaError(f"{path}: empty table")
    return rows


def cmd_eval_angles(args) -> int:
    measured = _read_table(args.input)
    reference = _read_table(args.reference)
    keys = sorted(set(measured) & set(reference))
    if not keys:
        raise SchemaError("no overlapping (study_id, side) rows between the tables")
    sections = []
    for angle in ("ce_deg", "tonnis_deg", "sharp_deg"):
        pairs = [(float(measured[k][angle]), float(reference[k][angle])) for k in keys]
        icc = icc_absolute_agreement([[m, r] for m, r in pairs])
        ba = bland_altman(pairs)
        sections.append((angle, AgreementReport(icc=icc, bland_altman=ba)))
    if args.format == "report":
        text = ""
        for angle, report in sections:
            text += f"[{angle}]\n" + report.to_report_text()
        _emit(text, args.output)
    else:
        lines = ["angle,key,value"]
        for angle, report in sections:
            for key, value in report.to_pairs():
                lines.append(f"{angle},{key},{value}")
        _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_eval_diagnosis(args) -> int:
    predicted = _read_table(args.input)
    reference = _read_table(args.reference)
    keys = sorted(set(predicted) & set(reference))
    if not keys:
        raise SchemaError("no overlapping (study_id, side) rows between the tables")
    column = args.column
    pred, truth = [], []
    for k in keys:
        p, t = predicted[k].get(column, ""), reference[k].get(column, "")
        if p == "" or t == "":
            continue
        pred.append(p)
        truth.append(t)
    if not pred:
        raise InsufficientData(f"no rows carry values in column {column!r}")
    classes = ("I", "II", "III", "IV") if column == "crowe_grade" else ("absent", "present")
    conf = confusion_f1(pred, truth, classes)
    report = AgreementReport(kappa=conf.kappa, confusion=conf)
    _emit(
        report.to_report_text() if args.format == "report" else report.to_table_text(),
        args.output,
    )
    return EXIT_OK


def cmd_kconst(args) -> int:
    studies = parse_dataset(args.input)
    redundant = []
    for study in _sorted_studies(studies):
        if len(study.annotations) < 2:
            continue
        if study.ground_truth is not None:
            area = study.ground_truth.bbox_area()
        else:
            area = sum(a.bbox_area() for a in study.annotations) / len(study.annotations)
        redundant.append((study.annotations, area))
    if not redundant:
        raise InsufficientRedundancy("no study carries two or more repeat annotations")
    constants = estimate_k_constants(redundant)
    _emit(constants.to_text(), args.output)
    return EXIT_OK


def cmd_synth(args) -> int:
    planted = _load_params(args.params)
    studies = synth_dataset(
        n_studies=args.count,
        planted=planted,
        noise_rate=args.noise,
        seed=args.seed,
    )
    if args.output:
        serialize_dataset(studies, args.output)
        print(f"wrote {len(studies)} studies ({2 * len(studies)} hips) to {args.output}")
    else:
        from .data import dumps_dataset

        sys.stdout.write(dumps_dataset(studies))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.store, params=_load_params(args.params), ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hipmetrics",
        description="Hip dysplasia measurement, scoring, and evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        p.add_argument("--format", choices=("table", "report"), default="table")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = add("measure", cmd_measure, help="measurement table from a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--lenient", action="store_true")

    p = add("diagnose", cmd_diagnose, help="diagnosis table (and optional overlays)")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--params")
    p.add_argument("--render", metavar="DIR")
    p.add_argument("--lenient", action="store_true")

    p = add("render", cmd_render, help="SVG overlays for every study")
    p.add_argument("--input", required=True)
    p.add_argument("--output", metavar="DIR")
    p.add_argument("--params")
    p.add_argument("--lenient", action="store_true")

    p = add("fit", cmd_fit, help="grid-search scoring parameters on labeled hips")
    p.add_argument("--input", required=True)
    p.add_argument("--output", metavar="PARAMS_TXT")
    p.add_argument("--curve", metavar="CURVE_CSV")

    p = add("eval-keypoints", cmd_eval_keypoints, help="similarity-thresholded AP/AR sweep")
    p.add_argument("--input", required=True, help="ground-truth dataset document")
    p.add_argument("--detections", required=True)
    p.add_argument("--kconst")
    p.add_argument("--thresholds")
    p.add_argument("--output")

    p = add("eval-angles", cmd_eval_angles, help="ICC and difference limits between angle tables")
    p.add_argument("--input", required=True, help="measured table (csv)")
    p.add_argument("--reference", required=True)
    p.add_argument("--output")

    p = add("eval-diagnosis", cmd_eval_diagnosis, help="kappa, confusion, and F1 between tables")
    p.add_argument("--input", required=True, help="predicted table (csv)")
    p.add_argument("--reference", required=True)
    p.add_argument("--column", default="verdict", choices=("verdict", "crowe_grade"))
    p.add_argument("--output")

    p = add("kconst", cmd_kconst, help="estimate similarity constants from repeats")
    p.add_argument("--input", required=True)
    p.add_argument("--output")

    p = add("synth", cmd_synth, help="generate a labeled synthetic dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--params", help="planted scoring parameters")
    p.add_argument("--output")

    p = add("serve", cmd_serve, help="run the review service")
    p.add_argument("--store", required=True)
    p.add_argument("--params")
    p.add_argument("--ui", metavar="DIR", help="built frontend to serve at /")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8417)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except DegenerateGeometry as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except _DEGENERATE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except HipmetricsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
