"""HTTP API over a file-backed study store.

One JSON document per study lives under the store root, carrying the
dataset schema plus an integer ``version``. Writes are optimistic: a PUT
must present the version it read, bumps it on success, and loses with 409
when someone else committed first. Responses compute measurements and
diagnoses through the same pipeline helpers as the CLI, so both surfaces
agree bit for bit.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Dict, Optional, Tuple

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse

from . import pipeline
from .data import (
    Study,
    keypoints_pair_from_dict,
    study_from_dict,
    study_to_dict,
)
from .errors import DegenerateGeometry, SchemaError
from .geometry import KeypointsPair
from .scoring import ANGLE_ORDER, ScoringParams, default_params

_MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".gif": "image/gif",
}


class StudyStore:
    """Directory of per-study documents with optimistic versioning."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, study_id: str) -> Path:
        safe = study_id.replace("/", "_")
        return self.root / f"{safe}.json"

    def list_ids(self):
        return sorted(p.stem for p in self.root.glob("*.json"))

    def load(self, study_id: str) -> Tuple[Study, int]:
        path = self._path(study_id)
        if not path.exists():
            raise KeyError(study_id)
        doc = json.loads(path.read_text())
        version = int(doc.pop("version", 1))
        return study_from_dict(doc, where=study_id), version

    def seed(self, study: Study, version: int = 1) -> None:
        self._write(study, version)

    def _write(self, study: Study, version: int) -> None:
        doc = study_to_dict(study)
        doc["version"] = version
        path = self._path(study.study_id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(doc, indent=2) + "\n")
        tmp.replace(path)

    def update_keypoints(
        self, study_id: str, pair: KeypointsPair, expected_version: int
    ) -> Tuple[Study, int]:
        """Swap the reference annotation's keypoints; the caller validated them."""
        with self._lock:
            study, version = self.load(study_id)
            if version != expected_version:
                raise VersionConflict(current=version)
            if study.ground_truth is not None:
                target = study.ground_truth
                study.ground_truth = _with_keypoints(target, pair)
            elif len(study.annotations) == 1:
                study.annotations = [_with_keypoints(study.annotations[0], pair)]
            else:
                raise SchemaError(
                    f"study {study_id!r} has no single editable annotation"
                )
            new_version = version + 1
            self._write(study, new_version)
            return study, new_version


class VersionConflict(Exception):
    def __init__(self, current: int):
        super().__init__(f"version mismatch, current is {current}")
        self.current = current


def _with_keypoints(annotation, pair: KeypointsPair):
    from dataclasses import replace

    return replace(annotation, keypoints=pair)


def _params_from_body(obj, fallback: ScoringParams) -> ScoringParams:
    if obj is None:
        return fallback
    try:
        return ScoringParams(
            borderline_score={k: int(obj["borderline"][k.value]) for k in ANGLE_ORDER},
            ddh_score={k: int(obj["ddh"][k.value]) for k in ANGLE_ORDER},
            threshold=int(obj["threshold"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"params: {exc}") from None


def _results_payload(pair_or_annotation, params) -> dict:
    results = pipeline.diagnose_both(pair_or_annotation, params)
    return {
        "measurements": {
            side.value: pipeline.measurements_payload(m)
            for side, (m, _) in results.items()
        },
        "diagnosis": {
            side.value: pipeline.diagnosis_payload(d)
            for side, (_, d) in results.items()
        },
    }


def create_app(
    store_dir, params: Optional[ScoringParams] = None, ui_dir=None
) -> FastAPI:
    store = StudyStore(store_dir)
    base_params = params or default_params()
    app = FastAPI(title="hipmetrics review service")
    app.state.store = store

    def _load_or_404(study_id: str) -> Tuple[Study, int]:
        try:
            return store.load(study_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown study {study_id!r}")

    @app.get("/api/studies")
    def list_studies():
        entries = []
        for study_id in store.list_ids():
            study, version = store.load(study_id)
            verdicts: Dict[str, Optional[str]] = {}
            try:
                results = pipeline.diagnose_both(study.reference_annotation(), base_params)
                for side, (_, diag) in results.items():
                    verdicts[side.value] = "present" if diag.ddh_present else "absent"
            except (SchemaError, DegenerateGeometry):
                verdicts = {"right": None, "left": None}
            entries.append(
                {"study_id": study_id, "version": version, "verdicts": verdicts}
            )
        return entries

    @app.get("/api/studies/{study_id}")
    def get_study(study_id: str):
        study, version = _load_or_404(study_id)
        payload = {
            "study": study_to_dict(study),
            "version": version,
        }
        try:
            payload.update(_results_payload(study.reference_annotation(), base_params))
        except (SchemaError, DegenerateGeometry) as exc:
            payload["measurements"] = None
            payload["diagnosis"] = None
            payload["error"] = str(exc)
        return payload

    @app.get("/api/studies/{study_id}/image")
    def get_image(study_id: str):
        study, _ = _load_or_404(study_id)
        if study.image is None:
            raise HTTPException(status_code=404, detail="study has no image")
        path = (store.root / study.image.path).resolve()
        # image paths must stay inside the store
        if not path.is_file() or store.root.resolve() not in path.parents:
            raise HTTPException(status_code=404, detail="image file missing")
        media = _MEDIA_TYPES.get(path.suffix.lower(), "application/octet-stream")
        return FileResponse(path, media_type=media)

    @app.put("/api/studies/{study_id}/keypoints")
    def put_keypoints(study_id: str, body: dict = Body(...)):
        _load_or_404(study_id)
        if "version" not in body:
            raise HTTPException(status_code=422, detail="body must carry 'version'")
        try:
            pair = keypoints_pair_from_dict(body.get("keypoints"), "keypoints")
            # validate geometry before touching the store
            payload = _results_payload(pair, base_params)
        except (SchemaError, DegenerateGeometry) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            _, new_version = store.update_keypoints(study_id, pair, int(body["version"]))
        except VersionConflict as exc:
            return JSONResponse(
                status_code=409,
                content={"detail": str(exc), "current_version": exc.current},
            )
        except SchemaError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        payload["version"] = new_version
        return payload

    @app.post("/api/measure")
    def post_measure(body: dict = Body(...)):
        try:
            pair = keypoints_pair_from_dict(body.get("keypoints"), "keypoints")
            measurements = pipeline.measure_both(pair)
        except (SchemaError, DegenerateGeometry) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {
            "measurements": {
                side.value: pipeline.measurements_payload(m)
                for side, m in measurements.items()
            }
        }

    @app.post("/api/diagnose")
    def post_diagnose(body: dict = Body(...)):
        try:
            pair = keypoints_pair_from_dict(body.get("keypoints"), "keypoints")
            params_override = _params_from_body(body.get("params"), base_params)
            return _results_payload(pair, params_override)
        except (SchemaError, DegenerateGeometry) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
