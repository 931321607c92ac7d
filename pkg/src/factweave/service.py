"""Authoring service: dataset upload, story CRUD, interpolation, export.

State is file-backed (one JSON document per dataset and per story under the
persistence root), so a restart reproduces every GET exactly. Story mutations
go through compare-and-set versioning; one interpolation may run per story at
a time.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import EngineConfig
from .dataset import (
    Dataset,
    FieldKind,
    FieldSchema,
    evaluate_fact,
    load_dataset,
    recommend_facts,
    validate_fact,
)
from .errors import FactweaveError, InputError, ParseError, ValidationError
from .facts import Subspace, Filter, fact_to_spec, generate_caption, parse_fact_spec
from .search import interpolate, recommend_alternatives
from .story import (
    INTERPOLATED,
    KEYFRAME,
    STORY_FORMS,
    Story,
    StoryPiece,
    build_story_document,
    piece_from_dict,
)


@dataclass(frozen=True)
class StoryRecord:
    story: Story
    version: int
    created_at: float
    updated_at: float

    def as_dict(self) -> dict:
        doc = self.story.as_dict()
        doc["version"] = self.version
        doc["createdAt"] = self.created_at
        doc["updatedAt"] = self.updated_at
        return doc


class Store:
    """File-backed persistence with in-memory caches."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "datasets").mkdir(parents=True, exist_ok=True)
        (self.root / "stories").mkdir(parents=True, exist_ok=True)
        self._datasets: dict[str, Dataset] = {}
        self._records: dict[str, StoryRecord] = {}
        self._lock = threading.Lock()
        self._busy: set[str] = set()

    # -- datasets --

    def save_dataset(self, dataset: Dataset) -> None:
        doc = {
            "id": dataset.id,
            "schema": [f.as_dict() for f in dataset.schema],
            "rows": list(dataset.rows),
        }
        path = self.root / "datasets" / f"{dataset.id}.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        with self._lock:
            self._datasets[dataset.id] = dataset

    def get_dataset(self, dataset_id: str) -> Optional[Dataset]:
        with self._lock:
            hit = self._datasets.get(dataset_id)
        if hit is not None:
            return hit
        path = self.root / "datasets" / f"{dataset_id}.json"
        if not path.exists():
            return None
        doc = json.loads(path.read_text(encoding="utf-8"))
        schema = []
        for f in doc["schema"]:
            kind = FieldKind(f["kind"])
            if kind is FieldKind.NUMERICAL:
                domain = (f["domain"]["min"], f["domain"]["max"])
            else:
                domain = tuple(f["domain"]["values"])
            schema.append(FieldSchema(f["name"], kind, domain))
        dataset = Dataset(doc["id"], schema, doc["rows"])
        with self._lock:
            self._datasets[dataset_id] = dataset
        return dataset

    # -- stories --

    def _story_path(self, story_id: str) -> Path:
        return self.root / "stories" / f"{story_id}.json"

    def save_record(self, record: StoryRecord) -> None:
        self._story_path(record.story.id).write_text(
            json.dumps(record.as_dict()), encoding="utf-8"
        )
        with self._lock:
            self._records[record.story.id] = record

    def get_record(self, story_id: str) -> Optional[StoryRecord]:
        with self._lock:
            hit = self._records.get(story_id)
        if hit is not None:
            return hit
        path = self._story_path(story_id)
        if not path.exists():
            return None
        doc = json.loads(path.read_text(encoding="utf-8"))
        story = Story(
            id=doc["id"],
            title=doc.get("title", ""),
            dataset_id=doc["datasetId"],
            pieces=tuple(piece_from_dict(p) for p in doc.get("pieces", [])),
        )
        record = StoryRecord(story, doc["version"], doc["createdAt"], doc["updatedAt"])
        with self._lock:
            self._records[story_id] = record
        return record

    def next_story_id(self) -> str:
        with self._lock:
            existing = {p.stem for p in (self.root / "stories").glob("*.json")}
            n = len(existing) + 1
            while f"story-{n}" in existing:
                n += 1
            return f"story-{n}"

    def try_begin_interpolation(self, story_id: str) -> bool:
        with self._lock:
            if story_id in self._busy:
                return False
            self._busy.add(story_id)
            return True

    def end_interpolation(self, story_id: str) -> None:
        with self._lock:
            self._busy.discard(story_id)


def _error_response(status: int, error: str, message: str, extra: dict | None = None
                    ) -> JSONResponse:
    body = {"error": error, "message": message}
    if extra:
        body.update(extra)
    return JSONResponse(body, status_code=status)


def _subspace_from_param(raw: Optional[str]) -> Optional[Subspace]:
    if not raw:
        return None
    try:
        entries = json.loads(raw)
        return Subspace(tuple(Filter(e["field"], e["value"]) for e in entries))
    except (ValueError, KeyError, TypeError) as e:
        raise ParseError(f"bad filters parameter: {e}") from e


def create_app(config: EngineConfig = EngineConfig(), store: Optional[Store] = None
               ) -> FastAPI:
    app = FastAPI(title="factweave", version="0.1.0")
    if store is None:
        store = Store(config.service.persistence_root)
    app.state.store = store
    app.state.config = config

    @app.exception_handler(FactweaveError)
    async def engine_error_handler(request: Request, exc: FactweaveError):
        status = 400 if isinstance(exc, InputError) else 500
        extra = None
        if isinstance(exc, ValidationError) and hasattr(exc.report, "as_dict"):
            extra = {"report": exc.report.as_dict()}
        return _error_response(status, type(exc).__name__, str(exc), extra)

    def dataset_or_none(dataset_id: str) -> Optional[Dataset]:
        return store.get_dataset(dataset_id)

    # -- datasets --

    @app.post("/datasets", status_code=201)
    async def upload_dataset(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            upload = form.get("file")
            if upload is None:
                return _error_response(400, "FormatError", "multipart field 'file' missing")
            raw = await upload.read()
        else:
            raw = await request.body()
        if len(raw) > config.service.max_upload_bytes:
            return _error_response(
                413, "PayloadTooLarge",
                f"upload exceeds {config.service.max_upload_bytes} bytes",
            )
        dataset = load_dataset(raw)
        store.save_dataset(dataset)
        return JSONResponse(
            {
                "datasetId": dataset.id,
                "schema": [f.as_dict() for f in dataset.schema],
                "rowCount": dataset.row_count,
            },
            status_code=201,
        )

    @app.get("/datasets/{dataset_id}")
    async def get_dataset(dataset_id: str):
        dataset = dataset_or_none(dataset_id)
        if dataset is None:
            return _error_response(404, "NotFound", f"no dataset {dataset_id}")
        return {
            "datasetId": dataset.id,
            "schema": [f.as_dict() for f in dataset.schema],
            "rowCount": dataset.row_count,
        }

    @app.get("/datasets/{dataset_id}/rows")
    async def get_rows(dataset_id: str, offset: int = 0, limit: int = 50):
        dataset = dataset_or_none(dataset_id)
        if dataset is None:
            return _error_response(404, "NotFound", f"no dataset {dataset_id}")
        rows = list(dataset.rows[offset:offset + max(0, limit)])
        return {"rows": rows, "offset": offset, "total": dataset.row_count}

    @app.get("/datasets/{dataset_id}/recommendations")
    async def recommendations(dataset_id: str, k: int = 10, filters: Optional[str] = None):
        dataset = dataset_or_none(dataset_id)
        if dataset is None:
            return _error_response(404, "NotFound", f"no dataset {dataset_id}")
        subspace = _subspace_from_param(filters)
        scored = recommend_facts(dataset, k, filters=subspace, caps=config.caps,
                                 thresholds=config.thresholds)
        return {
            "recommendations": [
                {"fact": fact_to_spec(s.fact), "significance": s.significance,
                 "caption": generate_caption(s.fact, evaluate_fact(dataset, s.fact,
                                                                   config.thresholds))}
                for s in scored
            ]
        }

    # -- facts --

    @app.post("/facts/validate")
    async def facts_validate(body: dict):
        dataset = dataset_or_none(body.get("datasetId", ""))
        if dataset is None:
            return _error_response(404, "NotFound", "unknown datasetId")
        fact = parse_fact_spec(body.get("fact") or {})
        report = validate_fact(dataset, fact, config.thresholds)
        return report.as_dict()

    @app.post("/facts/preview")
    async def facts_preview(body: dict):
        dataset = dataset_or_none(body.get("datasetId", ""))
        if dataset is None:
            return _error_response(404, "NotFound", "unknown datasetId")
        fact = parse_fact_spec(body.get("fact") or {})
        report = validate_fact(dataset, fact, config.thresholds)
        if not report.valid:
            return _error_response(422, "ValidationError", report.violations[0].rule,
                                   {"report": report.as_dict()})
        view = evaluate_fact(dataset, fact, config.thresholds)
        return {"view": view.as_dict(), "caption": generate_caption(fact, view)}

    # -- stories --

    def _validate_pieces(dataset: Dataset, pieces: tuple[StoryPiece, ...]):
        for i, piece in enumerate(pieces):
            if piece.fact is None:
                continue
            report = validate_fact(dataset, piece.fact, config.thresholds)
            if not report.valid:
                raise _PieceInvalid(i, report)

    class _PieceInvalid(Exception):
        def __init__(self, index: int, report):
            self.index = index
            self.report = report

    @app.post("/stories", status_code=201)
    async def create_story(body: dict):
        dataset = dataset_or_none(body.get("datasetId", ""))
        if dataset is None:
            return _error_response(404, "NotFound", "unknown datasetId")
        story = Story(
            id=store.next_story_id(),
            title=str(body.get("title", "")),
            dataset_id=dataset.id,
            pieces=(),
        )
        now = time.time()
        record = StoryRecord(story, version=1, created_at=now, updated_at=now)
        store.save_record(record)
        return JSONResponse(record.as_dict(), status_code=201)

    @app.get("/stories/{story_id}")
    async def get_story(story_id: str):
        record = store.get_record(story_id)
        if record is None:
            return _error_response(404, "NotFound", f"no story {story_id}")
        return record.as_dict()

    @app.put("/stories/{story_id}/pieces")
    async def put_pieces(story_id: str, body: dict):
        record = store.get_record(story_id)
        if record is None:
            return _error_response(404, "NotFound", f"no story {story_id}")
        base_version = body.get("baseVersion")
        if base_version is not None and base_version != record.version:
            return _error_response(
                409, "VersionConflict",
                f"story is at version {record.version}, request based on {base_version}",
            )
        dataset = dataset_or_none(record.story.dataset_id)
        pieces = tuple(piece_from_dict(p) for p in body.get("pieces", []))
        try:
            _validate_pieces(dataset, pieces)
        except _PieceInvalid as e:
            return _error_response(
                422, "ValidationError",
                f"piece {e.index} is invalid: {e.report.violations[0].rule}",
                {"report": e.report.as_dict(), "pieceIndex": e.index},
            )
        story = replace(record.story, pieces=pieces)
        updated = StoryRecord(story, record.version + 1, record.created_at, time.time())
        store.save_record(updated)
        return updated.as_dict()

    @app.post("/stories/{story_id}/interpolate")
    async def interpolate_story(story_id: str, body: dict):
        record = store.get_record(story_id)
        if record is None:
            return _error_response(404, "NotFound", f"no story {story_id}")
        dataset = dataset_or_none(record.story.dataset_id)
        pieces = record.story.pieces
        after = body.get("afterPieceIndex")
        if not isinstance(after, int) or not (0 <= after < len(pieces)):
            return _error_response(422, "ValidationError", "afterPieceIndex out of range")
        if pieces[after].provenance != KEYFRAME:
            return _error_response(422, "ValidationError",
                                   "piece at afterPieceIndex is not a keyframe")
        nxt = next(
            (j for j in range(after + 1, len(pieces)) if pieces[j].provenance == KEYFRAME),
            None,
        )
        if nxt is None:
            return _error_response(422, "ValidationError",
                                   "no succeeding keyframe to interpolate towards")
        overrides = body.get("configOverrides") or {}
        n = body.get("N", body.get("n"))
        interp = config.interpolation
        changes = {}
        if n is not None:
            changes["n"] = int(n)
        for key in ("lambda_rel", "max_iterations", "rollout_depth", "exploration_c",
                    "branch_cap", "rng_seed", "time_budget_ms"):
            camel = key.split("_")[0] + "".join(w.title() for w in key.split("_")[1:])
            if camel in overrides:
                changes[key] = overrides[camel]
            elif key in overrides:
                changes[key] = overrides[key]
        if changes:
            interp = replace(interp, **changes)

        if not store.try_begin_interpolation(story_id):
            return _error_response(409, "InterpolationRunning",
                                   "an interpolation for this story is already running")
        try:
            result = interpolate(
                dataset, pieces[after].fact, pieces[nxt].fact,
                config=interp, embedder_config=config.embedder,
                thresholds=config.thresholds,
            )
        except ValidationError as e:
            return _error_response(422, "ValidationError", str(e))
        except FactweaveError as e:
            return _error_response(422, type(e).__name__, str(e))
        finally:
            store.end_interpolation(story_id)

        generated = tuple(
            StoryPiece(
                provenance=INTERPOLATED,
                fact=fact,
                caption=generate_caption(
                    fact, evaluate_fact(dataset, fact, config.thresholds)
                ),
            )
            for fact in result.facts
        )
        # generated pieces replace whatever sat between the two keyframes
        new_pieces = pieces[: after + 1] + generated + pieces[nxt:]
        current = store.get_record(story_id)
        story = replace(current.story, pieces=new_pieces)
        updated = StoryRecord(story, current.version + 1, current.created_at, time.time())
        store.save_record(updated)
        doc = updated.as_dict()
        doc["interpolation"] = {
            "iterations": result.iterations,
            "terminated": result.terminated,
            "warnings": list(result.warnings),
            "rewards": list(result.rewards),
        }
        return doc

    @app.post("/stories/{story_id}/alternatives")
    async def story_alternatives(story_id: str, body: dict):
        record = store.get_record(story_id)
        if record is None:
            return _error_response(404, "NotFound", f"no story {story_id}")
        pieces = record.story.pieces
        index = body.get("pieceIndex")
        if not isinstance(index, int) or not (0 <= index < len(pieces)):
            return _error_response(422, "ValidationError", "pieceIndex out of range")
        prev = next((pieces[j] for j in range(index - 1, -1, -1)
                     if pieces[j].provenance == KEYFRAME), None)
        nxt = next((pieces[j] for j in range(index + 1, len(pieces))
                    if pieces[j].provenance == KEYFRAME), None)
        if prev is None or nxt is None:
            return _error_response(
                409, "MissingNeighbors",
                "piece needs a keyframe predecessor and successor",
            )
        dataset = dataset_or_none(record.story.dataset_id)
        try:
            scored = recommend_alternatives(
                dataset, prev.fact, nxt.fact, config=config.interpolation,
                embedder_config=config.embedder, thresholds=config.thresholds,
            )
        except FactweaveError as e:
            return _error_response(422, type(e).__name__, str(e))
        return {
            "alternatives": [
                {"fact": fact_to_spec(s.fact), "significance": s.significance}
                for s in scored
            ]
        }

    @app.get("/stories/{story_id}/export")
    async def export_story(story_id: str, form: str = "storyline"):
        record = store.get_record(story_id)
        if record is None:
            return _error_response(404, "NotFound", f"no story {story_id}")
        if form not in STORY_FORMS:
            return _error_response(422, "ValidationError", f"unknown form {form!r}")
        dataset = dataset_or_none(record.story.dataset_id)
        doc = build_story_document(record.story, dataset, form, config.thresholds)
        doc["version"] = record.version
        return doc

    return app
