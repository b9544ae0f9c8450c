"""HTTP service backing the annotation UI.

Items are served blinded (system names withheld); annotations are appended
to the durable store. Static assets (the built UI) are mounted at / when a
directory is supplied.
"""

from __future__ import annotations

import datetime
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from laybench.humaneval import (
    ASPECTS,
    PROTOCOL_TEXT,
    Annotation,
    AnnotationError,
    AnnotationStore,
    DuplicateAnnotationError,
    EvalItem,
    UnknownItemError,
)

__all__ = ["create_app"]


def _blinded_view(item: EvalItem) -> dict:
    return {
        "item_id": item.item_id,
        "abstract": item.abstract,
        "candidates": [
            {"blinded_label": c.blinded_label, "summary": c.summary}
            for c in sorted(item.candidates, key=lambda c: c.blinded_label)
        ],
        "aspects": list(ASPECTS),
        "protocol": PROTOCOL_TEXT,
    }


def create_app(items: Mapping[str, EvalItem], store: AnnotationStore, *,
               static_dir: str | Path | None = None,
               assignments: Mapping[str, list[str]] | None = None) -> FastAPI:
    """Wire the annotation API around an item set and a store.

    assignments restricts each assessor to a subset of item ids; by default
    every assessor annotates every item.
    """
    app = FastAPI(title="laybench annotation service")
    ordered_items = sorted(items.values(), key=lambda item: item.item_id)

    def items_for(assessor: str) -> list[EvalItem]:
        if assignments is None or assessor not in assignments:
            return ordered_items
        allowed = set(assignments[assessor])
        return [item for item in ordered_items if item.item_id in allowed]

    @app.get("/api/items/next")
    def next_item(assessor: str) -> JSONResponse:
        if not assessor:
            return JSONResponse({"error": "assessor query parameter required"},
                                status_code=422)
        done = store.annotated_item_ids(assessor)
        assigned = items_for(assessor)
        remaining = [item for item in assigned if item.item_id not in done]
        progress = {"completed": len(assigned) - len(remaining),
                    "assigned": len(assigned)}
        if not remaining:
            return JSONResponse({"item": None, "done": True,
                                 "progress": progress})
        return JSONResponse({"item": _blinded_view(remaining[0]),
                             "done": False, "progress": progress})

    @app.post("/api/annotations")
    async def post_annotation(payload: dict) -> Response:
        record = dict(payload)
        record.setdefault(
            "timestamp",
            datetime.datetime.now(datetime.timezone.utc).isoformat())
        try:
            annotation = Annotation.from_record(record)
            ack = store.record(annotation)
        except DuplicateAnnotationError as exc:
            return JSONResponse({"error": str(exc)}, status_code=409)
        except (UnknownItemError, AnnotationError) as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        return JSONResponse(ack, status_code=201)

    @app.get("/api/progress")
    def progress() -> JSONResponse:
        per_assessor = store.progress()
        return JSONResponse({
            "assessors": {
                assessor: {"completed": count,
                           "assigned": len(items_for(assessor))}
                for assessor, count in per_assessor.items()
            },
            "total_items": len(ordered_items),
            "total_annotations": sum(per_assessor.values()),
        })

    if static_dir is not None and Path(static_dir).exists():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")
    return app
