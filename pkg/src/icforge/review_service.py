"""Loopback HTTP service for the cold-start review loop.

JSON endpoints over a :class:`~icforge.coldstart.ColdStartStore`:

* ``GET  /tasks``                                  roster + per-task counters
* ``GET  /tasks/{t}/candidates?status=pending``    review queue
* ``GET  /candidates/{id}``                        full candidate view
* ``POST /candidates/{id}/decision``               accept / reject / edit
* ``POST /tasks/{t}/finalize``                     freeze the pool
* ``GET  /tasks/{t}/pool``                         ranked pool entries

Reviewers are trusted maintainers, so the server binds to loopback and
carries no authentication. Mutations serialize through the store's lock;
replaying an identical decision POST acknowledges without duplicating.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .coldstart import ColdStartStore, ReviewDecision, _pair_to_obj
from .errors import DoubleDecisionError, ForgeError, UnknownCandidateError
from .parsing import QAPair
from .tasks import TaskId


class PairBody(BaseModel):
    question: str
    answer: str


class DecisionBody(BaseModel):
    verdict: str
    edited_pair: PairBody | None = None
    rank_hint: int | None = None
    note: str = ""
    reviewer: str = ""
    decision_time: str = ""


def _parse_task(name: str) -> TaskId:
    try:
        return TaskId(name)
    except ValueError:
        raise HTTPException(status_code=404, detail=f"unknown task {name!r}")


def create_app(store: ColdStartStore, registry_path: str | Path | None = None,
               reports_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="cold-start review service")

    media_index: dict[str, dict] = {}
    if registry_path and Path(registry_path).exists():
        doc = json.loads(Path(registry_path).read_text(encoding="utf-8"))
        media_index = doc.get("media", doc)

    def media_refs(media_ids) -> list[dict]:
        refs = []
        for mid in media_ids:
            entry = media_index.get(mid, {})
            refs.append({"id": mid,
                         "kind": entry.get("kind", "image"),
                         "uri": entry.get("uri_or_digest", "")})
        return refs

    def generation_counter(task: TaskId) -> int:
        if not reports_dir:
            return 0
        report = Path(reports_dir) / "generate.json"
        if not report.exists():
            return 0
        try:
            counts = json.loads(report.read_text(encoding="utf-8"))["tasks"]
            return int(counts.get(task.value, {}).get("pairs", 0))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            return 0

    def candidate_view(candidate) -> dict:
        return {
            "id": candidate.candidate_id,
            "task": candidate.task.value,
            "annotation": candidate.annotation_text,
            "media": media_refs(candidate.media_ids),
            "pair": _pair_to_obj(candidate.pair),
            "status": candidate.status,
            "cache_key": candidate.cache_key,
        }

    def pool_view(task: TaskId) -> dict:
        pool = store.pool(task)
        return {
            "task": task.value,
            "ready": pool.ready,
            "min_entries": store.min_entries,
            "entries": [{
                "rank": entry.rank,
                "pair": _pair_to_obj(entry.pair),
                "annotation": entry.annotation_text,
                "candidate_id": entry.candidate_id,
                "reviewer": entry.reviewer,
                "edited": entry.edited,
            } for entry in sorted(pool.entries, key=lambda e: e.rank)],
        }

    @app.get("/tasks")
    def list_tasks():
        return [{
            "task": task.value,
            "pending": len(store.pending(task)),
            "pool_size": len(store.pool(task).entries),
            "ready": store.pool(task).ready,
            "generated_pairs": generation_counter(task),
        } for task in TaskId]

    @app.get("/tasks/{task_name}/candidates")
    def list_candidates(task_name: str, status: str = "pending"):
        task = _parse_task(task_name)
        rows = [c for c in store.candidates.values() if c.task == task]
        if status != "all":
            rows = [c for c in rows if c.status == status]
        return [candidate_view(c) for c in sorted(rows, key=lambda c: c.candidate_id)]

    @app.get("/candidates/{candidate_id}")
    def get_candidate(candidate_id: str):
        candidate = store.candidates.get(candidate_id)
        if candidate is None:
            raise HTTPException(status_code=404, detail=f"no candidate {candidate_id!r}")
        return candidate_view(candidate)

    @app.post("/candidates/{candidate_id}/decision")
    def post_decision(candidate_id: str, body: DecisionBody):
        edited = None
        if body.edited_pair is not None:
            if not body.edited_pair.question.strip() or not body.edited_pair.answer.strip():
                raise HTTPException(status_code=422, detail="edited pair must be non-empty")
            edited = QAPair(body.edited_pair.question, body.edited_pair.answer)
        try:
            decision = ReviewDecision(
                candidate_id=candidate_id, verdict=body.verdict, edited_pair=edited,
                rank_hint=body.rank_hint, note=body.note, reviewer=body.reviewer,
                decision_time=body.decision_time)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            candidate = store.record_decision(decision)
        except UnknownCandidateError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except DoubleDecisionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ForgeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"ok": True, "candidate": candidate_view(candidate),
                "pool": pool_view(candidate.task)}

    @app.post("/tasks/{task_name}/finalize")
    def post_finalize(task_name: str):
        task = _parse_task(task_name)
        try:
            store.finalize(task)
        except ForgeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"ok": True, "pool": pool_view(task)}

    @app.get("/tasks/{task_name}/pool")
    def get_pool(task_name: str):
        return pool_view(_parse_task(task_name))

    return app


def serve(store: ColdStartStore, host: str = "127.0.0.1", port: int = 8710,
          registry_path: str | Path | None = None,
          reports_dir: str | Path | None = None) -> None:
    """Run the review service on loopback (blocking)."""
    import uvicorn

    app = create_app(store, registry_path=registry_path, reports_dir=reports_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
