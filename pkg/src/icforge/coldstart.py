"""Cold-start curation: bootstrap exemplars with zero-shot prompts, then
fold human review decisions into each task's in-context pool.

All state changes go through an append-only JSONL event log; the in-memory
store is a fold over that log, so a crash or restart replays to the same
state and every pool entry traces back to a persisted decision.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .annotations import VisualAnnotationBundle, render_annotation
from .errors import DoubleDecisionError, ForgeError, UnknownCandidateError
from .parsing import QAPair, parse_qa_pairs, render_qa_pairs, validate_pair
from .prompts import Exemplar, TaskProfile, assemble_prompt
from .tasks import TaskId

_LOG_VERSION = 1

ACCEPT = "accept"
REJECT = "reject"
EDIT = "edit"

PENDING = "pending"
ACCEPTED = "accepted"
REJECTED = "rejected"


@dataclass(frozen=True)
class ReviewDecision:
    candidate_id: str
    verdict: str  # accept | reject | edit
    edited_pair: QAPair | None = None
    rank_hint: int | None = None
    note: str = ""
    reviewer: str = ""
    decision_time: str = ""

    def __post_init__(self):
        if self.verdict not in (ACCEPT, REJECT, EDIT):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == EDIT and self.edited_pair is None:
            raise ValueError("edit decisions must carry the edited pair")


@dataclass
class Candidate:
    candidate_id: str
    task: TaskId
    pair: QAPair
    annotation_text: str
    media_ids: tuple[str, ...] = ()
    cache_key: str = ""
    status: str = PENDING
    decision: ReviewDecision | None = None


@dataclass
class PoolEntry:
    pair: QAPair
    annotation_text: str
    rank: int
    reviewer: str = ""
    decision_time: str = ""
    edited: bool = False
    candidate_id: str = ""


@dataclass
class InContextPool:
    task: TaskId
    entries: list[PoolEntry] = field(default_factory=list)
    ready: bool = False

    def ranks(self) -> list[int]:
        return [entry.rank for entry in self.entries]

    def renormalize(self) -> None:
        self.entries.sort(key=lambda e: e.rank)
        for i, entry in enumerate(self.entries, start=1):
            entry.rank = i

    def exemplars(self, schema) -> list[Exemplar]:
        """Pool entries as prompt exemplars, priority = rank order."""
        return [Exemplar(user_text=e.annotation_text,
                         assistant_text=render_qa_pairs([e.pair], schema),
                         rank=e.rank)
                for e in sorted(self.entries, key=lambda e: e.rank)]


def pool_ready(pool: InContextPool, min_entries: int) -> bool:
    return pool.ready and len(pool.entries) >= min_entries


# --- event log (de)serialization ---


def _pair_to_obj(pair: QAPair) -> dict:
    return {"question": pair.question, "answer": pair.answer,
            "source_cache_key": pair.source_cache_key, "flags": sorted(pair.flags)}


def _pair_from_obj(obj: dict) -> QAPair:
    return QAPair(question=obj["question"], answer=obj["answer"],
                  source_cache_key=obj.get("source_cache_key", ""),
                  flags=frozenset(obj.get("flags", ())))


def _decision_to_obj(decision: ReviewDecision) -> dict:
    obj = {"candidate_id": decision.candidate_id, "verdict": decision.verdict,
           "note": decision.note, "reviewer": decision.reviewer,
           "decision_time": decision.decision_time}
    if decision.edited_pair is not None:
        obj["edited_pair"] = _pair_to_obj(decision.edited_pair)
    if decision.rank_hint is not None:
        obj["rank_hint"] = decision.rank_hint
    return obj


def _decision_from_obj(obj: dict) -> ReviewDecision:
    return ReviewDecision(
        candidate_id=obj["candidate_id"],
        verdict=obj["verdict"],
        edited_pair=_pair_from_obj(obj["edited_pair"]) if "edited_pair" in obj else None,
        rank_hint=obj.get("rank_hint"),
        note=obj.get("note", ""),
        reviewer=obj.get("reviewer", ""),
        decision_time=obj.get("decision_time", ""),
    )


class ColdStartStore:
    """Candidates and pools for every task, persisted through one event log."""

    def __init__(self, log_path: str | Path, min_entries: int = 3):
        self.log_path = Path(log_path)
        self.min_entries = min_entries
        self.candidates: dict[str, Candidate] = {}
        self.pools: dict[TaskId, InContextPool] = {t: InContextPool(task=t) for t in TaskId}
        self.archive: dict[TaskId, list[str]] = {t: [] for t in TaskId}
        self._lock = threading.Lock()
        self._seq = 0
        if self.log_path.exists():
            self._replay()

    # --- persistence ---

    def _append_event(self, event: dict) -> None:
        event = {"v": _LOG_VERSION, **event}
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")
            fh.flush()

    def _replay(self) -> None:
        for line in self.log_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            kind = event["type"]
            if kind == "candidate":
                self._apply_candidate(event)
            elif kind == "decision":
                self._apply_decision(_decision_from_obj(event["decision"]))
            elif kind == "finalize":
                self._apply_finalize(TaskId(event["task"]))

    # --- candidate intake ---

    def _apply_candidate(self, event: dict) -> None:
        obj = event["candidate"]
        candidate = Candidate(
            candidate_id=obj["id"],
            task=TaskId(obj["task"]),
            pair=_pair_from_obj(obj["pair"]),
            annotation_text=obj["annotation_text"],
            media_ids=tuple(obj.get("media_ids", ())),
            cache_key=obj.get("cache_key", ""),
        )
        self.candidates[candidate.candidate_id] = candidate
        seq = candidate.candidate_id.rsplit("_", 1)[-1]
        if seq.isdigit():
            self._seq = max(self._seq, int(seq))

    def add_candidate(self, task: TaskId, pair: QAPair, annotation_text: str,
                      media_ids: tuple[str, ...] = (), cache_key: str = "") -> Candidate:
        with self._lock:
            self._seq += 1
            candidate_id = f"{task.value}_CAND_{self._seq:05d}"
            event = {"type": "candidate", "candidate": {
                "id": candidate_id, "task": task.value, "pair": _pair_to_obj(pair),
                "annotation_text": annotation_text, "media_ids": list(media_ids),
                "cache_key": cache_key,
            }}
            self._append_event(event)
            self._apply_candidate(event)
            return self.candidates[candidate_id]

    # --- decisions ---

    def _same_decision(self, earlier: ReviewDecision | None, new: ReviewDecision) -> bool:
        if earlier is None:
            return False
        return (earlier.verdict == new.verdict
                and earlier.rank_hint == new.rank_hint
                and earlier.edited_pair == new.edited_pair)

    def record_decision(self, decision: ReviewDecision) -> Candidate:
        """Persist then apply one decision; replays of the identical decision
        are acknowledged without re-applying."""
        with self._lock:
            candidate = self.candidates.get(decision.candidate_id)
            if candidate is None:
                raise UnknownCandidateError(f"no candidate {decision.candidate_id!r}")
            if self._same_decision(candidate.decision, decision):
                return candidate  # idempotent replay
            pool = self.pools[candidate.task]
            if pool.ready:
                raise ForgeError(f"pool for {candidate.task} is finalized")
            if candidate.status == REJECTED:
                raise DoubleDecisionError(
                    f"candidate {candidate.candidate_id} was already rejected")
            if candidate.status == ACCEPTED and decision.verdict == REJECT:
                raise DoubleDecisionError(
                    f"candidate {candidate.candidate_id} was already accepted")
            # accepted + accept/edit with a new rank or content: a reorder/edit
            self._append_event({"type": "decision", "decision": _decision_to_obj(decision)})
            return self._apply_decision(decision)

    def _apply_decision(self, decision: ReviewDecision) -> Candidate:
        candidate = self.candidates[decision.candidate_id]
        pool = self.pools[candidate.task]

        if decision.verdict == REJECT:
            candidate.status = REJECTED
            candidate.decision = decision
            self.archive[candidate.task].append(candidate.candidate_id)
            return candidate

        pair = decision.edited_pair if decision.verdict == EDIT else candidate.pair
        pair = validate_pair(pair, candidate.task)

        existing = next((e for e in pool.entries
                         if e.candidate_id == candidate.candidate_id), None)
        if existing is not None:
            pool.entries.remove(existing)
        entry = PoolEntry(
            pair=pair,
            annotation_text=candidate.annotation_text,
            rank=0,
            reviewer=decision.reviewer,
            decision_time=decision.decision_time,
            edited=decision.verdict == EDIT,
            candidate_id=candidate.candidate_id,
        )
        if decision.rank_hint is not None and 1 <= decision.rank_hint <= len(pool.entries) + 1:
            # shift entries at and below the hinted rank
            for other in pool.entries:
                if other.rank >= decision.rank_hint:
                    other.rank += 1
            entry.rank = decision.rank_hint
        else:
            entry.rank = max((e.rank for e in pool.entries), default=0) + 1
        pool.entries.append(entry)
        pool.renormalize()
        candidate.status = ACCEPTED
        candidate.decision = decision
        return candidate

    # --- finalize ---

    def finalize(self, task: TaskId) -> InContextPool:
        with self._lock:
            pool = self.pools[task]
            if pool.ready:
                return pool  # idempotent
            if len(pool.entries) < self.min_entries:
                raise ForgeError(
                    f"pool for {task} has {len(pool.entries)} entries; "
                    f"needs {self.min_entries} before finalize")
            self._append_event({"type": "finalize", "task": task.value})
            return self._apply_finalize(task)

    def _apply_finalize(self, task: TaskId) -> InContextPool:
        pool = self.pools[task]
        pool.ready = True
        return pool

    # --- queries ---

    def pending(self, task: TaskId) -> list[Candidate]:
        return [c for c in self.candidates.values()
                if c.task == task and c.status == PENDING]

    def pool(self, task: TaskId) -> InContextPool:
        return self.pools[task]


def generate_candidates(profile: TaskProfile, bundles: list[VisualAnnotationBundle],
                        k: int, gateway, store: ColdStartStore) -> tuple[list[Candidate], list[str]]:
    """Zero-exemplar generation: prompt with system message + annotation only,
    parse the completions, and stage up to ``k`` candidates for review."""
    if k < 1:
        raise ValueError("k must be >= 1")
    prompts = [assemble_prompt(profile, bundle, exemplars=[]) for bundle in bundles]
    for prompt in prompts:
        assert len(prompt.messages) == 2, "cold-start prompts are system + query only"
    results = gateway.submit_batch(prompts)

    candidates: list[Candidate] = []
    errors: list[str] = []
    for bundle, prompt, result in zip(bundles, prompts, results):
        if not result.ok:
            errors.append(f"{bundle.bundle_id}: {result.error}")
            continue
        try:
            pairs = parse_qa_pairs(result.response, profile.parse_schema)
        except ForgeError as exc:
            errors.append(f"{bundle.bundle_id}: {exc}")
            continue
        annotation_text = render_annotation(bundle)
        for pair in pairs:
            if len(candidates) >= k:
                break
            pair = validate_pair(
                QAPair(pair.question, pair.answer, source_cache_key=result.cache_key),
                profile.task)
            candidates.append(store.add_candidate(
                profile.task, pair, annotation_text,
                media_ids=bundle.media_ids, cache_key=result.cache_key))
        if len(candidates) >= k:
            break
    return candidates, errors
