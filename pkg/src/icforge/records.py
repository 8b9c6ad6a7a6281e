"""Core data model: instruction records, media registry, dataset container.

A dataset is a map of instruction records plus a registry describing the
media they reference. Serialization is canonical JSON (UTF-8, sorted keys,
compact separators) so identical datasets always produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import (
    EmptyMediaError,
    IntegrityViolationError,
    MalformedInputError,
    SelfReferenceError,
    UnknownLanguageError,
)
from .tasks import LANGUAGES, TaskId

FORMAT_VERSION = "1"

MEDIA_KINDS = ("image", "video_frame")


@dataclass(frozen=True)
class MediaEntry:
    """One registered image or video frame."""

    media_id: str
    source_dataset: str
    kind: str  # image | video_frame
    uri_or_digest: str
    frame_index: int | None = None

    def __post_init__(self):
        if self.kind not in MEDIA_KINDS:
            raise ValueError(f"media kind must be one of {MEDIA_KINDS}, got {self.kind!r}")
        if self.kind == "video_frame":
            if self.frame_index is None or self.frame_index < 0:
                raise ValueError(f"video frame {self.media_id} needs a frame_index >= 0")


@dataclass
class MediaRegistry:
    """MediaId -> entry map; ids are unique by construction."""

    entries: dict[str, MediaEntry] = field(default_factory=dict)

    def add(self, entry: MediaEntry) -> None:
        existing = self.entries.get(entry.media_id)
        if existing is not None and existing != entry:
            raise ValueError(f"media id {entry.media_id} already registered differently")
        self.entries[entry.media_id] = entry

    def __contains__(self, media_id: str) -> bool:
        return media_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, media_id: str) -> MediaEntry | None:
        return self.entries.get(media_id)


@dataclass(frozen=True)
class InstructionRecord:
    """One instruction/response pair over a set of media, plus its context links.

    ``rel_ids`` point at other records of the same task that act as the
    in-context set for this one; a record never lists itself.
    """

    id: str
    task: TaskId
    instruction: str
    response: str
    image_ids: tuple[str, ...]
    rel_ids: tuple[str, ...] = ()
    language: str = "en"

    def __post_init__(self):
        if not self.image_ids:
            raise EmptyMediaError(f"record {self.id} has no media")
        if self.language not in LANGUAGES:
            raise UnknownLanguageError(
                f"record {self.id}: language {self.language!r} not in {LANGUAGES}")
        if self.id in self.rel_ids:
            raise SelfReferenceError(f"record {self.id} references itself")


@dataclass
class DatasetMeta:
    name: str
    version: str = FORMAT_VERSION
    created_at: str = ""
    generator_config_digest: str = ""


@dataclass
class Dataset:
    """Immutable-after-build container of records plus their media registry."""

    meta: DatasetMeta
    records: dict[str, InstructionRecord] = field(default_factory=dict)
    registry: MediaRegistry = field(default_factory=MediaRegistry)

    def __len__(self) -> int:
        return len(self.records)

    def validate_integrity(self) -> None:
        """Raise IntegrityViolationError on the first broken reference."""
        for rec in self.records.values():
            for mid in rec.image_ids:
                if mid not in self.registry:
                    raise IntegrityViolationError(
                        f"record {rec.id} references unknown media {mid}", offending_id=mid)
            for rid in rec.rel_ids:
                other = self.records.get(rid)
                if other is None:
                    raise IntegrityViolationError(
                        f"record {rec.id} references unknown record {rid}", offending_id=rid)
                if other.task != rec.task:
                    raise IntegrityViolationError(
                        f"record {rec.id} ({rec.task}) references {rid} of task {other.task}",
                        offending_id=rid)
            if rec.id in rec.rel_ids:  # unreachable: rejected at construction
                raise IntegrityViolationError(
                    f"record {rec.id} appears in its own context", offending_id=rec.id)


class DatasetBuilder:
    """Single-writer builder that mints record ids and accumulates media.

    Ids follow ``{TASK}_INS_{seq}`` (records) and ``{TASK}_IMG_{seq}``
    (media) so integrity errors read well. Translated records append a
    language suffix, see :mod:`icforge.translate`.
    """

    def __init__(self, name: str, created_at: str = "", generator_config_digest: str = ""):
        self.meta = DatasetMeta(name=name, created_at=created_at,
                                generator_config_digest=generator_config_digest)
        self.records: dict[str, InstructionRecord] = {}
        self.registry = MediaRegistry()
        self._ins_seq: dict[TaskId, int] = {}
        self._img_seq: dict[TaskId, int] = {}

    def next_record_id(self, task: TaskId) -> str:
        seq = self._ins_seq.get(task, 0) + 1
        self._ins_seq[task] = seq
        return f"{task.value}_INS_{seq:06d}"

    def register_media(self, task: TaskId, source_dataset: str, kind: str,
                       uri_or_digest: str, frame_index: int | None = None) -> str:
        seq = self._img_seq.get(task, 0) + 1
        self._img_seq[task] = seq
        media_id = f"{task.value}_IMG_{seq:06d}"
        self.registry.add(MediaEntry(media_id, source_dataset, kind, uri_or_digest, frame_index))
        return media_id

    def add_media_entry(self, entry: MediaEntry) -> None:
        """Register a media entry whose id was minted elsewhere (e.g. ingest)."""
        self.registry.add(entry)
        # keep the sequence counter ahead of externally minted ids
        parts = entry.media_id.split("_IMG_")
        if len(parts) == 2 and parts[1].isdigit():
            try:
                task = TaskId(parts[0])
            except ValueError:
                return
            self._img_seq[task] = max(self._img_seq.get(task, 0), int(parts[1]))

    def build_record(self, instruction: str, response: str, media: list[str],
                     context_ids: list[str], task: TaskId, language: str = "en",
                     record_id: str | None = None) -> InstructionRecord:
        """Mint a record; ``context_ids`` are kept verbatim, order preserved."""
        if not media:
            raise EmptyMediaError("a record needs at least one media id")
        if language not in LANGUAGES:
            raise UnknownLanguageError(f"language {language!r} not in {LANGUAGES}")
        rid = record_id if record_id is not None else self.next_record_id(task)
        if rid in self.records:
            raise ValueError(f"record id {rid} already present")
        if rid in context_ids:
            raise SelfReferenceError(f"freshly minted id {rid} appears in context_ids")
        rec = InstructionRecord(
            id=rid,
            task=task,
            instruction=instruction,
            response=response,
            image_ids=tuple(media),
            rel_ids=tuple(context_ids),
            language=language,
        )
        self.records[rid] = rec
        return rec

    def set_context(self, record_id: str, context_ids: list[str]) -> InstructionRecord:
        """Replace a record's context links (used by the packing stage)."""
        rec = self.records[record_id]
        if record_id in context_ids:
            raise SelfReferenceError(f"record {record_id} cannot be its own context")
        updated = replace(rec, rel_ids=tuple(context_ids))
        self.records[record_id] = updated
        return updated

    def build(self) -> Dataset:
        ds = Dataset(meta=self.meta, records=dict(self.records),
                     registry=MediaRegistry(dict(self.registry.entries)))
        ds.validate_integrity()
        return ds


# --- canonical serialization ---


def canonical_json_bytes(obj) -> bytes:
    """UTF-8 JSON with sorted keys and compact separators; byte-stable."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")


def record_to_obj(rec: InstructionRecord) -> dict:
    return {
        "task": rec.task.value,
        "instruction": rec.instruction,
        "answer": rec.response,
        "image_ids": list(rec.image_ids),
        "rel_ins_ids": list(rec.rel_ids),
        "language": rec.language,
    }


def record_from_obj(record_id: str, obj: dict) -> InstructionRecord:
    try:
        return InstructionRecord(
            id=record_id,
            task=TaskId(obj["task"]),
            instruction=obj["instruction"],
            response=obj["answer"],
            image_ids=tuple(obj["image_ids"]),
            rel_ids=tuple(obj["rel_ins_ids"]),
            language=obj.get("language", "en"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInputError(f"record {record_id}: {exc}") from exc


def media_entry_to_obj(entry: MediaEntry) -> dict:
    obj = {
        "source_dataset": entry.source_dataset,
        "kind": entry.kind,
        "uri_or_digest": entry.uri_or_digest,
    }
    if entry.frame_index is not None:
        obj["frame_index"] = entry.frame_index
    return obj


def media_entry_from_obj(media_id: str, obj: dict) -> MediaEntry:
    try:
        return MediaEntry(
            media_id=media_id,
            source_dataset=obj["source_dataset"],
            kind=obj["kind"],
            uri_or_digest=obj["uri_or_digest"],
            frame_index=obj.get("frame_index"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInputError(f"media {media_id}: {exc}") from exc


def registry_to_obj(registry: MediaRegistry) -> dict:
    return {mid: media_entry_to_obj(e) for mid, e in registry.entries.items()}


def registry_from_obj(obj: dict) -> MediaRegistry:
    reg = MediaRegistry()
    for mid, entry_obj in obj.items():
        reg.add(media_entry_from_obj(mid, entry_obj))
    return reg


def serialize_dataset(dataset: Dataset) -> bytes:
    """Canonical self-contained bytes for a dataset (records + registry)."""
    dataset.validate_integrity()
    doc = {
        "meta": {
            "name": dataset.meta.name,
            "version": dataset.meta.version,
            "created_at": dataset.meta.created_at,
            "generator_config_digest": dataset.meta.generator_config_digest,
        },
        "data": {rid: record_to_obj(rec) for rid, rec in dataset.records.items()},
        "registry": registry_to_obj(dataset.registry),
    }
    return canonical_json_bytes(doc)


def parse_dataset(raw: bytes) -> Dataset:
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedInputError(str(exc)) from exc
    if not isinstance(doc, dict) or not {"meta", "data", "registry"} <= set(doc):
        raise MalformedInputError("dataset document needs meta, data and registry")
    meta_obj = doc["meta"]
    try:
        meta = DatasetMeta(
            name=meta_obj["name"],
            version=meta_obj["version"],
            created_at=meta_obj.get("created_at", ""),
            generator_config_digest=meta_obj.get("generator_config_digest", ""),
        )
    except (KeyError, TypeError) as exc:
        raise MalformedInputError(f"bad meta: {exc}") from exc
    records = {rid: record_from_obj(rid, obj) for rid, obj in doc["data"].items()}
    registry = registry_from_obj(doc["registry"])
    ds = Dataset(meta=meta, records=records, registry=registry)
    ds.validate_integrity()
    return ds


# --- per-task export layout ---
# Exports keep media metadata out of the dataset files: one JSON document
# per task under `{task}.json` plus a shared `media_registry.json`.


def task_document(dataset: Dataset, task: TaskId) -> dict:
    recs = {rid: record_to_obj(rec) for rid, rec in dataset.records.items()
            if rec.task == task}
    return {
        "meta": {
            "name": dataset.meta.name,
            "task": task.value,
            "version": dataset.meta.version,
            "created_at": dataset.meta.created_at,
            "generator_config_digest": dataset.meta.generator_config_digest,
        },
        "data": recs,
    }


def registry_document(dataset: Dataset) -> dict:
    return {
        "meta": {
            "name": dataset.meta.name,
            "version": dataset.meta.version,
            "created_at": dataset.meta.created_at,
        },
        "media": registry_to_obj(dataset.registry),
    }
