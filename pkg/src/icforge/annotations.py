"""Visual annotation bundles and their deterministic text rendering.

Each task feeds the annotator a different flavor of ground-truth text
(captions, difference sentences, timestamped descriptions, ...). A bundle
carries the media ids it describes plus one task-appropriate payload;
``render_annotation`` turns it into the exact text block the prompts embed.

Empty optional sub-fields are omitted from the rendered text rather than
printed as empty lists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import SchemaMismatchError
from .tasks import TaskId


@dataclass(frozen=True)
class CaptionAnnotation:
    """Caption set plus object annotations (single images and general pairs)."""

    captions: tuple[str, ...]
    objects: tuple[str, ...] = ()

    def validate(self) -> None:
        if not self.captions:
            raise SchemaMismatchError("caption annotation needs at least one caption")


@dataclass(frozen=True)
class DifferenceAnnotation:
    """Natural-language difference sentences for a surveillance frame pair."""

    sentences: tuple[str, ...]

    def validate(self) -> None:
        if not self.sentences:
            raise SchemaMismatchError("difference annotation needs at least one sentence")


@dataclass(frozen=True)
class StoryImage:
    image: str
    tags: tuple[str, ...] = ()
    annotations: tuple[str, ...] = ()


@dataclass(frozen=True)
class StoryAnnotation:
    """Album title/description plus per-image tags and annotation sentences."""

    title: str
    description: str
    images: tuple[StoryImage, ...]

    def validate(self) -> None:
        if not self.images:
            raise SchemaMismatchError("story annotation needs at least one image")


@dataclass(frozen=True)
class DenseCaptionAnnotation:
    """Clip timestamps paired with their descriptions."""

    timestamps: tuple[tuple[float, float], ...]
    sentences: tuple[str, ...]

    def validate(self) -> None:
        if len(self.timestamps) != len(self.sentences):
            raise SchemaMismatchError(
                f"{len(self.timestamps)} timestamps vs {len(self.sentences)} sentences")
        if not self.sentences:
            raise SchemaMismatchError("dense-caption annotation is empty")
        for start, end in self.timestamps:
            if start < 0 or end < 0 or start > end:
                raise SchemaMismatchError(f"bad timestamp pair [{start}, {end}]")


@dataclass(frozen=True)
class EgoEvent:
    timestamp: float
    description: str
    objects: tuple[str, ...] = ()


@dataclass(frozen=True)
class EgoAnnotation:
    """Timestamped first-person event descriptions with visible objects."""

    events: tuple[EgoEvent, ...]

    def validate(self) -> None:
        if not self.events:
            raise SchemaMismatchError("ego annotation needs at least one event")
        stamps = [event.timestamp for event in self.events]
        if stamps != sorted(stamps):
            raise SchemaMismatchError("ego events must be sorted by timestamp")
        if any(event.timestamp < 0 for event in self.events):
            raise SchemaMismatchError("ego timestamps must be non-negative")


@dataclass(frozen=True)
class ActivityCandidate:
    activity: str
    role: str


@dataclass(frozen=True)
class SceneViewAnnotation:
    """Room-layout view sentences plus candidate activities and roles."""

    sentences: tuple[str, ...]
    activities: tuple[ActivityCandidate, ...] = ()

    def validate(self) -> None:
        if not self.sentences:
            raise SchemaMismatchError("scene annotation needs at least one view sentence")


@dataclass(frozen=True)
class ShotAnnotation:
    """Ordered shot descriptions for a TV clip."""

    shots: tuple[str, ...]

    def validate(self) -> None:
        if not self.shots:
            raise SchemaMismatchError("shot annotation needs at least one shot")


AnnotationPayload = (CaptionAnnotation | DifferenceAnnotation | StoryAnnotation |
                     DenseCaptionAnnotation | EgoAnnotation | SceneViewAnnotation |
                     ShotAnnotation)

_ALLOWED_PAYLOADS: dict[TaskId, tuple[type, ...]] = {
    TaskId.LA_I: (CaptionAnnotation,),
    TaskId.SD: (CaptionAnnotation, DifferenceAnnotation),
    TaskId.VIST: (StoryAnnotation,),
    TaskId.DC: (DenseCaptionAnnotation,),
    TaskId.E4D: (EgoAnnotation,),
    TaskId.IEP: (SceneViewAnnotation,),
    TaskId.TVC: (ShotAnnotation,),
}


@dataclass(frozen=True)
class VisualAnnotationBundle:
    """One annotator input: the media it covers plus its textual ground truth."""

    bundle_id: str
    task: TaskId
    media_ids: tuple[str, ...]
    payload: AnnotationPayload

    def validate(self) -> None:
        allowed = _ALLOWED_PAYLOADS[self.task]
        if not isinstance(self.payload, allowed):
            raise SchemaMismatchError(
                f"bundle {self.bundle_id}: payload {type(self.payload).__name__} "
                f"not valid for task {self.task}")
        if not self.media_ids:
            raise SchemaMismatchError(f"bundle {self.bundle_id} references no media")
        self.payload.validate()


# --- rendering ---


def _json_list(items) -> str:
    return json.dumps(list(items), ensure_ascii=False)


def _render_captions(payload: CaptionAnnotation) -> str:
    lines = [f"captions: {_json_list(payload.captions)}"]
    if payload.objects:
        lines.append(f"objects: {_json_list(payload.objects)}")
    return "\n".join(lines)


def _render_differences(payload: DifferenceAnnotation) -> str:
    return "\n\n".join(payload.sentences)


def _render_story(payload: StoryAnnotation) -> str:
    blocks = [f"title: {payload.title}\ndescription: {payload.description}"]
    for image in payload.images:
        lines = [f"image: {image.image}"]
        if image.tags:
            lines.append(f"tags: {' '.join(image.tags)}")
        if image.annotations:
            lines.append(f"annotations: {_json_list(image.annotations)}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def _render_dense_captions(payload: DenseCaptionAnnotation) -> str:
    def fmt(value: float) -> str:
        return str(int(value)) if float(value).is_integer() else str(value)

    pairs = ", ".join(f"[{fmt(s)}, {fmt(e)}]" for s, e in payload.timestamps)
    return f"timestamps: [{pairs}]\nsentences: {_json_list(payload.sentences)}"


def _render_ego(payload: EgoAnnotation) -> str:
    blocks = []
    for event in payload.events:
        stamp = int(event.timestamp) if float(event.timestamp).is_integer() else event.timestamp
        lines = [f"timestamp: {stamp}", f"description: {event.description}"]
        if event.objects:
            lines.append("objects: " + "; ".join(event.objects) + ";")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def _render_scene(payload: SceneViewAnnotation) -> str:
    sentences = "\n".join(payload.sentences)
    text = f"sentences: {sentences}"
    if payload.activities:
        activity_lines = [f"{a.activity} - Human role: {a.role}" for a in payload.activities]
        text += ("\n\nCandidate activity and the role who want to do this activity:"
                 + "\n".join(activity_lines))
    return text


def _render_shots(payload: ShotAnnotation) -> str:
    return "\n\n".join(f"{i}. {shot}" for i, shot in enumerate(payload.shots, start=1))


_RENDERERS = {
    CaptionAnnotation: _render_captions,
    DifferenceAnnotation: _render_differences,
    StoryAnnotation: _render_story,
    DenseCaptionAnnotation: _render_dense_captions,
    EgoAnnotation: _render_ego,
    SceneViewAnnotation: _render_scene,
    ShotAnnotation: _render_shots,
}


def render_annotation(bundle: VisualAnnotationBundle) -> str:
    """Deterministic text block for a validated bundle."""
    bundle.validate()
    renderer = _RENDERERS[type(bundle.payload)]
    return renderer(bundle.payload)


# --- JSON round-trip for ingest artifacts ---

_PAYLOAD_KINDS = {
    "captions": CaptionAnnotation,
    "differences": DifferenceAnnotation,
    "story": StoryAnnotation,
    "dense_captions": DenseCaptionAnnotation,
    "ego_events": EgoAnnotation,
    "scene_views": SceneViewAnnotation,
    "shots": ShotAnnotation,
}
_KIND_BY_TYPE = {cls: kind for kind, cls in _PAYLOAD_KINDS.items()}


def payload_to_obj(payload: AnnotationPayload) -> dict:
    kind = _KIND_BY_TYPE[type(payload)]
    if isinstance(payload, CaptionAnnotation):
        body = {"captions": list(payload.captions), "objects": list(payload.objects)}
    elif isinstance(payload, DifferenceAnnotation):
        body = {"sentences": list(payload.sentences)}
    elif isinstance(payload, StoryAnnotation):
        body = {"title": payload.title, "description": payload.description,
                "images": [{"image": im.image, "tags": list(im.tags),
                            "annotations": list(im.annotations)} for im in payload.images]}
    elif isinstance(payload, DenseCaptionAnnotation):
        body = {"timestamps": [[s, e] for s, e in payload.timestamps],
                "sentences": list(payload.sentences)}
    elif isinstance(payload, EgoAnnotation):
        body = {"events": [{"timestamp": ev.timestamp, "description": ev.description,
                            "objects": list(ev.objects)} for ev in payload.events]}
    elif isinstance(payload, SceneViewAnnotation):
        body = {"sentences": list(payload.sentences),
                "activities": [{"activity": a.activity, "role": a.role}
                               for a in payload.activities]}
    else:
        body = {"shots": list(payload.shots)}
    return {"kind": kind, **body}


def payload_from_obj(obj: dict) -> AnnotationPayload:
    kind = obj.get("kind")
    if kind not in _PAYLOAD_KINDS:
        raise SchemaMismatchError(f"unknown payload kind {kind!r}")
    if kind == "captions":
        return CaptionAnnotation(tuple(obj["captions"]), tuple(obj.get("objects", ())))
    if kind == "differences":
        return DifferenceAnnotation(tuple(obj["sentences"]))
    if kind == "story":
        return StoryAnnotation(obj["title"], obj["description"],
                               tuple(StoryImage(im["image"], tuple(im.get("tags", ())),
                                                tuple(im.get("annotations", ())))
                                     for im in obj["images"]))
    if kind == "dense_captions":
        return DenseCaptionAnnotation(tuple((s, e) for s, e in obj["timestamps"]),
                                      tuple(obj["sentences"]))
    if kind == "ego_events":
        return EgoAnnotation(tuple(EgoEvent(ev["timestamp"], ev["description"],
                                            tuple(ev.get("objects", ())))
                                   for ev in obj["events"]))
    if kind == "scene_views":
        return SceneViewAnnotation(tuple(obj["sentences"]),
                                   tuple(ActivityCandidate(a["activity"], a["role"])
                                         for a in obj.get("activities", ())))
    return ShotAnnotation(tuple(obj["shots"]))


def bundle_to_obj(bundle: VisualAnnotationBundle) -> dict:
    return {
        "id": bundle.bundle_id,
        "task": bundle.task.value,
        "media_ids": list(bundle.media_ids),
        "payload": payload_to_obj(bundle.payload),
    }


def bundle_from_obj(obj: dict) -> VisualAnnotationBundle:
    bundle = VisualAnnotationBundle(
        bundle_id=obj["id"],
        task=TaskId(obj["task"]),
        media_ids=tuple(obj["media_ids"]),
        payload=payload_from_obj(obj["payload"]),
    )
    bundle.validate()
    return bundle
