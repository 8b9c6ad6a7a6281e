"""Prompt assembly: system message + ranked exemplars + query annotation.

Task profiles are declared in ``data/task_profiles.yaml``; each points at a
checksummed system-message fixture, the completion parse schema, and the
default context-packing policy. Assembly is a pure function: given a
profile, a query bundle, the current exemplar list, and a token budget, it
emits the ordered chat messages.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .annotations import VisualAnnotationBundle, render_annotation
from .errors import BudgetTooSmallError, EmptyQueryError
from .packing import ContextPolicy
from .parsing import QASchema
from .tasks import TaskId

SYSTEM = "system"
USER = "user"
ASSISTANT = "assistant"

UNLIMITED_BUDGET = 10**9


def data_path(*parts: str) -> Path:
    """Path of a packaged data file."""
    root = resources.files("icforge").joinpath("data")
    return Path(str(root.joinpath(*parts)))


def estimate_tokens(text: str) -> int:
    """Deterministic length-based token estimate (about four chars per token)."""
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class Exemplar:
    """One curated in-context example: the annotation it answered and the reply."""

    user_text: str
    assistant_text: str
    rank: int


@dataclass(frozen=True)
class TaskProfile:
    task: TaskId
    system_message: str
    annotation_kind: str
    parse_schema: QASchema
    packing: ContextPolicy
    pre_stage_message: str | None = None  # persona-creation stage for IEP

    def __post_init__(self):
        if not self.system_message.strip():
            raise ValueError(f"profile {self.task}: system message is empty")


@dataclass(frozen=True)
class PromptBundle:
    messages: tuple[Message, ...]
    token_estimate: int
    task: TaskId

    def to_wire(self) -> list[dict]:
        return [{"role": m.role, "content": m.content} for m in self.messages]


def bundle_estimate(messages: list[Message]) -> int:
    return sum(estimate_tokens(m.content) for m in messages)


def assemble_prompt(profile: TaskProfile, bundle: VisualAnnotationBundle,
                    exemplars: list[Exemplar], budget: int = UNLIMITED_BUDGET) -> PromptBundle:
    """System message, then as many ranked exemplar pairs as the budget admits,
    then the query turn. Exemplars drop lowest-priority-first."""
    query_text = render_annotation(bundle)
    if not query_text.strip():
        raise EmptyQueryError(f"bundle {bundle.bundle_id} rendered to empty text")

    system = Message(SYSTEM, profile.system_message)
    query = Message(USER, query_text)
    base_cost = bundle_estimate([system, query])
    if base_cost > budget:
        raise BudgetTooSmallError(
            f"budget {budget} cannot fit system message plus query ({base_cost} tokens)")

    ordered = sorted(exemplars, key=lambda e: e.rank)
    kept: list[Message] = []
    cost = base_cost
    for exemplar in ordered:
        pair = [Message(USER, exemplar.user_text), Message(ASSISTANT, exemplar.assistant_text)]
        pair_cost = bundle_estimate(pair)
        if cost + pair_cost > budget:
            break
        kept.extend(pair)
        cost += pair_cost

    messages = (system, *kept, query)
    return PromptBundle(messages=messages, token_estimate=cost, task=profile.task)


def persona_prompt(profile: TaskProfile, bundle: VisualAnnotationBundle) -> PromptBundle:
    """Stage-one prompt of a chained profile: create the room-owner persona."""
    if profile.pre_stage_message is None:
        raise ValueError(f"profile {profile.task} has no pre-stage")
    messages = (Message(SYSTEM, profile.pre_stage_message),
                Message(USER, render_annotation(bundle)))
    return PromptBundle(messages=messages, token_estimate=bundle_estimate(list(messages)),
                        task=profile.task)


def chain_persona(prompt: PromptBundle, persona: str) -> PromptBundle:
    """Append the stage-one persona to the query turn of a planning prompt."""
    query = prompt.messages[-1]
    extended = Message(query.role, f"{query.content}\n\nRoom owner personality: {persona}")
    messages = prompt.messages[:-1] + (extended,)
    return PromptBundle(messages=messages, token_estimate=bundle_estimate(list(messages)),
                        task=prompt.task)


# --- profile loading ---


def _read_fixture(rel_path: str) -> str:
    return data_path(rel_path).read_text(encoding="utf-8")


def load_task_profiles(config_path: str | Path | None = None,
                       overrides: dict | None = None) -> dict[TaskId, TaskProfile]:
    """Profiles from the declarative config; ``overrides`` may replace the
    per-task packing policy (e.g. from a pipeline config)."""
    if config_path is None:
        config_path = data_path("task_profiles.yaml")
    doc = yaml.safe_load(Path(config_path).read_text(encoding="utf-8"))
    profiles: dict[TaskId, TaskProfile] = {}
    for task_name, spec in doc["tasks"].items():
        task = TaskId(task_name)
        packing_spec = dict(spec["packing"])
        if overrides and task_name in overrides:
            packing_spec.update(overrides[task_name])
        parse_spec = spec["parse"]
        profile = TaskProfile(
            task=task,
            system_message=_read_fixture(spec["system_message"]).rstrip("\n"),
            annotation_kind=spec["annotation"],
            parse_schema=QASchema(
                task=task,
                question_label=parse_spec["question_label"],
                answer_label=parse_spec["answer_label"],
                format=parse_spec["format"],
                min_pairs=int(parse_spec.get("min_pairs", 1)),
                strict=bool(parse_spec.get("strict", False)),
            ),
            packing=ContextPolicy(mode=packing_spec["mode"], m=int(packing_spec["m"])),
            pre_stage_message=(_read_fixture(spec["pre_stage"]).rstrip("\n")
                               if "pre_stage" in spec else None),
        )
        profiles[task] = profile
    return profiles


# --- fixture integrity ---


def fixture_digest(rel_path: str) -> str:
    return hashlib.sha256(data_path(rel_path).read_bytes()).hexdigest()


def verify_fixture_checksums() -> list[str]:
    """Compare every packaged fixture against data/CHECKSUMS.sha256.

    Returns the list of mismatching paths (empty when all match).
    """
    manifest = data_path("CHECKSUMS.sha256").read_text(encoding="utf-8")
    mismatches = []
    for line in manifest.splitlines():
        if not line.strip():
            continue
        digest, rel_path = line.split(None, 1)
        if fixture_digest(rel_path.strip()) != digest:
            mismatches.append(rel_path.strip())
    return mismatches
