"""Expand accepted English records into the seven other languages.

One gateway call per (record, target): the translation prompt carries the
target language and a rules block ordering the model to copy structural
markers byte-for-byte. A post-check verifies every protected token survived
verbatim; a miss raises PlaceholderLost rather than silently exporting a
broken record.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ForgeError, MalformedResponseError, PlaceholderLostError
from .prompts import Message, PromptBundle, bundle_estimate, data_path
from .records import InstructionRecord
from .tasks import LANGUAGE_NAMES, TRANSLATION_TARGETS


def load_protected_tokens(path: str | Path | None = None) -> tuple[str, ...]:
    if path is None:
        path = data_path("protected_tokens.txt")
    tokens = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            tokens.append(stripped)
    return tuple(tokens)


@dataclass
class TranslationJob:
    """Stage bookkeeping for one record's expansion."""

    source_record_id: str
    targets: tuple[str, ...]
    status: dict[str, str] = field(default_factory=dict)  # target -> ok | failed:<msg>

    def __post_init__(self):
        if not self.targets:
            raise ValueError("translation job needs at least one target")
        if "en" in self.targets:
            raise ValueError("en is the source language, never a target")


def _check_targets(targets: list[str]) -> tuple[str, ...]:
    if not targets:
        raise ValueError("targets must be non-empty")
    bad = [t for t in targets if t not in TRANSLATION_TARGETS]
    if bad:
        raise ValueError(f"invalid targets {bad}; expected subset of {TRANSLATION_TARGETS}")
    if len(set(targets)) != len(targets):
        raise ValueError("duplicate targets")
    return tuple(targets)


def _parse_reply(text: str) -> tuple[str, str]:
    instruction_lines: list[str] | None = None
    response_lines: list[str] | None = None
    current: list[str] | None = None
    for line in text.splitlines():
        if line.startswith("Instruction:") and instruction_lines is None:
            instruction_lines = [line[len("Instruction:"):].strip()]
            current = instruction_lines
        elif line.startswith("Response:") and response_lines is None:
            response_lines = [line[len("Response:"):].strip()]
            current = response_lines
        elif current is not None:
            current.append(line)
    if instruction_lines is None or response_lines is None:
        raise MalformedResponseError("translation reply missing Instruction/Response labels")
    instruction = "\n".join(instruction_lines).strip()
    response = "\n".join(response_lines).strip()
    if not instruction or not response:
        raise MalformedResponseError("translation reply has empty content")
    return instruction, response


class Translator:
    def __init__(self, gateway, protected_tokens: tuple[str, ...] | None = None,
                 prompt_template: str | None = None):
        self.gateway = gateway
        self.protected_tokens = (protected_tokens if protected_tokens is not None
                                 else load_protected_tokens())
        self.prompt_template = (prompt_template if prompt_template is not None
                                else data_path("translation_prompt.txt")
                                .read_text(encoding="utf-8").rstrip("\n"))

    def _prompt(self, record: InstructionRecord, target: str) -> PromptBundle:
        system = Message("system", self.prompt_template.replace(
            "{target_language}", LANGUAGE_NAMES[target]))
        user = Message("user", f"Instruction: {record.instruction}\n"
                               f"Response: {record.response}")
        messages = (system, user)
        return PromptBundle(messages=messages,
                            token_estimate=bundle_estimate(list(messages)),
                            task=record.task)

    def _verify_markers(self, record: InstructionRecord, instruction: str,
                        response: str) -> None:
        for token in self.protected_tokens:
            for label, source, translated in (("instruction", record.instruction, instruction),
                                              ("response", record.response, response)):
                expected = source.count(token)
                if expected and translated.count(token) != expected:
                    raise PlaceholderLostError(
                        f"record {record.id} -> {label}: marker {token!r} not preserved")

    def translate_record(self, record: InstructionRecord, targets: list[str],
                         counterpart_ids: set[str] | None = None,
                         ) -> tuple[list[InstructionRecord], TranslationJob]:
        """One new record per target; the English source is never mutated.

        ``counterpart_ids`` holds every record id that will exist after this
        expansion; context links remap to same-language counterparts found
        there and drop otherwise.
        """
        if record.language != "en":
            raise ValueError(f"record {record.id} is {record.language}, expected en")
        checked = _check_targets(targets)
        counterpart_ids = counterpart_ids or set()

        job = TranslationJob(source_record_id=record.id, targets=checked)
        prompts = [self._prompt(record, target) for target in checked]
        results = self.gateway.submit_batch(prompts)

        translated: list[InstructionRecord] = []
        for target, result in zip(checked, results):
            if not result.ok:
                job.status[target] = f"failed:{result.error}"
                continue
            try:
                instruction, response = _parse_reply(result.response)
                self._verify_markers(record, instruction, response)
            except ForgeError as exc:
                job.status[target] = f"failed:{exc}"
                continue
            rel_ids = tuple(rid for rid in
                            (f"{rel}_{target}" for rel in record.rel_ids)
                            if rid in counterpart_ids)
            translated.append(InstructionRecord(
                id=f"{record.id}_{target}",
                task=record.task,
                instruction=instruction,
                response=response,
                image_ids=record.image_ids,
                rel_ids=rel_ids,
                language=target,
            ))
            job.status[target] = "ok"
        return translated, job
