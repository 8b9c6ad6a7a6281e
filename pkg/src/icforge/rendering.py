"""Render records into the interleaved training/inference text format.

Each example becomes one chunk::

    <image>Human:{instruction} Assistant:<answer>{response}<|endofchunk|>

A sequence is the concatenation of the context chunks followed by the query
chunk. Training sequences keep the query response; inference sequences stop
right after the query's ``<answer>`` marker. Mask spans are character
offsets over the loss-bearing text: every ``{response}<|endofchunk|>``
region present in the output.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MixedTaskError, UnresolvedPlaceholderError
from .records import InstructionRecord

IMAGE_MARKER = "<image>"
ANSWER_MARKER = "<answer>"
END_CHUNK_MARKER = "<|endofchunk|>"

TRAINING = "training"
INFERENCE = "inference"


@dataclass(frozen=True)
class RenderedSequence:
    text: str
    mask_spans: tuple[tuple[int, int], ...]


def _require_text(record: InstructionRecord, field: str, value: str | None) -> str:
    if value is None:
        raise UnresolvedPlaceholderError(f"record {record.id}: {field} is unset")
    return value


def render_training_sequence(record: InstructionRecord,
                             context: list[InstructionRecord],
                             mode: str = TRAINING) -> RenderedSequence:
    """Concatenate context chunks then the query chunk.

    ``mode`` is ``"training"`` (query response included and masked) or
    ``"inference"`` (sequence ends after the query's answer marker).
    """
    if mode not in (TRAINING, INFERENCE):
        raise ValueError(f"mode must be {TRAINING!r} or {INFERENCE!r}, got {mode!r}")
    for ctx in context:
        if ctx.task != record.task:
            raise MixedTaskError(
                f"context record {ctx.id} is task {ctx.task}, query {record.id} is {record.task}")

    parts: list[str] = []
    spans: list[tuple[int, int]] = []
    pos = 0

    def emit_chunk(rec: InstructionRecord, with_response: bool) -> None:
        nonlocal pos
        instruction = _require_text(rec, "instruction", rec.instruction)
        head = f"{IMAGE_MARKER}Human:{instruction} Assistant:{ANSWER_MARKER}"
        parts.append(head)
        pos += len(head)
        if with_response:
            response = _require_text(rec, "response", rec.response)
            tail = f"{response}{END_CHUNK_MARKER}"
            parts.append(tail)
            spans.append((pos, pos + len(tail)))
            pos += len(tail)

    for ctx in context:
        emit_chunk(ctx, with_response=True)
    emit_chunk(record, with_response=(mode == TRAINING))

    return RenderedSequence(text="".join(parts), mask_spans=tuple(spans))
