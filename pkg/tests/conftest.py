"""Shared builders for randomized datasets and gateway doubles."""

from __future__ import annotations

import random
import string

import pytest

from icforge.records import Dataset, DatasetBuilder
from icforge.tasks import LANGUAGES, TaskId

_TEXT_ALPHABET = (string.ascii_letters + string.digits +
                  " .,;:!?'\"()[]{}<>|/\\-_\n" + "éüñ中文日本語한ar")


def random_text(rng: random.Random, min_len: int = 1, max_len: int = 80) -> str:
    length = rng.randint(min_len, max_len)
    text = "".join(rng.choice(_TEXT_ALPHABET) for _ in range(length))
    # keep the trimmed-non-empty invariant that records and pairs require
    return text.strip() or "x"


def build_random_dataset(rng: random.Random, n_records: int,
                         tasks: tuple[TaskId, ...] = (TaskId.LA_I, TaskId.DC, TaskId.SD),
                         max_context: int = 3) -> Dataset:
    builder = DatasetBuilder("random", created_at="2024-05-01T00:00:00Z")
    media_by_task: dict[TaskId, list[str]] = {}
    for task in tasks:
        media_by_task[task] = [
            builder.register_media(
                task, rng.choice(["alpha", "beta", "gamma"]),
                "video_frame" if rng.random() < 0.3 else "image",
                f"uri://{task.value}/{i}",
                frame_index=i)
            for i in range(rng.randint(2, 6))]
        # video frames need an index; plain images must not rely on it
        for i, mid in enumerate(media_by_task[task]):
            entry = builder.registry.get(mid)
            if entry.kind == "image":
                builder.registry.entries[mid] = type(entry)(
                    entry.media_id, entry.source_dataset, "image",
                    entry.uri_or_digest, None)

    ids_by_task: dict[TaskId, list[str]] = {task: [] for task in tasks}
    for _ in range(n_records):
        task = rng.choice(tasks)
        media = rng.sample(media_by_task[task], rng.randint(1, len(media_by_task[task])))
        peers = ids_by_task[task]
        context = rng.sample(peers, min(len(peers), rng.randint(0, max_context)))
        record = builder.build_record(
            instruction=random_text(rng),
            response=random_text(rng),
            media=media,
            context_ids=context,
            task=task,
            language=rng.choice(LANGUAGES),
        )
        ids_by_task[task].append(record.id)
    return builder.build()


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240501)
