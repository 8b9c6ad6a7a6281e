"""Task and language rosters used across the pipeline."""

from __future__ import annotations

from enum import Enum


class TaskId(str, Enum):
    """The seven dataset-construction tasks."""

    LA_I = "LA_I"  # interleaved single-image QA over general scenes
    SD = "SD"  # spot-the-difference image pairs
    VIST = "VIST"  # album storytelling
    DC = "DC"  # dense-captioned video clips
    TVC = "TVC"  # TV-show clip reasoning
    IEP = "IEP"  # indoor event planning from room layouts
    E4D = "E4D"  # egocentric AR-assistant video

    def __str__(self) -> str:  # keeps f-strings and ids tidy
        return self.value


# English plus the seven expansion languages.
LANGUAGES = ("en", "zh", "ja", "es", "de", "fr", "ko", "ar")
TRANSLATION_TARGETS = tuple(lang for lang in LANGUAGES if lang != "en")

LANGUAGE_NAMES = {
    "en": "English",
    "zh": "Chinese",
    "ja": "Japanese",
    "es": "Spanish",
    "de": "German",
    "fr": "French",
    "ko": "Korean",
    "ar": "Arabic",
}


def parse_task(value: str) -> TaskId:
    try:
        return TaskId(value)
    except ValueError:
        raise ValueError(f"unknown task {value!r}; expected one of "
                         f"{[t.value for t in TaskId]}") from None
