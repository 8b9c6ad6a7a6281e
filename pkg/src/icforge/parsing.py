"""Extract question/answer pairs from annotator completions.

The annotator replies in one of three shapes, all line-labeled:

* ``labeled_json_lines`` - quoted labels, ``"Question": "..."`` (clip tasks)
* ``labeled_plaintext``  - bare labels, ``Question: ...``
* ``dialogue_rounds``    - conversation turns, ``Human: ...`` / ``Assistant: ...``

Parsing is tolerant of whitespace and of either quoting style unless the
schema is marked strict. Content is preserved as written, including internal
punctuation and quotes; multi-line answers run until the next label.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import (
    DanglingQuestionError,
    LabelMismatchError,
    NoPairsFoundError,
    RuleLoadError,
)
from .tasks import TaskId

LABELED_JSON_LINES = "labeled_json_lines"
LABELED_PLAINTEXT = "labeled_plaintext"
DIALOGUE_ROUNDS = "dialogue_rounds"

FORMATS = (LABELED_JSON_LINES, LABELED_PLAINTEXT, DIALOGUE_ROUNDS)

SAFETY_FLAGGED = "safety_flagged"
LOW_QUALITY = "low_quality"


@dataclass(frozen=True)
class QASchema:
    task: TaskId
    question_label: str
    answer_label: str
    format: str
    min_pairs: int = 1
    strict: bool = False

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"unknown schema format {self.format!r}")
        if not self.question_label or not self.answer_label:
            raise ValueError("pair markers must be non-empty")
        if self.min_pairs < 1:
            raise ValueError("min_pairs must be >= 1")


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    source_cache_key: str = ""
    flags: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.question.strip() or not self.answer.strip():
            raise ValueError("question and answer must be non-empty after trimming")

    def with_flag(self, flag: str) -> "QAPair":
        return replace(self, flags=self.flags | {flag})


def _label_pattern(label: str) -> re.Pattern:
    # matches `Label:`, `"Label":`, `'Label':` at line start; remainder captured
    return re.compile(rf'^\s*(?P<quote>["\']?){re.escape(label)}(?P=quote)\s*[:：]\s*(?P<rest>.*)$')


def _strip_outer_quotes(text: str) -> str:
    if len(text) >= 2 and text[0] == '"' and text[-1] == '"':
        return text[1:-1]
    return text


def parse_qa_pairs(raw: str, schema: QASchema) -> list[QAPair]:
    """All well-formed pairs in document order; strict question/answer alternation."""
    if not raw.strip():
        raise NoPairsFoundError("empty completion")

    q_pat = _label_pattern(schema.question_label)
    a_pat = _label_pattern(schema.answer_label)
    # conversation/round headers delimit segments in dialogue transcripts
    header_pat = re.compile(r"^\s*(?:Conversation\b[^\n]*|Round\s+\d+\s*[:：]?)\s*$")

    # (kind, quoted?, content-lines) in document order
    segments: list[tuple[str, bool, list[str]]] = []
    in_header_break = False
    for line in raw.splitlines():
        q_match = q_pat.match(line)
        a_match = a_pat.match(line)
        match, kind = (q_match, "q") if q_match else (a_match, "a") if a_match else (None, "")
        if match is not None:
            quoted = match.group("quote") == '"'
            if schema.strict:
                wants_quoted = schema.format == LABELED_JSON_LINES
                if quoted != wants_quoted:
                    raise LabelMismatchError(
                        f"label quoting does not match the {schema.format} schema: {line!r}")
            segments.append((kind, quoted, [match.group("rest")]))
            in_header_break = False
        elif schema.format == DIALOGUE_ROUNDS and header_pat.match(line):
            in_header_break = True
        elif segments and not in_header_break:
            segments[-1][2].append(line)
        # lines before the first label (role notes etc.) are ignored

    if not segments:
        raise NoPairsFoundError(
            f"no {schema.question_label}/{schema.answer_label} labels found")

    pairs: list[QAPair] = []
    pending_question: str | None = None
    for kind, quoted, lines in segments:
        content = "\n".join(lines).strip()
        if quoted:
            content = _strip_outer_quotes(content)
        if kind == "q":
            if pending_question is not None:
                raise LabelMismatchError("two questions in a row without an answer")
            if not content:
                raise LabelMismatchError("empty question content")
            pending_question = content
        else:
            if pending_question is None:
                raise LabelMismatchError("answer without a preceding question")
            if not content:
                raise DanglingQuestionError("question followed by an empty answer")
            pairs.append(QAPair(question=pending_question, answer=content))
            pending_question = None

    if pending_question is not None:
        raise DanglingQuestionError(f"unanswered trailing question: {pending_question[:60]!r}")
    if not pairs:
        raise NoPairsFoundError("labels present but no complete pair")
    return pairs


def render_qa_pairs(pairs: list[QAPair], schema: QASchema) -> str:
    """Inverse of :func:`parse_qa_pairs` for prompt exemplars and fuzzing."""
    blocks: list[str] = []
    for i, pair in enumerate(pairs, start=1):
        if schema.format == LABELED_JSON_LINES:
            blocks.append(f'"{schema.question_label}": "{pair.question}"\n\n'
                          f'"{schema.answer_label}": "{pair.answer}"')
        elif schema.format == DIALOGUE_ROUNDS:
            blocks.append(f"Round {i}:\n{schema.question_label}: {pair.question}\n"
                          f"{schema.answer_label}: {pair.answer}")
        else:
            blocks.append(f"{schema.question_label}: {pair.question}\n\n"
                          f"{schema.answer_label}: {pair.answer}")
    return "\n\n".join(blocks)


# --- quality validation ---

# The system messages forbid the annotator from referring to its hidden
# annotations; answers that do are kept but marked low quality.
_ANNOTATION_LEAKS = (
    "according to the description",
    "according to descrption",  # misspelling the prompts themselves use
    "according to the descriptions",
    "according to the annotation",
    "based on the description",
    "based on the descriptions",
    "mentioned in the description",
    "the description says",
    "from the description",
    "in the description",
)


def validate_pair(pair: QAPair, task: TaskId) -> QAPair:
    """Flag answers that reference the hidden annotation text."""
    lowered = pair.answer.lower()
    if any(phrase in lowered for phrase in _ANNOTATION_LEAKS):
        return pair.with_flag(LOW_QUALITY)
    return pair


# --- safety filtering ---


@dataclass(frozen=True)
class DenyRule:
    category: str
    term: str

    def pattern(self) -> re.Pattern:
        return re.compile(rf"\b{re.escape(self.term)}\b", re.IGNORECASE)


@dataclass
class RuleSet:
    rules: tuple[DenyRule, ...] = ()
    classifier: object = None  # optional callable(QAPair) -> bool
    version: str = "0"

    def __post_init__(self):
        self._patterns = [(rule, rule.pattern()) for rule in self.rules]

    def matches(self, pair: QAPair) -> bool:
        text = f"{pair.question}\n{pair.answer}"
        if any(pat.search(text) for _, pat in self._patterns):
            return True
        return bool(self.classifier and self.classifier(pair))


def load_rules(path: str | Path, classifier=None) -> RuleSet:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise RuleLoadError(f"cannot read rule file {path}: {exc}") from exc
    rules = []
    version = "1"
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            match = re.search(r"version\s+(\S+)", stripped)
            if match:
                version = match.group(1).rstrip(".")
            continue
        if ":" not in stripped:
            raise RuleLoadError(f"{path}:{lineno}: expected 'category: term'")
        category, term = stripped.split(":", 1)
        term = term.strip()
        if not term:
            raise RuleLoadError(f"{path}:{lineno}: empty term")
        rules.append(DenyRule(category=category.strip(), term=term))
    return RuleSet(rules=tuple(rules), classifier=classifier, version=version)


@dataclass
class FilterOutcome:
    """Export set and flagged (audit) set; together they partition the input."""

    export: list[QAPair] = field(default_factory=list)
    flagged: list[QAPair] = field(default_factory=list)


def safety_filter(pairs: list[QAPair], rules: RuleSet) -> FilterOutcome:
    """Deterministically split pairs into exportable and safety-flagged."""
    outcome = FilterOutcome()
    for pair in pairs:
        if SAFETY_FLAGGED in pair.flags or rules.matches(pair):
            outcome.flagged.append(pair.with_flag(SAFETY_FLAGGED))
        else:
            outcome.export.append(pair)
    return outcome
