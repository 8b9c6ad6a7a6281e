"""Dataset statistics: verb/noun diversity, length distributions, count tables.

Verb-noun extraction follows the usual diversity recipe: take the verb
closest to the parse root and its first direct noun object. Parsing sits
behind a provider interface; the bundled rule-based provider keeps the core
hermetic, while the optional spaCy provider gives real dependency parses
when the model is installed.
"""

from __future__ import annotations

import csv
import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import ParserUnavailableError
from .records import Dataset, canonical_json_bytes
from .tasks import TaskId

# --- verb-noun extraction ---


@dataclass(frozen=True)
class VerbNounPair:
    verb: str
    noun: str | None
    count: int = 1

    def __post_init__(self):
        if not self.verb:
            raise ValueError("verb must be non-empty")
        if self.count < 1:
            raise ValueError("count must be positive")


_AUXILIARIES = {
    "am", "is", "are", "was", "were", "be", "been", "being",
    "do", "does", "did", "have", "has", "had",
    "will", "would", "shall", "should", "can", "could", "may", "might", "must",
}

_IRREGULAR_LEMMAS = {
    "am": "be", "is": "be", "are": "be", "was": "be", "were": "be",
    "been": "be", "being": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do", "doing": "do",
    "goes": "go", "went": "go", "gone": "go",
    "made": "make", "said": "say", "told": "tell", "gave": "give",
    "took": "take", "saw": "see", "seen": "see", "found": "find",
    "held": "hold", "wore": "wear", "sat": "sit", "stood": "stand",
    "ran": "run", "got": "get", "knew": "know", "felt": "feel",
    "thought": "think", "bought": "buy", "put": "put",
}

_VERB_LEXICON = {
    "answer", "appear", "arrange", "ask", "be", "bring", "buy", "check",
    "choose", "clean", "clear", "compare", "consider", "count", "create",
    "dance", "describe", "design", "determine", "discuss", "do", "drink",
    "eat", "engage", "envision", "examine", "explain", "explore", "feel",
    "find", "follow", "generate", "get", "give", "go", "guess", "guide",
    "happen", "have", "help", "hold", "identify", "imagine", "include",
    "inspect", "know", "lead", "lean", "list", "locate", "look", "make",
    "mention", "move", "name", "notice", "observe", "organize", "pan",
    "place", "plan", "play", "point", "prepare", "provide", "put",
    "recommend", "relocate", "ride", "run", "say", "see", "seem", "select",
    "share", "show", "sit", "speak", "spot", "stand", "suggest",
    "summarize", "take", "talk", "tell", "think", "turn", "use", "utilize",
    "walk", "want", "watch", "wear", "weave", "write",
}

_STOPWORDS = {
    "a", "an", "the", "this", "that", "these", "those", "my", "your", "his",
    "her", "its", "our", "their", "i", "you", "he", "she", "it", "we",
    "they", "me", "him", "us", "them", "what", "which", "who", "whom",
    "whose", "when", "where", "why", "how", "not", "no", "yes", "now",
    "then", "here", "there", "very", "also", "just", "only", "so", "too",
    "and", "or", "but", "if", "of", "in", "on", "at", "to", "for", "with",
    "about", "from", "by", "as", "into", "between", "please", "some", "any",
    "more", "most", "other", "each", "all", "both", "several", "such",
}


def _lemmatize_verb(token: str) -> str:
    if token in _IRREGULAR_LEMMAS:
        return _IRREGULAR_LEMMAS[token]
    if token in _VERB_LEXICON:
        return token
    for suffix, repl in (("ies", "y"), ("ing", ""), ("ing", "e"), ("ed", ""),
                         ("ed", "e"), ("es", ""), ("s", "")):
        if token.endswith(suffix):
            stem = token[: len(token) - len(suffix)] + repl
            if stem in _VERB_LEXICON:
                return stem
    return token


def _is_verb_token(token: str) -> bool:
    if token in _AUXILIARIES:
        return True
    return _lemmatize_verb(token) in _VERB_LEXICON


def _lemmatize_noun(token: str) -> str:
    if token.endswith("ies") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith("es") and len(token) > 3 and token[-3] in "sxzh":
        return token[:-2]
    if token.endswith("s") and not token.endswith("ss") and len(token) > 3:
        return token[:-1]
    return token


class RuleBasedParseProvider:
    """Hermetic fallback: first finite verb wins, auxiliaries defer to a
    later main verb, and the object is the first non-stopword after it."""

    def root_verb_and_object(self, sentence: str) -> tuple[str, str | None] | None:
        tokens = re.findall(r"[a-z']+", sentence.lower())
        if not tokens:
            return None
        verb_positions = [i for i, tok in enumerate(tokens) if _is_verb_token(tok)]
        if not verb_positions:
            return None
        root_index = None
        for pos in verb_positions:
            is_aux = tokens[pos] in _AUXILIARIES
            later_verb = any(p > pos for p in verb_positions)
            if is_aux and later_verb:
                continue  # auxiliary before the main verb
            root_index = pos
            break
        if root_index is None:
            root_index = verb_positions[-1]
        verb = _lemmatize_verb(tokens[root_index])

        noun = None
        for tok in tokens[root_index + 1:]:
            if tok in _STOPWORDS or tok in _AUXILIARIES:
                continue
            if _is_verb_token(tok):
                break  # a second clause starts; no direct object found
            noun = _lemmatize_noun(tok)
            break
        return verb, noun


class SpacyParseProvider:
    """Real dependency parses via spaCy, when the model is installed."""

    def __init__(self, model: str = "en_core_web_sm"):
        try:
            import spacy

            self._nlp = spacy.load(model)
        except Exception as exc:  # missing package or model
            raise ParserUnavailableError(f"spaCy provider unavailable: {exc}") from exc

    def root_verb_and_object(self, sentence: str) -> tuple[str, str | None] | None:
        doc = self._nlp(sentence)
        for sent in doc.sents:
            root = sent.root
            verb_token = None
            if root.pos_ in ("VERB", "AUX"):
                verb_token = root
            else:
                queue = list(root.children)
                while queue:
                    node = queue.pop(0)
                    if node.pos_ in ("VERB", "AUX"):
                        verb_token = node
                        break
                    queue.extend(node.children)
            if verb_token is None:
                continue
            noun = next((child.lemma_.lower() for child in verb_token.children
                         if child.dep_ in ("dobj", "obj") and child.pos_ in ("NOUN", "PROPN")),
                        None)
            return verb_token.lemma_.lower(), noun
        return None


def extract_verb_noun(sentence: str, parser) -> VerbNounPair | None:
    """Root-verb lemma and first direct-object noun lemma, or None."""
    if parser is None:
        raise ParserUnavailableError("no dependency-parse provider configured")
    parsed = parser.root_verb_and_object(sentence)
    if parsed is None:
        return None
    verb, noun = parsed
    return VerbNounPair(verb=verb, noun=noun)


def top_pairs(pairs: list[VerbNounPair], k_verbs: int = 20, k_nouns: int = 4) -> list[dict]:
    """Verbs ranked by total count, each with its most frequent noun objects."""
    if k_verbs < 1 or k_nouns < 1:
        raise ValueError("k_verbs and k_nouns must be >= 1")
    verb_counts: Counter[str] = Counter()
    noun_counts: dict[str, Counter] = {}
    for pair in pairs:
        verb_counts[pair.verb] += pair.count
        if pair.noun is not None:
            noun_counts.setdefault(pair.verb, Counter())[pair.noun] += pair.count
    ranking = []
    for verb, count in sorted(verb_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k_verbs]:
        nouns = sorted(noun_counts.get(verb, Counter()).items(),
                       key=lambda kv: (-kv[1], kv[0]))[:k_nouns]
        ranking.append({"verb": verb, "count": count,
                        "nouns": [{"noun": noun, "count": c} for noun, c in nouns]})
    return ranking


# --- count tables ---


@dataclass
class CountRow:
    task: str
    clips: int
    images: int
    instructions: int
    instances: int


@dataclass
class CountTable:
    rows: list[CountRow]
    totals: CountRow


def compute_counts(dataset: Dataset, registry_aware: bool = True) -> CountTable:
    """Per-task unique-instruction / instance counts plus media columns."""
    dataset.validate_integrity()
    rows = []
    for task in TaskId:  # dense table: tasks with no records report zeros
        records = [r for r in dataset.records.values() if r.task == task]
        instructions = len({r.instruction for r in records})
        instances = len(records)
        clips = images = 0
        if registry_aware and records:
            media_ids = {mid for r in records for mid in r.image_ids}
            images = len(media_ids)
            clip_keys = {entry.uri_or_digest for mid in media_ids
                         if (entry := dataset.registry.get(mid)) is not None
                         and entry.kind == "video_frame"}
            clips = len(clip_keys)
        rows.append(CountRow(task=task.value, clips=clips, images=images,
                             instructions=instructions, instances=instances))
    totals = CountRow(
        task="Total",
        clips=sum(r.clips for r in rows),
        images=sum(r.images for r in rows),
        instructions=sum(r.instructions for r in rows),
        instances=sum(r.instances for r in rows),
    )
    return CountTable(rows=rows, totals=totals)


def reconcile_totals(table: CountTable, stated: dict[str, int]) -> list[str]:
    """Flag externally supplied totals that do not match the column sums."""
    discrepancies = []
    for column in ("clips", "images", "instructions", "instances"):
        if column in stated:
            actual = getattr(table.totals, column)
            if stated[column] != actual:
                discrepancies.append(
                    f"{column}: rows sum to {actual}, stated total is {stated[column]}")
    return discrepancies


# --- length histograms and balancing ---


def _word_count(text: str) -> int:
    return len(text.split())


def stratified_subsample(record_ids_by_stratum: dict[str, list[str]],
                         fraction: float) -> list[str]:
    """Deterministic per-stratum selection of exactly floor(fraction*n) ids.

    Ids are sorted per stratum and picked evenly spaced, so reruns and
    insertion order cannot change the selection.
    """
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must be in [0, 1]")
    retained: list[str] = []
    for stratum in sorted(record_ids_by_stratum):
        ids = sorted(record_ids_by_stratum[stratum])
        retained.extend(
            ids[i] for i in range(len(ids))
            if math.floor((i + 1) * fraction) - math.floor(i * fraction) == 1)
    return retained


def _e4d_strata(dataset: Dataset) -> dict[str, list[str]]:
    strata: dict[str, list[str]] = {}
    for rec in dataset.records.values():
        if rec.task != TaskId.E4D:
            continue
        entry = dataset.registry.get(rec.image_ids[0])
        stratum = entry.source_dataset if entry is not None else ""
        strata.setdefault(stratum, []).append(rec.id)
    return strata


@dataclass
class HistogramReport:
    instruction_len: dict[int, int]
    response_len: dict[int, int]
    images_per_instruction: dict[int, int]
    related_per_instance: dict[int, int]
    subsample_policy: dict | None
    mass: int


def length_histograms(dataset: Dataset, balance: bool = False,
                      e4d_fraction: float = 0.25) -> HistogramReport:
    """Word-count and fan-out histograms, optionally with balanced E4D mass."""
    record_ids = set(dataset.records)
    policy = None
    if balance:
        e4d_ids = [r.id for r in dataset.records.values() if r.task == TaskId.E4D]
        retained_e4d = set(stratified_subsample(_e4d_strata(dataset), e4d_fraction))
        record_ids = (record_ids - set(e4d_ids)) | retained_e4d
        policy = {"task": TaskId.E4D.value, "fraction": e4d_fraction,
                  "total": len(e4d_ids), "retained": len(retained_e4d)}

    instruction_len: Counter[int] = Counter()
    response_len: Counter[int] = Counter()
    images_per: Counter[int] = Counter()
    related_per: Counter[int] = Counter()
    for rid in record_ids:
        rec = dataset.records[rid]
        instruction_len[_word_count(rec.instruction)] += 1
        response_len[_word_count(rec.response)] += 1
        images_per[len(rec.image_ids)] += 1
        related_per[len(rec.rel_ids)] += 1
    return HistogramReport(
        instruction_len=dict(instruction_len),
        response_len=dict(response_len),
        images_per_instruction=dict(images_per),
        related_per_instance=dict(related_per),
        subsample_policy=policy,
        mass=len(record_ids),
    )


# --- report emission ---


def build_report(dataset: Dataset, parser=None, balance: bool = False,
                 e4d_fraction: float = 0.25, k_verbs: int = 20, k_nouns: int = 4) -> dict:
    if parser is None:
        parser = RuleBasedParseProvider()
    counts = compute_counts(dataset)
    histograms = length_histograms(dataset, balance=balance, e4d_fraction=e4d_fraction)

    english = [r for r in dataset.records.values() if r.language == "en"]
    instruction_pairs = [p for r in english
                         if (p := extract_verb_noun(r.instruction, parser)) is not None]
    response_pairs = [p for r in english
                      if (p := extract_verb_noun(r.response, parser)) is not None]

    return {
        "counts": {
            "rows": [vars(row) for row in counts.rows],
            "totals": vars(counts.totals),
        },
        "histograms": {
            "instruction_len": histograms.instruction_len,
            "response_len": histograms.response_len,
            "images_per_instruction": histograms.images_per_instruction,
            "related_per_instance": histograms.related_per_instance,
            "mass": histograms.mass,
            "subsample_policy": histograms.subsample_policy,
        },
        "verb_noun": {
            "instructions": top_pairs(instruction_pairs, k_verbs, k_nouns),
            "responses": top_pairs(response_pairs, k_verbs, k_nouns),
        },
    }


def _write_histogram_csv(path: Path, histogram: dict[int, int], value_name: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([value_name, "count"])
        for value in sorted(histogram):
            writer.writerow([value, histogram[value]])


def write_report(report: dict, outdir: str | Path) -> list[Path]:
    """report.json plus per-panel CSV/JSON figure data; returns written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    report_path = outdir / "report.json"
    report_path.write_bytes(canonical_json_bytes(report))
    written.append(report_path)

    counts_path = outdir / "counts.csv"
    with open(counts_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task", "clips", "images", "instructions", "instances"])
        for row in report["counts"]["rows"] + [report["counts"]["totals"]]:
            writer.writerow([row["task"], row["clips"], row["images"],
                             row["instructions"], row["instances"]])
    written.append(counts_path)

    histograms = report["histograms"]
    for name, value_name in (("instruction_len", "words"), ("response_len", "words"),
                             ("images_per_instruction", "images"),
                             ("related_per_instance", "related")):
        path = outdir / f"{name}.csv"
        _write_histogram_csv(path, {int(k): v for k, v in histograms[name].items()}, value_name)
        written.append(path)

    for side in ("instructions", "responses"):
        path = outdir / f"verb_noun_{side}.json"
        path.write_bytes(canonical_json_bytes(report["verb_noun"][side]))
        written.append(path)
    return written
