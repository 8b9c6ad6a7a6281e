"""End-to-end pipeline stages wired through on-disk artifacts.

Stages communicate only through files under the configured output
directory, so any stage can be re-run or inspected in isolation::

    ingest/     bundles_{task}.jsonl, media_registry.json
    coldstart/  events.jsonl                (review event log)
    generate/   pairs_{task}.jsonl, audit_{task}.jsonl, ledger.json
    pack/       records_{task}.json
    translate/  records_{task}.json, ledger.json
    export/     {task}.json, media_registry.json
    stats/      report.json, *.csv
    reports/    {stage}.json               (machine-readable stage reports)
    ledger.json                            (merged gateway accounting)

Re-running a completed stage with unchanged inputs is a digest-verified
no-op; outputs are rewritten atomically so an interrupted run resumes
without duplicates.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .annotations import (
    VisualAnnotationBundle,
    bundle_from_obj,
    bundle_to_obj,
    payload_from_obj,
)
from .coldstart import ColdStartStore, pool_ready
from .errors import ConfigError, ForgeError, MissingPrerequisiteError
from .gateway import Gateway, GatewayConfig, LedgerEntry, QueryLedger, format_cost
from .mock_endpoint import make_endpoint
from .packing import (
    ContextPolicy,
    EmbeddingStore,
    HashedEmbeddingProvider,
    clip_vector,
    pair_most_similar,
    retrieve_context,
)
from .parsing import QAPair, load_rules, parse_qa_pairs, safety_filter, validate_pair
from .prompts import (
    Message,
    PromptBundle,
    assemble_prompt,
    bundle_estimate,
    chain_persona,
    data_path,
    load_task_profiles,
    persona_prompt,
)
from .records import (
    Dataset,
    DatasetBuilder,
    DatasetMeta,
    MediaEntry,
    MediaRegistry,
    canonical_json_bytes,
    media_entry_from_obj,
    media_entry_to_obj,
    record_from_obj,
    record_to_obj,
    registry_document,
    registry_from_obj,
    task_document,
)
from .stats import build_report, write_report
from .tasks import TRANSLATION_TARGETS, TaskId
from .translate import Translator, load_protected_tokens

STAGES = ("ingest", "coldstart-serve", "generate", "translate", "pack", "export", "stats")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PREREQUISITE = 3
EXIT_PARTIAL = 4

_FORMAT_REMINDER = (
    "Your previous reply could not be parsed. Please answer again using exactly "
    "the required format: alternating question and answer labels, one pair per block.")


@dataclass
class PipelineConfig:
    dataset_name: str
    tasks: list[TaskId]
    sources_dir: Path
    output_dir: Path
    gateway: GatewayConfig
    prompt_budget: int = 100_000
    pool_min_entries: int = 3
    translation_targets: list[str] = field(default_factory=list)
    embedding_dimension: int = 64
    packing_overrides: dict[str, dict] = field(default_factory=dict)
    balance_e4d: bool = False
    e4d_fraction: float = 0.25
    created_at: str = ""
    resume: bool = False
    deny_rules_path: Path | None = None
    protected_tokens_path: Path | None = None
    mock_endpoint_script: str | None = None
    # optional injection seam: lets callers share one endpoint across stages
    endpoint_factory: object = field(default=None, repr=False, compare=False)

    def digest(self) -> str:
        obj = {
            "dataset_name": self.dataset_name,
            "tasks": [t.value for t in self.tasks],
            "model": self.gateway.model,
            "budget": self.prompt_budget,
            "pool_min_entries": self.pool_min_entries,
            "targets": self.translation_targets,
            "dimension": self.embedding_dimension,
            "packing": self.packing_overrides,
            "balance_e4d": self.balance_e4d,
            "e4d_fraction": self.e4d_fraction,
            "created_at": self.created_at,
        }
        return hashlib.sha256(canonical_json_bytes(obj)).hexdigest()


def load_config(path: str | Path, resume: bool = False,
                mock_endpoint: str | None = None,
                tasks: list[str] | None = None) -> PipelineConfig:
    """Parse and validate a pipeline config file (YAML or JSON)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    base = path.parent
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")

    def resolve(rel: str) -> Path:
        candidate = Path(rel)
        return candidate if candidate.is_absolute() else base / candidate

    try:
        task_names = tasks if tasks else doc["tasks"]
        selected = [TaskId(name) for name in task_names]
        sources_dir = resolve(doc["sources_dir"])
        output_dir = resolve(doc["output_dir"])
        gw = doc.get("gateway", {})
        endpoint = mock_endpoint if mock_endpoint is not None else gw.get("endpoint", "mock:")
        gateway = GatewayConfig(
            endpoint=endpoint,
            model=gw.get("model", "gpt-3.5-turbo-0301"),
            max_in_flight=int(gw.get("max_in_flight", 4)),
            retry_limit=int(gw.get("retry_limit", 3)),
            backoff_base=float(gw.get("backoff_base", 0.5)),
            backoff_factor=float(gw.get("backoff_factor", 2.0)),
            backoff_max=float(gw.get("backoff_max", 30.0)),
            jitter=float(gw.get("jitter", 0.1)),
            input_rate=str(gw.get("input_rate", "0.0015")),
            output_rate=str(gw.get("output_rate", "0.002")),
            cache_dir=str(resolve(gw.get("cache_dir", str(output_dir / "cache")))),
        )
        cfg = PipelineConfig(
            dataset_name=doc.get("dataset_name", "forge-dataset"),
            tasks=selected,
            sources_dir=sources_dir,
            output_dir=output_dir,
            gateway=gateway,
            prompt_budget=int(doc.get("prompt_budget", 100_000)),
            pool_min_entries=int(doc.get("pool_min_entries", 3)),
            translation_targets=list(doc.get("translation_targets", [])),
            embedding_dimension=int(doc.get("embedding_dimension", 64)),
            packing_overrides=dict(doc.get("packing", {})),
            balance_e4d=bool(doc.get("balance_e4d", False)),
            e4d_fraction=float(doc.get("e4d_fraction", 0.25)),
            created_at=str(doc.get("created_at", "")),
            resume=resume,
            deny_rules_path=resolve(doc["deny_rules"]) if "deny_rules" in doc else None,
            protected_tokens_path=(resolve(doc["protected_tokens"])
                                   if "protected_tokens" in doc else None),
            mock_endpoint_script=mock_endpoint,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    if not cfg.sources_dir.exists():
        raise ConfigError(f"sources_dir {cfg.sources_dir} does not exist")
    bad_targets = [t for t in cfg.translation_targets if t not in TRANSLATION_TARGETS]
    if bad_targets:
        raise ConfigError(f"invalid translation targets {bad_targets}")
    return cfg


# --- artifact paths ---


class Artifacts:
    def __init__(self, cfg: PipelineConfig):
        self.root = cfg.output_dir
        self.ingest = self.root / "ingest"
        self.coldstart = self.root / "coldstart"
        self.generate = self.root / "generate"
        self.pack = self.root / "pack"
        self.translate = self.root / "translate"
        self.export = self.root / "export"
        self.stats = self.root / "stats"
        self.reports = self.root / "reports"

    def bundles(self, task: TaskId) -> Path:
        return self.ingest / f"bundles_{task.value}.jsonl"

    def ingest_registry(self) -> Path:
        return self.ingest / "media_registry.json"

    def events_log(self) -> Path:
        return self.coldstart / "events.jsonl"

    def pairs(self, task: TaskId) -> Path:
        return self.generate / f"pairs_{task.value}.jsonl"

    def audit(self, task: TaskId) -> Path:
        return self.generate / f"audit_{task.value}.jsonl"

    def packed(self, task: TaskId) -> Path:
        return self.pack / f"records_{task.value}.json"

    def translated(self, task: TaskId) -> Path:
        return self.translate / f"records_{task.value}.json"

    def export_task(self, task: TaskId) -> Path:
        return self.export / f"{task.value}.json"

    def export_registry(self) -> Path:
        return self.export / "media_registry.json"

    def report(self, stage: str) -> Path:
        return self.reports / f"{stage}.json"

    def stage_ledger(self, stage: str) -> Path:
        return self.root / stage / "ledger.json"

    def root_ledger(self) -> Path:
        return self.root / "ledger.json"


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _digest_paths(paths: list[Path], extra: dict | None = None) -> str:
    sha = hashlib.sha256()
    for path in sorted(paths):
        sha.update(str(path.name).encode())
        sha.update(path.read_bytes() if path.exists() else b"<absent>")
    if extra:
        sha.update(canonical_json_bytes(extra))
    return sha.hexdigest()


@dataclass
class StageReport:
    stage: str
    status: str  # completed | skipped
    tasks: dict[str, dict] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    cost_delta: str = "0.0000"
    input_digest: str = ""
    outputs: list[str] = field(default_factory=list)

    def to_obj(self) -> dict:
        return {"stage": self.stage, "status": self.status, "tasks": self.tasks,
                "failures": self.failures, "cost_delta": self.cost_delta,
                "input_digest": self.input_digest, "outputs": self.outputs}


def _write_report(art: Artifacts, report: StageReport) -> None:
    _atomic_write(art.report(report.stage), canonical_json_bytes(report.to_obj()))
    # append-only run history alongside the per-stage snapshots
    history = art.reports / "history.jsonl"
    history.parent.mkdir(parents=True, exist_ok=True)
    with open(history, "a", encoding="utf-8") as fh:
        fh.write(canonical_json_bytes(report.to_obj()).decode("utf-8") + "\n")


def _skip_if_unchanged(art: Artifacts, stage: str, input_digest: str,
                       outputs: list[Path], resume: bool) -> StageReport | None:
    if not resume:
        return None
    report_path = art.report(stage)
    if not report_path.exists():
        return None
    previous = json.loads(report_path.read_text(encoding="utf-8"))
    if previous.get("input_digest") != input_digest:
        return None
    if not all(path.exists() for path in outputs):
        return None
    return StageReport(stage=stage, status="skipped", tasks=previous.get("tasks", {}),
                       failures=previous.get("failures", []),
                       cost_delta="0.0000", input_digest=input_digest,
                       outputs=previous.get("outputs", []))


def _ledger_to_obj(ledger: QueryLedger) -> dict:
    return {
        "entries": [{"cache_key": e.cache_key, "task": e.task,
                     "input_tokens": e.input_tokens, "output_tokens": e.output_tokens,
                     "attempts": e.attempts, "outcome": e.outcome,
                     "estimated_usage": e.estimated_usage} for e in ledger.entries],
        "totals": {"input_tokens": ledger.total_input_tokens,
                   "output_tokens": ledger.total_output_tokens,
                   "tokens": ledger.total_tokens},
    }


def _write_stage_ledger(art: Artifacts, stage: str, ledger: QueryLedger) -> None:
    _atomic_write(art.stage_ledger(stage), canonical_json_bytes(_ledger_to_obj(ledger)))
    merged = QueryLedger()
    for other_stage in ("generate", "coldstart", "translate"):
        path = art.stage_ledger(other_stage)
        if path.exists():
            obj = json.loads(path.read_text(encoding="utf-8"))
            for entry in obj["entries"]:
                merged.append(LedgerEntry(**entry))
    _atomic_write(art.root_ledger(), canonical_json_bytes(_ledger_to_obj(merged)))
    merged.write_csv(art.root.joinpath("ledger.csv"))


def _make_gateway(cfg: PipelineConfig) -> Gateway:
    if cfg.endpoint_factory is not None:
        return Gateway(cfg.gateway, cfg.endpoint_factory())
    api_key = os.environ.get(cfg.gateway.api_key_env)
    endpoint = make_endpoint(cfg.gateway.endpoint, api_key=api_key)
    return Gateway(cfg.gateway, endpoint)


def _load_bundles(art: Artifacts, task: TaskId) -> list[VisualAnnotationBundle]:
    path = art.bundles(task)
    if not path.exists():
        raise MissingPrerequisiteError(f"ingest bundles for {task.value}")
    bundles = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            bundles.append(bundle_from_obj(json.loads(line)))
    return bundles


def _load_ingest_registry(art: Artifacts) -> dict[str, MediaEntry]:
    path = art.ingest_registry()
    if not path.exists():
        raise MissingPrerequisiteError("ingest media registry")
    doc = json.loads(path.read_text(encoding="utf-8"))
    return {mid: media_entry_from_obj(mid, obj) for mid, obj in doc["media"].items()}


# --- ingest ---


def run_ingest(cfg: PipelineConfig) -> StageReport:
    art = Artifacts(cfg)
    source_files = {task: cfg.sources_dir / f"{task.value}.jsonl" for task in cfg.tasks}
    missing = [str(p) for p in source_files.values() if not p.exists()]
    if missing:
        raise MissingPrerequisiteError(f"source files: {', '.join(missing)}")

    input_digest = _digest_paths(list(source_files.values()), {"config": cfg.digest()})
    outputs = [art.bundles(t) for t in cfg.tasks] + [art.ingest_registry()]
    skipped = _skip_if_unchanged(art, "ingest", input_digest, outputs, cfg.resume)
    if skipped:
        return skipped

    provider = HashedEmbeddingProvider(cfg.embedding_dimension)
    registry: dict[str, MediaEntry] = {}
    if art.ingest_registry().exists():
        registry = _load_ingest_registry(art)
    report = StageReport(stage="ingest", status="completed", input_digest=input_digest)

    for task in cfg.tasks:
        lines = source_files[task].read_text(encoding="utf-8").splitlines()
        raw_items = [json.loads(line) for line in lines if line.strip()]
        media_key_to_id: dict[tuple, str] = {}
        seq = 0
        for mid, entry in registry.items():
            if mid.startswith(f"{task.value}_IMG_"):
                media_key_to_id[(entry.source_dataset, entry.kind,
                                 entry.uri_or_digest, entry.frame_index)] = mid
                seq = max(seq, int(mid.rsplit("_", 1)[-1]))

        def mint_media(spec: dict) -> str:
            nonlocal seq
            key = (spec["source_dataset"], spec["kind"], spec["uri_or_digest"],
                   spec.get("frame_index"))
            if key in media_key_to_id:
                return media_key_to_id[key]
            seq += 1
            media_id = f"{task.value}_IMG_{seq:06d}"
            registry[media_id] = MediaEntry(media_id, *key)
            media_key_to_id[key] = media_id
            return media_id

        bundles = []
        pending_pairing = []
        for item in raw_items:
            media_ids = tuple(mint_media(spec) for spec in item["media"])
            bundle = VisualAnnotationBundle(
                bundle_id=item["id"], task=task, media_ids=media_ids,
                payload=payload_from_obj(item["payload"]))
            if item.get("pair_from_pool"):
                pending_pairing.append(len(bundles))
            bundles.append(bundle)

        if pending_pairing:
            pool = EmbeddingStore(cfg.embedding_dimension)
            for mid in sorted(mid for mid, entry in registry.items()
                              if mid.startswith(f"{task.value}_IMG_")
                              and entry.kind == "image"):
                pool.add(mid, provider.embed(registry[mid].uri_or_digest))
            for index in pending_pairing:
                bundle = bundles[index]
                partner = pair_most_similar(bundle.media_ids[0], pool)
                bundles[index] = VisualAnnotationBundle(
                    bundle_id=bundle.bundle_id, task=task,
                    media_ids=(bundle.media_ids[0], partner), payload=bundle.payload)

        for bundle in bundles:
            bundle.validate()
        payload = "".join(json.dumps(bundle_to_obj(b), ensure_ascii=False, sort_keys=True) + "\n"
                          for b in bundles)
        _atomic_write(art.bundles(task), payload.encode("utf-8"))
        report.tasks[task.value] = {"bundles": len(bundles)}

    registry_doc = {"meta": {"name": cfg.dataset_name, "version": "1"},
                    "media": {mid: media_entry_to_obj(entry)
                              for mid, entry in registry.items()}}
    _atomic_write(art.ingest_registry(), canonical_json_bytes(registry_doc))
    report.outputs = [str(p) for p in outputs]
    _write_report(art, report)
    return report


# --- generate ---


def run_generate(cfg: PipelineConfig) -> StageReport:
    art = Artifacts(cfg)
    profiles = load_task_profiles(overrides=cfg.packing_overrides)
    events = art.events_log()
    store = ColdStartStore(events, min_entries=cfg.pool_min_entries)
    for task in cfg.tasks:
        if not pool_ready(store.pool(task), cfg.pool_min_entries):
            raise MissingPrerequisiteError("in-context pool")

    bundle_paths = [art.bundles(t) for t in cfg.tasks]
    input_digest = _digest_paths(bundle_paths + [events], {"config": cfg.digest()})
    outputs = [art.pairs(t) for t in cfg.tasks]
    skipped = _skip_if_unchanged(art, "generate", input_digest, outputs, cfg.resume)
    if skipped:
        return skipped

    gateway = _make_gateway(cfg)
    rules = load_rules(cfg.deny_rules_path or data_path("deny_rules.txt"))
    report = StageReport(stage="generate", status="completed", input_digest=input_digest)

    for task in cfg.tasks:
        profile = profiles[task]
        bundles = _load_bundles(art, task)
        exemplars = store.pool(task).exemplars(profile.parse_schema)
        prompts = [assemble_prompt(profile, bundle, exemplars, cfg.prompt_budget)
                   for bundle in bundles]
        if profile.pre_stage_message is not None and bundles:
            # chained profile: create the persona first, then plan with it
            persona_prompts = [persona_prompt(profile, bundle) for bundle in bundles]
            persona_results = gateway.submit_batch(persona_prompts)
            prompts = [chain_persona(prompt, res.response) if res.ok else prompt
                       for prompt, res in zip(prompts, persona_results)]
        results = gateway.submit_batch(prompts)

        export_lines = []
        audit_lines = []
        pair_count = flagged_count = 0
        for bundle, prompt, result in zip(bundles, prompts, results):
            if not result.ok:
                report.failures.append(f"{task.value}/{bundle.bundle_id}: {result.error}")
                continue
            try:
                pairs = parse_qa_pairs(result.response, profile.parse_schema)
            except ForgeError:
                retry_messages = prompt.messages + (Message("user", _FORMAT_REMINDER),)
                retry = PromptBundle(messages=retry_messages,
                                     token_estimate=bundle_estimate(list(retry_messages)),
                                     task=task)
                retry_result = gateway.submit_batch([retry])[0]
                if not retry_result.ok:
                    report.failures.append(
                        f"{task.value}/{bundle.bundle_id}: {retry_result.error}")
                    continue
                try:
                    pairs = parse_qa_pairs(retry_result.response, profile.parse_schema)
                    result = retry_result
                except ForgeError as exc:
                    report.failures.append(f"{task.value}/{bundle.bundle_id}: {exc}")
                    continue
            validated = [validate_pair(QAPair(p.question, p.answer,
                                              source_cache_key=result.cache_key), task)
                         for p in pairs]
            outcome = safety_filter(validated, rules)
            for index, pair in enumerate(outcome.export):
                export_lines.append(json.dumps({
                    "bundle_id": bundle.bundle_id, "index": index,
                    "media_ids": list(bundle.media_ids),
                    "question": pair.question, "answer": pair.answer,
                    "flags": sorted(pair.flags), "cache_key": pair.source_cache_key,
                }, ensure_ascii=False, sort_keys=True))
            for pair in outcome.flagged:
                audit_lines.append(json.dumps({
                    "bundle_id": bundle.bundle_id,
                    "question": pair.question, "answer": pair.answer,
                    "flags": sorted(pair.flags), "cache_key": pair.source_cache_key,
                }, ensure_ascii=False, sort_keys=True))
            pair_count += len(outcome.export)
            flagged_count += len(outcome.flagged)

        _atomic_write(art.pairs(task), ("\n".join(export_lines) + "\n" if export_lines
                                        else "").encode("utf-8"))
        _atomic_write(art.audit(task), ("\n".join(audit_lines) + "\n" if audit_lines
                                        else "").encode("utf-8"))
        report.tasks[task.value] = {"bundles": len(bundles), "pairs": pair_count,
                                    "flagged": flagged_count}

    _write_stage_ledger(art, "generate", gateway.ledger)
    report.cost_delta = format_cost(gateway.ledger.total_cost(cfg.gateway))
    report.outputs = [str(p) for p in outputs]
    _write_report(art, report)
    return report


# --- pack ---


def _policy_for(cfg: PipelineConfig, task: TaskId) -> ContextPolicy:
    profiles = load_task_profiles(overrides=cfg.packing_overrides)
    return profiles[task].packing


def run_pack(cfg: PipelineConfig) -> StageReport:
    art = Artifacts(cfg)
    pair_paths = [art.pairs(t) for t in cfg.tasks]
    missing = [str(p) for p in pair_paths if not p.exists()]
    if missing:
        raise MissingPrerequisiteError(f"parsed pairs: {', '.join(missing)}")
    registry = _load_ingest_registry(art)

    input_digest = _digest_paths(pair_paths + [art.ingest_registry()],
                                 {"config": cfg.digest()})
    outputs = [art.packed(t) for t in cfg.tasks]
    skipped = _skip_if_unchanged(art, "pack", input_digest, outputs, cfg.resume)
    if skipped:
        return skipped

    provider = HashedEmbeddingProvider(cfg.embedding_dimension)
    report = StageReport(stage="pack", status="completed", input_digest=input_digest)

    for task in cfg.tasks:
        policy = _policy_for(cfg, task)
        builder = DatasetBuilder(cfg.dataset_name, created_at=cfg.created_at,
                                 generator_config_digest=cfg.digest())
        rows = [json.loads(line) for line in
                art.pairs(task).read_text(encoding="utf-8").splitlines() if line.strip()]
        records = []
        for row in rows:
            for mid in row["media_ids"]:
                if mid in registry:
                    builder.add_media_entry(registry[mid])
            records.append(builder.build_record(
                instruction=row["question"], response=row["answer"],
                media=row["media_ids"], context_ids=[], task=task))

        if records and policy.m > 0 and len(records) > 1:
            store = EmbeddingStore(cfg.embedding_dimension)
            for rec in records:
                if policy.mode == "text_to_text":
                    store.add(rec.id, provider.embed(rec.instruction))
                else:
                    frames = [provider.embed(registry[mid].uri_or_digest
                                             if mid in registry else mid)
                              for mid in rec.image_ids]
                    store.add(rec.id, clip_vector(frames))
            for rec in records:
                context = retrieve_context(rec.id, policy, store)
                builder.set_context(rec.id, context)

        dataset = builder.build()
        doc = {"meta": {"name": cfg.dataset_name, "task": task.value,
                        "created_at": cfg.created_at,
                        "generator_config_digest": cfg.digest()},
               "data": {rid: record_to_obj(rec) for rid, rec in dataset.records.items()}}
        _atomic_write(art.packed(task), canonical_json_bytes(doc))
        report.tasks[task.value] = {"records": len(dataset.records)}

    report.outputs = [str(p) for p in outputs]
    _write_report(art, report)
    return report


# --- translate ---


def _load_record_doc(path: Path) -> dict:
    doc = json.loads(path.read_text(encoding="utf-8"))
    return {rid: record_from_obj(rid, obj) for rid, obj in doc["data"].items()}


def run_translate(cfg: PipelineConfig) -> StageReport:
    art = Artifacts(cfg)
    if not cfg.translation_targets:
        raise ConfigError("translate stage needs translation_targets in the config")
    packed_paths = [art.packed(t) for t in cfg.tasks]
    missing = [str(p) for p in packed_paths if not p.exists()]
    if missing:
        raise MissingPrerequisiteError(f"packed records: {', '.join(missing)}")

    input_digest = _digest_paths(packed_paths, {"config": cfg.digest()})
    outputs = [art.translated(t) for t in cfg.tasks]
    skipped = _skip_if_unchanged(art, "translate", input_digest, outputs, cfg.resume)
    if skipped:
        return skipped

    gateway = _make_gateway(cfg)
    tokens = load_protected_tokens(cfg.protected_tokens_path)
    translator = Translator(gateway, protected_tokens=tokens)
    report = StageReport(stage="translate", status="completed", input_digest=input_digest)

    for task in cfg.tasks:
        records = _load_record_doc(art.packed(task))
        english = [records[rid] for rid in sorted(records)
                   if records[rid].language == "en"]
        expected = {f"{rid}_{t}" for rid in records for t in cfg.translation_targets}
        produced = dict(records)
        ok = failed = 0
        for rec in english:
            translated, job = translator.translate_record(
                rec, list(cfg.translation_targets), counterpart_ids=expected)
            for new_rec in translated:
                produced[new_rec.id] = new_rec
            ok += sum(1 for status in job.status.values() if status == "ok")
            for target, status in job.status.items():
                if status != "ok":
                    failed += 1
                    report.failures.append(f"{task.value}/{rec.id}->{target}: {status}")

        # drop context links whose counterpart translation failed
        produced_ids = set(produced)
        for rid, rec in list(produced.items()):
            if rec.language != "en" and any(r not in produced_ids for r in rec.rel_ids):
                produced[rid] = replace(rec, rel_ids=tuple(
                    r for r in rec.rel_ids if r in produced_ids))

        doc = {"meta": {"name": cfg.dataset_name, "task": task.value,
                        "created_at": cfg.created_at,
                        "generator_config_digest": cfg.digest(),
                        "languages": ["en", *cfg.translation_targets]},
               "data": {rid: record_to_obj(rec) for rid, rec in produced.items()}}
        _atomic_write(art.translated(task), canonical_json_bytes(doc))
        report.tasks[task.value] = {"translated": ok, "failed": failed,
                                    "records": len(produced)}

    _write_stage_ledger(art, "translate", gateway.ledger)
    report.cost_delta = format_cost(gateway.ledger.total_cost(cfg.gateway))
    report.outputs = [str(p) for p in outputs]
    _write_report(art, report)
    return report


# --- export ---


def run_export(cfg: PipelineConfig) -> StageReport:
    art = Artifacts(cfg)
    inputs = []
    for task in cfg.tasks:
        if cfg.translation_targets:
            path = art.translated(task)
            if not path.exists():
                raise MissingPrerequisiteError(f"translated records for {task.value}")
        else:
            path = art.packed(task)
            if not path.exists():
                raise MissingPrerequisiteError(f"packed records for {task.value}")
        inputs.append(path)
    if not art.ingest_registry().exists():
        raise MissingPrerequisiteError("ingest media registry")
    inputs.append(art.ingest_registry())

    input_digest = _digest_paths(inputs, {"config": cfg.digest()})
    outputs = [art.export_task(t) for t in cfg.tasks] + [art.export_registry()]
    skipped = _skip_if_unchanged(art, "export", input_digest, outputs, cfg.resume)
    if skipped:
        return skipped

    registry = _load_ingest_registry(art)
    all_records = {}
    for path in inputs[:-1]:
        all_records.update(_load_record_doc(path))

    dataset = Dataset(
        meta=DatasetMeta(name=cfg.dataset_name, created_at=cfg.created_at,
                         generator_config_digest=cfg.digest()),
        records=all_records,
        registry=MediaRegistry(dict(registry)),
    )
    dataset.validate_integrity()

    report = StageReport(stage="export", status="completed", input_digest=input_digest)
    for task in cfg.tasks:
        doc = task_document(dataset, task)
        _atomic_write(art.export_task(task), canonical_json_bytes(doc))
        report.tasks[task.value] = {"records": len(doc["data"])}
    _atomic_write(art.export_registry(), canonical_json_bytes(registry_document(dataset)))
    report.outputs = [str(p) for p in outputs]
    _write_report(art, report)
    return report


def load_exported_dataset(cfg: PipelineConfig) -> Dataset:
    art = Artifacts(cfg)
    registry_path = art.export_registry()
    if not registry_path.exists():
        raise MissingPrerequisiteError("exported dataset")
    registry_doc = json.loads(registry_path.read_text(encoding="utf-8"))
    records = {}
    meta = DatasetMeta(name=cfg.dataset_name, created_at=cfg.created_at,
                       generator_config_digest=cfg.digest())
    for task in cfg.tasks:
        path = art.export_task(task)
        if not path.exists():
            raise MissingPrerequisiteError(f"exported records for {task.value}")
        records.update(_load_record_doc(path))
    return Dataset(meta=meta, records=records,
                   registry=registry_from_obj(registry_doc["media"]))


# --- stats ---


def run_stats(cfg: PipelineConfig, parser=None) -> StageReport:
    art = Artifacts(cfg)
    dataset = load_exported_dataset(cfg)
    inputs = [art.export_task(t) for t in cfg.tasks] + [art.export_registry()]
    input_digest = _digest_paths(inputs, {"config": cfg.digest()})
    outputs = [art.stats / "report.json"]
    skipped = _skip_if_unchanged(art, "stats", input_digest, outputs, cfg.resume)
    if skipped:
        return skipped

    stats_report = build_report(dataset, parser=parser, balance=cfg.balance_e4d,
                                e4d_fraction=cfg.e4d_fraction)
    written = write_report(stats_report, art.stats)
    report = StageReport(stage="stats", status="completed", input_digest=input_digest,
                         outputs=[str(p) for p in written])
    report.tasks = {row["task"]: {"instances": row["instances"]}
                    for row in stats_report["counts"]["rows"]}
    _write_report(art, report)
    return report


# --- dispatcher ---


def run_coldstart_serve(cfg: PipelineConfig) -> StageReport:
    """Blocking stage: serve the review API until interrupted."""
    from .coldstart import ColdStartStore
    from .review_service import serve

    art = Artifacts(cfg)
    store = ColdStartStore(art.events_log(), min_entries=cfg.pool_min_entries)
    serve(store, registry_path=art.ingest_registry(), reports_dir=art.reports)
    return StageReport(stage="coldstart-serve", status="completed")


_RUNNERS = {
    "ingest": run_ingest,
    "coldstart-serve": run_coldstart_serve,
    "generate": run_generate,
    "pack": run_pack,
    "translate": run_translate,
    "export": run_export,
    "stats": run_stats,
}


def run_stage(stage: str, cfg: PipelineConfig) -> StageReport:
    if stage not in _RUNNERS:
        raise ConfigError(f"unknown stage {stage!r}; expected one of {list(_RUNNERS)}")
    return _RUNNERS[stage](cfg)


def run_stages(stages: list[str], cfg: PipelineConfig) -> list[StageReport]:
    return [run_stage(stage, cfg) for stage in stages]
