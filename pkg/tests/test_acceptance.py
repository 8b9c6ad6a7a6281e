"""Acceptance suite: one test per release criterion, each printing a pass line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every expected value is frozen from an independent oracle computed
here or verified by hand before being asserted.
"""

import json
import math
import random
import time
from collections import Counter
from decimal import Decimal

import pytest

from conftest import build_random_dataset, random_text
from icforge.gateway import Gateway, GatewayConfig, estimate_cost
from icforge.mock_endpoint import MockEndpoint
from icforge.packing import ContextPolicy, EmbeddingStore, pair_most_similar, retrieve_context
from icforge.parsing import parse_qa_pairs
from icforge.pipeline import Artifacts, load_config, run_stage, run_stages
from icforge.prompts import data_path, load_task_profiles
from icforge.records import InstructionRecord, parse_dataset, serialize_dataset
from icforge.rendering import (
    ANSWER_MARKER,
    END_CHUNK_MARKER,
    IMAGE_MARKER,
    INFERENCE,
    TRAINING,
    render_training_sequence,
)
from icforge.stats import (
    CountRow,
    CountTable,
    VerbNounPair,
    compute_counts,
    reconcile_totals,
    stratified_subsample,
    top_pairs,
)
from icforge.tasks import TRANSLATION_TARGETS, TaskId
from icforge.translate import Translator, load_protected_tokens
from test_pipeline import seed_pool, write_config


def _pass(name: str, started: float, budget_s: float) -> None:
    elapsed = time.monotonic() - started
    assert elapsed < budget_s, f"{name} took {elapsed:.1f}s (budget {budget_s}s)"
    print(f"[PASS] {name} ({elapsed:.2f}s)")


class TestAcceptance:
    def test_cost_arithmetic(self):
        started = time.monotonic()
        # re-derive the flat per-token rate from the published totals
        stated_cost = Decimal("20134.9248")
        total_tokens = 859_677_150 + 147_069_090
        assert total_tokens == 1_006_746_240
        per_token = stated_cost / Decimal(total_tokens)
        assert per_token == Decimal("0.00002")
        per_1k = per_token * 1000
        assert per_1k == Decimal("0.02000")
        cost = estimate_cost(859_677_150, 147_069_090, per_1k, per_1k)
        assert cost == stated_cost
        assert f"{cost:.4f}" == "20134.9248"
        _pass("cost arithmetic reproduces the published run total", started, 5)

    def test_transcript_fixture_parsing(self):
        started = time.monotonic()
        profiles = load_task_profiles()
        expected = {  # SD 5+1, TVC 4, DC 8; VIST/E4D/IEP locked at transcription
            ("SD_main.txt", TaskId.SD): 5,
            ("SD_nodiff.txt", TaskId.SD): 1,
            ("TVC.txt", TaskId.TVC): 4,
            ("DC.txt", TaskId.DC): 8,
            ("VIST.txt", TaskId.VIST): 3,
            ("E4D.txt", TaskId.E4D): 4,
            ("IEP.txt", TaskId.IEP): 1,
        }
        for (name, task), count in expected.items():
            raw = data_path("transcripts", name).read_text(encoding="utf-8")
            pairs = parse_qa_pairs(raw, profiles[task].parse_schema)
            assert len(pairs) == count, f"{name}: {len(pairs)} != {count}"
        _pass("stored transcript fixtures parse to locked pair counts", started, 1)

    def test_context_function_oracle_equivalence(self):
        started = time.monotonic()
        rng = random.Random(361)

        def oracle_ranking(vectors: dict[str, list[float]], query_id: str) -> list[str]:
            query = vectors[query_id]
            nq = math.sqrt(sum(x * x for x in query))
            scored = []
            for other, vec in vectors.items():
                if other == query_id:
                    continue
                dot = sum(x * y for x, y in zip(query, vec))
                nv = math.sqrt(sum(y * y for y in vec))
                scored.append((dot / (nq * nv), other))
            scored.sort(key=lambda pair: (-pair[0], pair[1]))
            return [other for _, other in scored]

        store_shapes = ([(rng.randint(10, 60), rng.randint(8, 512)) for _ in range(180)]
                        + [(rng.randint(100, 300), rng.randint(8, 128)) for _ in range(16)]
                        + [(1000, rng.randint(8, 32)) for _ in range(4)])
        assert len(store_shapes) == 200
        for count, dim in store_shapes:
            vectors = {f"id{i:04d}": [rng.gauss(0, 1) for _ in range(dim)]
                       for i in range(count)}
            ids = sorted(vectors)
            # deliberate ties: an exact duplicate and a power-of-two scaled copy
            vectors[ids[1]] = list(vectors[ids[0]])
            vectors[ids[2]] = [4.0 * x for x in vectors[ids[0]]]

            store = EmbeddingStore(dim)
            for item_id, vec in vectors.items():
                store.add(item_id, vec)
            query = ids[rng.randrange(count)]
            expected = oracle_ranking(vectors, query)
            m = rng.choice([1, 3, 10, 50])
            policy = ContextPolicy("text_to_text", m)
            assert retrieve_context(query, policy, store) == expected[:m]
            assert pair_most_similar(query, store) == expected[0]
        _pass("retrieval matches the exhaustive cosine oracle on 200 stores", started, 30)

    def test_record_round_trip(self):
        started = time.monotonic()
        ds = build_random_dataset(random.Random(1001), 1000)
        assert len(ds.records) == 1000
        raw = serialize_dataset(ds)
        assert parse_dataset(raw) == ds
        assert serialize_dataset(ds) == raw  # byte-stable within a run
        rebuilt = build_random_dataset(random.Random(1001), 1000)
        assert serialize_dataset(rebuilt) == raw  # byte-stable across runs
        _pass("1,000-record dataset survives serialize/parse byte-stably", started, 10)

    def test_training_template_conformance(self):
        started = time.monotonic()

        def record(i, instruction, response, task=TaskId.LA_I):
            return InstructionRecord(id=f"{task.value}_INS_{i:06d}", task=task,
                                     instruction=instruction, response=response,
                                     image_ids=(f"{task.value}_IMG_{i:06d}",))

        zero_ctx = render_training_sequence(
            record(1, "What is in the photo?", "A lighthouse at dusk."), [], TRAINING)
        assert zero_ctx.text == ("<image>Human:What is in the photo? "
                                 "Assistant:<answer>A lighthouse at dusk.<|endofchunk|>")

        ctx = [record(2, "First instruction.", "First response."),
               record(3, "Second instruction.", "Second response.")]
        two_ctx = render_training_sequence(record(4, "Query instruction.", "unused"),
                                           ctx, INFERENCE)
        assert two_ctx.text == (
            "<image>Human:First instruction. Assistant:<answer>First response.<|endofchunk|>"
            "<image>Human:Second instruction. Assistant:<answer>Second response.<|endofchunk|>"
            "<image>Human:Query instruction. Assistant:<answer>")

        # mask spans re-derived by independent string search
        for rendered, responses in ((zero_ctx, ["A lighthouse at dusk."]),
                                    (two_ctx, ["First response.", "Second response."])):
            cursor, expected = 0, []
            for response in responses:
                needle = response + END_CHUNK_MARKER
                at = rendered.text.index(needle, cursor)
                expected.append((at, at + len(needle)))
                cursor = at + len(needle)
            assert list(rendered.mask_spans) == expected

        rng = random.Random(55)
        for case in range(500):
            m = rng.randint(0, 8)
            mode = TRAINING if case % 2 == 0 else INFERENCE
            ctx = [record(100 + i, random_text(rng).replace("<", " "),
                          random_text(rng).replace("<", " ")) for i in range(m)]
            query = record(99, random_text(rng).replace("<", " "),
                           random_text(rng).replace("<", " "))
            rendered = render_training_sequence(query, ctx, mode)
            assert rendered.text.count(IMAGE_MARKER) == 1 + m
            assert rendered.text.count(END_CHUNK_MARKER) == (m + 1 if mode == TRAINING else m)
        _pass("rendered sequences match the templates and marker-count law", started, 5)

    def test_end_to_end_mock_run(self, tmp_path):
        started = time.monotonic()

        def full_run(ws):
            cfg = load_config(write_config(ws))
            mock = MockEndpoint()
            cfg.endpoint_factory = lambda: mock
            run_stage("ingest", cfg)
            seed_pool(cfg)
            run_stages(["generate", "pack", "translate", "export", "stats"], cfg)
            return cfg, mock

        cfg1, mock1 = full_run(tmp_path / "ws1")
        art1 = Artifacts(cfg1)

        exported = json.loads(art1.export_task(TaskId.DC).read_text())
        english = [r for r in exported["data"].values() if r["language"] == "en"]
        assert len(english) == 80  # 10 bundles x 8 pairs per canned transcript
        assert len(exported["data"]) == 240  # plus zh/ja expansions

        ledger = json.loads(art1.root_ledger().read_text())
        assert ledger["totals"]["input_tokens"] == mock1.served_input_tokens
        assert ledger["totals"]["output_tokens"] == mock1.served_output_tokens
        assert ledger["totals"]["tokens"] == mock1.served_total_tokens

        # determinism: an independent second run produces identical bytes
        cfg2, _ = full_run(tmp_path / "ws2")
        art2 = Artifacts(cfg2)
        for path1, path2 in (
                (art1.export_task(TaskId.DC), art2.export_task(TaskId.DC)),
                (art1.export_registry(), art2.export_registry()),
                (art1.root_ledger(), art2.root_ledger()),
                (art1.stats / "report.json", art2.stats / "report.json")):
            assert path1.read_bytes() == path2.read_bytes(), path1.name

        # kill-and-resume: a run that died before writing its pairs artifact
        intact = art1.pairs(TaskId.DC).read_bytes()
        art1.pairs(TaskId.DC).unlink()
        cfg1.resume = True
        run_stage("generate", cfg1)
        assert art1.pairs(TaskId.DC).read_bytes() == intact
        rows = [json.loads(line) for line in intact.decode().splitlines()]
        keys = [(row["bundle_id"], row["index"]) for row in rows]
        assert len(keys) == len(set(keys)) == 80
        _pass("mock end-to-end run is deterministic with faithful accounting", started, 60)

    def test_stats_properties(self):
        started = time.monotonic()
        rng = random.Random(777)

        for _ in range(100):
            ds = build_random_dataset(rng, rng.randint(0, 50))
            table = compute_counts(ds)
            for column in ("clips", "images", "instructions", "instances"):
                assert getattr(table.totals, column) == \
                    sum(getattr(row, column) for row in table.rows)

        verbs = [f"v{i}" for i in range(30)]
        nouns = [f"n{i}" for i in range(10)] + [None]
        pairs = [VerbNounPair(rng.choice(verbs), rng.choice(nouns)) for _ in range(5000)]
        ranking = top_pairs(pairs, 20, 4)
        verb_counter = Counter(p.verb for p in pairs)
        assert [(r["verb"], r["count"]) for r in ranking] == \
            sorted(verb_counter.items(), key=lambda kv: (-kv[1], kv[0]))[:20]
        for row in ranking:
            noun_counter = Counter(p.noun for p in pairs
                                   if p.verb == row["verb"] and p.noun is not None)
            assert [(n["noun"], n["count"]) for n in row["nouns"]] == \
                sorted(noun_counter.items(), key=lambda kv: (-kv[1], kv[0]))[:4]

        for _ in range(50):
            strata = {f"s{i}": [f"s{i}_r{j}" for j in range(rng.randint(0, 200))]
                      for i in range(rng.randint(1, 8))}
            retained = stratified_subsample(strata, 0.25)
            per_stratum = Counter(rid.split("_")[0] for rid in retained)
            for name, ids in strata.items():
                assert per_stratum[name] == math.floor(0.25 * len(ids))

        # reported per-task rows vs the stated corpus totals (thousands-scale)
        rows = [
            CountRow("LA", 0, 81_000, 261_000, 345_000),
            CountRow("SD", 0, 9_000, 10_000, 15_000),
            CountRow("SN", 0, 500, 4_800, 6_000),
            CountRow("DC", 16_000, 1_000_000, 40_000, 62_000),
            CountRow("VIST", 0, 16_000, 32_000, 33_000),
            CountRow("TVC", 86_000, 577_000, 86_000, 92_000),
            CountRow("E4D", 400_000, 6_400_000, 1_800_000, 2_400_000),
        ]
        totals = CountRow("Total",
                          sum(r.clips for r in rows), sum(r.images for r in rows),
                          sum(r.instructions for r in rows), sum(r.instances for r in rows))
        assert totals.instances == 2_953_000  # true row sum
        flagged = reconcile_totals(CountTable(rows, totals), {"instances": 2_800_000})
        assert flagged == ["instances: rows sum to 2953000, stated total is 2800000"]
        _pass("stats invariants hold and the totals discrepancy is reported", started, 30)

    def test_translation_invariants(self, tmp_path):
        started = time.monotonic()
        cfg = GatewayConfig(cache_dir=str(tmp_path / "cache"), backoff_base=0.0, jitter=0.0)
        translator = Translator(Gateway(cfg, MockEndpoint(), sleep=lambda _s: None))
        tokens = load_protected_tokens()
        rng = random.Random(2718)
        for trial in range(200):
            instruction = random_text(rng, 4, 50).replace("\n", " ").strip() or "x"
            response = random_text(rng, 4, 50).replace("\n", " ").strip() or "y"
            for token in rng.sample(tokens, rng.randint(0, len(tokens))):
                instruction = f"{instruction} {token}"
                response = f"{token} {response}"
            record = InstructionRecord(
                id=f"SD_INS_{trial:06d}", task=TaskId.SD,
                instruction=instruction, response=response,
                image_ids=("SD_IMG_000001",))
            targets = rng.sample(TRANSLATION_TARGETS, rng.randint(1, 7))
            translated, job = translator.translate_record(record, targets)
            assert len(translated) == len(targets)
            assert {r.language for r in translated} == set(targets)
            assert all(status == "ok" for status in job.status.values())
            for out in translated:
                for token in tokens:
                    assert out.instruction.count(token) == record.instruction.count(token)
                    assert out.response.count(token) == record.response.count(token)
        _pass("translation fan-out preserves protected markers on 200 fuzzed pairs",
              started, 10)
