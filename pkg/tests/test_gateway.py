"""Gateway: cost arithmetic, caching, retries, bounded concurrency, ledger."""

import random
from decimal import Decimal

import pytest

from icforge.errors import ConfigError, MalformedResponseError, NegativeInputError
from icforge.gateway import (
    EndpointResponse,
    Gateway,
    GatewayConfig,
    QueryLedger,
    cache_key,
    estimate_cost,
    format_cost,
)
from icforge.mock_endpoint import MockEndpoint, ScriptedFailure
from icforge.prompts import Message, PromptBundle, bundle_estimate
from icforge.tasks import TaskId


def make_prompt(text: str, task: TaskId = TaskId.DC, system: str = "sys") -> PromptBundle:
    messages = (Message("system", system), Message("user", text))
    return PromptBundle(messages=messages, token_estimate=bundle_estimate(list(messages)),
                        task=task)


def make_gateway(tmp_path, endpoint, **overrides) -> Gateway:
    defaults = dict(endpoint="mock:", cache_dir=str(tmp_path / "cache"),
                    backoff_base=0.0, jitter=0.0, max_in_flight=4, retry_limit=3)
    defaults.update(overrides)
    cfg = GatewayConfig(**defaults)
    return Gateway(cfg, endpoint, sleep=lambda _s: None)


class EchoEndpoint:
    """Minimal deterministic endpoint for cache/ledger tests."""

    def __init__(self, report_usage: bool = True):
        self.calls = 0
        self.report_usage = report_usage

    def complete(self, messages, model):
        self.calls += 1
        text = f"echo:{messages[-1]['content']}"
        if self.report_usage:
            return EndpointResponse(text=text, input_tokens=11, output_tokens=7)
        return EndpointResponse(text=text)


class TestEstimateCost:
    def test_zero_tokens_cost_nothing(self):
        assert estimate_cost(0, 0, "0.02", "0.02") == Decimal("0")
        assert format_cost(estimate_cost(0, 0, "0.02", "0.02")) == "0.0000"

    def test_reported_run_totals(self):
        # rate re-derived from the published totals: cost / total tokens
        rate_per_token = Decimal("20134.9248") / Decimal("1006746240")
        assert rate_per_token == Decimal("0.00002")
        rate_per_1k = rate_per_token * 1000
        assert rate_per_1k == Decimal("0.02000")
        cost = estimate_cost(859_677_150, 147_069_090, rate_per_1k, rate_per_1k)
        assert cost == Decimal("20134.9248")

    def test_split_rates_hand_case(self):
        assert estimate_cost(1000, 1000, "0.0015", "0.002") == Decimal("0.0035")

    def test_linear_in_each_argument(self):
        rng = random.Random(12)
        for _ in range(25):
            a, b = rng.randint(0, 10**7), rng.randint(0, 10**7)
            base = estimate_cost(a, b, "0.003", "0.007")
            assert estimate_cost(3 * a, b, "0.003", "0.007") - base == \
                2 * (estimate_cost(2 * a, b, "0.003", "0.007") - base)

    def test_negative_input_rejected(self):
        with pytest.raises(NegativeInputError):
            estimate_cost(-1, 0, "0.02", "0.02")
        with pytest.raises(NegativeInputError):
            estimate_cost(0, 0, "-0.02", "0.02")


class TestCacheKey:
    def test_same_bundle_same_key(self):
        cfg = GatewayConfig()
        assert cache_key(make_prompt("hello"), cfg) == cache_key(make_prompt("hello"), cfg)

    def test_one_character_difference_changes_key(self):
        cfg = GatewayConfig()
        assert cache_key(make_prompt("hello"), cfg) != cache_key(make_prompt("hellp"), cfg)

    def test_model_name_changes_key(self):
        prompt = make_prompt("hello")
        assert (cache_key(prompt, GatewayConfig(model="m1"))
                != cache_key(prompt, GatewayConfig(model="m2")))

    def test_stable_across_bundle_round_trip(self):
        cfg = GatewayConfig()
        prompt = make_prompt("hello")
        rebuilt = PromptBundle(
            messages=tuple(Message(m["role"], m["content"]) for m in prompt.to_wire()),
            token_estimate=prompt.token_estimate, task=prompt.task)
        assert cache_key(prompt, cfg) == cache_key(rebuilt, cfg)


class TestSubmitBatch:
    def test_empty_batch_is_config_error(self, tmp_path):
        gateway = make_gateway(tmp_path, EchoEndpoint())
        with pytest.raises(ConfigError):
            gateway.submit_batch([])

    def test_results_positionally_aligned(self, tmp_path):
        gateway = make_gateway(tmp_path, EchoEndpoint())
        prompts = [make_prompt(f"p{i}") for i in range(10)]
        results = gateway.submit_batch(prompts)
        assert [r.response for r in results] == [f"echo:p{i}" for i in range(10)]

    def test_second_submission_is_cache_hit_with_zero_tokens(self, tmp_path):
        endpoint = EchoEndpoint()
        gateway = make_gateway(tmp_path, endpoint)
        first = gateway.submit_batch([make_prompt("same")])[0]
        second = gateway.submit_batch([make_prompt("same")])[0]
        assert endpoint.calls == 1
        assert not first.cache_hit and second.cache_hit
        assert second.response == first.response
        hit_entry = gateway.ledger.entries[-1]
        assert hit_entry.outcome == "cache_hit"
        assert hit_entry.input_tokens == 0 and hit_entry.output_tokens == 0

    def test_retry_twice_then_succeed(self, tmp_path):
        endpoint = MockEndpoint(failures=[ScriptedFailure(match="flaky", times=2)])
        gateway = make_gateway(tmp_path, endpoint, retry_limit=3)
        result = gateway.submit_batch([make_prompt("flaky request")])[0]
        assert result.ok
        assert result.attempts == 3

    def test_failure_surfaced_after_retry_budget(self, tmp_path):
        endpoint = MockEndpoint(failures=[ScriptedFailure(match="doomed", times=99)])
        gateway = make_gateway(tmp_path, endpoint, retry_limit=2)
        result = gateway.submit_batch([make_prompt("doomed request")])[0]
        assert not result.ok
        assert result.attempts == 2
        assert gateway.ledger.entries[-1].outcome == "failed"

    def test_malformed_response_not_retried(self, tmp_path):
        class Garbage:
            def __init__(self):
                self.calls = 0

            def complete(self, messages, model):
                self.calls += 1
                raise MalformedResponseError("garbage on the wire")

        endpoint = Garbage()
        gateway = make_gateway(tmp_path, endpoint, retry_limit=5)
        result = gateway.submit_batch([make_prompt("x")])[0]
        assert not result.ok and endpoint.calls == 1

    def test_concurrency_never_exceeds_max_in_flight(self, tmp_path):
        endpoint = MockEndpoint(latency=0.02)
        gateway = make_gateway(tmp_path, endpoint, max_in_flight=3)
        gateway.submit_batch([make_prompt(f"p{i}") for i in range(12)])
        assert 1 <= endpoint.max_active <= 3

    def test_estimated_usage_flagged_when_endpoint_reports_none(self, tmp_path):
        gateway = make_gateway(tmp_path, EchoEndpoint(report_usage=False))
        gateway.submit_batch([make_prompt("no usage")])
        entry = gateway.ledger.entries[-1]
        assert entry.estimated_usage
        assert entry.input_tokens > 0 and entry.output_tokens > 0


class TestLedger:
    def test_totals_equal_entry_sums_including_failures(self, tmp_path):
        endpoint = MockEndpoint(failures=[ScriptedFailure(match="bad", times=99)])
        gateway = make_gateway(tmp_path, endpoint, retry_limit=2)
        gateway.submit_batch([make_prompt("good one"), make_prompt("bad one"),
                              make_prompt("another good")])
        ledger = gateway.ledger
        assert ledger.total_input_tokens == sum(e.input_tokens for e in ledger.entries)
        assert ledger.total_output_tokens == sum(e.output_tokens for e in ledger.entries)
        assert {e.outcome for e in ledger.entries} == {"ok", "failed"}

    def test_ledger_matches_mock_served_tokens(self, tmp_path):
        endpoint = MockEndpoint()
        gateway = make_gateway(tmp_path, endpoint)
        gateway.submit_batch([make_prompt(f"q{i}") for i in range(6)])
        assert gateway.ledger.total_input_tokens == endpoint.served_input_tokens
        assert gateway.ledger.total_output_tokens == endpoint.served_output_tokens

    def test_per_task_subtotals(self, tmp_path):
        gateway = make_gateway(tmp_path, EchoEndpoint())
        gateway.submit_batch([make_prompt("a", TaskId.DC), make_prompt("b", TaskId.SD)])
        obj = gateway.ledger.to_obj()
        assert set(obj["by_task"]) == {"DC", "SD"}
        assert obj["totals"]["requests"] == 2

    def test_csv_and_json_exports(self, tmp_path):
        gateway = make_gateway(tmp_path, EchoEndpoint())
        gateway.submit_batch([make_prompt("a")])
        gateway.ledger.write_json(tmp_path / "ledger.json", gateway.cfg)
        gateway.ledger.write_csv(tmp_path / "ledger.csv")
        assert (tmp_path / "ledger.json").exists()
        header = (tmp_path / "ledger.csv").read_text().splitlines()[0]
        assert header.startswith("cache_key,task,input_tokens")

    def test_merge_accumulates(self):
        from icforge.gateway import LedgerEntry

        first, second = QueryLedger(), QueryLedger()
        first.append(LedgerEntry("k1", "DC", 5, 3, 1, "ok"))
        second.append(LedgerEntry("k2", "SD", 2, 1, 1, "ok"))
        first.merge(second)
        assert first.total_tokens == 11
