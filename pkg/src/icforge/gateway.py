"""Batched chat-completion gateway with caching, retries, and a cost ledger.

Requests are keyed by a digest of (model, messages); responses are cached
one file per key so re-runs and re-parsing never hit the network twice.
Token counts come from the endpoint's usage report when present, otherwise
from the local estimator (marked as estimates in the ledger). Costs are
exact decimal arithmetic, displayed to four places.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

from .errors import (
    ConfigError,
    MalformedResponseError,
    NegativeInputError,
    RateLimitedError,
    TransportError,
)
from .prompts import PromptBundle, estimate_tokens
from .records import canonical_json_bytes

logger = logging.getLogger(__name__)

_FOUR_PLACES = Decimal("0.0001")


def estimate_cost(input_tokens: int, output_tokens: int,
                  input_rate, output_rate) -> Decimal:
    """Exact decimal cost of a request at per-1,000-token rates.

    The arithmetic is exact (dividing a Decimal by 1000 only moves the
    point), which keeps the result linear in each token argument; displays
    round to four places via :func:`format_cost`.
    """
    if input_tokens < 0 or output_tokens < 0:
        raise NegativeInputError("token counts must be >= 0")
    in_rate = Decimal(str(input_rate))
    out_rate = Decimal(str(output_rate))
    if in_rate < 0 or out_rate < 0:
        raise NegativeInputError("rates must be >= 0")
    return (Decimal(input_tokens) / 1000) * in_rate + (Decimal(output_tokens) / 1000) * out_rate


def format_cost(cost: Decimal) -> str:
    """Four-decimal display form of an exact cost."""
    return str(cost.quantize(_FOUR_PLACES))


@dataclass
class GatewayConfig:
    endpoint: str = "mock:"
    model: str = "gpt-3.5-turbo-0301"
    max_in_flight: int = 4
    retry_limit: int = 3
    backoff_base: float = 0.5
    backoff_factor: float = 2.0
    backoff_max: float = 30.0
    jitter: float = 0.1
    input_rate: str = "0.0015"  # currency per 1K tokens; split pricing default
    output_rate: str = "0.002"
    cache_dir: str = ".forge-cache"
    api_key_env: str = "FORGE_API_KEY"

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.retry_limit < 0:
            raise ConfigError("retry_limit must be >= 0")
        if Decimal(str(self.input_rate)) < 0 or Decimal(str(self.output_rate)) < 0:
            raise ConfigError("rates must be >= 0")


def cache_key(prompt: PromptBundle, cfg: GatewayConfig) -> str:
    """Stable digest over the model name and the ordered messages."""
    payload = {"model": cfg.model, "messages": prompt.to_wire()}
    return hashlib.sha256(canonical_json_bytes(payload)).hexdigest()


@dataclass(frozen=True)
class EndpointResponse:
    text: str
    input_tokens: int | None = None  # None: endpoint reported no usage
    output_tokens: int | None = None


class ResponseCache:
    """One JSON file per cache key under the configured directory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> EndpointResponse | None:
        path = self._path(key)
        if not path.exists():
            return None
        obj = json.loads(path.read_text(encoding="utf-8"))
        return EndpointResponse(text=obj["response"],
                                input_tokens=obj.get("input_tokens"),
                                output_tokens=obj.get("output_tokens"))

    def put(self, key: str, response: EndpointResponse) -> None:
        obj = {"response": response.text,
               "input_tokens": response.input_tokens,
               "output_tokens": response.output_tokens}
        tmp = self._path(key).with_suffix(".tmp")
        tmp.write_text(json.dumps(obj, ensure_ascii=False, sort_keys=True), encoding="utf-8")
        tmp.replace(self._path(key))


@dataclass
class LedgerEntry:
    cache_key: str
    task: str
    input_tokens: int
    output_tokens: int
    attempts: int
    outcome: str  # ok | cache_hit | failed
    estimated_usage: bool = False


class QueryLedger:
    """Append-only per-request accounting; totals always equal the entry sums."""

    def __init__(self):
        self.entries: list[LedgerEntry] = []
        self._lock = threading.Lock()

    def append(self, entry: LedgerEntry) -> None:
        with self._lock:
            self.entries.append(entry)

    @property
    def total_input_tokens(self) -> int:
        return sum(e.input_tokens for e in self.entries)

    @property
    def total_output_tokens(self) -> int:
        return sum(e.output_tokens for e in self.entries)

    @property
    def total_tokens(self) -> int:
        return self.total_input_tokens + self.total_output_tokens

    def total_cost(self, cfg: GatewayConfig) -> Decimal:
        return estimate_cost(self.total_input_tokens, self.total_output_tokens,
                             cfg.input_rate, cfg.output_rate)

    def to_obj(self, cfg: GatewayConfig | None = None) -> dict:
        by_task: dict[str, dict] = {}
        for e in self.entries:
            row = by_task.setdefault(e.task, {"requests": 0, "cache_hits": 0, "failures": 0,
                                              "input_tokens": 0, "output_tokens": 0})
            row["requests"] += 1
            row["input_tokens"] += e.input_tokens
            row["output_tokens"] += e.output_tokens
            row["cache_hits"] += 1 if e.outcome == "cache_hit" else 0
            row["failures"] += 1 if e.outcome == "failed" else 0
        obj = {
            "totals": {
                "requests": len(self.entries),
                "input_tokens": self.total_input_tokens,
                "output_tokens": self.total_output_tokens,
                "tokens": self.total_tokens,
            },
            "by_task": by_task,
        }
        if cfg is not None:
            obj["totals"]["cost"] = format_cost(self.total_cost(cfg))
        return obj

    def write_json(self, path: str | Path, cfg: GatewayConfig | None = None) -> None:
        Path(path).write_bytes(canonical_json_bytes(self.to_obj(cfg)))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cache_key", "task", "input_tokens", "output_tokens",
                             "attempts", "outcome", "estimated_usage"])
            for e in self.entries:
                writer.writerow([e.cache_key, e.task, e.input_tokens, e.output_tokens,
                                 e.attempts, e.outcome, e.estimated_usage])

    def merge(self, other: "QueryLedger") -> None:
        with self._lock:
            self.entries.extend(other.entries)


@dataclass
class SubmitResult:
    cache_key: str
    response: str | None = None
    error: str | None = None
    attempts: int = 0
    cache_hit: bool = False

    @property
    def ok(self) -> bool:
        return self.response is not None


class HttpChatEndpoint:
    """Adapter for an OpenAI-style chat-completions wire contract."""

    def __init__(self, base_url: str, api_key: str | None = None, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout

    def complete(self, messages: list[dict], model: str) -> EndpointResponse:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            reply = httpx.post(f"{self.base_url}/chat/completions",
                               json={"model": model, "messages": messages},
                               headers=headers, timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if reply.status_code == 429:
            retry_after = reply.headers.get("Retry-After")
            raise RateLimitedError("rate limited",
                                   retry_after=float(retry_after) if retry_after else None)
        if reply.status_code >= 500:
            raise TransportError(f"server error {reply.status_code}")
        if reply.status_code != 200:
            raise MalformedResponseError(f"unexpected status {reply.status_code}: {reply.text[:200]}")
        try:
            body = reply.json()
            text = body["choices"][0]["message"]["content"]
            usage = body.get("usage", {})
            return EndpointResponse(text=text,
                                    input_tokens=usage.get("prompt_tokens"),
                                    output_tokens=usage.get("completion_tokens"))
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MalformedResponseError(f"bad completion payload: {exc}") from exc


class Gateway:
    """Bounded-concurrency batch submitter over one endpoint."""

    def __init__(self, cfg: GatewayConfig, endpoint, ledger: QueryLedger | None = None,
                 sleep=time.sleep, rng: random.Random | None = None):
        self.cfg = cfg
        self.endpoint = endpoint
        self.ledger = ledger if ledger is not None else QueryLedger()
        self.cache = ResponseCache(cfg.cache_dir)
        self._sleep = sleep
        self._rng = rng if rng is not None else random.Random()

    def submit_batch(self, prompts: list[PromptBundle]) -> list[SubmitResult]:
        """Submit prompts; results align positionally with the inputs.

        Ledger entries are appended in prompt order (not completion order)
        so two identical runs produce identical accounting files."""
        if not prompts:
            raise ConfigError("submit_batch needs at least one prompt")
        with ThreadPoolExecutor(max_workers=self.cfg.max_in_flight) as pool:
            outcomes = list(pool.map(self._submit_one, prompts))
        results = []
        for result, entry in outcomes:
            self.ledger.append(entry)
            results.append(result)
        return results

    def _backoff_delay(self, attempt: int, server_delay: float | None) -> float:
        if server_delay is not None:
            return server_delay
        base = self.cfg.backoff_base * (self.cfg.backoff_factor ** (attempt - 1))
        return min(self.cfg.backoff_max, base) + self._rng.random() * self.cfg.jitter

    def _submit_one(self, prompt: PromptBundle) -> tuple[SubmitResult, LedgerEntry]:
        key = cache_key(prompt, self.cfg)
        task = prompt.task.value
        cached = self.cache.get(key)
        if cached is not None:
            entry = LedgerEntry(cache_key=key, task=task, input_tokens=0,
                                output_tokens=0, attempts=0, outcome="cache_hit")
            return SubmitResult(cache_key=key, response=cached.text, cache_hit=True), entry

        wire = prompt.to_wire()
        max_attempts = max(1, self.cfg.retry_limit)
        attempts = 0
        wasted_input = 0
        wasted_output = 0
        while True:
            attempts += 1
            try:
                response = self.endpoint.complete(wire, self.cfg.model)
                break
            except MalformedResponseError as exc:
                entry = LedgerEntry(key, task, wasted_input, wasted_output,
                                    attempts, "failed")
                return SubmitResult(cache_key=key, error=str(exc), attempts=attempts), entry
            except (RateLimitedError, TransportError) as exc:
                wasted_input += exc.input_tokens
                wasted_output += exc.output_tokens
                if attempts >= max_attempts:
                    entry = LedgerEntry(key, task, wasted_input, wasted_output,
                                        attempts, "failed")
                    return (SubmitResult(cache_key=key, error=str(exc), attempts=attempts),
                            entry)
                server_delay = exc.retry_after if isinstance(exc, RateLimitedError) else None
                delay = self._backoff_delay(attempts, server_delay)
                logger.debug("retrying %s after %.2fs (%s)", key[:12], delay, exc)
                self._sleep(delay)

        estimated = response.input_tokens is None or response.output_tokens is None
        input_tokens = response.input_tokens
        output_tokens = response.output_tokens
        if input_tokens is None:
            input_tokens = sum(estimate_tokens(m["content"]) for m in wire)
        if output_tokens is None:
            output_tokens = estimate_tokens(response.text)
        entry = LedgerEntry(key, task, input_tokens + wasted_input,
                            output_tokens + wasted_output, attempts, "ok",
                            estimated_usage=estimated)
        self.cache.put(key, EndpointResponse(response.text, input_tokens, output_tokens))
        return SubmitResult(cache_key=key, response=response.text, attempts=attempts), entry
