"""Scripted stand-in for the chat-completion endpoint.

The mock answers by matching the incoming system message: task system
messages replay that task's canned transcript, the translation prompt gets
a deterministic pseudo-translation of the submitted pair. It also tracks
served token totals and peak concurrency, and can inject scripted failures,
which makes it the workhorse for gateway and end-to-end tests.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import RateLimitedError, TransportError
from .prompts import data_path, estimate_tokens
from .tasks import LANGUAGE_NAMES, TaskId

_DEFAULT_TRANSCRIPTS = {
    TaskId.LA_I: "transcripts/SD_main.txt",  # plaintext-labeled; reused for LA_I
    TaskId.SD: "transcripts/SD_main.txt",
    TaskId.VIST: "transcripts/VIST.txt",
    TaskId.DC: "transcripts/DC.txt",
    TaskId.TVC: "transcripts/TVC.txt",
    TaskId.IEP: "transcripts/IEP.txt",
    TaskId.E4D: "transcripts/E4D.txt",
}

_TRANSLATION_PREFIX = "You are a professional translator."
_PERSONA_PREFIX = "You are helping to prepare an indoor-activity planning task."
_PERSONA_REPLY = ("The room owner is a graduate student who codes by day, practices "
                  "guitar in the evening, and hosts small study groups on weekends.")


@dataclass
class ScriptedFailure:
    """Fail requests whose user text contains ``match``, ``times`` times."""

    match: str
    times: int
    kind: str = "transport"  # transport | rate_limited
    remaining: int = field(init=False)

    def __post_init__(self):
        self.remaining = self.times


class MockEndpoint:
    """Deterministic scripted endpoint; see module docstring."""

    def __init__(self, transcripts: dict[TaskId, str] | None = None,
                 system_messages: dict[TaskId, str] | None = None,
                 failures: list[ScriptedFailure] | None = None,
                 corrupt_markers: bool = False,
                 latency: float = 0.0):
        from .prompts import load_task_profiles

        profiles = load_task_profiles()
        self._system_to_task = {p.system_message: t for t, p in profiles.items()}
        if system_messages:
            self._system_to_task.update({msg: t for t, msg in system_messages.items()})
        self._transcripts = {
            task: (transcripts[task] if transcripts and task in transcripts
                   else data_path(rel).read_text(encoding="utf-8").rstrip("\n"))
            for task, rel in _DEFAULT_TRANSCRIPTS.items()
        }
        self._failures = failures or []
        self._corrupt_markers = corrupt_markers
        self._latency = latency
        self._lock = threading.Lock()
        self.served_input_tokens = 0
        self.served_output_tokens = 0
        self.request_count = 0
        self.active = 0
        self.max_active = 0

    # --- scripted behavior ---

    def _maybe_fail(self, user_text: str) -> None:
        with self._lock:
            for failure in self._failures:
                if failure.remaining > 0 and failure.match in user_text:
                    failure.remaining -= 1
                    if failure.kind == "rate_limited":
                        raise RateLimitedError("scripted rate limit", retry_after=0.0)
                    raise TransportError("scripted transport failure")

    def _respond(self, messages: list[dict]) -> str:
        system = next((m["content"] for m in messages if m["role"] == "system"), "")
        last_user = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")

        if system.startswith(_TRANSLATION_PREFIX):
            return self._pseudo_translate(system, last_user)
        if system.startswith(_PERSONA_PREFIX):
            return _PERSONA_REPLY

        task = self._system_to_task.get(system)
        if task is not None:
            return self._transcripts[task]
        # unknown prompt: echo a minimal valid pair so parsing still works
        return f"Question: What is shown?\n\nAnswer: Echo of {len(last_user)} chars."

    def _pseudo_translate(self, system: str, user_text: str) -> str:
        match = re.search(r"into (\w+)\.", system)
        language = match.group(1) if match else "Unknown"
        code = next((c for c, name in LANGUAGE_NAMES.items() if name == language), "xx")
        lines = []
        for line in user_text.splitlines():
            for label in ("Instruction:", "Response:"):
                if line.startswith(label):
                    content = line[len(label):].strip()
                    if self._corrupt_markers:
                        content = content.replace("<image>", "<IMAGE>").replace(
                            "<|endofchunk|>", "(endofchunk)")
                    lines.append(f"{label} [{code}] {content}")
                    break
        return "\n".join(lines)

    # --- endpoint protocol ---

    def complete(self, messages: list[dict], model: str):
        from .gateway import EndpointResponse

        with self._lock:
            self.active += 1
            self.max_active = max(self.max_active, self.active)
        try:
            if self._latency:
                time.sleep(self._latency)
            last_user = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")
            self._maybe_fail(last_user)
            text = self._respond(messages)
            input_tokens = sum(estimate_tokens(m["content"]) for m in messages)
            output_tokens = estimate_tokens(text)
            with self._lock:
                self.request_count += 1
                self.served_input_tokens += input_tokens
                self.served_output_tokens += output_tokens
            return EndpointResponse(text=text, input_tokens=input_tokens,
                                    output_tokens=output_tokens)
        finally:
            with self._lock:
                self.active -= 1

    @property
    def served_total_tokens(self) -> int:
        return self.served_input_tokens + self.served_output_tokens


def load_mock_endpoint(script_path: str | Path | None) -> MockEndpoint:
    """Build a mock from a JSON script file (or defaults when path is None).

    Script keys: ``transcripts`` (task -> file path), ``failures``
    (list of {match, times, kind}), ``corrupt_markers``, ``latency``.
    """
    if script_path is None:
        return MockEndpoint()
    obj = json.loads(Path(script_path).read_text(encoding="utf-8"))
    base = Path(script_path).parent
    transcripts = {}
    for task_name, rel in obj.get("transcripts", {}).items():
        transcripts[TaskId(task_name)] = (base / rel).read_text(encoding="utf-8").rstrip("\n")
    failures = [ScriptedFailure(match=f["match"], times=int(f["times"]),
                                kind=f.get("kind", "transport"))
                for f in obj.get("failures", [])]
    return MockEndpoint(transcripts=transcripts or None, failures=failures,
                        corrupt_markers=bool(obj.get("corrupt_markers", False)),
                        latency=float(obj.get("latency", 0.0)))


def make_endpoint(descriptor: str, api_key: str | None = None):
    """Endpoint factory: ``mock:[script.json]`` or an HTTP base URL."""
    if descriptor.startswith("mock:"):
        script = descriptor[len("mock:"):] or None
        return load_mock_endpoint(script)
    from .gateway import HttpChatEndpoint

    return HttpChatEndpoint(descriptor, api_key=api_key)
