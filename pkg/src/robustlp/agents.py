"""Agent roles, prompt fixtures, strict response parsing and an HTTP client.

Three roles talk JSON: the reformulator derives a robust counterpart, the
coder turns it into RC-JSON, the reflector proposes memory edits. Every
response must be a single JSON object matching its role schema; anything
else is a SchemaError and counts as an agent failure.

The HTTP client speaks the chat-completions wire format with bounded retry
and backoff; the transport is injectable so tests run fully offline.
"""

from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Callable


class TransportError(RuntimeError):
    """The backend could not be reached within the retry budget."""


class SchemaError(ValueError):
    """An agent response violated its role's JSON contract."""


@dataclass(frozen=True)
class AgentResponse:
    reasoning: str
    matched_experience_ids: tuple[int, ...]
    final_answer: str


@dataclass(frozen=True)
class AgentReply:
    """Raw role payload plus the backend's output-token count."""

    payload: dict
    output_tokens: int


REFORMULATOR_PROMPT = """You are a Reformulator.

Your task is to convert the input robust optimization problem into a tractable
robust counterpart -- a fully explicit deterministic formulation in which all
effects of uncertainty are resolved, with no shorthand operators remaining
(e.g., absolute values |*|, max/min, norms, or supremum expressions).

Use the experience memory to assist: match each minimal independent reformulation
unit (e.g., a single uncertain constraint or uncertain objective term) to the
most relevant experience if one exists, and apply that experience's reformulation
approach; derive the counterpart from scratch for unmatched units.

All specific numeric values from the problem instance must be preserved and
appear explicitly in the final answer.

==================================================================
INPUT
==================================================================

=== PROBLEM ===
<<PROBLEM INPUT>>

=== REFORMULATION EXPERIENCE MEMORY ===
<<EXPERIENCE MEMORY>>

==================================================================
OUTPUT FORMAT
==================================================================

Your ENTIRE response MUST be a single valid JSON object -- nothing else.
  * Do NOT include any text, commentary, or markdown outside the JSON.
  * Do NOT wrap the JSON in code fences.
  * The FIRST character of your response MUST be { and the LAST MUST be }.

"reasoning" MUST cover:
  (a) For each reformulation unit: which experience was matched (or none) and why.
  (b) The derivation process that transforms each unit into its tractable
      robust counterpart.

"matched_experience_ids" MUST be a list of integer experience IDs matched to
reformulation units in (a). Use [] if no unit was matched.

"final_answer" MUST be a complete mathematical formulation of the tractable
robust counterpart in LaTeX within a \\begin{align}...\\end{align} environment,
with all numeric values from the problem instance appearing explicitly.

Return ONLY a RAW JSON object with the following structure:
{
  "reasoning": <matching analysis and derivation process for each reformulation unit>,
  "matched_experience_ids": [<list of matched experience IDs as integers>],
  "final_answer": <the tractable robust counterpart with numeric values in LaTeX>
}"""

CODER_PROMPT = """You are a Coder.

Your task is to translate the given optimization problem (a tractable robust
counterpart) into the RC-JSON machine format below. Do NOT write solver code;
emit the linear program itself as structured data.

RC-JSON schema:
{
  "sense": "min" | "max",
  "vars": [{"name": <string>, "lb": <number or null>, "ub": <number or null>}, ...],
  "obj": [<one number per variable>],
  "cons": [{"coef": [<one number per variable>], "sense": "<=" | ">=" | "=",
            "rhs": <number>}, ...]
}

Note: bounds are mandatory and explicit. A variable that is unbounded below
(a free variable, e.g. a dual multiplier of an equality) MUST have "lb": null;
one unbounded above MUST have "ub": null. Never assume a default lower bound
of 0.

==================================================================
INPUT
==================================================================

=== PROBLEM (ROBUST COUNTERPART) ===
<<ROBUST COUNTERPART INPUT>>

==================================================================
OUTPUT FORMAT
==================================================================

Your ENTIRE response MUST be a single valid JSON object -- nothing else.
  * Do NOT include any text, commentary, or markdown outside the JSON.
  * Do NOT wrap the JSON in code fences.
  * The FIRST character of your response MUST be { and the LAST MUST be }.

Return ONLY a RAW JSON object with the following structure:
{
  "reasoning": <step-by-step thinking on how to translate the formulation>,
  "final_answer": <the complete RC-JSON object, serialized as a string>
}"""

REFLECTOR_PROMPT = """You are a Reflector.

Your task is to reflect on all training samples in the current step (both
correct and incorrect) and update the reformulation experience memory -- a
collection of experiences that each capture how a specific type of robust
optimization structure should be correctly reformulated into its tractable
robust counterpart. Use three operators: `add', `update', and `delete'.
Each experience_id MUST appear at most once across all operators.

The usage scores shown in the memory (success / failure counts) record how
often each experience has led to a correct or incorrect final answer when used.

Note: A problem may match multiple experiences (one per reformulation unit).
A failure does not imply every matched experience is wrong -- the root cause
may lie in only one of the matched experiences, while others are correct.

In your `reasoning', analyze the root cause of each failure by examining the
Reformulator's matched experience IDs, its reasoning, and the environment
feedback for all samples. Use the correct samples as reference to understand
what works, and focus your operator decisions on resolving the failures without
disrupting what is already correct. Consider all samples together and decide on
a unified set of memory operations. Then decide which operators to apply:
  - `add' a new experience if no suitable one exists in memory.
  - `update' an existing experience if its content is incorrect or misleading.
  - `delete' an experience if it is harmful.

==================================================================
INPUT
==================================================================

=== EXISTING REFORMULATION EXPERIENCE MEMORY ===
<<EXPERIENCE MEMORY>>

<<SAMPLES>>

==================================================================
OUTPUT FORMAT
==================================================================

Your ENTIRE response MUST be a single valid JSON object -- nothing else.
  * Do NOT include any text, commentary, or markdown outside the JSON.
  * Do NOT wrap the JSON in code fences.
  * The FIRST character of your response MUST be { and the LAST MUST be }.

Fields per operator:
- add:    {"operator": `add', "experience_id": int, "content": "..."}
- update: {"operator": `update', "experience_id": int, "content": "..."}
- delete: {"operator": `delete', "experience_id": int}

Note on `add' experience_id: assign max(existing experience ids) + 1 for the
first `add', max(existing experience ids) + 2 for the second, and so on.
Each `add' MUST use a distinct new ID.

Return ONLY a RAW JSON object with the following structure:
{
  "reasoning": <step-by-step thinking covering: (1) failure diagnosis,
                (2) correct reformulation derivation for the affected unit(s),
                and (3) operator decisions>,
  "final_answer": [
    { ... }
  ]
}"""

_SAMPLE_BLOCK = """--- SAMPLE {index} ({verdict}) ---

=== PROBLEM ===
{problem}

=== REFORMULATOR'S OUTPUT ===
{output}

=== ENVIRONMENT FEEDBACK ===
{feedback}"""


def render_memory_text(entries) -> str:
    """Inline form of the experience memory used inside prompts."""
    if not entries:
        return "(empty)"
    blocks = []
    for e in entries:
        blocks.append(
            f"[Experience {e.experience_id}] (success={e.success_count}, "
            f"failure={e.failure_count})\n{e.content}"
        )
    return "\n\n".join(blocks)


def build_reformulator_prompt(problem: str, memory_text: str) -> str:
    return REFORMULATOR_PROMPT.replace("<<PROBLEM INPUT>>", problem).replace(
        "<<EXPERIENCE MEMORY>>", memory_text
    )


def build_coder_prompt(reformulation: str) -> str:
    return CODER_PROMPT.replace("<<ROBUST COUNTERPART INPUT>>", reformulation)


def build_reflector_prompt(memory_text: str, samples) -> str:
    """samples: list of dicts with problem / output / feedback / correct."""
    blocks = [
        _SAMPLE_BLOCK.format(
            index=k + 1,
            verdict="CORRECT" if s["correct"] else "INCORRECT",
            problem=s["problem"],
            output=s["output"],
            feedback=s["feedback"],
        )
        for k, s in enumerate(samples)
    ]
    return REFLECTOR_PROMPT.replace("<<EXPERIENCE MEMORY>>", memory_text).replace(
        "<<SAMPLES>>", "\n\n".join(blocks)
    )


def _strict_json_object(text: str) -> dict:
    stripped = text.strip()
    if not stripped.startswith("{") or not stripped.endswith("}"):
        raise SchemaError("response is not a single JSON object")
    try:
        data = json.loads(stripped)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"response is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError("response JSON is not an object")
    return data


def parse_reformulator_response(text: str) -> AgentResponse:
    data = _strict_json_object(text)
    try:
        reasoning = data["reasoning"]
        ids = data["matched_experience_ids"]
        answer = data["final_answer"]
    except KeyError as exc:
        raise SchemaError(f"missing field {exc}") from exc
    if not isinstance(ids, list) or any(not isinstance(i, int) for i in ids):
        raise SchemaError("matched_experience_ids must be a list of integers")
    if not isinstance(answer, str):
        raise SchemaError("final_answer must be a string")
    return AgentResponse(str(reasoning), tuple(ids), answer)


def parse_coder_response(text: str) -> str:
    data = _strict_json_object(text)
    try:
        answer = data["final_answer"]
    except KeyError as exc:
        raise SchemaError(f"missing field {exc}") from exc
    if isinstance(answer, dict):
        return json.dumps(answer)
    if not isinstance(answer, str):
        raise SchemaError("final_answer must be a string or object")
    return answer


def parse_reflector_response(text: str, max_existing_id: int) -> list[dict]:
    """Validate the operator list, including the add-id sequence rule."""
    data = _strict_json_object(text)
    ops = data.get("final_answer")
    if not isinstance(ops, list):
        raise SchemaError("final_answer must be a list of operations")
    seen: set[int] = set()
    next_add = max_existing_id + 1
    parsed = []
    for op in ops:
        if not isinstance(op, dict):
            raise SchemaError("operation is not an object")
        kind = op.get("operator")
        if kind not in ("add", "update", "delete"):
            raise SchemaError(f"unknown operator {kind!r}")
        eid = op.get("experience_id")
        if not isinstance(eid, int):
            raise SchemaError("experience_id must be an integer")
        if eid in seen:
            raise SchemaError(f"experience_id {eid} appears more than once")
        seen.add(eid)
        if kind in ("add", "update"):
            if not isinstance(op.get("content"), str):
                raise SchemaError(f"{kind} operation requires string content")
        if kind == "add":
            if eid != next_add:
                raise SchemaError(
                    f"add id {eid} violates the max(existing)+k rule (expected {next_add})"
                )
            next_add += 1
        parsed.append({"operator": kind, "experience_id": eid, "content": op.get("content")})
    return parsed


def _http_post(url: str, payload: dict, headers: dict, timeout: float) -> dict:
    body = json.dumps(payload).encode()
    req = urllib.request.Request(url, data=body, headers=headers, method="POST")
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read().decode())


@dataclass
class ChatClient:
    """Chat-completions client with bounded retry and exponential backoff.

    The API key is read from an environment variable, never from config
    files. `transport` may be replaced for offline tests; it receives the
    request payload and returns the decoded response object.
    """

    base_url: str
    model: str
    api_key_env: str = "ROBUSTLP_API_KEY"
    temperature: float = 0.0
    timeout: float = 120.0
    max_retries: int = 3
    backoff: float = 1.0
    max_output_tokens: int | None = None
    transport: Callable[[dict], dict] | None = None
    sleep: Callable[[float], None] = field(default=time.sleep)

    def chat(self, prompt: str) -> tuple[str, int]:
        """Send one user message; returns (content, output_tokens)."""
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        if self.max_output_tokens is not None:
            payload["max_tokens"] = self.max_output_tokens
        last: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                if self.transport is not None:
                    data = self.transport(payload)
                else:
                    key = os.environ.get(self.api_key_env, "")
                    if not key:
                        raise TransportError(f"missing API key env {self.api_key_env}")
                    data = _http_post(
                        self.base_url.rstrip("/") + "/chat/completions",
                        payload,
                        {"Content-Type": "application/json", "Authorization": f"Bearer {key}"},
                        self.timeout,
                    )
                content = data["choices"][0]["message"]["content"]
                usage = data.get("usage") or {}
                tokens = int(usage.get("completion_tokens", max(1, len(content) // 4)))
                return content, tokens
            except (urllib.error.URLError, OSError, KeyError, json.JSONDecodeError, TransportError) as exc:
                last = exc
                if attempt + 1 < self.max_retries:
                    self.sleep(self.backoff * (2**attempt))
        raise TransportError(f"request failed after {self.max_retries} attempts: {last}")


class HttpAgent:
    """Role-bound wrapper around a ChatClient, for use by the harness."""

    def __init__(self, client: ChatClient, role: str):
        if role not in ("reformulator", "coder", "reflector"):
            raise ValueError(f"unknown role {role!r}")
        self.client = client
        self.role = role

    def respond(self, prompt: str, context: dict | None = None) -> AgentReply:
        content, tokens = self.client.chat(prompt)
        if self.role == "reformulator":
            payload = parse_reformulator_response(content).__dict__
        elif self.role == "coder":
            payload = {"final_answer": parse_coder_response(content)}
        else:
            payload = {"final_answer": parse_reflector_response(content, context["max_id"])}
        return AgentReply(payload=payload, output_tokens=tokens)
