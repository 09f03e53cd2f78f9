"""Solver-grounded verification of candidate reformulations.

A candidate answer is an RC-JSON linear program. It is solved by the in-repo
simplex and marked correct when its optimal value matches the instance's
stored ground truth within tolerance. The two-stage pipeline prompts a
reformulator agent (with the experience memory inlined when provided), has
a coder agent convert the answer to RC-JSON, verifies it, and aggregates
accuracy and token metrics. Failures are data, never exceptions: a broken
response yields a failed EvalRecord and the pipeline moves on.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

from .agents import (
    AgentReply,
    AgentResponse,
    SchemaError,
    TransportError,
    build_coder_prompt,
    build_reformulator_prompt,
    render_memory_text,
)
from .lpcore import (
    MalformedModel,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    rc_json_dumps,
    rc_json_loads,
    solve_lp,
)
from .model import RobustInstance
from .reformulate import nominal_lp, reformulate
from .render import TemplateId, render_latex

PARSE_ERROR = "ParseError"
SOLVER_INFEASIBLE = "SolverInfeasible"
SOLVER_UNBOUNDED = "SolverUnbounded"
VALUE_MISMATCH = "ValueMismatch"
AGENT_ERROR = "AgentError"


@dataclass(frozen=True)
class ToleranceSpec:
    tol_abs: float = 1e-4
    tol_rel: float = 1e-3

    def matches(self, f_hat: float, f_star: float) -> bool:
        return abs(f_hat - f_star) <= max(self.tol_abs, self.tol_rel * abs(f_star))


@dataclass(frozen=True)
class EvalRecord:
    instance_id: str
    f_star: float
    f_hat: float | None = None
    correct: bool = False
    failure_kind: str | None = None
    output_tokens: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def verify_candidate(rc_json, f_star: float, tol: ToleranceSpec = ToleranceSpec(),
                     instance_id: str = "") -> EvalRecord:
    """Solve one RC-JSON candidate and compare its value to the ground truth."""
    try:
        lp = rc_json_loads(rc_json) if isinstance(rc_json, str) else rc_json_loads(json.dumps(rc_json))
    except MalformedModel:
        return EvalRecord(instance_id=instance_id, f_star=f_star, failure_kind=PARSE_ERROR)
    sol = solve_lp(lp)
    if sol.status == STATUS_INFEASIBLE:
        return EvalRecord(instance_id=instance_id, f_star=f_star, failure_kind=SOLVER_INFEASIBLE)
    if sol.status != STATUS_OPTIMAL:
        return EvalRecord(instance_id=instance_id, f_star=f_star, failure_kind=SOLVER_UNBOUNDED)
    f_hat = sol.objective_value
    if tol.matches(f_hat, f_star):
        return EvalRecord(instance_id=instance_id, f_star=f_star, f_hat=f_hat, correct=True)
    return EvalRecord(
        instance_id=instance_id, f_star=f_star, f_hat=f_hat, failure_kind=VALUE_MISMATCH
    )


def problem_text(inst: RobustInstance) -> str:
    """The LaTeX statement an agent sees; rendered on demand if not stored."""
    if inst.latex is not None:
        return inst.latex
    return render_latex(inst, TemplateId(0, 1, 1))


def evaluate_instance(
    inst: RobustInstance,
    reformulator,
    coder,
    memory_entries=None,
    tol: ToleranceSpec = ToleranceSpec(),
    transcript_sink=None,
):
    """One full reformulator -> coder -> solver pass.

    Returns (record, response, feedback) where response is the parsed
    reformulator output (None on agent error) and feedback is a short
    solver-grounded description usable as reflection input.
    """
    memory_text = render_memory_text(memory_entries or [])
    prompt_r = build_reformulator_prompt(problem_text(inst), memory_text)
    context = {"instance": inst, "memory_entries": memory_entries or [], "role": "reformulator"}
    try:
        reply_r = reformulator.respond(prompt_r, context)
        response = AgentResponse(
            reasoning=str(reply_r.payload.get("reasoning", "")),
            matched_experience_ids=tuple(reply_r.payload.get("matched_experience_ids", ())),
            final_answer=str(reply_r.payload.get("final_answer", "")),
        )
        prompt_c = build_coder_prompt(response.final_answer)
        reply_c = coder.respond(
            prompt_c,
            {"instance": inst, "role": "coder", "reformulation": response.final_answer},
        )
        rc_text = str(reply_c.payload.get("final_answer", ""))
    except (TransportError, SchemaError) as exc:
        record = EvalRecord(
            instance_id=inst.id,
            f_star=inst.ground_truth.f_star,
            failure_kind=AGENT_ERROR,
        )
        return record, None, f"agent error: {exc}"

    record = verify_candidate(rc_text, inst.ground_truth.f_star, tol, instance_id=inst.id)
    record = EvalRecord(**{**record.to_dict(), "output_tokens": reply_r.output_tokens})
    if transcript_sink is not None:
        transcript_sink(
            inst.id,
            {
                "instance_id": inst.id,
                "reformulator": {
                    "prompt": prompt_r,
                    "payload": {
                        "reasoning": response.reasoning,
                        "matched_experience_ids": list(response.matched_experience_ids),
                        "final_answer": response.final_answer,
                    },
                    "output_tokens": reply_r.output_tokens,
                },
                "coder": {
                    "prompt": prompt_c,
                    "payload": {"final_answer": rc_text},
                    "output_tokens": reply_c.output_tokens,
                },
                "record": record.to_dict(),
            },
        )
    if record.correct:
        feedback = f"correct: solver value {record.f_hat} matches ground truth {record.f_star}"
    elif record.failure_kind == VALUE_MISMATCH:
        feedback = (
            f"value mismatch: candidate solves to {record.f_hat}, ground truth is {record.f_star}"
        )
    else:
        feedback = f"candidate failed verification: {record.failure_kind}"
    return record, response, feedback


def summarize(records) -> dict:
    """Accuracy (exact counts plus float), mean reformulator tokens, failures."""
    records = list(records)
    total = len(records)
    correct = sum(1 for r in records if r.correct)
    tokens = [r.output_tokens for r in records if r.output_tokens is not None]
    failures: dict[str, int] = {}
    for r in records:
        if r.failure_kind:
            failures[r.failure_kind] = failures.get(r.failure_kind, 0) + 1
    return {
        "correct_count": correct,
        "total_count": total,
        "accuracy": correct / total if total else 0.0,
        "mean_output_tokens": sum(tokens) / len(tokens) if tokens else 0.0,
        "failures_by_kind": failures,
    }


def run_pipeline(
    dataset,
    reformulator,
    coder,
    memory_entries=None,
    tol: ToleranceSpec = ToleranceSpec(),
    transcripts_dir=None,
    max_inflight: int = 1,
):
    """Evaluate every instance; returns (records, summary).

    Per-instance failures (including agent errors) are recorded, never
    raised. With max_inflight > 1, instances are evaluated concurrently;
    records keep dataset order either way.
    """
    dataset = list(dataset)
    sink = None
    if transcripts_dir is not None:
        os.makedirs(transcripts_dir, exist_ok=True)

        def sink(instance_id, payload):
            path = os.path.join(transcripts_dir, f"{instance_id}.json")
            with open(path, "w") as fh:
                json.dump(payload, fh, indent=1)

    def one(inst):
        record, _, _ = evaluate_instance(
            inst, reformulator, coder, memory_entries, tol, transcript_sink=sink
        )
        return record

    if max_inflight > 1:
        with ThreadPoolExecutor(max_workers=max_inflight) as pool:
            records = list(pool.map(one, dataset))
    else:
        records = [one(inst) for inst in dataset]
    return records, summarize(records)


# ---------------------------------------------------------------------------
# scripted agents (offline evaluation and replay)


class OracleReformulator:
    """Answers every instance with its exact robust counterpart in RC-JSON."""

    def respond(self, prompt: str, context: dict) -> AgentReply:
        inst = context["instance"]
        text = rc_json_dumps(reformulate(inst))
        return AgentReply(
            payload={
                "reasoning": "emitted the stored robust counterpart",
                "matched_experience_ids": [],
                "final_answer": text,
            },
            output_tokens=max(1, len(text) // 4),
        )


class NominalReformulator:
    """Ignores uncertainty and answers with the nominal LP only."""

    def respond(self, prompt: str, context: dict) -> AgentReply:
        inst = context["instance"]
        text = rc_json_dumps(nominal_lp(inst))
        return AgentReply(
            payload={
                "reasoning": "emitted the nominal problem",
                "matched_experience_ids": [],
                "final_answer": text,
            },
            output_tokens=max(1, len(text) // 4),
        )


class PassthroughCoder:
    """Echoes the reformulator's answer; mocks emit RC-JSON directly."""

    def respond(self, prompt: str, context: dict) -> AgentReply:
        answer = str(context.get("reformulation", "")).strip()
        return AgentReply(
            payload={"final_answer": answer}, output_tokens=max(1, len(answer) // 4)
        )


class TranscriptReplayAgent:
    """Replays persisted transcripts; no agent or network involved."""

    def __init__(self, transcripts_dir: str, role: str):
        self.dir = transcripts_dir
        self.role = role

    def respond(self, prompt: str, context: dict) -> AgentReply:
        inst = context["instance"]
        path = os.path.join(self.dir, f"{inst.id}.json")
        with open(path) as fh:
            saved = json.load(fh)
        leg = saved[self.role]
        return AgentReply(payload=leg["payload"], output_tokens=leg["output_tokens"])
