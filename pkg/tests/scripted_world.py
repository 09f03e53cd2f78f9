"""Scripted agents that replay a fixed adaptation scenario offline.

The reformulator answers a validation instance correctly unless the memory
contains "poison-<id>", and answers a training instance correctly iff its
required token is present in memory. Wrong answers are unparseable, so
they always verify as incorrect. The reflector plays a fixed op script
keyed by (epoch, step, iteration).
"""

import itertools
from dataclasses import replace

from robustlp.agents import AgentReply
from robustlp.generate import GenConfig, generate_dataset
from robustlp.lpcore import rc_json_dumps
from robustlp.reformulate import reformulate

REQUIRED_TOKENS = {"t1_1": "alpha-ok", "t4_2": "beta-ok", "t7_2": "gamma-ok"}

REFLECTOR_SCRIPT = {
    (1, 1, 1): [{"operator": "add", "experience_id": 1, "content": "alpha-draft"}],
    (1, 1, 2): [{"operator": "update", "experience_id": 1, "content": "alpha-ok poison-v3"}],
    (1, 1, 3): [{"operator": "update", "experience_id": 1, "content": "alpha-ok"}],
    (4, 2, 1): [{"operator": "add", "experience_id": 2, "content": "beta-ok poison-v1"}],
    (4, 2, 2): [{"operator": "update", "experience_id": 2, "content": "beta-ok"}],
    (7, 2, 1): [{"operator": "add", "experience_id": 3, "content": "gamma-ok poison-v6"}],
}


def validation_set(count=6, seed=99):
    insts = generate_dataset(GenConfig(n=2, count=count, seed=seed), render=False)
    return [replace(v, id=f"v{i + 1}") for i, v in enumerate(insts)]


def training_stream(seed=123):
    base = generate_dataset(GenConfig(n=2, count=1, seed=seed), render=False)[0]
    for epoch in itertools.count(1):
        for step in range(1, 9):
            yield replace(base, id=f"t{epoch}_{step}")


class ScriptedReformulator:
    def respond(self, prompt, context):
        inst = context["instance"]
        entries = context["memory_entries"]
        contents = " ".join(e.content for e in entries)
        if inst.id.startswith("v"):
            ok = f"poison-{inst.id}" not in contents
            matched = []
        else:
            token = REQUIRED_TOKENS.get(inst.id)
            ok = token is None or token in contents
            matched = [e.experience_id for e in entries if token and token in e.content]
        answer = rc_json_dumps(reformulate(inst)) if ok else "NO ANSWER"
        return AgentReply(
            payload={
                "reasoning": "scripted",
                "matched_experience_ids": matched,
                "final_answer": answer,
            },
            output_tokens=max(1, len(answer) // 4),
        )


class ScriptedReflector:
    def __init__(self):
        self.calls = []

    def respond(self, prompt, context):
        key = (context["epoch"], context["step"], context["iteration"])
        self.calls.append(key)
        return AgentReply(
            payload={"final_answer": REFLECTOR_SCRIPT.get(key, [])}, output_tokens=1
        )
