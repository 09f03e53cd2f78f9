"""Experience memory and the offline adaptation loop.

Memory is an ordered list of entries (id, free-text content, usage counts)
edited only through atomic add/update/delete operations. Adaptation runs
E epochs of S steps: a failing training instance triggers an inner
reflection loop (at most K iterations) that edits a working copy; a
candidate commit must first pass a dual check on a locked mini-batch of
currently-correct validation instances, and at each epoch end the full
validation set gates the memory against its best-ever snapshot, rolling
back on regression.

The committed memory changes only at commits and rollbacks, never through
a partial edit; usage counts ride along with the memory value, so
snapshots and rollbacks carry them too.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .harness import ToleranceSpec, evaluate_instance


class UnknownId(KeyError):
    """Update or delete referenced an id that is not in memory."""


class DuplicateId(ValueError):
    """An add collided with an existing id, or an id repeated across ops."""


@dataclass(frozen=True)
class Experience:
    experience_id: int
    content: str
    success_count: int = 0
    failure_count: int = 0


@dataclass(frozen=True)
class ExperienceMemory:
    entries: tuple[Experience, ...] = ()

    def max_id(self) -> int:
        return max((e.experience_id for e in self.entries), default=0)

    def ids(self) -> set[int]:
        return {e.experience_id for e in self.entries}

    def get(self, experience_id: int) -> Experience:
        for e in self.entries:
            if e.experience_id == experience_id:
                return e
        raise UnknownId(experience_id)

    def signature(self) -> tuple:
        """Hashable full-state view used for bitwise comparisons in tests."""
        return tuple(
            (e.experience_id, e.content, e.success_count, e.failure_count)
            for e in self.entries
        )


@dataclass(frozen=True)
class AddOp:
    experience_id: int
    content: str


@dataclass(frozen=True)
class UpdateOp:
    experience_id: int
    content: str


@dataclass(frozen=True)
class DeleteOp:
    experience_id: int


MemoryOp = AddOp | UpdateOp | DeleteOp


def op_from_dict(d: dict) -> MemoryOp:
    kind = d["operator"]
    if kind == "add":
        return AddOp(int(d["experience_id"]), str(d["content"]))
    if kind == "update":
        return UpdateOp(int(d["experience_id"]), str(d["content"]))
    if kind == "delete":
        return DeleteOp(int(d["experience_id"]))
    raise ValueError(f"unknown operator {kind!r}")


def op_to_dict(op: MemoryOp) -> dict:
    if isinstance(op, AddOp):
        return {"operator": "add", "experience_id": op.experience_id, "content": op.content}
    if isinstance(op, UpdateOp):
        return {"operator": "update", "experience_id": op.experience_id, "content": op.content}
    return {"operator": "delete", "experience_id": op.experience_id}


def apply_ops(memory: ExperienceMemory, ops) -> ExperienceMemory:
    """Apply an operation list atomically; the input memory is untouched.

    Any UnknownId or DuplicateId aborts the whole list with no effect.
    """
    ops = list(ops)
    seen: set[int] = set()
    existing = memory.ids()
    for op in ops:
        if op.experience_id in seen:
            raise DuplicateId(f"id {op.experience_id} appears twice in one op list")
        seen.add(op.experience_id)
        if isinstance(op, AddOp):
            if op.experience_id in existing:
                raise DuplicateId(f"add collides with existing id {op.experience_id}")
            existing.add(op.experience_id)
        else:
            if op.experience_id not in existing:
                raise UnknownId(op.experience_id)

    entries = list(memory.entries)
    for op in ops:
        if isinstance(op, AddOp):
            entries.append(Experience(op.experience_id, op.content))
        elif isinstance(op, UpdateOp):
            entries = [
                replace(e, content=op.content) if e.experience_id == op.experience_id else e
                for e in entries
            ]
        else:
            entries = [e for e in entries if e.experience_id != op.experience_id]
    return ExperienceMemory(tuple(entries))


def record_usage(memory: ExperienceMemory, matched_ids, success: bool) -> ExperienceMemory:
    """Bump success/failure counters on every matched entry; unknown ids ignored."""
    matched = set(matched_ids)
    if not matched:
        return memory
    entries = tuple(
        replace(
            e,
            success_count=e.success_count + (1 if success else 0),
            failure_count=e.failure_count + (0 if success else 1),
        )
        if e.experience_id in matched
        else e
        for e in memory.entries
    )
    return ExperienceMemory(entries)


def memory_to_json(memory: ExperienceMemory) -> list[dict]:
    return [
        {
            "experience_id": e.experience_id,
            "content": e.content,
            "success_count": e.success_count,
            "failure_count": e.failure_count,
        }
        for e in memory.entries
    ]


def memory_from_json(data) -> ExperienceMemory:
    return ExperienceMemory(
        tuple(
            Experience(
                int(e["experience_id"]),
                str(e["content"]),
                int(e.get("success_count", 0)),
                int(e.get("failure_count", 0)),
            )
            for e in data
        )
    )


def save_memory(path, memory: ExperienceMemory, correspondence=None) -> None:
    """Write the entry array; the correspondence map goes to a sidecar file."""
    with open(path, "w") as fh:
        json.dump(memory_to_json(memory), fh, indent=1)
    if correspondence is not None:
        with open(str(path) + ".map.json", "w") as fh:
            json.dump(
                {str(k): sorted(v) for k, v in correspondence.items()}, fh, indent=1
            )


def load_memory(path) -> ExperienceMemory:
    with open(path) as fh:
        return memory_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# correspondence map and dual-check batch selection


class CorrespondenceMap:
    """experience_id -> validation ids whose last correct answer used it."""

    def __init__(self):
        self._by_experience: dict[int, set[str]] = {}

    def as_dict(self) -> dict[int, set[str]]:
        return {k: set(v) for k, v in self._by_experience.items()}

    def record_correct(self, instance_id: str, matched_ids) -> None:
        for ids in self._by_experience.values():
            ids.discard(instance_id)
        for eid in matched_ids:
            self._by_experience.setdefault(eid, set()).add(instance_id)

    def prune(self, deleted_ids) -> None:
        for eid in list(deleted_ids):
            self._by_experience.pop(eid, None)

    def linked_ids(self) -> set[int]:
        return set(self._by_experience)

    def linked_instances(self, experience_ids) -> set[str]:
        out: set[str] = set()
        for eid in experience_ids:
            out |= self._by_experience.get(eid, set())
        return out


def select_dc_batch(cmap: CorrespondenceMap, modified_ids, validation_state, order, B):
    """Pick up to B currently-correct validation ids, linked instances first.

    validation_state maps instance id -> currently correct; `order` fixes
    the deterministic ordering (the validation set's own order).
    """
    linked = cmap.linked_instances(modified_ids)
    batch = [vid for vid in order if vid in linked and validation_state.get(vid)]
    for vid in order:
        if len(batch) >= B:
            break
        if validation_state.get(vid) and vid not in batch:
            batch.append(vid)
    return batch[:B]


# ---------------------------------------------------------------------------
# offline adaptation


@dataclass(frozen=True)
class AdaptConfig:
    epochs: int
    steps_per_epoch: int
    dc_batch: int
    inner_iters: int
    tol: ToleranceSpec = ToleranceSpec()
    max_inflight: int = 1  # concurrency cap for one DC-batch evaluation

    def __post_init__(self):
        if min(self.epochs, self.steps_per_epoch, self.dc_batch, self.inner_iters) < 1:
            raise ValueError("epochs, steps, dc_batch and inner_iters must all be >= 1")
        if self.max_inflight < 1:
            raise ValueError("max_inflight must be >= 1")


@dataclass
class AdaptResult:
    best_memory: ExperienceMemory
    best_accuracy: float
    final_memory: ExperienceMemory
    trace: list[dict]
    correspondence: dict


class _Controller:
    """Shared state of one adaptation run."""

    def __init__(self, config, validation, reformulator, reflector, coder, trace_path):
        self.config = config
        self.validation = list(validation)
        self.order = [v.id for v in self.validation]
        self.by_id = {v.id: v for v in self.validation}
        self.reformulator = reformulator
        self.reflector = reflector
        self.coder = coder
        self.cmap = CorrespondenceMap()
        self.val_state: dict[str, bool] = {}
        self.trace: list[dict] = []
        self._trace_fh = open(trace_path, "w") if trace_path else None

    def emit(self, **event) -> None:
        self.trace.append(event)
        if self._trace_fh:
            self._trace_fh.write(json.dumps(event) + "\n")
            self._trace_fh.flush()

    def close(self) -> None:
        if self._trace_fh:
            self._trace_fh.close()

    def eval_one(self, inst, memory: ExperienceMemory, update_map: bool):
        """Evaluate one instance under a memory value; bumps usage counts."""
        record, response, feedback = evaluate_instance(
            inst, self.reformulator, self.coder, memory.entries, self.config.tol
        )
        matched = () if response is None else response.matched_experience_ids
        memory = record_usage(memory, matched, record.correct)
        if update_map and record.correct:
            self.cmap.record_correct(inst.id, matched)
        return record, response, feedback, memory

    def eval_validation(self, memory: ExperienceMemory):
        """Full validation pass; refreshes state and the correspondence map."""
        correct = 0
        for inst in self.validation:
            record, _, _, memory = self.eval_one(inst, memory, update_map=True)
            self.val_state[inst.id] = record.correct
            correct += 1 if record.correct else 0
        return correct / len(self.validation), memory

    def eval_batch(self, ids, memory: ExperienceMemory):
        """Evaluate locked-batch instances, concurrently when configured.

        Usage counts fold in batch order afterwards, so results are
        independent of scheduling.
        """
        instances = [self.by_id[vid] for vid in ids]

        def one(inst):
            return evaluate_instance(
                inst, self.reformulator, self.coder, memory.entries, self.config.tol
            )

        if self.config.max_inflight > 1 and len(instances) > 1:
            with ThreadPoolExecutor(max_workers=self.config.max_inflight) as pool:
                raw = list(pool.map(one, instances))
        else:
            raw = [one(inst) for inst in instances]
        results = []
        for vid, (record, response, _) in zip(ids, raw):
            matched = () if response is None else response.matched_experience_ids
            memory = record_usage(memory, matched, record.correct)
            results.append((vid, record, response))
        return results, memory


def run_offline_adaptation(
    config: AdaptConfig,
    training_stream,
    validation,
    reformulator,
    reflector,
    coder,
    initial_memory: ExperienceMemory = ExperienceMemory(),
    trace_path=None,
) -> AdaptResult:
    """Adapt the experience memory offline against a training stream.

    training_stream yields one instance per step (sampled on the fly);
    validation is the fixed held-out set used by the dual check and the
    epoch gate. Agent errors abort the step, not the run.
    """
    ctl = _Controller(config, validation, reformulator, reflector, coder, trace_path)
    stream = iter(training_stream)
    try:
        memory = initial_memory
        acc, memory = ctl.eval_validation(memory)
        best_memory, best_acc = memory, acc
        ctl.emit(event="init_val", accuracy=acc)

        for epoch in range(1, config.epochs + 1):
            for step in range(1, config.steps_per_epoch + 1):
                inst = next(stream)
                record, response, feedback, memory = ctl.eval_one(
                    inst, memory, update_map=False
                )
                if record.correct:
                    ctl.emit(event="skip", epoch=epoch, step=step, instance=inst.id)
                    continue

                working = memory
                committed = False
                locked_batch: list[str] | None = None
                modified_ids: set[int] = set()
                prev_ops_trace: list[dict] = []
                dc_fail_feedback: str | None = None

                for it in range(1, config.inner_iters + 1):
                    samples = [
                        {
                            "problem": inst.id,
                            "output": "" if response is None else response.final_answer,
                            "feedback": feedback
                            + (f"; dual-check failure: {dc_fail_feedback}" if dc_fail_feedback else ""),
                            "correct": False,
                        }
                    ]
                    try:
                        reply = reflector.respond(
                            prompt="",
                            context={
                                "instance": inst,
                                "memory": working,
                                "samples": samples,
                                "prev_ops": prev_ops_trace,
                                "dc_fail": dc_fail_feedback,
                                "epoch": epoch,
                                "step": step,
                                "iteration": it,
                                "max_id": working.max_id(),
                            },
                        )
                        ops = [op_from_dict(d) for d in reply.payload["final_answer"]]
                        working = apply_ops(working, ops)
                    except Exception as exc:
                        ctl.emit(
                            event="agent_error",
                            epoch=epoch,
                            step=step,
                            iteration=it,
                            error=str(exc),
                        )
                        break
                    modified_ids |= {op.experience_id for op in ops}
                    ctl.emit(
                        event="reflect",
                        epoch=epoch,
                        step=step,
                        iteration=it,
                        ops=[op_to_dict(o) for o in ops],
                    )

                    record, response, feedback, working = ctl.eval_one(
                        inst, working, update_map=False
                    )
                    prev_ops_trace.append(
                        {"iteration": it, "ops": [op_to_dict(o) for o in ops],
                         "correct": record.correct, "feedback": feedback}
                    )
                    dc_fail_feedback = None
                    if not record.correct:
                        ctl.emit(
                            event="train_eval", epoch=epoch, step=step, iteration=it,
                            outcome="training fail",
                        )
                        continue

                    if locked_batch is None:  # first training pass locks the batch
                        locked_batch = select_dc_batch(
                            ctl.cmap, modified_ids, ctl.val_state, ctl.order,
                            config.dc_batch,
                        )
                    batch_results, working = ctl.eval_batch(locked_batch, working)
                    failures = [vid for vid, vrec, _ in batch_results if not vrec.correct]
                    if failures:
                        dc_fail_feedback = f"regressed validation instances: {failures}"
                        ctl.emit(
                            event="dc_check", epoch=epoch, step=step, iteration=it,
                            batch=locked_batch, passed=False, failures=failures,
                            outcome="DC fail",
                        )
                        continue

                    # DC pass: commit the working copy and refresh links
                    memory = working
                    for vid, vrec, vresp in batch_results:
                        matched = () if vresp is None else vresp.matched_experience_ids
                        ctl.cmap.record_correct(vid, matched)
                        ctl.val_state[vid] = True
                    ctl.cmap.prune(ctl.cmap.linked_ids() - memory.ids())
                    committed = True
                    ctl.emit(
                        event="dc_check", epoch=epoch, step=step, iteration=it,
                        batch=locked_batch, passed=True, outcome="DC pass",
                    )
                    ctl.emit(
                        event="commit", epoch=epoch, step=step, iteration=it,
                        memory=memory_to_json(memory),
                    )
                    break

                if not committed:
                    ctl.emit(event="discard", epoch=epoch, step=step)

            acc, memory = ctl.eval_validation(memory)
            ctl.emit(event="epoch_val", epoch=epoch, accuracy=acc)
            if acc >= best_acc:
                best_memory, best_acc = memory, acc
                ctl.emit(
                    event="snapshot", epoch=epoch, accuracy=acc,
                    memory=memory_to_json(best_memory),
                )
            else:
                memory = best_memory
                ctl.emit(
                    event="rollback", epoch=epoch, accuracy=acc, restored=best_acc,
                    memory=memory_to_json(memory),
                )

        return AdaptResult(
            best_memory=best_memory,
            best_accuracy=best_acc,
            final_memory=memory,
            trace=ctl.trace,
            correspondence=ctl.cmap.as_dict(),
        )
    finally:
        ctl.close()
