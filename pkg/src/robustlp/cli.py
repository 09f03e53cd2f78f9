"""Command-line entry point tying the pipeline stages together.

Subcommands: gen, reformulate, solve, oracle, render, eval, adapt,
verify-paper. Every subcommand is scriptable (files and flags in, files or
stdout out). Exit codes: 0 success, 1 usage error, 2 data error, 3 agent or
transport error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .agents import ChatClient, HttpAgent, SchemaError, TransportError
from .generate import (
    ALL_TEMPLATES,
    ALL_TYPES,
    GenConfig,
    GenerationStalled,
    generate_dataset,
    generate_mixed,
)
from .harness import (
    NominalReformulator,
    OracleReformulator,
    PassthroughCoder,
    ToleranceSpec,
    TranscriptReplayAgent,
    run_pipeline,
)
from .lpcore import (
    MalformedModel,
    STATUS_OPTIMAL,
    rc_json_dumps,
    rc_json_loads,
    solve_lp,
)
from .memory import (
    AdaptConfig,
    ExperienceMemory,
    load_memory,
    run_offline_adaptation,
    save_memory,
)
from .model import InvalidInstance, instance_to_dict, read_jsonl
from .pinned import (
    REFERENCE_F_STAR,
    REFERENCE_TOL,
    REFERENCE_X_STAR,
    reference_instance,
)
from .reformulate import (
    InfeasibleRobust,
    NoConvergence,
    reformulate,
    robust_value_oracle,
    solve_robust,
)
from .render import render_latex, render_robust_extension, template_from_id

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_AGENT = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with status 2
        raise _UsageError(message)


def _parse_ns(text: str) -> list[int]:
    """Accept "3", "2-5" or "2,3,5"."""
    text = text.strip()
    if "-" in text and not text.startswith("-"):
        lo, hi = text.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(p) for p in text.split(",") if p]


def _read_dataset(path):
    data = read_jsonl(path)
    if not data:
        raise InvalidInstance(f"no instances in {path}")
    return data


def _out(text: str, path) -> None:
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _cmd_gen(args) -> int:
    file_cfg = {}
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
    # precedence: flags > config file > defaults
    n_spec = args.n if args.n is not None else str(file_cfg.get("n", "2-5"))
    count = args.count if args.count is not None else file_cfg.get("count")
    if count is None:
        raise _UsageError("--count (or a config-file count) is required")
    seed = args.seed if args.seed is not None else int(file_cfg.get("seed", 0))
    types = args.types.split(",") if args.types else file_cfg.get("uncertainty_types")
    templates = args.templates.split(",") if args.templates else file_cfg.get("templates")
    hard = args.hard or bool(file_cfg.get("hard_mode", False))
    kwargs = dict(
        uncertainty_types=tuple(types) if types else ALL_TYPES,
        templates=tuple(templates) if templates else ALL_TEMPLATES,
        hard_mode=hard,
    )
    ns = _parse_ns(n_spec)
    if len(ns) == 1:
        data = generate_dataset(GenConfig(n=ns[0], count=int(count), seed=seed, **kwargs))
    else:
        data = generate_mixed(ns, int(count), seed, **kwargs)
    lines = "\n".join(json.dumps(instance_to_dict(inst)) for inst in data)
    _out(lines, args.out)
    return EXIT_OK


def _cmd_reformulate(args) -> int:
    data = _read_dataset(args.input)
    lines = "\n".join(rc_json_dumps(reformulate(inst)) for inst in data)
    _out(lines, args.out)
    return EXIT_OK


def _cmd_solve(args) -> int:
    if args.input == "-":
        text = sys.stdin.read()
    else:
        with open(args.input) as fh:
            text = fh.read()
    results = []
    for line in text.strip().splitlines():
        if not line.strip():
            continue
        sol = solve_lp(rc_json_loads(line))
        results.append(
            {
                "status": sol.status,
                "objective_value": sol.objective_value,
                "x": None if sol.x is None else list(sol.x),
            }
        )
    _out("\n".join(json.dumps(r) for r in results), args.out)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    data = _read_dataset(args.input)
    lines = []
    for inst in data:
        value = robust_value_oracle(inst, max_iters=args.max_iters)
        lines.append(json.dumps({"id": inst.id, "value": value}))
    _out("\n".join(lines), args.out)
    return EXIT_OK


def _cmd_render(args) -> int:
    data = _read_dataset(args.input)
    blocks = []
    for inst in data:
        if args.format == "latex":
            blocks.append(render_latex(inst, template_from_id(args.template)))
        else:
            blocks.append(render_robust_extension(inst))
    _out("\n\n".join(blocks), args.out)
    return EXIT_OK


def _agents_from_args(args):
    if args.replay:
        return (
            TranscriptReplayAgent(args.replay, "reformulator"),
            TranscriptReplayAgent(args.replay, "coder"),
        )
    if args.mock == "oracle":
        return OracleReformulator(), PassthroughCoder()
    if args.mock == "nominal":
        return NominalReformulator(), PassthroughCoder()
    if not args.agent_config:
        raise _UsageError("one of --mock, --replay or --agent-config is required")
    with open(args.agent_config) as fh:
        cfg = json.load(fh)
    client = ChatClient(
        base_url=cfg["base_url"],
        model=cfg["model"],
        api_key_env=cfg.get("api_key_env", "ROBUSTLP_API_KEY"),
        temperature=cfg.get("temperature", 0.0),
        max_output_tokens=cfg.get("max_output_tokens"),
    )
    coder_model = cfg.get("coder_model", cfg["model"])
    coder_client = ChatClient(
        base_url=cfg["base_url"],
        model=coder_model,
        api_key_env=cfg.get("api_key_env", "ROBUSTLP_API_KEY"),
        temperature=cfg.get("temperature", 0.0),
        max_output_tokens=cfg.get("max_output_tokens"),
    )
    return HttpAgent(client, "reformulator"), HttpAgent(coder_client, "coder")


def _cmd_eval(args) -> int:
    data = _read_dataset(args.input)
    reformulator, coder = _agents_from_args(args)
    memory = load_memory(args.memory).entries if args.memory else None
    tol = ToleranceSpec(tol_abs=args.tol_abs, tol_rel=args.tol_rel)
    all_summaries = []
    for rep in range(args.repeat):
        records, summary = run_pipeline(
            data,
            reformulator,
            coder,
            memory_entries=memory,
            tol=tol,
            transcripts_dir=args.transcripts,
            max_inflight=args.max_inflight,
        )
        all_summaries.append(summary)
        if args.out:
            path = args.out if args.repeat == 1 else f"{args.out}.{rep}"
            with open(path, "w") as fh:
                for r in records:
                    fh.write(json.dumps(r.to_dict()) + "\n")
    out = all_summaries[0] if args.repeat == 1 else {"runs": all_summaries}
    text = json.dumps(out, indent=1)
    if args.summary:
        _out(text, args.summary)
    else:
        _out(text, None)
    return EXIT_OK


def _cmd_adapt(args) -> int:
    validation = _read_dataset(args.val)
    if args.mock == "oracle":
        reformulator, coder = OracleReformulator(), PassthroughCoder()

        class _NoopReflector:
            def respond(self, prompt, context):
                from .agents import AgentReply

                return AgentReply(payload={"final_answer": []}, output_tokens=1)

        reflector = _NoopReflector()
    else:
        if not args.agent_config:
            raise _UsageError("--agent-config required unless --mock oracle")
        reformulator, coder = _agents_from_args(args)
        with open(args.agent_config) as fh:
            cfg = json.load(fh)
        reflector_client = ChatClient(
            base_url=cfg["base_url"],
            model=cfg.get("reflector_model", cfg["model"]),
            api_key_env=cfg.get("api_key_env", "ROBUSTLP_API_KEY"),
            temperature=cfg.get("temperature", 0.0),
        )
        reflector = HttpAgent(reflector_client, "reflector")

    def stream():
        candidate = 0
        while True:
            found = generate_dataset(
                GenConfig(n=args.train_n, count=1, seed=args.train_seed + candidate),
                render=True,
            )
            candidate += 1
            yield found[0]

    config = AdaptConfig(
        epochs=args.epochs,
        steps_per_epoch=args.steps,
        dc_batch=args.dc_batch,
        inner_iters=args.inner_iters,
        tol=ToleranceSpec(tol_abs=args.tol_abs, tol_rel=args.tol_rel),
        max_inflight=args.max_inflight,
    )
    initial = load_memory(args.memory_in) if args.memory_in else ExperienceMemory()
    result = run_offline_adaptation(
        config,
        stream(),
        validation,
        reformulator,
        reflector,
        coder,
        initial_memory=initial,
        trace_path=args.trace,
    )
    save_memory(args.memory_out, result.best_memory, result.correspondence)
    _out(
        json.dumps(
            {
                "best_accuracy": result.best_accuracy,
                "entries": len(result.best_memory.entries),
            }
        ),
        None,
    )
    return EXIT_OK


def _cmd_verify_paper(args) -> int:
    inst = reference_instance()
    sol = solve_robust(inst)
    ok = (
        sol.status == STATUS_OPTIMAL
        and abs(sol.objective_value - REFERENCE_F_STAR) <= REFERENCE_TOL
        and all(abs(a - b) <= REFERENCE_TOL for a, b in zip(sol.x, REFERENCE_X_STAR))
    )
    oracle = robust_value_oracle(inst)
    oracle_ok = abs(oracle - REFERENCE_F_STAR) <= REFERENCE_TOL
    print(f"reformulate+solve: {sol.objective_value:.4f} (reference {REFERENCE_F_STAR})")
    print(f"cutting-plane oracle: {oracle:.4f}")
    print("PASS" if ok and oracle_ok else "FAIL")
    return EXIT_OK if ok and oracle_ok else EXIT_DATA


def build_parser() -> _Parser:
    p = _Parser(prog="robustlp", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a verified benchmark dataset (JSONL)")
    g.add_argument("--n", default=None, help='variable count: "3", "2-5" or "2,3,5"')
    g.add_argument("--count", type=int, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--hard", action="store_true", help="hard structural configuration")
    g.add_argument("--types", default=None, help="comma list from box,budget,polyhedral")
    g.add_argument("--templates", default=None, help="comma list like T011,T101")
    g.add_argument("--config", default=None, help="JSON config file mirroring the flags")
    g.add_argument("--out", default=None)
    g.set_defaults(func=_cmd_gen)

    r = sub.add_parser("reformulate", help="instances (JSONL) -> robust counterparts (RC-JSON)")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--out", default=None)
    r.set_defaults(func=_cmd_reformulate)

    s = sub.add_parser("solve", help="solve RC-JSON models (one per line; '-' = stdin)")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_solve)

    o = sub.add_parser("oracle", help="cutting-plane robust value per instance")
    o.add_argument("--in", dest="input", required=True)
    o.add_argument("--max-iters", type=int, default=200)
    o.add_argument("--out", default=None)
    o.set_defaults(func=_cmd_oracle)

    d = sub.add_parser("render", help="LaTeX or robust-extension text per instance")
    d.add_argument("--in", dest="input", required=True)
    d.add_argument("--template", default="T011")
    d.add_argument("--format", choices=("latex", "extension"), default="latex")
    d.add_argument("--out", default=None)
    d.set_defaults(func=_cmd_render)

    e = sub.add_parser("eval", help="run the two-stage pipeline over a dataset")
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--mock", choices=("oracle", "nominal"), default=None)
    e.add_argument("--replay", default=None, help="transcripts dir to replay")
    e.add_argument("--agent-config", default=None)
    e.add_argument("--memory", default=None, help="experience memory JSON file")
    e.add_argument("--tol-abs", type=float, default=1e-4)
    e.add_argument("--tol-rel", type=float, default=1e-3)
    e.add_argument("--transcripts", default=None, help="directory to persist transcripts")
    e.add_argument("--max-inflight", type=int, default=1)
    e.add_argument("--repeat", type=int, default=1)
    e.add_argument("--out", default=None, help="records JSONL path")
    e.add_argument("--summary", default=None, help="summary JSON path (default stdout)")
    e.set_defaults(func=_cmd_eval)

    a = sub.add_parser("adapt", help="offline adaptation of the experience memory")
    a.add_argument("--val", required=True, help="validation dataset JSONL")
    a.add_argument("--mock", choices=("oracle",), default=None)
    a.add_argument("--agent-config", default=None)
    a.add_argument("--epochs", type=int, default=10)
    a.add_argument("--steps", type=int, default=8)
    a.add_argument("--dc-batch", type=int, default=4)
    a.add_argument("--inner-iters", type=int, default=3)
    a.add_argument("--train-n", type=int, default=3)
    a.add_argument("--train-seed", type=int, default=77_000)
    a.add_argument("--tol-abs", type=float, default=1e-4)
    a.add_argument("--tol-rel", type=float, default=1e-3)
    a.add_argument("--max-inflight", type=int, default=1)
    a.add_argument("--memory-in", default=None)
    a.add_argument("--memory-out", required=True)
    a.add_argument("--trace", default=None, help="trace JSONL path")
    a.set_defaults(func=_cmd_adapt)

    v = sub.add_parser("verify-paper", help="run the pinned reference regression")
    v.set_defaults(func=_cmd_verify_paper)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TransportError, SchemaError) as exc:
        print(f"agent error: {exc}", file=sys.stderr)
        return EXIT_AGENT
    except (
        MalformedModel,
        InvalidInstance,
        GenerationStalled,
        NoConvergence,
        InfeasibleRobust,
        FileNotFoundError,
        json.JSONDecodeError,
        KeyError,
        ValueError,
    ) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
