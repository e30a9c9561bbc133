"""Command-line entry point.

Subcommands:

    codebook   build and serialize a codebook from a triples file
    retrieve   end-to-end Top-K retrieval for a question file
    answer     retrieval + one-shot adjudication (HTTP endpoint or mock)
    synth      generate a seed-reproducible planted benchmark
    validate   run the statistical validation suite as a CI gate

Configuration precedence: command-line flags override the optional JSON
config file (--config), which overrides built-in defaults (the standard
calibration row alpha=0.2 beta=0.1 lambda=0.8, K=3, block size 4, d=4096).
All randomness flows from --seed through named substreams.

Exit codes: 0 success, 1 validation/threshold failure, 2 I/O, 3 transport.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

from . import bench
from .adjudicate import (
    ClientContract,
    HttpLlmClient,
    MockLlmClient,
    adjudicate,
    render_prompt,
    verbalize_path,
)
from .codebook_io import load_codebook, save_codebook
from .errors import (
    ConfigError,
    FormatError,
    ResponseParseError,
    TransportError,
    VsapathError,
)
from .kg import IdfTable, build_schema_graph, compute_idf, dump_questions, dump_triples, load_questions, load_triples
from .retrieve import (
    PenaltyMode,
    RetrievalConfig,
    collect_candidate_schemas,
    result_to_record,
    retrieve,
)
from .synth import SynthSpec, generate_benchmark
from .vsa import BlockFamily, HdcConfig, OperatorFamily, make_codebook

log = logging.getLogger("vsapath")

_DEFAULTS = {
    "alpha": 0.2,
    "beta": 0.1,
    "lam": 0.8,
    "k": 3,
    "l_max": 3,
    "beam": 1024,
    "blocks": 256,
    "block_size": 4,
    "operator": "ghrr",
    "block_family": "householder_product",
    "penalty_mode": "as_printed",
    "seed": 0,
}


def _add_retrieval_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="optional JSON config file")
    parser.add_argument("--alpha", type=float, help="IDF bonus weight")
    parser.add_argument("--beta", type=float, help="length-penalty weight")
    parser.add_argument("--lam", type=float, help="length-penalty decay in (0,1)")
    parser.add_argument("--k", type=int, help="paths kept after pruning")
    parser.add_argument("--l-max", dest="l_max", type=int, help="maximum plan depth")
    parser.add_argument("--beam", type=int, help="beam width")
    parser.add_argument("--blocks", type=int, help="number of blocks D")
    parser.add_argument("--block-size", dest="block_size", type=int, help="block size m")
    parser.add_argument(
        "--operator", choices=[f.value for f in OperatorFamily], help="operator family"
    )
    parser.add_argument(
        "--block-family", dest="block_family",
        choices=[f.value for f in BlockFamily], help="GHRR block construction",
    )
    parser.add_argument(
        "--penalty-mode", dest="penalty_mode",
        choices=[m.value for m in PenaltyMode], help="length-penalty direction",
    )
    parser.add_argument("--seed", type=int, help="master seed")


def _resolve(args: argparse.Namespace) -> dict:
    """flags > config file > defaults; validates totality before any work."""
    layered = dict(_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path is not None:
        with open(config_path) as fh:
            from_file = json.load(fh)
        unknown = set(from_file) - set(_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config file keys: {sorted(unknown)}")
        layered.update(from_file)
    for key in _DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            layered[key] = value
    return layered


def _retrieval_config(settings: dict) -> RetrievalConfig:
    hdc = HdcConfig(
        num_blocks=settings["blocks"],
        block_size=settings["block_size"],
        operator=OperatorFamily(settings["operator"]),
        seed=settings["seed"],
        block_family=BlockFamily(settings["block_family"]),
    )
    return RetrievalConfig(
        hdc=hdc,
        alpha=settings["alpha"],
        beta=settings["beta"],
        lam=settings["lam"],
        k=settings["k"],
        l_max=settings["l_max"],
        beam=settings["beam"],
        penalty_mode=PenaltyMode(settings["penalty_mode"]),
    )


def _open_graph(path: Path):
    with open(path, "rb") as fh:
        return load_triples(fh)


def cmd_codebook(args: argparse.Namespace) -> int:
    settings = _resolve(args)
    cfg = _retrieval_config(settings)  # validates every numeric flag up front
    graph = _open_graph(args.triples)
    symbols = sorted(graph.relations)
    if not symbols:
        raise ConfigError(f"no relations found in {args.triples}")
    cb = make_codebook(cfg.hdc, symbols)
    with open(args.out, "wb") as fh:
        save_codebook(cb, fh)
    print(f"codebook: {len(cb)} symbols, d={cfg.hdc.dim} -> {args.out}")
    return 0


def _prepare_retrieval(args, settings, cfg):
    graph = _open_graph(args.triples)
    with open(args.questions, "rb") as fh:
        questions = load_questions(fh, graph)
    if args.codebook:
        with open(args.codebook, "rb") as fh:
            cb = load_codebook(fh)
        missing = sorted(graph.relations - set(cb.symbols))
        if missing:
            raise ConfigError(
                f"codebook is missing {len(missing)} graph relations, e.g. {missing[:3]}"
            )
    else:
        cb = make_codebook(cfg.hdc, sorted(graph.relations))
    sg = build_schema_graph(graph)
    # IDF pass: candidate schemas under the same (l_max, beam) as inference.
    candidate_sets = {
        q.id: collect_candidate_schemas(graph, sg, q, cfg) for q in questions
    }
    idf = compute_idf(questions, candidate_sets)
    return graph, sg, cb, idf, questions


def cmd_retrieve(args: argparse.Namespace) -> int:
    settings = _resolve(args)
    cfg = _retrieval_config(settings)
    graph, sg, cb, idf, questions = _prepare_retrieval(args, settings, cfg)
    hits = 0
    gold_seen = 0
    n_candidates = []
    timing_sums: dict[str, int] = {}
    with open(args.out, "ab") as out:
        for question in questions:
            result = retrieve(graph, sg, cb, idf, question, cfg)
            out.write((json.dumps(result_to_record(result), sort_keys=True) + "\n").encode())
            out.flush()
            n_candidates.append(len(result.candidates))
            for stage, us in result.timings_us.items():
                timing_sums[stage] = timing_sums.get(stage, 0) + us
            if question.gold_answers is not None:
                gold_seen += 1
                if result.top_k and result.top_k[0].path.terminal in question.gold_answers:
                    hits += 1
    n = max(len(questions), 1)
    mean_timings = {stage: total // n for stage, total in timing_sums.items()}
    summary = (
        f"retrieve: {len(questions)} questions, K={cfg.k}, "
        f"mean candidates={sum(n_candidates) / n:.1f}, mean timings_us={mean_timings}"
    )
    if gold_seen:
        summary += f", top1 hit rate={hits / gold_seen:.4f}"
    print(summary)
    return 0


def cmd_answer(args: argparse.Namespace) -> int:
    settings = _resolve(args)
    cfg = _retrieval_config(settings)
    if args.llm_endpoint:
        contract = ClientContract(
            endpoint_url=args.llm_endpoint,
            timeout_s=args.timeout,
            max_retries=args.retries,
            token_env=args.token_env,
        )
        client = HttpLlmClient(contract)
    else:
        client = MockLlmClient()
    graph, sg, cb, idf, questions = _prepare_retrieval(args, settings, cfg)
    correct = 0
    gold_seen = 0
    transport_failures = 0
    with open(args.out, "ab") as out:
        for question in questions:
            result = retrieve(graph, sg, cb, idf, question, cfg)
            record: dict = {"question_id": question.id}
            if not result.top_k:
                record["error"] = "no candidate paths retrieved"
            else:
                paths = [verbalize_path(sc.path) for sc in result.top_k]
                bundle = render_prompt(question.text, paths)
                before = client.requests_made
                try:
                    decision = adjudicate(client, bundle)
                    call_count = client.requests_made - before
                    if call_count != 1:
                        raise VsapathError(
                            f"single-call invariant violated: {call_count} calls "
                            f"for question {question.id}"
                        )
                    record.update(
                        answer=decision.answer,
                        supporting_indices=list(decision.supporting_indices),
                        supporting_paths=[
                            paths[i - 1] for i in decision.supporting_indices
                        ],
                        rationale=decision.rationale,
                        call_count=call_count,
                        warnings=list(decision.warnings),
                    )
                    if question.gold_answers is not None:
                        gold_seen += 1
                        if decision.answer in question.gold_answers:
                            correct += 1
                except TransportError as exc:
                    transport_failures += 1
                    record["error"] = f"transport: {exc}"
                except ResponseParseError as exc:
                    record["error"] = f"parse: {exc}"
            out.write((json.dumps(record, sort_keys=True) + "\n").encode())
            out.flush()
    summary = f"answer: {len(questions)} questions, K={cfg.k}"
    if gold_seen:
        summary += f", accuracy={correct / gold_seen:.4f}"
    if transport_failures:
        summary += f", transport failures={transport_failures}"
    print(summary)
    return 3 if transport_failures else 0


def cmd_synth(args: argparse.Namespace) -> int:
    settings = _resolve(args)
    spec = SynthSpec(
        entities=args.entities,
        relations=args.relations,
        triples=args.n_triples,
        questions=args.n_questions,
        max_gold_length=args.max_gold_length,
        seed=settings["seed"],
    )
    benchmark = generate_benchmark(spec)
    with open(args.out_triples, "wb") as fh:
        dump_triples(benchmark.graph, fh)
    with open(args.out_questions, "wb") as fh:
        dump_questions(benchmark.questions, fh)
    print(
        f"synth: {len(benchmark.graph.triples)} triples, "
        f"{len(benchmark.questions)} questions -> {args.out_triples}, {args.out_questions}"
    )
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    settings = _resolve(args)
    if not 0.0 < args.epsilon < 1.0:
        raise ConfigError(f"--epsilon must lie in (0, 1), got {args.epsilon}")
    chosen = args.experiments.split(",") if args.experiments else [
        "tail", "order", "separation", "capacity", "scaling",
    ]
    known = {"tail", "order", "separation", "capacity", "scaling"}
    unknown = set(chosen) - known
    if unknown:
        raise ConfigError(f"unknown experiments: {sorted(unknown)}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stamp = time.strftime("%Y%m%dT%H%M%S")
    seed = settings["seed"]
    failures: list[str] = []

    def check(name: str, ok: bool, detail: str) -> None:
        status = "PASS" if ok else "FAIL"
        print(f"{name}: {status} ({detail})")
        if not ok:
            failures.append(f"{name}: {detail}")

    if "tail" in chosen:
        exp = bench.run_tail_experiment(
            OperatorFamily.BIPOLAR_XOR, [512, 2048, 8192], args.epsilon,
            trials=args.tail_trials, seed=seed,
        )
        bench.write_table(exp, out_dir / f"tail_{stamp}.csv")
        mono = all(exp.rates[i + 1] <= exp.rates[i] for i in range(len(exp.rates) - 1))
        check("tail.monotone", mono, f"rates={exp.rates}")
        bound = 10.0 * bench.bipolar_tail_bound(2048, args.epsilon)
        check("tail.bound", exp.rates[1] <= bound, f"rate={exp.rates[1]:.3g} limit={bound:.3g}")

    if "order" in chosen:
        table = bench.run_order_sensitivity(
            list(OperatorFamily), [2, 3, 4], trials=args.order_trials, seed=seed
        )
        bench.write_table(table, out_dir / f"order_{stamp}.csv")
        for row in table.rows:
            if row.operator is OperatorFamily.GHRR:
                check(
                    f"order.ghrr.l{row.length}", row.mean_sim <= 0.1,
                    f"mean={row.mean_sim:.4f}",
                )
            else:
                check(
                    f"order.{row.operator.value}.l{row.length}",
                    abs(row.mean_sim - 1.0) <= 1e-9,
                    f"mean={row.mean_sim:.12f}",
                )

    if "separation" in chosen:
        exp = bench.run_separation_check(
            n_relations=3, m_distractors=100, epsilon=0.2, delta=0.05,
            trials=args.separation_trials, seed=seed,
        )
        bench.write_table(exp, out_dir / f"separation_{stamp}.csv")
        check(
            "separation.rate", exp.success_rate >= 1.0 - exp.delta,
            f"rate={exp.success_rate:.4f} at d={exp.d}",
        )
        check("separation.exact", exp.exact_failures == 0, f"failures={exp.exact_failures}")

    if "capacity" in chosen:
        fit = bench.run_tail_experiment(
            OperatorFamily.BIPOLAR_XOR, [64, 128, 256], 0.2, trials=20000, seed=seed
        )
        exp = bench.run_capacity_experiment(
            OperatorFamily.BIPOLAR_XOR, m_distractors=1000, delta=0.05, epsilon=0.2,
            c=fit.fitted_c, trials=args.capacity_trials, seed=seed,
        )
        bench.write_table(exp, out_dir / f"capacity_{stamp}.csv")
        union_bound_d = bench.separation_dimension(1000, 0.2, 0.05)
        check("capacity.converged", exp.converged, f"measured={exp.measured_d}")
        check(
            "capacity.bound", exp.converged and exp.measured_d <= union_bound_d,
            f"measured={exp.measured_d} bound={union_bound_d} predicted={exp.predicted_d}",
        )

    if "scaling" in chosen:
        run = bench.run_scaling_benchmark(
            [2500, 5000, 7500, 10000], [1024, 2048, 4096, 8192], seed=seed
        )
        bench.write_table(run, out_dir / f"scaling_{stamp}.csv")
        check("scaling.r2", run.r_squared >= 0.98, f"r2={run.r_squared:.4f}")
        check(
            "scaling.deviation", run.max_rel_deviation <= 0.20,
            f"max_rel={run.max_rel_deviation:.3f}",
        )

    if failures:
        print(f"validate: {len(failures)} threshold failure(s)")
        return 1
    print("validate: all thresholds passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vsapath",
        description="Hyperdimensional Top-K path retrieval over knowledge graphs",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codebook", help="build and serialize a codebook")
    p.add_argument("--triples", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_retrieval_flags(p)
    p.set_defaults(func=cmd_codebook)

    p = sub.add_parser("retrieve", help="Top-K retrieval for a question file")
    p.add_argument("--triples", type=Path, required=True)
    p.add_argument("--questions", type=Path, required=True)
    p.add_argument("--codebook", type=Path, help="pre-built codebook (default: build in-memory)")
    p.add_argument("--out", type=Path, required=True)
    _add_retrieval_flags(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("answer", help="retrieval + one-shot adjudication")
    p.add_argument("--triples", type=Path, required=True)
    p.add_argument("--questions", type=Path, required=True)
    p.add_argument("--codebook", type=Path)
    p.add_argument("--out", type=Path, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--llm-endpoint", help="HTTP endpoint URL")
    group.add_argument("--mock-llm", action="store_true", help="deterministic offline client")
    p.add_argument("--timeout", type=float, default=30.0, help="request timeout (s)")
    p.add_argument("--retries", type=int, default=0, help="transport retries")
    p.add_argument("--token-env", default="VSAPATH_LLM_TOKEN", help="auth token variable name")
    _add_retrieval_flags(p)
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("synth", help="generate a planted benchmark")
    p.add_argument("--entities", type=int, required=True)
    p.add_argument("--relations", type=int, required=True)
    p.add_argument("--n-triples", dest="n_triples", type=int, required=True)
    p.add_argument("--n-questions", dest="n_questions", type=int, required=True)
    p.add_argument("--max-gold-length", dest="max_gold_length", type=int, default=3)
    p.add_argument("--out-triples", type=Path, required=True)
    p.add_argument("--out-questions", type=Path, required=True)
    _add_retrieval_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="run the statistical validation suite")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--experiments", help="comma list: tail,order,separation,capacity,scaling")
    p.add_argument("--epsilon", type=float, default=0.1, help="tail tolerance in (0, 1)")
    p.add_argument("--tail-trials", type=int, default=100000)
    p.add_argument("--order-trials", type=int, default=500)
    p.add_argument("--separation-trials", type=int, default=500)
    p.add_argument("--capacity-trials", type=int, default=200)
    _add_retrieval_flags(p)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        log.error("missing file: %s", exc.filename or exc)
        return 2
    except FormatError as exc:
        log.error("format error: %s", exc)
        return 2
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return 2
    except TransportError as exc:
        log.error("transport error: %s", exc)
        return 3
    except (ConfigError, VsapathError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
