"""Command-line entry point.

Subcommands: ingest, explain, augment, summarise, evaluate, correlate,
humaneval export|serve|report. Configuration precedence is flags, then
LAYBENCH_* environment variables, then the config file. Exit codes: 0 full
success, 1 partial per-document failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from laybench import __version__
from laybench.analysis import (
    UndefinedCorrelationError,
    correlation_table,
    label_ground_truth,
    write_correlation_csv,
    write_correlation_json,
)
from laybench.corpus import (
    DEFAULT_TOKENIZER,
    CorpusError,
    TokenBudget,
    corpus_stats,
    load_jsonl,
    write_jsonl,
)
from laybench.llmgate import AuthError, Gateway, GatewayError, HttpBackend, MockBackend
from laybench.metrics import (
    ceonp,
    coleman_liau,
    evaluate_summaries,
    llm_rater,
    llm_score,
    rater_metric_id,
    write_metric_jsonl,
)
from laybench.pipeline import (
    BatchConfig,
    load_stage_records,
    load_summaries_jsonl,
    run_batch,
)
from laybench.prompts import prompt_version
from laybench.textseg import load_np_sidecar

logger = logging.getLogger("laybench")


class ConfigError(Exception):
    """Unusable configuration: bad paths, missing credentials, bad flags."""


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def _read_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for line_no, line in enumerate(config_path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_no}: expected key=value")
        key, _, value = stripped.partition("=")
        values[key.strip().lower()] = value.strip()
    return values


class Settings:
    """Flag > environment > config file > default."""

    def __init__(self, args: argparse.Namespace):
        self._args = args
        self._file = _read_config_file(getattr(args, "config", None))

    def get(self, key: str, default=None, cast=str):
        flag = getattr(self._args, key, None)
        if flag is not None:
            return flag
        env = os.environ.get(f"LAYBENCH_{key.upper()}")
        if env is not None:
            return cast(env)
        file_value = self._file.get(key)
        if file_value is not None:
            return cast(file_value)
        return default


def _build_gateway(settings: Settings) -> tuple[Gateway, str]:
    backend_kind = settings.get("backend", "mock")
    backend_id = settings.get("backend_id", "mock")
    seed = settings.get("seed", 0, int)
    cache_dir = settings.get("cache_dir")
    parallel = settings.get("parallel", 4, int)
    if parallel < 1:
        raise ConfigError("parallel must be >= 1")
    if backend_kind == "mock":
        backend = MockBackend(seed=seed)
    elif backend_kind == "http":
        try:
            backend = HttpBackend(
                supports_logprobs=bool(settings.get("supports_logprobs", False)),
                supports_mask_scoring=bool(settings.get("supports_mask_scoring", False)),
            )
        except (AuthError, GatewayError) as exc:
            raise ConfigError(str(exc)) from exc
    else:
        raise ConfigError(f"unknown backend {backend_kind!r}; use mock or http")
    return Gateway(backend, cache_dir=cache_dir, max_parallel=parallel), backend_id


def _budgets(settings: Settings) -> TokenBudget:
    return TokenBudget(
        explanation_budget=settings.get("explanation_budget", 320, int),
        article_budget_sft=settings.get("article_budget_sft", 700, int),
        article_budget_zeroshot=settings.get("article_budget_zeroshot", 1024, int),
        model_context=settings.get("model_context", 1024, int),
    )


def _emit(summary: dict) -> None:
    print(json.dumps(summary, ensure_ascii=False, sort_keys=True))


def _write_manifest(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")


# --- command handlers -------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    corpus = load_jsonl(args.infile, name=args.name, dataset_tag=args.dataset_tag)
    if args.out:
        write_jsonl(corpus, args.out)
    stats = corpus_stats(corpus)
    _emit({"command": "ingest", "documents": stats.documents,
           "mean_abstract_words": stats.mean_abstract_words,
           "mean_lay_summary_words": stats.mean_lay_summary_words,
           "out": args.out})
    return 0


def _run_stage(args: argparse.Namespace, stage: str) -> int:
    settings = Settings(args)
    gateway, backend_id = _build_gateway(settings)
    corpus = load_jsonl(args.corpus)
    out_dir = Path(settings.get("out_dir", "runs"))
    config = BatchConfig(
        gateway=gateway, backend_id=backend_id, out_dir=out_dir,
        budgets=_budgets(settings), tokenizer=DEFAULT_TOKENIZER,
        temperature=settings.get("temperature", 0.0, float),
        seed=settings.get("seed", 0, int),
        parallelism=settings.get("parallel", 4, int),
        system=getattr(args, "system", None),
    )
    explanations = None
    if stage == "augment":
        explain_path = args.explanations or (out_dir / "explain.jsonl")
        if not Path(explain_path).exists():
            raise ConfigError(f"explanations file not found: {explain_path}")
        explanations = load_stage_records(explain_path)
    outcome = run_batch(corpus, stage, config, explanations=explanations)
    _emit({"command": stage, "output": str(outcome.output_path),
           "manifest": str(outcome.manifest_path),
           "processed": outcome.processed, "skipped": outcome.skipped,
           "failures": len(outcome.failures)})
    return 1 if outcome.failures else 0


def cmd_explain(args: argparse.Namespace) -> int:
    return _run_stage(args, "explain")


def cmd_augment(args: argparse.Namespace) -> int:
    return _run_stage(args, "augment")


def cmd_summarise(args: argparse.Namespace) -> int:
    return _run_stage(args, "zeroshot")


def cmd_evaluate(args: argparse.Namespace) -> int:
    settings = Settings(args)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    summaries = load_summaries_jsonl(args.infile)
    corpus = load_jsonl(args.ref)
    gateway = None
    backend_id = None
    if {"ceonp", "rater", "llmscore"} & set(metrics):
        gateway, backend_id = _build_gateway(settings)
    np_spans = load_np_sidecar(args.np_sidecar) if args.np_sidecar else None
    report, errors = evaluate_summaries(
        summaries, corpus, metrics, gateway=gateway, backend_id=backend_id,
        budgets=_budgets(settings), tokenizer=DEFAULT_TOKENIZER,
        np_spans_by_id=np_spans, seed=settings.get("seed", 0, int))
    out = Path(args.out)
    write_metric_jsonl(report, out)
    _write_manifest(out.with_suffix(".manifest.json"), {
        "command": "evaluate", "metrics": metrics,
        "in": Path(args.infile).name, "ref": Path(args.ref).name,
        "backend_id": backend_id,
        "prompt_version": prompt_version(),
        "tokenizer": DEFAULT_TOKENIZER.name,
        "errors": errors,
    })
    _emit({"command": "evaluate", "out": str(out), "records": len(report),
           "errors": len(errors)})
    return 1 if errors else 0


def cmd_correlate(args: argparse.Namespace) -> int:
    settings = Settings(args)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    known = ("cli", "ceonp", "rater", "llmscore")
    for metric in metrics:
        if metric not in known:
            raise ConfigError(f"unknown metric {metric!r}; known: {known}")
    corpus = load_jsonl(args.corpus)
    if args.split:
        corpus = corpus.filter_split(args.split)
    labeled = label_ground_truth(corpus)
    if not labeled.samples:
        raise ConfigError("no documents with lay summaries to correlate")
    gateway = None
    backend_id = None
    if set(metrics) - {"cli"}:
        gateway, backend_id = _build_gateway(settings)
    budgets = _budgets(settings)
    docs = corpus.by_id()
    scores: dict[str, dict[tuple[str, str], float]] = {}
    errors: list[dict] = []
    for metric in metrics:
        by_key: dict[tuple[str, str], float] = {}
        for sample in labeled.samples:
            doc = docs[sample.document_id]
            text = doc.abstract if sample.kind == "abstract" else doc.lay_summary
            try:
                if metric == "cli":
                    value = coleman_liau(text)
                elif metric == "ceonp":
                    value = ceonp(text, gateway, backend_id)
                elif metric == "rater":
                    value = llm_rater(text, gateway, backend_id,
                                      seed=settings.get("seed", 0, int))
                else:
                    value = llm_score(doc.article, text, gateway, backend_id,
                                      budgets=budgets).total
            except Exception as exc:
                errors.append({"id": sample.document_id, "kind": sample.kind,
                               "metric": metric, "error": str(exc)})
                continue
            by_key[sample.key()] = value
        metric_id = {"cli": "CLI", "ceonp": "CEoNP",
                     "rater": rater_metric_id(backend_id or ""),
                     "llmscore": "LLMScore"}[metric]
        scores[metric_id] = by_key
    usable = [s for s in labeled.samples
              if all(s.key() in by_key for by_key in scores.values())]
    rows = correlation_table(usable, scores)
    out_prefix = Path(args.out_prefix)
    write_correlation_csv(rows, out_prefix.with_suffix(".csv"))
    write_correlation_json(rows, out_prefix.with_suffix(".json"), provenance={
        "corpus": corpus.name, "split": args.split or "all",
        "segmenter": "laybench.textseg", "tokenizer": DEFAULT_TOKENIZER.name,
        "backend_id": backend_id, "skipped_documents": labeled.skipped,
        "dropped_samples": len(labeled.samples) - len(usable),
        "prompt_version": prompt_version(),
    })
    _emit({"command": "correlate",
           "out_csv": str(out_prefix.with_suffix(".csv")),
           "out_json": str(out_prefix.with_suffix(".json")),
           "rows": [{"metric": r.metric_id, "spearman": round(r.spearman, 3),
                     "pearson": round(r.pearson, 3), "n": r.n} for r in rows],
           "errors": len(errors)})
    return 1 if errors else 0


def cmd_humaneval_export(args: argparse.Namespace) -> int:
    from laybench.humaneval import sample_items, write_items_jsonl

    corpus = load_jsonl(args.corpus)
    system_summaries: dict[str, dict[str, str]] = {}
    for path in args.summaries:
        for record in load_summaries_jsonl(path):
            system_summaries.setdefault(record["system"], {})[record["id"]] = \
                record["summary"]
    if len(system_summaries) != 3:
        raise ConfigError(
            f"need summaries from exactly 3 machine systems, got "
            f"{sorted(system_summaries)}")
    items = sample_items(corpus, system_summaries, n=args.n, seed=args.seed)
    write_items_jsonl(items, args.out)
    _emit({"command": "humaneval-export", "items": len(items),
           "summaries_under_evaluation": 4 * len(items), "out": args.out})
    return 0


def cmd_humaneval_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from laybench.humaneval import AnnotationStore, load_items_jsonl
    from laybench.service import create_app

    items = load_items_jsonl(args.items)
    store = AnnotationStore(args.store, items)
    assignments = None
    if args.assignments:
        with open(args.assignments, encoding="utf-8") as fh:
            assignments = json.load(fh)
    app = create_app(items, store, static_dir=args.static_dir,
                     assignments=assignments)
    logger.info("serving %d items on %s:%d", len(items), args.host, args.port)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_humaneval_report(args: argparse.Namespace) -> int:
    from laybench.humaneval import (
        AnnotationStore,
        aggregate,
        load_items_jsonl,
        write_aggregate_csv,
        write_aggregate_json,
    )

    items = load_items_jsonl(args.items)
    store = AnnotationStore(args.store, items)
    annotations = store.annotations()
    if not annotations:
        raise ConfigError("no annotations recorded yet")
    report = aggregate(annotations, items)
    out_prefix = Path(args.out_prefix)
    write_aggregate_csv(report, out_prefix.with_suffix(".csv"))
    write_aggregate_json(report, out_prefix.with_suffix(".json"))
    _emit({"command": "humaneval-report", "annotations": report.annotations,
           "systems": list(report.per_system),
           "out_csv": str(out_prefix.with_suffix(".csv")),
           "out_json": str(out_prefix.with_suffix(".json"))})
    return 0


# --- parser -----------------------------------------------------------------


def _add_backend_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=["mock", "http"], default=None,
                        help="LLM backend (default: mock)")
    parser.add_argument("--backend-id", dest="backend_id", default=None,
                        help="model identity passed to the backend")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--cache-dir", dest="cache_dir", default=None,
                        help="response cache directory")
    parser.add_argument("--parallel", type=int, default=None,
                        help="max in-flight backend requests")
    parser.add_argument("--temperature", type=float, default=None)
    parser.add_argument("--config", default=None,
                        help="key=value config file (lowest precedence)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laybench",
        description="Lay summarisation pipeline and layness evaluation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and canonicalize a dataset JSONL")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--name", default=None)
    p.add_argument("--dataset-tag", dest="dataset_tag", default="custom",
                   choices=["PLOS", "eLife", "custom"])
    p.set_defaults(func=cmd_ingest)

    for stage, handler, extra in (
        ("explain", cmd_explain, "generate background explanations"),
        ("augment", cmd_augment, "assemble explanation-first training inputs"),
        ("summarise", cmd_summarise, "zero-shot lay summaries"),
    ):
        p = sub.add_parser(stage, help=extra)
        p.add_argument("--corpus", required=True)
        p.add_argument("--out-dir", dest="out_dir", default=None)
        if stage == "augment":
            p.add_argument("--explanations", default=None,
                           help="explain stage output (default OUT_DIR/explain.jsonl)")
        if stage == "summarise":
            p.add_argument("--system", default=None,
                           help="system label for the summary export")
        _add_backend_options(p)
        p.set_defaults(func=handler)

    p = sub.add_parser("evaluate", help="score summaries with the layness metrics")
    p.add_argument("--metrics", default="cli,rouge",
                   help="comma list of cli,rouge,ceonp,rater,llmscore")
    p.add_argument("--in", dest="infile", required=True,
                   help="summaries JSONL ({id, system, summary})")
    p.add_argument("--ref", required=True, help="reference corpus JSONL")
    p.add_argument("--out", default="metrics.jsonl")
    p.add_argument("--np-sidecar", dest="np_sidecar", default=None,
                   help="pre-extracted noun-phrase spans JSONL")
    _add_backend_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("correlate",
                       help="metric vs ground-truth label correlation table")
    p.add_argument("--metrics", default="cli")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", default=None, choices=["train", "val", "test"])
    p.add_argument("--out-prefix", dest="out_prefix", default="correlation")
    _add_backend_options(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("humaneval", help="human evaluation protocol tools")
    hsub = p.add_subparsers(dest="humaneval_command", required=True)

    pe = hsub.add_parser("export", help="sample blinded items")
    pe.add_argument("--corpus", required=True)
    pe.add_argument("--summaries", nargs="+", required=True,
                    help="summary JSONL files covering 3 machine systems")
    pe.add_argument("--n", type=int, default=50)
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--out", default="items.jsonl")
    pe.set_defaults(func=cmd_humaneval_export)

    ps = hsub.add_parser("serve", help="run the annotation service")
    ps.add_argument("--items", required=True)
    ps.add_argument("--store", required=True)
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--port", type=int, default=8800)
    ps.add_argument("--static-dir", dest="static_dir", default=None,
                    help="built annotation UI to serve at /")
    ps.add_argument("--assignments", default=None,
                    help="JSON mapping assessor id to item ids")
    ps.set_defaults(func=cmd_humaneval_serve)

    pr = hsub.add_parser("report", help="aggregate recorded annotations")
    pr.add_argument("--items", required=True)
    pr.add_argument("--store", required=True)
    pr.add_argument("--out-prefix", dest="out_prefix", default="humaneval")
    pr.set_defaults(func=cmd_humaneval_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return 2
    except (CorpusError, FileNotFoundError) as exc:
        logger.error("%s", exc)
        return 2
    except AuthError as exc:
        logger.error("%s", exc)
        return 2
    except GatewayError as exc:
        logger.error("backend failure: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
