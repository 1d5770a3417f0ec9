"""Command-line entry point: ``kgforge ontology build|refine``, ``populate``, ``report``, ``validate``, ``run-all``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from .agents import Gateway, load_templates
from .config import ConfigError, PipelineConfig, load_config
from .corpus import IngestError, UnknownCategory, load_corpus
from .metrics import render_report, run_summary
from .ontology import Severity, StructureError, ontology_from_graph, validate_ontology
from .rdf import Graph, TurtleSyntaxError, parse_turtle, serialize_turtle
from .stages import (
    PopulationResult,
    StageError,
    expansion_loop,
    populate_corpus,
    refine_ontology,
    serialize_ontology,
    validate_triples,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STAGE = 2
EXIT_REJECTED = 3

ONTOLOGY_FILE = "ontology.ttl"
REFINED_FILE = "ontology.refined.ttl"
KG_FILE = "kg.ttl"
TRACE_FILE = "trace.json"
REFINEMENT_FILE = "refinement.json"
RESULTS_FILE = "results.json"
REPORT_FILE = "report.json"

log = logging.getLogger("kgforge")


def _err(message: str) -> None:
    print(f"kgforge: {message}", file=sys.stderr)


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, data) -> None:
    _write(path, json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def _read_graph(path: Path) -> Graph:
    return parse_turtle(path.read_text(encoding="utf-8"))


def _read_ontology(path: Path):
    onto, _ = ontology_from_graph(_read_graph(path))
    return onto


def _gateway(cfg: PipelineConfig) -> Gateway:
    return Gateway(
        cfg.make_backend(),
        load_templates(cfg.prompts_dir),
        temperature=cfg.temperature,
        max_output_tokens=cfg.max_output_tokens,
    )


def _latest_run(output_dir: Path) -> Optional[Path]:
    if not output_dir.is_dir():
        return None
    runs = sorted(p for p in output_dir.iterdir() if p.is_dir())
    return runs[-1] if runs else None


def resolve_run_dir(run_dir: Optional[Path], cfg: PipelineConfig, create: bool) -> Path:
    if run_dir is not None:
        if create:
            run_dir.mkdir(parents=True, exist_ok=True)
        elif not run_dir.is_dir():
            raise ConfigError(f"run directory does not exist: {run_dir}")
        return run_dir
    if create:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        path = cfg.output_dir / stamp
        path.mkdir(parents=True, exist_ok=True)
        return path
    latest = _latest_run(cfg.output_dir)
    if latest is None:
        raise ConfigError(f"no run directory found under {cfg.output_dir}; pass --run-dir")
    return latest


# ---------------------------------------------------------------- subcommands


def cmd_ontology_build(cfg: PipelineConfig, run_dir: Path, gw: Optional[Gateway] = None) -> int:
    if cfg.corpus_path is None:
        raise ConfigError("no corpus given (--corpus or corpus_path)")
    corpus = load_corpus(cfg.corpus_path)
    categories = [cfg.category] if cfg.category else corpus.category_names()
    if not categories or not len(corpus):
        _err(f"corpus {cfg.corpus_path} has no products to build an ontology from")
        return EXIT_STAGE
    gw = gw or _gateway(cfg)
    onto = None
    traces = []
    for category in categories:
        onto, trace = expansion_loop(
            corpus, category, cfg.expansion, gw, cfg.base_namespace, cfg.effective_max_attempts, initial=onto
        )
        traces.append(trace.to_dict())
    issues = validate_ontology(onto)
    _write(run_dir / ONTOLOGY_FILE, serialize_ontology(onto))
    _write_json(run_dir / TRACE_FILE, {"traces": traces, "issues": [i.to_dict() for i in issues]})
    print(f"ontology: {len(onto.classes)} classes, {len(onto.properties)} properties -> {run_dir / ONTOLOGY_FILE}")
    return EXIT_OK


def cmd_ontology_refine(cfg: PipelineConfig, run_dir: Path, gw: Optional[Gateway] = None) -> int:
    source = run_dir / ONTOLOGY_FILE
    if not source.is_file():
        raise ConfigError(f"missing {source}; run 'ontology build' first")
    onto = _read_ontology(source)
    refined, report = refine_ontology(
        onto, gw or _gateway(cfg), allow_drops=cfg.allow_drops, max_attempts=cfg.effective_max_attempts, namespace=cfg.base_namespace
    )
    _write_json(run_dir / REFINEMENT_FILE, report.to_dict())
    target = run_dir / REFINED_FILE
    if not report.accepted:
        target.unlink(missing_ok=True)
        if report.error:
            _err(f"refinement failed: {report.error}")
            return EXIT_STAGE
        dropped = ", ".join(i.value for i in report.unmapped_removals)
        _err(f"refinement rejected: {len(report.unmapped_removals)} elements dropped without a mapping ({dropped}); use --allow-drops to accept")
        return EXIT_REJECTED
    _write(target, serialize_ontology(refined))
    summary = report.to_dict()["diff"]["summary"]
    print(f"refined: +{summary['added']} -{summary['removed']} ~{summary['changed']} -> {target}")
    return EXIT_OK


def _stage_ontology_path(run_dir: Path) -> Path:
    refined = run_dir / REFINED_FILE
    return refined if refined.is_file() else run_dir / ONTOLOGY_FILE


def cmd_populate(cfg: PipelineConfig, run_dir: Path, gw: Optional[Gateway] = None) -> int:
    if cfg.corpus_path is None:
        raise ConfigError("no corpus given (--corpus or corpus_path)")
    source = _stage_ontology_path(run_dir)
    if not source.is_file():
        raise ConfigError(f"missing ontology in {run_dir}; run 'ontology build' first")
    corpus = load_corpus(cfg.corpus_path)
    onto = _read_ontology(source)
    kg, results = populate_corpus(corpus, onto, gw or _gateway(cfg), cfg.population())
    metrics = run_summary(results, kg, onto)
    _write(run_dir / KG_FILE, serialize_turtle(kg))
    _write_json(run_dir / RESULTS_FILE, {"ontology": source.name, "results": [r.to_dict() for r in results]})
    _write(run_dir / REPORT_FILE, render_report(metrics, "json"))
    print(
        f"populated: {metrics.products_succeeded}/{metrics.products_total} products, "
        f"{metrics.triples_total} triples -> {run_dir / KG_FILE}"
    )
    if len(corpus) and metrics.products_succeeded == 0:
        _err("no product could be populated")
        return EXIT_STAGE
    return EXIT_OK


def cmd_report(cfg: PipelineConfig, run_dir: Path, fmt: str = "text") -> int:
    results_path = run_dir / RESULTS_FILE
    kg_path = run_dir / KG_FILE
    for path in (results_path, kg_path):
        if not path.is_file():
            raise ConfigError(f"missing artifact {path}")
    data = json.loads(results_path.read_text(encoding="utf-8"))
    onto_path = run_dir / data.get("ontology", ONTOLOGY_FILE)
    if not onto_path.is_file():
        raise ConfigError(f"missing artifact {onto_path}")
    results = [PopulationResult.from_dict(r) for r in data["results"]]
    metrics = run_summary(results, _read_graph(kg_path), _read_ontology(onto_path))
    sys.stdout.write(render_report(metrics, fmt))
    return EXIT_OK


def cmd_validate(path: Path, against: Optional[Path] = None, strict: bool = False) -> int:
    """Check a Turtle file: syntax, ontology issues, and (with ``against``) instance conformance."""
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    try:
        graph = _read_graph(path)
    except TurtleSyntaxError as exc:
        _err(f"{path}: {exc}")
        return EXIT_STAGE
    try:
        onto, issues = ontology_from_graph(graph)
    except StructureError as exc:
        _err(f"{path}: {exc}")
        return EXIT_STAGE
    errors = 0
    for issue in issues:
        errors += issue.severity is Severity.ERROR
        print(f"{issue.severity.value}\t{issue.code.value}\t{issue.subject.value}\t{issue.message}")
    if against is not None:
        schema = _read_ontology(against)
        for ci in validate_triples(sorted(graph, key=lambda t: t.subject.n3()), schema, mode="strict" if strict else "lenient"):
            errors += ci.severity is Severity.ERROR
            print(f"{ci.severity.value}\t{ci.code.value}\t{ci.triple.subject.n3()} {ci.triple.predicate.n3()}\t{ci.message}")
    print(
        f"{path}: {len(graph)} triples, {len(onto.classes)} classes, {len(onto.properties)} properties, {errors} errors",
        file=sys.stderr,
    )
    return EXIT_STAGE if errors else EXIT_OK


def cmd_run_all(cfg: PipelineConfig, run_dir: Path, fmt: str = "text", gw: Optional[Gateway] = None) -> int:
    gw = gw or _gateway(cfg)
    code = cmd_ontology_build(cfg, run_dir, gw)
    if code:
        return code
    refine_code = cmd_ontology_refine(cfg, run_dir, gw)
    if refine_code not in (EXIT_OK, EXIT_REJECTED):
        return refine_code
    code = cmd_populate(cfg, run_dir, gw)
    if code:
        return code
    code = cmd_report(cfg, run_dir, fmt)
    return code or refine_code


# ---------------------------------------------------------------- parsing

_OVERRIDES = [
    # flag, config key, type
    ("--corpus", "corpus_path", Path),
    ("--corpus-path", "corpus_path", Path),
    ("--category", "category", str),
    ("--base-namespace", "base_namespace", str),
    ("--instance-base", "instance_base", str),
    ("--max-attempts", "max_attempts", int),
    ("--conformance-mode", "conformance_mode", str),
    ("--max-inflight", "max_inflight", int),
    ("--output-dir", "output_dir", Path),
    ("--prompts-dir", "prompts_dir", Path),
    ("--temperature", "temperature", float),
    ("--max-output-tokens", "max_output_tokens", int),
    ("--batch-size", "batch_size", int),
    ("--sample-budget", "sample_budget", int),
    ("--plateau-window", "plateau_window", int),
    ("--plateau-threshold", "plateau_threshold", int),
    ("--seed", "seed", int),
    ("--backend", "kind", str),
    ("--fixtures-dir", "fixtures_dir", Path),
    ("--base-url", "base_url", str),
    ("--model", "model", str),
    ("--timeout", "timeout", float),
]
_FLAGS = [
    ("--paper-mode", "paper_mode", "one agent attempt per call, no error-feedback retries"),
    ("--strict", "strict", "drop Error-severity triples from the populated graph"),
    ("--allow-drops", "allow_drops", "accept refinements that drop elements without a mapping"),
]


def _global_options() -> argparse.ArgumentParser:
    # SUPPRESS defaults let the same flag appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", type=Path, help="TOML config file")
    p.add_argument("--run-dir", type=Path, help="run directory (default: newest under output_dir)")
    p.add_argument("--format", choices=("json", "text"), help="report format")
    p.add_argument("-v", "--verbose", action="count")
    for flag, key, typ in _OVERRIDES:
        p.add_argument(flag, dest=key, type=typ, metavar=key.upper())
    for flag, key, help_text in _FLAGS:
        p.add_argument(flag, dest=key, action="store_true", help=help_text)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = argparse.ArgumentParser(prog="kgforge", parents=[common], description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    onto = sub.add_parser("ontology", help="ontology stages")
    onto_sub = onto.add_subparsers(dest="action", required=True)
    onto_sub.add_parser("build", parents=[common], help="bootstrap and expand the ontology")
    onto_sub.add_parser("refine", parents=[common], help="zero-shot refinement of ontology.ttl")
    sub.add_parser("populate", parents=[common], help="populate the knowledge graph")
    sub.add_parser("report", parents=[common], help="recompute run metrics from artifacts")
    val = sub.add_parser("validate", parents=[common], help="validate a Turtle file")
    val.add_argument("file", type=Path)
    val.add_argument("--against", type=Path, help="ontology file to check instance triples against")
    sub.add_parser("run-all", parents=[common], help="build, refine, populate, report")
    return parser


def _config_from_args(ns: argparse.Namespace) -> PipelineConfig:
    opts = vars(ns)
    overrides = {key: opts[key] for _, key, _ in _OVERRIDES if key in opts}
    for _, key, _ in _FLAGS:
        if opts.get(key):
            overrides[key] = True
    if overrides.pop("strict", False):
        overrides["conformance_mode"] = "strict"
    return load_config(opts.get("config"), overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    opts = vars(ns)
    logging.basicConfig(
        level=logging.DEBUG if opts.get("verbose", 0) > 1 else logging.INFO if opts.get("verbose") else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    fmt = opts.get("format", "text")
    try:
        if ns.command == "validate":
            return cmd_validate(ns.file, opts.get("against"), bool(opts.get("strict")))
        cfg = _config_from_args(ns)
        run_dir_arg = opts.get("run_dir")
        if ns.command == "ontology" and ns.action == "build":
            return cmd_ontology_build(cfg, resolve_run_dir(run_dir_arg, cfg, create=True))
        if ns.command == "run-all":
            return cmd_run_all(cfg, resolve_run_dir(run_dir_arg, cfg, create=True), fmt)
        run_dir = resolve_run_dir(run_dir_arg, cfg, create=False)
        if ns.command == "ontology":
            return cmd_ontology_refine(cfg, run_dir)
        if ns.command == "populate":
            return cmd_populate(cfg, run_dir)
        return cmd_report(cfg, run_dir, fmt)
    except (ConfigError, IngestError, OSError, UnknownCategory) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except StageError as exc:
        _err(f"stage error: {exc}")
        return EXIT_STAGE
    except (TurtleSyntaxError, StructureError) as exc:
        _err(f"invalid stage artifact: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
