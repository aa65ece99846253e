"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime error.  Machine output goes
to ``--out`` files or stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import re
import sys
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path

from . import __version__
from .extract import ExtractionConfig, extract_khop
from .graph_store import SCHEMAS, GraphError, attach_pattern_labels, graph_stats, load_cache, load_csv, save_cache
from .kinds import PatternKind, lookup_kind
from .llm import LlmConfig, LlmError
from .prompt import PromptConfig, default_demos, prompt_for
from .serialize import SerializationError, serialize, subgraph_from_dict, subgraph_to_dict
from .typology import DetectorConfig, GenConfig, detect, generate, generate_benign
from .verdict import VerdictParseError, parse_verdict

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("amlreason")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_DURATION = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([mhd]?)\s*$")


def parse_duration(text: str) -> timedelta:
    """``90m``, ``72h``, ``3d``; a bare number means hours."""
    m = _DURATION.match(text)
    if not m:
        raise UsageError(f"bad duration {text!r}; use e.g. 90m, 72h or 3d")
    unit = {"m": "minutes", "h": "hours", "d": "days", "": "hours"}[m.group(2)]
    return timedelta(**{unit: float(m.group(1))})


@dataclass(frozen=True)
class RunConfig:
    """Every knob of one invocation, resolved before the subcommand runs."""

    command: str
    extraction: ExtractionConfig | None = None
    detector: DetectorConfig | None = None
    prompt: PromptConfig | None = None
    llm: LlmConfig | None = None
    eval: dict | None = None

    def snapshot(self) -> dict:
        def plain(obj):
            if obj is None:
                return None
            if isinstance(obj, LlmConfig):
                return obj.snapshot()
            out = {}
            for f in dataclasses.fields(obj):
                if f.name in ("header", "answer_format"):
                    continue
                v = getattr(obj, f.name)
                out[f.name] = v.total_seconds() / 3600 if isinstance(v, timedelta) else v
            return out

        return {"version": __version__, "command": self.command,
                "extraction": plain(self.extraction), "detector": plain(self.detector),
                "prompt": plain(self.prompt), "llm": plain(self.llm), "eval": self.eval}


# ---------------------------------------------------------------------------
# io helpers

def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(path).write_text(text, encoding="utf-8")
        log.info("wrote %s", path)


def _read_subgraph(path: str):
    return subgraph_from_dict(json.loads(_read_text(path)))


def _write_json(path: str | None, data) -> None:
    _write_text(path, json.dumps(data, indent=2, sort_keys=False) + "\n")


def _extraction_from(args) -> ExtractionConfig:
    window = parse_duration(args.window) if getattr(args, "window", None) else None
    if getattr(args, "uncapped", False):
        return ExtractionConfig.uncapped(args.k, window)
    return ExtractionConfig(k=args.k, max_nodes=args.max_nodes,
                            max_edges_per_account=args.max_edges_per_account, time_window=window)


def _detector_from(pairs: list[str]) -> DetectorConfig:
    fields = {f.name: f for f in dataclasses.fields(DetectorConfig)}
    values = {}
    for pair in pairs or ():
        key, sep, raw = pair.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in fields:
            raise UsageError(f"bad detector setting {pair!r}; keys: {', '.join(fields)}")
        raw = raw.strip()
        try:
            if key == "window":
                values[key] = parse_duration(raw)
            elif key in ("conservation_tol", "bipartite_min_density"):
                values[key] = float(raw)
            else:
                values[key] = int(raw)
        except ValueError:
            raise UsageError(f"bad value for {key}: {raw!r}") from None
    return DetectorConfig(**values)


def _add_extraction_flags(p, k_default=2):
    p.add_argument("--k", type=int, default=k_default, help="hop radius (default %(default)s)")
    p.add_argument("--max-nodes", type=int, default=64)
    p.add_argument("--max-edges-per-account", type=int, default=32)
    p.add_argument("--window", help="time half-width around the focal transfer, e.g. 72h")
    p.add_argument("--uncapped", action="store_true", help="disable node and edge caps")


# ---------------------------------------------------------------------------
# subcommands

def cmd_ingest(args, run):
    graph = load_csv(args.input, SCHEMAS[args.schema])
    if args.patterns:
        graph = attach_pattern_labels(graph, args.patterns)
    save_cache(graph, args.out)
    stats = graph_stats(graph)
    log.info("ingested %d accounts, %d banks, %d transfers (%d laundering)",
             stats.n_accounts, stats.n_banks, stats.n_edges, stats.n_laundering)


def cmd_extract(args, run):
    graph = load_cache(args.graph)
    if not 0 <= args.edge < graph.n_edges:
        raise GraphError(f"edge {args.edge} out of range (graph has {graph.n_edges} transfers)")
    sub = extract_khop(graph, args.edge, run.extraction)
    log.info("extracted %d accounts, %d transfers", len(sub.accounts), len(sub.transfers))
    _write_json(args.out, subgraph_to_dict(sub))


def cmd_serialize(args, run):
    _write_text(args.out, serialize(_read_subgraph(args.subgraph), args.focal_marker))


def cmd_parse_verdict(args, run):
    verdict = parse_verdict(_read_text(args.input))
    _write_json(args.out, verdict.to_dict())


def cmd_synth(args, run):
    if args.kind == "benign":
        sub = generate_benign(n_accounts=args.fan, n_edges=args.edges, seed=args.seed)
    else:
        kind = lookup_kind(args.kind)
        if kind is None or kind is PatternKind.NONE:
            raise UsageError(f"unknown kind {args.kind!r}")
        sub = generate(GenConfig(kind, fan=args.fan, layers=args.layers, seed=args.seed))
    _write_json(args.out, subgraph_to_dict(sub))


def cmd_detect(args, run):
    matches = detect(_read_subgraph(args.subgraph), run.detector)
    _write_json(args.out, [{"kind": m.kind.value, "participants": sorted(m.participants),
                            "evidence": sorted(m.evidence), "score": round(m.score, 6)}
                           for m in matches])


def cmd_build_prompt(args, run):
    cfg = run.prompt
    suspicious, benign = default_demos(cfg.demo_seed)
    bundle = prompt_for(_read_subgraph(args.test), cfg,
                        (suspicious[:cfg.n_suspicious], benign[:cfg.n_benign]))
    _write_text(args.out, bundle.text)


def cmd_eval(args, run):
    from .evaluation import build_balanced_set, render_report, run_eval

    if args.source == "dataset":
        if not args.graph:
            raise UsageError("--source dataset needs --graph")
        source = load_cache(args.graph)
        if args.patterns:
            raise UsageError("attach pattern labels at ingest time (ingest --patterns)")
    else:
        source = "synthetic"
    cases = build_balanced_set(source, args.n_pos, args.n_neg, run.extraction, args.seed)
    log.info("built %d cases from %s source", len(cases), args.source)
    report = run_eval(cases, None if args.offline else run.llm, run.prompt,
                      parallelism=args.parallelism, log_path=args.log,
                      n_resamples=args.resamples, seed=args.seed,
                      extra_config={"run": run.snapshot()})
    _write_text(args.out, report.to_json())
    sys.stderr.write(render_report(report, "text"))


def cmd_report(args, run):
    from .evaluation import EvalReport, render_report

    report = EvalReport.from_dict(json.loads(_read_text(args.input)))
    _write_text(args.out, render_report(report, args.format))


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="amlreason", description="Graph-based laundering detection with LLM reasoning.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("ingest", help="load a transaction CSV into a graph cache")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", choices=sorted(SCHEMAS), default="ibm")
    p.add_argument("--patterns", help="IBM-style pattern file for per-transfer typology labels")
    p.add_argument("--out", required=True, help="graph cache path (.npz)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="extract the k-hop subgraph around one transfer")
    p.add_argument("--graph", required=True)
    p.add_argument("--edge", type=int, required=True, help="transfer id (row order of the CSV)")
    _add_extraction_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("serialize", help="render a subgraph JSON file as prompt text")
    p.add_argument("--subgraph", default="-")
    p.add_argument("--focal-marker", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_serialize)

    p = sub.add_parser("parse-verdict", help="parse a model completion into a verdict")
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out")
    p.set_defaults(func=cmd_parse_verdict)

    p = sub.add_parser("synth", help="generate a synthetic laundering or benign subgraph")
    p.add_argument("--kind", required=True, help="typology name or 'benign'")
    p.add_argument("--fan", type=int, default=4, help="branch factor / cycle length / side size / benign accounts")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--edges", type=int, default=6, help="benign transfer count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="run the rule-based typology detectors")
    p.add_argument("--subgraph", default="-")
    p.add_argument("--config", "--set", dest="settings", action="append", metavar="KEY=VALUE",
                   help="detector threshold, repeatable (e.g. min_fan=4, window=48h)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("build-prompt", help="assemble the few-shot prompt for a test subgraph")
    p.add_argument("--test", required=True)
    p.add_argument("--seed", type=int, default=1, help="demonstration seed")
    p.add_argument("--n-suspicious", type=int, default=8)
    p.add_argument("--n-benign", type=int, default=4)
    p.add_argument("--no-focal-marker", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_build_prompt)

    p = sub.add_parser("eval", help="run a balanced evaluation and write a report")
    p.add_argument("--source", choices=("synthetic", "dataset"), default="synthetic")
    p.add_argument("--graph", help="graph cache for --source dataset")
    p.add_argument("--patterns", help=argparse.SUPPRESS)
    p.add_argument("--n-pos", type=int, default=1000)
    p.add_argument("--n-neg", type=int, default=1000)
    _add_extraction_flags(p)
    p.add_argument("--seed", type=int, help="sampling and bootstrap seed (required with --offline)")
    p.add_argument("--offline", action="store_true", help="answer with the rule-based stub")
    p.add_argument("--demo-seed", type=int, default=1)
    p.add_argument("--n-suspicious", type=int, default=8)
    p.add_argument("--n-benign", type=int, default=4)
    p.add_argument("--no-focal-marker", action="store_true")
    p.add_argument("--model")
    p.add_argument("--base-url")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-concurrency", type=int)
    p.add_argument("--max-retries", type=int)
    p.add_argument("--parallelism", type=int, default=1, help="worker threads")
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--log", help="append-only NDJSON outcome log; existing cases are skipped")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render a report as tables")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def resolve(args) -> RunConfig:
    """Merge flags, environment and defaults (flags > env > defaults)."""
    cmd = args.command
    extraction = detector = prompt = llm = evalcfg = None
    if cmd in ("extract", "eval"):
        extraction = _extraction_from(args)
    if cmd == "detect":
        detector = _detector_from(args.settings)
    if cmd == "build-prompt":
        prompt = PromptConfig(n_suspicious=args.n_suspicious, n_benign=args.n_benign,
                              demo_seed=args.seed, focal_marker=not args.no_focal_marker)
    if cmd == "eval":
        if args.offline and args.seed is None:
            raise UsageError("--seed is required with --offline")
        if args.seed is None:
            args.seed = 0
        prompt = PromptConfig(n_suspicious=args.n_suspicious, n_benign=args.n_benign,
                              demo_seed=args.demo_seed, focal_marker=not args.no_focal_marker)
        if not args.offline:
            llm = LlmConfig.from_env(os.environ, model=args.model, base_url=args.base_url,
                                     temperature=args.temperature, max_concurrency=args.max_concurrency,
                                     max_retries=args.max_retries)
            if not llm.api_key:
                log.warning("no %s set; requests go out unauthenticated", "LLM_API_KEY")
        evalcfg = {"source": args.source, "n_pos": args.n_pos, "n_neg": args.n_neg, "seed": args.seed,
                   "offline": args.offline, "resamples": args.resamples, "parallelism": args.parallelism}
    return RunConfig(cmd, extraction, detector, prompt, llm, evalcfg)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = resolve(args)
        log.debug("config %s", json.dumps(run.snapshot(), sort_keys=True))
        args.func(args, run)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"amlreason: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GraphError, SerializationError, VerdictParseError, LlmError, OSError, ValueError,
            KeyError) as exc:
        print(f"amlreason: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
