"""Balanced test sets, pipeline runs, and metrics with bootstrap confidence intervals."""

from __future__ import annotations

import json
import logging
import math
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .extract import ExtractionConfig, Subgraph, embed, extract_khop
from .graph_store import TransactionGraph
from .kinds import LAUNDERING_KINDS, PatternKind
from .llm import ChatClient, LlmConfig, LlmError, stub_complete
from .prompt import PromptConfig, build_prompt, default_demos
from .serialize import serialize
from .typology import GenConfig, generate, generate_benign
from .verdict import Label, Verdict, VerdictParseError, parse_verdict

log = logging.getLogger(__name__)

REPORT_SCHEMA = "amlreason.report/1"
METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    case_id: str
    subgraph: Subgraph
    truth_label: bool
    truth_patterns: frozenset[PatternKind] = frozenset()

    def __post_init__(self):
        if not self.truth_label and not self.truth_patterns <= {PatternKind.NONE}:
            raise ValueError("a benign case cannot carry laundering patterns")


@dataclass(frozen=True)
class Outcome:
    case: TestCase
    verdict: Verdict | None
    raw_text: str
    latency: float = 0.0
    error: str | None = None


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f1: float
    #: metrics whose denominator was zero (reported as 0.0)
    undefined: frozenset[str] = frozenset()

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass(frozen=True)
class BootstrapResult:
    point: float
    mean: float
    ci_low: float
    ci_high: float
    half_width: float
    n_resamples: int
    seed: int
    #: resamples on which the metric was defined
    n_defined: int | None = None

    def to_dict(self) -> dict:
        return {k: _clean_float(v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "BootstrapResult":
        return cls(**{k: (math.nan if v is None and k not in ("n_defined",) else v)
                      for k, v in data.items()})


@dataclass(frozen=True)
class PatternScore:
    precision: float | None
    recall: float | None
    mentions: int
    correct: int
    truth_count: int


def _clean_float(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, (np.floating,)):
        return None if np.isnan(v) else float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# test sets

_SYNTH_SHAPES: dict[PatternKind, Callable[[random.Random], dict]] = {
    PatternKind.FAN_OUT: lambda r: {"fan": r.randint(3, 6)},
    PatternKind.FAN_IN: lambda r: {"fan": r.randint(3, 6)},
    PatternKind.GATHER_SCATTER: lambda r: {"fan": r.randint(3, 5)},
    PatternKind.SCATTER_GATHER: lambda r: {"fan": r.randint(3, 5)},
    PatternKind.SIMPLE_CYCLE: lambda r: {"fan": r.randint(3, 6)},
    PatternKind.RANDOM: lambda r: {"fan": r.randint(3, 6)},
    PatternKind.BIPARTITE: lambda r: {"fan": r.randint(3, 4)},
    PatternKind.STACK: lambda r: {"fan": 3, "layers": r.randint(2, 3)},
}


def _wrap(sub: Subgraph, extraction: ExtractionConfig) -> Subgraph:
    graph, focal = embed(sub)
    return extract_khop(graph, focal, extraction).with_truth(sub.truth)


def synthetic_cases(n_pos: int, n_neg: int, extraction: ExtractionConfig | None = None,
                    seed: int = 0) -> list[TestCase]:
    """Generated positives (kinds round-robin) and benign negatives, shuffled per seed."""
    extraction = extraction or ExtractionConfig()
    rng = random.Random(f"balanced:{seed}")
    cases = []
    for i in range(n_pos):
        kind = LAUNDERING_KINDS[i % len(LAUNDERING_KINDS)]
        gen = GenConfig(kind, seed=rng.getrandbits(32), **_SYNTH_SHAPES[kind](rng))
        sub = _wrap(generate(gen), extraction)
        cases.append(TestCase(f"pos-{i:05d}", sub, True, frozenset({kind})))
    for i in range(n_neg):
        sub = generate_benign(n_accounts=rng.randint(2, 6), n_edges=rng.randint(3, 12),
                              seed=rng.getrandbits(32))
        cases.append(TestCase(f"neg-{i:05d}", _wrap(sub, extraction), False,
                              frozenset({PatternKind.NONE})))
    rng.shuffle(cases)
    return cases


def dataset_cases(graph: TransactionGraph, n_pos: int, n_neg: int,
                  extraction: ExtractionConfig | None = None, seed: int = 0) -> list[TestCase]:
    """Uniformly sample labeled focal edges without replacement and extract around them."""
    extraction = extraction or ExtractionConfig()
    flags = np.asarray(graph.laundering)
    positives = np.flatnonzero(flags == 1).tolist()
    negatives = np.flatnonzero(flags == 0).tolist()
    if len(positives) < n_pos or len(negatives) < n_neg:
        raise InsufficientDataError(
            f"need {n_pos} positive and {n_neg} negative labeled edges, graph has "
            f"{len(positives)} and {len(negatives)}")
    rng = random.Random(f"dataset:{seed}")
    picks = [(e, True) for e in sorted(rng.sample(positives, n_pos))]
    picks += [(e, False) for e in sorted(rng.sample(negatives, n_neg))]
    cases = []
    for eid, label in picks:
        sub = extract_khop(graph, eid, extraction)
        patterns = sub.truth.patterns if sub.truth is not None else frozenset()
        cases.append(TestCase(f"edge-{eid:09d}", sub, label, patterns))
    rng.shuffle(cases)
    return cases


def build_balanced_set(source: TransactionGraph | str, n_pos: int, n_neg: int,
                       extraction: ExtractionConfig | None = None, seed: int = 0) -> list[TestCase]:
    """``source`` is a labeled graph or the string ``"synthetic"``."""
    if isinstance(source, str):
        if source != "synthetic":
            raise ValueError(f"unknown source {source!r}")
        return synthetic_cases(n_pos, n_neg, extraction, seed)
    return dataset_cases(source, n_pos, n_neg, extraction, seed)


# ---------------------------------------------------------------------------
# metrics

def confusion(outcomes: Iterable[Outcome]) -> ConfusionCounts:
    """Tally parsed outcomes; outcomes without a verdict are skipped."""
    tp = fp = fn = tn = 0
    for o in outcomes:
        if o.verdict is None:
            continue
        said = o.verdict.label is Label.SUSPICIOUS
        if o.case.truth_label:
            tp, fn = tp + said, fn + (not said)
        else:
            fp, tn = fp + said, tn + (not said)
    return ConfusionCounts(tp, fp, fn, tn)


def metrics(c: ConfusionCounts) -> MetricSet:
    if c.total == 0:
        raise ValueError("no outcomes to score")
    undefined = set()

    def ratio(num, den, name):
        if den == 0:
            undefined.add(name)
            return 0.0
        return num / den

    precision = ratio(c.tp, c.tp + c.fp, "precision")
    recall = ratio(c.tp, c.tp + c.fn, "recall")
    f1 = ratio(2 * precision * recall, precision + recall, "f1")
    return MetricSet((c.tp + c.tn) / c.total, precision, recall, f1, frozenset(undefined))


def _vector_metrics(tp, fp, fn, tn) -> dict[str, np.ndarray]:
    """Same rules as :func:`metrics`, over arrays of counts."""
    tp, fp, fn, tn = (np.asarray(x, dtype=float) for x in (tp, fp, fn, tn))
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        recall = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        f1 = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
    return {"accuracy": (tp + tn) / (tp + fp + fn + tn), "precision": precision,
            "recall": recall, "f1": f1}


def resample_indices(n: int, n_resamples: int, seed: int) -> np.ndarray:
    """``(n_resamples, n)`` row indices drawn with replacement."""
    return np.random.default_rng(seed).integers(0, n, size=(n_resamples, n))


def _summarize(point: float, values: np.ndarray, n_resamples: int, seed: int) -> BootstrapResult:
    defined = values[~np.isnan(values)]
    if len(defined) == 0:
        nan = math.nan
        return BootstrapResult(point, nan, nan, nan, nan, n_resamples, seed, 0)
    low, high = np.percentile(defined, [2.5, 97.5])
    return BootstrapResult(float(point), float(defined.mean()), float(low), float(high),
                           float(high - low) / 2, n_resamples, seed, int(len(defined)))


def bootstrap(outcomes: Sequence, metric_fn: Callable[[Sequence], float],
              n_resamples: int = 1000, seed: int = 0) -> BootstrapResult:
    """Percentile bootstrap of ``metric_fn`` over ``outcomes``.

    Each resample draws ``len(outcomes)`` items with replacement.  Resamples
    where ``metric_fn`` returns NaN or None are left out of the summary.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("bootstrap needs at least one outcome")
    idx = resample_indices(len(outcomes), n_resamples, seed)
    values = np.empty(n_resamples)
    for r, row in enumerate(idx):
        v = metric_fn([outcomes[i] for i in row])
        values[r] = math.nan if v is None else v
    point = metric_fn(outcomes)
    return _summarize(math.nan if point is None else point, values, n_resamples, seed)


def classification_bootstrap(truth: np.ndarray, predicted: np.ndarray, n_resamples: int = 1000,
                             seed: int = 0) -> dict[str, BootstrapResult]:
    """Vectorized bootstrap of all four classification metrics on shared resamples."""
    truth = np.asarray(truth, dtype=bool)
    predicted = np.asarray(predicted, dtype=bool)
    idx = resample_indices(len(truth), n_resamples, seed)
    t, p = truth[idx], predicted[idx]
    per = _vector_metrics((t & p).sum(1), (~t & p).sum(1), (t & ~p).sum(1), (~t & ~p).sum(1))
    full = metrics(ConfusionCounts(int((truth & predicted).sum()), int((~truth & predicted).sum()),
                                   int((truth & ~predicted).sum()), int((~truth & ~predicted).sum())))
    return {name: _summarize(getattr(full, name), per[name], n_resamples, seed)
            for name in METRIC_NAMES}


def _pattern_matrices(outcomes: Sequence[Outcome]):
    kinds = LAUNDERING_KINDS
    mention = np.zeros((len(outcomes), len(kinds)), dtype=bool)
    truth = np.zeros_like(mention)
    for i, o in enumerate(outcomes):
        observed = set(o.verdict.observed_patterns) if o.verdict is not None else set()
        for j, k in enumerate(kinds):
            mention[i, j] = k in observed
            truth[i, j] = k in o.case.truth_patterns
    return mention, truth


def pattern_metrics(outcomes: Iterable[Outcome]) -> dict[PatternKind, PatternScore]:
    """Per-kind precision and recall of the patterns named in verdicts.

    A mention of kind p is correct when p is among the case's ground-truth
    patterns.  Undefined ratios (no mentions / no truth occurrences) are None.
    Outcomes without a verdict are skipped.
    """
    parsed = [o for o in outcomes if o.verdict is not None]
    mention, truth = _pattern_matrices(parsed)
    scores = {}
    for j, kind in enumerate(LAUNDERING_KINDS):
        m = int(mention[:, j].sum())
        t = int(truth[:, j].sum())
        c = int((mention[:, j] & truth[:, j]).sum())
        scores[kind] = PatternScore(c / m if m else None, c / t if t else None, m, c, t)
    return scores


def hallucination_tally(outcomes: Iterable[Outcome]) -> dict[str, int]:
    """Pattern mentions with no ground-truth support, including unrecognized names."""
    false_mentions = unrecognized = 0
    for o in outcomes:
        if o.verdict is None:
            continue
        false_mentions += sum(1 for p in o.verdict.observed_patterns if p not in o.case.truth_patterns)
        unrecognized += len(o.verdict.unrecognized_patterns)
    return {"false_mentions": false_mentions, "unrecognized_mentions": unrecognized,
            "total": false_mentions + unrecognized}


def pattern_bootstrap(outcomes: Sequence[Outcome], n_resamples: int = 1000,
                      seed: int = 0) -> dict[PatternKind, dict[str, BootstrapResult]]:
    """Case-level bootstrap of per-kind precision and recall."""
    mention, truth = _pattern_matrices(outcomes)
    correct = mention & truth
    idx = resample_indices(len(outcomes), n_resamples, seed)
    m_counts = mention[idx].sum(1)
    t_counts = truth[idx].sum(1)
    c_counts = correct[idx].sum(1)
    point = pattern_metrics(outcomes)
    out = {}
    with np.errstate(divide="ignore", invalid="ignore"):
        prec = np.where(m_counts > 0, c_counts / np.maximum(m_counts, 1), np.nan)
        rec = np.where(t_counts > 0, c_counts / np.maximum(t_counts, 1), np.nan)
    for j, kind in enumerate(LAUNDERING_KINDS):
        score = point[kind]
        out[kind] = {
            "precision": _summarize(math.nan if score.precision is None else score.precision,
                                    prec[:, j], n_resamples, seed),
            "recall": _summarize(math.nan if score.recall is None else score.recall,
                                 rec[:, j], n_resamples, seed),
        }
    return out


# ---------------------------------------------------------------------------
# end-to-end runs

@dataclass
class EvalReport:
    n_cases: int
    error_count: int
    confusion: ConfusionCounts
    point: MetricSet | None
    classification: dict[str, BootstrapResult] | None
    per_pattern: dict[PatternKind, dict] | None
    hallucinations: dict[str, int]
    config: dict
    flags: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self, include_metadata: bool = True) -> dict:
        data = {
            "schema": REPORT_SCHEMA,
            "n_cases": self.n_cases,
            "error_count": self.error_count,
            "confusion": self.confusion.__dict__,
            "point": None if self.point is None else {
                **self.point.as_dict(), "undefined": sorted(self.point.undefined)},
            "classification": None if self.classification is None else {
                name: r.to_dict() for name, r in self.classification.items()},
            "per_pattern": None if self.per_pattern is None else {
                kind.value: {
                    "precision": entry["precision"].to_dict(),
                    "recall": entry["recall"].to_dict(),
                    "mentions": entry["mentions"], "correct": entry["correct"],
                    "truth_count": entry["truth_count"],
                } for kind, entry in self.per_pattern.items()},
            "hallucinations": self.hallucinations,
            "flags": list(self.flags),
            "config": self.config,
        }
        if include_metadata:
            data["metadata"] = self.metadata
        return data

    def to_json(self, include_metadata: bool = True) -> str:
        return json.dumps(self.to_dict(include_metadata), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        if data.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        point = data.get("point")
        if point is not None:
            point = MetricSet(point["accuracy"], point["precision"], point["recall"], point["f1"],
                              frozenset(point.get("undefined", ())))
        classification = data.get("classification")
        if classification is not None:
            classification = {k: BootstrapResult.from_dict(v) for k, v in classification.items()}
        per_pattern = data.get("per_pattern")
        if per_pattern is not None:
            per_pattern = {PatternKind(k): {
                "precision": BootstrapResult.from_dict(v["precision"]),
                "recall": BootstrapResult.from_dict(v["recall"]),
                "mentions": v["mentions"], "correct": v["correct"], "truth_count": v["truth_count"],
            } for k, v in per_pattern.items()}
        return cls(data["n_cases"], data["error_count"], ConfusionCounts(**data["confusion"]), point,
                   classification, per_pattern, data.get("hallucinations", {}), data.get("config", {}),
                   data.get("flags", []), data.get("metadata", {}))


def _read_log(path: Path) -> dict[str, dict]:
    records = {}
    if path.exists():
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    # a torn final line from an interrupted run
                    log.warning("skipping unreadable outcome record in %s", path)
                    continue
                records[rec["case_id"]] = rec
    return records


def _outcome_from_record(case: TestCase, rec: dict) -> Outcome:
    verdict = None
    error = rec.get("error")
    if error is None:
        try:
            verdict = parse_verdict(rec["raw_text"])
        except VerdictParseError as exc:
            error = f"parse: {exc}"
    return Outcome(case, verdict, rec.get("raw_text", ""), rec.get("latency", 0.0), error)


def run_eval(cases: Sequence[TestCase], llm: LlmConfig | None = None,
             prompt: PromptConfig | None = None, parallelism: int = 1,
             log_path: str | Path | None = None, n_resamples: int = 1000, seed: int = 0,
             client: ChatClient | None = None, extra_config: dict | None = None) -> EvalReport:
    """Prompt every case, parse verdicts, and score.

    ``llm=None`` (and no ``client``) runs offline through the detector stub.
    When ``log_path`` is given, each outcome is appended to it as one JSON
    line as soon as it completes, and cases already present in the log are
    not re-run.
    """
    if not cases:
        raise ValueError("run_eval needs at least one case")
    ids = [c.case_id for c in cases]
    if len(set(ids)) != len(ids):
        raise ValueError("case ids must be unique")
    prompt = prompt or PromptConfig()
    offline = llm is None and client is None
    started = datetime.now(timezone.utc)
    t0 = time.monotonic()

    suspicious, benign = default_demos(prompt.demo_seed)
    suspicious, benign = suspicious[:prompt.n_suspicious], benign[:prompt.n_benign]

    log_file = Path(log_path) if log_path is not None else None
    done = _read_log(log_file) if log_file is not None else {}
    if log_file is not None and log_file.exists() and log_file.stat().st_size:
        with log_file.open("rb") as fh:
            fh.seek(-1, 2)
            torn = fh.read(1) != b"\n"
        if torn:
            # start fresh records on their own line
            with log_file.open("a", encoding="utf-8") as fh:
                fh.write("\n")
    lock = threading.Lock()
    own_client = None
    if not offline and client is None:
        client = own_client = ChatClient(llm)

    def run_one(case: TestCase) -> Outcome:
        bundle = build_prompt(suspicious, benign, serialize(case.subgraph, prompt.focal_marker), prompt)
        error = None
        raw, latency = "", 0.0
        try:
            completion = stub_complete(bundle) if offline else client.complete(bundle)
            raw, latency = completion.text, completion.latency
        except (LlmError, ValueError) as exc:
            error = f"{type(exc).__name__}: {exc}"
        rec = {"case_id": case.case_id, "truth_label": case.truth_label,
               "truth_patterns": sorted(p.value for p in case.truth_patterns),
               "raw_text": raw, "latency": latency, "error": error}
        outcome = _outcome_from_record(case, rec)
        rec["verdict"] = None if outcome.verdict is None else outcome.verdict.to_dict()
        if log_file is not None:
            with lock, log_file.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
                fh.flush()
        return outcome

    pending = [c for c in cases if c.case_id not in done]
    try:
        if parallelism > 1 and len(pending) > 1:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                fresh = list(pool.map(run_one, pending))
        else:
            fresh = [run_one(c) for c in pending]
    finally:
        if own_client is not None:
            own_client.close()
    by_id = {o.case.case_id: o for o in fresh}
    for case in cases:
        if case.case_id in done:
            by_id[case.case_id] = _outcome_from_record(case, done[case.case_id])
    outcomes = [by_id[i] for i in sorted(by_id)]

    config = {
        "mode": "offline" if offline else "remote",
        "n_resamples": n_resamples,
        "seed": seed,
        "prompt": {"n_suspicious": prompt.n_suspicious, "n_benign": prompt.n_benign,
                   "demo_seed": prompt.demo_seed, "focal_marker": prompt.focal_marker},
        "llm": None if offline else (client.cfg.snapshot()),
        **(extra_config or {}),
    }
    report = score_outcomes(outcomes, n_resamples=n_resamples, seed=seed, config=config)
    report.metadata = {
        "started_at": started.isoformat(timespec="seconds"),
        "finished_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "elapsed_seconds": round(time.monotonic() - t0, 3),
        "total_latency_seconds": round(sum(o.latency for o in outcomes), 3),
        "resumed_cases": len(cases) - len(pending),
    }
    return report


def score_outcomes(outcomes: Sequence[Outcome], n_resamples: int = 1000, seed: int = 0,
                   config: dict | None = None) -> EvalReport:
    outcomes = sorted(outcomes, key=lambda o: o.case.case_id)
    parsed = [o for o in outcomes if o.verdict is not None]
    errors = len(outcomes) - len(parsed)
    flags = []
    if errors:
        flags.append(f"{errors} of {len(outcomes)} cases have no parsed verdict")
    counts = confusion(parsed)
    point = classification = per_pattern = None
    if parsed:
        point = metrics(counts)
        if point.undefined:
            flags.append("undefined metrics reported as 0: " + ", ".join(sorted(point.undefined)))
        truth = np.array([o.case.truth_label for o in parsed])
        predicted = np.array([o.verdict.label is Label.SUSPICIOUS for o in parsed])
        classification = classification_bootstrap(truth, predicted, n_resamples, seed)
        if any(o.case.truth_patterns - {PatternKind.NONE} for o in parsed):
            scores = pattern_metrics(parsed)
            boots = pattern_bootstrap(parsed, n_resamples, seed)
            per_pattern = {k: {**boots[k], "mentions": scores[k].mentions,
                               "correct": scores[k].correct, "truth_count": scores[k].truth_count}
                           for k in LAUNDERING_KINDS}
        else:
            flags.append("no ground-truth pattern labels; per-pattern metrics omitted")
    else:
        flags.append("no parsed verdicts; classification metrics omitted")
    return EvalReport(len(outcomes), errors, counts, point, classification, per_pattern,
                      hallucination_tally(parsed), config or {}, flags)


# ---------------------------------------------------------------------------
# rendering

_TABLE1_LABELS = {"accuracy": "Overall Accuracy", "precision": "Precision", "recall": "Recall",
                  "f1": "F1 Score"}


def _pct(r: BootstrapResult | None) -> str:
    if r is None or r.point is None or (isinstance(r.point, float) and math.isnan(r.point)):
        return "n/a"
    hw = r.half_width
    hw_text = "n/a" if hw is None or math.isnan(hw) else f"{100 * hw:.1f}%"
    return f"{100 * r.point:.1f}% ± {hw_text}"


def render_report(report: EvalReport, fmt: str = "text") -> str:
    """Render the classification and per-pattern tables as text, CSV or JSON."""
    if fmt == "json":
        return report.to_json()
    rows1 = []
    if report.classification is not None:
        rows1 = [(_TABLE1_LABELS[m], _pct(report.classification[m])) for m in METRIC_NAMES]
    rows2 = []
    if report.per_pattern is not None:
        rows2 = [(k.value, _pct(v["precision"]), _pct(v["recall"])) for k, v in report.per_pattern.items()]
    if fmt == "csv":
        lines = ["table,name,metric,point,half_width,ci_low,ci_high"]
        if report.classification is not None:
            for m in METRIC_NAMES:
                r = report.classification[m]
                lines.append(f"classification,{m},{m},{r.point},{r.half_width},{r.ci_low},{r.ci_high}")
        if report.per_pattern is not None:
            for k, v in report.per_pattern.items():
                for m in ("precision", "recall"):
                    r = v[m]
                    vals = [_clean_float(x) for x in (r.point, r.half_width, r.ci_low, r.ci_high)]
                    lines.append(f"pattern,{k.value},{m}," + ",".join("" if x is None else str(x) for x in vals))
        return "\n".join(lines) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    out = [f"cases: {report.n_cases}  errors: {report.error_count}  "
           f"confusion: tp={report.confusion.tp} fp={report.confusion.fp} "
           f"fn={report.confusion.fn} tn={report.confusion.tn}", ""]
    out.append(f"{'Metric':<18}Value (95% CI)")
    out += [f"{name:<18}{value}" for name, value in rows1] or ["(no classification metrics)"]
    out.append("")
    out.append(f"{'Pattern':<16}{'Precision (95% CI)':<22}Recall (95% CI)")
    out += [f"{n:<16}{p:<22}{r}" for n, p, r in rows2] or ["(no per-pattern metrics)"]
    if report.flags:
        out.append("")
        out += [f"note: {f}" for f in report.flags]
    return "\n".join(out) + "\n"


__all__ = ["BootstrapResult", "ConfusionCounts", "EvalReport", "InsufficientDataError",
           "MetricSet", "Outcome", "PatternScore", "TestCase", "bootstrap", "build_balanced_set",
           "classification_bootstrap", "confusion", "dataset_cases", "hallucination_tally",
           "metrics", "pattern_bootstrap", "pattern_metrics", "render_report", "resample_indices",
           "run_eval", "score_outcomes", "synthetic_cases"]
