"""Acceptance criteria 1-10, one test each, one PASS/FAIL line each."""

import json
import os
import random
import time
from datetime import timedelta

import numpy as np
import pytest

from amlreason.cli import main
from amlreason.evaluation import Outcome, TestCase, bootstrap, build_balanced_set, classification_bootstrap, metrics, ConfusionCounts, run_eval
from amlreason.extract import ExtractionConfig, extract_khop
from amlreason.graph_store import datetime_to_minutes, load_csv
from amlreason.kinds import LAUNDERING_KINDS, PatternKind as K
from amlreason.llm import LlmConfig
from amlreason.serialize import parse_serialized, serialize
from amlreason.typology import DetectorConfig, GenConfig, detect, generate, generate_benign

import oracles
from acceptance_log import record
from helpers import IBM_HEADER, WORKED_BOX, worked_graph, random_graph
from test_typology import cycle_sequences, make_sub


def test_criterion_01_round_trip():
    t0 = time.perf_counter()
    subs = []
    kinds = list(LAUNDERING_KINDS) + [None]
    for i in range(1000):
        kind = kinds[i % len(kinds)]
        seed = i // len(kinds)
        if kind is None:
            subs.append(generate_benign(n_accounts=2 + seed % 5, n_edges=1 + seed % 12, seed=seed))
        else:
            fan = 3 + seed % 3
            subs.append(generate(GenConfig(kind, fan=fan, layers=2 + seed % 2, seed=seed)))
    failures = 0
    for sub in subs:
        text = serialize(sub, True)
        back = parse_serialized(text)
        if back != sub.with_truth(None) or serialize(back, True) != text:
            failures += 1
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 10
    record(1, ok, f"1000 subgraphs (8 kinds + benign), {failures} mismatches, {elapsed:.2f}s (< 10s)")
    assert ok


def test_criterion_02_format_fidelity():
    g, focal = worked_graph()
    lines = serialize(extract_khop(g, focal)).split("\n")
    wanted = [line for line in WORKED_BOX.split("\n") if line]
    missing = [line for line in wanted if line not in lines]
    block = ["- acct_810147BB0 transfers_to acct_8101A5D70", "    amount: 225756.22 Shekel",
             "    via: Reinvestment", "    timestamp: 2022/09/01 00:02"]
    i = lines.index(block[0]) if block[0] in lines else -1
    contiguous = i >= 0 and lines[i:i + 4] == block
    ok = not missing and contiguous
    record(2, ok, f"{len(wanted) - len(missing)}/{len(wanted)} worked-example lines verbatim, "
                  f"first transfer block contiguous={contiguous}")
    assert ok


def test_criterion_03_extraction_oracle():
    rng = random.Random(2024)
    mismatches = monotone_breaks = 0
    for _ in range(100):
        g, triples = random_graph(rng, rng.randint(5, 150), rng.randint(1, 500))
        pairs = [(s, d) for s, d, _ in triples]
        focal = rng.randrange(len(pairs))
        prev = None
        for k in (1, 2, 3):
            sub = extract_khop(g, focal, ExtractionConfig.uncapped(k))
            nodes = oracles.bfs_accounts(pairs, list(pairs[focal]), k)
            if set(sub.account_ids) != nodes or {t.id for t in sub.transfers} != oracles.induced_edges(pairs, nodes):
                mismatches += 1
            if prev is not None and not (set(prev.account_ids) <= set(sub.account_ids)
                                         and {t.id for t in prev.transfers} <= {t.id for t in sub.transfers}):
                monotone_breaks += 1
            prev = sub
    ok = mismatches == 0 and monotone_breaks == 0
    record(3, ok, f"100 graphs x k in {{1,2,3}}: {mismatches} oracle mismatches, {monotone_breaks} monotonicity breaks")
    assert ok


def test_criterion_04_closure():
    misses = {}
    for kind in LAUNDERING_KINDS:
        if kind is K.RANDOM:
            continue
        misses[kind.value] = sum(kind not in {m.kind for m in detect(generate(GenConfig(kind, seed=s)))}
                                 for s in range(50))
    benign_hits = sum(bool(detect(generate_benign(seed=s))) for s in range(50))
    ok = not any(misses.values()) and benign_hits == 0
    record(4, ok, f"7 kinds x 50 seeds, misses={sum(misses.values())}; benign 50 with matches={benign_hits}")
    assert ok, misses


def test_criterion_05_cycle_equivalence():
    rng = random.Random(55)
    cfg = DetectorConfig()
    bad = 0
    n_cycles = 0
    for _ in range(200):
        names = [f"acct_{i:02d}" for i in range(rng.randint(3, 12))]
        edges = [(rng.choice(names), rng.choice(names), rng.randrange(0, 200))
                 for _ in range(rng.randint(3, 2 * len(names) + 4))]
        sub = make_sub(edges)
        triples = [(t.source, t.dest, datetime_to_minutes(t.timestamp)) for t in sub.transfers]
        expected = oracles.temporal_cycles(triples, cfg.max_cycle_len)
        n_cycles += len(expected)
        if cycle_sequences(sub, cfg) != expected:
            bad += 1
    ok = bad == 0 and n_cycles > 0
    record(5, ok, f"200 graphs <= 12 nodes, {n_cycles} temporal cycles enumerated, {bad} disagreements")
    assert ok


def test_criterion_06_metrics_back_solve():
    m = metrics(ConfusionCounts(tp=677, fp=403, fn=323, tn=597))
    ok = (abs(m.accuracy - 0.637) <= 0.0005 and abs(m.precision - 0.627) <= 0.001
          and abs(m.recall - 0.677) <= 0.0005 and abs(m.f1 - 0.651) <= 0.001)
    record(6, ok, f"accuracy={m.accuracy:.4f} precision={m.precision:.4f} recall={m.recall:.4f} f1={m.f1:.4f}")
    assert ok


def test_criterion_07_bootstrap_calibration():
    rng = np.random.default_rng(637)
    correct = rng.random(2000) < 0.637
    analytic = oracles.binomial_half_width(0.637, 2000)
    t0 = time.perf_counter()
    r = bootstrap(correct, lambda xs: float(np.mean(xs)), n_resamples=1000, seed=7)
    again = bootstrap(correct, lambda xs: float(np.mean(xs)), n_resamples=1000, seed=7)
    elapsed = time.perf_counter() - t0
    fast = classification_bootstrap(correct, np.ones(2000, dtype=bool), 1000, seed=7)["precision"]
    ok = (abs(r.mean - 0.637) <= 0.01 and abs(r.half_width - analytic) <= 0.25 * analytic
          and r == again and elapsed < 5 and abs(fast.mean - r.mean) < 1e-12)
    record(7, ok, f"mean={r.mean:.4f} half_width={r.half_width:.4f} (analytic {analytic:.4f}), "
                  f"deterministic={r == again}, {elapsed:.2f}s for two runs (< 5s)")
    assert ok


def test_criterion_08_offline_end_to_end(tmp_path, capsys):
    out = tmp_path / "report.json"
    t0 = time.perf_counter()
    code = main(["eval", "--source", "synthetic", "--n-pos", "100", "--n-neg", "100", "--offline", "--seed", "0",
                 "--out", str(out)])
    elapsed = time.perf_counter() - t0
    capsys.readouterr()
    report = json.loads(out.read_text())
    # independent tally: detector run straight on each case, no text round trip
    cases = build_balanced_set("synthetic", 100, 100, ExtractionConfig(), seed=0)
    tp = fp = fn = tn = 0
    hits = {k: [] for k in LAUNDERING_KINDS}
    for c in cases:
        found = {m.kind for m in detect(c.subgraph)}
        said = bool(found)
        tp += c.truth_label and said
        fp += (not c.truth_label) and said
        fn += c.truth_label and not said
        tn += (not c.truth_label) and not said
        for k in c.truth_patterns - {K.NONE}:
            hits[k].append(k in found)
    recall = {k.value: sum(v) / len(v) for k, v in hits.items()}
    same_counts = report["confusion"] == {"tp": tp, "fp": fp, "fn": fn, "tn": tn}
    m = metrics(ConfusionCounts(tp, fp, fn, tn))
    same_metrics = all(report["point"][name] == getattr(m, name) for name in ("accuracy", "precision", "recall", "f1"))
    reported = {k: v["recall"]["point"] for k, v in report["per_pattern"].items()}
    same_recall = reported == recall
    full_recall = all(v == 1.0 for k, v in recall.items() if k != K.RANDOM.value)
    ok = (code == 0 and elapsed < 60 and report["error_count"] == 0 and same_counts and same_metrics
          and same_recall and full_recall)
    record(8, ok, f"200 cases in {elapsed:.1f}s (< 60s), errors={report['error_count']}, confusion match={same_counts}, "
                  f"per-pattern recall match={same_recall}, random recall={recall[K.RANDOM.value]:.2f}")
    assert ok


def test_criterion_09_remote_smoke(tmp_path):
    if not os.environ.get("LLM_API_KEY"):
        record(9, None, "no LLM_API_KEY in the environment; remote smoke run not attempted")
        pytest.skip("remote endpoint credentials not provided")
    cfg = LlmConfig.from_env()
    cases = build_balanced_set("synthetic", 5, 5, seed=9)
    report = run_eval(cases, cfg, log_path=tmp_path / "remote.ndjson", n_resamples=200, seed=9)
    data = json.loads(report.to_json())
    parsed = data["n_cases"] - data["error_count"]
    ok = parsed >= 8 and data["n_cases"] == 10
    record(9, ok, f"{parsed}/10 parsed verdicts from {cfg.model} at {cfg.base_url}")
    assert ok


@pytest.fixture(scope="module")
def million_row_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("scale") / "big.csv"
    rng = np.random.default_rng(10)
    n, n_accounts = 1_000_000, 200_000
    src = rng.integers(0, n_accounts, n)
    dst = rng.integers(0, n_accounts, n)
    minutes = np.sort(rng.integers(0, 60 * 24 * 30, n))
    cents = rng.integers(1, 10**8, n)
    bank = np.arange(n_accounts) % 500
    flags = (rng.random(n) < 0.001).astype(int)
    base = np.datetime64("2022-09-01T00:00")
    stamps = np.datetime_as_string(base + minutes.astype("timedelta64[m]"), unit="m")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(IBM_HEADER) + "\n")
        for i in range(n):
            stamp = stamps[i].replace("-", "/").replace("T", " ")
            amount = f"{cents[i] // 100}.{cents[i] % 100:02d}"
            fh.write(f"{stamp},{bank[src[i]]},{src[i]:X},{bank[dst[i]]},{dst[i]:X},{amount},US Dollar,"
                     f"{amount},US Dollar,ACH,{flags[i]}\n")
    return path


def test_criterion_10_ingestion_scale(million_row_csv):
    t0 = time.perf_counter()
    g = load_csv(million_row_csv)
    loaded = time.perf_counter() - t0
    rng = random.Random(10)
    sizes = []
    for _ in range(1000):
        sub = extract_khop(g, rng.randrange(g.n_edges), ExtractionConfig(k=2))
        sizes.append(len(sub.accounts))
    elapsed = time.perf_counter() - t0
    ok = g.n_edges == 1_000_000 and elapsed < 30
    record(10, ok, f"1,000,000 rows loaded in {loaded:.1f}s, 1000 k=2 extractions "
                   f"(mean {np.mean(sizes):.0f} accounts), total {elapsed:.1f}s (< 30s)")
    assert ok
