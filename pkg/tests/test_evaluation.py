import json
import math
import random

import httpx
import numpy as np
import pytest

from amlreason.evaluation import (
    ConfusionCounts, EvalReport, InsufficientDataError, Outcome, TestCase, bootstrap, build_balanced_set,
    classification_bootstrap, confusion, hallucination_tally, metrics, pattern_bootstrap, pattern_metrics,
    render_report, run_eval, score_outcomes,
)
from amlreason.extract import ExtractionConfig
from amlreason.graph_store import load_csv
from amlreason.kinds import LAUNDERING_KINDS, PatternKind as K
from amlreason.llm import ChatClient, LlmConfig
from amlreason.typology import GenConfig, generate
from amlreason.verdict import Label, Verdict

import oracles
from helpers import ibm_row, write_csv

SUB = generate(GenConfig(K.FAN_OUT, seed=0))


def case(i, truth, patterns=None):
    pats = frozenset(patterns) if patterns is not None else frozenset({K.FAN_OUT} if truth else {K.NONE})
    return TestCase(f"c{i:04d}", SUB, truth, pats)


def outcome(i, truth, said, patterns=(), unknown=(), truth_patterns=None):
    label = Label.SUSPICIOUS if said else Label.NOT_SUSPICIOUS
    return Outcome(case(i, truth, truth_patterns), Verdict(label, "", tuple(patterns), tuple(unknown)), "")


def test_balanced_synthetic():
    cases = build_balanced_set("synthetic", 8, 4, seed=3)
    assert len(cases) == 12
    pos = sorted((c for c in cases if c.truth_label), key=lambda c: c.case_id)
    assert [next(iter(c.truth_patterns)) for c in pos] == list(LAUNDERING_KINDS)
    assert all(c.truth_patterns == {K.NONE} for c in cases if not c.truth_label)
    again = build_balanced_set("synthetic", 8, 4, seed=3)
    assert [(c.case_id, c.subgraph) for c in cases] == [(c.case_id, c.subgraph) for c in again]
    assert all(not c.truth_label for c in build_balanced_set("synthetic", 0, 5, seed=1))
    with pytest.raises(ValueError):
        build_balanced_set("elsewhere", 1, 1)


def test_balanced_dataset(tmp_path):
    rows = []
    for i in range(10):
        rows.append(ibm_row(f"2022/09/01 0{i}:00", "1", f"P{i}", "2", f"Q{i}", "5.00", laundering=1))
    for i in range(30):
        rows.append(ibm_row(f"2022/09/02 0{i % 10}:{i:02d}", "1", f"N{i}", "2", f"Q{i % 10}", "7.00"))
    g = load_csv(write_csv(tmp_path / "d.csv", rows))
    cases = build_balanced_set(g, 10, 5, ExtractionConfig(k=1), seed=0)
    positives = {c.subgraph.focal_edge.id for c in cases if c.truth_label}
    assert positives == set(range(10))
    assert all(c.subgraph.focal_edge.is_laundering is c.truth_label for c in cases)
    assert len({c.case_id for c in cases}) == 15
    with pytest.raises(InsufficientDataError):
        build_balanced_set(g, 11, 5, seed=0)
    with pytest.raises(InsufficientDataError):
        build_balanced_set(g, 1, 31, seed=0)


def test_test_case_invariant():
    with pytest.raises(ValueError):
        TestCase("x", SUB, False, frozenset({K.FAN_OUT}))


def test_confusion_examples():
    assert confusion([outcome(0, True, True)]) == ConfusionCounts(1, 0, 0, 0)
    four = [outcome(0, True, True), outcome(1, False, True), outcome(2, True, False), outcome(3, False, False)]
    assert confusion(four) == ConfusionCounts(1, 1, 1, 1)
    errored = Outcome(case(9, True), None, "garbage", error="parse")
    assert confusion(four + [errored]).total == 4


def test_metrics_examples():
    m = metrics(ConfusionCounts(677, 403, 323, 597))
    assert abs(m.accuracy - 0.637) <= 0.0005
    assert abs(m.precision - 0.627) <= 0.001
    assert abs(m.recall - 0.677) <= 0.0005
    assert abs(m.f1 - 0.651) <= 0.001
    assert abs(m.f1 - 2 * m.precision * m.recall / (m.precision + m.recall)) < 1e-12
    assert metrics(ConfusionCounts(1, 0, 0, 1)).as_dict() == {"accuracy": 1.0, "precision": 1.0, "recall": 1.0, "f1": 1.0}
    never = metrics(ConfusionCounts(0, 0, 5, 5))
    assert (never.recall, never.precision, never.accuracy) == (0.0, 0.0, 0.5)
    assert "precision" in never.undefined
    with pytest.raises(ValueError):
        metrics(ConfusionCounts())


def accuracy_of(outs):
    return sum(o.case.truth_label == (o.verdict.label is Label.SUSPICIOUS) for o in outs) / len(outs)


def test_bootstrap_zero_variance():
    outs = [outcome(i, True, True) for i in range(50)]
    r = bootstrap(outs, accuracy_of, 200, seed=1)
    assert r.ci_low == r.ci_high == r.point == 1.0 and r.half_width == 0


def test_bootstrap_determinism_and_vector_agreement():
    rng = random.Random(5)
    outs = [outcome(i, rng.random() < 0.5, rng.random() < 0.6) for i in range(300)]
    a = bootstrap(outs, accuracy_of, 500, seed=11)
    assert a == bootstrap(outs, accuracy_of, 500, seed=11)
    assert a != bootstrap(outs, accuracy_of, 500, seed=12)
    truth = np.array([o.case.truth_label for o in outs])
    pred = np.array([o.verdict.label is Label.SUSPICIOUS for o in outs])
    fast = classification_bootstrap(truth, pred, 500, seed=11)["accuracy"]
    assert fast.point == pytest.approx(a.point, abs=1e-12)
    assert fast.mean == pytest.approx(a.mean, abs=1e-12)
    assert (fast.ci_low, fast.ci_high) == pytest.approx((a.ci_low, a.ci_high), abs=1e-12)
    for name, fn in (("precision", lambda o: metrics(confusion(o)).precision),
                     ("recall", lambda o: metrics(confusion(o)).recall),
                     ("f1", lambda o: metrics(confusion(o)).f1)):
        slow = bootstrap(outs, fn, 200, seed=3)
        quick = classification_bootstrap(truth, pred, 200, seed=3)[name]
        assert (quick.mean, quick.ci_low, quick.ci_high) == pytest.approx((slow.mean, slow.ci_low, slow.ci_high), abs=1e-12)


def test_bootstrap_calibration():
    rng = np.random.default_rng(0)
    correct = rng.random(2000) < 0.637
    r = classification_bootstrap(correct, np.ones(2000, dtype=bool), 1000, seed=0)["precision"]
    analytic = oracles.binomial_half_width(0.637, 2000)
    assert abs(r.mean - 0.637) <= 0.01
    assert abs(r.half_width - analytic) <= 0.25 * analytic
    assert r.ci_low <= r.mean <= r.ci_high
    assert abs(r.mean - r.point) <= 0.01


def test_bootstrap_empty():
    with pytest.raises(ValueError):
        bootstrap([], accuracy_of)


def test_pattern_metrics_examples():
    one = pattern_metrics([outcome(0, True, True, [K.FAN_OUT])])
    assert (one[K.FAN_OUT].precision, one[K.FAN_OUT].recall) == (1.0, 1.0)
    two = pattern_metrics([outcome(0, True, True, [K.FAN_OUT, K.SIMPLE_CYCLE])])
    assert (two[K.FAN_OUT].precision, two[K.FAN_OUT].recall) == (1.0, 1.0)
    assert two[K.SIMPLE_CYCLE].precision == 0.0 and two[K.SIMPLE_CYCLE].recall is None
    assert two[K.STACK].precision is None
    tally = hallucination_tally([outcome(0, True, True, [K.FAN_OUT, K.SIMPLE_CYCLE], ["smurfing"])])
    assert tally == {"false_mentions": 1, "unrecognized_mentions": 1, "total": 2}


def test_pattern_bootstrap_flags_undefined():
    outs = [outcome(i, True, True, [K.FAN_OUT]) for i in range(20)]
    boot = pattern_bootstrap(outs, 100, seed=0)
    assert boot[K.FAN_OUT]["recall"].point == 1.0
    assert boot[K.STACK]["precision"].n_defined == 0
    assert math.isnan(boot[K.STACK]["precision"].point)


def tally(report_outcomes):
    tp = sum(o.case.truth_label and o.verdict.suspicious for o in report_outcomes)
    fp = sum(not o.case.truth_label and o.verdict.suspicious for o in report_outcomes)
    fn = sum(o.case.truth_label and not o.verdict.suspicious for o in report_outcomes)
    return tp, fp, fn, len(report_outcomes) - tp - fp - fn


def test_offline_run_matches_oracle(tmp_path):
    from amlreason.llm import stub_complete
    from amlreason.prompt import prompt_for
    from amlreason.verdict import parse_verdict

    cases = build_balanced_set("synthetic", 16, 8, seed=2)
    report = run_eval(cases, seed=2, n_resamples=200)
    assert report.error_count == 0 and report.n_cases == 24
    outs = [Outcome(c, parse_verdict(stub_complete(prompt_for(c.subgraph)).text), "") for c in cases]
    assert (report.confusion.tp, report.confusion.fp, report.confusion.fn, report.confusion.tn) == tally(outs)
    c = report.confusion
    assert c.total + report.error_count == len(cases)
    assert report.point == metrics(c)
    for kind in LAUNDERING_KINDS:
        hits = [kind in o.verdict.observed_patterns for o in outs if kind in o.case.truth_patterns]
        assert report.per_pattern[kind]["recall"].point == sum(hits) / len(hits)


def test_offline_determinism_and_parallelism():
    cases = build_balanced_set("synthetic", 8, 8, seed=4)
    a = run_eval(cases, seed=4, n_resamples=100).to_json(include_metadata=False)
    b = run_eval(list(reversed(cases)), seed=4, n_resamples=100, parallelism=4).to_json(include_metadata=False)
    assert a == b


def test_resume(tmp_path):
    cases = build_balanced_set("synthetic", 16, 8, seed=5)
    full = run_eval(cases, seed=5, n_resamples=100).to_json(include_metadata=False)
    log = tmp_path / "outcomes.ndjson"
    run_eval(cases[:10], seed=5, n_resamples=100, log_path=log)
    with log.open("a") as fh:
        fh.write('{"case_id": "torn')  # interrupted mid-write
    resumed = run_eval(cases, seed=5, n_resamples=100, log_path=log)
    assert resumed.metadata["resumed_cases"] == 10
    assert resumed.to_json(include_metadata=False) == full
    records = [json.loads(line) for line in log.read_text().splitlines() if line.endswith("}")]
    assert len(records) == 24 and {r["case_id"] for r in records} == {c.case_id for c in cases}


def test_dead_endpoint():
    def refuse(request):
        raise httpx.ConnectError("refused")

    cfg = LlmConfig(base_url="http://dead.test/v1", max_retries=0)
    client = ChatClient(cfg, transport=httpx.MockTransport(refuse), sleep=lambda s: None)
    cases = build_balanced_set("synthetic", 3, 3, seed=0)
    report = run_eval(cases, cfg, client=client, n_resamples=50)
    assert report.error_count == 6 and report.confusion.total == 0
    assert report.classification is None and report.flags
    assert "remote" == report.config["mode"]
    json.loads(report.to_json())


def test_report_round_trip_and_render():
    cases = build_balanced_set("synthetic", 8, 4, seed=1)
    report = run_eval(cases, seed=1, n_resamples=100)
    back = EvalReport.from_dict(json.loads(report.to_json()))
    assert back.to_json() == report.to_json()
    text = render_report(report, "text")
    assert "Overall Accuracy" in text and "± " in text and "stack" in text
    csv_text = render_report(report, "csv")
    assert csv_text.splitlines()[0].startswith("table,name,metric")
    assert len(csv_text.splitlines()) == 1 + 4 + 2 * 8
    assert json.loads(render_report(report, "json"))["n_cases"] == 12
    with pytest.raises(ValueError):
        render_report(report, "xml")


def test_unlabeled_patterns_omit_per_pattern():
    outs = [Outcome(TestCase(f"c{i}", SUB, i % 2 == 0, frozenset() if i % 2 == 0 else frozenset({K.NONE})),
                    Verdict(Label.SUSPICIOUS), "") for i in range(6)]
    report = score_outcomes(outs, n_resamples=50)
    assert report.per_pattern is None
    assert any("pattern" in f for f in report.flags)
