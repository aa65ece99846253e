"""End-to-end evaluation with the offline stub in place of a model.

The stub reads the test subgraph back out of each prompt and answers with
the rule-based detectors, so the whole pipeline (prompt assembly, answer
parsing, scoring, bootstrap intervals) runs without network access.  To use
a real endpoint, set LLM_API_KEY (and optionally LLM_BASE_URL, LLM_MODEL)
and pass an LlmConfig to run_eval.

    python3 notebooks/03_offline_evaluation.py
"""

import tempfile
from pathlib import Path

from amlreason.evaluation import build_balanced_set, render_report, run_eval
from amlreason.prompt import prompt_for

cases = build_balanced_set("synthetic", n_pos=40, n_neg=40, seed=3)
print(f"{len(cases)} cases, first: {cases[0].case_id} label={cases[0].truth_label}")

# %% the prompt one case produces (tail only)
prompt = prompt_for(cases[0].subgraph)
print("...")
print("\n".join(prompt.text.splitlines()[-12:]))

# %% score everything; the NDJSON log makes reruns resume instead of repeating work
with tempfile.TemporaryDirectory() as tmp:
    log = Path(tmp) / "outcomes.ndjson"
    report = run_eval(cases, log_path=log, n_resamples=500, seed=3)
    again = run_eval(cases, log_path=log, n_resamples=500, seed=3)
    print("resumed cases on rerun:", again.metadata["resumed_cases"])
    print("identical scores:", report.to_json(include_metadata=False) == again.to_json(include_metadata=False))

print(render_report(report, "text"))
