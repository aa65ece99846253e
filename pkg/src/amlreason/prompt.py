"""Few-shot prompt assembly."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .kinds import PatternKind
from .serialize import fingerprint_text, serialize
from .typology import GenConfig, generate, generate_benign

HEADER = (
    "You are an expert financial crime investigator reviewing patterns of account behavior to "
    "identify potential cases of money laundering. The data is represented as a graph. Nodes are "
    "of type Account or Bank. Edges represent relationships of type transfers_to or belongs_to, "
    "and include metadata such as amount, currency, payment method, and timestamp.\n"
    "\n"
    "You will be shown a series of serialized subgraphs followed by a question. Your task is to "
    "determine whether the behavior is suspicious, and to provide a reasoned explanation grounded "
    "in the structure and attributes of the graph."
)
TASK = (
    "Task: Using your knowledge of money laundering patterns and the examples given, predict "
    "whether the financial activity given in the test example is likely part of a laundering "
    "scheme."
)
TEST_HEADER = "Test Example:"
ANSWER_HEADER = "Answer Format:"
ANSWER_FORMAT = (
    "Answer Format:\n"
    "- Conclusion: Suspicious or Not Suspicious\n"
    "- Explanation: (2-3 sentences reasoning)\n"
    "- Observed Pattern: (e.g., gather-scatter)"
)
SUSPICIOUS_HEADER = "Few-shot Examples:"
BENIGN_HEADER = "non-suspicious Examples:"

#: suspicious demonstration order
DEMO_ORDER: tuple[PatternKind, ...] = (
    PatternKind.FAN_OUT, PatternKind.GATHER_SCATTER, PatternKind.FAN_IN,
    PatternKind.SCATTER_GATHER, PatternKind.SIMPLE_CYCLE, PatternKind.RANDOM,
    PatternKind.STACK, PatternKind.BIPARTITE,
)

# small shapes for demonstrations
_DEMO_SHAPES: dict[PatternKind, dict] = {
    PatternKind.FAN_OUT: {"fan": 4},
    PatternKind.FAN_IN: {"fan": 4},
    PatternKind.GATHER_SCATTER: {"fan": 3},
    PatternKind.SCATTER_GATHER: {"fan": 3},
    PatternKind.SIMPLE_CYCLE: {"fan": 4},
    PatternKind.RANDOM: {"fan": 3},
    PatternKind.BIPARTITE: {"fan": 3},
    PatternKind.STACK: {"fan": 3, "layers": 2},
}


@lru_cache(maxsize=None)
def explanation_for(kind: PatternKind) -> str:
    """Canned rationale for ``kind``, read from the package's explanation files."""
    path = resources.files("amlreason") / "data" / "explanations" / f"{kind.name.lower()}.txt"
    return path.read_text(encoding="utf-8").strip()


@dataclass(frozen=True)
class Demonstration:
    text: str
    explanation: str
    kind: PatternKind

    def __post_init__(self):
        if not self.explanation.strip():
            raise ValueError("demonstration explanation must be non-empty")


@dataclass(frozen=True)
class PromptConfig:
    n_suspicious: int = 8
    n_benign: int = 4
    header: str = HEADER
    answer_format: str = ANSWER_FORMAT
    demo_seed: int = 1
    focal_marker: bool = True

    def __post_init__(self):
        if self.n_suspicious < 0 or self.n_benign < 0:
            raise ValueError("demonstration counts must be non-negative")


@dataclass(frozen=True)
class PromptBundle:
    text: str
    demos: tuple[Demonstration, ...]
    test_fingerprint: int


def default_demos(seed: int = 1) -> tuple[list[Demonstration], list[Demonstration]]:
    """Eight suspicious demonstrations (one per typology) and four benign ones."""
    suspicious = []
    for i, kind in enumerate(DEMO_ORDER):
        sub = generate(GenConfig(kind, seed=seed * 1000 + i, **_DEMO_SHAPES[kind]))
        suspicious.append(Demonstration(serialize(sub), explanation_for(kind), kind))
    benign = []
    for i in range(4):
        sub = generate_benign(n_accounts=2 + i % 3, n_edges=3 + i, seed=seed * 1000 + i)
        benign.append(Demonstration(serialize(sub), explanation_for(PatternKind.NONE), PatternKind.NONE))
    return suspicious, benign


def _demo_block(demo: Demonstration) -> str:
    return f"{demo.text}Explanation: {demo.explanation}\n"


def build_prompt(demos, benign_demos, test: str, cfg: PromptConfig | None = None) -> PromptBundle:
    """Assemble the full prompt around serialized ``test`` text.

    Layout: header, suspicious demonstrations, benign demonstrations, task,
    test subgraph, answer format.  Empty demonstration groups are omitted
    along with their heading.
    """
    cfg = cfg or PromptConfig()
    demos = list(demos)
    benign_demos = list(benign_demos)
    if len(demos) != cfg.n_suspicious or len(benign_demos) != cfg.n_benign:
        raise ValueError(f"expected {cfg.n_suspicious} suspicious and {cfg.n_benign} benign "
                         f"demonstrations, got {len(demos)} and {len(benign_demos)}")
    if any(d.kind is PatternKind.NONE for d in demos):
        raise ValueError("suspicious demonstrations must carry a laundering kind")
    if not test.strip():
        raise ValueError("test subgraph text is empty")
    parts = [cfg.header.rstrip("\n") + "\n"]
    if demos:
        parts.append(SUSPICIOUS_HEADER + "\n")
        parts += [_demo_block(d) for d in demos]
    if benign_demos:
        parts.append(BENIGN_HEADER + "\n")
        parts += [_demo_block(d) for d in benign_demos]
    parts.append(f"{TASK}\n{TEST_HEADER}\n\n{test.rstrip(chr(10))}\n")
    parts.append(cfg.answer_format.rstrip("\n") + "\n")
    return PromptBundle("\n".join(parts), tuple(demos + benign_demos), fingerprint_text(test))


def prompt_for(sub, cfg: PromptConfig | None = None, demos=None) -> PromptBundle:
    """Serialize ``sub`` and wrap it with default demonstrations."""
    cfg = cfg or PromptConfig()
    if demos is None:
        suspicious, benign = default_demos(cfg.demo_seed)
        demos = (suspicious[:cfg.n_suspicious], benign[:cfg.n_benign])
    return build_prompt(demos[0], demos[1], serialize(sub, cfg.focal_marker), cfg)


def extract_test_text(prompt_text: str) -> str:
    """Recover the serialized test subgraph from an assembled prompt."""
    start = prompt_text.rfind(f"\n{TEST_HEADER}\n")
    if start < 0:
        raise ValueError("prompt has no test example section")
    body = prompt_text[start + len(TEST_HEADER) + 2:]
    end = body.rfind(f"\n{ANSWER_HEADER}")
    if end < 0:
        raise ValueError("prompt has no answer format section")
    return body[:end].strip("\n") + "\n"


__all__ = ["ANSWER_FORMAT", "DEMO_ORDER", "Demonstration", "HEADER", "PromptBundle", "PromptConfig",
           "build_prompt", "default_demos", "explanation_for", "extract_test_text", "prompt_for"]
