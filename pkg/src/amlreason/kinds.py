"""The closed set of laundering typologies and their name normalization."""

from __future__ import annotations

import enum
import re


class PatternKind(str, enum.Enum):
    """Canonical laundering typologies, valued by their display name."""

    FAN_OUT = "fan-out"
    FAN_IN = "fan-in"
    GATHER_SCATTER = "gather-scatter"
    SCATTER_GATHER = "scatter-gather"
    SIMPLE_CYCLE = "simple cycle"
    RANDOM = "random"
    BIPARTITE = "bipartite"
    STACK = "stack"
    NONE = "none"

    def __str__(self) -> str:
        return self.value


#: the eight laundering kinds, in display order
LAUNDERING_KINDS: tuple[PatternKind, ...] = tuple(k for k in PatternKind if k is not PatternKind.NONE)

# keys are folded names: lower case, separators collapsed to one space
_SYNONYMS: dict[str, PatternKind] = {
    "fan out": PatternKind.FAN_OUT,
    "fanout": PatternKind.FAN_OUT,
    "fan in": PatternKind.FAN_IN,
    "fanin": PatternKind.FAN_IN,
    "gather scatter": PatternKind.GATHER_SCATTER,
    "scatter gather": PatternKind.SCATTER_GATHER,
    "simple cycle": PatternKind.SIMPLE_CYCLE,
    "cycle": PatternKind.SIMPLE_CYCLE,
    "random": PatternKind.RANDOM,
    "bipartite": PatternKind.BIPARTITE,
    "stack": PatternKind.STACK,
    "stacked": PatternKind.STACK,
    "layering stack": PatternKind.STACK,
    "none": PatternKind.NONE,
    "n a": PatternKind.NONE,
}

_SEPARATORS = re.compile(r"[\s_\-/]+")


def fold_name(raw: str) -> str:
    return _SEPARATORS.sub(" ", raw.strip().lower()).strip()


def lookup_kind(raw: str) -> PatternKind | None:
    """Return the kind named by ``raw`` or None when the name is not known."""
    return _SYNONYMS.get(fold_name(raw))
