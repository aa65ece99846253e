"""Parsing of free-text model answers into structured verdicts."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .kinds import PatternKind, fold_name, lookup_kind


class Label(str, enum.Enum):
    SUSPICIOUS = "Suspicious"
    NOT_SUSPICIOUS = "Not Suspicious"


class VerdictParseError(ValueError):
    """The completion has no usable conclusion."""


@dataclass(frozen=True)
class Unrecognized:
    raw: str


@dataclass(frozen=True)
class Verdict:
    label: Label
    explanation: str = ""
    observed_patterns: tuple[PatternKind, ...] = ()
    unrecognized_patterns: tuple[str, ...] = ()

    @property
    def suspicious(self) -> bool:
        return self.label is Label.SUSPICIOUS

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "explanation": self.explanation,
            "observed_patterns": [p.value for p in self.observed_patterns],
            "unrecognized_patterns": list(self.unrecognized_patterns),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Verdict":
        return cls(Label(data["label"]), data.get("explanation", ""),
                   tuple(PatternKind(p) for p in data.get("observed_patterns", ())),
                   tuple(data.get("unrecognized_patterns", ())))


def normalize_pattern_name(raw: str) -> PatternKind | Unrecognized:
    """Map a free-form pattern name to a kind.

    Case, hyphens, spaces and underscores are folded; a small synonym table
    covers "cycle", "stacked" and similar.
    """
    kind = lookup_kind(raw)
    return kind if kind is not None else Unrecognized(raw.strip())


# "- **Conclusion:** x", "Conclusion - x", "**Observed Patterns**: x" ...
_FIELD = re.compile(
    r"^\s*(?:[-*•]\s+)?[*_`#\s]*"
    r"(conclusion|prediction|explanation|observed\s+patterns?|patterns?\s+observed)"
    r"[*_`\s]*[:\-–]\s*[*_`]*\s*(.*)$",
    re.IGNORECASE,
)
_NONE_VALUES = {"none", "n a", "na", "no pattern", "no patterns", "nil", "not applicable", ""}
_SPLIT = re.compile(r"\s*(?:,|;|\band\b|&|\n)\s*", re.IGNORECASE)


def _field_name(token: str) -> str:
    token = token.lower()
    if token in ("conclusion", "prediction"):
        return "conclusion"
    if token == "explanation":
        return "explanation"
    return "patterns"


def _clean(value: str) -> str:
    return value.strip().strip("*_`\"'").strip()


def _label(value: str) -> Label | None:
    folded = re.sub(r"[^a-z]+", " ", value.lower()).strip()
    if folded in ("suspicious",):
        return Label.SUSPICIOUS
    if folded in ("not suspicious", "notsuspicious", "non suspicious"):
        return Label.NOT_SUSPICIOUS
    return None


def split_patterns(value: str) -> tuple[list[PatternKind], list[str]]:
    """Split a pattern list and normalize each entry (dedup, first occurrence wins)."""
    value = re.sub(r"\(.*?\)", "", value)
    kinds: list[PatternKind] = []
    unknown: list[str] = []
    for part in _SPLIT.split(value):
        part = _clean(part).rstrip(".").strip()
        if fold_name(part) in _NONE_VALUES:
            continue
        found = normalize_pattern_name(part)
        if isinstance(found, Unrecognized):
            if found.raw not in unknown:
                unknown.append(found.raw)
        elif found is not PatternKind.NONE and found not in kinds:
            kinds.append(found)
    return kinds, unknown


def parse_verdict(text: str) -> Verdict:
    """Parse a completion in the Conclusion / Explanation / Observed Pattern format.

    ``Prediction:`` is accepted in place of ``Conclusion:``.  Field values may
    continue over following lines until the next field.  Raises
    :class:`VerdictParseError` when no valid conclusion is present.
    """
    fields: dict[str, list[str]] = {}
    current: str | None = None
    for line in text.splitlines():
        m = _FIELD.match(line)
        if m:
            current = _field_name(re.sub(r"\s+", " ", m.group(1)))
            if current in fields:
                # keep the first occurrence of each field
                current = "_ignored"
            fields.setdefault(current, []).append(m.group(2))
        elif current is not None and line.strip():
            fields[current].append(line.strip())
    if "conclusion" not in fields:
        raise VerdictParseError("no Conclusion/Prediction line found")
    raw_label = _clean(fields["conclusion"][0])
    label = _label(raw_label)
    if label is None:
        raise VerdictParseError(f"conclusion {raw_label!r} is neither Suspicious nor Not Suspicious")
    explanation = " ".join(_clean(x) for x in fields.get("explanation", []) if _clean(x))
    kinds, unknown = split_patterns("\n".join(fields.get("patterns", [])))
    return Verdict(label, explanation, tuple(kinds), tuple(unknown))


__all__ = ["Label", "Unrecognized", "Verdict", "VerdictParseError", "normalize_pattern_name",
           "parse_verdict", "split_patterns"]
