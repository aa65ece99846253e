"""Canonical text rendering of subgraphs, its parser, and the JSON interchange form.

Text grammar (``\\n`` newlines, every line terminated)::

    **Nodes:**
    - <acct_id> (type: Account)        accounts, sorted by id
    - <bank_id> (type: Bank)           banks, sorted by id

    **Edges:**
    - <acct_id> belongs_to <bank_id>   sorted by account id
    - <src> transfers_to <dst>         sorted by (timestamp, src, dst, amount)
        amount: <d.dd> <Currency>
        via: <PaymentFormat>
        timestamp: <YYYY/MM/DD HH:MM>

An optional focal marker follows after a blank line::

    **Focal:** <src> transfers_to <dst> @ <YYYY/MM/DD HH:MM>

Only the paid amount and currency are rendered; parsing sets the received
side equal to it.
"""

from __future__ import annotations

import hashlib
import re
from decimal import Decimal, InvalidOperation
from typing import Any

from .extract import Subgraph, Truth, transfer_sort_key
from .graph_store import (AccountNode, EntityType, Money, TransferEdge, format_timestamp,
                          parse_timestamp)
from .kinds import PatternKind

NODES_HEADER = "**Nodes:**"
EDGES_HEADER = "**Edges:**"
FOCAL_PREFIX = "**Focal:**"
INDENT = "    "

SUBGRAPH_SCHEMA = "amlreason.subgraph/1"


class SerializationError(ValueError):
    """Grammar violation in serialized subgraph text."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _transfer_lines(t: TransferEdge) -> list[str]:
    return [
        f"- {t.source} transfers_to {t.dest}",
        f"{INDENT}amount: {t.paid.amount:.2f} {t.paid.currency}",
        f"{INDENT}via: {t.payment_format}",
        f"{INDENT}timestamp: {format_timestamp(t.timestamp)}",
    ]


def focal_marker(t: TransferEdge) -> str:
    return f"{FOCAL_PREFIX} {t.source} transfers_to {t.dest} @ {format_timestamp(t.timestamp)}"


def serialize(sub: Subgraph, focal_marker_line: bool = False) -> str:
    """Render ``sub`` in the canonical text grammar."""
    accounts = sorted(sub.accounts, key=lambda a: a.id)
    lines = [NODES_HEADER]
    lines += [f"- {a.id} (type: Account)" for a in accounts]
    lines += [f"- {b} (type: Bank)" for b in sorted(sub.banks)]
    lines += ["", EDGES_HEADER]
    lines += [f"- {a.id} belongs_to {a.bank}" for a in accounts if a.bank is not None]
    for t in sorted(sub.transfers, key=transfer_sort_key):
        lines += _transfer_lines(t)
    if focal_marker_line:
        lines += ["", focal_marker(sub.focal_edge)]
    return "\n".join(lines) + "\n"


def fingerprint_text(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


_NODE = re.compile(r"-\s+(\S+)\s+\(type:\s*(Account|Bank)\)")
_MEMBER = re.compile(r"-\s+(\S+)\s+belongs_to\s+(\S+)")
_TRANSFER = re.compile(r"-\s+(\S+)\s+transfers_to\s+(\S+)")
_ATTR = re.compile(r"(amount|via|timestamp):\s*(.*?)\s*")
_FOCAL = re.compile(re.escape(FOCAL_PREFIX) + r"\s+(\S+)\s+transfers_to\s+(\S+)\s+@\s+(.+?)\s*")


def parse_serialized(text: str) -> Subgraph:
    """Parse canonical subgraph text back into a :class:`Subgraph`.

    Transfer ids are assigned in order of appearance.  The focal edge is the
    transfer named by a ``**Focal:**`` line when present, otherwise the first
    transfer.  Blank lines inside the edge section are tolerated, as is any
    indentation of attribute lines.
    """
    lines = text.split("\n")
    accounts: dict[str, int] = {}
    banks: dict[str, int] = {}
    membership: dict[str, str] = {}
    raw_transfers: list[dict[str, Any]] = []
    focal_spec: tuple[str, str, str, int] | None = None
    section = None
    current: dict[str, Any] | None = None

    def close_transfer(line_no: int):
        nonlocal current
        if current is not None:
            missing = {"amount", "via", "timestamp"} - current.keys()
            if missing:
                raise SerializationError(
                    f"transfer declared on line {current['line']} lacks {sorted(missing)}", line_no)
            raw_transfers.append(current)
            current = None

    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if line_no == 1 and stripped != NODES_HEADER:
            raise SerializationError(f"expected {NODES_HEADER!r}", 1)
        if not stripped:
            continue
        if stripped == NODES_HEADER:
            if section is not None:
                raise SerializationError("duplicate nodes header", line_no)
            section = "nodes"
            continue
        if stripped == EDGES_HEADER:
            if section != "nodes":
                raise SerializationError("edges header out of place", line_no)
            section = "edges"
            continue
        if stripped.startswith(FOCAL_PREFIX):
            close_transfer(line_no)
            m = _FOCAL.fullmatch(stripped)
            if not m:
                raise SerializationError("malformed focal marker", line_no)
            focal_spec = (m.group(1), m.group(2), m.group(3), line_no)
            section = "focal"
            continue
        if section == "nodes":
            m = _NODE.fullmatch(stripped)
            if not m:
                raise SerializationError(f"malformed node line {stripped!r}", line_no)
            target = accounts if m.group(2) == "Account" else banks
            if m.group(1) in accounts or m.group(1) in banks:
                raise SerializationError(f"node {m.group(1)} declared twice", line_no)
            target[m.group(1)] = line_no
        elif section == "edges":
            is_attr = line[:1] in (" ", "\t")
            if is_attr:
                if current is None:
                    raise SerializationError("attribute line outside a transfer", line_no)
                m = _ATTR.fullmatch(stripped)
                if not m:
                    raise SerializationError(f"malformed attribute {stripped!r}", line_no)
                key, value = m.groups()
                if key in current:
                    raise SerializationError(f"duplicate {key}", line_no)
                current[key] = (value, line_no)
                continue
            close_transfer(line_no)
            m = _MEMBER.fullmatch(stripped)
            if m:
                acct, bank = m.groups()
                if acct not in accounts:
                    raise SerializationError(f"unknown account {acct}", line_no)
                if bank not in banks:
                    raise SerializationError(f"unknown bank {bank}", line_no)
                if acct in membership and membership[acct] != bank:
                    raise SerializationError(f"{acct} belongs to two banks", line_no)
                membership[acct] = bank
                continue
            m = _TRANSFER.fullmatch(stripped)
            if not m:
                raise SerializationError(f"malformed edge line {stripped!r}", line_no)
            for node in m.groups():
                if node not in accounts:
                    raise SerializationError(f"edge references undeclared node {node}", line_no)
            current = {"source": m.group(1), "dest": m.group(2), "line": line_no}
        else:
            raise SerializationError(f"unexpected content {stripped!r}", line_no)
    close_transfer(len(lines))
    if section not in ("edges", "focal"):
        raise SerializationError("missing edges section")
    if not raw_transfers:
        raise SerializationError("subgraph has no transfers")

    transfers = [_build_transfer(i, raw) for i, raw in enumerate(raw_transfers)]
    focal = transfers[0]
    if focal_spec is not None:
        src, dst, stamp, line_no = focal_spec
        try:
            when = parse_timestamp(stamp)
        except ValueError:
            raise SerializationError(f"bad focal timestamp {stamp!r}", line_no) from None
        hits = [t for t in sorted(transfers, key=transfer_sort_key)
                if t.source == src and t.dest == dst and t.timestamp == when]
        if not hits:
            raise SerializationError("focal marker matches no transfer", line_no)
        focal = hits[0]
    nodes = tuple(AccountNode(a, membership.get(a), EntityType.UNKNOWN) for a in accounts)
    return Subgraph(focal, nodes, tuple(banks), tuple(transfers))


def _build_transfer(eid: int, raw: dict[str, Any]) -> TransferEdge:
    amount_text, line_no = raw["amount"]
    parts = amount_text.split(None, 1)
    if len(parts) != 2:
        raise SerializationError(f"amount needs a value and currency: {amount_text!r}", line_no)
    try:
        money = Money(Decimal(parts[0]), parts[1])
    except (InvalidOperation, ValueError):
        raise SerializationError(f"unparseable amount {amount_text!r}", line_no) from None
    stamp, ts_line = raw["timestamp"]
    try:
        when = parse_timestamp(stamp)
    except ValueError:
        raise SerializationError(f"unparseable timestamp {stamp!r}", ts_line) from None
    via, via_line = raw["via"]
    if not via:
        raise SerializationError("empty payment format", via_line)
    return TransferEdge(eid, raw["source"], raw["dest"], money, money, via, when)


def same_content(a: Subgraph, b: Subgraph) -> bool:
    """True when two subgraphs agree on every attribute the text form carries."""
    def key(s: Subgraph):
        return ([(x.id, x.bank) for x in s.accounts], list(s.banks),
                [(t.source, t.dest, t.paid, t.payment_format, t.timestamp)
                 for t in sorted(s.transfers, key=transfer_sort_key)])
    return key(a) == key(b)


# ---------------------------------------------------------------------------
# JSON interchange

def _money_dict(m: Money) -> dict[str, str]:
    return {"amount": f"{m.amount:.2f}", "currency": m.currency}


def subgraph_to_dict(sub: Subgraph) -> dict[str, Any]:
    return {
        "schema": SUBGRAPH_SCHEMA,
        "focal_edge": sub.focal_edge.id,
        "accounts": [
            {"id": a.id, "bank": a.bank, "entity_type": a.entity_type.value,
             "creation_date": None if a.creation_date is None else format_timestamp(a.creation_date)}
            for a in sub.accounts
        ],
        "banks": list(sub.banks),
        "transfers": [
            {"id": t.id, "source": t.source, "dest": t.dest, "paid": _money_dict(t.paid),
             "received": _money_dict(t.received), "payment_format": t.payment_format,
             "timestamp": format_timestamp(t.timestamp), "is_laundering": t.is_laundering,
             "pattern_label": None if t.pattern_label is None else t.pattern_label.value}
            for t in sub.transfers
        ],
        "truth": None if sub.truth is None else {
            "is_laundering": sub.truth.is_laundering,
            "patterns": sorted(p.value for p in sub.truth.patterns),
        },
    }


def subgraph_from_dict(data: dict[str, Any]) -> Subgraph:
    if data.get("schema") != SUBGRAPH_SCHEMA:
        raise ValueError(f"unsupported subgraph schema {data.get('schema')!r}")
    accounts = tuple(
        AccountNode(a["id"], a["bank"], EntityType(a.get("entity_type", "Unknown")),
                    None if a.get("creation_date") is None else parse_timestamp(a["creation_date"]))
        for a in data["accounts"])
    transfers = tuple(
        TransferEdge(
            id=t["id"], source=t["source"], dest=t["dest"],
            paid=Money(Decimal(t["paid"]["amount"]), t["paid"]["currency"]),
            received=Money(Decimal(t["received"]["amount"]), t["received"]["currency"]),
            payment_format=t["payment_format"], timestamp=parse_timestamp(t["timestamp"]),
            is_laundering=t.get("is_laundering"),
            pattern_label=None if t.get("pattern_label") is None else PatternKind(t["pattern_label"]))
        for t in data["transfers"])
    by_id = {t.id: t for t in transfers}
    if data["focal_edge"] not in by_id:
        raise ValueError(f"focal edge {data['focal_edge']} not among transfers")
    truth = data.get("truth")
    if truth is not None:
        truth = Truth(bool(truth["is_laundering"]), frozenset(PatternKind(p) for p in truth["patterns"]))
    return Subgraph(by_id[data["focal_edge"]], accounts, tuple(data["banks"]), transfers, truth)


__all__ = ["SerializationError", "fingerprint_text", "focal_marker", "parse_serialized",
           "same_content", "serialize", "subgraph_from_dict", "subgraph_to_dict"]
