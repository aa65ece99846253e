import json
import random
from datetime import datetime, timedelta
from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from amlreason.extract import Subgraph, extract_khop
from amlreason.graph_store import AccountNode, Money, TransferEdge
from amlreason.kinds import LAUNDERING_KINDS, PatternKind
from amlreason.serialize import (SerializationError, parse_serialized, same_content, serialize,
                                 subgraph_from_dict, subgraph_to_dict)
from amlreason.typology import GenConfig, generate, generate_benign

from helpers import WORKED_BOX, worked_graph


def worked_text():
    g, focal = worked_graph()
    return serialize(extract_khop(g, focal))


def test_worked_example_lines():
    text = worked_text()
    assert text.startswith("**Nodes:**\n- acct_80FF89190 (type: Account)\n")
    lines = text.split("\n")
    for line in WORKED_BOX.strip("\n").split("\n"):
        if line:
            assert line in lines, line
    block = ("- acct_810147BB0 transfers_to acct_8101A5D70\n"
             "    amount: 225756.22 Shekel\n"
             "    via: Reinvestment\n"
             "    timestamp: 2022/09/01 00:02\n")
    assert block in text
    assert text.endswith("\n") and "\r" not in text


def test_exact_layout():
    acct = [AccountNode("acct_B", "bank_2"), AccountNode("acct_A", "bank_1")]
    t = TransferEdge(0, "acct_A", "acct_B", Money(Decimal("0"), "Euro"), Money(Decimal("0"), "Euro"),
                     "ACH", datetime(2022, 9, 1, 0, 2))
    sub = Subgraph(t, tuple(acct), ("bank_2", "bank_1"), (t,))
    assert serialize(sub) == (
        "**Nodes:**\n"
        "- acct_A (type: Account)\n"
        "- acct_B (type: Account)\n"
        "- bank_1 (type: Bank)\n"
        "- bank_2 (type: Bank)\n"
        "\n"
        "**Edges:**\n"
        "- acct_A belongs_to bank_1\n"
        "- acct_B belongs_to bank_2\n"
        "- acct_A transfers_to acct_B\n"
        "    amount: 0.00 Euro\n"
        "    via: ACH\n"
        "    timestamp: 2022/09/01 00:02\n"
    )
    assert serialize(sub, True).endswith("\n\n**Focal:** acct_A transfers_to acct_B @ 2022/09/01 00:02\n")


def test_parse_worked_example_box():
    sub = parse_serialized(WORKED_BOX)
    assert len(sub.accounts) == 5 and len(sub.banks) == 2
    memberships = [a for a in sub.accounts if a.bank is not None]
    assert len(memberships) + len(sub.transfers) >= 4
    assert [str(t.paid) for t in sub.transfers] == ["225756.22 Shekel", "2364.39 Shekel", "4091.91 Shekel"]
    assert sub.focal_edge == sub.transfers[0]
    # canonical re-rendering is stable from here on
    once = serialize(sub)
    assert serialize(parse_serialized(once)) == once


def all_kind_samples(n_per_kind=6):
    for i in range(n_per_kind):
        for kind in LAUNDERING_KINDS:
            yield generate(GenConfig(kind, seed=i))
        yield generate_benign(n_accounts=2 + i % 4, n_edges=3 + i, seed=i)


def test_round_trip_generated():
    for sub in all_kind_samples():
        text = serialize(sub, True)
        back = parse_serialized(text)
        assert back == sub.with_truth(None)
        assert serialize(back, True) == text
        plain = serialize(sub)
        assert serialize(parse_serialized(plain)) == plain
        assert same_content(parse_serialized(plain), sub)


def test_focal_defaults_to_first_transfer():
    sub = generate(GenConfig(PatternKind.GATHER_SCATTER, seed=2))
    back = parse_serialized(serialize(sub))
    assert back.focal_edge == back.transfers[0]
    marked = parse_serialized(serialize(sub, True))
    assert (marked.focal_edge.source, marked.focal_edge.dest) == (sub.focal_edge.source, sub.focal_edge.dest)


@pytest.mark.parametrize("text, line, fragment", [
    ("**Nodes:**\n- acct_A (type: Account)\n\n**Edges:**\n- acct_A transfers_to acct_Z\n"
     "    amount: 1.00 Euro\n    via: ACH\n    timestamp: 2022/09/01 00:00\n", 5, "acct_Z"),
    ("**Nodes:**\n- acct_A (type: Account)\n\n**Edges:**\n- acct_A transfers_to acct_A\n"
     "    amount: 1,000.00 Euro\n    via: ACH\n    timestamp: 2022/09/01 00:00\n", 6, "amount"),
    ("**Nodes:**\n- acct_A (type: Account)\n\n**Edges:**\n- acct_A transfers_to acct_A\n"
     "    amount: 1.00 Euro\n    via: ACH\n    timestamp: 2022-09-01 00:00\n", 8, "timestamp"),
    ("**Nodes:**\n- acct_A (type: Account)\n\n**Edges:**\n- acct_A transfers_to acct_A\n"
     "    amount: 1.00 Euro\n    timestamp: 2022/09/01 00:00\n", 8, "via"),
    ("**Nodes:**\n- acct_A (type: Thing)\n", 2, "node"),
    ("Nodes:\n", 1, "Nodes"),
    ("**Nodes:**\n- acct_A (type: Account)\n\n**Edges:**\n- acct_A belongs_to bank_9\n", 5, "bank_9"),
])
def test_parse_errors(text, line, fragment):
    with pytest.raises(SerializationError) as info:
        parse_serialized(text)
    assert info.value.line == line
    assert fragment in str(info.value)


def test_order_stability_and_injectivity():
    sub = generate(GenConfig(PatternKind.BIPARTITE, seed=4))
    rng = random.Random(0)
    for _ in range(5):
        accounts = list(sub.accounts)
        transfers = list(sub.transfers)
        rng.shuffle(accounts)
        rng.shuffle(transfers)
        assert serialize(Subgraph(sub.focal_edge, tuple(accounts), sub.banks[::-1], tuple(transfers))) == serialize(sub)
    t = sub.transfers[-1]
    later = TransferEdge(t.id, t.source, t.dest, t.paid, t.received, t.payment_format, t.timestamp + timedelta(minutes=1))
    other = Subgraph(sub.focal_edge, sub.accounts, sub.banks, sub.transfers[:-1] + (later,))
    assert serialize(other) != serialize(sub)


def test_json_round_trip():
    for sub in all_kind_samples(2):
        data = json.loads(json.dumps(subgraph_to_dict(sub)))
        assert subgraph_from_dict(data) == sub
    g, focal = worked_graph()
    sub = extract_khop(g, focal)
    assert subgraph_from_dict(subgraph_to_dict(sub)) == sub
    with pytest.raises(ValueError):
        subgraph_from_dict({**subgraph_to_dict(sub), "schema": "other/9"})


# --- property-based round trip over arbitrary well-formed subgraphs

_ident = st.text(alphabet="0123456789ABCDEF", min_size=1, max_size=9)
_label = st.from_regex(r"[A-Za-z][A-Za-z ]{0,10}[A-Za-z]", fullmatch=True)


@st.composite
def subgraphs(draw):
    names = draw(st.lists(_ident, min_size=1, max_size=6, unique=True))
    banks = draw(st.lists(_ident, min_size=1, max_size=3, unique=True))
    accounts = tuple(AccountNode(f"acct_{n}", f"bank_{draw(st.sampled_from(banks))}") for n in names)
    n_edges = draw(st.integers(1, 10))
    raw = []
    for _ in range(n_edges):
        money = Money.from_cents(draw(st.integers(0, 10**12)), draw(_label))
        raw.append((f"acct_{draw(st.sampled_from(names))}", f"acct_{draw(st.sampled_from(names))}", money,
                    draw(_label), datetime(2020, 1, 1) + timedelta(minutes=draw(st.integers(0, 10**6)))))
    raw.sort(key=lambda r: (r[4], r[0], r[1], r[2].amount, r[2].currency, r[3]))
    transfers = tuple(TransferEdge(i, s, d, m, m, f, t) for i, (s, d, m, f, t) in enumerate(raw))
    focal = transfers[draw(st.integers(0, n_edges - 1))]
    used = {a.bank for a in accounts}
    return Subgraph(focal, accounts, tuple(used), transfers)


@settings(max_examples=150, deadline=None)
@given(subgraphs())
def test_round_trip_property(sub):
    text = serialize(sub, True)
    back = parse_serialized(text)
    assert serialize(back, True) == text
    assert same_content(back, sub)
    assert back.focal_edge.timestamp == sub.focal_edge.timestamp
