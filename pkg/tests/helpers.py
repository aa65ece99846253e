"""Fixture builders shared by the test modules."""

from __future__ import annotations

import csv
import random
from datetime import datetime, timedelta
from decimal import Decimal

from amlreason.graph_store import GraphBuilder, Money, format_timestamp

IBM_HEADER = ["Timestamp", "From Bank", "Account", "To Bank", "Account", "Amount Received",
              "Receiving Currency", "Amount Paid", "Payment Currency", "Payment Format",
              "Is Laundering"]

# The worked subgraph around acct_80FF89190 -> acct_810147BB0.
WORKED_ACCOUNTS = {
    "acct_80FF89190": "bank_4049",
    "acct_810147BB0": "bank_217",
    "acct_8101A5D70": "bank_217",
    "acct_81141610D": "bank_217",
    "acct_8117F9960": "bank_4049",
}
WORKED_TRANSFERS = [
    # src, dst, amount, currency, format, timestamp
    ("acct_80FF89190", "acct_810147BB0", "231000.00", "Shekel", "Wire", "2022/09/01 00:01"),
    ("acct_810147BB0", "acct_8101A5D70", "225756.22", "Shekel", "Reinvestment", "2022/09/01 00:02"),
    ("acct_810147BB0", "acct_8101A5D70", "2364.39", "Shekel", "Cheque", "2022/09/01 05:26"),
    ("acct_810147BB0", "acct_8101A5D70", "4091.91", "Shekel", "Cheque", "2022/09/01 07:50"),
    ("acct_81141610D", "acct_80FF89190", "1200.00", "Shekel", "ACH", "2022/08/31 22:15"),
    ("acct_810147BB0", "acct_8117F9960", "950.50", "Shekel", "Cheque", "2022/09/01 09:12"),
]

# The worked serialization as printed, with its elided-edges note dropped.
WORKED_BOX = """**Nodes:**
- acct_810147BB0 (type: Account)
- acct_8101A5D70 (type: Account)
- acct_81141610D (type: Account)
- acct_8117F9960 (type: Account)
- acct_80FF89190 (type: Account)
- bank_217 (type: Bank)
- bank_4049 (type: Bank)

**Edges:**
- acct_810147BB0 belongs_to bank_217

- acct_810147BB0 transfers_to acct_8101A5D70
    amount: 225756.22 Shekel
    via: Reinvestment
    timestamp: 2022/09/01 00:02

- acct_810147BB0 transfers_to acct_8101A5D70
    amount: 2364.39 Shekel
    via: Cheque
    timestamp: 2022/09/01 05:26

- acct_810147BB0 transfers_to acct_8101A5D70
    amount: 4091.91 Shekel
    via: Cheque
    timestamp: 2022/09/01 07:50
"""


def ts(text: str) -> datetime:
    return datetime.strptime(text, "%Y/%m/%d %H:%M")


def worked_graph(distractors: bool = True):
    """Graph holding the worked example; returns (graph, focal edge id)."""
    b = GraphBuilder()
    for acct, bank in WORKED_ACCOUNTS.items():
        b.add_account(acct, bank)
    if distractors:
        # a separate component that k-hop expansion must not reach
        b.add_account("acct_90000000A", "bank_999")
        b.add_account("acct_90000000B", "bank_999")
    focal = None
    for src, dst, amount, cur, fmt, when in WORKED_TRANSFERS:
        eid = b.add_transfer(src, dst, Money(Decimal(amount), cur), ts(when), fmt)
        if focal is None:
            focal = eid
    if distractors:
        b.add_transfer("acct_90000000A", "acct_90000000B", Money(Decimal("10.00"), "Euro"),
                       ts("2022/09/01 00:02"), "ACH")
    return b.build(), focal


def random_graph(rng: random.Random, n_accounts: int, n_edges: int, n_banks: int = 3,
                 span_minutes: int = 60 * 24 * 10, self_loops: bool = True):
    """Random multigraph; returns (graph, [(src, dst, minute)]) with edge i at index i."""
    b = GraphBuilder()
    names = [f"acct_{i:05X}" for i in range(n_accounts)]
    for name in names:
        b.add_account(name, f"bank_{rng.randrange(n_banks)}")
    base = datetime(2022, 9, 1)
    triples = []
    for _ in range(n_edges):
        s = rng.choice(names)
        d = rng.choice(names)
        if not self_loops:
            while d == s:
                d = rng.choice(names)
        minute = rng.randrange(span_minutes)
        b.add_transfer(s, d, Money.from_cents(rng.randrange(1, 10**7), "US Dollar"),
                       base + timedelta(minutes=minute), rng.choice(["ACH", "Wire", "Cheque"]))
        triples.append((s, d, minute))
    return b.build(), triples


def ibm_row(when: str, from_bank: str, src: str, to_bank: str, dst: str, amount: str,
            currency: str = "US Dollar", fmt: str = "ACH", laundering: int = 0) -> list[str]:
    return [when, from_bank, src, to_bank, dst, amount, currency, amount, currency, fmt, str(laundering)]


def write_csv(path, rows, header=IBM_HEADER):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def format_minutes(base: datetime, minute: int) -> str:
    return format_timestamp(base + timedelta(minutes=minute))
