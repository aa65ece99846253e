"""Walkthrough: from a transaction table to the text a model reads.

Builds a tiny graph by hand, cuts out the 2-hop neighbourhood around one
transfer, prints the canonical text form and checks that it parses back.

    python3 notebooks/01_subgraph_walkthrough.py
"""

from datetime import datetime
from decimal import Decimal

from amlreason.extract import ExtractionConfig, extract_khop
from amlreason.graph_store import GraphBuilder, Money, graph_stats
from amlreason.serialize import fingerprint_text, parse_serialized, same_content, serialize
from amlreason.typology import detect

# %% a handful of accounts at two banks
b = GraphBuilder()
for acct, bank in [("A1", "bank_1"), ("A2", "bank_1"), ("A3", "bank_2"), ("A4", "bank_2"), ("A5", "bank_2")]:
    b.add_account(acct, bank)


def usd(x):
    return Money(Decimal(x), "US Dollar")


# A1 pays three accounts within the hour, then one of them moves money on
b.add_transfer("A1", "A2", usd("1200.00"), datetime(2022, 9, 1, 9, 0), "ACH")
b.add_transfer("A1", "A3", usd("1150.50"), datetime(2022, 9, 1, 9, 5), "ACH")
b.add_transfer("A1", "A4", usd("1190.00"), datetime(2022, 9, 1, 9, 20), "Wire")
b.add_transfer("A4", "A5", usd("1100.00"), datetime(2022, 9, 1, 11, 0), "Cash")
graph = b.build()
print(graph_stats(graph))

# %% 2-hop neighbourhood of the first transfer
sub = extract_khop(graph, 0, ExtractionConfig(k=2))
text = serialize(sub, True)
print(text)

# %% the text form is lossless for everything it shows
back = parse_serialized(text)
print("round trip ok:", same_content(sub, back), " fingerprint:", hex(fingerprint_text(text)))

# %% what the rule-based detectors see
for m in detect(sub):
    print(m.kind.value, sorted(m.participants))
