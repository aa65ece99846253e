"""k-hop neighborhood extraction around a focal transfer."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import timedelta

import numpy as np

from .graph_store import AccountNode, BankId, TransactionGraph, TransferEdge
from .kinds import PatternKind


@dataclass(frozen=True)
class ExtractionConfig:
    """Neighborhood size controls.

    ``max_nodes`` and ``max_edges_per_account`` may be None to disable the
    cap.  ``time_window`` is a half-width around the focal timestamp.
    """

    k: int = 2
    max_nodes: int | None = 64
    max_edges_per_account: int | None = 32
    time_window: timedelta | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        for name in ("max_nodes", "max_edges_per_account"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be >= 1 or None, got {value}")

    @classmethod
    def uncapped(cls, k: int = 2, time_window: timedelta | None = None) -> "ExtractionConfig":
        return cls(k=k, max_nodes=None, max_edges_per_account=None, time_window=time_window)


@dataclass(frozen=True)
class Truth:
    is_laundering: bool
    patterns: frozenset[PatternKind] = frozenset()


def transfer_sort_key(t: TransferEdge) -> tuple:
    return (t.timestamp, t.source, t.dest, t.paid.amount, t.paid.currency, t.payment_format,
            t.received.amount, t.received.currency, t.id)


@dataclass(frozen=True)
class Subgraph:
    """Neighborhood of one focal transfer.

    Collections are normalized to canonical order on construction: accounts
    and banks by id, transfers by (timestamp, source, dest, amount, ...).
    An account's bank may be None only for subgraphs parsed from text that
    omits its membership line.
    """

    focal_edge: TransferEdge
    accounts: tuple[AccountNode, ...]
    banks: tuple[BankId, ...]
    transfers: tuple[TransferEdge, ...]
    truth: Truth | None = field(default=None, compare=True)

    def __post_init__(self):
        accounts = tuple(sorted(self.accounts, key=lambda a: a.id))
        banks = tuple(sorted(set(self.banks)))
        transfers = tuple(sorted(self.transfers, key=transfer_sort_key))
        ids = [a.id for a in accounts]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate account in subgraph")
        known = set(ids)
        bank_set = set(banks)
        for a in accounts:
            if a.bank is not None and a.bank not in bank_set:
                raise ValueError(f"bank {a.bank} of {a.id} missing from subgraph banks")
        for t in transfers:
            if t.source not in known or t.dest not in known:
                raise ValueError(f"transfer {t.id} has an endpoint outside the subgraph")
        if self.focal_edge not in transfers:
            raise ValueError("focal edge must be one of the transfers")
        object.__setattr__(self, "accounts", accounts)
        object.__setattr__(self, "banks", banks)
        object.__setattr__(self, "transfers", transfers)

    @property
    def account_ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.accounts)

    def with_truth(self, truth: Truth | None) -> "Subgraph":
        return Subgraph(self.focal_edge, self.accounts, self.banks, self.transfers, truth)


class UnknownEdgeError(KeyError):
    def __str__(self) -> str:
        return f"unknown edge id: {self.args[0]!r}"


class _Neighborhood:
    """Per-extraction cache of the capped, proximity-ordered edge lists."""

    def __init__(self, graph: TransactionGraph, focal_ts: int, cfg: ExtractionConfig):
        self.graph = graph
        self.focal_ts = focal_ts
        self.cap = cfg.max_edges_per_account
        if cfg.time_window is not None:
            half = cfg.time_window // timedelta(minutes=1)
            self.window = (focal_ts - half, focal_ts + half)
        else:
            self.window = None
        self._cache: dict[tuple[int, bool], np.ndarray] = {}

    def edges(self, account: int, outgoing: bool) -> np.ndarray:
        key = (account, outgoing)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        g = self.graph
        eids = g.out_edge_ids(account) if outgoing else g.in_edge_ids(account)
        if self.window is not None and len(eids):
            times = g.ts[eids]
            eids = eids[np.searchsorted(times, self.window[0], side="left"):
                        np.searchsorted(times, self.window[1], side="right")]
        if len(eids) > 1:
            distance = np.abs(g.ts[eids] - self.focal_ts)
            eids = eids[np.lexsort((eids, distance))]
        if self.cap is not None:
            eids = eids[:self.cap]
        self._cache[key] = eids
        return eids


def extract_khop(graph: TransactionGraph, focal: int, config: ExtractionConfig | None = None) -> Subgraph:
    """Extract the k-hop neighborhood of transfer ``focal``.

    Expansion is breadth-first over the undirected view of transfers,
    starting from both focal endpoints.  Bank membership does not count as a
    hop.  Neighbors of an account are visited nearest-in-time to the focal
    transfer first (ties by edge id), outgoing before incoming; once
    ``max_nodes`` accounts are held no new account is admitted.  The result
    holds every transfer between admitted accounts that survives the
    per-account cap and time window, plus the focal transfer itself.
    """
    cfg = config or ExtractionConfig()
    if not 0 <= int(focal) < graph.n_edges:
        raise UnknownEdgeError(focal)
    focal = int(focal)
    src, dst = graph.src, graph.dst
    hood = _Neighborhood(graph, int(graph.ts[focal]), cfg)

    order: list[int] = []
    seen: set[int] = set()
    for a in (int(src[focal]), int(dst[focal])):
        if a not in seen:
            seen.add(a)
            order.append(a)
    limit = cfg.max_nodes
    frontier = list(order)
    for _ in range(cfg.k):
        if limit is not None and len(order) >= limit:
            break
        nxt: list[int] = []
        for a in frontier:
            for outgoing, ends in ((True, dst), (False, src)):
                for e in hood.edges(a, outgoing):
                    b = int(ends[e])
                    if b in seen:
                        continue
                    if limit is not None and len(order) >= limit:
                        break
                    seen.add(b)
                    order.append(b)
                    nxt.append(b)
        frontier = nxt
        if not frontier:
            break

    kept: set[int] = {focal}
    for a in order:
        for outgoing, ends in ((True, dst), (False, src)):
            for e in hood.edges(a, outgoing).tolist():
                if ends[e] in seen:
                    kept.add(e)

    accounts = [graph.account(a) for a in order]
    banks = {acct.bank for acct in accounts}
    transfers = [graph.edge(e) for e in sorted(kept)]
    focal_edge = graph.edge(focal)
    return Subgraph(focal_edge, tuple(accounts), tuple(banks), tuple(transfers),
                    truth=_truth_of(focal_edge))


def _truth_of(edge: TransferEdge) -> Truth | None:
    if edge.is_laundering is None:
        return None
    if edge.pattern_label is not None:
        return Truth(edge.is_laundering, frozenset({edge.pattern_label}))
    if not edge.is_laundering:
        return Truth(False, frozenset({PatternKind.NONE}))
    return Truth(True, frozenset())


def embed(sub: Subgraph) -> tuple[TransactionGraph, int]:
    """Turn a standalone subgraph into a graph; returns it with the focal edge id."""
    from .graph_store import graph_from_parts

    accounts = list(sub.accounts)
    if any(a.bank is None for a in accounts):
        raise ValueError("cannot embed a subgraph with unknown bank memberships")
    graph = graph_from_parts(accounts, sub.transfers)
    return graph, sub.transfers.index(sub.focal_edge)


def subgraph_fingerprint(sub: Subgraph) -> int:
    """Stable 64-bit fingerprint: BLAKE2b (8-byte digest, big-endian) of the canonical text."""
    from .serialize import fingerprint_text, serialize

    return fingerprint_text(serialize(sub))


__all__ = ["ExtractionConfig", "Subgraph", "Truth", "UnknownEdgeError", "embed", "extract_khop", "subgraph_fingerprint",
           "transfer_sort_key"]
