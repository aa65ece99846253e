"""Generators and rule-based detectors for the eight laundering typologies.

Detection works on a subgraph's transfers viewed as a timed multigraph.
Self-transfers never count toward any pattern.  Rules, at a glance:

fan-out / fan-in
    one account with ``min_fan`` distinct counterparties (destinations /
    sources) inside a span of ``window``.
scatter-gather
    a source paying ``min_fan`` intermediaries that each later forward to a
    common sink.
gather-scatter
    a middle account whose inflows from ``min_fan`` sources all precede its
    outflows to ``min_fan`` destinations, with the flows balancing to within
    ``conservation_tol``.
simple cycle
    a directed cycle of 3..``max_cycle_len`` accounts whose transfers can be
    ordered strictly forward in time starting from some member.
bipartite
    disjoint sides A, B of at least ``bipartite_min_side`` accounts with A->B
    pair density at least ``bipartite_min_density`` and no transfers inside a
    side.
stack
    two bipartite layers sharing the middle side, where each middle account
    receives before it sends.

``random`` is produced by the generator only; nothing detects it.
"""

from __future__ import annotations

import math
import random as _random
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from decimal import Decimal
from typing import Iterable

from .extract import Subgraph, Truth
from .graph_store import AccountNode, Money, TransferEdge, datetime_to_minutes
from .kinds import LAUNDERING_KINDS, PatternKind

RULESET_VERSION = 1


@dataclass(frozen=True)
class DetectorConfig:
    min_fan: int = 3
    window: timedelta = timedelta(hours=72)
    conservation_tol: float = 0.15
    max_cycle_len: int = 6
    bipartite_min_side: int = 3
    bipartite_min_density: float = 0.6

    def __post_init__(self):
        if self.min_fan < 1 or self.bipartite_min_side < 1:
            raise ValueError("fan and side thresholds must be positive")
        if self.window <= timedelta(0):
            raise ValueError("window must be positive")
        if not 0 < self.conservation_tol < 1:
            raise ValueError("conservation_tol must lie in (0, 1)")
        if self.max_cycle_len < 3:
            raise ValueError("max_cycle_len must be >= 3")
        if not 0 < self.bipartite_min_density <= 1:
            raise ValueError("bipartite_min_density must lie in (0, 1]")


_KIND_ORDER = {k: i for i, k in enumerate(PatternKind)}


@dataclass(frozen=True)
class PatternMatch:
    kind: PatternKind
    participants: frozenset[str]
    evidence: frozenset[int]
    score: float

    def __post_init__(self):
        if self.kind is PatternKind.NONE:
            raise ValueError("a match cannot have kind NONE")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")

    def sort_key(self) -> tuple:
        return (_KIND_ORDER[self.kind], min(self.participants), sorted(self.participants),
                sorted(self.evidence))


@dataclass(frozen=True)
class _Edge:
    id: int
    src: str
    dst: str
    t: int
    cents: int
    currency: str


def _edges(sub: Subgraph) -> list[_Edge]:
    out = [_Edge(t.id, t.source, t.dest, datetime_to_minutes(t.timestamp), t.paid.cents, t.paid.currency)
           for t in sub.transfers if t.source != t.dest]
    out.sort(key=lambda e: (e.t, e.id))
    return out


def _fan_score(n: int, cfg: DetectorConfig) -> float:
    return min(1.0, n / (2 * cfg.min_fan))


def _detect_fan(edges: list[_Edge], cfg: DetectorConfig, outgoing: bool) -> list[PatternMatch]:
    kind = PatternKind.FAN_OUT if outgoing else PatternKind.FAN_IN
    window = cfg.window // timedelta(minutes=1)
    by_center: dict[str, list[_Edge]] = defaultdict(list)
    for e in edges:
        by_center[e.src if outgoing else e.dst].append(e)
    matches = []
    for center, group in by_center.items():
        best: dict[str, _Edge] | None = None
        for i, first in enumerate(group):
            picked: dict[str, _Edge] = {}
            for e in group[i:]:
                if e.t - first.t > window:
                    break
                picked.setdefault(e.dst if outgoing else e.src, e)
            if best is None or len(picked) > len(best):
                best = picked
        if best is not None and len(best) >= cfg.min_fan:
            matches.append(PatternMatch(kind, frozenset(best) | {center},
                                        frozenset(e.id for e in best.values()),
                                        _fan_score(len(best), cfg)))
    return matches


def _detect_scatter_gather(edges: list[_Edge], cfg: DetectorConfig) -> list[PatternMatch]:
    first_in: dict[tuple[str, str], _Edge] = {}
    out_of: dict[str, list[_Edge]] = defaultdict(list)
    for e in edges:
        first_in.setdefault((e.src, e.dst), e)
        out_of[e.src].append(e)
    # (source, sink) -> intermediary -> (inflow edge, outflow edge)
    routes: dict[tuple[str, str], dict[str, tuple[_Edge, _Edge]]] = defaultdict(dict)
    for (s, m), inflow in first_in.items():
        for outflow in out_of.get(m, ()):
            d = outflow.dst
            if d == s or outflow.t <= inflow.t:
                continue
            routes[(s, d)].setdefault(m, (inflow, outflow))
    matches = []
    for (s, d), mids in routes.items():
        if len(mids) >= cfg.min_fan:
            evidence = frozenset(e.id for pair in mids.values() for e in pair)
            matches.append(PatternMatch(PatternKind.SCATTER_GATHER, frozenset(mids) | {s, d},
                                        evidence, _fan_score(len(mids), cfg)))
    return matches


def _detect_gather_scatter(edges: list[_Edge], cfg: DetectorConfig) -> list[PatternMatch]:
    ins: dict[str, list[_Edge]] = defaultdict(list)
    outs: dict[str, list[_Edge]] = defaultdict(list)
    for e in edges:
        ins[e.dst].append(e)
        outs[e.src].append(e)
    matches = []
    for m in sorted(set(ins) & set(outs)):
        inflow, outflow = ins[m], outs[m]
        best = None
        for split in sorted({e.t for e in inflow}):
            phase_in = [e for e in inflow if e.t <= split]
            phase_out = [e for e in outflow if e.t > split]
            n_src = len({e.src for e in phase_in})
            n_dst = len({e.dst for e in phase_out})
            if n_src < cfg.min_fan or n_dst < cfg.min_fan:
                continue
            currencies = {e.currency for e in phase_in} | {e.currency for e in phase_out}
            if len(currencies) == 1:
                total_in = sum(e.cents for e in phase_in)
                total_out = sum(e.cents for e in phase_out)
                if total_in == 0:
                    continue
                imbalance = abs(total_in - total_out) / total_in
                if imbalance > cfg.conservation_tol:
                    continue
                score = 1.0 - imbalance
            else:
                # conservation is not checked across currencies
                imbalance, score = math.inf, 0.5
            rank = (min(n_src, n_dst), -imbalance, -split)
            if best is None or rank > best[0]:
                best = (rank, phase_in, phase_out, score)
        if best is not None:
            _, phase_in, phase_out, score = best
            participants = frozenset({m} | {e.src for e in phase_in} | {e.dst for e in phase_out})
            matches.append(PatternMatch(PatternKind.GATHER_SCATTER, participants,
                                        frozenset(e.id for e in phase_in + phase_out), score))
    return matches


def _earliest_after(pair_times: dict[tuple[str, str], list[_Edge]], u: str, v: str, t: int) -> _Edge | None:
    for e in pair_times.get((u, v), ()):
        if e.t > t:
            return e
    return None


def _detect_cycles(edges: list[_Edge], cfg: DetectorConfig) -> list[PatternMatch]:
    """Time-respecting simple cycles via DFS from every start vertex.

    Along a fixed vertex sequence, taking the earliest feasible transfer at
    each hop is optimal, so one greedy edge choice per sequence suffices.
    """
    pair_edges: dict[tuple[str, str], list[_Edge]] = defaultdict(list)
    succ: dict[str, set[str]] = defaultdict(set)
    for e in edges:
        pair_edges[(e.src, e.dst)].append(e)
        succ[e.src].add(e.dst)
    succ_sorted = {u: sorted(vs) for u, vs in succ.items()}
    found: dict[tuple[str, ...], PatternMatch] = {}

    def canonical(path: list[str]) -> tuple[str, ...]:
        i = path.index(min(path))
        return tuple(path[i:] + path[:i])

    def dfs(start: str, path: list[str], used: list[_Edge], t: int):
        u = path[-1]
        for v in succ_sorted.get(u, ()):
            e = _earliest_after(pair_edges, u, v, t)
            if e is None:
                continue
            if v == start:
                if len(path) >= 3:
                    key = canonical(path)
                    if key not in found:
                        found[key] = PatternMatch(PatternKind.SIMPLE_CYCLE, frozenset(path),
                                                  frozenset(x.id for x in used + [e]), 1.0)
                continue
            if v in path or len(path) >= cfg.max_cycle_len:
                continue
            path.append(v)
            used.append(e)
            dfs(start, path, used, e.t)
            path.pop()
            used.pop()

    for s in sorted(succ_sorted):
        dfs(s, [s], [], -math.inf)
    return list(found.values())


def _bipartite_candidates(edges: list[_Edge], cfg: DetectorConfig) -> list[tuple[frozenset, frozenset, dict]]:
    first_edge: dict[tuple[str, str], _Edge] = {}
    for e in edges:
        first_edge.setdefault((e.src, e.dst), e)
    succ: dict[str, set[str]] = defaultdict(set)
    pred: dict[str, set[str]] = defaultdict(set)
    for a, b in first_edge:
        succ[a].add(b)
        pred[b].add(a)
    density = cfg.bipartite_min_density
    side = cfg.bipartite_min_side
    seen: set[tuple[frozenset, frozenset]] = set()
    out = []
    for seed in sorted(succ):
        if len(succ[seed]) < side:
            continue
        right = frozenset(succ[seed])
        left: frozenset = frozenset()
        for _ in range(8):
            need = math.ceil(density * len(right) - 1e-9)
            new_left = frozenset(a for a in succ if a not in right and len(succ[a] & right) >= need)
            if not new_left:
                break
            need = math.ceil(density * len(new_left) - 1e-9)
            new_right = frozenset(b for b in pred if b not in new_left and len(pred[b] & new_left) >= need)
            if (new_left, new_right) == (left, right):
                break
            left, right = new_left, new_right
        left, right = _strip_intra(left, right, succ)
        if len(left) < side or len(right) < side:
            continue
        pairs = {(a, b): first_edge[(a, b)] for a in left for b in right if (a, b) in first_edge}
        if len(pairs) < density * len(left) * len(right) - 1e-9:
            continue
        key = (left, right)
        if key not in seen:
            seen.add(key)
            out.append((left, right, pairs))
    return out


def _strip_intra(left: frozenset, right: frozenset, succ) -> tuple[frozenset, frozenset]:
    sides = [set(left), set(right)]
    for s in sides:
        while True:
            counts = {u: sum(1 for v in succ.get(u, ()) if v in s) + sum(1 for v in s if u in succ.get(v, ()))
                      for u in s}
            worst = max(sorted(counts), key=lambda u: counts[u], default=None)
            if worst is None or counts[worst] == 0:
                break
            s.discard(worst)
    return frozenset(sides[0]), frozenset(sides[1])


def _detect_bipartite_and_stack(edges: list[_Edge], cfg: DetectorConfig) -> list[PatternMatch]:
    cands = _bipartite_candidates(edges, cfg)
    matches = []
    for left, right, pairs in cands:
        dens = len(pairs) / (len(left) * len(right))
        matches.append(PatternMatch(PatternKind.BIPARTITE, left | right,
                                    frozenset(e.id for e in pairs.values()), min(1.0, dens)))
    for l1, mid, p1 in cands:
        for mid2, r2, p2 in cands:
            if mid2 != mid or l1 & r2:
                continue
            first_in = {b: min(e.t for (a, bb), e in p1.items() if bb == b) for b in mid}
            first_out = {b: min(e.t for (bb, c), e in p2.items() if bb == b) for b in mid}
            if not all(first_in[b] < first_out[b] for b in mid):
                continue
            d1 = len(p1) / (len(l1) * len(mid))
            d2 = len(p2) / (len(mid) * len(r2))
            evidence = frozenset(e.id for e in p1.values()) | frozenset(e.id for e in p2.values())
            matches.append(PatternMatch(PatternKind.STACK, l1 | mid | r2, evidence, min(1.0, d1, d2)))
    return matches


def detect(sub: Subgraph, cfg: DetectorConfig | None = None) -> list[PatternMatch]:
    """All pattern matches in ``sub``, canonically sorted by (kind, min participant, ...)."""
    cfg = cfg or DetectorConfig()
    edges = _edges(sub)
    matches = (_detect_fan(edges, cfg, outgoing=True) + _detect_fan(edges, cfg, outgoing=False)
               + _detect_gather_scatter(edges, cfg) + _detect_scatter_gather(edges, cfg)
               + _detect_cycles(edges, cfg) + _detect_bipartite_and_stack(edges, cfg))
    return sorted(matches, key=PatternMatch.sort_key)


def detected_kinds(matches: Iterable[PatternMatch]) -> list[PatternKind]:
    """Distinct kinds among ``matches`` in canonical kind order."""
    return sorted({m.kind for m in matches}, key=_KIND_ORDER.__getitem__)


# ---------------------------------------------------------------------------
# generators

CURRENCIES = ("US Dollar", "Euro", "Shekel", "Yuan", "Rupee", "UK Pound", "Swiss Franc")
FORMATS = ("ACH", "Cheque", "Wire", "Credit Card", "Cash", "Reinvestment", "Bitcoin")
BASE_DATE = datetime(2022, 9, 1)


@dataclass(frozen=True)
class GenConfig:
    """Parameters for one synthetic laundering subgraph.

    ``fan`` is the branch factor; for SIMPLE_CYCLE it is the cycle length and
    for BIPARTITE/STACK the size of every side.  ``layers`` counts the
    bipartite layers of a STACK.
    """

    kind: PatternKind
    fan: int = 4
    layers: int = 2
    amount_base: Money = field(default_factory=lambda: Money(Decimal("9500.00"), "US Dollar"))
    jitter: float = 0.1
    span: timedelta = timedelta(hours=48)
    seed: int = 0

    def __post_init__(self):
        kind = PatternKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.fan < 2:
            raise ValueError("fan must be >= 2")
        if kind is PatternKind.SIMPLE_CYCLE and self.fan < 3:
            raise ValueError("a simple cycle needs at least 3 accounts")
        if kind is PatternKind.STACK and self.layers < 2:
            raise ValueError("a stack needs at least 2 layers")
        if not 0 <= self.jitter < 1:
            raise ValueError("jitter must lie in [0, 1)")
        if self.span < timedelta(minutes=1):
            raise ValueError("span must be at least one minute")


class _Draft:
    """Accumulates accounts and transfers for one generated subgraph."""

    def __init__(self, rng: _random.Random, currency: str):
        self.rng = rng
        self.currency = currency
        self.start = BASE_DATE + timedelta(days=rng.randrange(0, 60), minutes=rng.randrange(0, 24 * 60))
        self.banks = [f"bank_{rng.randrange(1, 40000)}" for _ in range(rng.randint(1, 3))]
        self.accounts: dict[str, AccountNode] = {}
        self.rows: list[tuple[str, str, int, int, str]] = []

    def account(self) -> str:
        while True:
            acct = f"acct_{self.rng.getrandbits(36):09X}"
            if acct not in self.accounts:
                self.accounts[acct] = AccountNode(acct, self.rng.choice(self.banks))
                return acct

    def amount(self, base_cents: int, jitter: float) -> int:
        return max(1, round(base_cents * (1 + self.rng.uniform(-jitter, jitter))))

    def transfer(self, src: str, dst: str, minute: int, cents: int, via: str | None = None):
        self.rows.append((src, dst, minute, cents, via or self.rng.choice(FORMATS)))

    def minutes(self, n: int, lo: int, hi: int) -> list[int]:
        """``n`` distinct sorted minute offsets in ``[lo, hi]``."""
        hi = max(hi, lo + n - 1)
        return sorted(self.rng.sample(range(lo, hi + 1), n))

    def finish(self, focal_row: int, kind: PatternKind, laundering: bool = True) -> Subgraph:
        rows = [(self.start + timedelta(minutes=m), src, dst, cents, via, i)
                for i, (src, dst, m, cents, via) in enumerate(self.rows)]
        rows.sort(key=lambda r: (r[0], r[1], r[2], r[3], r[4]))
        transfers, focal = [], None
        for eid, (when, src, dst, cents, via, original) in enumerate(rows):
            money = Money.from_cents(cents, self.currency)
            edge = TransferEdge(eid, src, dst, money, money, via, when)
            transfers.append(edge)
            if original == focal_row:
                focal = edge
        accounts = tuple(self.accounts.values())
        truth = Truth(laundering, frozenset({kind}))
        return Subgraph(focal, accounts, tuple({a.bank for a in accounts}), tuple(transfers), truth)


def generate(cfg: GenConfig) -> Subgraph:
    """Synthesize one subgraph exhibiting ``cfg.kind``, deterministic per seed."""
    kind = cfg.kind
    if kind is PatternKind.NONE:
        raise ValueError("use generate_benign for non-laundering subgraphs")
    rng = _random.Random(f"{kind.value}:{cfg.seed}")
    currency = cfg.amount_base.currency
    d = _Draft(rng, currency)
    n = cfg.fan
    span = max(cfg.span // timedelta(minutes=1), 4 * n * max(cfg.layers, 2))
    base = cfg.amount_base.cents
    jit = cfg.jitter
    focal = 0

    if kind in (PatternKind.FAN_OUT, PatternKind.FAN_IN):
        center = d.account()
        others = [d.account() for _ in range(n)]
        for other, minute in zip(others, d.minutes(n, 0, span)):
            src, dst = (center, other) if kind is PatternKind.FAN_OUT else (other, center)
            d.transfer(src, dst, minute, d.amount(base, jit))
    elif kind is PatternKind.GATHER_SCATTER:
        sources = [d.account() for _ in range(n)]
        middle = d.account()
        dests = [d.account() for _ in range(n)]
        half = span // 2
        inflows = [d.amount(base, jit) for _ in sources]
        for s, minute, cents in zip(sources, d.minutes(n, 0, half), inflows):
            d.transfer(s, middle, minute, cents)
        focal = n - 1
        weights = [1 + rng.uniform(-jit, jit) for _ in dests]
        total = sum(inflows)
        outflows = [int(total * w / sum(weights)) for w in weights]
        outflows[-1] += total - sum(outflows)
        for dst, minute, cents in zip(dests, d.minutes(n, half + 1, span), outflows):
            d.transfer(middle, dst, minute, max(cents, 1))
    elif kind is PatternKind.SCATTER_GATHER:
        source = d.account()
        mids = [d.account() for _ in range(n)]
        sink = d.account()
        half = span // 2
        for m, minute in zip(mids, d.minutes(n, 0, half)):
            d.transfer(source, m, minute, d.amount(base, jit))
        for m, minute in zip(mids, d.minutes(n, half + 1, span)):
            d.transfer(m, sink, minute, d.amount(base, jit))
    elif kind is PatternKind.SIMPLE_CYCLE:
        ring = [d.account() for _ in range(n)]
        cents = base
        for i, minute in enumerate(d.minutes(n, 0, span)):
            cents = d.amount(cents, jit / 4)
            d.transfer(ring[i], ring[(i + 1) % n], minute, cents)
    elif kind is PatternKind.BIPARTITE:
        left = [d.account() for _ in range(n)]
        right = [d.account() for _ in range(n)]
        pairs = [(a, b) for a in left for b in right]
        for (a, b), minute in zip(pairs, d.minutes(len(pairs), 0, span)):
            d.transfer(a, b, minute, d.amount(base, jit))
    elif kind is PatternKind.STACK:
        sides = [[d.account() for _ in range(n)] for _ in range(cfg.layers + 1)]
        phase = span // cfg.layers
        middle_layer = cfg.layers // 2
        for layer in range(cfg.layers):
            pairs = [(a, b) for a in sides[layer] for b in sides[layer + 1]]
            if layer == middle_layer:
                focal = len(d.rows)
            lo = layer * phase
            for (a, b), minute in zip(pairs, d.minutes(len(pairs), lo, lo + phase - 1)):
                d.transfer(a, b, minute, d.amount(base, jit))
    elif kind is PatternKind.RANDOM:
        nodes = [d.account()]
        minutes = d.minutes(2 * n + 1, 0, span)
        for minute in minutes[:n + 1]:
            src = rng.choice(nodes)
            dst = d.account()
            d.transfer(src, dst, minute, d.amount(base, jit))
            nodes.append(dst)
        for minute in minutes[n + 1:]:
            src, dst = rng.sample(nodes, 2)
            d.transfer(src, dst, minute, d.amount(base, jit))
    else:  # pragma: no cover - enum is closed
        raise ValueError(kind)
    return d.finish(focal, kind)


def generate_benign(n_accounts: int = 4, n_edges: int = 6, span: timedelta = timedelta(days=180),
                    seed: int = 0, cfg: DetectorConfig | None = None,
                    max_attempts: int = 100) -> Subgraph:
    """Regular scheduled payments between fixed pairs with stable amounts.

    Accounts are paired payer -> payee; each pair pays the same amount by the
    same method at a fixed period.  Seeds are retried until the detector
    finds nothing, up to ``max_attempts``.
    """
    if n_edges < 1:
        raise ValueError("n_edges must be >= 1")
    if n_accounts < 2:
        raise ValueError("n_accounts must be >= 2")
    cfg = cfg or DetectorConfig()
    for attempt in range(max_attempts):
        rng = _random.Random(f"benign:{seed}:{attempt}")
        d = _Draft(rng, rng.choice(CURRENCIES))
        accts = [d.account() for _ in range(n_accounts)]
        payers = accts[0::2]
        payees = accts[1::2]
        pairs = list(zip(payers, payees))
        if len(payers) > len(payees):
            pairs.append((payers[-1], payees[0]))
        n_per = math.ceil(n_edges / len(pairs))
        period = max(span // timedelta(minutes=1) // n_per, 1)
        terms = []
        for a, b in pairs:
            terms.append((a, b, rng.randrange(0, max(period // 4, 1)),
                          rng.randrange(50_00, 5_000_00), rng.choice(FORMATS)))
        for i in range(n_edges):
            a, b, offset, cents, via = terms[i % len(pairs)]
            d.transfer(a, b, offset + (i // len(pairs)) * period, cents, via)
        sub = d.finish(0, PatternKind.NONE, laundering=False)
        sub = sub.with_truth(Truth(False, frozenset({PatternKind.NONE})))
        if not detect(sub, cfg):
            return sub
    raise RuntimeError(f"no detector-clean benign subgraph within {max_attempts} attempts")


__all__ = ["CURRENCIES", "DetectorConfig", "FORMATS", "GenConfig", "LAUNDERING_KINDS",
           "PatternMatch", "RULESET_VERSION", "detect", "detected_kinds", "generate",
           "generate_benign"]
