"""In-memory transaction multigraph with time-ordered adjacency indexes.

Edges live in flat numpy columns; per-account adjacency is stored CSR style,
each account's slice sorted ascending by ``(timestamp, edge id)``.  The graph
is immutable once built: every column is marked read-only.

Timestamps are handled internally as integer minutes since 1970-01-01
(timezone-naive) and amounts as integer cents.
"""

from __future__ import annotations

import csv
import enum
import json
import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable

import numpy as np

from .kinds import PatternKind, lookup_kind

AccountId = str
BankId = str

ACCOUNT_PREFIX = "acct_"
BANK_PREFIX = "bank_"

_EPOCH = datetime(1970, 1, 1)
_CENT = Decimal("0.01")
TIMESTAMP_FORMAT = "%Y/%m/%d %H:%M"


class GraphError(Exception):
    """Base class for graph construction and query errors."""


class CsvFormatError(GraphError):
    """Raised when a transaction file does not match its schema."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class UnknownAccountError(GraphError, KeyError):
    def __str__(self) -> str:
        return f"unknown account: {self.args[0]!r}"


class EntityType(str, enum.Enum):
    INDIVIDUAL = "Individual"
    CORPORATE = "Corporate"
    UNKNOWN = "Unknown"


@dataclass(frozen=True, order=True)
class Money:
    """Non-negative fixed-point amount with two fractional digits."""

    amount: Decimal
    currency: str

    def __post_init__(self):
        amount = Decimal(self.amount)
        if not amount.is_finite() or amount < 0:
            raise ValueError(f"amount must be finite and non-negative, got {self.amount!r}")
        if not self.currency:
            raise ValueError("currency must be non-empty")
        object.__setattr__(self, "amount", amount.quantize(_CENT, rounding=ROUND_HALF_EVEN))

    @classmethod
    def from_cents(cls, cents: int, currency: str) -> "Money":
        return cls(Decimal(int(cents)).scaleb(-2), currency)

    @property
    def cents(self) -> int:
        return int(self.amount * 100)

    def __str__(self) -> str:
        return f"{self.amount:.2f} {self.currency}"


def minutes_to_datetime(minutes: int) -> datetime:
    return _EPOCH + timedelta(minutes=int(minutes))


def datetime_to_minutes(ts: datetime) -> int:
    if ts.second or ts.microsecond:
        raise ValueError(f"timestamp {ts} is not at minute precision")
    if ts.tzinfo is not None:
        raise ValueError("timestamps must be timezone-naive")
    return (ts - _EPOCH) // timedelta(minutes=1)


def parse_timestamp(text: str) -> datetime:
    """Parse ``YYYY/MM/DD HH:MM``."""
    return datetime.strptime(text.strip(), TIMESTAMP_FORMAT)


def format_timestamp(ts: datetime) -> str:
    return ts.strftime(TIMESTAMP_FORMAT)


@dataclass(frozen=True)
class TransferEdge:
    id: int
    source: AccountId
    dest: AccountId
    paid: Money
    received: Money
    payment_format: str
    timestamp: datetime
    is_laundering: bool | None = None
    pattern_label: PatternKind | None = None


@dataclass(frozen=True)
class AccountNode:
    id: AccountId
    bank: BankId | None
    entity_type: EntityType = EntityType.UNKNOWN
    creation_date: datetime | None = None


@dataclass(frozen=True)
class GraphStats:
    n_accounts: int
    n_banks: int
    n_edges: int
    first_timestamp: datetime | None
    last_timestamp: datetime | None
    n_laundering: int

    @property
    def time_span(self) -> timedelta:
        if self.first_timestamp is None:
            return timedelta(0)
        return self.last_timestamp - self.first_timestamp


def _frozen(values, dtype) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _csr(owner: np.ndarray, ts: np.ndarray, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Group edge ids by ``owner`` and sort each group by (timestamp, id)."""
    ids = np.arange(len(owner), dtype=np.int64)
    order = np.lexsort((ids, ts, owner))
    counts = np.bincount(owner, minlength=n_nodes) if len(owner) else np.zeros(n_nodes, np.int64)
    ptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return _frozen(ptr, np.int64), _frozen(order, np.int64)


class TransactionGraph:
    """Immutable indexed multigraph of accounts, banks and transfers.

    Build one with :func:`load_csv`, :class:`GraphBuilder` or :func:`load_cache`.
    """

    __slots__ = (
        "_account_ids", "_account_index", "_account_bank", "_entity_types", "_creation_dates",
        "_bank_ids", "_currencies", "_formats",
        "src", "dst", "ts", "paid_cents", "paid_currency", "received_cents",
        "received_currency", "payment_format", "laundering", "pattern",
        "out_ptr", "out_eids", "in_ptr", "in_eids", "_sealed",
    )

    def __init__(self, *, account_ids, account_bank, bank_ids, entity_types=None, creation_dates=None,
                 currencies, formats, src, dst, ts, paid_cents, paid_currency, received_cents,
                 received_currency, payment_format, laundering, pattern):
        n = len(account_ids)
        self._account_ids = tuple(account_ids)
        self._account_index = {a: i for i, a in enumerate(self._account_ids)}
        if len(self._account_index) != n:
            raise GraphError("account ids must be unique")
        self._bank_ids = tuple(bank_ids)
        if len(set(self._bank_ids)) != len(self._bank_ids):
            raise GraphError("bank ids must be unique")
        self._account_bank = _frozen(account_bank, np.int32)
        self._entity_types = tuple(entity_types) if entity_types is not None else (EntityType.UNKNOWN,) * n
        self._creation_dates = tuple(creation_dates) if creation_dates is not None else (None,) * n
        self._currencies = tuple(currencies)
        self._formats = tuple(formats)
        self.src = _frozen(src, np.int32)
        self.dst = _frozen(dst, np.int32)
        self.ts = _frozen(ts, np.int64)
        self.paid_cents = _frozen(paid_cents, np.int64)
        self.paid_currency = _frozen(paid_currency, np.int32)
        self.received_cents = _frozen(received_cents, np.int64)
        self.received_currency = _frozen(received_currency, np.int32)
        self.payment_format = _frozen(payment_format, np.int32)
        self.laundering = _frozen(laundering, np.int8)
        self.pattern = _frozen(pattern, np.int8)
        m = len(self.src)
        for col in (self.dst, self.ts, self.paid_cents, self.paid_currency, self.received_cents,
                    self.received_currency, self.payment_format, self.laundering, self.pattern):
            if len(col) != m:
                raise GraphError("edge columns must have equal length")
        if m and (self.src.min() < 0 or self.dst.min() < 0 or max(self.src.max(), self.dst.max()) >= n):
            raise GraphError("edge endpoint outside the account table")
        if n and (self._account_bank.min() < 0 or self._account_bank.max() >= len(self._bank_ids)):
            raise GraphError("account bank outside the bank table")
        self.out_ptr, self.out_eids = _csr(self.src, self.ts, n)
        self.in_ptr, self.in_eids = _csr(self.dst, self.ts, n)
        self._sealed = True

    def __setattr__(self, name, value):
        if getattr(self, "_sealed", False):
            raise AttributeError("TransactionGraph is immutable")
        object.__setattr__(self, name, value)

    def __repr__(self) -> str:
        return (f"TransactionGraph(accounts={self.n_accounts}, banks={len(self._bank_ids)}, "
                f"edges={self.n_edges})")

    @property
    def n_accounts(self) -> int:
        return len(self._account_ids)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @property
    def account_ids(self) -> tuple[AccountId, ...]:
        return self._account_ids

    @property
    def banks(self) -> tuple[BankId, ...]:
        return self._bank_ids

    @property
    def currencies(self) -> tuple[str, ...]:
        return self._currencies

    @property
    def formats(self) -> tuple[str, ...]:
        return self._formats

    @property
    def entity_types(self) -> tuple[EntityType, ...]:
        return self._entity_types

    @property
    def creation_dates(self) -> tuple[datetime | None, ...]:
        return self._creation_dates

    @property
    def account_bank(self) -> np.ndarray:
        return self._account_bank

    @property
    def accounts(self) -> list[AccountNode]:
        return [self.account(i) for i in range(self.n_accounts)]

    @property
    def edges(self) -> list[TransferEdge]:
        return [self.edge(i) for i in range(self.n_edges)]

    def index_of(self, account: AccountId) -> int:
        try:
            return self._account_index[account]
        except KeyError:
            raise UnknownAccountError(account) from None

    def __contains__(self, account: AccountId) -> bool:
        return account in self._account_index

    def account(self, index: int) -> AccountNode:
        return AccountNode(self._account_ids[index], self._bank_ids[self._account_bank[index]],
                           self._entity_types[index], self._creation_dates[index])

    def edge(self, eid: int) -> TransferEdge:
        eid = int(eid)
        if not 0 <= eid < self.n_edges:
            raise IndexError(f"unknown edge id {eid}")
        flag = int(self.laundering[eid])
        pat = int(self.pattern[eid])
        return TransferEdge(
            id=eid,
            source=self._account_ids[self.src[eid]],
            dest=self._account_ids[self.dst[eid]],
            paid=Money.from_cents(self.paid_cents[eid], self._currencies[self.paid_currency[eid]]),
            received=Money.from_cents(self.received_cents[eid],
                                      self._currencies[self.received_currency[eid]]),
            payment_format=self._formats[self.payment_format[eid]],
            timestamp=minutes_to_datetime(self.ts[eid]),
            is_laundering=None if flag < 0 else bool(flag),
            pattern_label=None if pat < 0 else _PATTERN_CODES[pat],
        )

    def out_edge_ids(self, index: int) -> np.ndarray:
        return self.out_eids[self.out_ptr[index]:self.out_ptr[index + 1]]

    def in_edge_ids(self, index: int) -> np.ndarray:
        return self.in_eids[self.in_ptr[index]:self.in_ptr[index + 1]]


# stable small-int codes for pattern labels stored in edge columns
_PATTERN_CODES: tuple[PatternKind, ...] = tuple(PatternKind)
_PATTERN_INDEX = {k: i for i, k in enumerate(_PATTERN_CODES)}


def _window_slice(graph: TransactionGraph, eids: np.ndarray, window) -> np.ndarray:
    if window is None:
        return eids
    lo, hi = (datetime_to_minutes(w) for w in window)
    times = graph.ts[eids]
    return eids[np.searchsorted(times, lo, side="left"):np.searchsorted(times, hi, side="right")]


def out_edges(graph: TransactionGraph, account: AccountId,
              window: tuple[datetime, datetime] | None = None) -> list[TransferEdge]:
    """Outgoing transfers of ``account``, ascending by (timestamp, id).

    ``window`` is an inclusive ``(start, end)`` pair.
    """
    eids = _window_slice(graph, graph.out_edge_ids(graph.index_of(account)), window)
    return [graph.edge(e) for e in eids]


def in_edges(graph: TransactionGraph, account: AccountId,
             window: tuple[datetime, datetime] | None = None) -> list[TransferEdge]:
    eids = _window_slice(graph, graph.in_edge_ids(graph.index_of(account)), window)
    return [graph.edge(e) for e in eids]


def graph_stats(graph: TransactionGraph) -> GraphStats:
    if graph.n_edges:
        first = minutes_to_datetime(graph.ts.min())
        last = minutes_to_datetime(graph.ts.max())
    else:
        first = last = None
    return GraphStats(graph.n_accounts, len(graph.banks), graph.n_edges, first, last,
                      int(np.count_nonzero(graph.laundering == 1)))


class GraphBuilder:
    """Incremental constructor for small graphs (fixtures, synthetic cases).

    Accounts referenced by a transfer must be added first.
    """

    def __init__(self):
        self._accounts: dict[AccountId, int] = {}
        self._account_bank: list[int] = []
        self._entity: list[EntityType] = []
        self._created: list[datetime | None] = []
        self._banks: dict[BankId, int] = {}
        self._currencies: dict[str, int] = {}
        self._formats: dict[str, int] = {}
        self._cols: dict[str, list] = {k: [] for k in (
            "src", "dst", "ts", "paid_cents", "paid_currency", "received_cents",
            "received_currency", "payment_format", "laundering", "pattern")}

    def add_bank(self, bank: BankId) -> int:
        if not bank:
            raise ValueError("bank id must be non-empty")
        return self._banks.setdefault(bank, len(self._banks))

    def add_account(self, account: AccountId, bank: BankId,
                    entity_type: EntityType = EntityType.UNKNOWN,
                    creation_date: datetime | None = None) -> int:
        if not account:
            raise ValueError("account id must be non-empty")
        b = self.add_bank(bank)
        if account in self._accounts:
            idx = self._accounts[account]
            if self._account_bank[idx] != b:
                raise GraphError(f"account {account} already belongs to another bank")
            return idx
        self._accounts[account] = len(self._account_bank)
        self._account_bank.append(b)
        self._entity.append(EntityType(entity_type))
        self._created.append(creation_date)
        return self._accounts[account]

    def add_transfer(self, source: AccountId, dest: AccountId, paid: Money, timestamp: datetime,
                     payment_format: str, received: Money | None = None,
                     is_laundering: bool | None = None,
                     pattern_label: PatternKind | None = None) -> int:
        if source not in self._accounts or dest not in self._accounts:
            missing = source if source not in self._accounts else dest
            raise UnknownAccountError(missing)
        received = paid if received is None else received
        c = self._cols
        c["src"].append(self._accounts[source])
        c["dst"].append(self._accounts[dest])
        c["ts"].append(datetime_to_minutes(timestamp))
        c["paid_cents"].append(paid.cents)
        c["paid_currency"].append(self._currencies.setdefault(paid.currency, len(self._currencies)))
        c["received_cents"].append(received.cents)
        c["received_currency"].append(
            self._currencies.setdefault(received.currency, len(self._currencies)))
        c["payment_format"].append(self._formats.setdefault(payment_format, len(self._formats)))
        c["laundering"].append(-1 if is_laundering is None else int(is_laundering))
        c["pattern"].append(-1 if pattern_label is None else _PATTERN_INDEX[PatternKind(pattern_label)])
        return len(c["src"]) - 1

    def build(self) -> TransactionGraph:
        return TransactionGraph(
            account_ids=list(self._accounts), account_bank=self._account_bank,
            bank_ids=list(self._banks), entity_types=self._entity, creation_dates=self._created,
            currencies=list(self._currencies), formats=list(self._formats), **self._cols)


def graph_from_parts(accounts: Iterable[AccountNode], transfers: Iterable[TransferEdge]) -> TransactionGraph:
    """Build a graph holding exactly ``accounts`` and ``transfers`` (ids renumbered in order)."""
    builder = GraphBuilder()
    for acct in accounts:
        builder.add_account(acct.id, acct.bank, acct.entity_type, acct.creation_date)
    for t in transfers:
        builder.add_transfer(t.source, t.dest, t.paid, t.timestamp, t.payment_format,
                             t.received, t.is_laundering, t.pattern_label)
    return builder.build()


# ---------------------------------------------------------------------------
# CSV ingestion

@dataclass(frozen=True)
class CsvSchema:
    """Positional column names of a transaction file.

    Files are matched by header position, so repeated names (the IBM release
    has two ``Account`` columns) are fine.  ``is_laundering`` may be None for
    unlabeled files.
    """

    timestamp: str = "Timestamp"
    from_bank: str = "From Bank"
    from_account: str = "Account"
    to_bank: str = "To Bank"
    to_account: str = "Account"
    amount_received: str = "Amount Received"
    receiving_currency: str = "Receiving Currency"
    amount_paid: str = "Amount Paid"
    payment_currency: str = "Payment Currency"
    payment_format: str = "Payment Format"
    is_laundering: str | None = "Is Laundering"

    @property
    def columns(self) -> tuple[str, ...]:
        cols = (self.timestamp, self.from_bank, self.from_account, self.to_bank, self.to_account,
                self.amount_received, self.receiving_currency, self.amount_paid,
                self.payment_currency, self.payment_format)
        return cols + ((self.is_laundering,) if self.is_laundering is not None else ())


IBM_SCHEMA = CsvSchema()
SCHEMAS: dict[str, CsvSchema] = {
    "ibm": IBM_SCHEMA,
    "ibm-unlabeled": CsvSchema(is_laundering=None),
}

_PLAIN_AMOUNT = re.compile(r"(\d+)(?:\.(\d{1,2}))?")


def parse_cents(text: str) -> int:
    """Parse a non-negative decimal amount to integer cents.

    More than two fractional digits are rounded half-to-even.
    """
    m = _PLAIN_AMOUNT.fullmatch(text)
    if m:
        frac = m.group(2) or ""
        return int(m.group(1)) * 100 + (int(frac.ljust(2, "0")) if frac else 0)
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise ValueError(f"unparseable amount {text!r}") from None
    if not value.is_finite() or value < 0:
        raise ValueError(f"amount must be finite and non-negative, got {text!r}")
    return int(value.quantize(_CENT, rounding=ROUND_HALF_EVEN) * 100)


class _Vocab(dict):
    def code(self, key: str) -> int:
        code = self.get(key)
        if code is None:
            code = self[key] = len(self)
        return code


def load_csv(path: str | Path, schema: CsvSchema | str = IBM_SCHEMA) -> TransactionGraph:
    """Load a transaction CSV into a :class:`TransactionGraph`.

    One edge per data row, in file order.  Accounts are namespaced as
    ``acct_<raw>`` and banks as ``bank_<raw>``.  Any malformed row rejects
    the whole file with a :class:`CsvFormatError` naming the row number
    (1-based, header is row 1).
    """
    if isinstance(schema, str):
        schema = SCHEMAS[schema]
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    expected = schema.columns
    n_cols = len(expected)
    labeled = schema.is_laundering is not None

    accounts = _Vocab()
    account_bank: list[int] = []
    banks = _Vocab()
    currencies = _Vocab()
    formats = _Vocab()
    ts_cache: dict[str, int] = {}
    src: list[int] = []
    dst: list[int] = []
    ts: list[int] = []
    paid: list[int] = []
    paid_cur: list[int] = []
    recv: list[int] = []
    recv_cur: list[int] = []
    fmt: list[int] = []
    flag: list[int] = []

    def account_code(raw_acct: str, raw_bank: str, row: int) -> int:
        if not raw_acct or not raw_bank:
            raise CsvFormatError("empty account or bank id", row)
        bank = banks.code(BANK_PREFIX + raw_bank)
        key = ACCOUNT_PREFIX + raw_acct
        code = accounts.get(key)
        if code is None:
            code = accounts[key] = len(accounts)
            account_bank.append(bank)
        elif account_bank[code] != bank:
            raise CsvFormatError(f"account {key} seen under two banks", row)
        return code

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvFormatError("missing header row", 1)
        header = [h.strip() for h in header]
        if tuple(header) != expected:
            raise CsvFormatError(f"header {header} does not match schema {list(expected)}", 1)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_cols:
                raise CsvFormatError(f"expected {n_cols} fields, got {len(row)}", row_no)
            f = [v.strip() for v in row]
            stamp = f[0]
            minutes = ts_cache.get(stamp)
            if minutes is None:
                try:
                    minutes = datetime_to_minutes(parse_timestamp(stamp))
                except ValueError:
                    raise CsvFormatError(f"bad timestamp {stamp!r}", row_no) from None
                ts_cache[stamp] = minutes
            try:
                received_cents = parse_cents(f[5])
                paid_cents = parse_cents(f[7])
            except ValueError as exc:
                raise CsvFormatError(str(exc), row_no) from None
            if not f[6] or not f[8]:
                raise CsvFormatError("empty currency", row_no)
            if labeled:
                if f[10] not in ("0", "1"):
                    raise CsvFormatError(f"bad laundering flag {f[10]!r}", row_no)
                flag.append(int(f[10]))
            else:
                flag.append(-1)
            src.append(account_code(f[2], f[1], row_no))
            dst.append(account_code(f[4], f[3], row_no))
            ts.append(minutes)
            recv.append(received_cents)
            recv_cur.append(currencies.code(f[6]))
            paid.append(paid_cents)
            paid_cur.append(currencies.code(f[8]))
            fmt.append(formats.code(f[9]))

    return TransactionGraph(
        account_ids=list(accounts), account_bank=account_bank, bank_ids=list(banks),
        currencies=list(currencies), formats=list(formats), src=src, dst=dst, ts=ts,
        paid_cents=paid, paid_currency=paid_cur, received_cents=recv, received_currency=recv_cur,
        payment_format=fmt, laundering=flag, pattern=np.full(len(src), -1, np.int8))


_ATTEMPT_HEADER = re.compile(r"BEGIN LAUNDERING ATTEMPT\s*-\s*([A-Za-z\- ]+)")


def attach_pattern_labels(graph: TransactionGraph, path: str | Path) -> TransactionGraph:
    """Return a copy of ``graph`` with pattern labels from an IBM ``*_Patterns.txt`` file.

    The file holds blocks delimited by ``BEGIN LAUNDERING ATTEMPT - <KIND>``
    and ``END LAUNDERING ATTEMPT`` lines, each containing transaction rows in
    the labeled CSV layout.  Rows are matched to edges on (timestamp, source,
    destination, paid cents); rows with no matching edge are ignored.
    """
    lookup: dict[tuple, list[int]] = {}
    acct_idx = {a: i for i, a in enumerate(graph.account_ids)}
    for eid in range(graph.n_edges):
        key = (int(graph.ts[eid]), int(graph.src[eid]), int(graph.dst[eid]), int(graph.paid_cents[eid]))
        lookup.setdefault(key, []).append(eid)
    pattern = np.array(graph.pattern, dtype=np.int8)
    current: PatternKind | None = None
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            m = _ATTEMPT_HEADER.match(line)
            if m:
                current = lookup_kind(m.group(1).strip())
                if current is None:
                    raise CsvFormatError(f"unknown pattern name {m.group(1)!r}", line_no)
                continue
            if line.startswith("END LAUNDERING ATTEMPT"):
                current = None
                continue
            if current is None:
                continue
            f = [v.strip() for v in next(csv.reader([line]))]
            try:
                key = (datetime_to_minutes(parse_timestamp(f[0])),
                       acct_idx.get(ACCOUNT_PREFIX + f[2], -1),
                       acct_idx.get(ACCOUNT_PREFIX + f[4], -1),
                       parse_cents(f[7]))
            except (ValueError, IndexError):
                raise CsvFormatError("malformed pattern row", line_no) from None
            for eid in lookup.get(key, ()):
                pattern[eid] = _PATTERN_INDEX[current]
    return _replace_columns(graph, pattern=pattern)


def _replace_columns(graph: TransactionGraph, **columns) -> TransactionGraph:
    parts = dict(
        account_ids=graph.account_ids, account_bank=graph.account_bank, bank_ids=graph.banks,
        entity_types=graph.entity_types, creation_dates=graph.creation_dates,
        currencies=graph.currencies, formats=graph.formats, src=graph.src, dst=graph.dst,
        ts=graph.ts, paid_cents=graph.paid_cents, paid_currency=graph.paid_currency,
        received_cents=graph.received_cents, received_currency=graph.received_currency,
        payment_format=graph.payment_format, laundering=graph.laundering, pattern=graph.pattern)
    parts.update(columns)
    return TransactionGraph(**parts)


# ---------------------------------------------------------------------------
# graph cache: a single .npz holding the edge columns plus a JSON vocabulary

_CACHE_VERSION = 1
_EDGE_COLUMNS = ("src", "dst", "ts", "paid_cents", "paid_currency", "received_cents",
                 "received_currency", "payment_format", "laundering", "pattern")


def save_cache(graph: TransactionGraph, path: str | Path) -> None:
    meta = {
        "version": _CACHE_VERSION,
        "accounts": list(graph.account_ids),
        "banks": list(graph.banks),
        "entity_types": [e.value for e in graph.entity_types],
        "creation_dates": [None if d is None else format_timestamp(d) for d in graph.creation_dates],
        "currencies": list(graph.currencies),
        "formats": list(graph.formats),
    }
    arrays = {name: getattr(graph, name) for name in _EDGE_COLUMNS}
    with Path(path).open("wb") as fh:
        np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                 account_bank=graph.account_bank, **arrays)


def load_cache(path: str | Path) -> TransactionGraph:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(data["meta"].tobytes().decode())
        if meta.get("version") != _CACHE_VERSION:
            raise GraphError(f"unsupported graph cache version {meta.get('version')}")
        columns = {name: data[name] for name in _EDGE_COLUMNS}
        account_bank = data["account_bank"]
    return TransactionGraph(
        account_ids=meta["accounts"], account_bank=account_bank, bank_ids=meta["banks"],
        entity_types=[EntityType(e) for e in meta["entity_types"]],
        creation_dates=[None if d is None else parse_timestamp(d) for d in meta["creation_dates"]],
        currencies=meta["currencies"], formats=meta["formats"], **columns)


__all__ = [
    "AccountId", "AccountNode", "BankId", "CsvFormatError", "CsvSchema", "EntityType",
    "GraphBuilder", "GraphError", "GraphStats", "IBM_SCHEMA", "Money", "SCHEMAS",
    "TransactionGraph", "TransferEdge", "UnknownAccountError", "attach_pattern_labels",
    "format_timestamp", "graph_from_parts", "graph_stats", "in_edges", "load_cache", "load_csv",
    "out_edges", "parse_cents", "parse_timestamp", "save_cache",
]
