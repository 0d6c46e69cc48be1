"""Transaction log parsing, provenance chains, flips and trading diversity."""

from __future__ import annotations

import csv
import enum
import io
import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from typing import IO, Iterable, Sequence

from .errors import (
    DuplicateTransactionId,
    MalformedRow,
    NoEventsInRole,
    SelfTrade,
    UnknownUser,
)

COLUMNS = (
    "moment_unique_id",
    "moment_id",
    "player_id",
    "set_id",
    "seller_id",
    "buyer_id",
    "play_category",
    "limited_flag",
    "circulation_count",
    "transaction_time",
    "transaction_id",
    "sale_price",
)

TIME_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


class PlayCategory(enum.Enum):
    ASSIST = "Assist"
    BLOCK = "Block"
    DUNK = "Dunk"
    HANDLES = "Handles"
    JUMP_SHOT = "Jump Shot"
    LAYUP = "Layup"
    STEAL = "Steal"
    THREE_POINTER = "3 Pointer"

    @classmethod
    def parse(cls, text: str) -> "PlayCategory":
        key = text.strip()
        for member in cls:
            if key == member.value:
                return member
        # tolerate identifier spellings such as "JumpShot" or "ThreePointer"
        squashed = key.replace(" ", "").replace("_", "").lower()
        aliases = {m.value.replace(" ", "").lower(): m for m in cls}
        aliases.update({m.name.replace("_", "").lower(): m for m in cls})
        aliases["threepointer"] = cls.THREE_POINTER
        if squashed in aliases:
            return aliases[squashed]
        raise ValueError(f"unknown play_category {text!r}")


@dataclass(frozen=True)
class Transaction:
    moment_unique_id: str
    moment_id: str
    player_id: str
    set_id: str
    seller_id: str
    buyer_id: str
    play_category: PlayCategory
    limited_flag: bool
    circulation_count: int
    transaction_time: datetime
    transaction_id: str
    sale_price: float

    @property
    def sort_key(self):
        return (self.transaction_time, self.transaction_id)

    def to_row(self) -> list[str]:
        return [
            self.moment_unique_id,
            self.moment_id,
            self.player_id,
            self.set_id,
            self.seller_id,
            self.buyer_id,
            self.play_category.value,
            "1" if self.limited_flag else "0",
            str(self.circulation_count),
            format_time(self.transaction_time),
            self.transaction_id,
            format_price(self.sale_price),
        ]


@dataclass(frozen=True)
class ProvenanceChain:
    moment_unique_id: str
    events: tuple[Transaction, ...]
    # number of trades of this unique id that precede this segment
    offset: int = 0

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True)
class ChainBreak:
    moment_unique_id: str
    previous_transaction_id: str
    next_transaction_id: str
    expected_seller: str
    actual_seller: str


@dataclass
class Provenance:
    chains: dict[str, list[ProvenanceChain]]
    breaks: list[ChainBreak] = field(default_factory=list)

    def segments(self) -> list[ProvenanceChain]:
        return [seg for uid in self.chains for seg in self.chains[uid]]

    def __len__(self):
        return sum(len(v) for v in self.chains.values())


@dataclass(frozen=True)
class Flip:
    moment_unique_id: str
    seller_id: str
    bought_price: float
    sold_price: float
    profit: float
    trade_count: int
    sale_transaction: Transaction
    purchase_transaction: Transaction

    @property
    def moment_id(self) -> str:
        return self.sale_transaction.moment_id

    @property
    def sale_time(self) -> datetime:
        return self.sale_transaction.transaction_time


class Role(enum.Enum):
    SELLER = "Seller"
    BUYER = "Buyer"


@dataclass(frozen=True)
class DiversityScore:
    user_id: str
    role: Role
    entropy: float
    event_count: int
    N: int


def format_time(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime(TIME_FORMAT)


def format_price(price: float) -> str:
    return f"{price:.2f}"


def _parse_time(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def _parse_price(text: str) -> float:
    try:
        value = Decimal(text.strip())
    except InvalidOperation:
        raise ValueError(f"sale_price {text!r} is not a decimal number")
    if not value.is_finite():
        raise ValueError(f"sale_price {text!r} is not finite")
    if value < 0:
        raise ValueError(f"sale_price {text!r} is negative")
    if value.as_tuple().exponent < -2:
        raise ValueError(f"sale_price {text!r} has more than 2 fraction digits")
    return float(value)


def _parse_row(row: list[str], lineno: int) -> Transaction:
    if len(row) != len(COLUMNS):
        raise MalformedRow(lineno, f"expected {len(COLUMNS)} fields, got {len(row)}")
    rec = dict(zip(COLUMNS, row))
    for name in ("moment_unique_id", "moment_id", "player_id", "set_id",
                 "seller_id", "buyer_id", "transaction_id"):
        if not rec[name].strip():
            raise MalformedRow(lineno, f"{name} is empty")
    try:
        category = PlayCategory.parse(rec["play_category"])
        if rec["limited_flag"].strip() not in ("0", "1"):
            raise ValueError(f"limited_flag {rec['limited_flag']!r} not in {{0,1}}")
        limited = rec["limited_flag"].strip() == "1"
        circulation = int(rec["circulation_count"])
        if circulation < 1:
            raise ValueError(f"circulation_count {circulation} < 1")
        ts = _parse_time(rec["transaction_time"])
        price = _parse_price(rec["sale_price"])
    except ValueError as exc:
        raise MalformedRow(lineno, str(exc)) from None
    seller, buyer = rec["seller_id"].strip(), rec["buyer_id"].strip()
    if seller == buyer:
        raise SelfTrade(lineno, f"seller_id and buyer_id are both {seller!r}")
    return Transaction(
        moment_unique_id=rec["moment_unique_id"].strip(),
        moment_id=rec["moment_id"].strip(),
        player_id=rec["player_id"].strip(),
        set_id=rec["set_id"].strip(),
        seller_id=seller,
        buyer_id=buyer,
        play_category=category,
        limited_flag=limited,
        circulation_count=circulation,
        transaction_time=ts,
        transaction_id=rec["transaction_id"].strip(),
        sale_price=price,
    )


def _open_text(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def parse_transactions(source) -> list[Transaction]:
    """Parse a transaction CSV.

    ``source`` may be a path, raw bytes, or a text/binary stream. Rows are
    numbered from 1 for the header, so the first data row is row 2.
    """
    fh, owned = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(1, "missing header row") from None
        header = [h.strip().lstrip("﻿") for h in header]
        if tuple(header) != COLUMNS:
            raise MalformedRow(1, f"header must be {','.join(COLUMNS)}")
        out: list[Transaction] = []
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            tx = _parse_row(row, lineno)
            if tx.transaction_id in seen:
                raise DuplicateTransactionId(lineno, f"duplicate transaction_id {tx.transaction_id!r}")
            seen.add(tx.transaction_id)
            out.append(tx)
        return out
    finally:
        if owned:
            fh.close()
        elif isinstance(fh, io.TextIOWrapper):
            fh.detach()


def write_transactions(txs: Iterable[Transaction], dest) -> None:
    """Write transactions in the ingest CSV schema to a path or text stream."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_transactions(txs, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(COLUMNS)
    for tx in txs:
        writer.writerow(tx.to_row())


def serialize_transactions(txs: Iterable[Transaction]) -> bytes:
    buf = io.StringIO(newline="")
    write_transactions(txs, buf)
    return buf.getvalue().encode("utf-8")


def build_provenance(txs: Iterable[Transaction]) -> Provenance:
    """Group transactions by copy and order them into ownership chains.

    A continuity break (seller of the next sale is not the previous buyer)
    starts a new segment; the break is recorded, not raised.
    """
    grouped: dict[str, list[Transaction]] = defaultdict(list)
    for tx in txs:
        grouped[tx.moment_unique_id].append(tx)

    chains: dict[str, list[ProvenanceChain]] = {}
    breaks: list[ChainBreak] = []
    for uid in sorted(grouped):
        events = sorted(grouped[uid], key=lambda t: t.sort_key)
        segments = []
        start = 0
        for k in range(1, len(events)):
            prev, cur = events[k - 1], events[k]
            if prev.buyer_id != cur.seller_id:
                breaks.append(ChainBreak(uid, prev.transaction_id, cur.transaction_id,
                                         prev.buyer_id, cur.seller_id))
                segments.append(ProvenanceChain(uid, tuple(events[start:k]), start))
                start = k
        segments.append(ProvenanceChain(uid, tuple(events[start:]), start))
        chains[uid] = segments
    return Provenance(chains, breaks)


def derive_flips(chains) -> list[Flip]:
    """Emit one flip per consecutive pair of events within each chain segment.

    Flips are returned in chronological order of the sale.
    """
    if isinstance(chains, Provenance):
        segments = chains.segments()
    elif isinstance(chains, dict):
        segments = [s for v in chains.values() for s in (v if isinstance(v, list) else [v])]
    else:
        segments = list(chains)

    flips = []
    for seg in segments:
        ev = seg.events
        for k in range(len(ev) - 1):
            bought, sold = ev[k], ev[k + 1]
            flips.append(Flip(
                moment_unique_id=seg.moment_unique_id,
                seller_id=sold.seller_id,
                bought_price=bought.sale_price,
                sold_price=sold.sale_price,
                profit=sold.sale_price - bought.sale_price,
                trade_count=seg.offset + k + 1,
                sale_transaction=sold,
                purchase_transaction=bought,
            ))
    flips.sort(key=lambda f: f.sale_transaction.sort_key)
    return flips


def count_users(txs: Iterable[Transaction]) -> int:
    users = set()
    for tx in txs:
        users.add(tx.seller_id)
        users.add(tx.buyer_id)
    return len(users)


def _normalized_entropy(counts: Sequence[int], n_users: int) -> float:
    if n_users <= 2:
        return 0.0
    total = sum(counts)
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log(p)
    # clip floating noise so the score stays inside [0, 1]
    return min(max(h / math.log(n_users - 1), 0.0), 1.0)


def diversity(user: str, role: Role | str, txs: Sequence[Transaction],
              n_users: int | None = None) -> DiversityScore:
    """Normalized counterparty entropy of one user's sales or purchases."""
    role = Role(role) if not isinstance(role, Role) else role
    if n_users is None:
        n_users = count_users(txs)
    counterparts: Counter = Counter()
    known = False
    for tx in txs:
        if tx.seller_id == user or tx.buyer_id == user:
            known = True
        if role is Role.SELLER and tx.seller_id == user:
            counterparts[tx.buyer_id] += 1
        elif role is Role.BUYER and tx.buyer_id == user:
            counterparts[tx.seller_id] += 1
    if not known:
        raise UnknownUser(f"user {user!r} does not appear in the transactions")
    if not counterparts:
        raise NoEventsInRole(f"user {user!r} has no events as {role.value}")
    counts = list(counterparts.values())
    return DiversityScore(user, role, _normalized_entropy(counts, n_users), sum(counts), n_users)


def diversity_all(txs: Sequence[Transaction], role: Role | str) -> dict[str, DiversityScore]:
    """Diversity scores for every user with at least one event in ``role``."""
    role = Role(role) if not isinstance(role, Role) else role
    n_users = count_users(txs)
    per_user: dict[str, Counter] = defaultdict(Counter)
    for tx in txs:
        if role is Role.SELLER:
            per_user[tx.seller_id][tx.buyer_id] += 1
        else:
            per_user[tx.buyer_id][tx.seller_id] += 1
    return {
        u: DiversityScore(u, role, _normalized_entropy(list(c.values()), n_users),
                          sum(c.values()), n_users)
        for u, c in sorted(per_user.items())
    }
