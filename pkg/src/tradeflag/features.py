"""Design matrix for the expected-profit regression."""

from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import SchemaMismatch, UnknownCategory, UnknownPlayer
from .ingest import Flip, PlayCategory

COMPARABLE_WINDOW = 10
CATEGORY_BASELINE = PlayCategory.THREE_POINTER

NUMERIC_COLUMNS = (
    "intercept",
    "circulation_count",
    "limited_edition",
    "serial_number",
    "trade_count",
    "bought_price",
    "comparable_profit",
    "circ_x_limited",
    "comp_x_bought",
)


def serial_number_of(moment_unique_id: str) -> int:
    """Serial number encoded as the integer after the last ``#`` of the copy id.

    Copies without an encoded serial get 0.
    """
    head, sep, tail = moment_unique_id.rpartition("#")
    if sep and tail.isdigit():
        return int(tail)
    return 0


@dataclass(frozen=True)
class FeatureRow:
    circulation_count: int
    limited_edition: int
    serial_number: int
    play_category: PlayCategory
    player_id: str
    trade_count: int
    bought_price: float
    comparable_profit: float
    cold_start: bool
    response_profit: float

    @property
    def circ_x_limited(self) -> float:
        return float(self.circulation_count * self.limited_edition)

    @property
    def comp_x_bought(self) -> float:
        return self.comparable_profit * self.bought_price


@dataclass(frozen=True)
class EncodingSchema:
    players: tuple[str, ...]
    player_baseline: str
    categories: tuple[PlayCategory, ...] = tuple(c for c in PlayCategory if c is not CATEGORY_BASELINE)
    category_baseline: PlayCategory = CATEGORY_BASELINE

    @classmethod
    def from_flips(cls, flips: Sequence[Flip]) -> "EncodingSchema":
        players = tuple(sorted({f.sale_transaction.player_id for f in flips}))
        if not players:
            raise UnknownPlayer("cannot build a schema without any flips")
        return cls(players=players, player_baseline=players[0])

    @property
    def player_levels(self) -> tuple[str, ...]:
        return tuple(p for p in self.players if p != self.player_baseline)

    @property
    def columns(self) -> list[str]:
        cols = list(NUMERIC_COLUMNS)
        cols += [f"play_category[{c.value}]" for c in self.categories]
        cols += [f"player[{p}]" for p in self.player_levels]
        return cols

    def to_dict(self) -> dict:
        return {
            "columns": self.columns,
            "players": list(self.players),
            "player_baseline": self.player_baseline,
            "categories": [c.value for c in self.categories],
            "category_baseline": self.category_baseline.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncodingSchema":
        schema = cls(
            players=tuple(d["players"]),
            player_baseline=d["player_baseline"],
            categories=tuple(PlayCategory.parse(c) for c in d["categories"]),
            category_baseline=PlayCategory.parse(d["category_baseline"]),
        )
        if "columns" in d and list(d["columns"]) != schema.columns:
            raise SchemaMismatch("serialized column list does not match the schema")
        return schema

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EncodingSchema":
        return cls.from_dict(json.loads(text))

    def encode(self, row: FeatureRow) -> np.ndarray:
        """One design-matrix row for ``row``."""
        return _encode_rows([row], self)[0]


def comparable_profit(flip: Flip, history: Sequence[Flip]) -> tuple[float, bool]:
    """Mean profit of the last (up to) 10 prior flips of the same parent moment.

    Returns ``(value, cold_start)``; an empty history gives ``(0.0, True)``.
    """
    prior = [h for h in history
             if h.moment_id == flip.moment_id and h.sale_time < flip.sale_time]
    if not prior:
        return 0.0, True
    prior.sort(key=lambda h: h.sale_transaction.sort_key)
    window = prior[-COMPARABLE_WINDOW:]
    return sum(h.profit for h in window) / len(window), False


def comparable_profits(flips: Sequence[Flip]) -> tuple[np.ndarray, np.ndarray]:
    """Comparable profit for every flip, using strictly earlier sales only.

    Returns arrays aligned with ``flips``: the values and the cold-start mask.
    """
    groups: dict[str, list[int]] = defaultdict(list)
    for i, f in enumerate(flips):
        groups[f.moment_id].append(i)
    values = np.zeros(len(flips))
    cold = np.zeros(len(flips), dtype=bool)
    for idx in groups.values():
        idx.sort(key=lambda i: flips[i].sale_transaction.sort_key)
        window: deque[float] = deque(maxlen=COMPARABLE_WINDOW)
        j = 0
        for i in idx:
            t = flips[i].sale_time
            while j < len(idx) and flips[idx[j]].sale_time < t:
                window.append(flips[idx[j]].profit)
                j += 1
            if window:
                values[i] = sum(window) / len(window)
            else:
                cold[i] = True
    return values, cold


def feature_rows(flips: Sequence[Flip]) -> list[FeatureRow]:
    comp, cold = comparable_profits(flips)
    rows = []
    for f, c, cs in zip(flips, comp, cold):
        tx = f.sale_transaction
        rows.append(FeatureRow(
            circulation_count=tx.circulation_count,
            limited_edition=int(tx.limited_flag),
            serial_number=serial_number_of(f.moment_unique_id),
            play_category=tx.play_category,
            player_id=tx.player_id,
            trade_count=f.trade_count,
            bought_price=f.bought_price,
            comparable_profit=float(c),
            cold_start=bool(cs),
            response_profit=f.profit,
        ))
    return rows


def _encode_rows(rows: Sequence[FeatureRow], schema: EncodingSchema) -> np.ndarray:
    cat_col = {c: len(NUMERIC_COLUMNS) + k for k, c in enumerate(schema.categories)}
    base_players = len(NUMERIC_COLUMNS) + len(schema.categories)
    player_col = {p: base_players + k for k, p in enumerate(schema.player_levels)}
    known_players = set(schema.players)

    X = np.zeros((len(rows), len(schema.columns)))
    for i, r in enumerate(rows):
        X[i, :len(NUMERIC_COLUMNS)] = (
            1.0,
            r.circulation_count,
            r.limited_edition,
            r.serial_number,
            r.trade_count,
            r.bought_price,
            r.comparable_profit,
            r.circ_x_limited,
            r.comp_x_bought,
        )
        if r.play_category is not schema.category_baseline:
            if r.play_category not in cat_col:
                raise UnknownCategory(f"play category {r.play_category.value!r} not in schema")
            X[i, cat_col[r.play_category]] = 1.0
        if r.player_id not in known_players:
            raise UnknownPlayer(f"player {r.player_id!r} not in schema vocabulary")
        if r.player_id != schema.player_baseline:
            X[i, player_col[r.player_id]] = 1.0
    return X


@dataclass
class Design:
    X: np.ndarray
    y: np.ndarray
    columns: list[str]
    flips: list[Flip] = field(repr=False)
    rows: list[FeatureRow] = field(repr=False)

    @property
    def cold_start(self) -> np.ndarray:
        return np.array([r.cold_start for r in self.rows], dtype=bool)

    def __iter__(self):
        # allows ``X, y = assemble_design(...)``
        return iter((self.X, self.y))


def assemble_design(flips: Sequence[Flip], schema: EncodingSchema | None = None) -> Design:
    """Build the regression design matrix and profit response.

    Rows follow the chronological order of the sales. When ``schema`` is
    omitted one is derived from the flips.
    """
    flips = sorted(flips, key=lambda f: f.sale_transaction.sort_key)
    if schema is None:
        schema = EncodingSchema.from_flips(flips)
    rows = feature_rows(flips)
    X = _encode_rows(rows, schema)
    y = np.array([r.response_profit for r in rows], dtype=float)
    return Design(X=X, y=y, columns=schema.columns, flips=list(flips), rows=rows)
