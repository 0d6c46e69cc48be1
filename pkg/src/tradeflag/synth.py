"""Seeded synthetic marketplace with known profit model and planted anomalies."""

from __future__ import annotations

import json
import math
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import ConfigInvalid
from .ingest import PlayCategory, Transaction

CATEGORY_ORDER = [
    PlayCategory.ASSIST, PlayCategory.BLOCK, PlayCategory.DUNK, PlayCategory.HANDLES,
    PlayCategory.JUMP_SHOT, PlayCategory.LAYUP, PlayCategory.STEAL, PlayCategory.THREE_POINTER,
]

DEFAULT_COEFFICIENTS = {
    "intercept": 8.0,
    "circulation_count": -0.0004,
    "limited_edition": 6.0,
    "serial_number": -0.0002,
    "trade_count": -0.5,
    "bought_price": 0.05,
    "comparable_profit": 0.3,
    "circ_x_limited": -0.002,
    "comp_x_bought": 0.000002,
}

DEFAULT_CATEGORY_EFFECTS = {
    "Assist": 3.0,
    "Block": 0.5,
    "Dunk": -1.5,
    "Handles": 4.0,
    "Jump Shot": -3.0,
    "Layup": -2.5,
    "Steal": 0.0,
    "3 Pointer": 0.0,
}


@dataclass(frozen=True)
class AnomalySpec:
    count: int = 50
    inflation_factor_range: tuple[float, float] = (5.0, 50.0)
    collusion_pair_count: int = 10


@dataclass(frozen=True)
class BasePriceModel:
    median: float = 50.0
    log_sigma: float = 0.8
    minimum: float = 5.0
    copy_log_sigma: float = 0.3


@dataclass(frozen=True)
class MarketConfig:
    n_users: int = 1000
    n_moments: int = 2000
    n_players: int = 50
    n_transactions: int = 30_000
    copies_per_moment: float = 3.0
    time_span_days: float = 235.0
    start_time: str = "2020-07-27T00:00:00Z"
    activity_exponent: float = 1.5
    base_price: BasePriceModel = field(default_factory=BasePriceModel)
    noise_sigma: float = 5.0
    player_effect_sd: float = 2.0
    anomaly: AnomalySpec = field(default_factory=AnomalySpec)
    rng_seed: int = 7

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("n_users", "n_moments", "n_players", "n_transactions"):
            if getattr(self, name) < 1:
                raise ConfigInvalid(f"{name} must be >= 1")
        if self.n_users < 2:
            raise ConfigInvalid("n_users must be >= 2 (no self trades)")
        if self.copies_per_moment < 1:
            raise ConfigInvalid("copies_per_moment must be >= 1")
        if self.time_span_days <= 0:
            raise ConfigInvalid("time_span_days must be > 0")
        if self.activity_exponent <= 0:
            raise ConfigInvalid("activity_exponent must be > 0")
        if self.noise_sigma < 0:
            raise ConfigInvalid("noise_sigma must be >= 0")
        a = self.anomaly
        lo, hi = a.inflation_factor_range
        if not lo > 1 or hi < lo:
            raise ConfigInvalid("inflation_factor_range must satisfy 1 < low <= high")
        if a.count < 0:
            raise ConfigInvalid("anomaly count must be >= 0")
        if a.collusion_pair_count < 1:
            raise ConfigInvalid("collusion_pair_count must be >= 1")
        if _cohort_size(a.collusion_pair_count) > self.n_users:
            raise ConfigInvalid("not enough users for the requested collusion pairs")
        if 2 * a.count > self.n_transactions:
            raise ConfigInvalid("n_transactions too small for the anomaly count")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["anomaly"]["inflation_factor_range"] = list(self.anomaly.inflation_factor_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MarketConfig":
        d = dict(d)
        try:
            if "base_price" in d:
                d["base_price"] = BasePriceModel(**d["base_price"])
            if "anomaly" in d:
                a = dict(d["anomaly"])
                if "inflation_factor_range" in a:
                    a["inflation_factor_range"] = tuple(a["inflation_factor_range"])
                d["anomaly"] = AnomalySpec(**a)
            return cls(**d)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from None


@dataclass
class GroundTruth:
    chains: dict[str, list[str]]
    coefficients: dict[str, float]
    anomalous_transaction_ids: list[str]
    colluding_pairs: list[tuple[str, str]]
    total_flip_profit: float
    noise_sigma: float
    n_flips: int

    def to_dict(self) -> dict:
        return {
            "chains": self.chains,
            "coefficients": self.coefficients,
            "anomalous_transaction_ids": self.anomalous_transaction_ids,
            "colluding_pairs": [list(p) for p in self.colluding_pairs],
            "total_flip_profit": self.total_flip_profit,
            "noise_sigma": self.noise_sigma,
            "n_flips": self.n_flips,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(
            chains={k: list(v) for k, v in d["chains"].items()},
            coefficients=dict(d["coefficients"]),
            anomalous_transaction_ids=list(d["anomalous_transaction_ids"]),
            colluding_pairs=[tuple(p) for p in d["colluding_pairs"]],
            total_flip_profit=d["total_flip_profit"],
            noise_sigma=d["noise_sigma"],
            n_flips=d["n_flips"],
        )


def _cohort_size(pairs: int) -> int:
    m = 2
    while m * (m - 1) < pairs:
        m += 1
    return m


def _parse_start(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00")).astimezone(timezone.utc)


@dataclass
class _Copy:
    uid: str
    moment: int
    serial: int
    owner: int
    last_price: float | None = None
    n_trades: int = 0
    chain: list = field(default_factory=list)


def generate_market(config: MarketConfig | None = None):
    """Generate a transaction log and its ground truth.

    Honest resales follow ``bought + x . beta + N(0, sigma^2)`` where ``x``
    holds the regression features of the flip. Each planted anomaly is a
    two-step route: an honest sale into a colluder, then a resale to the
    colluder's partner at an inflated multiple of the honest resale price.

    Returns
    -------
    (list[Transaction], GroundTruth)
    """
    config = config or MarketConfig()
    config.validate()
    rng = np.random.default_rng(config.rng_seed)
    bp = config.base_price

    users = [f"U{i:05d}" for i in range(1, config.n_users + 1)]
    players = [f"P{i:03d}" for i in range(1, config.n_players + 1)]
    activity = rng.pareto(config.activity_exponent, config.n_users) + 1.0
    activity /= activity.sum()

    player_effect = rng.normal(0.0, config.player_effect_sd, config.n_players)
    player_effect[0] = 0.0  # lexicographically first player is the baseline

    n_m = config.n_moments
    m_player = rng.integers(0, config.n_players, n_m)
    m_set = rng.integers(1, 11, n_m)
    m_cat = rng.integers(0, len(CATEGORY_ORDER), n_m)
    m_limited = rng.random(n_m) < 0.3
    m_circ = np.where(m_limited, rng.integers(50, 1000, n_m), rng.integers(1000, 15000, n_m))
    m_base = np.maximum(bp.median * np.exp(rng.normal(0.0, bp.log_sigma, n_m)), bp.minimum)

    copies: list[_Copy] = []
    for m in range(n_m):
        k = 1 + rng.poisson(config.copies_per_moment - 1.0)
        k = min(k, int(m_circ[m]))
        serials = np.sort(rng.choice(int(m_circ[m]), size=k, replace=False) + 1)
        for s in serials:
            owner = int(rng.choice(config.n_users, p=activity))
            copies.append(_Copy(f"M{m + 1:05d}#{int(s)}", m, int(s), owner))

    spec = config.anomaly
    cohort_n = _cohort_size(spec.collusion_pair_count)
    cohort = rng.choice(config.n_users, size=cohort_n, replace=False)
    all_pairs = [(int(a), int(b)) for a in cohort for b in cohort if a != b]
    pick = rng.choice(len(all_pairs), size=spec.collusion_pair_count, replace=False)
    pairs = [all_pairs[i] for i in sorted(pick)]

    n_tx = config.n_transactions
    anomaly_starts: set[int] = set()
    if spec.count:
        first = n_tx // 10
        slots = np.arange(first, n_tx - 1, 2)
        if slots.size < spec.count:
            slots = np.arange(0, n_tx - 1, 2)
        anomaly_starts = set(int(s) for s in rng.choice(slots, size=spec.count, replace=False))

    mean_gap = config.time_span_days * 86400.0 / n_tx
    gaps = rng.integers(1, max(2, int(2 * mean_gap)), n_tx)
    offsets = np.cumsum(gaps)
    start = _parse_start(config.start_time)

    beta = DEFAULT_COEFFICIENTS
    cat_eff = DEFAULT_CATEGORY_EFFECTS
    history: dict[int, deque] = defaultdict(lambda: deque(maxlen=10))

    txs: list[Transaction] = []
    anomalous: list[str] = []
    flip_profits: list[float] = []

    def honest_profit(c: _Copy) -> float:
        m = c.moment
        hist = history[m]
        comp = sum(hist) / len(hist) if hist else 0.0
        circ, lim = float(m_circ[m]), float(m_limited[m])
        bought = c.last_price
        mean = (beta["intercept"]
                + beta["circulation_count"] * circ
                + beta["limited_edition"] * lim
                + beta["serial_number"] * c.serial
                + beta["trade_count"] * c.n_trades
                + beta["bought_price"] * bought
                + beta["comparable_profit"] * comp
                + beta["circ_x_limited"] * circ * lim
                + beta["comp_x_bought"] * comp * bought
                + cat_eff[CATEGORY_ORDER[m_cat[m]].value]
                + player_effect[m_player[m]])
        return mean + rng.normal(0.0, config.noise_sigma)

    def first_price(c: _Copy) -> float:
        return max(1.0, round(float(m_base[c.moment] * math.exp(rng.normal(0.0, bp.copy_log_sigma))), 2))

    def record(c: _Copy, buyer: int, price: float, k: int) -> Transaction:
        m = c.moment
        tx = Transaction(
            moment_unique_id=c.uid,
            moment_id=f"M{m + 1:05d}",
            player_id=players[m_player[m]],
            set_id=f"S{int(m_set[m]):02d}",
            seller_id=users[c.owner],
            buyer_id=users[buyer],
            play_category=CATEGORY_ORDER[m_cat[m]],
            limited_flag=bool(m_limited[m]),
            circulation_count=int(m_circ[m]),
            transaction_time=start + timedelta(seconds=int(offsets[k])),
            transaction_id=f"T{k + 1:07d}",
            sale_price=price,
        )
        if c.last_price is not None:
            profit = price - c.last_price
            history[m].append(profit)
            flip_profits.append(profit)
        c.owner = buyer
        c.last_price = price
        c.n_trades += 1
        c.chain.append(tx.transaction_id)
        txs.append(tx)
        return tx

    def draw_buyer(exclude: int) -> int:
        while True:
            b = int(rng.choice(config.n_users, p=activity))
            if b != exclude:
                return b

    def honest_sale(c: _Copy, buyer: int, k: int) -> None:
        if c.last_price is None:
            price = first_price(c)
        else:
            price = max(0.0, round(c.last_price + honest_profit(c), 2))
        record(c, buyer, price, k)

    k = 0
    n_anom = 0
    lo, hi = spec.inflation_factor_range
    while k < n_tx:
        if k in anomaly_starts:
            seller, partner = pairs[n_anom % len(pairs)]
            n_anom += 1
            while True:
                c = copies[int(rng.integers(0, len(copies)))]
                if c.owner != seller:
                    break
            honest_sale(c, seller, k)
            factor = rng.uniform(lo, hi)
            honest_resale = max(1.0, c.last_price + honest_profit(c))
            tx = record(c, partner, round(factor * honest_resale, 2), k + 1)
            anomalous.append(tx.transaction_id)
            k += 2
            continue
        c = copies[int(rng.integers(0, len(copies)))]
        honest_sale(c, draw_buyer(c.owner), k)
        k += 1

    coefficients = dict(beta)
    for cat, eff in cat_eff.items():
        if cat != PlayCategory.THREE_POINTER.value:
            coefficients[f"play_category[{cat}]"] = eff
    for p, eff in zip(players[1:], player_effect[1:]):
        coefficients[f"player[{p}]"] = float(eff)

    truth = GroundTruth(
        chains={c.uid: list(c.chain) for c in sorted(copies, key=lambda c: c.uid) if c.chain},
        coefficients=coefficients,
        anomalous_transaction_ids=anomalous,
        colluding_pairs=[(users[a], users[b]) for a, b in pairs],
        total_flip_profit=math.fsum(flip_profits),
        noise_sigma=config.noise_sigma,
        n_flips=len(flip_profits),
    )
    return txs, truth
