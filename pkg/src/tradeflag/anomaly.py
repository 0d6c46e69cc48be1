"""Profit-above-expectation labeling of flips."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigInvalid, SchemaMismatch
from .ingest import Flip, format_time
from .regress import RegressionFit, predict
from .rfcde import CdeForest, predict_density, tail_probability

DEFAULT_THRESHOLD = 0.01
SUMMARY_QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


@dataclass(frozen=True)
class AnomalyLabel:
    flip: Flip
    predicted_profit: float
    realized_profit: float
    pae: float
    tail_prob: float
    threshold: float
    flagged: bool
    side: str = "upper"

    def to_record(self) -> dict:
        tx = self.flip.sale_transaction
        return {
            "transaction_id": tx.transaction_id,
            "moment_unique_id": self.flip.moment_unique_id,
            "moment_id": tx.moment_id,
            "player_id": tx.player_id,
            "seller_id": tx.seller_id,
            "buyer_id": tx.buyer_id,
            "transaction_time": format_time(tx.transaction_time),
            "bought_price": f"{self.flip.bought_price:.2f}",
            "sold_price": f"{self.flip.sold_price:.2f}",
            "predicted_profit": repr(self.predicted_profit),
            "realized_profit": repr(self.realized_profit),
            "pae": repr(self.pae),
            "tail_prob": repr(self.tail_prob),
            "threshold": repr(self.threshold),
            "flagged": "1" if self.flagged else "0",
        }


LABEL_FIELDS = [
    "transaction_id", "moment_unique_id", "moment_id", "player_id", "seller_id", "buyer_id",
    "transaction_time", "bought_price", "sold_price", "predicted_profit", "realized_profit",
    "pae", "tail_prob", "threshold", "flagged",
]


def _check_threshold(threshold):
    if not 0.0 <= threshold <= 1.0:
        raise ConfigInvalid(f"threshold {threshold} outside [0, 1]")


def _is_flagged(pae, tail, threshold, side):
    if side == "upper":
        return pae > 0 and tail < threshold
    if side == "lower":
        return pae < 0 and tail < threshold
    raise ConfigInvalid(f"unknown side {side!r}")


def label_flip(flip: Flip, row, fit: RegressionFit, forest: CdeForest,
               threshold: float = DEFAULT_THRESHOLD, side: str = "upper",
               train_index: int = -1) -> AnomalyLabel:
    """Label a single flip.

    ``row`` is the flip's design-matrix row under the fit's schema. With
    ``side="upper"`` the tail is Pr[r > pae]; ``"lower"`` tests losses with
    Pr[r < pae]. A flip that was itself a forest training point should pass
    its ``train_index`` so it is scored out-of-bag.
    """
    _check_threshold(threshold)
    row = np.asarray(row, dtype=float)
    if row.ndim != 1:
        raise SchemaMismatch("label_flip takes one design row")
    p_hat = predict(fit, row)
    pae = flip.profit - p_hat
    density = predict_density(forest, p_hat, train_index)
    upper = tail_probability(density, pae)
    tail = upper if side == "upper" else 1.0 - upper
    return AnomalyLabel(flip, p_hat, flip.profit, pae, tail, threshold,
                        _is_flagged(pae, tail, threshold, side), side)


@dataclass
class LabelSummary:
    n_flips: int
    n_flagged: int
    flag_rate: float
    threshold: float
    side: str
    pae_quantiles: dict
    n_positive_pae: int

    def to_dict(self) -> dict:
        return {
            "n_flips": self.n_flips,
            "n_flagged": self.n_flagged,
            "flag_rate": self.flag_rate,
            "threshold": self.threshold,
            "side": self.side,
            "n_positive_pae": self.n_positive_pae,
            "pae_quantiles": self.pae_quantiles,
        }


def label_all(flips: Sequence[Flip], X, fit: RegressionFit, forest: CdeForest,
              threshold: float = DEFAULT_THRESHOLD, side: str = "upper", train_index=None):
    """Vectorized :func:`label_flip` over every flip.

    ``train_index`` maps each flip to its row in the forest training data
    (-1 when absent); ``None`` scores every flip with the full forest.
    Returns ``(labels, summary)``.
    """
    _check_threshold(threshold)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] != len(flips):
        raise SchemaMismatch(f"{X.shape[0]} design rows for {len(flips)} flips")
    realized = np.array([f.profit for f in flips], dtype=float)
    p_hat = predict(fit, X) if len(flips) else np.zeros(0)
    pae = realized - p_hat
    if len(flips):
        upper = forest.tail_probabilities(p_hat, pae, train_index=train_index)
    else:
        upper = np.zeros(0)
    tail = upper if side == "upper" else 1.0 - upper
    labels = [
        AnomalyLabel(f, float(ph), float(r), float(e), float(tp), threshold,
                     _is_flagged(e, tp, threshold, side), side)
        for f, ph, r, e, tp in zip(flips, p_hat, realized, pae, tail)
    ]
    return labels, summarize(labels, threshold, side)


def summarize(labels: Sequence[AnomalyLabel], threshold: float, side: str = "upper") -> LabelSummary:
    n = len(labels)
    flagged = sum(lab.flagged for lab in labels)
    pae = np.array([lab.pae for lab in labels])
    quant = ({str(q): float(np.quantile(pae, q)) for q in SUMMARY_QUANTILES} if n else {})
    return LabelSummary(
        n_flips=n,
        n_flagged=int(flagged),
        flag_rate=flagged / n if n else 0.0,
        threshold=threshold,
        side=side,
        pae_quantiles=quant,
        n_positive_pae=int(np.sum(pae > 0)),
    )


def write_labels(labels: Sequence[AnomalyLabel], dest) -> None:
    """Write labels as CSV to a path or text stream."""
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_labels(labels, fh)
        return
    writer = csv.DictWriter(dest, fieldnames=LABEL_FIELDS, lineterminator="\n")
    writer.writeheader()
    for lab in labels:
        writer.writerow(lab.to_record())


def read_flagged_ids(source) -> set[str]:
    """Transaction ids with ``flagged == 1`` from a labels CSV."""
    if not hasattr(source, "read"):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_flagged_ids(fh)
    return {r["transaction_id"] for r in csv.DictReader(source) if r["flagged"] == "1"}


def labels_to_json(labels: Sequence[AnomalyLabel]) -> str:
    return json.dumps([lab.to_record() for lab in labels], indent=2, sort_keys=True)
