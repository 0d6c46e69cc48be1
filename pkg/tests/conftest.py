from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from tradeflag.features import assemble_design
from tradeflag.ingest import PlayCategory, Transaction, build_provenance, derive_flips
from tradeflag.regress import fit_ols, predict, residuals
from tradeflag.rfcde import CdeForestParams, fit_forest
from tradeflag.synth import MarketConfig, generate_market

T0 = datetime(2021, 1, 1, tzinfo=timezone.utc)


def make_tx(uid="U#1", seller="A", buyer="B", price=10.0, t=0, tid=None, moment="M1",
            player="P1", category=PlayCategory.DUNK, limited=False, circ=100, set_id="S1"):
    return Transaction(
        moment_unique_id=uid, moment_id=moment, player_id=player, set_id=set_id,
        seller_id=seller, buyer_id=buyer, play_category=category, limited_flag=limited,
        circulation_count=circ, transaction_time=T0 + timedelta(seconds=t),
        transaction_id=tid or f"T{t:06d}", sale_price=price,
    )


@pytest.fixture
def tx_factory():
    return make_tx


@pytest.fixture(scope="session")
def market():
    """Default seeded market: 1,000 users, 2,000 moments, 50 planted anomalies."""
    return generate_market(MarketConfig(rng_seed=7))


@pytest.fixture(scope="session")
def market_design(market):
    txs, _ = market
    return assemble_design(derive_flips(build_provenance(txs)))


@pytest.fixture(scope="session")
def fitted_pipeline(market_design):
    """Regression plus residual forest on the default market."""
    d = market_design
    fit = fit_ols(d.X, d.y, d.columns)
    p_hat = predict(fit, d.X)
    forest = fit_forest(p_hat, residuals(fit, d.X, d.y), CdeForestParams(rng_seed=7))
    return fit, forest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
