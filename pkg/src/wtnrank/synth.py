"""Seeded gravity-model trade fixtures.

Flow values follow a crude gravity law (mass * mass / distance) with
lognormal noise, so synthetic networks have the heavy-tailed, asymmetric
texture of real trade data while staying fully deterministic per seed.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .trade_data import (
    CountryRegistry,
    MoneyMatrixSet,
    ProductRegistry,
    SITC1_NAMES,
    TradeFlowRecord,
    money_from_records,
)

DEFAULT_COUNTRIES = 12
DEFAULT_PRODUCTS = 4
DEFAULT_YEAR = 2018
DEFAULT_DENSITY = 0.75


def synth_country_ids(n: int) -> list[str]:
    """Deterministic alpha-3 style ids: SAA, SAB, ... (S for synthetic)."""
    if not 1 <= n <= 26 * 26:
        raise ValidationError(f"country count must be in [1, 676], got {n}")
    alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    return [f"S{alphabet[i // 26]}{alphabet[i % 26]}" for i in range(n)]


def gravity_money_set(seed: int, n_countries: int = DEFAULT_COUNTRIES,
                      n_products: int = DEFAULT_PRODUCTS, year: int = DEFAULT_YEAR,
                      density: float = DEFAULT_DENSITY) -> MoneyMatrixSet:
    """Generate a synthetic multiproduct trade network.

    ``density`` is the probability that a directed country pair trades a
    given product; missing links leave genuinely dangling columns in the
    Google matrix, which the tests rely on.
    """
    if n_countries < 2:
        raise ValidationError("need at least two countries")
    if not 1 <= n_products <= len(SITC1_NAMES):
        raise ValidationError(f"product count must be in [1, {len(SITC1_NAMES)}]")
    if not 0.0 < density <= 1.0:
        raise ValidationError(f"density must be in (0, 1], got {density}")

    rng = np.random.default_rng(seed)
    ids = synth_country_ids(n_countries)
    codes = sorted(SITC1_NAMES)[:n_products]

    mass = rng.lognormal(mean=0.0, sigma=1.2, size=n_countries)
    product_weight = rng.lognormal(mean=0.0, sigma=0.8, size=n_products)
    distance = rng.uniform(0.5, 2.5, size=(n_countries, n_countries))
    distance = (distance + distance.T) / 2.0

    records = []
    for p, code in enumerate(codes):
        noise = rng.lognormal(mean=0.0, sigma=0.5, size=(n_countries, n_countries))
        linked = rng.random((n_countries, n_countries)) < density
        for i in range(n_countries):  # exporter
            for j in range(n_countries):  # importer
                if i == j or not linked[i, j]:
                    continue
                value = product_weight[p] * mass[i] * mass[j] / distance[i, j]
                # whole USD, as in real reporting; integer values keep merge
                # sums exact in float64
                value = float(round(value * noise[i, j] * 1e7))
                if value > 0.0:
                    records.append(TradeFlowRecord(year, ids[i], ids[j], code, value))
    if not records:
        raise ValidationError("synthetic parameters produced an empty network")

    countries = CountryRegistry.from_ids(ids)
    products = ProductRegistry.from_codes(codes)
    return money_from_records(records, year, countries, products)
