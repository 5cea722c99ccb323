"""Shared fixtures and seeded-network helpers."""

import numpy as np

from wtnrank import gravity_money_set


def random_money_set(seed, min_countries=3, max_countries=30, max_products=4):
    """Seeded random trade network with sizes drawn from the seed."""
    rng = np.random.default_rng(seed)
    n_c = int(rng.integers(min_countries, max_countries + 1))
    n_p = int(rng.integers(1, max_products + 1))
    density = float(rng.uniform(0.3, 0.9))
    return gravity_money_set(seed, n_c, n_p, density=density)


def small_money_set(seed, n_countries, n_products, density=0.8):
    return gravity_money_set(seed, n_countries, n_products, density=density)
