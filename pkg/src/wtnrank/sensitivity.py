"""Trade balances and their linear response to price and labor-cost shocks.

A shock multiplies selected money-matrix entries by (1 + magnitude); the
Google-matrix rebuild renormalizes columns, so product shocks and labor-cost
shocks share one code path. Derivatives are central finite differences of
the full pipeline (perturb, rebuild, re-rank, balance).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ValidationError
from .google_matrix import DEFAULT_DAMPING, DIRECT, INVERTED, build_google
from .ranks import DEFAULT_MAX_ITER, DEFAULT_TOL, pagerank
from .trade_data import MoneyMatrixSet, volume_probabilities

RANK_BASED = "rank-based"
VOLUME_BASED = "volume-based"

GLOBAL_PRODUCT = "global-product"
COUNTRY_PRODUCT = "country-product"
LABOR_COST = "labor-cost"

DEFAULT_STEP = 0.01


@dataclass(frozen=True)
class Perturbation:
    """A named multiplicative shock on the money matrices.

    kind:
      global-product  -- every flow of one product, worldwide
      country-product -- one product's outgoing flows of one country
      labor-cost      -- all outgoing flows of one country, every product
    """

    kind: str
    product: str | None = None
    target_country: str | None = None

    def __post_init__(self):
        if self.kind == GLOBAL_PRODUCT:
            ok = self.product is not None and self.target_country is None
        elif self.kind == COUNTRY_PRODUCT:
            ok = self.product is not None and self.target_country is not None
        elif self.kind == LABOR_COST:
            ok = self.product is None and self.target_country is not None
        else:
            raise ValidationError(f"unknown perturbation kind {self.kind!r}")
        if not ok:
            raise ValidationError(
                f"perturbation kind {self.kind!r} got product={self.product!r}, "
                f"target_country={self.target_country!r}"
            )


@dataclass(frozen=True, eq=False)
class BalanceReport:
    """Per-country trade balance in [-1, 1]; zero-trade countries are absent."""

    description: str
    year: int
    countries: tuple[str, ...]
    balances: np.ndarray

    def value(self, country: str) -> float:
        return float(self.balances[self.countries.index(country)])


@dataclass(frozen=True, eq=False)
class SensitivityReport:
    """Per-country derivative of the balance under one perturbation."""

    description: str
    perturbation: Perturbation
    step: float
    year: int
    countries: tuple[str, ...]
    derivatives: np.ndarray
    diagonal: np.ndarray  # True where the country is the perturbation target

    def value(self, country: str) -> float:
        return float(self.derivatives[self.countries.index(country)])


@dataclass(frozen=True, eq=False)
class LaborCostMatrix:
    """dB_c/dsigma_c' for every (affected country c, shocked country c')."""

    description: str
    step: float
    year: int
    countries: tuple[str, ...]
    targets: tuple[str, ...]
    derivatives: np.ndarray  # shape (len(countries), len(targets))

    def diagonal(self) -> dict[str, float]:
        """Self-sensitivities dB_c/dsigma_c, reported apart from the table."""
        out = {}
        for j, target in enumerate(self.targets):
            if target in self.countries:
                out[target] = float(self.derivatives[self.countries.index(target), j])
        return out


def balance(export_probs, import_probs, countries, description: str,
            year: int) -> BalanceReport:
    """(export - import) / (export + import), per country.

    Countries whose combined probability is zero are omitted from the
    report rather than treated as errors.
    """
    e = np.asarray(export_probs, dtype=float)
    i = np.asarray(import_probs, dtype=float)
    ids = tuple(countries)
    if e.shape != i.shape or e.shape != (len(ids),):
        raise ValidationError("probability vectors do not match the country list")
    if np.any(e < 0) or np.any(i < 0):
        raise ValidationError("probabilities must be nonnegative")
    present = (e + i) > 0.0
    values = (e[present] - i[present]) / (e[present] + i[present])
    kept = tuple(cid for cid, keep in zip(ids, present) if keep)
    return BalanceReport(description, year, kept, values)


def balance_report(mm: MoneyMatrixSet, description: str, *,
                   damping: float = DEFAULT_DAMPING, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER) -> BalanceReport:
    """Balance from either description: rank probabilities or raw volumes."""
    if description == RANK_BASED:
        p = pagerank(build_google(mm, DIRECT, damping), tol, max_iter)
        p_star = pagerank(build_google(mm, INVERTED, damping), tol, max_iter)
        return balance(p_star.country_probs, p.country_probs,
                       mm.countries.ids, description, mm.year)
    if description == VOLUME_BASED:
        vp = volume_probabilities(mm)
        return balance(vp.export_c, vp.import_c, mm.countries.ids, description, mm.year)
    raise ValidationError(f"unknown description {description!r}")


def perturb_money(mm: MoneyMatrixSet, perturbation: Perturbation,
                  magnitude: float) -> MoneyMatrixSet:
    """Scale the selected flows by (1 + magnitude); everything else untouched."""
    if magnitude <= -1.0:
        raise ValidationError(f"magnitude must exceed -1, got {magnitude}")
    factor = 1.0 + magnitude
    p_idx = None
    column_scaler = None
    if perturbation.product is not None:
        p_idx = mm.products.index_of(perturbation.product)
    if perturbation.target_country is not None:
        scale = np.ones(mm.n_countries)
        scale[mm.countries.index_of(perturbation.target_country)] = factor
        column_scaler = sparse.diags(scale)

    matrices = []
    for p, m in enumerate(mm.matrices):
        if perturbation.kind == GLOBAL_PRODUCT:
            scaled = (m * factor).tocsc() if p == p_idx else m
        elif perturbation.kind == COUNTRY_PRODUCT:
            scaled = (m @ column_scaler).tocsc() if p == p_idx else m
        else:  # labor-cost: every outgoing column of the target
            scaled = (m @ column_scaler).tocsc()
        matrices.append(scaled)
    return MoneyMatrixSet(tuple(matrices), mm.year, mm.countries, mm.products)


def balance_sensitivity(mm: MoneyMatrixSet, perturbation: Perturbation,
                        description: str, step: float = DEFAULT_STEP, *,
                        damping: float = DEFAULT_DAMPING, tol: float = DEFAULT_TOL,
                        max_iter: int = DEFAULT_MAX_ITER) -> SensitivityReport:
    """Central-difference derivative of every country's balance.

    Each side of the difference runs the full pipeline on the perturbed
    money matrices, so the result captures the network response, not just
    the direct flow change.
    """
    if step <= 0.0:
        raise ValidationError(f"step must be positive, got {step}")
    plus = balance_report(perturb_money(mm, perturbation, +step), description,
                          damping=damping, tol=tol, max_iter=max_iter)
    minus = balance_report(perturb_money(mm, perturbation, -step), description,
                           damping=damping, tol=tol, max_iter=max_iter)
    if plus.countries != minus.countries:
        # zero structure is scale invariant, so this only guards misuse
        common = [c for c in plus.countries if c in set(minus.countries)]
        plus_vals = np.array([plus.value(c) for c in common])
        minus_vals = np.array([minus.value(c) for c in common])
        countries = tuple(common)
    else:
        plus_vals, minus_vals = plus.balances, minus.balances
        countries = plus.countries
    derivatives = (plus_vals - minus_vals) / (2.0 * step)
    diagonal = np.array([c == perturbation.target_country for c in countries])
    return SensitivityReport(description, perturbation, step, mm.year,
                             countries, derivatives, diagonal)


def labor_cost_matrix(mm: MoneyMatrixSet, description: str,
                      step: float = DEFAULT_STEP, *,
                      damping: float = DEFAULT_DAMPING, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> LaborCostMatrix:
    """Labor-cost sensitivities for every shocked country in the registry."""
    targets = mm.countries.ids
    columns = []
    countries = None
    for target in targets:
        report = balance_sensitivity(
            mm, Perturbation(LABOR_COST, target_country=target), description,
            step, damping=damping, tol=tol, max_iter=max_iter)
        if countries is None:
            countries = report.countries
        elif report.countries != countries:
            raise ValidationError("labor-cost sweep changed the reported country set")
        columns.append(report.derivatives)
    return LaborCostMatrix(description, step, mm.year, countries, targets,
                           np.column_stack(columns))


def write_balance_csv(report: BalanceReport, dest) -> None:
    own = not hasattr(dest, "write")
    stream = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["country", "balance"])
        for cid, value in zip(report.countries, report.balances):
            writer.writerow([cid, repr(float(value))])
    finally:
        if own:
            stream.close()


def write_balance_json(report: BalanceReport, dest) -> None:
    payload = {
        "description": report.description,
        "year": report.year,
        "balances": [
            {"country": cid, "balance": float(value)}
            for cid, value in zip(report.countries, report.balances)
        ],
    }
    _write_json(payload, dest)


def write_sensitivity_csv(report: SensitivityReport, dest) -> None:
    own = not hasattr(dest, "write")
    stream = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["country", "derivative", "is_diagonal"])
        for cid, value, diag in zip(report.countries, report.derivatives, report.diagonal):
            writer.writerow([cid, repr(float(value)), "true" if diag else "false"])
    finally:
        if own:
            stream.close()


def write_sensitivity_json(report: SensitivityReport, dest) -> None:
    payload = {
        "description": report.description,
        "year": report.year,
        "step": report.step,
        "perturbation": {
            "kind": report.perturbation.kind,
            "product": report.perturbation.product,
            "target_country": report.perturbation.target_country,
        },
        "derivatives": [
            {"country": cid, "derivative": float(value), "is_diagonal": bool(diag)}
            for cid, value, diag in zip(report.countries, report.derivatives,
                                        report.diagonal)
        ],
    }
    _write_json(payload, dest)


def _write_json(payload, dest) -> None:
    own = not hasattr(dest, "write")
    stream = open(dest, "w", encoding="utf-8") if own else dest
    try:
        json.dump(payload, stream, indent=2, sort_keys=True)
        stream.write("\n")
    finally:
        if own:
            stream.close()
