import numpy as np
import pytest
from conftest import random_money_set, small_money_set

from wtnrank import (
    COUNTRY_PRODUCT,
    CountryRegistry,
    GLOBAL_PRODUCT,
    LABOR_COST,
    Perturbation,
    ProductRegistry,
    RANK_BASED,
    TradeFlowRecord,
    VOLUME_BASED,
    ValidationError,
    balance,
    balance_report,
    balance_sensitivity,
    labor_cost_matrix,
    money_from_records,
    money_sets_equal,
    perturb_money,
)


def rec(exp, imp, prod, value):
    return TradeFlowRecord(2018, exp, imp, prod, value)


def two_country(x=7.0, y=3.0, product="0"):
    return money_from_records(
        [rec("AAA", "BBB", product, x), rec("BBB", "AAA", product, y)], 2018)


class TestBalance:
    def test_zero_when_probabilities_equal(self):
        report = balance([0.2, 0.8], [0.2, 0.8], ["AAA", "BBB"], VOLUME_BASED, 2018)
        np.testing.assert_array_equal(report.balances, [0.0, 0.0])

    def test_pure_exporter_is_one(self):
        report = balance([0.6, 0.4], [0.0, 1.0], ["AAA", "BBB"], VOLUME_BASED, 2018)
        assert report.value("AAA") == 1.0

    def test_absent_country_omitted(self):
        report = balance([0.5, 0.0, 0.5], [0.4, 0.0, 0.6],
                         ["AAA", "BBB", "CCC"], VOLUME_BASED, 2018)
        assert report.countries == ("AAA", "CCC")

    def test_bounds(self):
        mm = random_money_set(21, max_countries=10)
        for desc in (RANK_BASED, VOLUME_BASED):
            report = balance_report(mm, desc)
            assert np.all(report.balances >= -1.0) and np.all(report.balances <= 1.0)

    @pytest.mark.parametrize("description", [RANK_BASED, VOLUME_BASED])
    def test_two_country_antisymmetry_exact(self, description):
        report = balance_report(two_country(9.25, 2.5), description)
        b = dict(zip(report.countries, report.balances))
        assert b["AAA"] == -b["BBB"]

    def test_unknown_description(self):
        with pytest.raises(ValidationError):
            balance_report(two_country(), "other")


class TestPerturb:
    def test_zero_magnitude_is_identity(self):
        mm = random_money_set(22, max_countries=8)
        out = perturb_money(mm, Perturbation(GLOBAL_PRODUCT, product=mm.products.codes[0]), 0.0)
        assert money_sets_equal(mm, out)

    def test_global_product_scales_single_entry(self):
        mm = money_from_records(
            [rec("AAA", "BBB", "3", 100.0), rec("AAA", "BBB", "7", 50.0)], 2018)
        out = perturb_money(mm, Perturbation(GLOBAL_PRODUCT, product="3"), 0.1)
        assert out.matrix_for("3").toarray().max() == pytest.approx(110.0, rel=1e-15)
        assert np.array_equal(out.matrix_for("7").toarray(), mm.matrix_for("7").toarray())

    def test_labor_cost_scales_target_columns(self):
        mm = small_money_set(23, 4, 2, density=1.0)
        target = mm.countries.ids[0]
        out = perturb_money(mm, Perturbation(LABOR_COST, target_country=target), 0.05)
        j = mm.countries.index_of(target)
        for before, after in zip(mm.matrices, out.matrices):
            b, a = before.toarray(), after.toarray()
            np.testing.assert_allclose(a[:, j], b[:, j] * 1.05, rtol=1e-15)
            mask = np.ones(b.shape[1], dtype=bool)
            mask[j] = False
            assert np.array_equal(a[:, mask], b[:, mask])

    def test_country_product_shock_is_local(self):
        mm = small_money_set(24, 5, 3, density=1.0)
        target = mm.countries.ids[2]
        code = mm.products.codes[1]
        out = perturb_money(
            mm, Perturbation(COUNTRY_PRODUCT, product=code, target_country=target), 0.2)
        j = mm.countries.index_of(target)
        for p, (before, after) in enumerate(zip(mm.matrices, out.matrices)):
            b, a = before.toarray(), after.toarray()
            if mm.products.codes[p] != code:
                assert np.array_equal(a, b)
            else:
                np.testing.assert_allclose(a[:, j], b[:, j] * 1.2, rtol=1e-15)
                mask = np.ones(b.shape[1], dtype=bool)
                mask[j] = False
                assert np.array_equal(a[:, mask], b[:, mask])

    def test_unknown_product_or_country(self):
        mm = two_country()
        with pytest.raises(ValidationError):
            perturb_money(mm, Perturbation(GLOBAL_PRODUCT, product="9"), 0.1)
        with pytest.raises(ValidationError):
            perturb_money(mm, Perturbation(LABOR_COST, target_country="ZZZ"), 0.1)

    def test_magnitude_must_exceed_minus_one(self):
        mm = two_country()
        with pytest.raises(ValidationError):
            perturb_money(mm, Perturbation(GLOBAL_PRODUCT, product="0"), -1.0)

    def test_perturbation_kind_validation(self):
        with pytest.raises(ValidationError):
            Perturbation("weird")
        with pytest.raises(ValidationError):
            Perturbation(GLOBAL_PRODUCT)  # needs a product
        with pytest.raises(ValidationError):
            Perturbation(LABOR_COST, product="0", target_country="AAA")


class TestBalanceSensitivity:
    def test_zero_step_rejected(self):
        mm = two_country()
        with pytest.raises(ValidationError):
            balance_sensitivity(mm, Perturbation(GLOBAL_PRODUCT, product="0"),
                                VOLUME_BASED, step=0.0)

    def test_absent_product_gives_zero_derivatives(self):
        # product "1" is registered but carries no flows at all
        mm = money_from_records(
            [rec("AAA", "BBB", "0", 5.0), rec("BBB", "AAA", "0", 2.0)], 2018,
            countries=CountryRegistry.from_ids(["AAA", "BBB"]),
            products=ProductRegistry.from_codes(["0", "1"]))
        for desc in (RANK_BASED, VOLUME_BASED):
            report = balance_sensitivity(
                mm, Perturbation(GLOBAL_PRODUCT, product="1"), desc)
            np.testing.assert_array_equal(report.derivatives, 0.0)

    def test_two_country_volume_global_shock_cancels(self):
        # uniform scaling of the only product divides out of the balance
        report = balance_sensitivity(
            two_country(7.0, 3.0), Perturbation(GLOBAL_PRODUCT, product="0"),
            VOLUME_BASED)
        assert np.abs(report.derivatives).max() <= 1e-10

    @pytest.mark.parametrize("description", [RANK_BASED, VOLUME_BASED])
    def test_step_halving_ratio(self, description):
        mm = small_money_set(25, 7, 2, density=0.7)
        pert = Perturbation(GLOBAL_PRODUCT, product=mm.products.codes[0])
        d = {step: balance_sensitivity(mm, pert, description, step).derivatives
             for step in (0.02, 0.01, 0.005)}
        ratio = np.abs(d[0.02] - d[0.01]).sum() / np.abs(d[0.01] - d[0.005]).sum()
        assert 2.8 <= ratio <= 5.2

    def test_rank_based_reproducible_bitwise(self):
        mm = small_money_set(26, 6, 2)
        pert = Perturbation(COUNTRY_PRODUCT, product=mm.products.codes[0],
                            target_country=mm.countries.ids[1])
        a = balance_sensitivity(mm, pert, RANK_BASED)
        b = balance_sensitivity(mm, pert, RANK_BASED)
        assert np.array_equal(a.derivatives, b.derivatives)
        assert np.all(np.isfinite(a.derivatives))

    def test_diagonal_flag_marks_target(self):
        mm = small_money_set(27, 5, 1)
        target = mm.countries.ids[3]
        report = balance_sensitivity(
            mm, Perturbation(LABOR_COST, target_country=target), RANK_BASED)
        assert report.diagonal.sum() == 1
        assert report.countries[np.flatnonzero(report.diagonal)[0]] == target

    def test_global_shock_has_no_diagonal(self):
        mm = small_money_set(28, 4, 1)
        report = balance_sensitivity(
            mm, Perturbation(GLOBAL_PRODUCT, product=mm.products.codes[0]), RANK_BASED)
        assert not report.diagonal.any()


class TestLaborCostMatrix:
    def test_matches_one_at_a_time_calls(self):
        mm = small_money_set(29, 3, 2, density=1.0)
        table = labor_cost_matrix(mm, RANK_BASED)
        for j, target in enumerate(table.targets):
            single = balance_sensitivity(
                mm, Perturbation(LABOR_COST, target_country=target), RANK_BASED)
            assert single.countries == table.countries
            np.testing.assert_array_equal(table.derivatives[:, j], single.derivatives)

    def test_diagonal_reported_separately(self):
        mm = small_money_set(30, 4, 1)
        table = labor_cost_matrix(mm, RANK_BASED)
        diag = table.diagonal()
        assert set(diag) == set(table.targets)
        for target, value in diag.items():
            i = table.countries.index(target)
            j = table.targets.index(target)
            assert value == table.derivatives[i, j]

    def test_shock_on_isolated_country_is_noop(self):
        # DDD sits in the registry but trades nothing
        registry = CountryRegistry.from_ids(["AAA", "BBB", "CCC", "DDD"])
        mm = money_from_records(
            [rec("AAA", "BBB", "0", 4.0), rec("BBB", "CCC", "0", 3.0),
             rec("CCC", "AAA", "0", 2.0)], 2018,
            countries=registry, products=ProductRegistry.from_codes(["0"]))
        table = labor_cost_matrix(mm, VOLUME_BASED)
        j = table.targets.index("DDD")
        np.testing.assert_array_equal(table.derivatives[:, j], 0.0)
        assert "DDD" not in table.countries  # absent from the zero-trade report
