import io

import numpy as np
import pytest
from conftest import small_money_set

from wtnrank import (
    DIRECT,
    INVERTED,
    ValidationError,
    build_google,
    merge_country_group,
    pagerank,
    reduce,
    strongest_links,
)
from wtnrank.regomax import write_dot, write_matrix_csv


def reduced_case(seed, n_c, n_p, n_actors, direction=DIRECT, density=0.7):
    mm = small_money_set(seed, n_c, n_p, density=density)
    g = build_google(mm, direction)
    selection = [(c, p) for c in mm.countries.ids[:n_actors] for p in mm.products.codes]
    return g, selection


def dense_oracle(g, selection):
    """G_rr + G_rs (I - G_ss)^-1 G_sr via explicit inversion."""
    full = g.effective_dense()
    idx = np.array([g.node_of(c, p) for c, p in selection])
    sc = np.setdiff1d(np.arange(full.shape[0]), idx)
    g_rr = full[np.ix_(idx, idx)]
    g_rs = full[np.ix_(idx, sc)]
    g_sr = full[np.ix_(sc, idx)]
    g_ss = full[np.ix_(sc, sc)]
    return g_rr + g_rs @ np.linalg.inv(np.eye(sc.size) - g_ss) @ g_sr


class TestReduce:
    def test_full_selection_is_identity_partition(self):
        g, _ = reduced_case(40, 4, 2, 2)
        selection = [g.node_pair(i) for i in range(g.n_nodes)]
        r = reduce(g, selection)
        np.testing.assert_array_equal(r.g_r, g.effective_dense())
        np.testing.assert_array_equal(r.g_pr, 0.0)
        np.testing.assert_array_equal(r.g_qr, 0.0)
        assert r.lambda_c is None
        assert r.series_terms == 0

    @pytest.mark.parametrize("seed", range(4))
    @pytest.mark.parametrize("direction", [DIRECT, INVERTED])
    def test_matches_dense_inverse(self, seed, direction):
        g, selection = reduced_case(seed, 8, 3, 2, direction)  # N=24, N_r=6
        r = reduce(g, selection)
        np.testing.assert_allclose(r.g_r, dense_oracle(g, selection), atol=1e-10)

    @pytest.mark.parametrize("seed", range(4))
    def test_decomposition_closure(self, seed):
        g, selection = reduced_case(seed + 50, 9, 3, 2)
        r = reduce(g, selection)
        assert np.abs(r.g_rr + r.g_pr + r.g_qr - r.g_r).max() <= 1e-10

    def test_four_actors_ten_products_is_forty_nodes(self):
        g, selection = reduced_case(45, 6, 10, 4, density=0.8)
        r = reduce(g, selection)
        assert r.n_nodes == 40
        np.testing.assert_allclose(r.g_r.sum(axis=0), 1.0, atol=1e-10)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_columns_sum_to_one(self, seed):
        g, selection = reduced_case(seed + 60, 10, 2, 5)  # 20 nodes, N_r=10
        r = reduce(g, selection)
        np.testing.assert_allclose(r.g_r.sum(axis=0), 1.0, atol=1e-10)
        assert r.g_r.min() >= -1e-12

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_pagerank_consistency(self, seed):
        g, selection = reduced_case(seed + 70, 10, 2, 5)
        r = reduce(g, selection)
        global_probs = pagerank(g, tol=1e-14).node_probs
        idx = np.array([g.node_of(c, p) for c, p in selection])
        restricted = global_probs[idx] / global_probs[idx].sum()
        x = np.full(idx.size, 1.0 / idx.size)
        for _ in range(100_000):
            y = r.g_r @ x
            y /= y.sum()
            if np.abs(y - x).sum() <= 1e-15:
                x = y
                break
            x = y
        assert np.abs(x - restricted).sum() <= 1e-6

    def test_lambda_strictly_inside_unit_interval(self):
        for seed in range(5):
            g, selection = reduced_case(seed + 80, 7, 2, 2)
            r = reduce(g, selection)
            assert 0.0 < r.lambda_c < 1.0

    def test_residual_diagnostics_recorded(self):
        g, selection = reduced_case(90, 6, 2, 2)
        r = reduce(g, selection)
        for key in ("solve", "eigen", "series_tail", "closure"):
            assert r.residuals[key] >= 0.0
        assert r.series_terms >= 1

    def test_duplicate_selection_rejected(self):
        g, selection = reduced_case(91, 4, 1, 2)
        with pytest.raises(ValidationError):
            reduce(g, selection + selection[:1])

    def test_unknown_node_rejected(self):
        g, _ = reduced_case(92, 4, 1, 2)
        with pytest.raises(ValidationError):
            reduce(g, [("NOPE", "0")])
        with pytest.raises(ValidationError):
            reduce(g, [])

    def test_labels_use_short_codes(self):
        mm = small_money_set(93, 5, 2, density=1.0)
        merged = merge_country_group(mm, set(mm.countries.ids[:2]), "GRP", short="EU")
        g = build_google(merged)
        selection = [("GRP", p) for p in merged.products.codes]
        r = reduce(g, selection)
        assert r.labels == tuple(f"EU{p}" for p in merged.products.codes)

    def test_ambiguous_short_codes_fall_back_to_ids(self):
        # SAA and SAB both shorten to SA; labels must stay distinct
        mm = small_money_set(94, 3, 1, density=1.0)
        g = build_google(mm)
        r = reduce(g, [("SAA", "0"), ("SAB", "0")])
        assert r.labels == ("SAA0", "SAB0")


class TestStrongestLinks:
    def test_diagonal_only_matrix_gives_no_edges(self):
        assert strongest_links(np.diag([1.0, 2.0, 3.0]), 4) == []

    def test_k1_known_argmax(self):
        m = np.array([
            [0.0, 0.9, 0.2],
            [0.7, 0.0, 0.3],
            [0.1, 0.05, 0.0],
        ])
        assert strongest_links(m, 1) == [(0, 1, 0.7), (1, 0, 0.9), (2, 1, 0.3)]

    @pytest.mark.parametrize("seed", [0, 1])
    def test_matches_bruteforce_top4(self, seed):
        rng = np.random.default_rng(seed)
        m = rng.random((40, 40)) * (rng.random((40, 40)) < 0.4)
        edges = strongest_links(m, 4)
        # oracle: stable argsort per column on the negated, diagonal-masked values
        expected = []
        for j in range(40):
            col = m[:, j].copy()
            col[j] = 0.0
            order = np.argsort(-col, kind="stable")
            top = [i for i in order if col[i] != 0.0][:4]
            expected.extend((j, int(i), float(m[i, j])) for i in top)
        assert edges == expected

    def test_fewer_than_k_emits_what_exists(self):
        m = np.zeros((3, 3))
        m[1, 0] = 0.4
        assert strongest_links(m, 4) == [(0, 1, 0.4)]

    def test_ties_break_toward_smaller_target(self):
        m = np.zeros((3, 3))
        m[1, 0] = 0.5
        m[2, 0] = 0.5
        assert strongest_links(m, 1) == [(0, 1, 0.5)]

    def test_k_must_be_positive(self):
        with pytest.raises(ValidationError):
            strongest_links(np.eye(2), 0)


class TestExports:
    def test_dot_output_structure(self):
        labels = ("AA0", "BB0")
        buf = io.StringIO()
        write_dot([(0, 1, 0.75)], labels, DIRECT, buf)
        text = buf.getvalue()
        assert text.startswith("//")
        assert "B imports from A" in text
        assert '"AA0" -> "BB0" [weight=0.75];' in text
        assert text.rstrip().endswith("}")

        buf = io.StringIO()
        write_dot([(0, 1, 0.75)], labels, INVERTED, buf)
        assert "B exports to A" in buf.getvalue()

    def test_matrix_csv_headers_and_values(self):
        buf = io.StringIO()
        write_matrix_csv(np.array([[0.0, 0.5], [1.0, 0.25]]), ("XX1", "YY1"), buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "node,XX1,YY1"
        assert lines[1] == "XX1,0.0,0.5"
        assert lines[2] == "YY1,1.0,0.25"
