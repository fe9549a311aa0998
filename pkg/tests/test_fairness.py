import numpy as np
import pytest

from conftest import random_grouped
from faircca.cca import solve_cca, solve_group_cca
from faircca.errors import GroupMismatch, SamePair
from faircca.fairness import (
    FairnessReport,
    PenaltyKind,
    column_errors,
    component_metrics,
    disparity_error,
    disparity_errors,
    fairness_report,
    matrix_metrics,
    pairwise_delta,
    percentage_change,
)
from faircca.manifold import make_gram, random_feasible
from faircca.optim import OptimizerConfig, fit
from faircca.synth import make_synthetic_grouped, benchmark_profile


def feasible_pair(data, rng, R=2, ridge=0.0):
    return (random_feasible((data.X.shape[1], R), make_gram(data.X, ridge), rng),
            random_feasible((data.Y.shape[1], R), make_gram(data.Y, ridge), rng))


class TestPenalty:
    @pytest.mark.parametrize("kind", ["abs", "square"])
    def test_even_and_zero(self, kind):
        p = PenaltyKind.parse(kind)
        assert p.phi(0.0) == 0.0
        assert p.phi(1.7) == p.phi(-1.7)

    def test_exponential_derivative(self):
        p = PenaltyKind.parse("exp")
        assert p.dphi(0.3) == p.phi(0.3)

    def test_absolute_subgradient_at_zero(self):
        assert PenaltyKind.ABSOLUTE.dphi(0.0) == 0.0


class TestDisparity:
    def test_self_optimum(self, rng):
        d = random_grouped(1)
        opts = solve_group_cca(d, 2, ridge=0.0)
        # Evaluate each group on data for which its own optimum is feasible.
        for k, o in enumerate(opts):
            xk, yk = d.group(k)
            sub = type(d)(xk, yk, np.zeros(len(xk), dtype=int))
            assert disparity_error(0, o.U, o.V, sub, [o]) == pytest.approx(0.0, abs=1e-10)

    def test_single_group_global_cca(self, rng):
        d = random_grouped(2, n_per_group=(80,))
        opts = solve_group_cca(d, 2)
        sol = solve_cca(d.X, d.Y, 2)
        assert disparity_error(0, sol.U, sol.V, d, opts) == pytest.approx(0.0, abs=1e-10)

    def test_trace_oracle(self, rng):
        d = random_grouped(3)
        opts = solve_group_cca(d, 2)
        U, V = feasible_pair(d, rng)
        for k in range(2):
            xk, yk = d.group(k)
            want = opts[k].local_value - np.trace(U.T @ xk.T @ yk @ V)
            assert disparity_error(k, U, V, d, opts) == pytest.approx(want, abs=1e-10)

    def test_bad_group(self, rng):
        d = random_grouped(3)
        opts = solve_group_cca(d, 2)
        U, V = feasible_pair(d, rng)
        with pytest.raises(GroupMismatch):
            disparity_error(5, U, V, d, opts)


class TestPairwise:
    def test_equal_errors(self):
        e = [0.4, 0.4]
        assert pairwise_delta(0, 1, e, "abs") == 0.0
        assert pairwise_delta(0, 1, e, "square") == 0.0
        assert pairwise_delta(0, 1, e, "exp") == 1.0

    def test_arithmetic(self):
        assert pairwise_delta(0, 1, [0.0, 2.0], "square") == 4.0
        assert pairwise_delta(0, 1, [3.0, 0.0], "abs") == 3.0
        assert pairwise_delta(0, 1, [3.0, 0.0], "exp") == pytest.approx(np.exp(3.0))

    def test_same_pair(self):
        with pytest.raises(SamePair):
            pairwise_delta(1, 1, [0.0, 1.0], "abs")

    @pytest.mark.parametrize("kind", ["abs", "square"])
    def test_symmetric_and_shift_invariant(self, rng, kind):
        e = rng.standard_normal(4)
        for k in range(4):
            for s in range(4):
                if k != s:
                    assert pairwise_delta(k, s, e, kind) == pytest.approx(pairwise_delta(s, k, e, kind))
                    assert pairwise_delta(k, s, e + 3.3, kind) == pytest.approx(pairwise_delta(k, s, e, kind))


class TestComponentMetrics:
    def test_single_group(self, rng):
        d = random_grouped(4, n_per_group=(60,))
        opts = solve_group_cca(d, 2)
        U, V = feasible_pair(d, rng)
        _, dmax, dsum = component_metrics(U, V, d, opts)
        np.testing.assert_array_equal(dmax, 0.0)
        np.testing.assert_array_equal(dsum, 0.0)

    def test_two_groups_sum_is_twice_max(self, rng):
        d = random_grouped(5)
        opts = solve_group_cca(d, 2)
        U, V = feasible_pair(d, rng)
        _, dmax, dsum = component_metrics(U, V, d, opts)
        np.testing.assert_array_equal(dsum, 2 * dmax)

    def test_sum_dominates_max(self, rng):
        d = random_grouped(6, n_per_group=(30, 30, 40))
        opts = solve_group_cca(d, 2)
        U, V = feasible_pair(d, rng)
        _, dmax, dsum = component_metrics(U, V, d, opts)
        assert np.all(dmax >= 0) and np.all(dsum >= dmax)

    def test_fairness_condition(self, rng):
        d = random_grouped(7)
        opts = solve_group_cca(d, 2)
        U, V = feasible_pair(d, rng)
        e = column_errors(U, V, d, opts)
        # Shift one group's local optimum so both groups tie on column 0.
        o1 = opts[1]
        tied = [opts[0], type(o1)(o1.k, o1.U, o1.V, o1.rho + np.array([e[0, 0] - e[1, 0], 0.0]))]
        _, _, dsum = component_metrics(U, V, d, tied)
        assert dsum[0] < 1e-10 and dsum[1] > 1e-6

    def test_cca_more_disparate_than_sf(self):
        d = make_synthetic_grouped(benchmark_profile(0))
        opts = solve_group_cca(d, 2)
        cca = fit(d, OptimizerConfig(method="cca"), opts).report
        sf = fit(d, OptimizerConfig(method="sf_cca", lam=10.0, eta0=2e-2), opts).report
        assert cca.delta_sum[0] > sf.delta_sum[0]


class TestMatrixLemma:
    def test_lemma_on_random_feasible(self, rng):
        d = random_grouped(8, n_per_group=(30, 30, 40))
        opts = solve_group_cca(d, 2, ridge=0.0)
        for _ in range(20):
            U, V = feasible_pair(d, rng)
            rho_r, dmax_r, dsum_r = component_metrics(U, V, d, opts)
            rho, dmax, dsum = matrix_metrics(U, V, d, opts)
            assert rho == pytest.approx(rho_r.mean(), abs=1e-12)
            assert dmax <= dmax_r.sum() + 1e-12
            assert dsum <= dsum_r.sum() + 1e-12

    def test_matrix_errors_sum_columns(self, rng):
        d = random_grouped(9)
        opts = solve_group_cca(d, 2)
        U, V = feasible_pair(d, rng)
        np.testing.assert_allclose(column_errors(U, V, d, opts).sum(1), disparity_errors(U, V, d, opts))


def _report(rho, dsum):
    rho = np.atleast_1d(rho)
    dsum = np.atleast_1d(dsum)
    return FairnessReport(rho, dsum / 2, dsum, rho.mean(), 0.0, 0.0, np.zeros(2))


class TestPercentageChange:
    def test_identical(self, rng):
        d = random_grouped(10)
        opts = solve_group_cca(d, 2)
        U, V = feasible_pair(d, rng)
        rep = fairness_report(U, V, d, opts)
        pct = percentage_change(rep, rep)
        assert all(v == 0 for vals in pct.values() for v in vals)

    def test_reference_rho_row(self):
        pct = percentage_change(_report(0.7533, 3.3802), _report(0.7309, 2.2722))
        # Reported to four decimals from unrounded correlations; rounding of
        # the inputs to 4 places moves the result by up to ~0.013 points.
        assert pct["rho"][0] == pytest.approx(-2.9710, abs=0.015)

    def test_reference_delta_sum_row(self):
        pct = percentage_change(_report(0.7533, 3.3802), _report(0.7309, 2.2722))
        assert pct["delta_sum"][0] == pytest.approx(32.7792, abs=1e-3)

    def test_zero_baseline_is_null(self):
        pct = percentage_change(_report(0.5, 0.0), _report(0.4, 0.1))
        assert pct["delta_sum"] == [None]
