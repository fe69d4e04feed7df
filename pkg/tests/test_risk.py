import math

import numpy as np
import pytest

from shrinkreg import (
    DesignMatrix,
    GenericPrior,
    HeteroData,
    MembershipSpec,
    WeightedLossSpec,
    condition_diagnostics,
    exact_risk,
    in_l,
    loss,
    shrink_basis,
    ure,
    ure_gls,
    ure_sp_model1,
    ure_sp_model2,
    ure_weighted,
    weighted_loss,
)
from shrinkreg.linalg import ols_location, projection_apply
from shrinkreg.models import generic_shrinkage
from shrinkreg.simulate import gen_covariates, gen_example1


def fixed_instance(seed=3, p=30, k=2):
    rng = np.random.default_rng(seed)
    x = DesignMatrix(rng.uniform(-10, 10, size=(k, p)))
    a = rng.uniform(0.1, 1.0, size=p)
    beta = rng.normal(size=k)
    theta = x.entries.T @ beta + rng.normal(0, 0.5, size=p)
    return x, a, theta


class TestLoss:
    def test_zero_at_truth(self):
        t = np.array([1.0, -2.0, 3.0])
        assert loss(t, t) == 0.0

    def test_unit_shift(self):
        assert loss(np.zeros(5), np.ones(5)) == pytest.approx(1.0)

    def test_hand_value(self):
        assert loss(np.array([1.0, 2.0]), np.array([0.0, 4.0])) == pytest.approx(2.5)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            loss(np.zeros(3), np.zeros(4))


class TestExactRisk:
    def test_zero_prior_is_pure_bias(self, rng):
        _, a, theta = fixed_instance()
        mu = rng.normal(size=30)
        prior = GenericPrior.dense(np.zeros((30, 30)), mu)
        expected = float((mu - theta) @ (mu - theta)) / 30
        assert exact_risk(theta, a, prior) == pytest.approx(expected)

    def test_infinite_scale_is_pure_variance(self):
        _, a, theta = fixed_instance()
        prior = GenericPrior.model1(math.inf, np.zeros(30))
        assert exact_risk(theta, a, prior) == pytest.approx(float(np.mean(a)))

    def test_monte_carlo_loss_oracle(self):
        # average realized loss over many Y draws estimates the exact risk
        x, a, theta = fixed_instance()
        rng = np.random.default_rng(99)
        mu = x.entries.T @ np.array([0.4, -0.2])
        prior = GenericPrior.model1(0.7, mu)
        risk = exact_risk(theta, a, prior)
        n = 50_000
        ys = theta + rng.normal(size=(n, 30)) * np.sqrt(a)
        frac = 0.7 / (0.7 + a)
        thetas = frac * ys + (1 - frac) * mu
        losses = np.mean((thetas - theta) ** 2, axis=1)
        se = losses.std(ddof=1) / math.sqrt(n)
        assert abs(losses.mean() - risk) <= 3 * se


class TestUre:
    def test_infinite_scale_trace_a(self, rng):
        x, a, theta = fixed_instance()
        y = theta + rng.normal(size=30) * np.sqrt(a)
        data = HeteroData(y=y, a=a, x=x)
        prior = GenericPrior.model1(math.inf, np.zeros(30))
        assert ure(data, prior) == pytest.approx(float(np.mean(a)))

    def test_zero_prior_value(self, rng):
        x, a, theta = fixed_instance()
        y = theta + rng.normal(size=30) * np.sqrt(a)
        data = HeteroData(y=y, a=a, x=x)
        mu = rng.normal(size=30)
        prior = GenericPrior.dense(np.zeros((30, 30)), mu)
        expected = float((y - mu) @ (y - mu)) / 30 - float(np.mean(a))
        assert ure(data, prior) == pytest.approx(expected)

    def test_unbiasedness_monte_carlo(self):
        x, a, theta = fixed_instance()
        rng = np.random.default_rng(5)
        mu = x.entries.T @ np.array([0.4, -0.2])
        lam = 0.5
        prior = GenericPrior.model1(lam, mu)
        risk = exact_risk(theta, a, prior)
        n = 50_000
        ys = theta + rng.normal(size=(n, 30)) * np.sqrt(a)
        # vectorized URE over draws
        comp_fac = a / (lam + a)
        term1 = np.mean((comp_fac * (ys - mu)) ** 2 @ np.ones(30)) / 30
        trace_term = (2 * np.sum(lam * a / (lam + a)) - np.sum(a)) / 30
        ures = ((comp_fac * (ys - mu)) ** 2).sum(axis=1) / 30 + trace_term
        se = ures.std(ddof=1) / math.sqrt(n)
        assert abs(ures.mean() - risk) <= 3 * se
        # spot-check the vectorized formula against the library on one draw
        data = HeteroData(y=ys[0], a=a, x=x)
        assert ure(data, prior) == pytest.approx(ures[0], rel=1e-12)


class TestUreGls:
    def test_infinite_scale_trace_a(self, rng):
        x, a, theta = fixed_instance()
        y = theta + rng.normal(size=30) * np.sqrt(a)
        data = HeteroData(y=y, a=a, x=x)
        prior = GenericPrior.model1(math.inf, np.zeros(30))
        assert ure_gls(data, prior, np.ones(30)) == pytest.approx(float(np.mean(a)))

    def test_wls_target_uses_inverse_variances(self, rng):
        x, a, theta = fixed_instance()
        y = theta + rng.normal(size=30) * np.sqrt(a)
        data = HeteroData(y=y, a=a, x=x)
        prior = GenericPrior.model1(0.4, np.zeros(30))
        assert ure_gls(data, prior, 1.0 / a) == pytest.approx(
            ure_gls(data, prior, np.diag(1.0 / a))
        )

    def test_paired_monte_carlo_oracle(self):
        # mean of the GLS URE equals the mean realized loss of the
        # shrink-toward-fitted-location rule (both estimate the same risk)
        x, a, theta = fixed_instance()
        rng = np.random.default_rng(17)
        lam = 0.6
        prior = GenericPrior.model1(lam, np.zeros(30))
        n = 40_000
        ures = np.empty(n)
        losses = np.empty(n)
        m = np.ones(30)
        frac = lam / (lam + a)
        for i in range(n // 200):
            ys = theta + rng.normal(size=(200, 30)) * np.sqrt(a)
            for j in range(200):
                y = ys[j]
                data = HeteroData(y=y, a=a, x=x)
                mu_hat = projection_apply(x, m, y)
                theta_hat = frac * y + (1 - frac) * mu_hat
                losses[i * 200 + j] = loss(theta, theta_hat)
                ures[i * 200 + j] = ure_gls(data, prior, m)
        diff = ures - losses
        se = math.sqrt(ures.var(ddof=1) / n + losses.var(ddof=1) / n)
        assert abs(diff.mean()) <= 3 * se


class TestUreSpModel1:
    def test_zero_b_trace_a(self, rng):
        x, a, theta = fixed_instance()
        y = theta + rng.normal(size=30) * np.sqrt(a)
        data = HeteroData(y=y, a=a, x=x)
        assert ure_sp_model1(data, np.zeros(30), np.zeros(30)) == pytest.approx(float(np.mean(a)))

    def test_full_b_residual_form(self, rng):
        x, a, theta = fixed_instance()
        y = theta + rng.normal(size=30) * np.sqrt(a)
        data = HeteroData(y=y, a=a, x=x)
        mu = rng.normal(size=30)
        expected = float((y - mu) @ (y - mu)) / 30 - float(np.mean(a))
        assert ure_sp_model1(data, np.ones(30), mu) == pytest.approx(expected)

    def test_parametric_b_recovers_parametric_ure(self, rng):
        x, a, theta = fixed_instance()
        y = theta + rng.normal(size=30) * np.sqrt(a)
        data = HeteroData(y=y, a=a, x=x)
        mu = x.entries.T @ rng.normal(size=2)
        lam = 0.9
        b = a / (lam + a)
        parametric = ure(data, GenericPrior.model1(lam, mu))
        assert ure_sp_model1(data, b, mu) == pytest.approx(parametric, abs=1e-12)

    def test_b_outside_unit_interval_rejected(self, rng):
        x, a, theta = fixed_instance()
        data = HeteroData(y=theta, a=a, x=x)
        with pytest.raises(ValueError):
            ure_sp_model1(data, np.full(30, 1.2), np.zeros(30))


class TestUreSpModel2:
    def test_parametric_b_recovers_parametric_ure(self, rng):
        x, a, theta = fixed_instance(p=30, k=2)
        y = theta + rng.normal(size=30) * np.sqrt(a)
        data = HeteroData(y=y, a=a, x=x)
        w = np.array([[1.4, 0.1], [0.1, 0.9]])
        basis = shrink_basis(x, a, w)
        beta0 = rng.normal(size=2)
        lam = 0.7
        b = basis.d / (lam + basis.d)
        parametric = ure(data, GenericPrior.model2(lam, basis, beta0))
        assert ure_sp_model2(data, basis, b, beta0) == pytest.approx(parametric, abs=1e-9)

    def test_full_shrinkage_to_prior_coefficient(self, rng):
        x, a, theta = fixed_instance(p=30, k=2)
        y = theta + rng.normal(size=30) * np.sqrt(a)
        data = HeteroData(y=y, a=a, x=x)
        basis = shrink_basis(x, a, np.eye(2))
        beta0 = rng.normal(size=2)
        mu = x.entries.T @ beta0
        expected = float((mu - y) @ (mu - y)) / 30 - float(np.mean(a))
        assert ure_sp_model2(data, basis, np.ones(2), beta0) == pytest.approx(expected, abs=1e-10)

    def test_unbiasedness_monte_carlo(self):
        x, a, theta = fixed_instance(p=30, k=2)
        rng = np.random.default_rng(23)
        w = np.eye(2)
        basis = shrink_basis(x, a, w)
        b = np.array([0.3, 0.8]) if basis.d[0] <= basis.d[1] else np.array([0.8, 0.3])
        beta0 = np.array([0.2, -0.1])
        gamma0 = basis.to_spectral(beta0)
        n = 40_000
        h_mat = basis.z / a  # apply to y
        ures = np.empty(n)
        losses = np.empty(n)
        trace_term = 2 * float(np.sum((1 - b) * basis.d * basis.zzt_diag)) - float(np.sum(a))
        for i in range(n):
            y = theta + rng.standard_normal(30) * np.sqrt(a)
            h = basis.d * (h_mat @ y)
            theta_hat = basis.z.T @ ((1 - b) * h + b * gamma0)
            losses[i] = loss(theta, theta_hat)
            ures[i] = (float((theta_hat - y) @ (theta_hat - y)) + trace_term) / 30
        diff = ures - losses
        se = math.sqrt(ures.var(ddof=1) / n + losses.var(ddof=1) / n)
        assert abs(diff.mean()) <= 3 * se
        # sanity: library formula matches the inline vectorization on the last draw
        data = HeteroData(y=y, a=a, x=x)
        assert ure_sp_model2(data, basis, b, beta0) == pytest.approx(ures[-1], rel=1e-10)


class TestUreWeighted:
    def test_unit_weights_reduce_to_unweighted(self, rng):
        x, a, theta = fixed_instance()
        y = theta + rng.normal(size=30) * np.sqrt(a)
        data = HeteroData(y=y, a=a, x=x)
        spec = WeightedLossSpec(np.ones(30))
        b = np.clip(rng.uniform(size=30), 0, 1)
        mu = rng.normal(size=30)
        assert ure_weighted(data, spec, b, mu) == pytest.approx(
            ure_sp_model1(data, b, mu), abs=1e-14
        )

    def test_zero_b_weighted_trace(self, rng):
        x, a, theta = fixed_instance()
        y = theta + rng.normal(size=30) * np.sqrt(a)
        data = HeteroData(y=y, a=a, x=x)
        psi = rng.uniform(0.5, 1.5, size=30)
        psi *= 30 / psi.sum()
        spec = WeightedLossSpec(psi)
        expected = float(np.sum(psi * a)) / 30
        assert ure_weighted(data, spec, np.zeros(30), np.zeros(30)) == pytest.approx(expected)

    def test_unbiased_for_weighted_loss(self):
        x, a, theta = fixed_instance()
        rng = np.random.default_rng(31)
        psi = rng.uniform(0.5, 1.5, size=30)
        psi *= 30 / psi.sum()
        spec = WeightedLossSpec(psi)
        b = np.sort(rng.uniform(size=30))[np.argsort(np.argsort(a))]  # monotone in a
        mu = x.entries.T @ np.array([0.1, 0.3])
        n = 50_000
        ys = theta + rng.normal(size=(n, 30)) * np.sqrt(a)
        theta_hats = (1 - b) * ys + b * mu
        losses = ((theta_hats - theta) ** 2 * psi).sum(axis=1) / 30
        ures = ((b * (ys - mu)) ** 2 * psi + (1 - 2 * b) * a * psi).sum(axis=1) / 30
        diff = ures - losses
        se = math.sqrt(ures.var(ddof=1) / n + losses.var(ddof=1) / n)
        assert abs(diff.mean()) <= 3 * se
        data = HeteroData(y=ys[0], a=a, x=x)
        assert ure_weighted(data, spec, b, mu) == pytest.approx(ures[0], rel=1e-12)
        assert weighted_loss(theta, theta_hats[0], spec) == pytest.approx(losses[0], rel=1e-12)

    def test_psi_validation(self):
        with pytest.raises(ValueError):
            WeightedLossSpec(np.array([1.0, 2.0]))  # sums to 3, p = 2


class TestMembership:
    def test_zero_vector_in(self, rng):
        x = DesignMatrix(rng.normal(size=(2, 10)))
        y = rng.normal(size=10)
        assert in_l(np.zeros(10), x, y)

    def test_ols_fit_in_with_unit_constants(self, rng):
        x = DesignMatrix(rng.normal(size=(2, 10)))
        y = rng.normal(size=10)
        _, mu = ols_location(x, y)
        assert in_l(mu, x, y, MembershipSpec(big_m=1.0, kappa=0.0))

    def test_norm_violation_detected(self, rng):
        x = DesignMatrix(rng.normal(size=(2, 10)))
        y = rng.normal(size=10)
        _, mu = ols_location(x, y)
        scale = 10.0 * float(np.linalg.norm(y)) / float(np.linalg.norm(mu))
        assert not in_l(scale * mu, x, y, MembershipSpec(big_m=1.0, kappa=0.0))

    def test_off_rowspace_detected(self, rng):
        x = DesignMatrix(np.ones((1, 10)))
        y = rng.normal(size=10)
        mu = np.ones(10)
        mu[3] += 0.5
        assert not in_l(mu, x, y)

    def test_kappa_range(self):
        with pytest.raises(ValueError):
            MembershipSpec(kappa=0.5)


class TestConditionDiagnostics:
    def test_unit_variances_zero_theta(self):
        x = DesignMatrix.intercept_only(8)
        data = HeteroData(y=np.zeros(8), a=np.ones(8), x=x)
        diag = condition_diagnostics(data, np.zeros(8))
        assert diag.cond_a == pytest.approx(1.0)
        assert diag.cond_b == pytest.approx(0.0)
        assert diag.cond_c == pytest.approx(0.0)

    def test_intercept_design_gram(self, rng):
        x = DesignMatrix.intercept_only(12)
        a = rng.uniform(0.5, 2.0, size=12)
        data = HeteroData(y=rng.normal(size=12), a=a, x=x)
        diag = condition_diagnostics(data)
        assert diag.cond_e.shape == (1, 1)
        assert diag.cond_e[0, 0] == pytest.approx(1.0)
        assert diag.cond_b is None and diag.cond_c is None

    def test_example1_mixture_moment(self):
        # E A^2 = 0.5*0.01 + 0.5*0.25 = 0.13 for the two-group generator
        rng = np.random.default_rng(41)
        p = 500
        x = gen_covariates(p, 3, rng)
        data, _ = gen_example1(p, x, (-1.5, 4.0, -3.0), rng)
        diag = condition_diagnostics(data)
        se = math.sqrt(np.var([0.01, 0.25]) / p)  # binomial mixing noise scale
        assert abs(diag.cond_a - 0.13) <= 4 * se
