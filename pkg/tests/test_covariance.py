import numpy as np
import pytest

from ofdm_gfa import covariance
from ofdm_gfa.covariance import CovarianceState
from ofdm_gfa.signal_model import complex_normal

from conftest import dense_covariance, dense_objective, random_psd_inverse


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestInit:
    def test_values(self):
        np.testing.assert_array_equal(covariance.init(2, 0.5).inv, np.diag([2.0, 2.0]))
        st = covariance.init(72, 0.1)
        np.testing.assert_allclose(np.diag(st.inv).real, 10.0)
        np.testing.assert_allclose(st.inv @ (0.1 * np.eye(72)), np.eye(72), atol=1e-15)

    def test_rejects_nonpositive_noise(self):
        with pytest.raises(ValueError):
            covariance.init(4, 0.0)


class TestRankPUpdate:
    def test_zero_step_unchanged(self, rng):
        _, inv = random_psd_inverse(rng, 8)
        st = CovarianceState(inv.copy(), 0.1)
        covariance.rank_p_update(st, complex_normal(rng, (8, 2)), 0.0)
        np.testing.assert_array_equal(st.inv, inv)

    def test_dense_oracle(self, rng):
        sigma, inv = random_psd_inverse(rng, 16)
        S = complex_normal(rng, (16, 4))
        st = CovarianceState(inv, 0.1)
        covariance.rank_p_update(st, S, 0.7)
        assert rel(st.inv, np.linalg.inv(sigma + 0.7 * S @ S.conj().T)) <= 1e-9

    def test_negative_step_downdate(self, rng):
        sigma, _ = random_psd_inverse(rng, 12)
        S = complex_normal(rng, (12, 3))
        full = sigma + 0.8 * S @ S.conj().T
        st = CovarianceState(np.linalg.inv(full), 0.1)
        covariance.rank_p_update(st, S, -0.8)
        assert rel(st.inv, np.linalg.inv(sigma)) <= 1e-9

    def test_p1_is_sherman_morrison(self, rng):
        _, inv = random_psd_inverse(rng, 10)
        s = complex_normal(rng, 10)
        a = inv @ s
        expect = inv - 0.4 * np.outer(a, a.conj()) / (1 + 0.4 * np.vdot(s, a).real)
        st = CovarianceState(inv.copy(), 0.1)
        covariance.rank_p_update(st, s[:, None], 0.4)
        np.testing.assert_allclose(st.inv, expect, atol=1e-12)

    def test_singular_step_raises(self):
        st = covariance.init(4, 1.0)
        S = np.eye(4)[:, :2].astype(complex)
        # removing more than the whole covariance along span(S)
        with pytest.raises(covariance.SingularUpdateError, match="covariance update singular"):
            covariance.rank_p_update(st, S, -1.0)

    def test_chain_of_updates_stays_consistent(self, rng):
        L, P = 16, 2
        blocks = [complex_normal(rng, (L, P)) for _ in range(10)]
        w = np.zeros(10)
        st = covariance.init(L, 0.1)
        for k in range(200):
            n = k % 10
            target = rng.uniform()
            covariance.rank_p_update(st, blocks[n], target - w[n])
            w[n] = target
            if k % 10 == 9:
                st.hermitize()
        dense = np.linalg.inv(dense_covariance(w, blocks, np.ones(10), 0.1))
        assert rel(st.inv, dense) <= 1e-8
        assert np.linalg.norm(st.inv - st.inv.conj().T) <= 1e-10 * np.linalg.norm(st.inv)
        np.linalg.cholesky(np.linalg.inv(st.inv))


class TestRankOneUpdate:
    def test_zero_step(self, rng):
        _, inv = random_psd_inverse(rng, 6)
        st = CovarianceState(inv.copy(), 0.1)
        covariance.rank_one_update(st, complex_normal(rng, 6), 0.0)
        np.testing.assert_array_equal(st.inv, inv)

    def test_matches_rank_p(self, rng):
        _, inv = random_psd_inverse(rng, 9)
        s = complex_normal(rng, 9)
        a, b = CovarianceState(inv.copy(), 0.1), CovarianceState(inv.copy(), 0.1)
        covariance.rank_one_update(a, s, 1.3)
        covariance.rank_p_update(b, s[:, None], 1.3)
        np.testing.assert_allclose(a.inv, b.inv, atol=1e-12)

    def test_dense_oracle(self, rng):
        sigma, inv = random_psd_inverse(rng, 16)
        s = complex_normal(rng, 16)
        st = CovarianceState(inv, 0.1)
        covariance.rank_one_update(st, s, 0.6)
        assert rel(st.inv, np.linalg.inv(sigma + 0.6 * np.outer(s, s.conj()))) <= 1e-9

    def test_singular_raises(self):
        st = covariance.init(3, 1.0)
        with pytest.raises(covariance.SingularUpdateError):
            covariance.rank_one_update(st, np.array([1.0, 0, 0], complex), -1.0)


class TestObjective:
    def test_zero_weights(self, rng):
        L, sig2 = 6, 0.3
        X = complex_normal(rng, (L, 10))
        sh = X @ X.conj().T / 10
        blocks = [complex_normal(rng, (L, 2)) for _ in range(3)]
        val = covariance.objective(np.zeros(3), blocks, np.ones(3), sig2, sh)
        np.testing.assert_allclose(val, L * np.log(sig2) + np.trace(sh).real / sig2, rtol=1e-12)

    def test_consistent_sample_covariance(self, rng):
        blocks = [complex_normal(rng, (8, 2)) for _ in range(4)]
        w = np.array([1.0, 0.0, 0.5, 1.0])
        sigma = dense_covariance(w, blocks, np.ones(4), 0.1)
        val = covariance.objective(w, blocks, np.ones(4), 0.1, sigma)
        np.testing.assert_allclose(val, np.linalg.slogdet(sigma)[1] + 8, rtol=1e-12)

    def test_eigen_oracle(self, rng):
        for _ in range(10):
            blocks = [complex_normal(rng, 8) for _ in range(5)]
            w = rng.uniform(size=5)
            g = rng.uniform(0.5, 2, size=5)
            X = complex_normal(rng, (8, 12))
            sh = X @ X.conj().T / 12
            val = covariance.objective(w, blocks, g, 0.2, sh)
            ref = dense_objective(dense_covariance(w, blocks, g, 0.2), sh)
            np.testing.assert_allclose(val, ref, rtol=1e-9)
            inv = np.linalg.inv(dense_covariance(w, blocks, g, 0.2))
            np.testing.assert_allclose(covariance.objective_from_inverse(inv, sh), ref, rtol=1e-9)

    def test_not_pd_raises(self):
        with pytest.raises(covariance.NotPositiveDefiniteError,
                           match="covariance not positive definite"):
            covariance.covariance_objective(-np.eye(3), np.eye(3))

    def test_rejects_out_of_range_weights(self, rng):
        with pytest.raises(ValueError):
            covariance.objective([1.2], [np.eye(3)[:, :1]], [1.0], 0.1, np.eye(3))
