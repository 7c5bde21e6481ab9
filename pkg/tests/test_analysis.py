import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distcorr.analysis import (
    ClosedFormInputs,
    asymptotic_se_gap,
    bs_distortion_mr_corr,
    bs_distortion_mr_uncorr,
    distortion_ratio,
    moment_oracle,
    to_db,
    ue_distortion_mr,
)
from distcorr.hardware import bussgang_third_order, third_order_coefficients

SEVEN_DB = 10 ** 0.7


def sampled_distortion(M, K, alpha, backoff, p, n, rng, batch=2000):
    """Realization averages of h^H C h, h^H diag(C) h and |h^H D h|^2 for user 1, over E||h||^2."""
    a = np.full(M, third_order_coefficients(alpha, backoff, p * K))
    acc = np.zeros(3)
    norm = 0.0
    done = 0
    while done < n:
        b = min(batch, n - done)
        H = (rng.standard_normal((b, M, K)) + 1j * rng.standard_normal((b, M, K))) / np.sqrt(2)
        C = p * H @ H.conj().transpose(0, 2, 1)
        dec = bussgang_third_order(C, a)
        h = H[:, :, 0]
        Ce = dec.C_etaeta
        acc[0] += np.einsum("bi,bij,bj->", h.conj(), Ce, h).real
        acc[1] += np.einsum("bi,bi,bi->", h.conj(), np.diagonal(Ce, axis1=1, axis2=2), h).real
        acc[2] += np.sum(np.abs(np.einsum("bi,bi,bi->b", h.conj(), dec.d, h)) ** 2)
        norm += np.sum(np.abs(h) ** 2)
        done += b
    return acc / norm


class TestExamples:
    def test_single_antenna_values(self):
        x = ClosedFormInputs(1, 1, alpha=1 / 3, backoff=1.0)
        assert bs_distortion_mr_corr(x) == pytest.approx(16 / 3)
        assert bs_distortion_mr_uncorr(x) == pytest.approx(16 / 3)
        assert ue_distortion_mr(x) == pytest.approx(2 - 8 + 32 / 3)

    def test_linear_hardware(self):
        x = ClosedFormInputs(7, 3, alpha=0.0)
        assert bs_distortion_mr_corr(x) == 0
        assert bs_distortion_mr_uncorr(x) == 0
        assert ue_distortion_mr(ClosedFormInputs(1, 1, alpha=0.0)) == pytest.approx(2)

    def test_linear_growth_in_M(self):
        vals = [bs_distortion_mr_corr(ClosedFormInputs(M, 3)) for M in (10, 20, 30, 40)]
        assert np.allclose(np.diff(vals, 2), 0, atol=1e-12)
        assert np.all(np.diff(vals) > 0)
        ue = [ue_distortion_mr(ClosedFormInputs(M, 3)) for M in (10, 20, 30, 40)]
        assert np.allclose(np.diff(ue, 2), 0, atol=1e-10) and np.all(np.diff(ue) > 0)

    def test_uncorrelated_independent_of_M(self):
        assert bs_distortion_mr_uncorr(ClosedFormInputs(1, 4)) == bs_distortion_mr_uncorr(ClosedFormInputs(1000, 4))

    def test_uncorrelated_unimodal_in_K(self):
        v = np.array([bs_distortion_mr_uncorr(ClosedFormInputs(10, K)) for K in range(1, 40)])
        k = int(np.argmin(v))
        assert 0 < k < len(v) - 1
        assert np.all(np.diff(v[: k + 1]) < 0) and np.all(np.diff(v[k:]) > 0)

    def test_ratio_examples(self):
        assert distortion_ratio(1, 7) == 1
        assert distortion_ratio(200, 1) == pytest.approx(1 + 398 / 12)
        assert to_db(distortion_ratio(200, 1)) == pytest.approx(15.34, abs=0.005)
        assert distortion_ratio(200, 10) == pytest.approx(1 + 398 / 156)
        assert to_db(distortion_ratio(200, 10)) == pytest.approx(5.50, abs=0.005)

    def test_asymptotic_gap(self):
        assert asymptotic_se_gap(0.99) == pytest.approx(0.9856, abs=1e-4)
        assert asymptotic_se_gap(1e-9) == pytest.approx(0, abs=1e-8)
        grid = np.linspace(0.01, 0.99, 99)
        g = asymptotic_se_gap(grid)
        assert np.all(g < 1) and np.all(np.diff(g) > 0)
        for bad in (0.0, 1.0, -0.1):
            with pytest.raises(ValueError):
                asymptotic_se_gap(bad)

    def test_moments(self):
        assert [moment_oracle(p) for p in (1, 2, 3, 4)] == [1, 2, 6, 24]
        with pytest.raises(ValueError):
            moment_oracle(0)
        rng = np.random.default_rng(0)
        h = (rng.standard_normal(10**7) + 1j * rng.standard_normal(10**7)) / np.sqrt(2)
        x = np.abs(h) ** 2
        for p in (1, 2, 3):
            s = x**p
            assert abs(s.mean() - moment_oracle(p)) < 3 * s.std() / np.sqrt(s.size)

    @pytest.mark.parametrize("kwargs", [dict(M=0, K=1), dict(M=1, K=0), dict(M=1, K=1, alpha=0.5),
                                        dict(M=1, K=1, backoff=0.5), dict(M=1, K=1, kappa=1.5),
                                        dict(M=1, K=1, p=0.0)])
    def test_input_validation(self, kwargs):
        with pytest.raises(ValueError):
            ClosedFormInputs(**kwargs)


@settings(max_examples=200, deadline=None)
@given(M=st.integers(1, 2000), K=st.integers(1, 200), alpha=st.floats(1e-3, 1 / 3),
       backoff=st.floats(1, 100), p=st.floats(1e-3, 1e3))
def test_ratio_identity(M, K, alpha, backoff, p):
    x = ClosedFormInputs(M, K, alpha=alpha, backoff=backoff, p=p)
    r = bs_distortion_mr_corr(x) / bs_distortion_mr_uncorr(x)
    assert r == pytest.approx(distortion_ratio(M, K), rel=1e-12)
    assert r >= 1 - 1e-12


def test_ue_distortion_exceeds_bs_distortion_from_five_users():
    # M=200, 7 dB back-off, kappa=0.99, 0 dB SNR
    for K in range(5, 21):
        x = ClosedFormInputs(200, K, kappa=0.99)
        assert (1 - x.kappa) * x.p * ue_distortion_mr(x) > bs_distortion_mr_corr(x)
    x = ClosedFormInputs(200, 1, kappa=0.99)
    assert (1 - x.kappa) * ue_distortion_mr(x) < bs_distortion_mr_corr(x)


@pytest.mark.parametrize("M,K,alpha,backoff,n", [(1, 1, 1 / 3, 1.0, 2_000_000), (4, 2, 1 / 3, 1.0, 400_000),
                                                (10, 5, 1 / 3, SEVEN_DB, 40_000)])
def test_closed_forms_against_sampling(M, K, alpha, backoff, n):
    rng = np.random.default_rng(M * 100 + K)
    corr, uncorr, ue = sampled_distortion(M, K, alpha, backoff, 1.0, n, rng)
    x = ClosedFormInputs(M, K, alpha=alpha, backoff=backoff)
    assert corr == pytest.approx(bs_distortion_mr_corr(x), rel=0.02)
    assert uncorr == pytest.approx(bs_distortion_mr_uncorr(x), rel=0.02)
    assert ue == pytest.approx(ue_distortion_mr(x), rel=0.02)


def test_power_scaling():
    # C_etaeta scales as p^3 while a scales as 1/p, leaving a factor p
    x1 = ClosedFormInputs(10, 3, p=1.0)
    x2 = ClosedFormInputs(10, 3, p=2.5)
    assert bs_distortion_mr_corr(x2) == pytest.approx(2.5 * bs_distortion_mr_corr(x1))
    rng = np.random.default_rng(1)
    corr, _, _ = sampled_distortion(10, 3, 1 / 3, SEVEN_DB, 2.5, 50_000, rng)
    assert corr == pytest.approx(bs_distortion_mr_corr(x2), rel=0.02)
