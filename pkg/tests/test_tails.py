"""Histograms and tail-exponent estimation."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaimpact.model import hurwitz_zeta
from metaimpact.tails import empirical_histogram, estimate_beta


def zeta_sample(beta, size, rng, n_min=2, n_max=100_000):
    n = np.arange(n_min, n_max + 1)
    p = n.astype(float) ** (-(beta + 1.0))
    p /= p.sum()
    cdf = np.cumsum(p)
    return n[np.searchsorted(cdf, rng.random(size), side="right").clip(max=len(n) - 1)]


class TestHistogram:
    def test_all_equal_single_bin(self):
        centers, freqs = empirical_histogram([7.0] * 10, kind="linear", n_bins=5)
        assert freqs.sum() == pytest.approx(1.0)
        assert freqs.max() == pytest.approx(1.0)

    def test_integer_binning(self):
        centers, freqs = empirical_histogram([2, 2, 3, 5], kind="integer")
        assert list(centers) == [2.0, 3.0, 4.0, 5.0]
        assert freqs.tolist() == pytest.approx([0.5, 0.25, 0.0, 0.25])

    def test_zeta_sample_loglog_linear(self):
        rng = np.random.default_rng(3)
        lengths = zeta_sample(1.5, 200_000, rng)
        centers, freqs = empirical_histogram(lengths, kind="integer")
        mask = freqs > 0
        x, y = np.log(centers[mask][:40]), np.log(freqs[mask][:40])
        design = np.vstack([np.ones_like(x), x]).T
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        fitted = design @ coef
        r2 = 1.0 - np.sum((y - fitted) ** 2) / np.sum((y - y.mean()) ** 2)
        assert r2 > 0.995  # near-linear in log-log space
        assert coef[1] == pytest.approx(-2.5, abs=0.1)

    @given(
        st.lists(st.floats(min_value=0.1, max_value=1e4), min_size=1, max_size=200),
        st.sampled_from(["linear", "log"]),
    )
    @settings(max_examples=100, deadline=None)
    def test_frequencies_sum_to_one(self, values, kind):
        _, freqs = empirical_histogram(values, kind=kind, n_bins=13)
        assert freqs.sum() == pytest.approx(1.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            empirical_histogram([], kind="linear")


class TestEstimateBeta:
    def test_mle_recovers_beta(self):
        rng = np.random.default_rng(17)
        lengths = zeta_sample(1.5, 1_000_000, rng)
        est = estimate_beta(lengths, method="mle")
        assert 1.4 <= est.beta <= 1.6
        assert est.stderr < 0.01

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError, match="too few distinct"):
            estimate_beta([2] * 1000, method="mle")
        with pytest.raises(ValueError, match="too few distinct"):
            estimate_beta([2, 3, 4, 2, 3] * 50, method="loglog_regression")

    def test_methods_agree(self):
        rng = np.random.default_rng(23)
        lengths = zeta_sample(1.5, 1_000_000, rng)
        mle = estimate_beta(lengths, method="mle")
        reg = estimate_beta(lengths, method="loglog_regression")
        combined = np.hypot(mle.stderr, reg.stderr)
        assert abs(mle.beta - reg.beta) < 4 * max(combined, 0.01)

    def test_regression_scale_free(self):
        rng = np.random.default_rng(5)
        lengths = list(zeta_sample(1.4, 20_000, rng))
        one = estimate_beta(lengths, method="loglog_regression")
        two = estimate_beta(lengths * 2, method="loglog_regression")
        assert one.beta == pytest.approx(two.beta, abs=1e-12)

    def test_consistency_error_shrinks(self):
        rng = np.random.default_rng(29)
        errors = []
        for size in (10_000, 100_000, 1_000_000):
            lengths = zeta_sample(1.5, size, rng)
            est = estimate_beta(lengths, method="mle")
            errors.append(abs(est.beta - 1.5))
        assert errors[2] < errors[0]
        assert errors[2] < 0.02

    def test_truncated_support_respected(self):
        # fitting with an upper truncation matching the sample support
        rng = np.random.default_rng(31)
        lengths = zeta_sample(1.5, 200_000, rng, n_max=50)
        capped = estimate_beta(lengths, method="mle", n_max=50)
        uncapped = estimate_beta(lengths, method="mle")
        assert abs(capped.beta - 1.5) < abs(uncapped.beta - 1.5)

    def test_normalizer_matches_zeta(self):
        from metaimpact.tails import _truncated_zeta_norm

        assert _truncated_zeta_norm(1.5, 2, None) == pytest.approx(
            hurwitz_zeta(2.5, 2.0), rel=1e-12
        )
