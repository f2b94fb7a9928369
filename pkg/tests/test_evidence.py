import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from cedl.errors import ConfigError, InvalidInputError
from cedl.evidence import (
    MetricKind,
    Orientation,
    check_alpha,
    differential_entropy,
    mutual_information,
    score,
    summarize,
    total_evidence,
)

alpha_vectors = st.integers(2, 6).flatmap(
    lambda k: arrays(np.float64, k, elements=st.floats(0.05, 500.0))
)


class TestSummary:
    def test_uniform(self):
        s = summarize([1.0, 1.0, 1.0])
        assert s.strength == 3.0
        np.testing.assert_array_equal(s.belief, np.zeros(3))
        assert s.uncertainty == 1.0
        np.testing.assert_allclose(s.expected_prob, np.full(3, 1 / 3))

    def test_worked_example(self):
        s = summarize([10.0, 1.0])
        assert s.strength == 11.0
        np.testing.assert_allclose(s.belief, [9 / 11, 0.0])
        assert s.uncertainty == pytest.approx(2 / 11)

    @given(alpha_vectors)
    def test_mass_sums_to_one(self, alpha):
        s = summarize(alpha)
        assert s.belief.sum() + s.uncertainty == pytest.approx(1.0, abs=1e-12)
        assert s.expected_prob.sum() == pytest.approx(1.0, abs=1e-12)

    def test_batched(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        s = summarize(a)
        np.testing.assert_allclose(s.strength, [3.0, 7.0, 11.0])
        assert s.belief.shape == (3, 2)

    @pytest.mark.parametrize("bad", [[1.0], [0.0, 1.0], [1.0, -2.0], [1.0, math.nan], 3.0])
    def test_rejects(self, bad):
        with pytest.raises(InvalidInputError):
            check_alpha(bad)


class TestMetrics:
    def test_entropy_of_flat_dirichlets(self):
        assert differential_entropy([1.0, 1.0]) == pytest.approx(0.0, abs=1e-9)
        assert differential_entropy([1.0, 1.0, 1.0]) == pytest.approx(-math.log(2.0), abs=1e-9)

    def test_mutual_information_flat(self):
        # psi identity: MI(1, 1) = -(ln 1/2 - psi(2) + psi(3)) = ln 2 - 1/2
        assert mutual_information([1.0, 1.0]) == pytest.approx(math.log(2) - 0.5, abs=1e-12)
        assert round(float(mutual_information([1.0, 1.0])), 5) == 0.19315

    @given(alpha_vectors)
    @settings(max_examples=100)
    def test_entropy_matches_scipy(self, alpha):
        assert differential_entropy(alpha) == pytest.approx(
            stats.dirichlet(alpha).entropy(), rel=1e-9, abs=1e-9
        )

    @given(alpha_vectors)
    def test_mutual_information_non_negative(self, alpha):
        assert mutual_information(alpha) >= -1e-12

    def test_total_evidence_is_strength(self):
        np.testing.assert_allclose(total_evidence([[1.0, 2.0], [4.0, 4.0]]), [3.0, 8.0])

    def test_more_evidence_less_uncertainty(self):
        weak, strong = [2.0, 1.0, 1.0], [50.0, 1.0, 1.0]
        assert differential_entropy(strong) < differential_entropy(weak)
        assert mutual_information(strong) < mutual_information(weak)
        assert total_evidence(strong) > total_evidence(weak)

    def test_score_dispatch(self):
        a = np.array([3.0, 2.0])
        assert score(a, "total-evidence") == total_evidence(a)
        assert score(a, MetricKind.MUTUAL_INFORMATION) == mutual_information(a)
        assert score(a, "diff-entropy") == differential_entropy(a)

    def test_orientations(self):
        assert MetricKind.TOTAL_EVIDENCE.orientation is Orientation.HIGHER_MEANS_CONFIDENT
        assert MetricKind.DIFFERENTIAL_ENTROPY.orientation is Orientation.HIGHER_MEANS_UNCERTAIN
        assert MetricKind.MUTUAL_INFORMATION.orientation is Orientation.HIGHER_MEANS_UNCERTAIN

    def test_unknown_metric(self):
        with pytest.raises(ConfigError):
            MetricKind.parse("variance")


class TestWorkedExamples:
    def test_summaries(self):
        s = summarize([9.0, 1.0])
        np.testing.assert_allclose(s.belief, [0.8, 0.0])
        np.testing.assert_allclose(s.expected_prob, [0.9, 0.1])
        s = summarize([2.0, 3.0, 5.0])
        np.testing.assert_allclose(s.belief, [0.1, 0.2, 0.4])
        assert s.uncertainty == pytest.approx(0.3)

    def test_special_values(self):
        from cedl.special import digamma, log_gamma

        assert log_gamma(5.0) == pytest.approx(3.178053830, abs=1e-9)
        assert digamma(2.0) == pytest.approx(0.4227843351, abs=1e-10)
        assert digamma(0.5) == pytest.approx(-1.9635100260, abs=1e-10)

    def test_entropy_quadrature_oracle(self):
        from scipy import integrate

        pdf = stats.beta(10, 10).pdf
        ref, _ = integrate.quad(lambda p: -pdf(p) * np.log(pdf(p)), 0, 1, epsabs=1e-12)
        assert differential_entropy([10.0, 10.0]) == pytest.approx(ref, abs=1e-6)

    def test_mutual_information_monte_carlo(self, rng):
        alpha = np.ones(4)
        p = rng.dirichlet(alpha, size=200_000)
        mean_p = alpha / alpha.sum()
        predictive = -(mean_p * np.log(mean_p)).sum()
        per_draw = -(p * np.log(np.clip(p, 1e-300, None))).sum(axis=1)
        mc = predictive - per_draw.mean()
        se = per_draw.std(ddof=1) / np.sqrt(per_draw.size)
        assert abs(mutual_information(alpha) - mc) < 3 * se

    def test_mutual_information_vanishes_with_evidence(self):
        assert mutual_information([1000.0, 1000.0]) < 1e-3

    def test_entropy_decreases_when_sharpening(self):
        values = [differential_entropy([a, 1.0]) for a in (2.0, 4.0, 8.0, 16.0)]
        assert all(b < a for a, b in zip(values, values[1:]))

    @given(alpha_vectors, st.floats(0.1, 100.0))
    def test_expected_prob_scale_invariant(self, alpha, c):
        np.testing.assert_allclose(summarize(c * alpha).expected_prob, summarize(alpha).expected_prob, rtol=1e-12)

    @given(alpha_vectors)
    def test_mutual_information_shrinks_with_scale(self, alpha):
        assert mutual_information(10 * alpha) < mutual_information(alpha)
