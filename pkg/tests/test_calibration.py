import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cedl.calibration import (
    CalibratedThreshold,
    coverage,
    decide,
    delta_summary,
    fit_threshold,
    load_threshold,
    orient,
    save_threshold,
)
from cedl.errors import ConfigError, InvalidInputError, ParseError
from cedl.evidence import MetricKind

TE = MetricKind.TOTAL_EVIDENCE


def brute_force(ids, oods):
    """All cuts maximizing TPR - FPR, by scanning every candidate directly."""
    pooled = sorted(set(ids) | set(oods))
    cands = [-np.inf] + [(a + b) / 2 for a, b in zip(pooled, pooled[1:])] + [np.inf]
    best, cuts = None, []
    for c in cands:
        j = sum(s > c for s in ids) / len(ids) - sum(s > c for s in oods) / len(oods)
        if best is None or j > best + 1e-12:
            best, cuts = j, [c]
        elif abs(j - best) <= 1e-12:
            cuts.append(c)
    return best, cuts


class TestOrient:
    def test_examples(self):
        assert orient(2.0, TE) == 2.0
        assert orient(0.19315, MetricKind.MUTUAL_INFORMATION) == -0.19315
        assert orient(0.0, "diff-entropy") == 0.0


class TestFit:
    def test_separated(self):
        thr = fit_threshold([10, 9, 8], [1, 2, 3], TE)
        assert thr.cut == 5.5 and thr.tpr == 1.0 and thr.fpr == 0.0

    def test_identical(self):
        assert fit_threshold([1, 2, 3], [1, 2, 3]).youden == 0.0

    def test_partial(self):
        thr = fit_threshold([5, 1], [3])
        assert 3 < thr.cut < 5
        assert thr.youden == 0.5

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            fit_threshold([], [1.0])
        with pytest.raises(InvalidInputError):
            fit_threshold([1.0], [np.nan])

    @given(st.lists(st.integers(-20, 20), min_size=1, max_size=30),
           st.lists(st.integers(-20, 20), min_size=1, max_size=30))
    @settings(max_examples=200)
    def test_matches_brute_force(self, ids, oods):
        best, cuts = brute_force(ids, oods)
        thr = fit_threshold(ids, oods)
        assert thr.youden == pytest.approx(best, abs=1e-12)
        assert thr.cut in cuts

    def test_widest_gap_wins_ties(self):
        # Cuts 2.5 (gap 1) and 15 (gap 20) both separate nothing useful;
        # here every cut between the two clusters is optimal.
        thr = fit_threshold([30.0, 31.0], [1.0, 2.0, 3.0, 4.0])
        assert thr.cut == 17.0

    def test_perfect_separation_on_calibration_data(self, rng):
        ids = rng.normal(10, 1, 50)
        oods = rng.normal(-10, 1, 50)
        thr = fit_threshold(ids, oods, TE)
        assert thr.youden == 1.0
        assert coverage(ids, TE, thr) == 1.0
        assert coverage(oods, TE, thr) == 0.0

    def test_affine_relabel_keeps_partition(self, rng):
        ids = rng.normal(1, 1, 40)
        oods = rng.normal(0, 1, 40)
        a = fit_threshold(ids, oods, TE)
        b = fit_threshold(3 * ids + 7, 3 * oods + 7, TE)
        np.testing.assert_array_equal(decide(ids, TE, a).retained, decide(3 * ids + 7, TE, b).retained)
        np.testing.assert_array_equal(decide(oods, TE, a).retained, decide(3 * oods + 7, TE, b).retained)

    def test_monotone_relabel_unique_optimum(self):
        # A single optimal gap: any increasing map keeps the partition.
        ids, oods = np.array([5.0, 6.0, 7.0, 8.0]), np.array([1.0, 2.0, 5.5])
        assert len(brute_force(list(ids), list(oods))[1]) == 1
        for f in (np.exp, np.cbrt, lambda v: v ** 3):
            a, b = fit_threshold(ids, oods, TE), fit_threshold(f(ids), f(oods), TE)
            np.testing.assert_array_equal(decide(ids, TE, a).retained, decide(f(ids), TE, b).retained)
            np.testing.assert_array_equal(decide(oods, TE, a).retained, decide(f(oods), TE, b).retained)


class TestDecide:
    thr = CalibratedThreshold(TE, 5.5, 3, 3, 1.0, 0.0)

    def test_examples(self):
        d = decide(6.0, TE, self.thr)
        assert d.retained and d.margin == 0.5
        d = decide(5.5, TE, self.thr)
        assert not d.retained and d.margin == 0.0
        d = decide(1.0, TE, self.thr)
        assert not d.retained and d.margin == -4.5

    def test_uncertainty_metric_flips(self):
        thr = CalibratedThreshold(MetricKind.DIFFERENTIAL_ENTROPY, -1.0, 1, 1, 1.0, 0.0)
        assert decide(-2.0, "diff-entropy", thr).retained
        assert not decide(1.5, "diff-entropy", thr).retained

    def test_metric_mismatch(self):
        with pytest.raises(ConfigError):
            decide(1.0, "mutual-info", self.thr)

    def test_vectorized(self):
        d = decide(np.array([6.0, 5.5, 1.0]), TE, self.thr)
        np.testing.assert_array_equal(d.retained, [True, False, False])
        np.testing.assert_array_equal(d.retained, d.margin > 0)

    def test_delta(self):
        assert delta_summary([5.5, 5.5], TE, self.thr) == 0.0
        assert delta_summary([10, 9, 8], TE, self.thr) == pytest.approx(3.5)
        assert delta_summary([1, 2, 3], TE, self.thr) == pytest.approx(-3.5)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        thr = fit_threshold([10, 9, 8], [1, 2, 3], TE)
        path = tmp_path / "t.json"
        save_threshold(thr, path)
        assert set(json.loads(path.read_text())) == {"metric", "cut", "n_id", "n_ood", "tpr", "fpr"}
        assert load_threshold(path) == thr

    def test_infinite_cut(self, tmp_path):
        thr = fit_threshold([1, 2], [1, 2])
        path = tmp_path / "t.json"
        save_threshold(thr, path)
        assert load_threshold(path).cut == thr.cut

    def test_malformed(self, tmp_path):
        path = tmp_path / "t.json"
        path.write_text('{"metric": "total-evidence",\n "cut": }')
        with pytest.raises(ParseError) as info:
            load_threshold(path)
        assert info.value.line == 2
        path.write_text('{"metric": "total-evidence"}')
        with pytest.raises(ParseError):
            load_threshold(path)
