import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nowcast.bootstrap import (
    BootstrapConfig,
    BootstrapError,
    BreakSchedule,
    importance_ci,
    prediction_interval,
    quantiles,
    replicate_rng,
    resample_rows,
    resample_segment,
    run_bootstrap,
    segment,
)
from nowcast.linear import ridge_fit
from nowcast.quarters import quarter_range

from oracles import contiguous_ngrams


def structure_violations(n=24, n_rep=200, block_len=4, seed=42):
    """Count replicates containing a 4-gram that is not contiguous in the source."""
    src = contiguous_ngrams(range(n), block_len)
    bad = 0
    for b in range(n_rep):
        out = resample_segment(n, block_len, replicate_rng(seed, b))
        if len(out) != n:
            bad += 1
            continue
        # only runs that lie inside a single drawn block must be contiguous
        blocks = [tuple(out[i:i + block_len]) for i in range(0, n - block_len + 1, block_len)]
        bad += any(blk not in src for blk in blocks)
    return bad


class TestSegment:
    def test_no_breaks_in_range(self):
        segs = segment(quarter_range("2010 Q1", "2015 Q4"), BreakSchedule(()))
        assert len(segs) == 1 and segs[0].size == 24

    def test_one_break(self):
        qs = quarter_range("2006 Q1", "2010 Q4")
        segs = segment(qs, BreakSchedule.from_strings(["2008 Q3"]))
        assert [s.size for s in segs] == [10, 10]
        np.testing.assert_array_equal(np.concatenate(segs), np.arange(20))

    def test_default_schedule(self):
        # four default breaks fall inside 1990 Q1..2016 Q4, giving five segments
        segs = segment(quarter_range("1990 Q1", "2016 Q4"))
        assert [s.size for s in segs] == [30, 14, 8, 22, 34]
        assert len(segment(quarter_range("1990 Q1", "2023 Q1"))) == 7

    def test_breaks_must_increase(self):
        with pytest.raises(ValueError):
            BreakSchedule.from_strings(["2001 Q1", "1997 Q3"])


class TestResample:
    def test_block_sized_segment(self):
        np.testing.assert_array_equal(resample_segment(4, 4, np.random.default_rng(0)), np.arange(4))

    def test_eight_rows_enumeration(self):
        src = contiguous_ngrams(range(8))
        for b in range(200):
            out = resample_segment(8, 4, replicate_rng(42, b))
            assert tuple(out[:4]) in src and tuple(out[4:]) in src

    def test_exhaustive_24_rows(self):
        assert structure_violations() == 0

    def test_identical_rows(self):
        rows = np.full((10, 2), 3.0)
        idx = resample_segment(10, 4, np.random.default_rng(1))
        np.testing.assert_array_equal(rows[idx], rows)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 40), st.integers(1, 6), st.integers(0, 10_000))
    def test_length_and_range(self, n, block, seed):
        out = resample_segment(n, block, np.random.default_rng(seed))
        assert out.size == n and out.min() >= 0 and out.max() < n

    def test_rows_stay_in_segment(self):
        segs = [np.arange(0, 9), np.arange(9, 20)]
        rows = resample_rows(segs, 4, np.random.default_rng(3))
        assert np.all(rows[:9] < 9) and np.all(rows[9:] >= 9)


class TestQuantiles:
    def test_sort_and_index_oracle(self):
        v = np.random.default_rng(0).normal(size=11)
        s = np.sort(v)
        for p in (0.0, 0.1, 0.25, 0.5, 0.975, 1.0):
            h = p * 10
            lo = int(np.floor(h))
            hi = min(lo + 1, 10)
            assert quantiles(v, p) == pytest.approx(s[lo] + (h - lo) * (s[hi] - s[lo]), abs=1e-14)


def _ridge_problem():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(48, 3))
    y = X @ [1.0, 0.0, -0.5] + 0.3 * rng.normal(size=48)
    x_test = rng.normal(size=(1, 3))

    def replicate(rows, rng):
        fit = ridge_fit(X[rows], y[rows], 0.01)
        return float(fit.predict(x_test)[0]), {"a": fit.coef[0], "b": fit.coef[1], "zero": 0.0}

    return replicate, [np.arange(0, 20), np.arange(20, 48)]


class TestIntervals:
    def test_reproducible_bit_exact(self):
        replicate, segs = _ridge_problem()
        a = run_bootstrap(replicate, segs, BootstrapConfig(n_boot=200, seed=42))
        b = run_bootstrap(replicate, segs, BootstrapConfig(n_boot=200, seed=42))
        assert a.points.tobytes() == b.points.tobytes()
        assert a.interval == b.interval

    def test_monotone_and_nested(self):
        replicate, segs = _ridge_problem()
        res = run_bootstrap(replicate, segs, BootstrapConfig(n_boot=200))
        lo, hi = res.interval
        assert lo <= res.median <= hi
        lo90, hi90 = quantiles(res.points, [0.1, 0.9])
        assert lo <= lo90 and hi90 <= hi

    def test_constant_learner_zero_width(self):
        lo, hi, pts = prediction_interval(lambda rows, rng: (1.7, {}), [np.arange(20)],
                                          BootstrapConfig(n_boot=50))
        assert lo == hi == 1.7

    def test_importance_ci(self):
        replicate, segs = _ridge_problem()
        ci = run_bootstrap(replicate, segs, BootstrapConfig(n_boot=100)).importance_ci()
        assert ci["zero"] == (0.0, 0.0, 0.0)
        mean, lo, hi = ci["a"]
        assert lo <= mean <= hi and lo > 0.5

    def test_importance_ci_missing_keys_count_as_zero(self):
        ci = importance_ci([{"a": 1.0}, {"b": 2.0}], 0.025)
        assert ci["a"][0] == 0.5 and ci["b"][0] == 1.0

    def test_failure_budget(self):
        calls = {"n": 0}

        def flaky(rows, rng):
            calls["n"] += 1
            if calls["n"] % 10 == 0:
                raise np.linalg.LinAlgError("singular")
            return 1.0, {}

        with pytest.raises(BootstrapError):
            run_bootstrap(flaky, [np.arange(12)], BootstrapConfig(n_boot=100))
        calls["n"] = 0

        def rare(rows, rng):
            calls["n"] += 1
            if calls["n"] % 50 == 0:
                raise FloatingPointError("nan")
            return 1.0, {}

        assert run_bootstrap(rare, [np.arange(12)], BootstrapConfig(n_boot=100)).failures == 2

    def test_config_validation(self):
        with pytest.raises(ValueError):
            BootstrapConfig(alpha=0.5)
        with pytest.raises(ValueError):
            BootstrapConfig(block_len=0)
