import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from kstester.oracle import (
    binomial_tail_exact,
    certification_catalog,
    chernoff_bounds,
    chernoff_lower,
    chernoff_two_sided,
    chernoff_upper,
    dkw_threshold,
    dyadic_decompose,
    ks_statistic,
    ks_test,
    lemma1_witness,
    null_rejection_bounds,
)
from kstester.reference import DomainError, exact_kdistance, lift, piecewise_linear, uniform_unit, wedge_perturb
from kstester.sketch import TesterConfig, rejection_halfwidth

U = uniform_unit()


def sup_oracle(sample, model):
    """Definition-based statistic: compare both one-sided limits of the ECDF at every point."""
    xs = sorted(sample)
    n = len(xs)
    best = 0.0
    for x in xs:
        below = sum(1 for v in xs if v < x) / n
        upto = sum(1 for v in xs if v <= x) / n
        f = float(model.cdf(x))
        best = max(best, abs(upto - f), abs(f - below))
    return best


class TestKS:
    def test_examples(self):
        assert ks_statistic([0.1, 0.5], U) == pytest.approx(0.5, abs=1e-15)
        # six terms: 1/12, 1/4, 1/6, 1/6, 1/4, 1/12
        assert ks_statistic([0.25, 0.5, 0.75], U) == pytest.approx(0.25, abs=1e-15)
        assert stats.kstest([0.25, 0.5, 0.75], "uniform").statistic == pytest.approx(0.25)
        assert ks_statistic([U.quantile(0.5)], U) == 0.5

    def test_empty(self):
        with pytest.raises(DomainError):
            ks_statistic([], U)

    def test_midpoints_vanish(self):
        n = 4000
        assert ks_statistic((np.arange(n) + 0.5) / n, U) == pytest.approx(0.5 / n)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-0.5, 1.5), min_size=1, max_size=40))
    def test_matches_definition(self, xs):
        w = wedge_perturb(U, 0.1, 0.37)
        assert abs(ks_statistic(sorted(xs), w) - sup_oracle(xs, w)) <= 1e-12

    def test_matches_scipy(self, rng):
        w = wedge_perturb(U, 0.05, 0.5)
        for n in (5, 100, 1000):
            xs = np.sort(w.sample(rng, size=n))
            ref = stats.kstest(xs, lambda x: U.cdf(x)).statistic
            assert ks_statistic(xs, U) == pytest.approx(ref, abs=1e-12)

    def test_dkw(self):
        assert dkw_threshold(1000, 0.1) == pytest.approx(0.03870, abs=5e-6)
        assert dkw_threshold(2000, 0.1) == pytest.approx(dkw_threshold(1000, 0.1) / math.sqrt(2), rel=1e-14)
        assert dkw_threshold(1, 2 / math.e**2) == pytest.approx(1.0, rel=1e-15)

    def test_rejects_far_sample(self, rng):
        res = ks_test(rng.random(1000) ** 2, U, 0.1)
        assert res.reject and res.statistic > res.threshold and res.n == 1000


class TestDyadic:
    def test_examples(self):
        d = dyadic_decompose(0.8125, 4)
        assert d.parts == ((1, 1), (3, 2), (13, 4))
        assert d.measure() == Fraction(13, 16) == d.x_tilde
        for levels in (1, 5, 20):
            assert dyadic_decompose(0.5, levels).parts == ((1, 1),)
            assert dyadic_decompose(0.0, levels).parts == ()

    def test_one(self):
        d = dyadic_decompose(1.0, 3)
        assert d.x_tilde == Fraction(7, 8) and len(d.parts) == 3

    @given(st.floats(0.0, 1.0), st.integers(1, 60))
    def test_invariants(self, x, levels):
        d = dyadic_decompose(x, levels)
        assert d.measure() == d.x_tilde
        assert 0 <= Fraction(x) - d.x_tilde <= Fraction(1, 2**levels)
        assert len(d.parts) <= levels
        js = [j for _, j in d.parts]
        assert js == sorted(set(js))
        cursor = Fraction(0)
        for lo, hi in d.intervals():
            assert lo == cursor
            cursor = hi
        assert cursor == d.x_tilde

    def test_domain(self):
        with pytest.raises(DomainError):
            dyadic_decompose(1.5, 3)
        with pytest.raises(DomainError):
            dyadic_decompose(0.5, 0)


def brute_force_witness(d, ref, eps):
    """Evaluate every bucket one at a time through the scalar model interface."""
    levels = math.ceil(math.log2(1 / eps)) + 2
    rows = []
    for j in range(1, levels + 1):
        for i in range(1, 2**j + 1):
            lo, hi = ref.quantile((i - 1) / 2**j), ref.quantile(i / 2**j)
            mass = float(d.cdf(hi)) - float(d.cdf(lo))
            rows.append((abs(mass - 2.0**-j), 2 * rejection_halfwidth(eps, j), (i, j)))
    return rows


class TestLemmaWitness:
    def test_identical(self):
        rep = lemma1_witness(U, U, 0.1)
        assert rep.gap == 0.0 and not rep.satisfied and rep.best_bucket == (1, 1)

    def test_wedge_half(self):
        rep = lemma1_witness(wedge_perturb(U, 0.1, 0.5), U, 0.1)
        assert rep.best_bucket == (1, 1)
        assert rep.gap == pytest.approx(0.1, abs=1e-12)
        assert rep.threshold == pytest.approx(0.01) and rep.satisfied

    @pytest.mark.parametrize("base", [U, piecewise_linear([0.0, 0.3, 1.0], [0.0, 0.6, 1.0])])
    def test_off_dyadic_center_matches_brute_force(self, base):
        d = wedge_perturb(base, 0.05, 0.37)
        rep = lemma1_witness(d, base, 0.05)
        rows = brute_force_witness(d, base, 0.05)
        ok = [r for r in rows if r[0] >= r[1]]
        assert rep.satisfied and ok
        gap, _, bucket = max(ok, key=lambda r: r[0])
        assert rep.gap == pytest.approx(gap, abs=1e-12)
        assert rep.best_bucket == bucket

    def test_lifted(self):
        rep = lemma1_witness(lift({0: 0.3, 1: 0.7}), lift({0: 0.5, 1: 0.5}), 0.1)
        assert rep.satisfied and rep.gap == pytest.approx(0.2)

    @pytest.mark.parametrize("eps", [0.1, 0.05, 0.02])
    def test_catalog(self, eps):
        pairs = certification_catalog(eps)
        assert len(pairs) >= 20
        for name, d, ref in pairs:
            assert exact_kdistance(d, ref) >= eps - 1e-12, name
            assert lemma1_witness(d, ref, eps).satisfied, name


class TestBinomialTail:
    def test_examples(self):
        assert binomial_tail_exact(10, 0.5, 7) == pytest.approx(0.0546875, rel=1e-12)
        assert binomial_tail_exact(2, 0.5, 1, tail="lower") == pytest.approx(0.25, rel=1e-12)
        assert 0 < binomial_tail_exact(100, 0.1, 30, tail="two-sided") < 1e-8

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 3000), st.floats(0.001, 0.999), st.floats(0, 1))
    def test_matches_scipy(self, n, p, frac):
        thr = frac * n
        b = stats.binom(n, p)
        up = b.sf(math.floor(thr))
        lo = b.cdf(math.ceil(thr) - 1)
        assert binomial_tail_exact(n, p, thr) == pytest.approx(up, rel=1e-9, abs=1e-300)
        assert binomial_tail_exact(n, p, thr, tail="lower") == pytest.approx(lo, rel=1e-9, abs=1e-300)

    def test_integer_threshold_is_exclusive(self):
        assert binomial_tail_exact(3, 0.5, 3) == 0.0
        assert binomial_tail_exact(3, 0.5, Fraction(5, 2)) == pytest.approx(0.125)

    def test_log_agrees(self):
        for thr in (5, 30, 60):
            lin = binomial_tail_exact(100, 0.3, thr)
            assert binomial_tail_exact(100, 0.3, thr, log=True) == pytest.approx(math.log(lin), rel=1e-12)
        assert binomial_tail_exact(3, 0.5, 3, log=True) == -math.inf

    def test_degenerate_p(self):
        assert binomial_tail_exact(5, 0.0, 0, tail="lower") == 0.0
        assert binomial_tail_exact(5, 1.0, 4) == 1.0

    @pytest.mark.parametrize("args", [(-1, 0.5, 1), (200_000, 0.5, 1), (10, 1.5, 1)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            binomial_tail_exact(*args)
        with pytest.raises(DomainError):
            binomial_tail_exact(10, 0.5, 1, tail="middle")


class TestChernoff:
    def test_example(self):
        assert chernoff_upper(100, 0.5, 0.1) == pytest.approx(math.exp(-1 / 1.1), rel=1e-14)
        assert chernoff_upper(100, 0.5, 0.1) == pytest.approx(0.4029, abs=5e-5)

    def test_vacuous_limit(self):
        b = chernoff_bounds(100, 0.5, 1e-9)
        assert b.upper == pytest.approx(1.0) and b.lower == pytest.approx(1.0)
        assert b.two_sided == pytest.approx(2.0)

    def test_preconditions(self):
        with pytest.raises(DomainError):
            chernoff_lower(10, 0.1, 0.2)
        with pytest.raises(DomainError):
            chernoff_two_sided(10, 0.1, 0.1)
        with pytest.raises(DomainError):
            chernoff_upper(0, 0.1, 0.1)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(1, 2000), st.floats(0.01, 0.99), st.floats(0.001, 1.0))
    def test_dominates_exact(self, n, p, d):
        fp, fd = Fraction(p), Fraction(d)
        assert chernoff_upper(n, p, d, log=True) >= binomial_tail_exact(n, p, n * (fp + fd), log=True)
        if d < p:
            assert chernoff_lower(n, p, d, log=True) >= binomial_tail_exact(
                n, p, n * (fp - fd), tail="lower", log=True)
            assert chernoff_two_sided(n, p, d, log=True) >= binomial_tail_exact(
                n, p, n * fd, tail="two-sided", log=True)


class TestNullBounds:
    def test_practical_constant_always_rejects_at_eps_01(self):
        lower, upper = null_rejection_bounds(TesterConfig(0.1, c=4))
        assert lower == 1.0 and upper == 1.0

    def test_large_c(self):
        lower, upper = null_rejection_bounds(TesterConfig(0.1, c=2.4e4))
        assert 0 < lower <= upper < 0.01

    def test_monotone_in_c(self):
        ups = [null_rejection_bounds(TesterConfig(0.25, c=c))[1] for c in (1e3, 1e4, 1e5)]
        assert ups[0] >= ups[1] >= ups[2]
