from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncck.states import (
    CumulantTable,
    MomentError,
    cumulants_from_moments,
    exact_psd,
    free_poisson_state,
    free_product_moment,
    load_moment_table,
    moment_table_state,
    moments_from_cumulants,
    semicircle_state,
    verify_state,
)
from ncck.words import Word, catalan, enumerate_words, noncrossing_partitions


def nc_moment_oracle(kappas, p):
    """Brute-force moment via full non-crossing partition enumeration."""
    total = Fraction(0)
    for part in noncrossing_partitions(p):
        prod = Fraction(1)
        for block in part.blocks:
            prod *= kappas[len(block) - 1] if len(block) <= len(kappas) else Fraction(0)
        total += prod
    return total


def centered_trace_oracle(word, marginal):
    """Freeness-by-centering oracle for free product traces.

    Factors are (letter, coefficient list) single-variable polynomials;
    an alternating product of centered factors has trace zero, so the
    trace expands over proper subsets of factors replaced by their means.
    """
    def poly_mean(letter, coeffs):
        return sum((c * marginal(letter, j) for j, c in enumerate(coeffs)),
                   Fraction(0))

    def poly_mul(a, b):
        out = [Fraction(0)] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                out[i + j] += x * y
        return out

    def merge(factors):
        out = []
        for letter, coeffs in factors:
            if out and out[-1][0] == letter:
                out[-1] = (letter, poly_mul(out[-1][1], coeffs))
            else:
                out.append((letter, list(coeffs)))
        return out

    def trace(factors):
        factors = merge(factors)
        if not factors:
            return Fraction(1)
        if len(factors) == 1:
            return poly_mean(*factors[0])
        means = [poly_mean(letter, coeffs) for letter, coeffs in factors]
        centered = []
        for (letter, coeffs), mean in zip(factors, means):
            cc = list(coeffs)
            cc[0] -= mean
            centered.append((letter, cc))
        total = Fraction(0)
        m = len(factors)
        for mask in range(1, 2 ** m):  # nonempty subsets become scalars
            scalar = Fraction(1)
            rest = []
            for j in range(m):
                if mask & (1 << j):
                    scalar *= means[j]
                else:
                    rest.append(centered[j])
            if scalar:
                total += scalar * trace(rest)
        return total  # the all-centered alternating term vanishes

    factors = [(letter, [Fraction(0)] * r + [Fraction(1)])
               for letter, r in word.runs()]
    return trace(factors)


def semicircle_marginal(letter, j):
    if j % 2 == 1:
        return Fraction(0)
    return Fraction(catalan(j // 2))


class TestSemicircle:
    def test_catalan_moments(self):
        tau = semicircle_state(1, 1)
        assert tau.moment(Word([1] * 4)) == 2
        assert tau.moment(Word([1] * 6)) == 5
        assert tau.moment(Word([1] * 3)) == 0
        assert tau.moment(Word([1] * 30)) == catalan(15)

    def test_variance_scaling(self):
        tau = semicircle_state(Fraction(1, 4), 1)
        assert tau.moment(Word([1, 1])) == Fraction(1, 4)
        assert tau.moment(Word([1] * 4)) == 2 * Fraction(1, 16)

    def test_free_pair(self):
        tau = semicircle_state(1, 2)
        assert tau.moment(Word([1, 2, 1])) == 0
        assert tau.moment(Word([1, 1, 2, 2, 1, 1])) == 2
        assert tau.moment(Word([1, 2, 1, 2])) == 0
        assert tau.moment(Word([1, 2, 2, 1])) == 1


class TestFreePoisson:
    def test_low_moments(self):
        c = Fraction(5)
        tau = free_poisson_state(c, 2)
        assert tau.moment(Word([1])) == c
        assert tau.moment(Word([1, 1])) == c + c * c
        assert tau.moment(Word([1, 1, 1])) == c + 3 * c * c + c ** 3
        assert tau.moment(Word([1, 2])) == c * c

    def test_marginal_matches_nc_enumeration(self):
        c = Fraction(3, 2)
        tau = free_poisson_state(c, 1)
        kappas = [c] * 8
        for p in range(1, 9):
            assert tau.moment(Word([1] * p)) == nc_moment_oracle(kappas, p)


class TestCumulantTransforms:
    def test_semicircle_cumulants(self):
        moments = [Fraction(0), Fraction(1), Fraction(0), Fraction(2),
                   Fraction(0), Fraction(5), Fraction(0), Fraction(14)]
        table = cumulants_from_moments(moments)
        assert table.kappas[1] == 1
        assert all(k == 0 for i, k in enumerate(table.kappas) if i != 1)

    def test_constant_cumulants_m3(self):
        c = Fraction(7, 3)
        ms = moments_from_cumulants(CumulantTable.constant(c, 8), 3)
        assert ms[2] == c + 3 * c * c + c ** 3

    def test_matches_nc_partition_oracle(self):
        kappas = tuple(Fraction(k + 1, 2) for k in range(7))
        ms = moments_from_cumulants(CumulantTable(kappas), 7)
        for p in range(1, 8):
            assert ms[p - 1] == nc_moment_oracle(list(kappas), p)

    @given(st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=4),
                    min_size=1, max_size=12))
    @settings(max_examples=40)
    def test_round_trip(self, moments):
        table = cumulants_from_moments(moments)
        back = moments_from_cumulants(table, len(moments))
        assert back == [Fraction(x) for x in moments]


class TestFreeProductMoment:
    def test_alternating_centered_vanishes(self):
        tables = [CumulantTable.semicircle(1)] * 2
        assert free_product_moment(Word([1, 2]), tables) == 0

    def test_single_letter_words_match_marginal(self):
        tau = free_poisson_state(Fraction(2), 2)
        ms = moments_from_cumulants(CumulantTable.constant(Fraction(2), 12), 10)
        for p in range(1, 11):
            assert free_product_moment(Word([2] * p), tau.tables) == ms[p - 1]

    def test_missing_table(self):
        with pytest.raises(MomentError):
            free_product_moment(Word([1, 3]), [CumulantTable.semicircle(1)] * 2)

    def test_oracle_agreement_semicircle_pairs(self):
        tau = semicircle_state(1, 2)
        for w in enumerate_words(2, 6):
            assert tau.moment(w) == centered_trace_oracle(w, semicircle_marginal), w

    def test_oracle_agreement_poisson(self):
        c = Fraction(2)
        tau = free_poisson_state(c, 2)
        marginals = moments_from_cumulants(CumulantTable.constant(c, 10), 8)

        def marginal(letter, j):
            return Fraction(1) if j == 0 else marginals[j - 1]

        for w in enumerate_words(2, 5):
            assert tau.moment(w) == centered_trace_oracle(w, marginal), w


class TestTraciality:
    @given(st.lists(st.integers(1, 2), max_size=5),
           st.lists(st.integers(1, 2), max_size=5))
    @settings(max_examples=60)
    def test_trace_property_semicircle(self, u, v):
        tau = semicircle_state(1, 2)
        assert tau.moment(Word(u) * Word(v)) == tau.moment(Word(v) * Word(u))

    def test_trace_property_poisson_random_pairs(self):
        rng = np.random.default_rng(0)
        tau = free_poisson_state(Fraction(5), 2)
        pool = enumerate_words(2, 4)
        for _ in range(200):
            u = pool[rng.integers(len(pool))]
            v = pool[rng.integers(len(pool))]
            assert tau.moment(u * v) == tau.moment(v * u)

    def test_memoization_invisible(self):
        a = semicircle_state(1, 2)
        b = semicircle_state(1, 2)
        words = enumerate_words(2, 4)
        first = [a.moment(w) for w in words]
        again = [a.moment(w) for w in words]  # cached
        fresh = [b.moment(w) for w in words]
        assert first == again == fresh

    def test_concurrent_memo_inserts_idempotent(self):
        from concurrent.futures import ThreadPoolExecutor
        tau = semicircle_state(1, 2)
        words = enumerate_words(2, 5)
        with ThreadPoolExecutor(max_workers=8) as pool:
            futures = [pool.submit(lambda: [tau.moment(w) for w in words])
                       for _ in range(8)]
            results = [f.result() for f in futures]
        reference = [semicircle_state(1, 2).moment(w) for w in words]
        assert all(r == reference for r in results)


class TestMomentTable:
    def test_semicircle_prefix(self):
        entries = {Word(): Fraction(1), Word([1]): Fraction(0),
                   Word([1, 1]): Fraction(1), Word([1, 1, 1]): Fraction(0),
                   Word([1] * 4): Fraction(2)}
        tau = moment_table_state(entries, 1, 2)
        ref = semicircle_state(1, 1)
        for w in enumerate_words(1, 4):
            assert tau.moment(w) == ref.moment(w)

    def test_trivial(self):
        tau = moment_table_state({Word(): Fraction(1)}, 1, 0)
        assert tau.moment(Word()) == 1

    def test_inconsistent_duplicates_rejected(self):
        with pytest.raises(ValueError):
            moment_table_state({Word([1, 2]): Fraction(1),
                                Word([2, 1]): Fraction(2)}, 2, 1)

    def test_missing_moment(self):
        tau = moment_table_state({Word(): Fraction(1)}, 1, 0)
        with pytest.raises(MomentError):
            tau.moment(Word([1]))

    def test_csv_loader(self):
        text = "# semicircle prefix\n1,1\nX1,0\nX1X1,1\nX1^3,0\nX1^4,2\n"
        tau = load_moment_table(text, 1, 2)
        assert tau.moment(Word([1, 1, 1, 1])) == 2

    def test_csv_rational_values(self):
        tau = load_moment_table("1,1\nX1,1/3\nX1X1,2/3\n", 1, 1)
        assert tau.moment(Word([1])) == Fraction(1, 3)


class TestVerifyState:
    def test_semicircle_valid(self):
        report = verify_state(semicircle_state(1, 1), 3)
        assert report.psd and report.tracial and report.star_symmetric
        assert report.min_eigenvalue > -1e-12

    def test_negative_variance_table(self):
        entries = {Word(): Fraction(1), Word([1]): Fraction(0),
                   Word([1, 1]): Fraction(-1)}
        report = verify_state(moment_table_state(entries, 1, 1), 1)
        assert not report.psd
        assert report.min_eigenvalue < 0

    def test_poisson_pair(self):
        report = verify_state(free_poisson_state(Fraction(5), 2), 2)
        assert report.psd
        assert report.growth_bound > 1

    def test_exact_mode(self):
        report = verify_state(semicircle_state(1, 2), 2, exact=True)
        assert report.psd_exact is True
        entries = {Word(): Fraction(1), Word([1]): Fraction(0),
                   Word([1, 1]): Fraction(-1)}
        report2 = verify_state(moment_table_state(entries, 1, 1), 1, exact=True)
        assert report2.psd_exact is False


class TestExactPsd:
    def test_psd_and_not(self):
        f = Fraction
        assert exact_psd([[f(2), f(1)], [f(1), f(2)]])
        assert not exact_psd([[f(1), f(2)], [f(2), f(1)]])
        # singular PSD
        assert exact_psd([[f(1), f(1)], [f(1), f(1)]])
        # zero pivot with nonzero row is not PSD
        assert not exact_psd([[f(0), f(1)], [f(1), f(0)]])

    def test_agrees_with_numpy_on_random_rationals(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            size = int(rng.integers(1, 6))
            raw = rng.integers(-3, 4, size=(size, size))
            sym = [[Fraction(int(raw[i, j] + raw[j, i])) for j in range(size)]
                   for i in range(size)]
            numeric = np.array([[float(x) for x in row] for row in sym])
            eig = np.linalg.eigvalsh(numeric).min()
            if abs(eig) < 1e-9:
                continue
            assert exact_psd(sym) == (eig > 0)
