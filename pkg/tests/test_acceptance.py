"""Acceptance gate: every criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion.  The Monte Carlo criterion draws its full sample sizes and
takes a few minutes; everything else is near-instant.
"""

import json
import pathlib
import time
from fractions import Fraction

import numpy as np
import pytest

from ncck.gram import (
    free_product_orthobasis,
    gram_schmidt,
    inverse_factorization,
    moment_matrix,
)
from ncck.kernel import (
    LevelSetSpec,
    cd_kernel,
    cd_kernel_free_product,
    christoffel_function,
    evaluate_kernel,
    expected_square_norm,
    kernel_identities,
    kernel_value,
    siciak_norm,
    siciak_trace,
    variational_minimizer,
)
from ncck.poly import MatrixNcPolynomial, evaluate_tuple, parse_poly
from ncck.sampling import SamplerConfig, rejection_sample
from ncck.sdp import (
    build_relaxation,
    check_feasibility,
    export_sdpa,
    parse_sdpa,
    sdpa_round_trip_equal,
)
from ncck.states import (
    free_poisson_state,
    moment_table_state,
    semicircle_state,
)
from ncck.words import Word, enumerate_words, sigma

from reference_formulas import (
    pair_semicircle_kernel,
    poisson_pair_kernel,
    semicircle_kernel,
)
from test_states import centered_trace_oracle, semicircle_marginal

F = Fraction
FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def ok(criterion: str, detail: str = ""):
    print(f"[acceptance] {criterion}: PASS {detail}".rstrip())


def rand_selfadjoint_tuple(rng, n, k):
    out = []
    for _ in range(n):
        x = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
        out.append((x + x.conj().T) / 2)
    return out


def test_criterion_1_exact_kernel_reproduction():
    started = time.perf_counter()
    for d in (1, 2, 3, 4):
        K = cd_kernel(semicircle_state(1, 1), d)
        assert K.diagonal_polynomial() == semicircle_kernel(d)
    for d in (1, 2, 3):
        K = cd_kernel(semicircle_state(1, 2), d)
        assert K.diagonal_polynomial() == pair_semicircle_kernel(d)
    for c in (F(1), F(5)):
        for d in (1, 2):
            K = cd_kernel(free_poisson_state(c, 2), d)
            assert K.diagonal_polynomial() == poisson_pair_kernel(d, c)
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0
    ok("criterion 1 (exact kernels, zero tolerance)", f"in {elapsed:.2f}s")


def test_criterion_2_normalization_identity():
    for n, ds in ((1, (1, 2, 3, 4)), (2, (1, 2, 3))):
        for d in ds:
            report = kernel_identities(semicircle_state(1, n), d)
            assert report.normalization_value == sigma(n, d), (n, d)
    ok("criterion 2 (kernel normalization = sigma(n,d), exact)")


def test_criterion_3_reproducing_property():
    report = kernel_identities(semicircle_state(1, 2), 3)
    assert report.reproducing_ok
    assert report.normalization_value == sigma(2, 3)
    ok("criterion 3 (reproducing property at (n,d) = (2,3), exact)")


def test_criterion_4_inverse_factorization():
    cases = []
    for n in (1, 2):
        for d in (1, 2, 3):
            cases.append((semicircle_state(1, n), n, d))
            cases.append((free_poisson_state(F(5), n), n, d))
    worst = 0.0
    for state, n, d in cases:
        fact = inverse_factorization(moment_matrix(state, d),
                                     gram_schmidt(state, d))
        assert fact.exact_identity, (n, d)
        assert fact.max_error <= 1e-10, (n, d, fact.max_error)
        worst = max(worst, fact.max_error)
    ok("criterion 4 (M^-1 = L^T N^-1 L exact; float error <= 1e-10)",
       f"max float error {worst:.2e}")


def test_criterion_5_free_product_oracle_equivalence():
    tau = semicircle_state(1, 2)
    assert tau.moment(Word([1, 1, 2, 2, 1, 1])) == 2
    assert tau.moment(Word([1, 2, 1])) == 0
    checked = 0
    for w in enumerate_words(2, 8):
        assert tau.moment(w) == centered_trace_oracle(w, semicircle_marginal), w
        checked += 1
    ok("criterion 5 (NC-cumulant moments == centering oracle, exact)",
       f"{checked} words of length <= 8")


def test_criterion_6_orthobasis_equivalence():
    tau = semicircle_state(1, 2)
    single = gram_schmidt(semicircle_state(1, 1), 4)
    fp = free_product_orthobasis([single, single], 4)
    gs = gram_schmidt(tau, 4)
    assert fp.words == gs.words
    for w in fp.words:
        assert fp.polys[w] == gs.polys[w], w.text()
        assert fp.norms[w] == gs.norms[w], w.text()
    ok("criterion 6 (Gram-Schmidt == free-product basis, n=2, d<=4, exact)")


def test_criterion_7_variational_theorem():
    rng = np.random.default_rng(42)
    kernels = {d: cd_kernel(semicircle_state(1, 2), d) for d in (1, 2, 3)}
    minimizer_worst = 0.0
    domination_worst = np.inf
    for trial in range(100):
        d = (1, 2, 3)[trial % 3]
        k = int(rng.integers(1, 4))
        K = kernels[d]
        A = rand_selfadjoint_tuple(rng, 2, k)
        lam = christoffel_function(K, A)
        P = variational_minimizer(K, A)
        # the minimizer is feasible and achieves the Christoffel value
        assert np.abs(evaluate_tuple(P, A) - np.eye(k)).max() < 1e-9
        err = np.abs(expected_square_norm(K, P) - lam).max()
        minimizer_worst = max(minimizer_worst, err)
        assert err < 1e-9
        # random feasible perturbations never beat it
        words = K.words
        powers = np.stack([np.linalg.multi_dot([np.eye(k)] + [A[a - 1] for a in w])
                           if len(w) else np.eye(k, dtype=complex)
                           for w in words])
        rows = powers.reshape(len(words), -1)
        _, s, vt = np.linalg.svd(rows.T, full_matrices=True)
        null = vt[np.sum(s > 1e-9 * max(1, s.max())):].conj()
        if null.size == 0:
            continue
        for _ in range(100):
            combo = null.T @ (rng.normal(size=(null.shape[0], k * k))
                              + 1j * rng.normal(size=(null.shape[0], k * k)))
            pert = {w: combo[i].reshape(k, k) for i, w in enumerate(words)}
            Q = P + MatrixNcPolynomial(pert, k)
            diff = expected_square_norm(K, Q) - lam
            min_eig = np.linalg.eigvalsh((diff + diff.conj().T) / 2).min()
            domination_worst = min(domination_worst, min_eig)
            assert min_eig >= -1e-8
    ok("criterion 7 (variational theorem, 100 points x 100 perturbations)",
       f"minimizer error {minimizer_worst:.2e}, "
       f"worst domination eigenvalue {domination_worst:.2e}")


def test_criterion_8_positivity_and_invariance():
    rng = np.random.default_rng(43)
    K = cd_kernel(semicircle_state(1, 2), 2)
    for _ in range(100):
        k = int(rng.integers(1, 4))
        A = rand_selfadjoint_tuple(rng, 2, k)
        lam = christoffel_function(K, A)
        assert np.linalg.eigvalsh((lam + lam.conj().T) / 2).max() <= 1 + 1e-10
        x = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
        C = x @ x.conj().T
        got = evaluate_kernel(K, A, [a.conj().T for a in A], C)
        assert np.linalg.eigvalsh((got + got.conj().T) / 2 - C).min() >= -1e-9
        t = siciak_trace(K, A)
        assert t >= 1 - 1e-12
        assert siciak_norm(K, A) >= t - 1e-12
        z = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
        U, _ = np.linalg.qr(z)
        assert abs(siciak_trace(K, [U @ a @ U.conj().T for a in A]) - t) < 1e-9
    ok("criterion 8 (Lambda <= I, kappa >= C, Siciak bounds/invariance; "
       "100 trials)")


@pytest.fixture(scope="module")
def figure1_kernels():
    return {d: cd_kernel(semicircle_state(1, 1), d) for d in (2, 5, 7, 12, 15)}


def test_criterion_9_monte_carlo(figure1_kernels):
    f1 = parse_poly("X1^2")
    f2 = parse_poly("X1*X1*X2*X2*X1*X1")
    lines = []

    # pinned Figure 1 points at N = 1e5 (entry and bulk agree at k = 2)
    rep_a = rejection_sample(
        figure1_kernels[2], LevelSetSpec(1, 0.7, 2, 2),
        SamplerConfig(law="goe", k=2, sigma=1.0, seed=101), 100_000, f1)
    hit_a = abs(rep_a.mean - 0.368) <= 0.1
    lines.append(f"(d=2,k=2) mean {rep_a.mean:.3f} vs 0.368+-0.1 "
                 f"{'HIT' if hit_a else 'miss'}")

    rep_b = rejection_sample(
        figure1_kernels[15], LevelSetSpec(1, 0.7, 10, 15),
        SamplerConfig(law="goe", k=10, sigma=1.0, seed=102,
                      convention="bulk"), 100_000, f1)
    hit_b = abs(rep_b.mean - 0.823) <= 0.1
    lines.append(f"(d=15,k=10) mean {rep_b.mean:.3f} vs 0.823+-0.1 "
                 f"{'HIT' if hit_b else 'miss'}")

    # pinned Figure 2 point
    pair_kernel = cd_kernel_free_product(semicircle_state(1, 2), 8)
    rep_c = rejection_sample(
        pair_kernel, LevelSetSpec(2, 0.7, 4, 8),
        SamplerConfig(law="goe", k=4, sigma=1.0, seed=103,
                      convention="bulk"), 100_000, f2)
    hit_c = abs(rep_c.mean - 2.02) <= 0.15
    lines.append(f"(d=8,k=4) mean {rep_c.mean:.3f} vs 2.02+-0.15 "
                 f"{'HIT' if hit_c else 'miss'}")

    # Wishart sequence: unambiguous normalization, required outright
    tau_poisson = free_poisson_state(F(5), 2)
    wishart_means = []
    for d in (1, 2, 3, 4, 5):
        K = cd_kernel_free_product(tau_poisson, d)
        rep = rejection_sample(
            K, LevelSetSpec(2, 10.0, 5, d),
            SamplerConfig(law="wishart", k=5, c=5.0, seed=104), 100_000,
            parse_poly("X1 + X2"))
        wishart_means.append(rep.mean)
    lines.append("wishart means " + " ".join(f"{m:.3f}" for m in wishart_means))
    for earlier, later in zip(wishart_means, wishart_means[1:]):
        assert later <= earlier + 0.05, wishart_means
    assert 9.9 <= wishart_means[-1] <= 10.6, wishart_means

    if not (hit_a and hit_b and hit_c):
        # fallback under the alternative (bulk) convention: the mean
        # approaches tau(f) monotonically in d and the final gap is < 20%
        grid_means = {}
        for k in (2, 3, 5, 10):
            for d in (2, 5, 7, 12, 15):
                rep = rejection_sample(
                    figure1_kernels[d], LevelSetSpec(1, 0.7, k, d),
                    SamplerConfig(law="goe", k=k, sigma=1.0, seed=105,
                                  convention="bulk"), 20_000, f1)
                grid_means[(d, k)] = rep.mean
        for k in (2, 3, 5, 10):
            seq = [grid_means[(d, k)] for d in (2, 5, 7, 12, 15)]
            for earlier, later in zip(seq, seq[1:]):
                assert later >= earlier - 0.05, (k, seq)
        final_gap = abs(grid_means[(15, 10)] - 1.0) / 1.0
        assert final_gap < 0.20, grid_means
        lines.append(f"fallback figure 1: monotone, final gap {final_gap:.1%}")

        pair_means = []
        for d in (1, 2, 4, 6, 8):
            K = cd_kernel_free_product(semicircle_state(1, 2), d)
            rep = rejection_sample(
                K, LevelSetSpec(2, 0.7, 4, d),
                SamplerConfig(law="goe", k=4, sigma=1.0, seed=106,
                              convention="bulk"), 20_000, f2)
            pair_means.append(rep.mean)
        for earlier, later in zip(pair_means, pair_means[1:]):
            assert later >= earlier - 0.05, pair_means
        final_gap2 = abs(pair_means[-1] - 2.0) / 2.0
        assert final_gap2 < 0.20, pair_means
        lines.append(f"fallback figure 2: monotone, final gap {final_gap2:.1%}")

    ok("criterion 9 (Monte Carlo reproduction / convention fallback)",
       "; ".join(lines))


def test_criterion_10_sdp():
    # export / reparse round trip, bit-exact
    f = parse_poly("X1^2 + X2^2")
    problem = build_relaxation(f, [parse_poly("1 - X1^2 - X2^2")], 2, n=2)
    assert sdpa_round_trip_equal(problem, parse_sdpa(export_sdpa(problem)))

    # own-state feasibility at tol 1e-9
    semi = build_relaxation(parse_poly("X1^2"), [], 2, n=1)
    assert check_feasibility(semi, semicircle_state(1, 1), tol=1e-9).feasible
    pois = build_relaxation(parse_poly("X1^2 + X2^2"), [], 2, n=2)
    assert check_feasibility(pois, free_poisson_state(F(5), 2), tol=1e-9).feasible

    # corrupted table rejected
    bad = moment_table_state({Word(): F(1), Word([1]): F(0),
                              Word([1, 1]): F(-1)}, 1, 1)
    toy = build_relaxation(parse_poly("X1^2"), [], 1, n=1)
    assert not check_feasibility(toy, bad, tol=1e-9).feasible

    # analytic optima of the order-1 toys, via the recorded solver fixture
    fixture = json.loads((FIXTURES / "toy_sdp_optima.json").read_text())
    assert abs(fixture["square"]["optimum"] - 0.0) <= 1e-6
    assert abs(fixture["interval"]["optimum"] - (-1.0)) <= 1e-6
    witness_sq = check_feasibility(toy, semicircle_state(1, 1))
    assert witness_sq.feasible
    assert witness_sq.objective >= fixture["square"]["optimum"] - 1e-7
    interval = build_relaxation(parse_poly("X1"), [parse_poly("1 - X1^2")], 1, n=1)
    witness_iv = check_feasibility(interval, semicircle_state(F(1, 4), 1))
    assert witness_iv.feasible
    assert witness_iv.objective >= fixture["interval"]["optimum"] - 1e-7
    ok("criterion 10 (SDP round trip, feasibility certificates, "
       "solver fixture optima 0 and -1)")
