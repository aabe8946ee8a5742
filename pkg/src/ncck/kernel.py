"""Christoffel-Darboux kernel: construction, evaluation, and identities.

The kernel of degree d is kappa(X, Y) = sum over basis words of
P_w(X) (x) P_w*(Y).  It is stored through the monic orthogonal system
(Q_w, nu_w), which keeps every coefficient rational: the diagonal
restriction is sum Q_w Q_w* / nu_w and the coefficient matrix of the
bivariate kernel in the monomial basis is the exact inverse moment matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ncck.gram import OrthoBasis, free_product_orthobasis, gram_schmidt
from ncck.poly import MatrixNcPolynomial, NcPolynomial, TensorPolynomial, word_matrix
from ncck.states import FreeProductState, TracialState
from ncck.words import EMPTY_WORD, Word, sigma

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class LevelSetSpec:
    """Band n - eps <= trace-Siciak approximant <= n + eps at degree d."""

    target: float          # the variable count n
    epsilon: float
    k: int
    d: int

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


class KernelRep:
    """Degree-d Christoffel-Darboux kernel over a tracial state."""

    def __init__(self, state: TracialState, basis: OrthoBasis,
                 single_bases: list[OrthoBasis] | None = None):
        self.state = state
        self.basis = basis
        self.single_bases = single_bases
        self.d = basis.degree
        self.n = basis.n
        self._minv: list[list[Fraction]] | None = None
        self._diag: NcPolynomial | None = None
        self._D: np.ndarray | None = None

    @property
    def words(self) -> list[Word]:
        return self.basis.words

    def inverse_moment_matrix(self) -> list[list[Fraction]]:
        """Exact L^T N^{-1} L over the retained word index."""
        if self._minv is None:
            L = self.basis.coefficient_matrix()
            nu = [self.basis.norms[w] for w in self.words]
            size = len(nu)
            self._minv = [
                [sum(L[w][i] * L[w][j] / nu[w] for w in range(size))
                 for j in range(size)]
                for i in range(size)]
        return self._minv

    def orthonormal_matrix(self) -> np.ndarray:
        if self._D is None:
            self._D = self.basis.orthonormal_matrix()
        return self._D

    def diagonal_polynomial(self) -> NcPolynomial:
        """kappa(X, X)(1) = sum Q_w Q_w* / nu_w as one exact polynomial."""
        if self._diag is None:
            total = NcPolynomial()
            for w in self.words:
                q = self.basis.polys[w]
                total = total + q * q.star() * (1 / self.basis.norms[w])
            self._diag = total
        return self._diag

    def tensor_form(self) -> TensorPolynomial:
        """sum_w (Q_w / nu_w) (x) Q_w* in bilinear normal form."""
        total = TensorPolynomial()
        for w in self.words:
            q = self.basis.polys[w]
            scaled = q * (1 / self.basis.norms[w])
            total = total + TensorPolynomial.from_pair(scaled, q.star())
        return total


def cd_kernel(state: TracialState, d: int) -> KernelRep:
    """Kernel from Gram-Schmidt on the state's moment sequence."""
    return KernelRep(state, gram_schmidt(state, d))


def cd_kernel_free_product(state: FreeProductState, d: int) -> KernelRep:
    """Kernel of a free product state from its single-variable systems;
    equal to cd_kernel but built in O(n * d) Gram-Schmidt size."""
    singles = []
    for table in state.tables:
        marginal = FreeProductState([table])
        singles.append(gram_schmidt(marginal, d))
    return KernelRep(state, free_product_orthobasis(singles, d), singles)


def _word_powers(words: Sequence[Word], matrices: list[np.ndarray]) -> dict[Word, np.ndarray]:
    k = matrices[0].shape[0]
    powers: dict[Word, np.ndarray] = {EMPTY_WORD: np.eye(k, dtype=complex)}

    def power(w: Word) -> np.ndarray:
        m = powers.get(w)
        if m is None:
            m = power(Word(w.letters[:-1])) @ matrices[w.letters[-1] - 1]
            powers[w] = m
        return m

    for w in words:
        power(w)
    return powers


def evaluate_kernel(K: KernelRep, A, B, C: np.ndarray | None = None) -> np.ndarray:
    """kappa(A, B)(C) = sum_{u,v} (M^-1)_{u,v} A^u C B^{v*}."""
    A = [np.asarray(a, dtype=complex) for a in A]
    B = [np.asarray(b, dtype=complex) for b in B]
    k = A[0].shape[0]
    if any(m.shape != (k, k) for m in A + B):
        raise ValueError("evaluation points must be square matrices of equal size")
    if C is None:
        C = np.eye(k, dtype=complex)
    C = np.asarray(C, dtype=complex)
    if C.shape != (k, k):
        raise ValueError("C must match the matrix size")
    words = K.words
    minv = np.array([[float(x) for x in row] for row in K.inverse_moment_matrix()])
    pa = _word_powers(words, A)
    pb = _word_powers([w.star() for w in words], B)
    left = np.stack([pa[w] for w in words])             # (s, k, k)
    right = np.stack([pb[w.star()] for w in words])     # (s, k, k)
    # sum_{u,v} minv[u,v] A^u C B^{v*}
    tmp = np.einsum("uv,vab->uab", minv, right)
    return np.einsum("uij,jk,ukb->ib", left, C, tmp)


def evaluate_kernel_orthonormal_sum(K: KernelRep, A, B, C: np.ndarray | None = None) -> np.ndarray:
    """Same value through sum_w P_w(A) C P_w*(B); cross-checks the
    inverse-moment-matrix route."""
    A = [np.asarray(a, dtype=complex) for a in A]
    B = [np.asarray(b, dtype=complex) for b in B]
    k = A[0].shape[0]
    if C is None:
        C = np.eye(k, dtype=complex)
    C = np.asarray(C, dtype=complex)
    out = np.zeros((k, k), dtype=complex)
    for w in K.words:
        p = K.basis.orthonormal_poly(w)
        pw_a = np.zeros((k, k), dtype=complex)
        pw_star_b = np.zeros((k, k), dtype=complex)
        for v, c in p.terms.items():
            pw_a += complex(c) * word_matrix(v, A)
            pw_star_b += np.conj(complex(c)) * word_matrix(v.star(), B)
        out += pw_a @ C @ pw_star_b
    return out


def kernel_value(K: KernelRep, A) -> np.ndarray:
    """kappa(A, A*)(I_k): the positive-semidefinite kernel value used by
    the Christoffel function and the Siciak approximants."""
    A = [np.asarray(a, dtype=complex) for a in A]
    A_star = [a.conj().T for a in A]
    value = evaluate_kernel(K, A, A_star)
    return (value + value.conj().T) / 2


def christoffel_function(K: KernelRep, A) -> np.ndarray:
    """Lambda(A) = kappa(A, A*)(I_k)^{-1}; satisfies 0 < Lambda <= I."""
    value = kernel_value(K, A)
    cond = np.linalg.cond(value)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise ValueError(f"kernel value is numerically singular (cond={cond:.3g})")
    k = value.shape[0]
    return np.linalg.solve(value, np.eye(k, dtype=complex))


def variational_minimizer(K: KernelRep, A) -> MatrixNcPolynomial:
    """The matrix polynomial achieving the Christoffel minimum:
    P(X) = (Lambda(A) (x) 1) sum_w P_w(A) (x) P_w*(X), expanded over
    monomials.

    The tuple must be selfadjoint: only then does evaluating the starred
    basis at A produce the adjoints P_w(A)* that make the normalization
    P(A)(I_k) = I_k come out."""
    A = [np.asarray(a, dtype=complex) for a in A]
    k = A[0].shape[0]
    for a in A:
        if np.abs(a - a.conj().T).max() > 1e-12 * max(1.0, np.abs(a).max()):
            raise ValueError("variational minimizer needs a selfadjoint tuple")
    lam = christoffel_function(K, A)
    D = K.orthonormal_matrix()
    words = K.words
    powers = _word_powers(words, A)
    values = np.stack([powers[w] for w in words])      # (s, k, k)
    pw_at_A = np.einsum("wv,vij->wij", D, values)      # P_w(A)
    # coefficient of X^{v*} collects sum_w Lambda P_w(A) D[w, v]
    coeff = np.einsum("wv,wij->vij", D, pw_at_A)       # (s, k, k) indexed by v
    terms = {}
    for i, v in enumerate(words):
        terms[v.star()] = lam @ coeff[i]
    return MatrixNcPolynomial(terms, k)


def expected_square_norm(K: KernelRep, P: MatrixNcPolynomial) -> np.ndarray:
    """(Id (x) tau)(P P*) = sum_{u,v} tau(u v*) c_u c_v^adj for a matrix
    polynomial over the kernel's state."""
    words = list(P.terms)
    gram = np.array([[float(K.state.moment(v.star() * u)) for v in words]
                     for u in words])
    coeffs = np.stack([P.terms[w] for w in words])
    return np.einsum("uv,uij,vkj->ik", gram, coeffs, coeffs.conj())


def siciak_trace(K: KernelRep, A) -> float:
    """tr_k(kappa(A, A*)(I_k))^(1/d), the trace Siciak approximant."""
    if K.d < 1:
        raise ValueError("degree must be >= 1")
    value = kernel_value(K, A)
    k = value.shape[0]
    t = float(np.trace(value).real) / k
    return t ** (1.0 / K.d)


def siciak_norm(K: KernelRep, A) -> float:
    """Operator-norm variant of the Siciak approximant."""
    if K.d < 1:
        raise ValueError("degree must be >= 1")
    value = kernel_value(K, A)
    return float(np.linalg.norm(value, 2)) ** (1.0 / K.d)


def level_set_contains(K: KernelRep, spec: LevelSetSpec, A) -> bool:
    phi = siciak_trace(K, A)
    return spec.target - spec.epsilon <= phi <= spec.target + spec.epsilon


@dataclass
class KernelIdentityReport:
    normalization_value: Fraction
    normalization_expected: int
    reproducing_ok: bool
    symmetry_ok: bool
    failures: list[str]

    def ok(self) -> bool:
        return (self.normalization_value == self.normalization_expected
                and self.reproducing_ok and self.symmetry_ok)


def kernel_identities(state: TracialState, d: int,
                      kernel: KernelRep | None = None) -> KernelIdentityReport:
    """Exact checks: (tau (x) tau)(kappa* kappa) = sigma(n, d), the
    reproducing property on every monomial of length <= d, and the
    symmetry sum P_w (x) P_w* = sum P_w* (x) P_w."""
    K = kernel if kernel is not None else cd_kernel(state, d)
    failures: list[str] = []
    kappa = K.tensor_form()

    # normalization, with the op-side product on the second tensor slot
    product = kappa.star().multiply_op(kappa)
    total = Fraction(0)
    for (u, v), c in product.terms.items():
        total += Fraction(c) * state.moment(u) * state.moment(v)
    expected = len(K.words)
    if not K.basis.dropped:
        expected = sigma(state.n, d)
    if total != expected:
        failures.append(f"normalization {total} != {expected}")

    # reproducing property: (Id (x) tau)(kappa(X,Y)(1 (x) P(Y))) = P(X)
    reproducing_ok = True
    from ncck.words import enumerate_words
    for w in enumerate_words(state.n, d):
        p = NcPolynomial.monomial(w)
        fused = kappa.multiply(TensorPolynomial.from_pair(
            NcPolynomial.constant(Fraction(1)), p))
        got = fused.contract_right(state.moment)
        if got != p:
            reproducing_ok = False
            failures.append(f"reproducing failed on {w.text()}")
            break

    # symmetry of the bivariate kernel under swapping the starred slot
    swapped = TensorPolynomial(
        {(v, u): c for (u, v), c in kappa.terms.items()})
    symmetry_ok = swapped == kappa
    if not symmetry_ok:
        failures.append("kernel is not slot-symmetric")

    return KernelIdentityReport(total, expected, reproducing_ok, symmetry_ok,
                                failures)
