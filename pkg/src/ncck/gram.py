"""Moment matrices, noncommutative Gram-Schmidt, and orthogonal bases.

Everything here is exact: moment matrices hold rationals, and orthogonal
polynomials are kept monic with exact squared norms so that kernels can be
compared symbolically. Orthonormal (square-root normalized) data is
derived numerically on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ncck.poly import GaussianRational, I_UNIT, NcPolynomial
from ncck.states import MomentError, TracialState
from ncck.words import Word, enumerate_words

DROP_THRESHOLD = Fraction(1, 10 ** 12)


@dataclass
class MomentMatrix:
    degree: int
    words: list[Word]
    entries: list[list[Fraction]]

    def index(self, w: Word) -> int:
        return self.words.index(w)

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries])

    def __eq__(self, other):
        return (isinstance(other, MomentMatrix) and self.words == other.words
                and self.entries == other.entries)


@dataclass
class LocalizingMatrix:
    degree: int
    constraint: NcPolynomial
    words: list[Word]
    entries: list[list[Fraction]]

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries])


def moment_matrix(state: TracialState, d: int) -> MomentMatrix:
    """M_d with entry (u, v) = tau(u* v), words in graded-lex order."""
    words = enumerate_words(state.n, d)
    entries = [[state.moment(u.star() * v) for v in words] for u in words]
    return MomentMatrix(d, words, entries)


def localizing_matrix(state: TracialState, g: NcPolynomial, d: int) -> LocalizingMatrix:
    """Entries tau(v* g w) over words of length <= d - ceil(deg g / 2)."""
    if not g.is_selfadjoint():
        raise ValueError("constraint polynomial must be selfadjoint")
    deg = max(g.degree(), 0)
    if deg > 2 * d:
        raise ValueError(f"deg g = {deg} exceeds 2d = {2 * d}")
    dj = -(-deg // 2)
    words = enumerate_words(state.n, d - dj)
    entries = []
    for v in words:
        row = []
        for w in words:
            total = Fraction(0)
            for gw, c in g.terms.items():
                total += Fraction(c) * state.moment(v.star() * gw * w)
            row.append(total)
        entries.append(row)
    return LocalizingMatrix(d, g, words, entries)


@dataclass
class OrthoBasis:
    """Monic orthogonal system: Q_w with leading word w and exact squared
    norm nu_w = tau(Q_w* Q_w) > 0; dropped words are recorded for
    non-faithful states."""

    n: int
    degree: int
    words: list[Word]                       # retained, graded-lex order
    polys: dict[Word, NcPolynomial]         # monic Q_w
    norms: dict[Word, Fraction]             # nu_w
    dropped: list[Word] = field(default_factory=list)

    def is_faithful_at_degree(self) -> bool:
        return not self.dropped

    def coefficient_matrix(self) -> list[list[Fraction]]:
        """Lower triangular L with rows = Q_w coefficients over the
        retained word index; unit diagonal."""
        idx = {w: i for i, w in enumerate(self.words)}
        size = len(self.words)
        L = [[Fraction(0)] * size for _ in range(size)]
        for w, q in self.polys.items():
            for v, c in q.terms.items():
                L[idx[w]][idx[v]] = Fraction(c)
        return L

    def orthonormal_matrix(self) -> np.ndarray:
        """Numeric D = diag(nu^-1/2) L: rows are orthonormal P_w."""
        L = self.coefficient_matrix()
        D = np.array([[float(x) for x in row] for row in L])
        scale = np.array([float(self.norms[w]) ** -0.5 for w in self.words])
        return scale[:, None] * D

    def orthonormal_poly(self, w: Word) -> NcPolynomial:
        """Floating-coefficient P_w = Q_w / sqrt(nu_w)."""
        s = float(self.norms[w]) ** -0.5
        return NcPolynomial({v: float(c) * s for v, c in self.polys[w].terms.items()})


def gram_schmidt(state: TracialState, d: int, float_mode: bool = False) -> OrthoBasis:
    """Classical Gram-Schmidt over the monomials in graded-lex order.

    Q_w = w - sum over retained v < w of tau(Q_v* w)/nu_v * Q_v.  A word
    with nu_w = 0 exactly is dropped (non-faithful state); in float mode
    the drop threshold is nu_w <= 1e-12 * tau(w* w).
    """
    words = enumerate_words(state.n, d)
    retained: list[Word] = []
    polys: dict[Word, NcPolynomial] = {}
    norms: dict[Word, Fraction] = {}
    dropped: list[Word] = []
    for w in words:
        q = NcPolynomial.monomial(w)
        ww = state.moment(w.star() * w)
        nu = ww
        for v in retained:
            # tau(Q_v* w): exact inner product against the new monomial
            s = Fraction(0)
            for u, c in polys[v].terms.items():
                s += Fraction(c) * state.moment(u.star() * w)
            if s:
                q = q - (s / norms[v]) * polys[v]
                nu -= s * s / norms[v]
        if nu < 0:
            raise ValueError(
                f"negative squared norm at {w.text()}: the moment functional "
                "is not positive")
        threshold = ww * DROP_THRESHOLD if float_mode else Fraction(0)
        if nu <= threshold:
            dropped.append(w)
            continue
        retained.append(w)
        polys[w] = q
        norms[w] = nu
    return OrthoBasis(state.n, d, retained, polys, norms, dropped)


def free_product_orthobasis(single_bases: list[OrthoBasis], d: int) -> OrthoBasis:
    """Orthogonal system of a free product from single-variable systems.

    For w with maximal constant-letter runs (letter_j, r_j), the monic
    polynomial is the product of the per-variable monic polynomials of
    degree r_j in X_{letter_j}, and nu_w multiplies accordingly.
    """
    n = len(single_bases)
    for basis in single_bases:
        if basis.n != 1:
            raise ValueError("per-variable bases must be single-variable")
        if basis.degree < d:
            raise ValueError("per-variable bases must reach the requested degree")
        if basis.dropped:
            raise ValueError("free product construction needs faithful marginals")
    words = enumerate_words(n, d)
    polys: dict[Word, NcPolynomial] = {}
    norms: dict[Word, Fraction] = {}

    def relabel(p: NcPolynomial, letter: int) -> NcPolynomial:
        return NcPolynomial({Word([letter] * len(u)): c
                             for u, c in p.terms.items()})

    for w in words:
        q = NcPolynomial.constant(Fraction(1))
        nu = Fraction(1)
        for letter, run in w.runs():
            basis = single_bases[letter - 1]
            key = Word([1] * run)
            q = q * relabel(basis.polys[key], letter)
            nu *= basis.norms[key]
        polys[w] = q
        norms[w] = nu
    return OrthoBasis(n, d, words, polys, norms, [])


def selfadjoint_basis(state: TracialState, d: int) -> OrthoBasis:
    """Gram-Schmidt over the hermitized monomial list.

    Walking each homogeneous degree in lexicographic order, a selfadjoint
    monomial stays; a non-selfadjoint w (with w < w*) contributes
    (X^w + X^w*)/2 in slot w and (X^w - X^w*)/(2i) in slot w*.  All
    outputs are exactly selfadjoint.
    """
    words = enumerate_words(state.n, d)
    half = GaussianRational(Fraction(1, 2))
    half_i = GaussianRational(0, Fraction(-1, 2))  # 1/(2i)
    basis_elements: dict[Word, NcPolynomial] = {}
    for w in words:
        ws = w.star()
        if w == ws:
            basis_elements[w] = NcPolynomial.monomial(w, GaussianRational(1))
        elif w < ws:
            basis_elements[w] = (NcPolynomial.monomial(w, half)
                                 + NcPolynomial.monomial(ws, half))
            basis_elements[ws] = (NcPolynomial.monomial(w, half_i)
                                  + NcPolynomial.monomial(ws, -half_i))
    retained: list[Word] = []
    polys: dict[Word, NcPolynomial] = {}
    norms: dict[Word, Fraction] = {}
    dropped: list[Word] = []
    for w in words:
        b = basis_elements[w]
        q = b
        bb = _inner(state, b, b)
        nu = bb
        for v in retained:
            s = _inner(state, polys[v], b)
            if s:
                q = q - (s / norms[v]) * polys[v]
                nu -= s * s.conjugate() / norms[v]
        nu_r = _require_real(nu)
        if nu_r < 0:
            raise ValueError(f"negative squared norm at slot {w.text()}")
        if nu_r == 0:
            dropped.append(w)
            continue
        retained.append(w)
        polys[w] = q
        norms[w] = nu_r
    for w in retained:
        if polys[w].star() != polys[w]:
            raise AssertionError(f"hermitized basis element {w.text()} not selfadjoint")
    return OrthoBasis(state.n, d, retained, polys, norms, dropped)


def _inner(state: TracialState, a: NcPolynomial, b: NcPolynomial):
    """tau(a* b) over exact (possibly Gaussian rational) coefficients."""
    total = GaussianRational(0)
    for u, cu in a.terms.items():
        cu = cu if isinstance(cu, GaussianRational) else GaussianRational(cu)
        for v, cv in b.terms.items():
            cv = cv if isinstance(cv, GaussianRational) else GaussianRational(cv)
            total = total + cu.conjugate() * cv * state.moment(u.star() * v)
    return total


def _require_real(x) -> Fraction:
    if isinstance(x, GaussianRational):
        if not x.is_real():
            raise ValueError("expected a real value")
        return x.re
    return Fraction(x)


@dataclass
class InverseFactorization:
    matrix: MomentMatrix
    L: list[list[Fraction]]       # unit lower triangular, rows = Q_w coeffs
    nu: list[Fraction]            # diagonal of N
    exact_identity: bool          # (L^T N^-1 L) M == I, checked exactly
    D: np.ndarray                 # numeric N^(-1/2) L
    max_error: float              # || inv(M) - D^T D ||_max, numeric inverse

    def inverse_exact(self) -> list[list[Fraction]]:
        size = len(self.nu)
        out = [[Fraction(0)] * size for _ in range(size)]
        for i in range(size):
            for j in range(size):
                acc = Fraction(0)
                for w in range(size):
                    acc += self.L[w][i] * self.L[w][j] / self.nu[w]
                out[i][j] = acc
        return out


def exact_inverse(entries: list[list[Fraction]]) -> list[list[Fraction]]:
    """Rational Gauss-Jordan inverse (independent of any factorization)."""
    size = len(entries)
    a = [row[:] + [Fraction(1 if i == j else 0) for j in range(size)]
         for i, row in enumerate(entries)]
    for col in range(size):
        pivot_row = next((r for r in range(col, size) if a[r][col]), None)
        if pivot_row is None:
            raise ValueError("matrix is singular")
        a[col], a[pivot_row] = a[pivot_row], a[col]
        pivot = a[col][col]
        a[col] = [x / pivot for x in a[col]]
        for r in range(size):
            if r != col and a[r][col]:
                factor = a[r][col]
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
    return [row[size:] for row in a]


def inverse_factorization(M: MomentMatrix, basis: OrthoBasis) -> InverseFactorization:
    """Verify M_d^{-1} = L^T N^{-1} L exactly and numerically.

    The exact reference inverse comes from rational Gauss-Jordan
    elimination, so the numeric max_error measures only the rounding of
    the orthonormal coefficient matrix D."""
    if basis.dropped:
        raise ValueError("state is not faithful at this degree: "
                         + ", ".join(w.text() for w in basis.dropped))
    if basis.words != M.words:
        raise ValueError("basis and moment matrix index different words")
    size = len(M.words)
    L = basis.coefficient_matrix()
    nu = [basis.norms[w] for w in basis.words]

    inv = [[sum(L[w][i] * L[w][j] / nu[w] for w in range(size))
            for j in range(size)] for i in range(size)]
    exact = inv == exact_inverse(M.entries)
    D = np.array([[float(x) for x in row] for row in L])
    D = np.array([float(x) ** -0.5 for x in nu])[:, None] * D
    reference = np.array([[float(x) for x in row] for row in inv])
    max_error = float(np.abs(reference - D.T @ D).max())
    return InverseFactorization(M, L, nu, exact, D, max_error)
