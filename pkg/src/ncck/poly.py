"""Noncommutative polynomials over exact scalars, with matrix evaluation.

Scalar coefficients are anything with ring ops plus ``conjugate()``:
``Fraction`` for exact real work, :class:`GaussianRational` where exact
complex coefficients are needed, plain ``float``/``complex`` for numerics.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ncck.words import EMPTY_WORD, Word


class GaussianRational:
    """Exact complex number with rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def _coerce(x) -> "GaussianRational":
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, (int, Fraction)):
            return GaussianRational(x)
        if isinstance(x, complex):
            raise TypeError("floating complex cannot be coerced exactly")
        return NotImplemented  # type: ignore[return-value]

    @property
    def real(self) -> Fraction:
        return self.re

    @property
    def imag(self) -> Fraction:
        return self.im

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def is_real(self) -> bool:
        return self.im == 0

    def __bool__(self) -> bool:
        return bool(self.re) or bool(self.im)

    def __eq__(self, other) -> bool:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash(complex(self.re, self.im)) if self.im else hash(self.re)

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return -(self - other)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return GaussianRational(self.re * o.re - self.im * o.im,
                                self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError
        return GaussianRational((self.re * o.re + self.im * o.im) / den,
                                (self.im * o.re - self.re * o.im) / den)

    def __rtruediv__(self, other):
        return GaussianRational(other) / self

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return f"GaussianRational({self.re})"
        return f"GaussianRational({self.re}, {self.im})"


I_UNIT = GaussianRational(0, 1)


def _conj(c):
    return c.conjugate() if hasattr(c, "conjugate") else c


def _format_scalar(c) -> str:
    """Render an exact scalar in the CLI grammar (``p/q`` for rationals)."""
    if isinstance(c, GaussianRational):
        if c.is_real():
            return _format_scalar(c.re)
        re, im = _format_scalar(c.re), _format_scalar(c.im)
        return f"({re}+{im}i)" if c.im > 0 else f"({re}{im}i)"
    if isinstance(c, Fraction) and c.denominator == 1:
        return str(c.numerator)
    return str(c)


class NcPolynomial:
    """Sparse noncommutative polynomial: a Word -> coefficient map."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        self.terms: dict[Word, object] = {}
        if terms:
            for w, c in terms.items():
                if c:
                    self.terms[w] = c

    # -- constructors -------------------------------------------------
    @staticmethod
    def zero() -> "NcPolynomial":
        return NcPolynomial()

    @staticmethod
    def constant(c) -> "NcPolynomial":
        return NcPolynomial({EMPTY_WORD: c})

    @staticmethod
    def monomial(w: Word, c=Fraction(1)) -> "NcPolynomial":
        return NcPolynomial({w: c})

    @staticmethod
    def letter(i: int) -> "NcPolynomial":
        return NcPolynomial({Word([i]): Fraction(1)})

    # -- basic structure ----------------------------------------------
    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NcPolynomial):
            return NotImplemented
        if set(self.terms) != set(other.terms):
            return False
        return all(self.terms[w] == other.terms[w] for w in self.terms)

    def __hash__(self):
        return hash(frozenset((w, _freeze(c)) for w, c in self.terms.items()))

    def degree(self) -> int:
        """Max word length; -1 for the zero polynomial."""
        return max((len(w) for w in self.terms), default=-1)

    def coefficient(self, w: Word):
        return self.terms.get(w, Fraction(0))

    def max_letter(self) -> int:
        return max((w.max_letter() for w in self.terms), default=0)

    def words(self) -> list[Word]:
        return sorted(self.terms, key=Word.sort_key)

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, Fraction, GaussianRational, float, complex)):
            other = NcPolynomial.constant(other)
        if not isinstance(other, NcPolynomial):
            return NotImplemented
        out = dict(self.terms)
        for w, c in other.terms.items():
            s = out.get(w, 0) + c
            if s:
                out[w] = s
            else:
                out.pop(w, None)
        return NcPolynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return NcPolynomial({w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, NcPolynomial) else
                       NcPolynomial.constant(other).__neg__())

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, GaussianRational, float, complex)):
            return NcPolynomial({w: c * other for w, c in self.terms.items()})
        if not isinstance(other, NcPolynomial):
            return NotImplemented
        out: dict[Word, object] = {}
        for u, cu in self.terms.items():
            for v, cv in other.terms.items():
                w = u * v
                s = out.get(w, 0) + cu * cv
                if s:
                    out[w] = s
                else:
                    out.pop(w, None)
        return NcPolynomial(out)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, GaussianRational, float, complex)):
            return NcPolynomial({w: other * c for w, c in self.terms.items()})
        return NotImplemented

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative powers are not defined")
        out = NcPolynomial.constant(Fraction(1))
        for _ in range(e):
            out = out * self
        return out

    def star(self) -> "NcPolynomial":
        """Conjugate coefficients, reverse words."""
        return NcPolynomial({w.star(): _conj(c) for w, c in self.terms.items()})

    def is_selfadjoint(self) -> bool:
        return self == self.star()

    # -- evaluation ----------------------------------------------------
    def __call__(self, matrices: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
        """Evaluate at a tuple of square matrices (scalar coefficients)."""
        return evaluate_words(self.terms, matrices)

    def to_float_coeffs(self) -> dict[Word, complex]:
        return {w: complex(c) for w, c in self.terms.items()}

    def text(self) -> str:
        """Graded-lex term list, e.g. ``2 - X1^2 + X1^4``."""
        if not self.terms:
            return "0"
        parts: list[str] = []
        for w in self.words():
            c = self.terms[w]
            neg = _is_negative(c)
            mag = -c if neg else c
            body = _format_scalar(mag) if isinstance(mag, (Fraction, int, GaussianRational)) else str(mag)
            if len(w) == 0:
                term = body
            elif body == "1":
                term = w.compact_text()
            else:
                term = f"{body}*{w.compact_text()}"
            if not parts:
                parts.append(f"-{term}" if neg else term)
            else:
                parts.append(f"- {term}" if neg else f"+ {term}")
        return " ".join(parts)

    def __repr__(self):
        return f"NcPolynomial({self.text()})"


def _freeze(c):
    if isinstance(c, GaussianRational):
        return (c.re, c.im)
    return c


def _is_negative(c) -> bool:
    if isinstance(c, GaussianRational):
        return c.is_real() and c.re < 0 or (c.re == 0 and c.im < 0)
    try:
        return c < 0
    except TypeError:
        return False


def multiply(p: NcPolynomial, q: NcPolynomial) -> NcPolynomial:
    return p * q


def star_poly(p: NcPolynomial) -> NcPolynomial:
    return p.star()


# ---------------------------------------------------------------------------
# matrix evaluation
# ---------------------------------------------------------------------------

def word_matrix(w: Word, matrices: Sequence[np.ndarray]) -> np.ndarray:
    k = matrices[0].shape[0]
    out = np.eye(k, dtype=complex)
    for a in w:
        out = out @ matrices[a - 1]
    return out


def evaluate_words(terms: dict, matrices) -> np.ndarray:
    """Sum of coeff * A^w over a word->scalar map, with prefix caching."""
    matrices = [np.asarray(m, dtype=complex) for m in matrices]
    k = matrices[0].shape[0]
    if any(m.shape != (k, k) for m in matrices):
        raise ValueError("all matrices must be square and of equal size")
    cache: dict[Word, np.ndarray] = {EMPTY_WORD: np.eye(k, dtype=complex)}

    def power(w: Word) -> np.ndarray:
        m = cache.get(w)
        if m is None:
            prefix = Word(w.letters[:-1])
            m = power(prefix) @ matrices[w.letters[-1] - 1]
            cache[w] = m
        return m

    out = np.zeros((k, k), dtype=complex)
    for w, c in terms.items():
        out += complex(c) * power(w)
    return out


class MatrixNcPolynomial:
    """Polynomial with k x k matrix coefficients, P(X) = sum c_w (x) X^w."""

    __slots__ = ("terms", "k")

    def __init__(self, terms: dict[Word, np.ndarray], k: int | None = None):
        self.terms: dict[Word, np.ndarray] = {}
        for w, c in terms.items():
            c = np.asarray(c, dtype=complex)
            if k is None:
                k = c.shape[0]
            if c.shape != (k, k):
                raise ValueError("all coefficients must share one size k")
            if np.any(c != 0):
                self.terms[w] = c
        if k is None:
            raise ValueError("coefficient size k is required for empty polynomials")
        self.k = k

    @staticmethod
    def from_scalar(p: NcPolynomial, k: int) -> "MatrixNcPolynomial":
        eye = np.eye(k, dtype=complex)
        return MatrixNcPolynomial({w: complex(c) * eye for w, c in p.terms.items()}, k)

    def star(self) -> "MatrixNcPolynomial":
        return MatrixNcPolynomial(
            {w.star(): c.conj().T for w, c in self.terms.items()}, self.k)

    def __add__(self, other: "MatrixNcPolynomial") -> "MatrixNcPolynomial":
        if self.k != other.k:
            raise ValueError("size mismatch")
        out = {w: c.copy() for w, c in self.terms.items()}
        for w, c in other.terms.items():
            out[w] = out.get(w, 0) + c
        return MatrixNcPolynomial(out, self.k)

    def __call__(self, matrices, C: np.ndarray | None = None) -> np.ndarray:
        return evaluate_tuple(self, matrices, C)


def evaluate_tuple(P: MatrixNcPolynomial, matrices, C: np.ndarray | None = None) -> np.ndarray:
    """P(A)(C) = sum_w c_w C A^w; C defaults to the identity."""
    matrices = [np.asarray(m, dtype=complex) for m in matrices]
    k = P.k
    if any(m.shape != (k, k) for m in matrices):
        raise ValueError("matrix tuple size must match coefficient size")
    if C is None:
        C = np.eye(k, dtype=complex)
    C = np.asarray(C, dtype=complex)
    if C.shape != (k, k):
        raise ValueError("C size must match coefficient size")
    cache: dict[Word, np.ndarray] = {EMPTY_WORD: np.eye(k, dtype=complex)}

    def power(w: Word) -> np.ndarray:
        m = cache.get(w)
        if m is None:
            m = power(Word(w.letters[:-1])) @ matrices[w.letters[-1] - 1]
            cache[w] = m
        return m

    out = np.zeros((k, k), dtype=complex)
    for w, c in P.terms.items():
        out += c @ C @ power(w)
    return out


class EvaluatedMap:
    """The linear map C -> P(A)(C) on k x k matrices."""

    def __init__(self, P: MatrixNcPolynomial, matrices):
        self.P = P
        self.matrices = [np.asarray(m, dtype=complex) for m in matrices]
        self.k = P.k

    def __call__(self, C: np.ndarray) -> np.ndarray:
        return evaluate_tuple(self.P, self.matrices, C)

    def matrix(self) -> np.ndarray:
        """k^2 x k^2 matrix acting on vec(C) (column-major stacking)."""
        k = self.k
        cols = []
        for j in range(k * k):
            E = np.zeros((k, k), dtype=complex)
            E[j % k, j // k] = 1.0
            cols.append(self(E).reshape(-1, order="F"))
        return np.stack(cols, axis=1)

    def operator_norm(self) -> float:
        """Norm as an operator on (M_k, Hilbert-Schmidt)."""
        return float(np.linalg.norm(self.matrix(), 2))


def evaluate_as_map(P: MatrixNcPolynomial, matrices) -> EvaluatedMap:
    return EvaluatedMap(P, matrices)


def evaluate_block_row_column(P: MatrixNcPolynomial, matrices, words: Iterable[Word]) -> np.ndarray:
    """P(A)(I_k) as the block row of coefficients times the block column
    of word powers, over the given word order."""
    matrices = [np.asarray(m, dtype=complex) for m in matrices]
    k = P.k
    ws = list(words)
    row = np.hstack([np.asarray(P.terms.get(w, np.zeros((k, k))), dtype=complex)
                     for w in ws])
    col = np.vstack([word_matrix(w, matrices) for w in ws])
    return row @ col


# ---------------------------------------------------------------------------
# tensor-square polynomials and the free difference quotient
# ---------------------------------------------------------------------------

class TensorPolynomial:
    """Element of the tensor square, stored as (Word, Word) -> coefficient.

    ``multiply`` is the plain componentwise product
    (p1 (x) q1)(p2 (x) q2) = p1 p2 (x) q1 q2; ``multiply_op`` flips the
    second slot, (p1 (x) q1)(p2 (x) q2) = p1 p2 (x) q2 q1, which is the
    convention under which the kernel normalization identity is computed.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        self.terms: dict[tuple[Word, Word], object] = {}
        if terms:
            for key, c in terms.items():
                if c:
                    self.terms[key] = c

    @staticmethod
    def from_pair(p: NcPolynomial, q: NcPolynomial) -> "TensorPolynomial":
        out: dict[tuple[Word, Word], object] = {}
        for u, cu in p.terms.items():
            for v, cv in q.terms.items():
                key = (u, v)
                s = out.get(key, 0) + cu * cv
                if s:
                    out[key] = s
                else:
                    out.pop(key, None)
        return TensorPolynomial(out)

    def summands(self) -> list[tuple[NcPolynomial, NcPolynomial]]:
        """Normal form as a list of (coeff*u, v) monomial pairs."""
        return [(NcPolynomial.monomial(u, c), NcPolynomial.monomial(v))
                for (u, v), c in sorted(self.terms.items(),
                                        key=lambda kv: (kv[0][0].sort_key(),
                                                        kv[0][1].sort_key()))]

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if not isinstance(other, TensorPolynomial):
            return NotImplemented
        if set(self.terms) != set(other.terms):
            return False
        return all(self.terms[k] == other.terms[k] for k in self.terms)

    def __add__(self, other: "TensorPolynomial") -> "TensorPolynomial":
        out = dict(self.terms)
        for key, c in other.terms.items():
            s = out.get(key, 0) + c
            if s:
                out[key] = s
            else:
                out.pop(key, None)
        return TensorPolynomial(out)

    def __neg__(self):
        return TensorPolynomial({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "TensorPolynomial":
        return TensorPolynomial({k: c * v for k, v in self.terms.items()})

    def _combine(self, other: "TensorPolynomial", op_side: bool) -> "TensorPolynomial":
        out: dict[tuple[Word, Word], object] = {}
        for (u1, v1), c1 in self.terms.items():
            for (u2, v2), c2 in other.terms.items():
                key = (u1 * u2, v2 * v1 if op_side else v1 * v2)
                s = out.get(key, 0) + c1 * c2
                if s:
                    out[key] = s
                else:
                    out.pop(key, None)
        return TensorPolynomial(out)

    def multiply(self, other: "TensorPolynomial") -> "TensorPolynomial":
        return self._combine(other, op_side=False)

    def multiply_op(self, other: "TensorPolynomial") -> "TensorPolynomial":
        return self._combine(other, op_side=True)

    def star(self) -> "TensorPolynomial":
        return TensorPolynomial({(u.star(), v.star()): _conj(c)
                                 for (u, v), c in self.terms.items()})

    def eval_mc(self, matrices, C: np.ndarray) -> np.ndarray:
        """Apply the evaluation rule m_C(p (x) q) = p(A) C q(A)."""
        matrices = [np.asarray(m, dtype=complex) for m in matrices]
        C = np.asarray(C, dtype=complex)
        k = C.shape[0]
        out = np.zeros((k, k), dtype=complex)
        for (u, v), c in self.terms.items():
            out += complex(c) * (word_matrix(u, matrices) @ C @ word_matrix(v, matrices))
        return out

    def contract_right(self, functional) -> NcPolynomial:
        """(Id (x) tau): apply a Word->scalar functional to the second slot."""
        out = NcPolynomial()
        for (u, v), c in self.terms.items():
            out = out + NcPolynomial.monomial(u, c * functional(v))
        return out


def free_difference_quotient(p: NcPolynomial, i: int) -> TensorPolynomial:
    """Leibniz derivation into the tensor square: each occurrence of letter
    i in a monomial splits it into (prefix) (x) (suffix)."""
    if i < 1:
        raise ValueError("letter index must be >= 1")
    out: dict[tuple[Word, Word], object] = {}
    for w, c in p.terms.items():
        for j, a in enumerate(w.letters):
            if a != i:
                continue
            key = (Word(w.letters[:j]), Word(w.letters[j + 1:]))
            s = out.get(key, 0) + c
            if s:
                out[key] = s
            else:
                out.pop(key, None)
    return TensorPolynomial(out)


# ---------------------------------------------------------------------------
# upper triangular functional calculus
# ---------------------------------------------------------------------------

def _poly_eval_scalar(coeffs: Sequence[complex], z: complex) -> complex:
    out = 0.0 + 0.0j
    for c in reversed(list(coeffs)):
        out = out * z + c
    return out


def eval_upper_triangular(coeffs: Sequence[complex], A: np.ndarray) -> np.ndarray:
    """p(A) for upper triangular A with pairwise distinct diagonal, via the
    path sum of divided differences over the diagonal entries.

    ``coeffs`` lists the one-variable polynomial coefficients from degree 0
    upward. Entry (i, i+j) sums, over all increasing paths
    i = i_0 < i_1 < ... < i_l = i+j, the divided difference of p on the
    path's diagonal entries times the product of the strictly-upper entries
    along the path.
    """
    A = np.asarray(A, dtype=complex)
    k = A.shape[0]
    if A.shape != (k, k):
        raise ValueError("A must be square")
    if np.any(np.abs(np.tril(A, -1)) > 0):
        raise ValueError("A must be upper triangular")
    z = np.diag(A)
    for r in range(k):
        for s in range(r + 1, k):
            if z[r] == z[s]:
                raise ValueError(
                    "repeated diagonal entries; use direct evaluation instead")

    pvals = [_poly_eval_scalar(coeffs, zi) for zi in z]

    def divided_difference(nodes: tuple[int, ...]) -> complex:
        # sum_s p(z_s) / prod_{r != s} (z_s - z_r) over the path nodes
        total = 0.0 + 0.0j
        for s in nodes:
            denom = 1.0 + 0.0j
            for r in nodes:
                if r != s:
                    denom *= z[s] - z[r]
            total += pvals[s] / denom
        return total

    out = np.zeros((k, k), dtype=complex)
    for i in range(k):
        out[i, i] = pvals[i]

    def paths(start: int, end: int):
        if start == end:
            yield (start,)
            return
        for nxt in range(start + 1, end + 1):
            for rest in paths(nxt, end):
                yield (start,) + rest

    for i in range(k):
        for j in range(i + 1, k):
            total = 0.0 + 0.0j
            for path in paths(i, j):
                weight = 1.0 + 0.0j
                for a, b in zip(path, path[1:]):
                    weight *= A[a, b]
                total += divided_difference(path) * weight
            out[i, j] = total
    return out


# ---------------------------------------------------------------------------
# expression parser
# ---------------------------------------------------------------------------

class PolyParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class _Parser:
    def __init__(self, text: str, n: int | None):
        self.text = text
        self.n = n
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            raise PolyParseError(f"expected {ch!r}", self.pos)
        self.pos += 1

    def parse_expr(self) -> NcPolynomial:
        sign = 1
        if self.peek() in ("+", "-"):
            if self.peek() == "-":
                sign = -1
            self.pos += 1
        out = self.parse_term() * sign
        while self.peek() in ("+", "-"):
            op = self.peek()
            self.pos += 1
            term = self.parse_term()
            out = out + (term if op == "+" else -term)
        return out

    def parse_term(self) -> NcPolynomial:
        out = self.parse_factor()
        while self.peek() == "*":
            self.pos += 1
            out = out * self.parse_factor()
        return out

    def parse_factor(self) -> NcPolynomial:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            inner = self.parse_expr()
            self.expect(")")
            base = inner
        elif ch == "X":
            self.pos += 1
            idx = self.parse_int()
            if idx < 1 or (self.n is not None and idx > self.n):
                raise PolyParseError(f"letter index X{idx} out of range", self.pos)
            base = NcPolynomial.letter(idx)
        elif ch.isdigit() or ch == ".":
            base = NcPolynomial.constant(self.parse_number())
        else:
            raise PolyParseError("expected a factor", self.pos)
        if self.peek() == "^":
            self.pos += 1
            e = self.parse_int()
            base = base ** e
        return base

    def parse_int(self) -> int:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            raise PolyParseError("expected an integer", self.pos)
        return int(self.text[start:self.pos])

    def parse_number(self) -> Fraction:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isdigit()
                                             or self.text[self.pos] == "."):
            self.pos += 1
        if start == self.pos:
            raise PolyParseError("expected a number", self.pos)
        literal = self.text[start:self.pos]
        if self.peek() == "/":
            self.pos += 1
            den = self.parse_int()
            if "." in literal:
                raise PolyParseError("rational must have integer parts", start)
            return Fraction(int(literal), den)
        return Fraction(literal)

    def finish(self):
        self.skip_ws()
        if self.pos != len(self.text):
            raise PolyParseError("unexpected trailing input", self.pos)


def parse_poly(text: str, n: int | None = None) -> NcPolynomial:
    """Parse ``2 - X1^2 + 1/2*X1*X2`` style expressions."""
    parser = _Parser(text, n)
    out = parser.parse_expr()
    parser.finish()
    return out
