"""Tracial states as exact moment providers.

Built-in laws (semicircle, free Poisson) are realized through free
cumulants; multi-variable states are free products, with mixed moments
computed by summing over monochromatic non-crossing partitions of the
letter positions. User states come from explicit moment tables.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from ncck.poly import NcPolynomial
from ncck.words import EMPTY_WORD, Word, catalan, cyclic_canonical, enumerate_words


class MomentError(KeyError):
    """A required moment is not available."""


@dataclass(frozen=True)
class CumulantTable:
    """Free cumulants kappa_1..kappa_m of one variable.

    ``tail_is_zero`` asserts kappa_s = 0 for every s beyond the stored
    prefix (true for the semicircle); otherwise moments needing larger
    block sizes are refused rather than silently truncated.
    """

    kappas: tuple[Fraction, ...]
    tail_is_zero: bool = False

    @staticmethod
    def semicircle(variance) -> "CumulantTable":
        return CumulantTable((Fraction(0), Fraction(variance)), tail_is_zero=True)

    @staticmethod
    def constant(c, order: int = 64) -> "CumulantTable":
        return CumulantTable(tuple([Fraction(c)] * order))

    def kappa(self, s: int) -> Fraction:
        if s < 1:
            raise ValueError("cumulant order must be >= 1")
        if s <= len(self.kappas):
            return self.kappas[s - 1]
        if self.tail_is_zero:
            return Fraction(0)
        raise MomentError(f"cumulants only available up to order {len(self.kappas)}")

    def max_block(self) -> int | None:
        """Largest s with kappa_s possibly nonzero, None if unbounded."""
        if not self.tail_is_zero:
            return None
        for s in range(len(self.kappas), 0, -1):
            if self.kappas[s - 1]:
                return s
        return 0


def moments_from_cumulants(table: CumulantTable, order: int) -> list[Fraction]:
    """m_1..m_order via the first-block decomposition of non-crossing
    partitions: m_p = sum_s kappa_s * sum over gap compositions."""
    if order < 1:
        raise ValueError("order must be >= 1")
    m = [Fraction(1)]  # m_0
    for p in range(1, order + 1):
        total = Fraction(0)
        # conv[s][t] = sum over (i_1..i_s) >= 0 summing to t of prod m_{i_j}
        for s in range(1, p + 1):
            kap = table.kappa(s)
            if not kap:
                continue
            total += kap * _composition_sum(m, s, p - s)
        m.append(total)
    return m[1:]


def _composition_sum(m: Sequence[Fraction], s: int, t: int) -> Fraction:
    """Sum over s-tuples of nonnegative integers summing to t of the
    product of moments m_{i_1}..m_{i_s} (m[0] = 1)."""
    cur = [Fraction(1) if i == 0 else Fraction(0) for i in range(t + 1)]
    for _ in range(s):
        nxt = [Fraction(0)] * (t + 1)
        for total in range(t + 1):
            if not cur[total]:
                continue
            for j in range(t - total + 1):
                nxt[total + j] += cur[total] * m[j]
        cur = nxt
    return cur[t]


def cumulants_from_moments(moments: Sequence) -> CumulantTable:
    """Invert the moment-cumulant relation; moments[0] is m_1."""
    ms = [Fraction(1)] + [Fraction(x) for x in moments]
    kappas: list[Fraction] = []
    for p in range(1, len(ms)):
        total = Fraction(0)
        for s in range(1, p):
            if kappas[s - 1]:
                total += kappas[s - 1] * _composition_sum(ms, s, p - s)
        kappas.append(ms[p] - total)
    return CumulantTable(tuple(kappas))


def free_product_moment(w: Word, tables: Sequence[CumulantTable]) -> Fraction:
    """tau(w) for free variables with the given cumulant tables.

    Sums kappa-products over non-crossing partitions of the letter
    positions whose blocks are monochromatic; mixed free cumulants vanish
    by freeness, so only those partitions contribute.  The enumeration is
    interval-recursive with memoization, and block growth stops at the
    largest order with a nonzero cumulant when that bound is known.
    """
    colors = w.letters
    for a in set(colors):
        if a - 1 >= len(tables):
            raise MomentError(f"no cumulant table for letter X{a}")
    n = len(colors)
    value_memo: dict[tuple[int, int], Fraction] = {}
    block_memo: dict[tuple[int, int, int], Fraction] = {}

    def value(i: int, j: int) -> Fraction:
        """Partition sum over positions [i, j)."""
        if i >= j:
            return Fraction(1)
        key = (i, j)
        got = value_memo.get(key)
        if got is None:
            got = extend(i, j, 1)
            value_memo[key] = got
        return got

    def extend(p: int, j: int, size: int) -> Fraction:
        """Block of color colors[block start] with ``size`` members, the
        last at position p; sum over all completions inside [?, j)."""
        c = colors[p]
        table = tables[c - 1]
        key = (p, j, size)
        got = block_memo.get(key)
        if got is not None:
            return got
        total = Fraction(0)
        kap = table.kappa(size)
        if kap:
            total += kap * value(p + 1, j)
        bound = table.max_block()
        if bound is None or size < bound:
            for q in range(p + 1, j):
                if colors[q] == c:
                    inner = value(p + 1, q)
                    if inner:
                        total += inner * extend(q, j, size + 1)
        block_memo[key] = total
        return total

    return value(0, n)


class TracialState:
    """A moment functional tau with tau(1) = 1, memoized on the cyclic-star
    canonical form of the word (valid for real-valued traces)."""

    def __init__(self, n: int):
        self.n = n
        self._memo: dict[Word, Fraction] = {EMPTY_WORD: Fraction(1)}

    def moment(self, w: Word) -> Fraction:
        key = cyclic_canonical(w, use_star=True)
        got = self._memo.get(key)
        if got is None:
            got = self._compute(key)
            self._memo[key] = got
        return got

    def _compute(self, w: Word) -> Fraction:
        raise NotImplementedError

    def moment_poly(self, p: NcPolynomial):
        """Linear extension of the moment functional to polynomials."""
        total = Fraction(0)
        for w, c in p.terms.items():
            total = total + c * self.moment(w)
        return total

    def max_word_length(self) -> int | None:
        """Upper bound on usable word lengths, None if unbounded."""
        return None


class FreeProductState(TracialState):
    """Free product of single-variable laws given by cumulant tables."""

    def __init__(self, tables: Sequence[CumulantTable]):
        super().__init__(len(tables))
        self.tables = tuple(tables)
        self._marginals: dict[int, list[Fraction]] = {}

    def _marginal(self, letter: int, length: int) -> Fraction:
        table = self.tables[letter - 1]
        if table.max_block() == 2 and table.kappas[0] == 0:
            # centered, kappa_2 only: Catalan moments
            if length % 2 == 1:
                return Fraction(0)
            return catalan(length // 2) * table.kappas[1] ** (length // 2)
        cached = self._marginals.get(letter)
        if cached is None or len(cached) < length:
            cached = moments_from_cumulants(table, max(length, 8))
            self._marginals[letter] = cached
        return cached[length - 1]

    def _compute(self, w: Word) -> Fraction:
        if len(set(w.letters)) == 1:
            return self._marginal(w.letters[0], len(w))
        return free_product_moment(w, self.tables)


def semicircle_state(variance=1, n: int = 1) -> FreeProductState:
    """n free semicircular variables of the given variance."""
    v = Fraction(variance)
    if v <= 0:
        raise ValueError("variance must be positive")
    return FreeProductState([CumulantTable.semicircle(v)] * n)


def free_poisson_state(c, n: int = 1, order: int = 64) -> FreeProductState:
    """n free Poisson (Marchenko-Pastur) variables of rate c; all free
    cumulants of each variable equal c."""
    rate = Fraction(c)
    if rate <= 0:
        raise ValueError("rate must be positive")
    return FreeProductState([CumulantTable.constant(rate, order)] * n)


class MomentTableState(TracialState):
    """State backed by an explicit canonical-word -> value table."""

    def __init__(self, entries: dict[Word, Fraction], n: int, d_max: int):
        super().__init__(n)
        self.d_max = d_max
        table: dict[Word, Fraction] = {}
        for w, value in entries.items():
            key = cyclic_canonical(w, use_star=True)
            value = Fraction(value)
            if key in table and table[key] != value:
                raise ValueError(
                    f"inconsistent duplicate moment for {key.text()}: "
                    f"{table[key]} vs {value}")
            table[key] = value
        if table.get(EMPTY_WORD, Fraction(1)) != 1:
            raise ValueError("the identity word must have moment 1")
        table[EMPTY_WORD] = Fraction(1)
        self.table = table

    def _compute(self, w: Word) -> Fraction:
        try:
            return self.table[w]
        except KeyError:
            raise MomentError(f"moment of {w.text()} missing from table") from None

    def max_word_length(self) -> int | None:
        return 2 * self.d_max


def moment_table_state(entries: dict[Word, Fraction], n: int, d_max: int) -> MomentTableState:
    return MomentTableState(entries, n, d_max)


def load_moment_table(text: str, n: int, d_max: int) -> MomentTableState:
    """Parse a ``word,value`` CSV (optional header; ``#`` comments)."""
    entries: dict[Word, Fraction] = {}
    for row in csv.reader(io.StringIO(text)):
        if not row or row[0].lstrip().startswith("#"):
            continue
        if [cell.strip().lower() for cell in row] == ["word", "value"]:
            continue
        if len(row) != 2:
            raise ValueError(f"expected 'word,value' rows, got {row!r}")
        word = Word.from_text(row[0].strip(), n=n)
        entries[word] = Fraction(row[1].strip())
    return MomentTableState(entries, n, d_max)


@dataclass
class StateReport:
    degree: int
    psd: bool
    min_eigenvalue: float
    tracial: bool
    star_symmetric: bool
    growth_bound: float
    psd_exact: bool | None = None
    failures: list[str] = field(default_factory=list)

    def ok(self) -> bool:
        return self.psd and self.tracial and self.star_symmetric

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "psd": self.psd,
            "min_eigenvalue": self.min_eigenvalue,
            "tracial": self.tracial,
            "star_symmetric": self.star_symmetric,
            "growth_bound": self.growth_bound,
            "psd_exact": self.psd_exact,
            "failures": self.failures,
        }


def exact_psd(rows: list[list[Fraction]]) -> bool:
    """PSD test for a symmetric rational matrix via exact LDL^T pivots."""
    m = [row[:] for row in rows]
    size = len(m)
    for i in range(size):
        pivot = m[i][i]
        if pivot < 0:
            return False
        if pivot == 0:
            # the whole remaining row/column must vanish
            if any(m[i][j] != 0 for j in range(i + 1, size)):
                return False
            continue
        for r in range(i + 1, size):
            factor = m[r][i] / pivot
            if factor:
                for s in range(r, size):
                    m[r][s] -= factor * m[i][s]
                    m[s][r] = m[r][s]
    return True


def verify_state(state: TracialState, d: int, exact: bool = False,
                 rng: np.random.Generator | None = None) -> StateReport:
    """Check PSD of the moment matrix, traciality, and star symmetry."""
    rng = rng or np.random.default_rng(0)
    words = enumerate_words(state.n, d)
    failures: list[str] = []

    rows = [[state.moment(u.star() * v) for v in words] for u in words]
    numeric = np.array([[float(x) for x in row] for row in rows])
    eigs = np.linalg.eigvalsh((numeric + numeric.T) / 2)
    min_eig = float(eigs.min())
    psd = min_eig >= -1e-10 * len(words)
    if not psd:
        failures.append(f"moment matrix has eigenvalue {min_eig}")
    psd_exact = None
    if exact:
        psd_exact = exact_psd(rows)
        if not psd_exact:
            failures.append("exact LDL^T pivot test failed")

    tracial = True
    star_symmetric = True
    pool = enumerate_words(state.n, max(1, d))
    for _ in range(200):
        u = pool[rng.integers(len(pool))]
        v = pool[rng.integers(len(pool))]
        if state.moment(u * v) != state.moment(v * u):
            tracial = False
            failures.append(f"tau({(u*v).text()}) != tau({(v*u).text()})")
            break
    for w in pool:
        if state.moment(w.star()) != state.moment(w):
            star_symmetric = False
            failures.append(f"tau({w.star().text()}) != tau({w.text()})")
            break

    growth = 0.0
    for w in words:
        if len(w) == 0:
            continue
        value = abs(state.moment(w))
        if value:
            growth = max(growth, float(value) ** (1.0 / len(w)))

    return StateReport(degree=d, psd=psd, min_eigenvalue=min_eig,
                       tracial=tracial, star_symmetric=star_symmetric,
                       growth_bound=growth, psd_exact=psd_exact,
                       failures=failures)
