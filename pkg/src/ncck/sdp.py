"""Tracial moment relaxation: build, export to SDPA sparse, and certify.

The relaxation at order d minimizes the objective over moment vectors y
indexed by cyclic-star canonical words of length 1..2d, subject to the
moment matrix and one localizing matrix per constraint being positive
semidefinite.  The normalization tau(1) = 1 is substituted into the
constant matrix rather than kept as an equality row, since the SDPA
sparse format has none.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ncck.poly import NcPolynomial
from ncck.states import TracialState
from ncck.words import EMPTY_WORD, Word, cyclic_canonical, enumerate_words, sigma


@dataclass
class MomentVariableIndex:
    """Bijection between canonical words (length 1..2d) and 1-based ids."""

    n: int
    d: int
    classes: list[Word]                  # canonical representatives, sorted
    ids: dict[Word, int]                 # canonical word -> 1..m

    @staticmethod
    def build(n: int, d: int) -> "MomentVariableIndex":
        if n < 1 or d < 1:
            raise ValueError("need n >= 1 and d >= 1")
        seen: set[Word] = set()
        for w in enumerate_words(n, 2 * d):
            if len(w) == 0:
                continue
            seen.add(cyclic_canonical(w, use_star=True))
        classes = sorted(seen, key=Word.sort_key)
        ids = {w: i + 1 for i, w in enumerate(classes)}
        return MomentVariableIndex(n, d, classes, ids)

    @property
    def m(self) -> int:
        return len(self.classes)

    def variable(self, w: Word) -> int | None:
        """Variable id of a word; None for the identity (constant 1)."""
        if len(w) == 0:
            return None
        key = cyclic_canonical(w, use_star=True)
        try:
            return self.ids[key]
        except KeyError:
            raise KeyError(f"word {w.text()} exceeds length {2 * self.d}") from None


def moment_variable_index(n: int, d: int) -> MomentVariableIndex:
    return MomentVariableIndex.build(n, d)


@dataclass
class SdpBlock:
    """One PSD block: entries are affine forms in y.

    coefficients[v][(i, j)] holds the coefficient of y_v at entry (i, j);
    constant[(i, j)] holds the constant part (from the normalization and
    constraint constants).  Only i <= j is stored; blocks are symmetric.
    """

    size: int
    label: str
    coefficients: dict[int, dict[tuple[int, int], Fraction]] = field(default_factory=dict)
    constant: dict[tuple[int, int], Fraction] = field(default_factory=dict)

    def add(self, var: int | None, i: int, j: int, value: Fraction):
        if i > j:
            i, j = j, i
        if var is None:
            self.constant[(i, j)] = self.constant.get((i, j), Fraction(0)) + value
            if not self.constant[(i, j)]:
                del self.constant[(i, j)]
            return
        cell = self.coefficients.setdefault(var, {})
        cell[(i, j)] = cell.get((i, j), Fraction(0)) + value
        if not cell[(i, j)]:
            del cell[(i, j)]
            if not cell:
                del self.coefficients[var]

    def assemble(self, y: dict[int, float]) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        for (i, j), value in self.constant.items():
            out[i, j] += float(value)
            if i != j:
                out[j, i] += float(value)
        for var, cells in self.coefficients.items():
            yv = y[var]
            for (i, j), value in cells.items():
                out[i, j] += float(value) * yv
                if i != j:
                    out[j, i] += float(value) * yv
        return out


@dataclass
class SdpProblem:
    """min objective . y  s.t.  sum_i y_i F_i - F_0 >= 0 blockwise."""

    index: MomentVariableIndex
    objective: dict[int, Fraction]           # variable id -> coefficient
    objective_constant: Fraction
    blocks: list[SdpBlock]

    @property
    def m(self) -> int:
        return self.index.m

    def block_sizes(self) -> list[int]:
        return [b.size for b in self.blocks]

    def moment_vector(self, state: TracialState) -> dict[int, float]:
        return {i + 1: float(state.moment(w))
                for i, w in enumerate(self.index.classes)}

    def objective_value(self, y: dict[int, float]) -> float:
        return float(self.objective_constant) + sum(
            float(c) * y[v] for v, c in self.objective.items())


def build_relaxation(f: NcPolynomial, constraints: list[NcPolynomial],
                     d: int, n: int | None = None) -> SdpProblem:
    """Assemble the order-d relaxation of min tau(f) over states with
    PSD moment and localizing matrices."""
    if not f.is_selfadjoint():
        raise ValueError("objective must be selfadjoint")
    for g in constraints:
        if not g.is_selfadjoint():
            raise ValueError("constraints must be selfadjoint")
    if n is None:
        n = max([f.max_letter()] + [g.max_letter() for g in constraints] + [1])
    half_f = -(-max(f.degree(), 0) // 2)
    if d < half_f:
        raise ValueError(f"relaxation order {d} below ceil(deg f / 2) = {half_f}")
    for g in constraints:
        if -(-max(g.degree(), 0) // 2) > d:
            raise ValueError("constraint degree exceeds the relaxation order")
    index = MomentVariableIndex.build(n, d)

    objective: dict[int, Fraction] = {}
    constant = Fraction(0)
    for w, c in f.terms.items():
        c = Fraction(c)
        var = index.variable(w)
        if var is None:
            constant += c
        else:
            objective[var] = objective.get(var, Fraction(0)) + c

    blocks = [_moment_block(index)]
    for g_idx, g in enumerate(constraints):
        blocks.append(_localizing_block(index, g, g_idx))
    return SdpProblem(index, objective, constant, blocks)


def _moment_block(index: MomentVariableIndex) -> SdpBlock:
    words = enumerate_words(index.n, index.d)
    block = SdpBlock(len(words), "moment")
    for i, u in enumerate(words):
        for j, v in enumerate(words):
            if i > j:
                continue
            block.add(index.variable(u.star() * v), i, j, Fraction(1))
    return block


def _localizing_block(index: MomentVariableIndex, g: NcPolynomial,
                      g_idx: int) -> SdpBlock:
    dj = -(-max(g.degree(), 0) // 2)
    words = enumerate_words(index.n, index.d - dj)
    block = SdpBlock(len(words), f"localizing_{g_idx}")
    for i, u in enumerate(words):
        for j, v in enumerate(words):
            if i > j:
                continue
            for gw, c in g.terms.items():
                block.add(index.variable(u.star() * gw * v), i, j, Fraction(c))
    return block


# ---------------------------------------------------------------------------
# SDPA sparse export / import
# ---------------------------------------------------------------------------

def _sdpa_value(x: Fraction) -> str:
    return f"{float(x):.17g}"


def export_sdpa(problem: SdpProblem) -> str:
    """Serialize in SDPA sparse (.dat-s) form.

    The file encodes min c.x with X = sum_i F_i x_i - F_0 >= 0; our
    constant parts carry the opposite sign into F_0.  Entries are written
    upper-triangle only, sorted, so output is byte-stable.
    """
    lines = [str(problem.m), str(len(problem.blocks)),
             " ".join(str(b.size) for b in problem.blocks),
             " ".join(_sdpa_value(problem.objective.get(v, Fraction(0)))
                      for v in range(1, problem.m + 1))]
    entries: list[tuple[int, int, int, int, Fraction]] = []
    for bno, block in enumerate(problem.blocks, start=1):
        for (i, j), value in block.constant.items():
            entries.append((0, bno, i + 1, j + 1, -value))
        for var, cells in block.coefficients.items():
            for (i, j), value in cells.items():
                entries.append((var, bno, i + 1, j + 1, value))
    entries.sort(key=lambda e: (e[0], e[1], e[2], e[3]))
    for matno, bno, i, j, value in entries:
        lines.append(f"{matno} {bno} {i} {j} {_sdpa_value(value)}")
    return "\n".join(lines) + "\n"


def write_sdpa(problem: SdpProblem, path) -> None:
    import os
    import tempfile
    text = export_sdpa(problem)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


@dataclass
class ParsedSdpa:
    m: int
    block_sizes: list[int]
    objective: list[float]
    entries: list[tuple[int, int, int, int, float]]

    def assemble(self, y: list[float]) -> list[np.ndarray]:
        mats = [np.zeros((s, s)) for s in self.block_sizes]
        for matno, bno, i, j, value in self.entries:
            coeff = -1.0 if matno == 0 else y[matno - 1]
            mats[bno - 1][i - 1, j - 1] += value * coeff
            if i != j:
                mats[bno - 1][j - 1, i - 1] += value * coeff
        return mats


def parse_sdpa(text: str) -> ParsedSdpa:
    rows = [line.split("//")[0].split("*")[0].strip()
            for line in text.splitlines()]
    rows = [r for r in rows if r]
    m = int(rows[0])
    nblocks = int(rows[1])
    sizes = [abs(int(s)) for s in rows[2].replace(",", " ").split()]
    if len(sizes) != nblocks:
        raise ValueError("block size line does not match block count")
    objective = [float(s) for s in rows[3].replace(",", " ").split()]
    if len(objective) != m:
        raise ValueError("objective length does not match variable count")
    entries = []
    for row in rows[4:]:
        matno, bno, i, j, value = row.split()
        entries.append((int(matno), int(bno), int(i), int(j), float(value)))
    return ParsedSdpa(m, sizes, objective, entries)


def sdpa_round_trip_equal(problem: SdpProblem, parsed: ParsedSdpa) -> bool:
    """Bit-exact equality of the file-representable data."""
    if parsed.m != problem.m:
        return False
    if parsed.block_sizes != problem.block_sizes():
        return False
    want_obj = [float(_sdpa_value(problem.objective.get(v, Fraction(0))))
                for v in range(1, problem.m + 1)]
    if parsed.objective != want_obj:
        return False
    want_entries = {}
    for bno, block in enumerate(problem.blocks, start=1):
        for (i, j), value in block.constant.items():
            want_entries[(0, bno, i + 1, j + 1)] = float(_sdpa_value(-value))
        for var, cells in block.coefficients.items():
            for (i, j), value in cells.items():
                want_entries[(var, bno, i + 1, j + 1)] = float(_sdpa_value(value))
    got_entries = {(a, b, r, s): v for a, b, r, s, v in parsed.entries}
    return got_entries == want_entries


# ---------------------------------------------------------------------------
# feasibility certification
# ---------------------------------------------------------------------------

@dataclass
class FeasibilityReport:
    feasible: bool
    objective: float
    block_min_eigenvalues: list[float]
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "objective": self.objective,
            "block_min_eigenvalues": self.block_min_eigenvalues,
            "tolerance": self.tolerance,
        }


def check_feasibility(problem: SdpProblem, state: TracialState,
                      tol: float = 1e-9) -> FeasibilityReport:
    """Assemble y from the state's moments and test every block."""
    y = problem.moment_vector(state)
    mins = []
    for block in problem.blocks:
        mat = block.assemble(y)
        mins.append(float(np.linalg.eigvalsh((mat + mat.T) / 2).min()))
    feasible = all(m >= -tol for m in mins)
    return FeasibilityReport(feasible, problem.objective_value(y), mins, tol)


def reconstruct_moment_matrix(problem: SdpProblem, state: TracialState) -> list[list[Fraction]]:
    """Exact M_d(y) from the canonical variables of a state; equals the
    state's own moment matrix whenever the state is tracial and real."""
    words = enumerate_words(problem.index.n, problem.index.d)
    values = {i + 1: state.moment(w) for i, w in enumerate(problem.index.classes)}
    out = []
    for u in words:
        row = []
        for v in words:
            var = problem.index.variable(u.star() * v)
            row.append(Fraction(1) if var is None else values[var])
        out.append(row)
    return out
