"""Words over a finite alphabet: graded-lex order, star reversal, cyclic
canonical forms, and non-crossing partition enumeration.

Letters are 1-based indices so that the word (1, 2, 1) prints as ``X1X2X1``.
The empty word is the monoid identity and prints as ``1``.
"""

from __future__ import annotations

import re
from functools import lru_cache
from typing import Iterator, Sequence


class Word:
    """An immutable word (finite sequence of 1-based letter indices)."""

    __slots__ = ("letters", "_hash")

    def __init__(self, letters: Sequence[int] = ()):
        letters = tuple(letters)
        if any(not isinstance(a, int) or a < 1 for a in letters):
            raise ValueError(f"letters must be positive integers, got {letters!r}")
        self.letters = letters
        self._hash = hash(letters)

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[int]:
        return iter(self.letters)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return isinstance(other, Word) and self.letters == other.letters

    # Graded-lex: shorter words first, ties broken letter by letter.
    def sort_key(self) -> tuple:
        return (len(self.letters), self.letters)

    def __lt__(self, other: "Word") -> bool:
        return self.sort_key() < other.sort_key()

    def __le__(self, other: "Word") -> bool:
        return self.sort_key() <= other.sort_key()

    def __gt__(self, other: "Word") -> bool:
        return self.sort_key() > other.sort_key()

    def __ge__(self, other: "Word") -> bool:
        return self.sort_key() >= other.sort_key()

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def __repr__(self) -> str:
        return f"Word({self.text()!r})"

    def star(self) -> "Word":
        """Reverse the word (the letters are selfadjoint)."""
        return Word(self.letters[::-1])

    def is_selfadjoint(self) -> bool:
        return self.letters == self.letters[::-1]

    def rotate(self, k: int) -> "Word":
        if not self.letters:
            return self
        k %= len(self.letters)
        return Word(self.letters[k:] + self.letters[:k])

    def rotations(self) -> Iterator["Word"]:
        for k in range(max(1, len(self.letters))):
            yield self.rotate(k)

    def runs(self) -> list[tuple[int, int]]:
        """Maximal constant-letter runs as (letter, length) pairs."""
        out: list[tuple[int, int]] = []
        for a in self.letters:
            if out and out[-1][0] == a:
                out[-1] = (a, out[-1][1] + 1)
            else:
                out.append((a, 1))
        return out

    def max_letter(self) -> int:
        return max(self.letters, default=0)

    def text(self) -> str:
        """Render as juxtaposed letters, e.g. ``X1X2X1``; ``1`` if empty."""
        if not self.letters:
            return "1"
        return "".join(f"X{a}" for a in self.letters)

    def compact_text(self) -> str:
        """Render with run exponents and ``*`` separators, e.g. ``X1*X2^2``."""
        if not self.letters:
            return "1"
        parts = []
        for letter, count in self.runs():
            parts.append(f"X{letter}" if count == 1 else f"X{letter}^{count}")
        return "*".join(parts)

    @staticmethod
    def from_text(text: str, n: int | None = None) -> "Word":
        """Parse ``X1X2^2X1`` / ``X1*X2^2*X1`` style text (``1`` = empty)."""
        s = text.strip().replace("*", "")
        if s == "1":
            return Word()
        letters: list[int] = []
        pos = 0
        pat = re.compile(r"X(\d+)(?:\^(\d+))?")
        while pos < len(s):
            m = pat.match(s, pos)
            if not m:
                raise ValueError(f"cannot parse word {text!r} at position {pos}")
            letter = int(m.group(1))
            power = int(m.group(2)) if m.group(2) else 1
            if letter < 1 or (n is not None and letter > n):
                raise ValueError(f"letter index X{letter} out of range in {text!r}")
            letters.extend([letter] * power)
            pos = m.end()
        return Word(letters)


EMPTY_WORD = Word()


def sigma(n: int, d: int) -> int:
    """Number of words of length at most d over n letters."""
    if n == 1:
        return d + 1
    return (n ** (d + 1) - 1) // (n - 1)


def enumerate_words(n: int, d: int) -> list[Word]:
    """All words of length <= d over letters 1..n, in graded-lex order."""
    if n < 1:
        raise ValueError("need at least one letter")
    if d < 0:
        raise ValueError("degree must be nonnegative")
    out: list[Word] = []
    level: list[tuple[int, ...]] = [()]
    out.append(EMPTY_WORD)
    for _ in range(d):
        level = [w + (a,) for w in level for a in range(1, n + 1)]
        out.extend(Word(w) for w in level)
    return out


def compare_gradlex(u: Word, v: Word) -> int:
    """-1, 0, or 1 according to the graded lexicographic order."""
    ku, kv = u.sort_key(), v.sort_key()
    return (ku > kv) - (ku < kv)


def star_word(w: Word) -> Word:
    return w.star()


def cyclic_canonical(w: Word, use_star: bool = True) -> Word:
    """Graded-lex minimum of the orbit of w under rotation (and reversal).

    Two words have the same canonical form iff they are cyclically
    equivalent (up to star when use_star is set), so the canonical word is
    a valid memo key for tracial (real-valued) moment functionals.
    """
    best = min(w.rotations(), key=Word.sort_key)
    if use_star:
        rev = min(w.star().rotations(), key=Word.sort_key)
        if rev < best:
            best = rev
    return best


class NcPartition:
    """A non-crossing partition of {1..m}, stored as sorted blocks."""

    __slots__ = ("blocks", "m")

    def __init__(self, blocks: Sequence[Sequence[int]], m: int | None = None):
        blocks = tuple(tuple(sorted(b)) for b in blocks)
        blocks = tuple(sorted(blocks))
        elements = [x for b in blocks for x in b]
        if m is None:
            m = len(elements)
        if sorted(elements) != list(range(1, m + 1)):
            raise ValueError("blocks must partition {1..m}")
        self.blocks = blocks
        self.m = m

    def __eq__(self, other) -> bool:
        return isinstance(other, NcPartition) and self.blocks == other.blocks

    def __hash__(self) -> int:
        return hash(self.blocks)

    def __repr__(self) -> str:
        inner = "/".join(",".join(map(str, b)) for b in self.blocks)
        return f"NcPartition({inner})"

    def is_pairing(self) -> bool:
        return all(len(b) == 2 for b in self.blocks)

    def is_noncrossing(self) -> bool:
        """Independent checker: no a<b<c<d with {a,c}, {b,d} split."""
        owner = {}
        for i, b in enumerate(self.blocks):
            for x in b:
                owner[x] = i
        for a in range(1, self.m + 1):
            for c in range(a + 1, self.m + 1):
                if owner[a] != owner[c]:
                    continue
                for b in range(a + 1, c):
                    if owner[b] == owner[a]:
                        continue
                    # a < b < c with b in another block: that block must
                    # stay inside (a, c)
                    for d in self.blocks[owner[b]]:
                        if d < a or d > c:
                            return False
        return True


def _nc_partitions(positions: tuple[int, ...]) -> Iterator[tuple[tuple[int, ...], ...]]:
    """Non-crossing partitions of an ordered position list.

    The block of the first element is chosen as an increasing subset; the
    gaps it leaves are partitioned independently, which is exactly the
    non-crossing condition.
    """
    if not positions:
        yield ()
        return
    first, rest = positions[0], positions[1:]

    def extend(block: tuple[int, ...], segments: tuple[tuple[int, ...], ...],
               remaining: tuple[int, ...]) -> Iterator:
        # close the block here: remaining elements form the final gap
        for parts in _cartesian_partitions(segments + (remaining,)):
            yield (block,) + parts
        for i, q in enumerate(remaining):
            yield from extend(block + (q,), segments + (remaining[:i],),
                              remaining[i + 1:])

    yield from extend((first,), (), rest)


def _cartesian_partitions(segments: tuple[tuple[int, ...], ...]) -> Iterator:
    if not segments:
        yield ()
        return
    head, tail = segments[0], segments[1:]
    for hp in _nc_partitions(head):
        for tp in _cartesian_partitions(tail):
            yield hp + tp


def noncrossing_partitions(m: int) -> list[NcPartition]:
    """All non-crossing partitions of {1..m}; Catalan(m) of them."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    return [NcPartition(blocks, m)
            for blocks in _nc_partitions(tuple(range(1, m + 1)))]


def noncrossing_pairings(m: int) -> list[NcPartition]:
    """Non-crossing pair partitions of {1..m}; empty when m is odd."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m % 2 == 1:
        return []
    out = []

    def pairings(positions: tuple[int, ...]) -> Iterator[tuple[tuple[int, int], ...]]:
        if not positions:
            yield ()
            return
        first = positions[0]
        # partner must leave an even gap on both sides
        for j in range(1, len(positions), 2):
            partner = positions[j]
            inside = positions[1:j]
            outside = positions[j + 1:]
            for pin in pairings(inside):
                for pout in pairings(outside):
                    yield ((first, partner),) + pin + pout

    for blocks in pairings(tuple(range(1, m + 1))):
        out.append(NcPartition(blocks, m))
    return out


@lru_cache(maxsize=None)
def catalan(m: int) -> int:
    if m <= 1:
        return 1
    return sum(catalan(j) * catalan(m - 1 - j) for j in range(m))
