"""Exact rational linear algebra on small dense matrices.

Everything here works on tuples of ``int`` or :class:`fractions.Fraction`;
there is no floating point anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Sequence

Vector = tuple[int, ...]


def lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b) if a and b else max(abs(a), abs(b))


def integerize(row: Sequence[Fraction | int]) -> Vector:
    """Scale a rational vector to a primitive integer vector (same direction)."""
    if all(type(x) is int for x in row):
        g = reduce(gcd, row, 0)
        return tuple(row) if g in (0, 1) else tuple(x // g for x in row)
    den = reduce(lcm, (Fraction(x).denominator for x in row), 1)
    ints = [int(Fraction(x) * den) for x in row]
    g = reduce(gcd, ints, 0)
    if g == 0:
        return tuple(ints)
    return tuple(x // g for x in ints)


def dot(a: Sequence, b: Sequence):
    return sum(x * y for x, y in zip(a, b))


def rref(rows: Sequence[Sequence], ncols: int) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; returns (nonzero rows, pivot columns)."""
    m = [[Fraction(x) for x in r] for r in rows]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        p = next((k for k in range(r, len(m)) if m[k][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        piv = m[r][c]
        m[r] = [x / piv for x in m[r]]
        for k in range(len(m)):
            if k != r and m[k][c] != 0:
                f = m[k][c]
                m[k] = [a - f * b for a, b in zip(m[k], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows: Sequence[Sequence], ncols: int | None = None) -> int:
    if not rows:
        return 0
    return len(rref(rows, ncols if ncols is not None else len(rows[0]))[0])


def solve(rows: Sequence[Sequence], rhs: Sequence, ncols: int) -> list[Fraction] | None:
    """One rational solution of ``rows @ x = rhs`` (free variables set to 0)."""
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    red, piv = rref(aug, ncols + 1)
    if ncols in piv:
        return None
    x = [Fraction(0)] * ncols
    for row, c in zip(red, piv):
        x[c] = row[ncols]
    return x


@dataclass(frozen=True)
class LinearSpace:
    """A linear subspace of Q^ambient held by a canonical integer basis.

    The basis is the reduced row echelon form of any spanning set, each row
    scaled to a primitive integer vector with a positive pivot, so two equal
    spaces always compare equal.
    """

    basis: tuple[Vector, ...]
    ambient: int

    @staticmethod
    def span(vectors: Sequence[Sequence], ambient: int) -> "LinearSpace":
        vecs = [v for v in vectors if any(v)]
        if not vecs:
            return LinearSpace((), ambient)
        red, _ = rref(vecs, ambient)
        return LinearSpace(tuple(integerize(r) for r in red), ambient)

    @staticmethod
    def full(ambient: int) -> "LinearSpace":
        return LinearSpace.span([tuple(int(i == j) for j in range(ambient)) for i in range(ambient)], ambient)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def contains(self, v: Sequence) -> bool:
        if not any(v):
            return True
        return rank(list(self.basis) + [list(v)], self.ambient) == self.dim

    def complement(self) -> "LinearSpace":
        """Orthogonal complement."""
        return kernel(self.basis, self.ambient)

    def __le__(self, other: "LinearSpace") -> bool:
        return all(other.contains(b) for b in self.basis)


def kernel(matrix: Sequence[Sequence], ncols: int | None = None) -> LinearSpace:
    """Rational null space of ``matrix`` as a canonical integer basis."""
    if ncols is None:
        if not matrix:
            raise ValueError("column count needed for an empty matrix")
        ncols = len(matrix[0])
    rows = [r for r in matrix if any(r)]
    if not rows:
        return LinearSpace.full(ncols)
    red, piv = rref(rows, ncols)
    free = [c for c in range(ncols) if c not in piv]
    vecs = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, c in zip(red, piv):
            v[c] = -row[f]
        vecs.append(v)
    return LinearSpace.span(vecs, ncols)


def intersect_spaces(a: LinearSpace, b: LinearSpace) -> LinearSpace:
    if a.ambient != b.ambient:
        raise ValueError("ambient dimension mismatch")
    normals = list(a.complement().basis) + list(b.complement().basis)
    return kernel(normals, a.ambient)
