"""Exact integer helpers shared by the schemes and the lattice code."""

from __future__ import annotations

from fractions import Fraction
from math import isqrt
from typing import Sequence

Matrix = list[list[int]]


def centered_mod(c: int, modulus: int) -> int:
    """Representative of ``c`` modulo ``modulus`` in ``(-modulus/2, modulus/2]``."""
    if modulus <= 0:
        raise ValueError(f"modulus must be positive, got {modulus}")
    z = c % modulus
    if 2 * z > modulus:
        z -= modulus
    return z


def parity(z: int) -> int:
    # Python's % already maps negatives into {0, 1}, which equals |z| mod 2.
    return z & 1


def round_half_away(num: int, den: int) -> int:
    """Nearest integer to num/den, ties away from zero. ``den`` must be positive."""
    q = (2 * abs(num) + den) // (2 * den)
    return q if num >= 0 else -q


def dot(u: Sequence[int], v: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(u, v))


def matmul(a: Sequence[Sequence[int]], b: Sequence[Sequence[int]]) -> Matrix:
    cols = list(zip(*b))
    return [[dot(row, col) for col in cols] for row in a]


def transpose(a: Sequence[Sequence[int]]) -> Matrix:
    return [list(col) for col in zip(*a)]


def identity(n: int) -> Matrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def gram_matrix(rows: Sequence[Sequence[int]]) -> Matrix:
    return [[dot(u, v) for v in rows] for u in rows]


def det_bareiss(a: Sequence[Sequence[int]]) -> int:
    """Exact determinant of a square integer matrix (fraction-free elimination)."""
    m = [list(r) for r in a]
    n = len(m)
    if n == 0:
        return 1
    if any(len(r) != n for r in m):
        raise ValueError("determinant needs a square matrix")
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        pivot = m[k][k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * pivot - m[i][k] * m[k][j]) // prev
        prev = pivot
    return sign * m[n - 1][n - 1]


def solve_rational(a: Sequence[Sequence[int]], b: Sequence[int]) -> list[Fraction] | None:
    """Solve ``x @ a = b`` for a row vector ``x`` over the rationals.

    ``a`` is n x m with independent rows; returns None when ``b`` is not in
    the row space.
    """
    n = len(a)
    m = len(a[0]) if n else 0
    # Augmented system on the columns: a^T x = b.
    rows = [[Fraction(a[i][j]) for i in range(n)] + [Fraction(b[j])] for j in range(m)]
    piv_cols = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, m) if rows[i][c] != 0), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(m):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [vi - f * vr for vi, vr in zip(rows[i], rows[r])]
        piv_cols.append(c)
        r += 1
    if any(rows[i][n] != 0 for i in range(r, m)):
        return None
    x = [Fraction(0)] * n
    for i, c in enumerate(piv_cols):
        x[c] = rows[i][n]
    return x


def integer_coordinates(a: Sequence[Sequence[int]], v: Sequence[int]) -> list[int] | None:
    """Integer row-combination of ``a`` equal to ``v``, or None if there is none."""
    x = solve_rational(a, v)
    if x is None or any(f.denominator != 1 for f in x):
        return None
    return [int(f) for f in x]


def isqrt_exact(n: int) -> int | None:
    if n < 0:
        return None
    r = isqrt(n)
    return r if r * r == n else None
