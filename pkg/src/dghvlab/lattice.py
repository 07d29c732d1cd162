"""Exact LLL reduction over integer row bases.

Everything here stays in integer arithmetic: Gram-Schmidt data is carried in
the integral form of Cohen's LLL (``d_i`` = product of the first ``i`` squared
Gram-Schmidt norms, ``lam[i][j] = d_{j+1} * mu[i][j]``), so no rounding error
can leak into the attack experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal, Sequence

from .intmath import Matrix, det_bareiss, dot, gram_matrix, identity, isqrt_exact, round_half_away


class LatticeError(Exception):
    pass


class DegenerateBasisError(LatticeError):
    def __init__(self, row: int):
        super().__init__(f"basis rows are linearly dependent (row {row} lies in the span of the previous rows)")
        self.row = row


class TractabilityError(LatticeError):
    pass


@dataclass
class LatticeBasis:
    """Row basis: ``n`` vectors of ``m`` integers, ``n <= m``."""

    rows: Matrix

    def __post_init__(self) -> None:
        self.rows = [[int(v) for v in r] for r in self.rows]
        if not self.rows:
            raise LatticeError("empty basis")
        m = len(self.rows[0])
        if any(len(r) != m for r in self.rows):
            raise LatticeError("ragged basis rows")
        if len(self.rows) > m:
            raise LatticeError(f"{len(self.rows)} rows cannot be independent in dimension {m}")

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def m(self) -> int:
        return len(self.rows[0])

    def to_text(self, header: bool = True) -> str:
        lines = [f"{self.n} {self.m}"] if header else []
        lines += [" ".join(str(v) for v in r) for r in self.rows]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LatticeBasis":
        lines = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        if len(lines[0]) == 2 and len(lines) > 1 and len(lines[1]) != 2:
            n, m = int(lines[0][0]), int(lines[0][1])
            rows = [[int(v) for v in ln] for ln in lines[1:]]
            if len(rows) != n or any(len(r) != m for r in rows):
                raise LatticeError(f"header says {n}x{m}, body disagrees")
            return cls(rows)
        return cls([[int(v) for v in ln] for ln in lines])


@dataclass
class ReductionOutcome:
    reduced: LatticeBasis
    transform: Matrix
    swaps: int = 0
    size_reductions: int = 0
    delta: Fraction = field(default_factory=lambda: Fraction(3, 4))


def _integral_gso(rows: Sequence[Sequence[int]]) -> tuple[list[int], list[list[int]]]:
    n = len(rows)
    d = [1] + [0] * n
    lam = [[0] * n for _ in range(n)]
    for k in range(n):
        for j in range(k + 1):
            u = dot(rows[k], rows[j])
            for i in range(j):
                u = (d[i + 1] * u - lam[k][i] * lam[j][i]) // d[i]
            if j < k:
                lam[k][j] = u
            else:
                if u == 0:
                    raise DegenerateBasisError(k)
                d[k + 1] = u
    return d, lam


def gram_schmidt(basis: LatticeBasis) -> tuple[list[Fraction], list[list[Fraction]]]:
    """Exact squared Gram-Schmidt norms and the ``mu`` coefficients (``mu[i][j]``, ``j < i``)."""
    d, lam = _integral_gso(basis.rows)
    n = basis.n
    norms = [Fraction(d[i + 1], d[i]) for i in range(n)]
    mu = [[Fraction(lam[i][j], d[j + 1]) if j < i else Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    return norms, mu


def _check_delta(delta: Fraction) -> Fraction:
    delta = Fraction(delta)
    if not Fraction(1, 4) < delta < 1:
        raise ValueError(f"delta must lie in (1/4, 1), got {delta}")
    return delta


def lll_reduce(basis: LatticeBasis, delta: Fraction | float | str = Fraction(3, 4)) -> ReductionOutcome:
    """LLL-reduce ``basis`` and return the reduced basis with its unimodular transform.

    ``transform @ basis.rows == reduced.rows`` holds exactly. Floats passed as
    ``delta`` are converted exactly; pass a Fraction or a string like "99/100"
    to avoid binary-float surprises.
    """
    delta = _check_delta(Fraction(delta))
    dn, dd = delta.numerator, delta.denominator
    b = [list(r) for r in basis.rows]
    n = len(b)
    u = identity(n)
    d = [1] + [0] * n
    lam = [[0] * n for _ in range(n)]
    swaps = reductions = 0

    d[1] = dot(b[0], b[0])
    if d[1] == 0:
        raise DegenerateBasisError(0)

    def red(k: int, l: int) -> None:
        nonlocal reductions
        dl = d[l + 1]
        if 2 * abs(lam[k][l]) <= dl:
            return
        q = round_half_away(lam[k][l], dl)
        bk, bl = b[k], b[l]
        for i in range(len(bk)):
            bk[i] -= q * bl[i]
        uk, ul = u[k], u[l]
        for i in range(n):
            uk[i] -= q * ul[i]
        lam[k][l] -= q * dl
        lk, ll = lam[k], lam[l]
        for i in range(l):
            lk[i] -= q * ll[i]
        reductions += 1

    k, kmax = 1, 0
    while k < n:
        if k > kmax:
            kmax = k
            for j in range(k + 1):
                s = dot(b[k], b[j])
                for i in range(j):
                    s = (d[i + 1] * s - lam[k][i] * lam[j][i]) // d[i]
                if j < k:
                    lam[k][j] = s
                else:
                    if s == 0:
                        raise DegenerateBasisError(k)
                    d[k + 1] = s
        red(k, k - 1)
        lk = lam[k][k - 1]
        if dd * (d[k + 1] * d[k - 1] + lk * lk) < dn * d[k] * d[k]:
            b[k], b[k - 1] = b[k - 1], b[k]
            u[k], u[k - 1] = u[k - 1], u[k]
            for j in range(k - 1):
                lam[k][j], lam[k - 1][j] = lam[k - 1][j], lam[k][j]
            big = (d[k - 1] * d[k + 1] + lk * lk) // d[k]
            for i in range(k + 1, kmax + 1):
                t = lam[i][k]
                lam[i][k] = (d[k + 1] * lam[i][k - 1] - lk * t) // d[k]
                lam[i][k - 1] = (big * t + lk * lam[i][k]) // d[k + 1]
            d[k] = big
            swaps += 1
            k = max(1, k - 1)
        else:
            for l in range(k - 2, -1, -1):
                red(k, l)
            k += 1
    return ReductionOutcome(LatticeBasis(b), u, swaps, reductions, delta)


def is_lll_reduced(basis: LatticeBasis, delta: Fraction | float | str = Fraction(3, 4)) -> bool:
    delta = Fraction(delta)
    d, lam = _integral_gso(basis.rows)
    for i in range(basis.n):
        for j in range(i):
            if 2 * abs(lam[i][j]) > d[j + 1]:
                return False
    for k in range(1, basis.n):
        lk = lam[k][k - 1]
        if delta.denominator * (d[k + 1] * d[k - 1] + lk * lk) < delta.numerator * d[k] * d[k]:
            return False
    return True


@dataclass
class ShortestVector:
    vector: list[int]
    coefficients: list[int]
    norm_sq: int
    # True if the coefficient box cut off part of the search region, so the
    # result is only the shortest vector inside the box.
    box_limited: bool


def enumerate_shortest(basis: LatticeBasis, coeff_bound: int) -> ShortestVector:
    """Shortest nonzero vector among combinations with ``|coefficient| <= coeff_bound``.

    Depth-first Fincke-Pohst enumeration with exact rational pruning; the box
    only caps the search, so when ``box_limited`` is False the answer is the
    true first minimum.
    """
    n = basis.n
    if n > 8 or coeff_bound < 1 or coeff_bound**n > 10**8:
        raise TractabilityError(f"enumeration refused: n={n}, coeff_bound={coeff_bound}")
    norms, mu = gram_schmidt(basis)
    rows = basis.rows

    best_i = min(range(n), key=lambda i: dot(rows[i], rows[i]))
    best_x = [int(i == best_i) for i in range(n)]
    best = Fraction(dot(rows[best_i], rows[best_i]))
    x = [0] * n
    clipped = False

    def visit(i: int, partial: Fraction) -> None:
        nonlocal best, best_x, clipped
        center = -sum((mu[j][i] * x[j] for j in range(i + 1, n)), Fraction(0))
        start = round(center)
        for direction in (1, -1):
            v = start if direction == 1 else start - 1
            while True:
                if abs(v) > coeff_bound:
                    if norms[i] * (v - center) ** 2 + partial <= best:
                        clipped = True
                    break
                cost = partial + norms[i] * (v - center) ** 2
                if cost > best:
                    break
                x[i] = v
                if i == 0:
                    if any(x) and cost < best:
                        best = cost
                        best_x = list(x)
                else:
                    visit(i - 1, cost)
                v += direction
        x[i] = 0

    visit(n - 1, Fraction(0))
    vec = [sum(best_x[i] * rows[i][c] for i in range(n)) for c in range(basis.m)]
    return ShortestVector(vec, best_x, int(best), clipped)


@dataclass
class Volume:
    gram_det: int
    root: int | None

    @property
    def squared_only(self) -> bool:
        return self.root is None


def volume(basis: LatticeBasis) -> Volume:
    """Gram determinant ``det(B B^T)`` and its integer square root when it is a perfect square."""
    g = det_bareiss(gram_matrix(basis.rows))
    if g == 0:
        _integral_gso(basis.rows)  # raises with the offending row
    return Volume(g, isqrt_exact(g))


def bound_lll_worstcase(n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 ** ((n - 1) / 2)


def bound_lll_average(n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return 1.02**n


def schnorr_beta(k: int) -> float:
    """Upper bound used for Schnorr's block constant."""
    if k <= 100:
        return k**1.1
    return (1 + k / 2) ** (2 * math.log(2) + 1 / k)


def hermite_proxy(k: int) -> float:
    # gamma_k <= k is the proxy; exact Hermite constants are unknown beyond k = 8.
    return float(k)


def log2_bound_block_reduction(k: int, n: int, variant: Literal["schnorr", "ghkn"] = "ghkn") -> dict[str, float]:
    """log2 of each factor of the block-reduction approximation bound.

    Returned keys: ``hermite`` (log2 sqrt(gamma_k)), ``beta`` (the beta_k power),
    ``extra`` (the (4/3) factor, ghkn only) and ``total``. Logs are returned
    because the bound overflows a float for the attack sizes of interest.
    """
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    lb = math.log2(schnorr_beta(k))
    hermite = 0.5 * math.log2(hermite_proxy(k))
    if variant == "schnorr":
        beta = lb * (n / k - 1) / 2
        extra = 0.0
    elif variant == "ghkn":
        beta = lb * (n / (2 * k) - 1)
        extra = (3 * k - 1) / 4 * math.log2(4 / 3)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return {"hermite": hermite, "beta": beta, "extra": extra, "total": hermite + beta + extra}


def bound_block_reduction(k: int, n: int, variant: Literal["schnorr", "ghkn"] = "ghkn") -> float:
    return 2.0 ** log2_bound_block_reduction(k, n, variant)["total"]


def unimodular_det(transform: Matrix) -> int:
    return det_bareiss(transform)
