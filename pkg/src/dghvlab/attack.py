"""Plaintext-recovery lattice attack on DGHV ciphertexts.

Given the public key and a ciphertext ``c``, a lattice is built whose short
vectors are combinations ``y*c - sum(y_i*x_i) - y0*x0`` in which every multiple
of the secret ``p`` cancels. The first coordinate of such a vector is pure
noise, ``2*(...) + y*m``, so its parity leaks ``m`` whenever ``y`` is odd.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal, Sequence

from .dghv import Params
from .intmath import parity
from .lattice import LatticeBasis, ReductionOutcome, bound_lll_average, log2_bound_block_reduction, lll_reduce

Variant = Literal["L", "L1"]
ThresholdMode = Literal["known-p", "eta-floor"]
THRESHOLD_MODES = ("known-p", "eta-floor")


class ParamsTooSmall(ValueError):
    pass


@dataclass
class AttackConfig:
    subset_size: int | None = None  # None: params.subset_size capped at tau
    max_subset_retries: int = 5
    candidate_scan_depth: int = 5
    threshold_mode: ThresholdMode = "known-p"
    delta: Fraction = Fraction(3, 4)

    def resolved_subset_size(self, params: Params) -> int:
        t = params.subset_size if self.subset_size is None else self.subset_size
        t = min(t, params.tau)
        if t < 1:
            raise ValueError("subset size must be >= 1")
        return t

    def validate(self, params: Params) -> None:
        if self.subset_size is not None and self.subset_size > params.tau:
            raise ValueError(f"subset_size {self.subset_size} exceeds tau={params.tau}")
        if self.candidate_scan_depth < 1:
            raise ValueError("candidate_scan_depth must be >= 1")
        if self.max_subset_retries < 0:
            raise ValueError("max_subset_retries must be >= 0")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValueError(f"unknown threshold mode {self.threshold_mode!r}")


@dataclass
class Witness:
    """A short lattice vector split into its meaning: ``b0 = y*c - sum(ys*x_T) - y0*x0``."""

    b0: int
    y: int
    ys: list[int]
    y0: int

    def coefficients(self) -> list[int]:
        return [self.y, *self.ys, self.y0]

    def to_dict(self) -> dict:
        return {"b0": str(self.b0), "y": str(self.y), "ys": [str(v) for v in self.ys], "y0": str(self.y0)}


@dataclass
class ColumnParity:
    decision: int | None
    b_parity: list[int]
    u_parity: list[int]
    qualifying: list[bool]


@dataclass
class AttackVerdict:
    decision: int | None
    method: str | None
    threshold: int
    witness: Witness | None = None
    subset_used: list[int] = field(default_factory=list)
    rows_scanned: int = 0
    retries: int = 0
    timings_ms: list[float] = field(default_factory=list)

    @property
    def conclusive(self) -> bool:
        return self.decision is not None

    def to_dict(self) -> dict:
        return {
            "decision": "inconclusive" if self.decision is None else self.decision,
            "method": self.method,
            "threshold": str(self.threshold),
            "subset": self.subset_used,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "rows_scanned": self.rows_scanned,
            "retries": self.retries,
            "timings_ms": self.timings_ms,
        }


def build_attack_lattice(pk_x: Sequence[int], c: int, subset: Sequence[int], variant: Variant = "L1") -> LatticeBasis:
    """Rows ``(c, [1,] 0..)``, ``(-x_i, [0,] e_i)`` for ``i`` in ``subset``, and ``(-x0, [0,] e_last)``."""
    if not subset:
        raise ValueError("subset must be nonempty")
    if len(set(subset)) != len(subset):
        raise ValueError("duplicate subset indices")
    if any(i < 1 or i >= len(pk_x) for i in subset):
        raise ValueError("subset indices must lie in 1..tau (x0 is always the last row)")
    if variant not in ("L", "L1"):
        raise ValueError(f"unknown lattice variant {variant!r}")
    t = len(subset)
    track = [0] if variant == "L1" else []
    rows = [[c] + ([1] if variant == "L1" else []) + [0] * (t + 1)]
    for k, i in enumerate(subset):
        rows.append([-pk_x[i]] + track + [int(j == k) for j in range(t + 1)])
    rows.append([-pk_x[0]] + track + [0] * t + [1])
    return LatticeBasis(rows)


def acceptance_threshold(params: Params, mode: ThresholdMode, p: int | None = None, subset_size: int | None = None) -> int:
    """Infinity-norm bound below which a reduced vector carries no multiple of ``p``.

    ``known-p`` divides the secret itself; ``eta-floor`` uses ``2^(eta-1) <= p``,
    which is what an attacker actually knows.
    """
    t = params.subset_size if subset_size is None else subset_size
    denom = 8 * t << params.rho
    if mode == "known-p":
        if p is None:
            raise ValueError("known-p threshold needs the secret p")
        thr = p // denom
    elif mode == "eta-floor":
        thr = (1 << (params.eta - 1)) // denom if params.eta >= 1 else 0
    else:
        raise ValueError(f"unknown threshold mode {mode!r}")
    if thr < 2:
        raise ParamsTooSmall(f"acceptance threshold {thr} < 2: attack meaningless for these parameters")
    return thr


def witness_of(outcome: ReductionOutcome, row: int, variant: Variant = "L1") -> Witness:
    b = outcome.reduced.rows[row]
    if variant == "L1":
        return Witness(b[0], b[1], b[2:-1], b[-1])
    u = outcome.transform[row]
    return Witness(b[0], u[0], b[1:-1], b[-1])


def _row_inf(outcome: ReductionOutcome, row: int, variant: Variant) -> int:
    norm = max(abs(v) for v in outcome.reduced.rows[row])
    if variant == "L":
        norm = max(norm, abs(outcome.transform[row][0]))
    return norm


def scan_candidates(outcome: ReductionOutcome, threshold: int, depth: int, variant: Variant = "L1") -> list[Witness]:
    """Reduced rows (within the first ``depth``) below the threshold with an odd c-coefficient."""
    found = []
    for i in range(min(depth, outcome.reduced.n)):
        if _row_inf(outcome, i, variant) >= threshold:
            continue
        w = witness_of(outcome, i, variant)
        if w.y & 1:
            found.append(w)
    return found


def decide_first_vector(candidate: Witness) -> int:
    return parity(candidate.b0)


def decide_column_parity(outcome: ReductionOutcome, original: LatticeBasis, threshold: int) -> ColumnParity:
    """Compare parities of the reduced first column and the transform's first column.

    On a qualifying row ``b0 = 2*(noise) + y*m``. Plaintext 1 forces
    ``b0 = y (mod 2)`` on every row; plaintext 0 forces ``b0`` even on every
    row. The bit is reported only when exactly one hypothesis fits all rows.
    """
    del original  # the transform already encodes the coefficients of the c-row
    b_par, u_par, ok = [], [], []
    for b, u in zip(outcome.reduced.rows, outcome.transform):
        b_par.append(parity(b[0]))
        u_par.append(parity(u[0]))
        ok.append(max(abs(v) for v in b) < threshold and max(abs(v) for v in u) < threshold)
    rows = [(bp, up) for bp, up, q in zip(b_par, u_par, ok) if q]
    fits_one = bool(rows) and all(bp == up for bp, up in rows)
    fits_zero = bool(rows) and all(bp == 0 for bp, _ in rows)
    decision = 1 if fits_one and not fits_zero else 0 if fits_zero and not fits_one else None
    return ColumnParity(decision, b_par, u_par, ok)


def attack(pk_x: Sequence[int], params: Params, c: int, config: AttackConfig, rng: random.Random,
           p: int | None = None, subsets: Sequence[Sequence[int]] | None = None) -> AttackVerdict:
    """Recover the plaintext bit of ``c`` from the public key alone.

    ``p`` is consulted only to compute the known-p threshold. ``subsets`` pins
    the subsets tried (one per retry) instead of sampling them.
    """
    config.validate(params)
    t = config.resolved_subset_size(params)
    threshold = acceptance_threshold(params, config.threshold_mode, p, t)
    tau = len(pk_x) - 1
    verdict = AttackVerdict(None, None, threshold)
    for attempt in range(config.max_subset_retries):
        subset = list(subsets[attempt]) if subsets is not None else sorted(rng.sample(range(1, tau + 1), t))
        basis = build_attack_lattice(pk_x, c, subset, "L1")
        start = time.perf_counter()
        outcome = lll_reduce(basis, config.delta)
        verdict.timings_ms.append(round((time.perf_counter() - start) * 1000, 3))
        verdict.retries = attempt + 1
        verdict.subset_used = subset
        depth = min(config.candidate_scan_depth, outcome.reduced.n)
        verdict.rows_scanned += depth
        cands = scan_candidates(outcome, threshold, depth)
        if cands:
            verdict.decision = decide_first_vector(cands[0])
            verdict.method = "first-vector-parity"
            verdict.witness = cands[0]
            return verdict
        cp = decide_column_parity(outcome, basis, threshold)
        if cp.decision is not None:
            verdict.decision = cp.decision
            verdict.method = "column-parity"
            return verdict
    return verdict


@dataclass
class DieInstance:
    """Find small ``ys``, not all zero, with ``|sum(ys*xs)|`` below a p-scale bound."""

    xs: list[int]
    rho: int
    p: int | None = None
    eta: int | None = None

    @property
    def scale(self) -> int:
        if self.p is not None:
            return self.p
        if self.eta is None:
            raise ValueError("DIE instance needs p or eta")
        return 1 << (self.eta - 1)

    @property
    def bound_y(self) -> Fraction:
        t = len(self.xs) - 1
        return Fraction(self.scale, 8 * t << self.rho)


def check_die_solution(inst: DieInstance, ys: Sequence[int]) -> bool:
    if len(ys) != len(inst.xs):
        raise ValueError(f"expected {len(inst.xs)} coefficients, got {len(ys)}")
    if not any(ys):
        return False
    if any(abs(y) >= inst.bound_y for y in ys):
        return False
    return 8 * abs(sum(y * x for y, x in zip(ys, inst.xs))) < inst.scale


def die_instance_from_attack(pk_x: Sequence[int], c: int, subset: Sequence[int], rho: int,
                             p: int | None = None, eta: int | None = None) -> DieInstance:
    """DIE instance whose integers are ``(c, x_T..., x0)``; pair with :func:`die_coefficients`."""
    return DieInstance([c, *(pk_x[i] for i in subset), pk_x[0]], rho, p, eta)


def die_coefficients(w: Witness) -> list[int]:
    return [w.y, *(-v for v in w.ys), -w.y0]


@dataclass
class PigeonholeBound:
    coeff_log2: int
    count_log2: int
    gamma: int
    holds: bool
    degenerate: bool


def pigeonhole_log_bound(lam: int, subset_size: int | None = None, gamma: int | None = None,
                         eta: int | None = None) -> PigeonholeBound:
    """Counting argument for a short combination: ``(2^(lam^2))^(t+2) > 2^gamma``."""
    t = lam**3 if subset_size is None else subset_size
    gamma = lam**5 if gamma is None else gamma
    eta = 4 * lam**2 if eta is None else eta
    coeff = lam**2
    count = coeff * (t + 2)
    # Below a valid scheme (gamma must exceed eta) the statement has no content.
    degenerate = gamma <= eta
    return PigeonholeBound(coeff, count, gamma, count > gamma and not degenerate, degenerate)


def feasibility_estimate(params: Params, block_k: int | None = None, block_n: int | None = None) -> dict:
    """Predicted log2 of the first reduced vector versus the acceptance threshold.

    Two predictors: the LLL average-case ratio on the (t+2)-dimensional lattice
    and the GHKN block-reduction bound with block size ``lambda`` on dimension
    ``lambda^3``. The shortest vector is estimated by the pigeonhole bound.
    """
    lam = params.lam
    t = params.subset_size
    n = t + 2
    ph = pigeonhole_log_bound(lam, t, params.gamma, params.eta)
    # The count argument needs log2(B) >= gamma/(t+2); lam^2 is the textbook instantiation.
    lambda1_log2 = max(float(ph.coeff_log2), params.gamma / n)
    threshold_log2 = (params.eta - 1) - math.log2(8 * t) - params.rho
    lll_ratio_log2 = math.log2(bound_lll_average(1)) * n
    lll_pred = lll_ratio_log2 + lambda1_log2
    k = lam if block_k is None else block_k
    bn = lam**3 if block_n is None else block_n
    report = {
        "params": params.to_dict(),
        "dimension": n,
        "lambda1_log2": lambda1_log2,
        "lambda1_source": "pigeonhole",
        "pigeonhole": {"coeff_log2": ph.coeff_log2, "count_log2": ph.count_log2, "holds": ph.holds},
        "threshold_log2": threshold_log2,
        "eta": params.eta,
        "lll_average": {
            "ratio_log2": lll_ratio_log2,
            "predicted_log2": lll_pred,
            "feasible": lll_pred < threshold_log2,
            "margin_log2": threshold_log2 - lll_pred,
        },
    }
    if 2 <= k <= bn:
        blk = log2_bound_block_reduction(k, bn, "ghkn")
        pred = blk["total"] + lambda1_log2
        report["block_ghkn"] = {
            "k": k,
            "n": bn,
            "beta_log2": blk["beta"],
            "hermite_log2": blk["hermite"],
            "hermite_proxy": "gamma_k <= k",
            "extra_log2": blk["extra"],
            "ratio_log2": blk["total"],
            "predicted_log2": pred,
            "feasible": pred < threshold_log2,
            "margin_log2": threshold_log2 - pred,
        }
    else:
        report["block_ghkn"] = None
    return report
