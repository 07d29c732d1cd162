"""The DGHV somewhat-homomorphic scheme over the integers, plus test oracles."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from math import gcd
from typing import Sequence

from .intmath import centered_mod, parity


class ParamsError(ValueError):
    pass


class AgcdError(Exception):
    pass


class AgcdRefused(AgcdError):
    pass


class AgcdNotFound(AgcdError):
    pass


@dataclass(frozen=True)
class Params:
    """Security-parameter bundle. Build with :meth:`from_lambda` to get the defaults."""

    lam: int
    rho: int
    eta: int
    gamma: int
    tau: int
    subset_size: int

    @classmethod
    def from_lambda(cls, lam: int, *, rho: int | None = None, eta: int | None = None,
                    gamma: int | None = None, tau: int | None = None,
                    subset_size: int | None = None) -> "Params":
        if lam < 1:
            raise ParamsError(f"lambda must be positive, got {lam}")
        rho = lam if rho is None else rho
        eta = 4 * lam**2 if eta is None else eta
        gamma = lam**5 if gamma is None else gamma
        tau = gamma + lam if tau is None else tau
        subset_size = lam**3 if subset_size is None else subset_size
        p = cls(lam, rho, eta, gamma, tau, subset_size)
        p.validate()
        return p

    def validate(self) -> None:
        if self.rho < 1:
            raise ParamsError(f"rho must be >= 1, got {self.rho}")
        if self.tau < 1:
            raise ParamsError(f"tau must be >= 1, got {self.tau}")
        margin = self.rho + 3 + math.ceil(math.log2(self.tau))
        if self.eta <= margin:
            raise ParamsError(f"eta={self.eta} leaves no decryption margin (need eta > {margin})")
        if self.gamma <= self.eta:
            raise ParamsError(f"gamma={self.gamma} must exceed eta={self.eta}")
        if self.subset_size < 1:
            raise ParamsError("subset_size must be >= 1")

    def with_overrides(self, **kw) -> "Params":
        p = replace(self, **{k: v for k, v in kw.items() if v is not None})
        p.validate()
        return p

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "rho": self.rho, "eta": self.eta, "gamma": self.gamma,
                "tau": self.tau, "subset_size": self.subset_size}

    @classmethod
    def from_dict(cls, d: dict) -> "Params":
        p = cls(d["lambda"], d["rho"], d["eta"], d["gamma"], d["tau"], d["subset_size"])
        p.validate()
        return p


def toy_params() -> Params:
    """Toy regime small enough for exact reduction in well under a second: lambda=3, eta=27, gamma=243, tau=246."""
    return Params.from_lambda(3, eta=27)


@dataclass
class DghvKeyPair:
    params: Params
    sk_p: int
    pk_x: list[int]
    # Ground truth, kept only for instrumented keys.
    true_q: list[int] | None = None
    true_noise: list[int] | None = None

    @property
    def x0(self) -> int:
        return self.pk_x[0]

    @property
    def instrumented(self) -> bool:
        return self.true_noise is not None


@dataclass
class EncryptionTrace:
    value: int
    m: int
    r: int
    subset: list[int] = field(default_factory=list)


def _odd_in_range(rng: random.Random, lo: int, hi: int) -> int:
    """Uniform odd integer in ``[lo, hi]``; caller guarantees one exists."""
    first = lo | 1
    count = (hi - first) // 2 + 1
    return first + 2 * rng.randrange(count)


def keygen(params: Params, rng: random.Random, instrumented: bool = False) -> DghvKeyPair:
    params.validate()
    p = _odd_in_range(rng, 1 << (params.eta - 1), (1 << params.eta) - 1)
    qmax = ((1 << params.gamma) - 1) // p  # largest q with q*p < 2^gamma
    qs = [rng.randrange(qmax + 1) for _ in range(params.tau)]
    lo = max(qs) + 1
    if lo <= qmax and (lo | 1) <= qmax:
        q0 = _odd_in_range(rng, lo, qmax)
    else:
        q0 = qmax if qmax & 1 else qmax - 1
        qs = [q if q <= q0 else rng.randrange(q0 + 1) for q in qs]
    bound = 1 << params.rho
    rs = [rng.randint(-bound, bound) for _ in range(params.tau + 1)]
    x0 = q0 * p + 2 * rs[0]
    xs = [x0] + [centered_mod(q * p + 2 * r, x0) for q, r in zip(qs, rs[1:])]
    if instrumented:
        return DghvKeyPair(params, p, xs, [q0] + qs, rs)
    return DghvKeyPair(params, p, xs)


def encrypt_traced(pk_x: Sequence[int], params: Params, m: int, rng: random.Random,
                   subset: Sequence[int] | None = None, r: int | None = None) -> EncryptionTrace:
    """Encrypt ``m`` and report the randomness used. ``subset`` indexes into ``pk_x[1:]`` (1-based)."""
    if m not in (0, 1):
        raise ValueError(f"plaintext must be a bit, got {m}")
    if subset is None:
        mask = rng.getrandbits(params.tau)
        subset = [i + 1 for i in range(params.tau) if mask >> i & 1]
    if r is None:
        bound = 1 << params.rho
        r = rng.randint(-bound, bound)
    total = m + 2 * r + sum(pk_x[i] for i in subset)
    return EncryptionTrace(centered_mod(total, pk_x[0]), m, r, list(subset))


def encrypt(pk_x: Sequence[int], params: Params, m: int, rng: random.Random,
            subset: Sequence[int] | None = None, r: int | None = None) -> int:
    return encrypt_traced(pk_x, params, m, rng, subset, r).value


def decrypt(sk_p: int, c: int) -> int:
    return parity(centered_mod(c, sk_p))


def eval_add(c1: int, c2: int, x0: int) -> int:
    return centered_mod(c1 + c2, x0)


def eval_mul(c1: int, c2: int, x0: int) -> int:
    return centered_mod(c1 * c2, x0)


def noise_of(sk_p: int, c: int) -> int:
    return centered_mod(c, sk_p)


def fresh_noise_bound(params: Params) -> int:
    return (1 << (params.rho + 2)) * (params.tau + 2)


def _fits(d: int, pk_x: Sequence[int], noise_bound: int) -> bool:
    for x in pk_x:
        z = centered_mod(x, d)
        if z & 1 or abs(z) > noise_bound:
            return False
    return True


def brute_force_agcd(pk_x: Sequence[int], params: Params, max_cofactor: int = 1 << 16) -> int:
    """Recover the secret by exhaustive search over the noise of ``x0`` and ``x1``.

    Only for toy parameters: the search is ``2^(2 rho + 3)`` gcds.
    """
    if params.rho > 12 or params.eta > 32:
        raise AgcdRefused(f"brute-force AGCD refused for rho={params.rho}, eta={params.eta}")
    if len(pk_x) < 2:
        raise AgcdNotFound("need at least two public integers")
    lo, hi = 1 << (params.eta - 1), 1 << params.eta
    # x0 carries noise 2 r0; later x_i pick up one extra multiple of r0 from the centered reduction.
    b0 = 1 << (params.rho + 1)
    b1 = 1 << (params.rho + 2)
    x0, x1 = pk_x[0], pk_x[1]
    for e0 in range(-b0, b0 + 1, 2):
        y0 = x0 - e0
        for e1 in range(-b1, b1 + 1, 2):
            g = gcd(y0, x1 - e1)
            if g < lo:
                continue
            for s in range(max(1, -(-g // hi)), min(g // lo, max_cofactor) + 1):
                if g % s:
                    continue
                d = g // s
                if lo <= d < hi and d & 1 and _fits(d, pk_x, b1):
                    return d
    raise AgcdNotFound("no eta-bit odd divisor explains the public key")
