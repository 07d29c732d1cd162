"""Somewhat-homomorphic scheme with a 2x2 integer matrix as the secret key.

The secret is ``T``; its adjugate ``A`` satisfies ``A T = det(T) I``. Public
matrices ``B_i = R_i A + 2 r_i I`` are approximate multiples of ``A``, so
``C T`` collapses to ``s T`` modulo ``det(T)`` for a small scalar ``s`` whose
parity is the plaintext. There is no single large integer secret for a
lattice to lock onto.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Literal, Sequence

from sympy import isprime

from .intmath import centered_mod, parity

Mat = list[list[int]]
MatVariant = Literal["random-T", "gaussian"]


class BudgetExceeded(Exception):
    """Noise grew past what the secret key can decode."""


def adjugate(t: Mat) -> Mat:
    (a, b), (c, d) = t
    return [[d, -b], [-c, a]]


def det2(t: Mat) -> int:
    return t[0][0] * t[1][1] - t[0][1] * t[1][0]


def mat_mul_raw(x: Mat, y: Mat) -> Mat:
    return [[x[i][0] * y[0][j] + x[i][1] * y[1][j] for j in range(2)] for i in range(2)]


def mat_center(x: Mat, modulus: int) -> Mat:
    return [[centered_mod(v, modulus) for v in row] for row in x]


def scalar(s: int) -> Mat:
    return [[s, 0], [0, s]]


def max_entry(x: Mat) -> int:
    return max(abs(v) for row in x for v in row)


def sum_of_two_squares(p: int) -> tuple[int, int]:
    """Write a prime ``p = 1 (mod 4)`` as ``a^2 + b^2`` with ``a`` odd (Cornacchia)."""
    if p % 4 != 1 or not isprime(p):
        raise ValueError(f"{p} is not a prime congruent to 1 mod 4")
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    x = pow(z, (p - 1) // 4, p)  # square root of -1
    r0, r1 = p, x
    bound = math.isqrt(p)
    while r1 > bound:
        r0, r1 = r1, r0 % r1
    a = r1
    b = math.isqrt(p - a * a)
    if a * a + b * b != p:
        raise ArithmeticError(f"Cornacchia failed for {p}")
    return (a, b) if a & 1 else (b, a)


def pub_count(lam: int) -> int:
    return max(1, math.ceil(lam * math.log2(lam)))


def fresh_noise_worst(lam: int, tau: int) -> int:
    """Largest ``|2(sum k_i r_i + r) + m|`` a fresh ciphertext can carry."""
    bound = 1 << lam
    return 2 * (tau * bound * bound + bound) + 1


def entry_bits(lam: int, tau: int) -> int:
    # lam^2 bits per entry, widened where that cannot decode a worst-case fresh ciphertext.
    return max(lam * lam, fresh_noise_worst(lam, tau).bit_length() + 2)


@dataclass
class MatSheKeyPair:
    lam: int
    variant: MatVariant
    T: Mat
    A: Mat
    secret_modulus: int  # det(T); decryption works modulo this
    modulus: int  # public modulus: det(T), or n = p q in the gaussian variant
    public_B: list[Mat]
    true_noise: list[int] | None = None
    factor_q: int | None = None

    @property
    def public(self) -> dict:
        return {"modulus": self.modulus, "B": self.public_B, "variant": self.variant}


def _random_t(rng: random.Random, bits: int, need: int) -> Mat:
    bound = 1 << bits
    while True:
        t = [[rng.randint(-bound, bound) for _ in range(2)] for _ in range(2)]
        d = det2(t)
        if d < 0:
            t = [t[1], t[0]]
            d = -d
        if d & 1 and t[0][0] & 1 and d.bit_length() >= 2 * bits - 1 and d > 2 * max_entry(t) * need:
            return t


def _random_prime(rng: random.Random, bits: int, mod4: int | None = None) -> int:
    while True:
        n = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if mod4 is not None and n % 4 != mod4:
            continue
        if isprime(n):
            return n


def mat_keygen(lam: int, variant: MatVariant, rng: random.Random, tau: int | None = None,
               instrumented: bool = False) -> MatSheKeyPair:
    if lam < 2:
        raise ValueError("lambda must be >= 2")
    tau = pub_count(lam) if tau is None else tau
    bits = entry_bits(lam, tau)
    need = fresh_noise_worst(lam, tau)
    q = None
    if variant == "random-T":
        t = _random_t(rng, bits, need)
        secret = det2(t)
        modulus = secret
    elif variant == "gaussian":
        while True:
            p = _random_prime(rng, 2 * bits, mod4=1)
            a, b = sum_of_two_squares(p)
            if p > 2 * max(a, b) * need:
                break
        t = [[a, b], [-b, a]]
        secret = p
        while True:
            q = _random_prime(rng, 2 * bits)
            if q != p:
                break
        modulus = p * q
    else:
        raise ValueError(f"unknown variant {variant!r}")
    adj = adjugate(t)
    rb = 1 << lam
    noise = [rng.randint(-rb, rb) for _ in range(tau)]
    pub = []
    for r in noise:
        rmat = [[rng.randrange(modulus) for _ in range(2)] for _ in range(2)]
        prod = mat_mul_raw(rmat, adj)
        pub.append(mat_center([[prod[i][j] + 2 * r * (i == j) for j in range(2)] for i in range(2)], modulus))
    return MatSheKeyPair(lam, variant, t, adj, secret, modulus, pub, noise if instrumented else None, q)


def mat_encrypt(public_B: Sequence[Mat], modulus: int, lam: int, m: int, rng: random.Random,
                ks: Sequence[int] | None = None, r: int | None = None) -> Mat:
    if m not in (0, 1):
        raise ValueError(f"plaintext must be a bit, got {m}")
    bound = 1 << lam
    if ks is None:
        ks = [rng.randint(-bound, bound) for _ in public_B]
    if r is None:
        r = rng.randint(-bound, bound)
    acc = scalar(m + 2 * r)
    for k, b in zip(ks, public_B):
        for i in range(2):
            for j in range(2):
                acc[i][j] += k * b[i][j]
    return mat_center(acc, modulus)


def mat_add(c1: Mat, c2: Mat, modulus: int) -> Mat:
    return mat_center([[c1[i][j] + c2[i][j] for j in range(2)] for i in range(2)], modulus)


def mat_mul(c1: Mat, c2: Mat, modulus: int) -> Mat:
    return mat_center(mat_mul_raw(c1, c2), modulus)


def _collapse(sk: MatSheKeyPair, c: Mat) -> Mat:
    return mat_center(mat_mul_raw(c, sk.T), sk.secret_modulus)


def mat_decrypt(sk: MatSheKeyPair, c: Mat) -> int:
    return parity(_collapse(sk, c)[0][0])


def mat_noise_of(sk: MatSheKeyPair, c: Mat) -> int:
    """The scalar ``s`` with ``centered(C T) = s T``; raises if no such scalar exists."""
    m = _collapse(sk, c)
    t = sk.T
    i, j = next((i, j) for i in range(2) for j in range(2) if t[i][j])
    s, rem = divmod(m[i][j], t[i][j])
    if rem or any(m[a][b] != s * t[a][b] for a in range(2) for b in range(2)):
        raise BudgetExceeded("C*T is not a small multiple of T")
    return s


def within_budget(sk: MatSheKeyPair, s: int) -> bool:
    return 2 * abs(s) * max_entry(sk.T) < sk.secret_modulus


def left_system_holds(sk: MatSheKeyPair, i: int) -> bool:
    """Whether ``T B_i = 2 r_i T (mod det T)``, the left-multiplied form of the key relation."""
    if sk.true_noise is None:
        raise ValueError("needs an instrumented key")
    lhs = mat_center(mat_mul_raw(sk.T, sk.public_B[i]), sk.secret_modulus)
    rhs = mat_center([[2 * sk.true_noise[i] * v for v in row] for row in sk.T], sk.secret_modulus)
    return lhs == rhs


def right_system_holds(sk: MatSheKeyPair, i: int) -> bool:
    if sk.true_noise is None:
        raise ValueError("needs an instrumented key")
    lhs = mat_center(mat_mul_raw(sk.public_B[i], sk.T), sk.secret_modulus)
    rhs = mat_center([[2 * sk.true_noise[i] * v for v in row] for row in sk.T], sk.secret_modulus)
    return lhs == rhs
