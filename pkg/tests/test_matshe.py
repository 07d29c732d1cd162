import random

import pytest
from sympy import isprime

from dghvlab.matshe import (
    BudgetExceeded,
    MatSheKeyPair,
    adjugate,
    det2,
    fresh_noise_worst,
    left_system_holds,
    mat_add,
    mat_decrypt,
    mat_encrypt,
    mat_keygen,
    mat_mul,
    mat_mul_raw,
    mat_noise_of,
    max_entry,
    pub_count,
    right_system_holds,
    scalar,
    sum_of_two_squares,
    within_budget,
)

ZERO = [[0, 0], [0, 0]]
IDENTITY = [[1, 0], [0, 1]]
VARIANTS = ["random-T", "gaussian"]


@pytest.fixture(scope="module", params=[(lam, v) for lam in (3, 4) for v in VARIANTS],
                ids=lambda x: f"lam{x[0]}-{x[1]}")
def key(request):
    lam, variant = request.param
    return mat_keygen(lam, variant, random.Random(lam * 7 + len(variant)), instrumented=True)


def encrypt(kp, m, rng, **kw):
    return mat_encrypt(kp.public_B, kp.modulus, kp.lam, m, rng, **kw)


def test_toy_adjugate():
    t = [[3, 1], [1, 2]]
    assert det2(t) == 5
    assert adjugate(t) == [[2, -1], [-1, 3]]
    assert mat_mul_raw(adjugate(t), t) == scalar(5) == mat_mul_raw(t, adjugate(t))


def test_gaussian_toy():
    a, b = sum_of_two_squares(13)
    assert (a, b) == (3, 2)
    t = [[a, b], [-b, a]]
    assert mat_mul_raw(t, adjugate(t)) == scalar(13)
    assert sum_of_two_squares(5) == (1, 2)


def test_sum_of_two_squares_random_40_bit():
    rng = random.Random(40)
    found = 0
    while found < 5:
        p = rng.getrandbits(40) | (1 << 39) | 1
        if p % 4 != 1 or not isprime(p):
            continue
        a, b = sum_of_two_squares(p)
        assert a * a + b * b == p and a & 1 and a > 0 and b > 0
        found += 1


@pytest.mark.parametrize("bad", [7, 21, 4])
def test_sum_of_two_squares_domain(bad):
    with pytest.raises(ValueError):
        sum_of_two_squares(bad)


def test_key_invariants(key):
    t, a = key.T, key.A
    assert mat_mul_raw(a, t) == scalar(key.secret_modulus) == mat_mul_raw(t, a)
    assert key.secret_modulus & 1 and t[0][0] & 1
    assert len(key.public_B) == pub_count(key.lam)
    assert all(abs(r) <= 2**key.lam for r in key.true_noise)
    if key.variant == "random-T":
        assert key.modulus == det2(t) > 0
    else:
        p = key.secret_modulus
        assert t[0][0] ** 2 + t[0][1] ** 2 == p and isprime(p) and p % 4 == 1
        assert key.modulus == p * key.factor_q


def test_fresh_noise_always_within_budget(key):
    assert within_budget(key, fresh_noise_worst(key.lam, len(key.public_B)))


def test_encrypt_zero_randomness():
    kp = mat_keygen(3, "random-T", random.Random(0))
    ks = [0] * len(kp.public_B)
    assert encrypt(kp, 0, random.Random(0), ks=ks, r=0) == ZERO
    assert encrypt(kp, 1, random.Random(0), ks=ks, r=0) == IDENTITY
    assert mat_decrypt(kp, ZERO) == 0
    assert mat_decrypt(kp, IDENTITY) == 1
    assert mat_noise_of(kp, IDENTITY) == 1
    assert mat_noise_of(kp, mat_add(IDENTITY, IDENTITY, kp.modulus)) == 2


def test_encrypt_rejects_non_bit():
    kp = mat_keygen(2, "random-T", random.Random(0))
    with pytest.raises(ValueError):
        encrypt(kp, 3, random.Random(0))


def test_round_trip(key):
    rng = random.Random(1)
    for _ in range(300):
        m = rng.getrandbits(1)
        c = encrypt(key, m, rng)
        assert all(-key.modulus < 2 * v <= key.modulus for row in c for v in row)
        assert mat_decrypt(key, c) == m
        assert mat_noise_of(key, c) & 1 == m


def test_add_identities(key):
    rng = random.Random(2)
    for _ in range(50):
        m1, m2 = rng.getrandbits(1), rng.getrandbits(1)
        c1, c2 = encrypt(key, m1, rng), encrypt(key, m2, rng)
        assert mat_add(c1, ZERO, key.modulus) == c1
        s = mat_add(c1, c2, key.modulus)
        assert mat_noise_of(key, s) == mat_noise_of(key, c1) + mat_noise_of(key, c2)
        assert mat_decrypt(key, s) == m1 ^ m2


def test_mul_identities(key):
    rng = random.Random(3)
    checked = 0
    for _ in range(100):
        m1, m2 = rng.getrandbits(1), rng.getrandbits(1)
        small = lambda: [rng.randint(-1, 1) for _ in key.public_B]
        c1 = encrypt(key, m1, rng, ks=small(), r=rng.randint(-2, 2))
        c2 = encrypt(key, m2, rng, ks=small(), r=rng.randint(-2, 2))
        assert mat_mul(c1, IDENTITY, key.modulus) == c1
        s1, s2 = mat_noise_of(key, c1), mat_noise_of(key, c2)
        if not within_budget(key, s1 * s2):
            continue
        prod = mat_mul(c1, c2, key.modulus)
        assert mat_noise_of(key, prod) == s1 * s2
        assert mat_decrypt(key, prod) == m1 * m2
        checked += 1
    assert checked >= 50


def test_right_relation_holds_left_does_not(key):
    assert all(right_system_holds(key, i) for i in range(len(key.public_B)))
    assert not all(left_system_holds(key, i) for i in range(len(key.public_B)))


def test_relation_helpers_need_instrumented_key():
    kp = mat_keygen(2, "random-T", random.Random(0))
    with pytest.raises(ValueError):
        right_system_holds(kp, 0)
    with pytest.raises(ValueError):
        left_system_holds(kp, 0)


def test_budget_exceeded_signal():
    kp = mat_keygen(3, "random-T", random.Random(5))
    big = kp.secret_modulus // (2 * max_entry(kp.T)) + 1
    with pytest.raises(BudgetExceeded):
        mat_noise_of(kp, [[big * 3 + 1, 7], [0, big]])


def test_keygen_errors():
    with pytest.raises(ValueError):
        mat_keygen(1, "random-T", random.Random(0))
    with pytest.raises(ValueError):
        mat_keygen(3, "quaternion", random.Random(0))


def test_keygen_deterministic():
    a = mat_keygen(3, "gaussian", random.Random(9))
    b = mat_keygen(3, "gaussian", random.Random(9))
    assert isinstance(a, MatSheKeyPair) and a == b
