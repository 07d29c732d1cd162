import math
import random
from fractions import Fraction
from pathlib import Path

import pytest

from dghvlab.attack import (
    AttackConfig,
    AttackVerdict,
    DieInstance,
    ParamsTooSmall,
    Witness,
    acceptance_threshold,
    attack,
    build_attack_lattice,
    check_die_solution,
    decide_column_parity,
    decide_first_vector,
    die_coefficients,
    die_instance_from_attack,
    feasibility_estimate,
    pigeonhole_log_bound,
    scan_candidates,
    witness_of,
)
from dghvlab.dghv import Params, toy_params, decrypt, encrypt_traced, keygen
from dghvlab.intmath import identity, matmul
from dghvlab.lattice import LatticeBasis, ReductionOutcome, lll_reduce

FIXTURES = Path(__file__).parent / "fixtures"
REF_P = 134217729


def outcome_of(rows, transform=None):
    return ReductionOutcome(LatticeBasis(rows), transform or identity(len(rows)))


@pytest.fixture(scope="module")
def toy_key():
    return keygen(toy_params(), random.Random(2011), instrumented=True)


# --- build_attack_lattice ---

def test_build_toy_variant_l():
    b = build_attack_lattice([9, 5], 7, [1], "L")
    assert b.rows == [[7, 0, 0], [-5, 1, 0], [-9, 0, 1]]


def test_build_toy_variant_l1():
    b = build_attack_lattice([9, 5], 7, [1], "L1")
    assert b.rows == [[7, 1, 0, 0], [-5, 0, 1, 0], [-9, 0, 0, 1]]


def test_build_toy_shape(toy_key):
    b = build_attack_lattice(toy_key.pk_x, 12345, list(range(1, 28)))
    assert (b.n, b.m) == (29, 30)


def test_build_membership_of_coefficient_combination():
    pk, c, subset = [101, 37, 53, 71], 88, [1, 3]
    b = build_attack_lattice(pk, c, subset)
    coeffs = [3, -2, 5, 1]
    v = matmul([coeffs], b.rows)[0]
    assert v == [3 * c + 2 * 37 - 5 * 71 - 101, 3, -2, 5, 1]


@pytest.mark.parametrize("subset", [[], [1, 1], [0, 1], [4]])
def test_build_rejects_bad_subsets(subset):
    with pytest.raises(ValueError):
        build_attack_lattice([9, 5, 3, 2], 7, subset)


def test_build_rejects_bad_variant():
    with pytest.raises(ValueError):
        build_attack_lattice([9, 5], 7, [1], "L2")


# --- acceptance_threshold ---

def test_thresholds():
    params = toy_params()
    assert acceptance_threshold(params, "known-p", REF_P) == 77672
    assert acceptance_threshold(params, "eta-floor") == 38836


def test_threshold_needs_p_and_mode():
    with pytest.raises(ValueError):
        acceptance_threshold(toy_params(), "known-p")
    with pytest.raises(ValueError):
        acceptance_threshold(toy_params(), "nope")


def test_threshold_too_small():
    params = Params(lam=3, rho=30, eta=27, gamma=243, tau=246, subset_size=27)
    with pytest.raises(ParamsTooSmall):
        acceptance_threshold(params, "eta-floor")


# --- scan_candidates / decide_first_vector ---

def test_scan_finds_small_odd_row():
    out = outcome_of([[1, 1, 0, 0], [0, 2, 1, 0], [50, 1, 0, 1]])
    found = scan_candidates(out, 10, 3)
    assert found == [Witness(1, 1, [0], 0)]


def test_scan_depth_one_even_y_is_empty():
    out = outcome_of([[2, 2, 1, 0], [1, 1, 0, 0], [0, 1, 0, 1]])
    assert scan_candidates(out, 10, 1) == []
    assert len(scan_candidates(out, 10, 3)) == 2


def test_scan_variant_l_reads_y_from_transform():
    out = outcome_of([[4, 1, 0], [3, 0, 1]], [[1, 1, 0], [0, 0, 1]])
    assert scan_candidates(out, 10, 2, "L") == [Witness(4, 1, [1], 0)]


def test_decide_first_vector():
    assert decide_first_vector(Witness(6, 3, [], 0)) == 0
    assert decide_first_vector(Witness(-7, 1, [], 0)) == 1


# --- decide_column_parity ---

# Parities of the first columns of U and B for the reference ciphertext ending ...242373.
REF_U_PARITY = "0111111011010000110100111111"
REF_B_PARITY = "0111111011010000110100111110"


def test_column_parity_reference_plaintext_one():
    rows, transform = [], []
    for i, (up, bp) in enumerate(zip(REF_U_PARITY, REF_B_PARITY)):
        rows.append([100 + int(bp), int(up)] + [0] * i + [3] + [0] * (27 - i))
        transform.append([int(up), 5])
    # The last reduced row is far above the threshold and must be excluded.
    rows[-1][0] = 32662
    rows[-1][1] = transform[-1][0] = 1532013
    cp = decide_column_parity(outcome_of(rows, transform), LatticeBasis(rows), 77672)
    assert cp.qualifying.count(True) == 27 and not cp.qualifying[-1]
    assert cp.decision == 1


def test_column_parity_reference_plaintext_zero_fixture():
    b = LatticeBasis.from_text((FIXTURES / "reference_reduced_plaintext0.txt").read_text())
    u = [row[1:] for row in b.rows]
    cp = decide_column_parity(ReductionOutcome(b, u), b, 77672)
    assert cp.decision == 0
    assert not cp.qualifying[-1]
    assert set(cp.u_parity[:-1]) == {0, 1}


def test_column_parity_identity_transform():
    rows = [[4, 1, 0, 0], [-6, 0, 1, 0], [-8, 0, 0, 1]]
    cp = decide_column_parity(outcome_of(rows), LatticeBasis(rows), 100)
    assert cp.decision == 0


def test_column_parity_no_qualifying_rows():
    rows = [[1000, 1, 0], [-999, 0, 1]]
    assert decide_column_parity(outcome_of(rows), LatticeBasis(rows), 10).decision is None


def test_column_parity_mixed_is_inconclusive():
    rows = [[1, 1, 0], [1, 0, 1]]
    assert decide_column_parity(outcome_of(rows), LatticeBasis(rows), 10).decision is None


# --- attack ---

def test_attack_zero_ciphertext_decides_zero(toy_key):
    params = toy_params()
    v = attack(toy_key.pk_x, params, 0, AttackConfig(), random.Random(1), p=toy_key.sk_p)
    assert v.decision == 0


def test_acceptance_soundness_by_noise_expansion(toy_key):
    params = toy_params()
    kp = toy_key
    p, x0, q0, r0 = kp.sk_p, kp.x0, kp.true_q[0], kp.true_noise[0]
    big_q, small_r = [q0], [2 * r0]
    for i in range(1, params.tau + 1):
        k = (kp.true_q[i] * p + 2 * kp.true_noise[i] - kp.pk_x[i]) // x0
        big_q.append(kp.true_q[i] - k * q0)
        small_r.append(2 * kp.true_noise[i] - 2 * k * r0)
        assert kp.pk_x[i] == big_q[i] * p + small_r[i]
    rng = random.Random(3)
    threshold = acceptance_threshold(params, "known-p", p)
    checked = 0
    for _ in range(4):
        tr = encrypt_traced(kp.pk_x, params, rng.getrandbits(1), rng)
        kc = (tr.m + 2 * tr.r + sum(kp.pk_x[i] for i in tr.subset) - tr.value) // x0
        cq = sum(big_q[i] for i in tr.subset) - kc * q0
        cr = tr.m + 2 * tr.r + sum(small_r[i] for i in tr.subset) - kc * 2 * r0
        assert tr.value == cq * p + cr
        subset = sorted(rng.sample(range(1, params.tau + 1), params.subset_size))
        out = lll_reduce(build_attack_lattice(kp.pk_x, tr.value, subset))
        for row in range(out.reduced.n):
            if max(abs(v) for v in out.reduced.rows[row]) >= threshold:
                continue
            w = witness_of(out, row)
            coeffs = [w.y] + [-v for v in w.ys] + [-w.y0]
            qs = [cq] + [big_q[i] for i in subset] + [q0]
            rs = [cr] + [small_r[i] for i in subset] + [2 * r0]
            assert sum(a * q for a, q in zip(coeffs, qs)) == 0
            assert w.b0 == sum(a * r for a, r in zip(coeffs, rs))
            if w.y & 1:
                assert w.b0 & 1 == tr.m
            checked += 1
    assert checked > 0


def test_attack_verdicts_match_ground_truth(toy_key):
    params = toy_params()
    kp = toy_key
    rng = random.Random(5)
    conclusive = 0
    for _ in range(4):
        tr = encrypt_traced(kp.pk_x, params, rng.getrandbits(1), rng)
        v = attack(kp.pk_x, params, tr.value, AttackConfig(), rng, p=kp.sk_p)
        if v.conclusive:
            conclusive += 1
            assert v.decision == decrypt(kp.sk_p, tr.value) == tr.m
            if v.method == "first-vector-parity":
                assert v.witness.y & 1
                assert max(abs(x) for x in [v.witness.b0, v.witness.y, *v.witness.ys, v.witness.y0]) < v.threshold
    assert conclusive >= 1


def test_attack_with_no_retries_is_inconclusive(toy_key):
    v = attack(toy_key.pk_x, toy_params(), 1, AttackConfig(max_subset_retries=0),
               random.Random(0), p=toy_key.sk_p)
    assert v.decision is None and v.retries == 0
    assert v.to_dict()["decision"] == "inconclusive"


def test_attack_pinned_subsets(toy_key):
    params = toy_params()
    subset = list(range(1, 28))
    v = attack(toy_key.pk_x, params, 0, AttackConfig(max_subset_retries=1), random.Random(0),
               p=toy_key.sk_p, subsets=[subset])
    assert v.subset_used == subset


def test_config_validation():
    params = toy_params()
    with pytest.raises(ValueError):
        AttackConfig(subset_size=300).validate(params)
    with pytest.raises(ValueError):
        AttackConfig(candidate_scan_depth=0).validate(params)
    with pytest.raises(ValueError):
        AttackConfig(threshold_mode="psychic").validate(params)


def test_l_and_l1_agree_on_same_subset(toy_key):
    params = toy_params()
    kp = toy_key
    rng = random.Random(8)
    threshold = acceptance_threshold(params, "known-p", kp.sk_p)
    both = 0
    for _ in range(3):
        tr = encrypt_traced(kp.pk_x, params, rng.getrandbits(1), rng)
        subset = sorted(rng.sample(range(1, params.tau + 1), params.subset_size))
        l1 = lll_reduce(build_attack_lattice(kp.pk_x, tr.value, subset, "L1"))
        basis_l = build_attack_lattice(kp.pk_x, tr.value, subset, "L")
        out_l = lll_reduce(basis_l)
        c1 = scan_candidates(l1, threshold, 5)
        cp = decide_column_parity(out_l, basis_l, threshold)
        if c1 and cp.decision is not None:
            both += 1
            assert decide_first_vector(c1[0]) == cp.decision == tr.m
    assert both >= 1


def test_verdict_serialization_uses_decimal_strings():
    v = AttackVerdict(1, "first-vector-parity", 77672, Witness(-3, 1, [2, -1], 0), [1, 2])
    d = v.to_dict()
    assert d["witness"] == {"b0": "-3", "y": "1", "ys": ["2", "-1"], "y0": "0"}
    assert d["threshold"] == "77672"


# --- DIE ---

def test_die_checks():
    inst = DieInstance([1000, 999, 1001], rho=0, p=10**6)
    assert inst.bound_y == Fraction(10**6, 16)
    assert not check_die_solution(inst, [0, 0, 0])
    assert check_die_solution(inst, [1, -1, 0])
    assert not check_die_solution(DieInstance([5, 2 * 10**5], 0, p=10**6), [0, 1])
    with pytest.raises(ValueError):
        check_die_solution(inst, [1])


def test_die_from_successful_witness(toy_key):
    params = toy_params()
    kp = toy_key
    rng = random.Random(5)
    for _ in range(5):
        tr = encrypt_traced(kp.pk_x, params, rng.getrandbits(1), rng)
        v = attack(kp.pk_x, params, tr.value, AttackConfig(), rng, p=kp.sk_p)
        if v.method == "first-vector-parity":
            inst = die_instance_from_attack(kp.pk_x, tr.value, v.subset_used, params.rho, p=kp.sk_p)
            assert check_die_solution(inst, die_coefficients(v.witness))
            return
    pytest.fail("no first-vector success to check")


# --- pigeonhole / feasibility ---

def test_pigeonhole_bounds():
    b3 = pigeonhole_log_bound(3)
    assert (b3.coeff_log2, b3.count_log2, b3.holds) == (9, 261, True)
    b100 = pigeonhole_log_bound(100)
    assert b100.coeff_log2 == 10**4 and b100.count_log2 == 10**4 * (10**6 + 2) and b100.holds
    b1 = pigeonhole_log_bound(1)
    assert b1.degenerate and not b1.holds


def lam100(eta_factor):
    lam = 100
    return Params(lam=lam, rho=lam, eta=eta_factor * lam**2, gamma=lam**5, tau=lam**5 + lam, subset_size=lam**3)


def test_feasibility_at_lambda_100():
    rep = feasibility_estimate(lam100(5))
    ghkn = rep["block_ghkn"]
    assert ghkn["predicted_log2"] / 100**2 == pytest.approx(4.66, rel=0.02)
    assert ghkn["feasible"]
    assert rep["lll_average"]["feasible"]
    assert 1.02 ** 100 == pytest.approx(7.24, rel=0.02)


def test_feasibility_lll_at_eta_4lambda_sq():
    rep = feasibility_estimate(lam100(4))
    assert rep["lll_average"]["predicted_log2"] < 4 * 100**2


def test_feasibility_larger_gamma_is_less_feasible():
    base = feasibility_estimate(toy_params())
    big = feasibility_estimate(toy_params().with_overrides(gamma=729))
    margin = lambda r: r["threshold_log2"] - r["lll_average"]["predicted_log2"]
    assert margin(big) < margin(base)
    assert math.isfinite(margin(big))

