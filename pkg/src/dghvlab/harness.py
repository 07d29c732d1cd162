"""Batch experiments over the attack and the two schemes.

Every random choice is drawn from a generator seeded by ``(seed, indices...)``
so a trial can be replayed on its own and parallel execution cannot change
any result.
"""

from __future__ import annotations

import csv
import io
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Literal, Sequence

from . import __version__
from .attack import (
    AttackConfig,
    ParamsTooSmall,
    acceptance_threshold,
    attack,
    build_attack_lattice,
    decide_column_parity,
    feasibility_estimate,
    scan_candidates,
)
from .dghv import Params, toy_params, decrypt, encrypt, eval_add, eval_mul, keygen, noise_of, fresh_noise_bound
from .intmath import matmul
from .lattice import lll_reduce, unimodular_det
from .matshe import (
    BudgetExceeded,
    mat_add,
    mat_decrypt,
    mat_encrypt,
    mat_keygen,
    mat_mul,
    mat_noise_of,
    right_system_holds,
    within_budget,
)
from .serialize import SCHEMA_VERSION

Mode = Literal["attack-campaign", "gamma-sweep", "toy-repro", "estimate", "scheme-selftest"]
TIMING_KEYS = {"wall_ms", "timings_ms", "elapsed_s"}


class SoundnessFailure(RuntimeError):
    """A known-p verdict contradicted the ground truth."""


def derive_rng(seed: int | str, *idx: Any) -> random.Random:
    # String seeds go through SHA-512 in CPython, so this is stable across runs and platforms.
    return random.Random(":".join(str(v) for v in (seed, *idx)))


@dataclass
class ExperimentSpec:
    params: Params
    seed: int
    mode: Mode = "attack-campaign"
    instances: int = 20
    ciphertexts_per_instance: int = 5
    config: AttackConfig = field(default_factory=AttackConfig)
    threshold_modes: tuple[str, ...] = ("known-p", "eta-floor")
    gammas: tuple[int, ...] = ()
    workers: int = 1

    def validate(self) -> None:
        if self.instances < 1 or self.ciphertexts_per_instance < 1:
            raise ValueError("instance and ciphertext counts must be >= 1")
        if self.seed is None:
            raise ValueError("a seed is mandatory")
        self.config.validate(self.params)

    def echo(self) -> dict:
        return {
            "mode": self.mode,
            "params": self.params.to_dict(),
            "seed": self.seed,
            "instances": self.instances,
            "ciphertexts_per_instance": self.ciphertexts_per_instance,
            "threshold_modes": list(self.threshold_modes),
            "attack": {
                "subset_size": self.config.resolved_subset_size(self.params),
                "max_subset_retries": self.config.max_subset_retries,
                "candidate_scan_depth": self.config.candidate_scan_depth,
                "delta": str(self.config.delta),
            },
            "gammas": list(self.gammas),
        }


def _run_instance(params: Params, config: AttackConfig, seed: int, i: int, cts: int,
                  modes: Sequence[str]) -> list[dict]:
    kp = keygen(params, derive_rng(seed, "key", i), instrumented=True)
    out = []
    for j in range(cts):
        enc_rng = derive_rng(seed, "enc", i, j)
        bit = enc_rng.getrandbits(1)
        c = encrypt(kp.pk_x, params, bit, enc_rng)
        for mode in modes:
            rec: dict[str, Any] = {"instance": i, "ciphertext": j, "mode": mode,
                                   "instance_seed": f"{seed}:key:{i}", "true_bit": bit}
            start = time.perf_counter()
            try:
                v = attack(kp.pk_x, params, c, replace(config, threshold_mode=mode),
                           derive_rng(seed, "attack", i, j, mode), p=kp.sk_p)
            except ParamsTooSmall as exc:
                rec.update(verdict="inconclusive", outcome="inconclusive", method=None, retries=0,
                           threshold=None, error=str(exc))
            else:
                if v.decision is None:
                    outcome = "inconclusive"
                else:
                    outcome = "success" if v.decision == bit else "failure"
                rec.update(verdict="inconclusive" if v.decision is None else v.decision, outcome=outcome,
                           method=v.method, retries=v.retries, threshold=str(v.threshold), error=None)
            rec["wall_ms"] = round((time.perf_counter() - start) * 1000, 3)
            out.append(rec)
    return out


def _aggregate(records: Iterable[dict], modes: Sequence[str]) -> dict:
    agg = {}
    for mode in modes:
        rs = [r for r in records if r["mode"] == mode]
        n = len(rs)
        s = sum(r["outcome"] == "success" for r in rs)
        f = sum(r["outcome"] == "failure" for r in rs)
        inc = sum(r["outcome"] == "inconclusive" for r in rs)
        agg[mode] = {
            "trials": n,
            "success": s,
            "failure": f,
            "inconclusive": inc,
            "success_rate": s / n if n else 0.0,
            "conclusive_rate": (s + f) / n if n else 0.0,
            "inconclusive_rate": inc / n if n else 0.0,
            "soundness_failures": f if mode == "known-p" else 0,
            "by_method": {m: sum(r["method"] == m for r in rs) for m in ("first-vector-parity", "column-parity")},
        }
    return agg


def run_attack_campaign(spec: ExperimentSpec) -> dict:
    spec.validate()
    started = time.perf_counter()
    args = [(spec.params, spec.config, spec.seed, i, spec.ciphertexts_per_instance, spec.threshold_modes)
            for i in range(spec.instances)]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            chunks = list(pool.map(_run_instance, *zip(*args)))
    else:
        chunks = [_run_instance(*a) for a in args]
    records = [r for chunk in chunks for r in chunk]
    aggregates = _aggregate(records, spec.threshold_modes)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "campaign-report",
        "library_version": __version__,
        "config": spec.echo(),
        "aggregates": aggregates,
        "soundness_failures": sum(a["soundness_failures"] for a in aggregates.values()),
        "trials": records,
        "elapsed_s": round(time.perf_counter() - started, 3),
    }


def run_gamma_sweep(spec: ExperimentSpec) -> dict:
    lam = spec.params.lam
    gammas = spec.gammas or (lam**5, lam**6)
    rows = []
    for g in gammas:
        params = Params.from_lambda(lam, rho=spec.params.rho, eta=spec.params.eta, gamma=g,
                                    subset_size=spec.params.subset_size)
        report = run_attack_campaign(replace(spec, params=params, mode="attack-campaign"))
        rows.append({
            "gamma": g,
            "params": params.to_dict(),
            "aggregates": report["aggregates"],
            "estimate": feasibility_estimate(params),
            "trials": report["trials"],
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep-report",
        "library_version": __version__,
        "config": replace(spec, mode="gamma-sweep", gammas=tuple(gammas)).echo(),
        "sweep": rows,
        "soundness_failures": sum(a["soundness_failures"] for r in rows for a in r["aggregates"].values()),
    }


def strip_timing(obj: Any) -> Any:
    """Copy of a report with wall-clock fields removed (the determinism contract ignores them)."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


CSV_FIELDS = ["gamma", "instance", "ciphertext", "mode", "instance_seed", "true_bit", "verdict",
              "outcome", "method", "retries", "threshold", "wall_ms", "error"]


def report_to_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    if report.get("kind") == "sweep-report":
        for row in report["sweep"]:
            for t in row["trials"]:
                w.writerow({"gamma": row["gamma"], **t})
    else:
        gamma = report["config"]["params"]["gamma"]
        for t in report["trials"]:
            w.writerow({"gamma": gamma, **t})
    return buf.getvalue()


def format_matrix(rows: Sequence[Sequence[int]], width: int = 96) -> str:
    """Render like a numpy integer array print-out, wrapping long rows."""
    lines = []
    for r_idx, row in enumerate(rows):
        prefix = "[[" if r_idx == 0 else " ["
        cur = prefix
        first = True
        for v in row:
            tok = str(v) if first else " " + str(v)
            if len(cur) + len(tok) > width and not first:
                lines.append(cur)
                cur = "  " + str(v)
            else:
                cur += tok
            first = False
        cur += "]]" if r_idx == len(rows) - 1 else "]"
        lines.append(cur)
    return "\n".join(lines)


@dataclass
class ToyResult:
    transcript: str
    verdict: int | None
    true_bit: int
    identity_ok: bool
    unimodular: bool
    reduced_rows: int


def run_toy_repro(seed: int = 2011, bit: int | None = None, config: AttackConfig | None = None) -> ToyResult:
    """Attack one toy-regime ciphertext end to end and render the reduction as text."""
    params = toy_params()
    config = config or AttackConfig()
    kp = keygen(params, derive_rng(seed, "toy-key"), instrumented=True)
    rng = derive_rng(seed, "toy-enc")
    m = rng.getrandbits(1) if bit is None else bit
    c = encrypt(kp.pk_x, params, m, rng)
    t = config.resolved_subset_size(params)
    threshold = acceptance_threshold(params, "known-p", kp.sk_p, t)
    sub_rng = derive_rng(seed, "toy-subset")
    out = io.StringIO()
    w = out.write
    w(f"lambda = {params.lam}, rho = {params.rho}, eta = {params.eta}, gamma = {params.gamma}, tau = {params.tau}\n")
    w(f"secret key p = {kp.sk_p}\n")
    w(f"public key x0 = {kp.x0}\n")
    w(f"public key holds {len(kp.pk_x)} integers; x1..x3 = {kp.pk_x[1:4]}\n")
    w(f"ciphertext c = {c}\n")
    w(f"acceptance threshold (known p) = {threshold}\n")
    verdict = None
    identity_ok = unimodular = True
    n_rows = 0
    for attempt in range(max(1, config.max_subset_retries)):
        subset = sorted(sub_rng.sample(range(1, params.tau + 1), t))
        basis = build_attack_lattice(kp.pk_x, c, subset, "L1")
        outcome = lll_reduce(basis, config.delta)
        n_rows = outcome.reduced.n
        identity_ok = matmul(outcome.transform, basis.rows) == outcome.reduced.rows
        unimodular = abs(unimodular_det(outcome.transform)) == 1
        w(f"\n-- attempt {attempt + 1}: subset T = {subset}\n")
        w("B =\n" + format_matrix(outcome.reduced.rows) + "\n")
        w("U =\n" + format_matrix(outcome.transform) + "\n")
        w(f"U * C == B: {identity_ok}; |det U| == 1: {unimodular}\n")
        cp = decide_column_parity(outcome, basis, threshold)
        shown_b = [p for p, q in zip(cp.b_parity, cp.qualifying) if q]
        shown_u = [p for p, q in zip(cp.u_parity, cp.qualifying) if q]
        excluded = [i for i, q in enumerate(cp.qualifying) if not q]
        w("parity of first column of B: [" + " ".join(map(str, shown_b)) + "]\n")
        w("parity of first column of U: [" + " ".join(map(str, shown_u)) + "]\n")
        w(f"rows excluded as too large: {excluded}\n")
        cands = scan_candidates(outcome, threshold, config.candidate_scan_depth)
        if cands:
            verdict = cands[0].b0 & 1
            w(f"first-vector rule: b0 = {cands[0].b0}, y = {cands[0].y} -> plaintext {verdict}\n")
        if cp.decision is not None:
            w(f"column-parity rule -> plaintext {cp.decision}\n")
            if verdict is None:
                verdict = cp.decision
            elif verdict != cp.decision:
                w("the two rules disagree\n")
        if verdict is not None:
            break
    truth = decrypt(kp.sk_p, c)
    w(f"\nrecovered plaintext: {'inconclusive' if verdict is None else verdict}\n")
    w(f"true plaintext (decrypted with p): {truth}\n")
    if verdict is not None and verdict != truth:
        raise SoundnessFailure(f"toy attack recovered {verdict}, truth {truth}")
    if not (identity_ok and unimodular):
        raise SoundnessFailure("reduction transform broke U*C = B")
    return ToyResult(out.getvalue(), verdict, truth, identity_ok, unimodular, n_rows)


def run_estimate(params: Params) -> dict:
    return feasibility_estimate(params)


def format_estimate(report: dict) -> str:
    lam2 = report["params"]["lambda"] ** 2
    lines = [f"params: {report['params']}", f"lattice dimension t+2 = {report['dimension']}",
             f"log2 lambda1 (pigeonhole) = {report['lambda1_log2']:.2f}",
             f"log2 acceptance threshold (eta floor) = {report['threshold_log2']:.2f}"]
    la = report["lll_average"]
    lines.append(f"LLL average: log2 ratio = {la['ratio_log2']:.2f} ({la['ratio_log2'] / lam2:.3f} lambda^2), "
                 f"predicted log2 |b1| = {la['predicted_log2']:.2f} -> {'feasible' if la['feasible'] else 'infeasible'}")
    blk = report["block_ghkn"]
    if blk:
        lines.append(f"block k={blk['k']} on n={blk['n']}: log2 beta term = {blk['beta_log2']:.2f} "
                     f"({blk['beta_log2'] / lam2:.3f} lambda^2), total log2 ratio = {blk['ratio_log2']:.2f}, "
                     f"predicted log2 |b1| = {blk['predicted_log2']:.2f} ({blk['predicted_log2'] / lam2:.3f} lambda^2) "
                     f"-> {'feasible' if blk['feasible'] else 'infeasible'}")
    return "\n".join(lines) + "\n"


def run_scheme_selftest(lam: int, scheme: Literal["dghv", "matshe"], seed: int = 0, trials: int = 200) -> dict:
    checks: dict[str, list[int]] = {}

    def record(name: str, ok: bool) -> None:
        counts = checks.setdefault(name, [0, 0])
        counts[0 if ok else 1] += 1

    if scheme == "dghv":
        params = Params.from_lambda(lam)
        kp = keygen(params, derive_rng(seed, "selftest-key"), instrumented=True)
        rng = derive_rng(seed, "selftest")
        bound = fresh_noise_bound(params)
        for _ in range(trials):
            m1, m2 = rng.getrandbits(1), rng.getrandbits(1)
            c1 = encrypt(kp.pk_x, params, m1, rng)
            c2 = encrypt(kp.pk_x, params, m2, rng)
            record("round-trip", decrypt(kp.sk_p, c1) == m1)
            record("fresh-noise-bound", abs(noise_of(kp.sk_p, c1)) <= bound)
            n1, n2 = noise_of(kp.sk_p, c1), noise_of(kp.sk_p, c2)
            if 2 * abs(n1 + n2) < kp.sk_p:
                record("add", decrypt(kp.sk_p, eval_add(c1, c2, kp.x0)) == m1 ^ m2)
            if 2 * abs(n1 * n2) < kp.sk_p:
                record("mul-integer", decrypt(kp.sk_p, c1 * c2) == m1 & m2)
            # Reducing mod x0 adds 2*k*r0, which only the instrumented noise reveals.
            prod = eval_mul(c1, c2, kp.x0)
            expected = n1 * n2 - 2 * ((c1 * c2 - prod) // kp.x0) * kp.true_noise[0]
            if 2 * abs(expected) < kp.sk_p:
                record("mul", decrypt(kp.sk_p, prod) == m1 & m2)
    elif scheme == "matshe":
        rng = derive_rng(seed, "selftest")
        for variant in ("random-T", "gaussian"):
            sk = mat_keygen(lam, variant, derive_rng(seed, "selftest-key", variant), instrumented=True)
            record(f"{variant}:key-identity", matmul(sk.A, sk.T) == [[sk.secret_modulus, 0], [0, sk.secret_modulus]])
            for i in range(len(sk.public_B)):
                record(f"{variant}:public-relation", right_system_holds(sk, i))
            for _ in range(trials):
                m1, m2 = rng.getrandbits(1), rng.getrandbits(1)
                c1 = mat_encrypt(sk.public_B, sk.modulus, lam, m1, rng)
                c2 = mat_encrypt(sk.public_B, sk.modulus, lam, m2, rng)
                record(f"{variant}:round-trip", mat_decrypt(sk, c1) == m1)
                s1, s2 = mat_noise_of(sk, c1), mat_noise_of(sk, c2)
                if within_budget(sk, s1 + s2):
                    record(f"{variant}:add", mat_noise_of(sk, mat_add(c1, c2, sk.modulus)) == s1 + s2)
                if within_budget(sk, s1 * s2):
                    try:
                        ok = mat_noise_of(sk, mat_mul(c1, c2, sk.modulus)) == s1 * s2
                    except BudgetExceeded:
                        ok = False
                    record(f"{variant}:mul", ok)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    total_fail = sum(f for _, f in checks.values())
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "selftest-report",
        "scheme": scheme,
        "lambda": lam,
        "seed": seed,
        "checks": {k: {"passed": p, "failed": f} for k, (p, f) in checks.items()},
        "failures": total_fail,
    }
