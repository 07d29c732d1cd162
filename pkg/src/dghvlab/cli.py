"""Command-line entry point: ``dghvlab <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 soundness failure detected.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .attack import THRESHOLD_MODES, AttackConfig, attack
from .dghv import Params, ParamsError, toy_params, decrypt, encrypt, keygen
from .harness import (
    ExperimentSpec,
    SoundnessFailure,
    derive_rng,
    format_estimate,
    report_to_csv,
    run_attack_campaign,
    run_estimate,
    run_gamma_sweep,
    run_scheme_selftest,
    run_toy_repro,
)
from .matshe import mat_add, mat_decrypt, mat_encrypt, mat_keygen, mat_mul
from .serialize import (
    SchemaError,
    ciphertext_from_dict,
    ciphertext_to_dict,
    dec_int,
    instance_from_dict,
    instance_to_dict,
    matct_from_dict,
    matct_to_dict,
    matkey_from_dict,
    matkey_to_dict,
    read_json,
    write_json,
)

log = logging.getLogger("dghvlab")

EXIT_OK, EXIT_USAGE, EXIT_SOUNDNESS = 0, 1, 2
MODE_ALIASES = {"knownp": "known-p", "eta": "eta-floor", "known-p": "known-p", "eta-floor": "eta-floor"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2, which is reserved for soundness failures
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("parameters")
    g.add_argument("--lambda", dest="lam", type=int, default=3)
    g.add_argument("--rho", type=int)
    g.add_argument("--eta", type=int)
    g.add_argument("--gamma", type=int)
    g.add_argument("--tau", type=int)
    g.add_argument("--subset-size", type=int)
    g.add_argument("--toy-regime", action="store_true", help="use the lambda=3, eta=27, gamma=243, tau=246 toy regime")
    a = p.add_argument_group("attack")
    a.add_argument("--delta", default="3/4", help="Lovasz parameter as a fraction, e.g. 3/4 or 0.99")
    a.add_argument("--retries", type=int, default=5)
    a.add_argument("--depth", type=int, default=5)
    a.add_argument("--threshold-mode", choices=sorted(MODE_ALIASES), default="knownp")
    o = p.add_argument_group("run")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--trials", type=int, default=5, help="ciphertexts per instance")
    o.add_argument("--instances", type=int, default=20)
    o.add_argument("--workers", type=int, default=1)
    o.add_argument("--out", type=Path)
    o.add_argument("--format", choices=("json", "csv"), default="json")


def _params(ns: argparse.Namespace) -> Params:
    if ns.toy_regime:
        base = toy_params()
        return base.with_overrides(rho=ns.rho, eta=ns.eta, gamma=ns.gamma, tau=ns.tau, subset_size=ns.subset_size)
    return Params.from_lambda(ns.lam, rho=ns.rho, eta=ns.eta, gamma=ns.gamma, tau=ns.tau,
                              subset_size=ns.subset_size)


def _config(ns: argparse.Namespace) -> AttackConfig:
    try:
        delta = Fraction(ns.delta)
    except ValueError as exc:
        raise UsageError(f"bad --delta {ns.delta!r}") from exc
    return AttackConfig(subset_size=ns.subset_size, max_subset_retries=ns.retries, candidate_scan_depth=ns.depth,
                        threshold_mode=MODE_ALIASES[ns.threshold_mode], delta=delta)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _emit_report(report: dict, ns: argparse.Namespace) -> int:
    _emit(report_to_csv(report) if ns.format == "csv" else json.dumps(report, indent=2) + "\n", ns.out)
    if report.get("soundness_failures"):
        log.error("soundness failure: %d known-p verdicts contradicted ground truth", report["soundness_failures"])
        return EXIT_SOUNDNESS
    return EXIT_OK


def _read_ct(arg: str) -> int:
    path = Path(arg)
    if path.exists():
        return ciphertext_from_dict(read_json(path))
    return dec_int(arg)


def cmd_keygen(ns):
    params = _params(ns)
    kp = keygen(params, derive_rng(ns.seed, "cli-key"), instrumented=True)
    _emit(write_json(instance_to_dict(kp, ns.seed, include_secret=not ns.public_only), None), ns.out)
    return EXIT_OK


def cmd_encrypt(ns):
    kp = instance_from_dict(read_json(ns.key))
    c = encrypt(kp.pk_x, kp.params, ns.bit, derive_rng(ns.seed, "cli-enc"))
    _emit(write_json(ciphertext_to_dict(c), None), ns.out)
    return EXIT_OK


def cmd_decrypt(ns):
    kp = instance_from_dict(read_json(ns.key))
    if not kp.sk_p:
        raise UsageError("key file carries no secret p")
    _emit(f"{decrypt(kp.sk_p, _read_ct(ns.ciphertext))}\n", ns.out)
    return EXIT_OK


def cmd_attack(ns):
    kp = instance_from_dict(read_json(ns.key))
    config = _config(ns)
    if config.threshold_mode == "known-p" and not kp.sk_p:
        raise UsageError("known-p threshold needs p in the key file; use --threshold-mode eta")
    c = _read_ct(ns.ciphertext)
    v = attack(kp.pk_x, kp.params, c, config, derive_rng(ns.seed, "cli-attack"), p=kp.sk_p or None)
    rec = {"schema_version": 1, "kind": "attack-verdict", **v.to_dict()}
    _emit(json.dumps(rec, indent=2) + "\n", ns.out)
    if kp.sk_p and config.threshold_mode == "known-p" and v.decision is not None and v.decision != decrypt(kp.sk_p, c):
        return EXIT_SOUNDNESS
    return EXIT_OK


def _spec(ns, mode: str, gammas=()) -> ExperimentSpec:
    params = _params(ns)
    modes = tuple(MODE_ALIASES[m] for m in ns.modes) if getattr(ns, "modes", None) else THRESHOLD_MODES
    return ExperimentSpec(params, ns.seed, mode, ns.instances, ns.trials, _config(ns), modes, tuple(gammas), ns.workers)


def cmd_campaign(ns):
    return _emit_report(run_attack_campaign(_spec(ns, "attack-campaign")), ns)


def cmd_sweep(ns):
    return _emit_report(run_gamma_sweep(_spec(ns, "gamma-sweep", ns.gammas or ())), ns)


def cmd_toy(ns):
    try:
        res = run_toy_repro(ns.seed, ns.bit)
    except SoundnessFailure as exc:
        log.error("%s", exc)
        return EXIT_SOUNDNESS
    _emit(res.transcript, ns.out)
    return EXIT_OK


def cmd_estimate(ns):
    report = run_estimate(_params(ns))
    _emit(json.dumps(report, indent=2) + "\n" if ns.format == "json" and ns.json else format_estimate(report), ns.out)
    return EXIT_OK


def cmd_selftest(ns):
    report = run_scheme_selftest(ns.lam, ns.scheme, ns.seed, ns.selftest_trials)
    _emit(json.dumps(report, indent=2) + "\n", ns.out)
    return EXIT_OK if report["failures"] == 0 else EXIT_SOUNDNESS


def cmd_matshe(ns):
    if ns.op == "keygen":
        sk = mat_keygen(ns.lam, ns.variant, derive_rng(ns.seed, "cli-matkey"))
        _emit(write_json(matkey_to_dict(sk), None), ns.out)
        return EXIT_OK
    sk = matkey_from_dict(read_json(ns.key))
    if ns.op == "enc":
        c = mat_encrypt(sk.public_B, sk.modulus, sk.lam, ns.bit, derive_rng(ns.seed, "cli-matenc"))
        _emit(write_json(matct_to_dict(c, sk.modulus), None), ns.out)
    elif ns.op in ("add", "mul"):
        if len(ns.ciphertexts) != 2:
            raise UsageError(f"matshe {ns.op} takes two ciphertext files")
        c1, c2 = (matct_from_dict(read_json(p)) for p in ns.ciphertexts)
        c = (mat_add if ns.op == "add" else mat_mul)(c1, c2, sk.modulus)
        _emit(write_json(matct_to_dict(c, sk.modulus), None), ns.out)
    elif ns.op == "dec":
        if not sk.secret_modulus:
            raise UsageError("key file carries no secret")
        _emit(f"{mat_decrypt(sk, matct_from_dict(read_json(ns.ciphertexts[0])))}\n", ns.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dghvlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("keygen", help="generate an instrumented DGHV instance")
    _common(p)
    p.add_argument("--public-only", action="store_true", help="omit the secret p from the record")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encrypt", help="encrypt one bit under an instance's public key")
    _common(p)
    p.add_argument("--key", type=Path, required=True)
    p.add_argument("--bit", type=int, choices=(0, 1), required=True)
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt with the instance's secret p")
    _common(p)
    p.add_argument("--key", type=Path, required=True)
    p.add_argument("--ciphertext", required=True, help="ciphertext file or integer")
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("attack", help="recover the plaintext bit from public data")
    _common(p)
    p.add_argument("--key", type=Path, required=True)
    p.add_argument("--ciphertext", required=True, help="ciphertext file or integer")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("campaign", help="attack many instrumented instances and measure success")
    _common(p)
    p.add_argument("--modes", nargs="+", choices=sorted(MODE_ALIASES))
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("sweep", help="repeat the campaign across gamma values")
    _common(p)
    p.add_argument("--gammas", type=int, nargs="+")
    p.add_argument("--modes", nargs="+", choices=sorted(MODE_ALIASES))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("toy", help="attack one toy-regime ciphertext and print B and U with their parity columns")
    _common(p)
    p.add_argument("--bit", type=int, choices=(0, 1))
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("estimate", help="feasibility estimate from the reduction bounds")
    _common(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("selftest", help="round-trip and homomorphism checks")
    _common(p)
    p.add_argument("--scheme", choices=("dghv", "matshe"), default="dghv")
    p.add_argument("--selftest-trials", type=int, default=200)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("matshe", help="matrix-key scheme operations")
    p.add_argument("op", choices=("keygen", "enc", "add", "mul", "dec"))
    _common(p)
    p.add_argument("--variant", choices=("random-T", "gaussian"), default="random-T")
    p.add_argument("--key", type=Path)
    p.add_argument("--bit", type=int, choices=(0, 1), default=0)
    p.add_argument("ciphertexts", nargs="*", type=Path)
    p.set_defaults(func=cmd_matshe)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns, extra = parser.parse_known_args(argv)
    # argparse binds an empty "ciphertexts" list next to "op", so file names placed after options land here.
    if extra and ns.command == "matshe" and not any(e.startswith("-") for e in extra):
        ns.ciphertexts += [Path(e) for e in extra]
    elif extra:
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if ns.command == "matshe" and ns.op != "keygen" and ns.key is None:
            raise UsageError("--key is required")
        return ns.func(ns)
    except (UsageError, ParamsError, SchemaError, ValueError, FileNotFoundError) as exc:
        print(f"dghvlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
