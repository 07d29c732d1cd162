"""Versioned JSON records read and written by the CLI."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .dghv import DghvKeyPair, Params
from .matshe import MatSheKeyPair

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    pass


def enc_int(v: int) -> str:
    return str(v)


def dec_int(v: Any) -> int:
    """Accept ints, decimal strings and lowercase-hex strings (``0x...`` / ``-0x...``)."""
    if isinstance(v, bool):
        raise SchemaError(f"not an integer: {v!r}")
    if isinstance(v, int):
        return v
    if not isinstance(v, str):
        raise SchemaError(f"not an integer: {v!r}")
    s = v.strip()
    neg = s.startswith("-")
    body = s[1:] if neg else s
    try:
        n = int(body[2:], 16) if body.startswith("0x") else int(body, 10)
    except ValueError as exc:
        raise SchemaError(f"not an integer: {v!r}") from exc
    return -n if neg else n


def _check(d: dict, kind: str) -> dict:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {d.get('schema_version')!r}")
    if d.get("kind") != kind:
        raise SchemaError(f"expected a {kind!r} record, got {d.get('kind')!r}")
    return d


def instance_to_dict(kp: DghvKeyPair, seed: int | str | None, include_secret: bool = True) -> dict:
    d: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "kind": "dghv-instance",
        "params": kp.params.to_dict(),
        "x": [enc_int(v) for v in kp.pk_x],
        "seed": seed,
    }
    if include_secret:
        d["p"] = enc_int(kp.sk_p)
    return d


def instance_from_dict(d: dict) -> DghvKeyPair:
    _check(d, "dghv-instance")
    params = Params.from_dict(d["params"])
    xs = [dec_int(v) for v in d["x"]]
    if len(xs) != params.tau + 1:
        raise SchemaError(f"expected {params.tau + 1} public integers, got {len(xs)}")
    p = dec_int(d["p"]) if d.get("p") is not None else 0
    return DghvKeyPair(params, p, xs)


def ciphertext_to_dict(c: int, bit: int | None = None) -> dict:
    d: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "kind": "dghv-ciphertext", "value": enc_int(c)}
    if bit is not None:
        d["plaintext"] = bit
    return d


def ciphertext_from_dict(d: dict) -> int:
    return dec_int(_check(d, "dghv-ciphertext")["value"])


def mat_to_json(m: list[list[int]]) -> list[list[str]]:
    return [[enc_int(v) for v in row] for row in m]


def mat_from_json(m: list[list[Any]]) -> list[list[int]]:
    if len(m) != 2 or any(len(r) != 2 for r in m):
        raise SchemaError("expected a 2x2 matrix")
    return [[dec_int(v) for v in row] for row in m]


def matkey_to_dict(sk: MatSheKeyPair, include_secret: bool = True) -> dict:
    d: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "kind": "matshe-key",
        "variant": sk.variant,
        "lambda": sk.lam,
        "modulus": enc_int(sk.modulus),
        "B": [mat_to_json(b) for b in sk.public_B],
    }
    if include_secret:
        d["secret"] = {"T": mat_to_json(sk.T), "A": mat_to_json(sk.A), "det": enc_int(sk.secret_modulus)}
        if sk.factor_q is not None:
            d["secret"]["q"] = enc_int(sk.factor_q)
    return d


def matkey_from_dict(d: dict) -> MatSheKeyPair:
    _check(d, "matshe-key")
    sec = d.get("secret") or {}
    t = mat_from_json(sec["T"]) if "T" in sec else [[0, 0], [0, 0]]
    a = mat_from_json(sec["A"]) if "A" in sec else [[0, 0], [0, 0]]
    q = dec_int(sec["q"]) if "q" in sec else None
    det = dec_int(sec["det"]) if "det" in sec else 0
    return MatSheKeyPair(d["lambda"], d["variant"], t, a, det, dec_int(d["modulus"]),
                         [mat_from_json(b) for b in d["B"]], None, q)


def matct_to_dict(c: list[list[int]], modulus: int) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "matshe-ciphertext", "modulus": enc_int(modulus), "C": mat_to_json(c)}


def matct_from_dict(d: dict) -> list[list[int]]:
    return mat_from_json(_check(d, "matshe-ciphertext")["C"])


def read_json(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_json(obj: dict, path: str | Path | None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
