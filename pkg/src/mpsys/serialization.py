"""On-disk JSON formats for systems, germs, subspaces, and factor chains.

Complex entries are serialized as [re, im] pairs of decimal floats, which
round-trip bit-exactly for finite doubles.  Every file carries
schema_version "1" and a ``kind`` discriminator.
"""

from __future__ import annotations

import json

import numpy as np

from .factorization import LinearFactorChain
from .subspaces import Subspace
from .systems import MultiSystem, PolyGerm, validate

SCHEMA_VERSION = "1"


class FileFormatError(ValueError):
    """Raised on malformed or mismatched input files."""


def matrix_to_json(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def matrix_from_json(rows, shape=None) -> np.ndarray:
    try:
        m = np.array([[complex(re, im) for re, im in row] for row in rows],
                     dtype=complex)
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"malformed matrix entry: {exc}") from exc
    if m.ndim == 1:  # empty matrix serialized as []
        m = m.reshape(0, 0)
    if shape is not None:
        m = m.reshape(shape)
    return m


def _header(payload: dict, kind: str) -> None:
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise FileFormatError(
            f"unsupported schema_version {payload.get('schema_version')!r}"
        )
    if payload.get("kind") != kind:
        raise FileFormatError(
            f"expected kind {kind!r}, found {payload.get('kind')!r}"
        )


def system_to_dict(s: MultiSystem) -> dict:
    validate(s)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "system",
        "n_params": s.n_params,
        "dim_x": s.dim_x,
        "dim_u": s.dim_u,
        "dim_y": s.dim_y,
        "a": [matrix_to_json(m) for m in s.a],
        "b": [matrix_to_json(m) for m in s.b],
        "c": [matrix_to_json(m) for m in s.c],
        "d": [matrix_to_json(m) for m in s.d],
    }


def system_from_dict(payload: dict) -> MultiSystem:
    _header(payload, "system")
    try:
        dx, du, dy = payload["dim_x"], payload["dim_u"], payload["dim_y"]
        s = MultiSystem(
            a=[matrix_from_json(m, (dx, dx)) for m in payload["a"]],
            b=[matrix_from_json(m, (dx, du)) for m in payload["b"]],
            c=[matrix_from_json(m, (dy, dx)) for m in payload["c"]],
            d=[matrix_from_json(m, (dy, du)) for m in payload["d"]],
        )
    except KeyError as exc:
        raise FileFormatError(f"missing field {exc}") from exc
    validate(s)
    if s.n_params != payload["n_params"]:
        raise FileFormatError("n_params does not match the block lists")
    return s


def germ_to_dict(g: PolyGerm) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "germ",
        "n_params": g.n_params,
        "dim_u": g.dim_u,
        "dim_y": g.dim_y,
        "coeffs": [
            {"index": list(t), "matrix": matrix_to_json(m)}
            for t, m in sorted(g.coeffs.items())
        ],
    }


def germ_from_dict(payload: dict) -> PolyGerm:
    _header(payload, "germ")
    try:
        dy, du = payload["dim_y"], payload["dim_u"]
        coeffs = {
            tuple(entry["index"]): matrix_from_json(entry["matrix"], (dy, du))
            for entry in payload["coeffs"]
        }
        return PolyGerm(payload["n_params"], du, dy, coeffs)
    except KeyError as exc:
        raise FileFormatError(f"missing field {exc}") from exc


def subspace_to_dict(s: Subspace) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "subspace",
        "ambient_dim": s.ambient_dim,
        "dim": s.dim,
        "basis": matrix_to_json(s.basis),
    }


def subspace_from_dict(payload: dict) -> Subspace:
    _header(payload, "subspace")
    try:
        ambient = payload["ambient_dim"]
        basis = matrix_from_json(payload["basis"], (ambient, payload["dim"]))
        return Subspace(ambient, basis)  # orthonormality re-verified on load
    except KeyError as exc:
        raise FileFormatError(f"missing field {exc}") from exc


def chain_to_dict(chain: LinearFactorChain) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "chain",
        "n_params": chain.n_params,
        "spaces": list(chain.spaces),
        "factors": [[matrix_to_json(m) for m in tup] for tup in chain.factors],
    }


def chain_from_dict(payload: dict) -> LinearFactorChain:
    _header(payload, "chain")
    try:
        spaces = payload["spaces"]
        factors = tuple(
            tuple(matrix_from_json(m, (spaces[j], spaces[j + 1])) for m in tup)
            for j, tup in enumerate(payload["factors"])
        )
        return LinearFactorChain(spaces=tuple(spaces), factors=factors)
    except KeyError as exc:
        raise FileFormatError(f"missing field {exc}") from exc


def save_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON ({exc})") from exc


def load_system(path) -> MultiSystem:
    return system_from_dict(load_json(path))


def load_germ(path) -> PolyGerm:
    return germ_from_dict(load_json(path))


def load_subspace(path) -> Subspace:
    return subspace_from_dict(load_json(path))
