"""Command-line front end.

Subcommands compose the library into reproducible runs: generate, check,
cascade, decompose, factor, agler.  Every run prints a JSON report whose
body is byte-identical across runs with the same command and seed (the
timing field is the only exception and is excluded from that guarantee).

Exit codes: 0 = pass, 2 = property fail (with witness where applicable),
1 = usage, parse, or precondition error.  Seeds are flags only; no
environment variable can override them.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .agler import agler_test
from .cascade import cascade, decompose, sample_polydisk, verify_factor_tf
from .factorization import (
    chain_eval,
    chain_to_germ,
    factor_homogeneous,
    factor_left,
    factor_right,
    multiplicity,
    solve_problem2,
    tail_eval,
)
from .systems import (
    closely_connected_subspace,
    is_conservative,
    is_dissipative_sampled,
    random_conservative,
    realize_germ,
    taylor_coefficients,
    transfer_eval,
    unitary_part,
)
from . import serialization as ser

PASS, ERROR, FAIL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message)


class CliError(Exception):
    pass


def _complex_list(z) -> list:
    return [[float(x.real), float(x.imag)] for x in np.asarray(z, dtype=complex).reshape(-1)]


def _report(args, **fields) -> dict:
    body = {"command": " ".join(args), "schema_version": ser.SCHEMA_VERSION}
    body.update(fields)
    return body


def _emit(report: dict, started: float) -> None:
    report["timing_s"] = round(time.perf_counter() - started, 6)
    print(json.dumps(report, indent=2, sort_keys=True))


def cmd_generate(ns, argv) -> tuple:
    if ns.what == "conservative":
        system = random_conservative(
            ns.n_params, ns.dim_x, ns.dim_u, ns.dim_y, seed=ns.seed
        )
        report_fields = {"seed": ns.seed}
    else:  # germ-realization
        germ = ser.load_germ(ns.germ)
        system = realize_germ(germ)
        report_fields = {"germ": str(ns.germ)}
    ser.save_json(ns.out, ser.system_to_dict(system))
    conservativity = is_conservative(system)
    report = _report(
        argv,
        kind=ns.what,
        out=str(ns.out),
        dims={"n_params": system.n_params, "dim_x": system.dim_x,
              "dim_u": system.dim_u, "dim_y": system.dim_y},
        conservative=conservativity.is_conservative,
        conservativity_residual=conservativity.worst_residual,
        tolerances={"conservativity_tol": 1e-10},
        **report_fields,
    )
    return report, PASS


def cmd_check(ns, argv) -> tuple:
    system = ser.load_system(ns.path)
    tolerances = {"residual_tol": ns.residual_tol, "rank_tol": ns.rank_tol}
    if ns.what == "conservative":
        rep = is_conservative(system, ns.residual_tol)
        report = _report(argv, what=ns.what, verdict=rep.is_conservative,
                         residual=rep.worst_residual,
                         failing_pair=list(rep.failing_pair) if rep.failing_pair else None,
                         tolerances=tolerances)
        return report, PASS if rep.is_conservative else FAIL
    if ns.what == "dissipative":
        verdict = is_dissipative_sampled(
            system, n_samples=ns.torus_samples, tol=ns.residual_tol, seed=ns.seed
        )
        report = _report(argv, what=ns.what, verdict=verdict.passed,
                         max_pencil_norm=verdict.max_norm,
                         witness=_complex_list(verdict.witness) if verdict.witness is not None else None,
                         torus_samples=ns.torus_samples, seed=ns.seed,
                         tolerances=tolerances)
        return report, PASS if verdict.passed else FAIL
    if ns.what == "closely-connected":
        sub = closely_connected_subspace(system, ns.rank_tol)
        verdict = sub.dim == system.dim_x
        report = _report(argv, what=ns.what, verdict=verdict,
                         cc_dim=sub.dim, dim_x=system.dim_x, tolerances=tolerances)
        return report, PASS if verdict else FAIL
    if ns.what == "unitary-part":
        part = unitary_part(system)
        verdict = part.dim == 0  # pass = pencil is completely non-unitary
        report = _report(argv, what=ns.what, verdict=verdict,
                         unitary_part_dim=part.dim, dim_x=system.dim_x,
                         tolerances=tolerances)
        return report, PASS if verdict else FAIL
    # multiplicity
    m = multiplicity(system, ns.degree_cap)
    report = _report(argv, what=ns.what,
                     multiplicity=m if m is not None else "zero-function-up-to-cap",
                     degree_cap=ns.degree_cap, tolerances=tolerances)
    return report, PASS if m is not None else FAIL


def cmd_cascade(ns, argv) -> tuple:
    alpha2 = ser.load_system(ns.path2)
    alpha1 = ser.load_system(ns.path1)
    combined = cascade(alpha2, alpha1)
    ser.save_json(ns.out, ser.system_to_dict(combined))
    residual = verify_factor_tf(combined, alpha2, alpha1, seed=ns.seed)
    report = _report(argv, out=str(ns.out), dim_x=combined.dim_x,
                     transfer_product_residual=residual, seed=ns.seed,
                     tolerances={"residual_tol": ns.residual_tol})
    return report, PASS if residual < ns.residual_tol else FAIL


def cmd_decompose(ns, argv) -> tuple:
    system = ser.load_system(ns.path)
    x2 = ser.load_subspace(ns.x2)
    dec = decompose(system, x2)
    out_dir = Path(ns.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ser.save_json(out_dir / "alpha2.json", ser.system_to_dict(dec.alpha2))
    ser.save_json(out_dir / "alpha1.json", ser.system_to_dict(dec.alpha1))
    ser.save_json(out_dir / "intermediate.json", ser.subspace_to_dict(dec.intermediate))
    ser.save_json(out_dir / "x1.json", ser.subspace_to_dict(dec.x1))
    residual = verify_factor_tf(system, dec.alpha2, dec.alpha1, seed=ns.seed)
    report = _report(argv, out_dir=str(out_dir),
                     dims={"x2": x2.dim, "intermediate": dec.intermediate.dim,
                           "x1": dec.x1.dim},
                     transfer_product_residual=residual, seed=ns.seed,
                     tolerances={"residual_tol": ns.residual_tol})
    return report, PASS if residual < ns.residual_tol else FAIL


def _reconstruction_residual(system, chain, tail, right: bool, seed: int) -> float:
    worst = 0.0
    for z in sample_polydisk(system.n_params, 20, 0.4, seed):
        theta = transfer_eval(system, z)
        if right:
            approx = tail_eval(tail, z) @ chain_eval(chain, z)
        else:
            approx = chain_eval(chain, z) @ tail_eval(tail, z)
        worst = max(worst, float(np.linalg.norm(theta - approx, 2)))
    return worst


def cmd_factor(ns, argv) -> tuple:
    system = ser.load_system(ns.path)
    out_dir = Path(ns.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tolerances = {"residual_tol": ns.residual_tol, "degree_cap": ns.degree_cap}

    if ns.mode == "problem2":
        outcome = solve_problem2(system, budget=ns.budget, seed=ns.seed,
                                          tol=ns.residual_tol)
        if outcome is None:
            report = _report(argv, mode=ns.mode, verdict="inconclusive",
                             budget=ns.budget, seed=ns.seed, tolerances=tolerances)
            return report, FAIL
        ser.save_json(out_dir / "theta2.json", ser.system_to_dict(outcome.theta2))
        ser.save_json(out_dir / "theta1.json", ser.system_to_dict(outcome.theta1))
        ser.save_json(out_dir / "witness_x2.json",
                      ser.subspace_to_dict(outcome.witness_x2))
        report = _report(argv, mode=ns.mode, verdict="factored",
                         out_dir=str(out_dir),
                         intermediate_dim=outcome.intermediate_dim,
                         witness_x2_dim=outcome.witness_x2.dim,
                         reconstruction_residual=outcome.residual,
                         budget=ns.budget, seed=ns.seed, tolerances=tolerances)
        return report, PASS

    m = ns.multiplicity
    if m is None:
        m = multiplicity(system, ns.degree_cap)
        if m is None:
            raise CliError(
                "transfer function vanishes up to the degree cap; pass --multiplicity"
            )

    if ns.mode == "homogeneous":
        chain = factor_homogeneous(system, m, check_cap=ns.degree_cap)
        ser.save_json(out_dir / "chain.json", ser.chain_to_dict(chain))
        produced = chain_to_germ(chain)
        target = taylor_coefficients(system, m)
        residual = max(
            (np.linalg.norm(produced.coeffs.get(t, 0) - target.coeffs.get(t, 0))
             for t in set(produced.coeffs) | set(target.coeffs)),
            default=0.0,
        )
        report = _report(argv, mode=ns.mode, degree=m, out_dir=str(out_dir),
                         coefficient_residual=float(residual),
                         tolerances=tolerances)
        return report, PASS if residual < 1e-10 else FAIL

    right = ns.mode == "right"
    if right:
        tail, chain = factor_right(system, m)
    else:
        chain, tail = factor_left(system, m)
    ser.save_json(out_dir / "chain.json", ser.chain_to_dict(chain))
    ser.save_json(out_dir / "tail_constant.json", {
        "schema_version": ser.SCHEMA_VERSION, "kind": "matrix",
        "matrix": ser.matrix_to_json(tail.constant),
    })
    ser.save_json(out_dir / "tail_vanishing.json",
                  ser.system_to_dict(tail.vanishing_part))
    residual = _reconstruction_residual(system, chain, tail, right, ns.seed)
    report = _report(argv, mode=ns.mode, multiplicity=m, out_dir=str(out_dir),
                     reconstruction_residual=residual, seed=ns.seed,
                     tolerances=tolerances)
    return report, PASS if residual < ns.residual_tol else FAIL


def cmd_agler(ns, argv) -> tuple:
    system = ser.load_system(ns.path)
    report_obj = agler_test(system, trials=ns.trials, r=ns.r,
                                      tol=ns.tol, seed=ns.seed)
    witness = None
    if report_obj.witness is not None:
        witness = [ser.matrix_to_json(m) for m in report_obj.witness.mats]
    report = _report(argv, trials=report_obj.trials, r=ns.r,
                     max_norm=report_obj.max_norm,
                     witness=witness, witness_norm=report_obj.witness_norm,
                     seed=ns.seed, tolerances={"tol": ns.tol})
    return report, FAIL if report_obj.falsified else PASS


def _add_common_tols(parser):
    parser.add_argument("--rank-tol", type=float, default=1e-9)
    parser.add_argument("--residual-tol", type=float, default=1e-9)
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> _Parser:
    parser = _Parser(prog="mpsys", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("generate", help="generate a system file")
    p.add_argument("what", choices=["conservative", "germ-realization"])
    p.add_argument("--n-params", type=int, default=2)
    p.add_argument("--dim-x", type=int, default=4)
    p.add_argument("--dim-u", type=int, default=2)
    p.add_argument("--dim-y", type=int, default=2)
    p.add_argument("--germ", help="germ file for germ-realization")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("check", help="check a property of a system file")
    p.add_argument("path")
    p.add_argument("--what", required=True,
                   choices=["conservative", "dissipative", "closely-connected",
                            "unitary-part", "multiplicity"])
    p.add_argument("--torus-samples", type=int, default=100)
    p.add_argument("--degree-cap", type=int, default=8)
    _add_common_tols(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("cascade", help="cascade connection of two system files")
    p.add_argument("path2", help="the outer system (applied second)")
    p.add_argument("path1", help="the inner system (applied first)")
    p.add_argument("--out", required=True)
    _add_common_tols(p)
    p.set_defaults(func=cmd_cascade)

    p = sub.add_parser("decompose",
                       help="cascade decomposition along an invariant subspace")
    p.add_argument("path")
    p.add_argument("--x2", required=True, help="subspace file for X2")
    p.add_argument("--out-dir", required=True)
    _add_common_tols(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("factor", help="factor a transfer function")
    p.add_argument("path")
    p.add_argument("--mode", required=True,
                   choices=["left", "right", "homogeneous", "problem2"])
    p.add_argument("--multiplicity", type=int, default=None)
    p.add_argument("--degree-cap", type=int, default=8)
    p.add_argument("--budget", type=int, default=64)
    p.add_argument("--out-dir", default="factor-out")
    _add_common_tols(p)
    p.set_defaults(func=cmd_factor)

    p = sub.add_parser("agler", help="try to falsify Agler-Schur membership")
    p.add_argument("path")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--r", type=float, default=0.9)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_agler)

    return parser


def run(argv) -> int:
    started = time.perf_counter()
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        report, code = ns.func(ns, argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR
    except (ser.FileFormatError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return ERROR
    _emit(report, started)
    return code


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
