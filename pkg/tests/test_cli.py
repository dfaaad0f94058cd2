"""End-to-end tests of the command-line interface (exit codes and files)."""

import json

import numpy as np
import pytest

from mpsys import serialization as ser
from mpsys.cli import run
from mpsys.subspaces import Subspace
from mpsys.systems import MultiSystem, random_conservative


def invoke(capsys, *argv):
    code = run(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def report_body(out):
    body = json.loads(out)
    body.pop("timing_s")
    return body


def write_system(path, s):
    ser.save_json(path, ser.system_to_dict(s))


def test_generate_and_check_conservative(tmp_path, capsys):
    out = tmp_path / "sys.json"
    code, stdout, _ = invoke(capsys, "generate", "conservative",
                             "--n-params", "2", "--dim-x", "4",
                             "--seed", "3", "--out", str(out))
    assert code == 0
    assert report_body(stdout)["conservative"] is True
    assert ser.load_system(out).dim_x == 4

    code, stdout, _ = invoke(capsys, "check", str(out), "--what", "conservative")
    assert code == 0
    assert report_body(stdout)["verdict"] is True


def test_check_fails_on_broken_system(tmp_path, capsys):
    s = random_conservative(2, 3, 2, 2, seed=0)
    broken = MultiSystem(a=[s.a[0] + 1e-3, s.a[1]], b=s.b, c=s.c, d=s.d)
    path = tmp_path / "broken.json"
    write_system(path, broken)
    for what in ("conservative", "dissipative"):
        code, stdout, _ = invoke(capsys, "check", str(path), "--what", what)
        assert code == 2
        assert report_body(stdout)["verdict"] is False


def test_cascade_and_decompose_round_trip(tmp_path, capsys):
    p2, p1 = tmp_path / "b2.json", tmp_path / "b1.json"
    write_system(p2, random_conservative(2, 3, 2, 2, seed=5))
    write_system(p1, random_conservative(2, 3, 2, 2, seed=7))
    casc = tmp_path / "casc.json"
    code, stdout, _ = invoke(capsys, "cascade", str(p2), str(p1), "--out", str(casc))
    assert code == 0
    assert report_body(stdout)["transfer_product_residual"] < 1e-9

    combined = ser.load_system(casc)
    basis = np.zeros((combined.dim_x, 3), dtype=complex)
    basis[:3, :3] = np.eye(3)
    x2 = tmp_path / "x2.json"
    ser.save_json(x2, ser.subspace_to_dict(Subspace(combined.dim_x, basis)))
    code, stdout, _ = invoke(capsys, "decompose", str(casc), "--x2", str(x2),
                             "--out-dir", str(tmp_path / "dec"))
    assert code == 0
    body = report_body(stdout)
    assert body["transfer_product_residual"] < 1e-9
    assert (tmp_path / "dec" / "alpha2.json").exists()
    # every produced file re-validates on read
    ser.load_system(tmp_path / "dec" / "alpha2.json")
    ser.load_system(tmp_path / "dec" / "alpha1.json")
    ser.load_subspace(tmp_path / "dec" / "intermediate.json")
    ser.load_subspace(tmp_path / "dec" / "x1.json")


def test_factor_problem2_on_cascade(tmp_path, capsys):
    p2, p1 = tmp_path / "b2.json", tmp_path / "b1.json"
    write_system(p2, random_conservative(2, 2, 2, 2, seed=11))
    write_system(p1, random_conservative(2, 2, 2, 2, seed=13))
    casc = tmp_path / "casc.json"
    invoke(capsys, "cascade", str(p2), str(p1), "--out", str(casc))
    code, stdout, _ = invoke(capsys, "factor", str(casc), "--mode", "problem2",
                             "--out-dir", str(tmp_path / "p2"))
    assert code == 0
    assert report_body(stdout)["verdict"] == "factored"
    ser.load_system(tmp_path / "p2" / "theta2.json")
    ser.load_system(tmp_path / "p2" / "theta1.json")


def test_factor_problem2_rejects_multiplicity_one(tmp_path, capsys):
    path = tmp_path / "m1.json"
    write_system(path, random_conservative(2, 3, 2, 2, seed=17))
    code, _, err = invoke(capsys, "factor", str(path), "--mode", "problem2",
                          "--out-dir", str(tmp_path / "out"))
    assert code == 1
    assert "error" in err


def test_factor_left_and_right(tmp_path, capsys):
    s = random_conservative(2, 4, 2, 2, seed=19)
    zero_d = MultiSystem(a=s.a, b=s.b, c=s.c, d=[np.zeros_like(d) for d in s.d])
    path = tmp_path / "z.json"
    write_system(path, zero_d)
    for mode in ("left", "right"):
        code, stdout, _ = invoke(capsys, "factor", str(path), "--mode", mode,
                                 "--out-dir", str(tmp_path / mode))
        assert code == 0
        assert report_body(stdout)["reconstruction_residual"] < 1e-9
        ser.chain_from_dict(ser.load_json(tmp_path / mode / "chain.json"))


def test_agler_pass_and_fail(tmp_path, capsys):
    s = random_conservative(2, 3, 2, 2, seed=23)
    path = tmp_path / "sys.json"
    write_system(path, s)
    code, stdout, _ = invoke(capsys, "agler", str(path), "--trials", "10")
    assert code == 0
    assert report_body(stdout)["witness"] is None

    scaled = MultiSystem(a=s.a, b=s.b, c=[1.5 * m for m in s.c],
                         d=[1.5 * m for m in s.d])
    bad = tmp_path / "scaled.json"
    write_system(bad, scaled)
    code, stdout, _ = invoke(capsys, "agler", str(bad), "--trials", "50")
    assert code == 2
    body = report_body(stdout)
    assert body["witness"] is not None
    assert body["witness_norm"] > 1.0 + 1e-8


def test_usage_errors_exit_one(tmp_path, capsys):
    code, _, err = invoke(capsys, "check", str(tmp_path / "missing.json"),
                          "--what", "conservative")
    assert code == 1
    code, _, err = invoke(capsys, "check", "x.json", "--what", "bogus")
    assert code == 1
    code, _, err = invoke(capsys, "frobnicate")
    assert code == 1


def test_seeded_reports_are_byte_identical(tmp_path, capsys):
    path = tmp_path / "sys.json"
    write_system(path, random_conservative(2, 3, 2, 2, seed=29))

    def body_lines(argv):
        code, stdout, _ = invoke(capsys, *argv)
        assert code == 0
        return [ln for ln in stdout.splitlines() if "timing_s" not in ln]

    for argv in (
        ["check", str(path), "--what", "dissipative", "--seed", "4"],
        ["agler", str(path), "--trials", "8", "--seed", "4"],
        ["generate", "conservative", "--seed", "9", "--out", str(tmp_path / "g.json")],
    ):
        assert body_lines(argv) == body_lines(argv)


def test_germ_realization_generate(tmp_path, capsys):
    from mpsys.systems import PolyGerm
    germ = PolyGerm(2, 1, 1, {(1, 1): np.array([[1.0]])})
    gpath = tmp_path / "germ.json"
    ser.save_json(gpath, ser.germ_to_dict(germ))
    out = tmp_path / "real.json"
    code, stdout, _ = invoke(capsys, "generate", "germ-realization",
                             "--germ", str(gpath), "--out", str(out))
    assert code == 0
    assert ser.load_system(out).dim_x == 2
