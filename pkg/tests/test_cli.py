import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from polyheat.cli import main

from _oracles import airy_kernel


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.fixture
def config(tmp_path):
    def write(doc, name="case.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
        return str(path)
    return write


# ---------------------------------------------------------------- kernel
def test_kernel_gaussian_row(capsys):
    code, out, _ = run(capsys, "kernel", "--p", "2", "--alpha-re", "-0.5", "--t", "1",
                       "--xmin", "0", "--xmax", "0", "--points", "1")
    assert code == 0
    table = rows(out)
    assert table[0] == ["x", "re", "im", "abs", "method", "err"]
    assert len(table) == 2
    x, re, im = (float(v) for v in table[1][:3])
    assert x == 0.0 and im == 0.0
    assert abs(re - 1 / math.sqrt(2 * math.pi)) < 1e-12


def test_kernel_airy_rows(capsys):
    code, out, _ = run(capsys, "kernel", "--p", "3", "--alpha-re", "0", "--alpha-im", "1",
                       "--t", "1", "--xmin", "-4", "--xmax", "4", "--points", "9")
    assert code == 0
    for r in rows(out)[1:]:
        x, re, im = (float(v) for v in r[:3])
        ref = airy_kernel(x, 1.0)
        assert abs(complex(re, im) - ref) < 1e-6 * abs(ref)


def test_kernel_inadmissible_alpha(capsys):
    code, out, err = run(capsys, "kernel", "--p", "3", "--alpha-re", "-1")
    assert code == 2
    assert "inadmissible alpha" in err
    assert out == ""


def test_kernel_writes_file(capsys, tmp_path):
    path = tmp_path / "k.csv"
    code, out, _ = run(capsys, "kernel", "--p", "4", "--alpha-re", "-1", "--points", "5",
                       "--out", str(path))
    assert code == 0 and out == ""
    assert len(rows(path.read_text())) == 6


def test_kernel_output_is_deterministic(capsys):
    argv = ["kernel", "--p", "4", "--alpha-im", "1", "--xmin", "-3", "--xmax", "3",
            "--points", "13"]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_kernel_floats_round_trip(capsys):
    _, out, _ = run(capsys, "kernel", "--p", "4", "--alpha-im", "1", "--points", "3")
    for r in rows(out)[1:]:
        for text in r[:4]:
            assert repr(float(text)) == text


# ---------------------------------------------------------------- check
GAUSS_DOC = {"p": 2, "alpha": [-0.5, 0.0], "t": 1.0}


def test_check_semigroup_gaussian(capsys, config):
    code, out, err = run(capsys, "check", "semigroup", "--config", config(GAUSS_DOC))
    assert code == 0 and "PASS" in err
    for r in rows(out)[1:]:
        assert float(r[-1]) < 1e-8


def test_check_variation_gaussian(capsys, config):
    code, out, _ = run(capsys, "check", "variation", "--config", config(GAUSS_DOC))
    assert code == 0
    table = rows(out)
    assert table[0] == ["level", "nodes", "estimate"]
    assert len(table) == 4
    for r in table[1:]:
        assert abs(float(r[2]) - 1.0) < 1e-4


def test_check_cylinder(capsys, config):
    code, out, _ = run(capsys, "check", "cylinder", "--config",
                       config({"p": 4, "alpha": [-1.0, 0.0]}))
    assert code == 0
    table = rows(out)
    assert table[0] == ["case_id", "re_closed", "im_closed", "re_quad", "im_quad", "abs_diff"]
    assert table[1][0] == "n1" and float(table[1][-1]) < 1e-5


def test_check_asymptotic_default(capsys):
    code, out, _ = run(capsys, "check", "asymptotic")
    assert code == 0
    for r in rows(out)[1:]:
        assert 0.95 <= float(r[5]) <= 1.05


@pytest.mark.parametrize("doc", [
    "{not json",
    {"p": 4, "alpha": [0, 1], "colour": "red"},
    {"p": 4, "alpha": [0]},
    {"grid": {"N": 100}},
    {"u0_atoms": [{"y": "one", "re": 1}]},
    {"p": 3, "alpha": [-1, 0]},
])
def test_check_malformed_config(capsys, config, doc):
    code, out, err = run(capsys, "check", "semigroup", "--config", config(doc))
    assert code == 2
    assert err.startswith("error:")
    assert out == ""


def test_missing_config_file(capsys, tmp_path):
    code, _, _ = run(capsys, "check", "semigroup", "--config", str(tmp_path / "nope.json"))
    assert code == 2


# ---------------------------------------------------------------- solve
def test_solve_compare_free(capsys, config):
    code, out, _ = run(capsys, "solve", "--method", "compare", "--config",
                       config({"V_atoms": [], "u0_atoms": [{"y": 0, "re": 1, "im": 0},
                                                           {"y": 2, "re": 0.5, "im": 0}]}))
    assert code == 0
    assert max(float(r[-1]) for r in rows(out)[1:]) < 1e-10


def test_solve_compare_constant_potential(capsys, config):
    code, out, _ = run(capsys, "solve", "--config",
                       config({"V_atoms": [{"z": 0, "re": -0.3, "im": 0}],
                               "dyson": {"n_max": 9, "time_mesh": 64}}))
    assert code == 0
    assert max(float(r[-1]) for r in rows(out)[1:]) < 1e-8


def test_solve_compare_standard_case(capsys):
    code, out, err = run(capsys, "solve", "--method", "compare")
    assert code == 0 and "compare: PASS" in err
    table = rows(out)
    assert table[0] == ["x", "re_dyson", "im_dyson", "re_spec", "im_spec", "abs_diff"]
    assert len(table) == 257
    assert max(float(r[-1]) for r in table[1:]) < 1e-3


def test_solve_dyson_atoms(capsys):
    code, out, err = run(capsys, "solve", "--method", "dyson")
    assert code == 0 and "truncation bound" in err
    table = rows(out)
    assert table[0] == ["y", "re", "im"]
    ys = [float(r[0]) for r in table[1:]]
    assert ys == sorted(ys) and 0.0 in ys


@pytest.mark.parametrize("method", ["feynman-kac", "spectral"])
def test_solve_samples(capsys, config, method):
    code, out, _ = run(capsys, "solve", "--method", method, "--config", config({"grid": {"N": 16}}))
    assert code == 0
    table = rows(out)
    assert table[0] == ["x", "re", "im"] and len(table) == 17


def test_solve_incommensurate(capsys, config):
    code, _, err = run(capsys, "solve", "--config",
                       config({"V_atoms": [{"z": 0.5, "re": 0.4, "im": 0}]}))
    assert code == 3
    assert "incommensurate" in err


def test_solve_explosion(capsys, config):
    atoms = [{"z": math.sqrt(q), "re": 0.1, "im": 0} for q in (2, 3, 5, 7, 11, 13, 17, 19)]
    path = config({"V_atoms": atoms, "dyson": {"n_max": 12, "time_mesh": 64}})
    code, _, err = run(capsys, "solve", "--method", "dyson", "--config", path)
    assert code == 3
    assert "explosion" in err


# ---------------------------------------------------------------- bench
@pytest.mark.parametrize("repeat", [1, 5])
def test_bench(capsys, config, repeat):
    path = config({"grid": {"N": 16}, "dyson": {"n_max": 2, "time_mesh": 16}}, "small.json")
    code, out, _ = run(capsys, "bench", "--config", path, "--repeat", str(repeat))
    assert code == 0
    table = rows(out)
    assert table[0] == ["method", "case", "median_ms"]
    methods = [r[0] for r in table[1:]]
    assert methods == ["kernel_table", "dyson", "feynman-kac", "spectral"]
    times = np.array([float(r[2]) for r in table[1:]])
    assert np.all(np.isfinite(times)) and np.all(times >= 0)
    assert table[1][1] == "small/1000pts"


def test_bench_rejects_zero_repeat(capsys):
    assert run(capsys, "bench", "--repeat", "0")[0] == 2


# ---------------------------------------------------------------- entry point
def test_module_entry_point(tmp_path):
    out = tmp_path / "k.csv"
    proc = subprocess.run([sys.executable, "-m", "polyheat.cli", "kernel", "--p", "2",
                           "--alpha-re", "-0.5", "--points", "3", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == ""
    assert rows(out.read_text())[0][0] == "x"
