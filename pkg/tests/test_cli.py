import json

import pytest

from sbperm.cli import main

SUBCOMMANDS = ["sample", "density", "identities", "limit", "verify", "constants"]


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_constants(capsys):
    code, out, _ = run(["constants"], capsys)
    d = json.loads(out)
    assert code == 0
    assert d["prob_last_pick_is_min"] == pytest.approx(0.555229, abs=1e-5)
    assert d["E_J1"] == pytest.approx(2.25, abs=1e-4)
    assert d["K1_partial_expectation_N1e6"] - d["K1_partial_expectation_N1e3"] > 1


def test_sample_deterministic(capsys):
    argv = ["sample", "--model", "gamma:a=1,rate=1", "--n", "5", "--method", "keys", "--replicas", "3", "--seed", "7"]
    code, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert code == 0 and a == b
    rows = [r for r in a.splitlines()[1:] if r]
    assert len(rows) == 15
    # full precision
    assert all(r.split(",")[2] == "%.17g" % float(r.split(",")[2]) for r in rows)
    assert any(len(r.split(",")[2]) > 15 for r in rows)


@pytest.mark.parametrize("method", ["definition", "keys", "patil-taillie", "reverse"])
def test_sample_methods(method, capsys):
    code, out, _ = run(["sample", "--model", "gamma:a=2", "--n", "4", "--method", method, "--seed", "1"], capsys)
    assert code == 0 and len(out.splitlines()) == 5


def test_output_file_and_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SBPERM_OUTPUT_DIR", str(tmp_path))
    argv = ["sample", "--model", "gamma:a=1", "--n", "3", "--seed", "2", "--output", "out.csv"]
    assert main(argv) == 0
    first = (tmp_path / "out.csv").read_bytes()
    assert main(argv) == 0
    assert (tmp_path / "out.csv").read_bytes() == first


def test_random_seed(capsys):
    assert run(["sample", "--model", "gamma:a=1", "--n", "3", "--seed", "random"], capsys)[0] == 0


@pytest.mark.parametrize("argv", [
    ["sample", "--model", "gamma:a=1,zz=2", "--n", "3"],
    ["sample", "--model", "gamma:a=1", "--n", "3", "--bogus"],
    ["sample", "--model", "gamma:a=1", "--n", "3", "--output", "/proc/nonexistent/x.csv"],
    ["limit", "--a", "1", "--eps", "2"],
    ["density", "--model", "gamma:a=1", "--kind", "marginal", "--n", "3", "--k", "9", "--x", "1"],
    [],
])
def test_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == 2


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_names_objects(cmd, capsys):
    assert main([cmd, "--help"]) == 0
    text = capsys.readouterr().out
    assert len(text) > 200


def test_density(capsys):
    code, out, _ = run(["density", "--model", "gamma:a=1", "--kind", "marginal", "--n", "2", "--k", "1",
                        "--x-min", "0.5", "--x-max", "2", "--points", "4"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 5


def test_identities(capsys):
    code, out, _ = run(["identities", "--model", "gamma:a=1.5", "--u", "0.4"], capsys)
    d = json.loads(out)
    assert code == 0
    assert d["integral_identity"]["pinned"] == ["c=u"]
    assert d["evolution_ode"]["pinned"] == ["+"]


def test_limit(capsys):
    code, out, _ = run(["limit", "--a", "1", "--kmax", "3", "--replicas", "2000", "--seed", "5"], capsys)
    d = json.loads(out)
    assert code == 0
    assert abs(d["P_J1_eq_1"] - 0.5552) < 0.05


def test_verify_small_suite(capsys):
    code, out, _ = run(["verify", "--suite", "stick.gem_fractions", "--seed", "42", "--scale", "0.2"], capsys)
    reps = json.loads(out)
    assert code == 0 and all(r["test"].startswith("stick.gem_fractions") for r in reps)
