import json
import os

import numpy as np
import pytest

from qspopt import cli, su2
from qspopt.chebyshev import ChebSeries


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def half_x(tmp_path):
    path = tmp_path / "half_x.txt"
    cli.write_coefficient_file(str(path), ChebSeries([0, 0.5], "odd"))
    return path


def test_coefficient_file_round_trip(tmp_path, rng):
    s = ChebSeries(np.r_[0, rng.normal(size=1)[0], 0, 1 / 3], "odd")
    path = str(tmp_path / "c.txt")
    cli.write_coefficient_file(path, s)
    back = cli.read_coefficient_file(path)
    assert back.parity == "odd"
    np.testing.assert_array_equal(back.coeffs, s.coeffs)


@pytest.mark.parametrize(
    "text, error",
    [
        ("0.1\n0.2\n", cli.CorruptFileError),
        ("parity: sideways\n0.1\n", cli.CorruptFileError),
        ("parity: odd\n0\nfoo\n", cli.CorruptFileError),
        ("parity: odd\n", cli.CorruptFileError),
        ("parity: odd\n0.3\n0.2\n", cli.InvalidTargetError),
    ],
)
def test_parse_coefficients_errors(text, error):
    with pytest.raises(error):
        cli.parse_coefficients(text)


def test_parse_coefficients_comments():
    s = cli.parse_coefficients("# target\nparity: even  # header\n0.25\n\n0\n0.25\n")
    np.testing.assert_array_equal(s.coeffs, [0.25, 0, 0.25])


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    path = tmp_path / "out.txt"
    path.write_text("old")
    cli.atomic_write_text(str(path), "new\n")
    assert path.read_text() == "new\n"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_atomic_write_failure_keeps_old_file(tmp_path, monkeypatch):
    path = tmp_path / "out.txt"
    path.write_text("old")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        cli.atomic_write_text(str(path), "new")
    assert path.read_text() == "old"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_solve_writes_bit_exact_phases(tmp_path, half_x):
    out = tmp_path / "phases.json"
    assert run("solve", half_x, "--out", out) == cli.EXIT_OK
    doc = cli.load_phase_file(str(out))
    (part,) = doc["parts"]
    assert doc["status"] == "converged" and part["degree"] == 1
    phases = np.array(part["phases"])
    assert abs(np.cos(2 * phases[0])) == pytest.approx(0.5, abs=1e-12)
    # the text representation reads back to identical doubles
    again = json.loads(cli.dump_phase_file(doc))
    assert np.array_equal(np.array(again["parts"][0]["phases"]), phases)
    assert [float(repr(float(v))) for v in phases] == list(phases)


def test_verify_passes_then_fails_on_corruption(tmp_path, half_x, capsys):
    out = tmp_path / "phases.json"
    run("solve", half_x, "--out", out)
    assert run("verify", out) == cli.EXIT_OK
    assert "PASS" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    doc["parts"][0]["phases"] = [p + 1e-6 for p in doc["parts"][0]["phases"]]
    out.write_text(json.dumps(doc))
    assert run("verify", out) == cli.EXIT_VERIFY_FAILED
    assert "FAIL" in capsys.readouterr().out


def test_verify_nodes_only(tmp_path, half_x, capsys):
    out = tmp_path / "phases.json"
    run("solve", half_x, "--out", out)
    assert run("verify", out, "--samples", 0) == cli.EXIT_OK
    assert "grid error n/a" in capsys.readouterr().out


@pytest.mark.parametrize(
    "content",
    ["{not json", '{"format": "other"}', '{"format": "qspopt-phases", "version": 1, "parts": []}'],
)
def test_verify_corrupt_file_exits_5(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    assert run("verify", path) == cli.EXIT_IO


def test_verify_missing_file_exits_5(tmp_path):
    assert run("verify", tmp_path / "nope.json") == cli.EXIT_IO


def test_verify_asymmetric_phases_exit_5(tmp_path, half_x):
    out = tmp_path / "phases.json"
    run("solve", half_x, "--out", out)
    doc = json.loads(out.read_text())
    doc["parts"][0]["phases"][0] += 0.1
    out.write_text(json.dumps(doc))
    assert run("verify", out) == cli.EXIT_IO


def test_invalid_target_exits_4(tmp_path):
    path = tmp_path / "big.txt"
    path.write_text("parity: odd\n0\n1.5\n")
    assert run("solve", path) == cli.EXIT_INVALID_TARGET
    assert run("hamsim", "--tau", "-1") == cli.EXIT_INVALID_TARGET


def test_nonconvergence_exits_2_with_failed_file(tmp_path):
    even = np.zeros(41)
    even[0::2] = 0.8 * np.exp(-0.3 * np.arange(21)) / 4
    path = tmp_path / "even.txt"
    cli.write_coefficient_file(str(path), ChebSeries(even, "even"))
    out = tmp_path / "phases.json"
    assert run("solve", path, "--max-iter", 1, "--out", out) == cli.EXIT_NONCONVERGED
    doc = json.loads(out.read_text())
    assert doc["status"] == "failed" and not doc["parts"][0]["converged"]


def test_warm_start_parity_mismatch_exits_3(tmp_path, half_x):
    out = tmp_path / "phases.json"
    run("solve", half_x, "--out", out)
    even = tmp_path / "even.txt"
    even.write_text("parity: even\n0.1\n0\n0.1\n")
    assert run("solve", even, "--warm-start", out) == cli.EXIT_WARM_START


def test_warm_start_reduces_iterations(tmp_path):
    from qspopt import approx

    base, _, _ = approx.jacobi_anger(30.0)
    files = {}
    for d in (50, 60):
        path = tmp_path / f"cos{d}.txt"
        cli.write_coefficient_file(str(path), ChebSeries(base.coeffs[: d + 1], "even"))
        files[d] = path
    low, cold, warm = (tmp_path / n for n in ("low.json", "cold.json", "warm.json"))
    assert run("solve", files[50], "--divisor", 2, "--out", low) == cli.EXIT_OK
    assert run("solve", files[60], "--divisor", 2, "--out", cold) == cli.EXIT_OK
    assert run("solve", files[60], "--divisor", 2, "--warm-start", low, "--out", warm) == cli.EXIT_OK
    iters = [json.loads(p.read_text())["parts"][0]["iterations"] for p in (cold, warm)]
    assert iters[1] < iters[0]
    assert run("verify", warm) == cli.EXIT_OK


def test_plot_data_columns(tmp_path, half_x):
    plot = tmp_path / "plot.txt"
    assert run("solve", half_x, "--emit-plot-data", plot) == cli.EXIT_OK
    header = plot.read_text().splitlines()[0]
    assert header == "# x_real f_phi_real f_real"
    data = np.loadtxt(plot)
    assert data.shape == (1001, 3)
    np.testing.assert_allclose(data[:, 1], data[:, 0] / 2, atol=1e-13)
    np.testing.assert_allclose(data[:, 2], data[:, 0] / 2, atol=1e-15)


def test_hamsim_small_tau(tmp_path, capsys):
    out = tmp_path / "ham.json"
    assert run("hamsim", "--tau", 1, "--out", out) == cli.EXIT_OK
    doc = cli.load_phase_file(str(out))
    labels = [p["label"] for p in doc["parts"]]
    assert labels == ["real", "imag"] and doc["scale_divisor"] == 2.0
    for p in doc["parts"]:
        assert p["degree"] <= 35 and p["linf_error_vs_function"] < 2e-12
    x = np.linspace(-1, 1, 101)
    real = su2.real_component(np.array(doc["parts"][0]["phases"]), x)
    np.testing.assert_allclose(real, np.cos(x) / 2, atol=1e-12)
    assert run("verify", out) == cli.EXIT_OK


def test_eigenfilter_command(tmp_path):
    out = tmp_path / "eig.json"
    assert run("eigenfilter", "--k", 6, "--delta", 0.2, "--out", out) == cli.EXIT_OK
    doc = cli.load_phase_file(str(out))
    assert doc["scale_divisor"] == pytest.approx(np.sqrt(2))
    assert doc["parts"][0]["parity"] == "even" and doc["parts"][0]["degree"] == 12


def test_matinv_remez_even(tmp_path, capsys):
    out = tmp_path / "inv.json"
    assert run("matinv", "--kappa", 2, "--method", "remez-even", "--eps0", 1e-4, "--out", out) == cli.EXIT_OK
    assert "approximation degree" in capsys.readouterr().out
    (part,) = cli.load_phase_file(str(out))["parts"]
    assert part["parity"] == "even" and part["check_domain"][0] == pytest.approx(0.5)


def test_threads_env_runs_parts_concurrently(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "2")
    serial, threaded = tmp_path / "a.json", tmp_path / "b.json"
    assert run("hamsim", "--tau", 3, "--out", threaded) == cli.EXIT_OK
    monkeypatch.setenv(cli.THREADS_ENV, "1")
    assert run("hamsim", "--tau", 3, "--out", serial) == cli.EXIT_OK
    a, b = (cli.load_phase_file(str(p)) for p in (serial, threaded))
    for pa, pb in zip(a["parts"], b["parts"]):
        assert pa["phases"] == pb["phases"]


def test_grid_tolerance_grows_slowly():
    assert cli.grid_tolerance(1e-12, 1) < 3e-12
    assert cli.grid_tolerance(1e-12, 10_000) < 8e-12
