import json
import subprocess
import sys

import numpy as np
import pytest

from vcqds.cli import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, build_parser, main
from vcqds.spectra import TimeSeries, read_series_csv, write_series_csv


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_parser_has_all_subcommands():
    sub = next(a for a in build_parser()._actions if a.dest == "command")
    assert set(sub.choices) == {"cartan", "evolve", "spectrum", "reproduce-fig2", "reproduce-fig3",
                                "reproduce-fig5", "reproduce-fig6"}


def test_cartan_heisenberg2(tmp_path, capsys):
    code, out, _ = run(["cartan", "--model", "heisenberg2", "--output-dir", str(tmp_path)], capsys)
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["residual"] == 0 and report["iterations"] == 0 and report["h"] == report["m"] == 3
    assert (tmp_path / "cartan.txt").exists() and (tmp_path / "cartan_report.json").exists()


def test_cartan_ising(tmp_path, capsys):
    code, out, _ = run(["cartan", "--model", "ising2x3", "--j", "1", "--d", "1", "--output-dir", str(tmp_path)], capsys)
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["reconstruction_error"] < 1e-9 and report["closure_dim"] == 1056


def test_missing_file_is_input_error(tmp_path, capsys):
    code, _, err = run(["cartan", "--hamiltonian", str(tmp_path / "h.txt"), "--dipole", "mu.txt",
                        "--output-dir", str(tmp_path)], capsys)
    assert code == EXIT_INPUT
    record = json.loads(err.strip().splitlines()[-1])
    assert "h.txt" in record["message"] and record["exit_code"] == 2


@pytest.mark.parametrize("argv", [
    ["evolve", "--model", "heisenberg2", "--gamma", "-1"],
    ["evolve", "--model", "heisenberg2", "--e0", "inf"],
    ["evolve", "--model", "nosuch"],
    ["evolve"],
])
def test_bad_inputs(argv, tmp_path, capsys):
    code, _, err = run(argv + ["--output-dir", str(tmp_path)], capsys)
    assert code == EXIT_INPUT
    assert json.loads(err.strip().splitlines()[-1])["exit_code"] == EXIT_INPUT


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["evolve", "--dt", "abc"])
    assert info.value.code == 2


def test_numerical_failure_exit_1(tmp_path, capsys):
    code, _, err = run(["cartan", "--model", "heisenberg4", "--tolerance", "1e-30", "--output-dir", str(tmp_path)],
                       capsys)
    assert code == EXIT_NUMERICAL
    assert json.loads(err.strip().splitlines()[-1])["error"] in ("ResidualTooLarge", "NoConvergence")


def test_evolve_spectrum_chain(tmp_path, capsys):
    cfg = tmp_path / "plan.json"
    cfg.write_text(json.dumps({"model": "heisenberg2", "e0": 1e-5, "t_total": 50.0, "seed": 0,
                               "output_dir": str(tmp_path / "ignored")}))
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        code, _, _ = run(["evolve", "--config", str(cfg), "--with-exact", "--output-dir", str(out)], capsys)
        assert code == EXIT_OK
    for name in ("Sz1.csv", "Sz2.csv", "field.csv", "cartan.txt", "vqds_diagnostics.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    man_a, man_b = (json.loads((o / "manifest.json").read_text()) for o in (out_a, out_b))
    assert man_a["plan"].pop("output_dir") != man_b["plan"].pop("output_dir")
    assert man_a == man_b
    total = read_series_csv(out_a / "Sz1.csv").values + read_series_csv(out_a / "Sz2.csv").values
    assert np.ptp(total) <= 1e-10
    code, out, _ = run(["spectrum", "--input-dir", str(out_a), "--kind", "susceptibility"], capsys)
    assert code == EXIT_OK
    peak = json.loads(out)["peaks"]["chi_Sz1"][0]["omega"]
    assert abs(peak - 4.0) < 0.02
    assert (out_a / "chi_Sz1.csv").read_text().startswith("omega,re,im")
    assert (out_a / "chi_Sz1_peaks.csv").read_text().startswith("omega,height,fwhm")


def test_evolve_zero_field_is_flat(tmp_path, capsys):
    code, _, _ = run(["evolve", "--model", "heisenberg2", "--e0", "0", "--t-total", "10",
                      "--output-dir", str(tmp_path)], capsys)
    assert code == EXIT_OK
    assert np.ptp(read_series_csv(tmp_path / "Sz1.csv").values) <= 1e-12


def test_plain_spectrum_of_cosine(tmp_path, capsys):
    t = 0.05 * np.arange(4000)
    write_series_csv(tmp_path / "tone.csv", TimeSeries(0.0, 0.05, np.cos(2.5 * t)))
    code, out, _ = run(["spectrum", "--input-dir", str(tmp_path), "--series", "tone", "--damping", "0.01"], capsys)
    assert code == EXIT_OK
    assert abs(json.loads(out)["peaks"]["spectrum_tone"][0]["omega"] - 2.5) < 0.01


def test_spectrum_missing_inputs(tmp_path, capsys):
    code, _, _ = run(["spectrum", "--input-dir", str(tmp_path / "none")], capsys)
    assert code == EXIT_INPUT
    code, _, _ = run(["spectrum", "--input-dir", str(tmp_path), "--kind", "absorption"], capsys)
    assert code == EXIT_INPUT


def test_reproduce_fig6(tmp_path, capsys):
    code, out, _ = run(["reproduce-fig6", "--output-dir", str(tmp_path)], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["mirror_error"] < 1e-10
    code, out, _ = run(["spectrum", "--input-dir", str(tmp_path), "--kind", "magnon", "--damping", "0.01"], capsys)
    assert code == EXIT_OK
    peaks = json.loads(out)["peaks"]
    assert abs(peaks["magnon_q2"][0]["omega"] - 4.0) < 0.01


def test_console_entry_and_threads_env(tmp_path):
    env = {"VCQDS_THREADS": "2", "PATH": "/usr/bin:/usr/local/bin"}
    proc = subprocess.run([sys.executable, "-m", "vcqds.cli", "cartan", "--model", "heisenberg2",
                           "--output-dir", str(tmp_path)], capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["depth"] == 0
