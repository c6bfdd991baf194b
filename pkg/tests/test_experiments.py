import json
import math

import numpy as np
import pytest

from wpduality import cli
from wpduality.counts import NoiseModel
from wpduality.experiments import (
    MAIN_NOTE,
    ExperimentConfig,
    preset_state,
    reference_values,
    resolve_state,
    run_figure3,
    run_figure4,
    run_figure5,
    run_property_suite,
)
from wpduality.optics import APPENDIX, MAIN_TEXT, w_phi
from wpduality.qstate import StokesVector, from_stokes, to_stokes


def config(names=("phi1", "phi2", "phi3", "phi4"), **kw):
    return ExperimentConfig(states=[(n, preset_state(n)) for n in names], **kw)


def test_reference_table():
    ref = reference_values()
    assert ref["E_joules"] == 2.45e-19
    assert set(ref["presets"]) == {"phi1", "phi2", "phi3", "phi4"}
    assert ref["figure4"]["theoretical_cd_cp"]["phi1"] == [0.4698, 1.0]


def test_resolve_state(tmp_path):
    name, rho = resolve_state("phi2")
    assert name == "phi2"
    p = tmp_path / "custom.yaml"
    p.write_text("stokes: [0.1, 0.2, 0.3]\n")
    name, rho = resolve_state(str(p))
    assert name == "custom" and to_stokes(rho).as_array() == pytest.approx([0.1, 0.2, 0.3])
    with pytest.raises(KeyError):
        resolve_state("phi9")


def test_figure3_analytic_only_is_deterministic():
    a = run_figure3(config(analytic_only=True))
    b = run_figure3(config(analytic_only=True))
    assert a.to_json() == b.to_json()
    row = a.rows[0]
    assert (row["analytic"]["W_max"], row["analytic"]["W_min"]) == pytest.approx((0.9414, 0.0586), abs=1e-4)
    assert row["simulated"] is None
    assert row["reference"]["W_max"] == 0.9420
    assert a.passed


def test_figure3_simulated_extrema():
    ok = 0
    runs = 40
    for seed in range(runs):
        rep = run_figure3(config(("phi1",), noise=NoiseModel(seed=seed)))
        ok += rep.rows[0]["checks"]["simulated_extrema_within_tol"]
    assert ok / runs >= 0.95


def test_figure3_writes_scans(tmp_path):
    run_figure3(config(("phi1",), output_dir=tmp_path)).write(tmp_path)
    assert (tmp_path / "scan_phi1.csv").read_text().startswith("phi_radians,W_over_E\n")
    assert (tmp_path / "scan_phi1_simulated.csv").exists()
    doc = json.loads((tmp_path / "figure3_report.json").read_text())
    assert doc["figure"] == 3 and doc["metadata"]["noise"]["n_repeats"] == 100


def test_figure4_rows():
    rep = run_figure4(config(("phi2",), noise=NoiseModel(seed=1)))
    row = rep.rows[0]
    a = row["analytic"]
    assert (a["C_d"], a["C_v"], a["C_p"]) == pytest.approx((0.8071, 0.5904, 1.0), abs=1e-4)
    assert a["inequality_ok"] and row["checks"]["simulated_inequality"]
    assert row["reference"]["C_v"] == 0.6158
    assert row["simulated"]["fidelity"] > 0.98
    assert rep.passed


def test_figure4_simulated_statistics():
    ok = 0
    runs = 20
    for seed in range(runs):
        rep = run_figure4(config(noise=NoiseModel(seed=seed)))
        ok += sum(r["checks"]["simulated_within_tol"] for r in rep.rows)
    assert ok / (4 * runs) >= 0.95


def test_figure5_rows():
    cfg = config(("phi1",), noise=NoiseModel(seed=2))
    cfg.states.append(("mixed", preset_state("mixed")))
    rep = run_figure5(cfg)
    phi1, mixed = rep.rows
    assert abs(phi1["analytic"]["residual"]) < 1e-12
    assert mixed["analytic"] == {"C_p_sq": 0.0, "C_d_sq_plus_C_v_sq": 0.0, "residual": 0.0}
    assert mixed["reference"] is None
    assert abs(phi1["simulated"]["residual"]) < 0.05
    assert phi1["simulated"]["residual_std_error"] > 0
    assert phi1["reference"]["max_residual"] == 0.0406


def test_rows_carry_all_value_groups():
    for runner in (run_figure3, run_figure4, run_figure5):
        rep = runner(config(("phi3",), analytic_only=True, bootstrap=100))
        for row in rep.rows:
            assert {"analytic", "simulated", "reference", "checks"} <= set(row)


def test_report_determinism_with_simulation():
    cfg = dict(noise=NoiseModel(seed=17), bootstrap=100)
    a = run_figure5(config(("phi4",), **cfg)).to_json()
    b = run_figure5(config(("phi4",), **cfg)).to_json()
    assert a == b


def test_main_convention_note():
    rep = run_figure4(config(("phi1",), analytic_only=True, convention=MAIN_TEXT))
    assert rep.notes == [MAIN_NOTE]
    assert rep.metadata["convention"] == "main"
    assert rep.rows[0]["analytic"]["C_d"] == pytest.approx(0.1710, abs=1e-4)
    assert not run_figure4(config(("phi1",), analytic_only=True)).notes


def test_property_suite_default_passes():
    summary = run_property_suite(seed=0, n_states=1000)
    assert summary["passed"] and summary["total_violations"] == 0


def test_property_suite_catches_mutation():
    def broken(rho, phi, conv=APPENDIX, energy_unit=1.0):
        s = to_stokes(rho)
        flipped = from_stokes(StokesVector(s.s1, -s.s2, s.s3))
        return w_phi(flipped, phi, conv, energy_unit)

    summary = run_property_suite(seed=0, n_states=1000, w_phi_fn=broken)
    assert not summary["passed"]
    assert summary["first_failure"]["check"].startswith("w_phi_consistency")
    with pytest.raises(ValueError):
        run_property_suite(n_states=10)


@pytest.mark.slow
def test_property_suite_large_runtime():
    summary = run_property_suite(seed=1, n_states=100_000)
    assert summary["passed"]
    assert summary["elapsed_s"] < 60


# -- command line ------------------------------------------------------------


def test_cli_capacities(tmp_path, capsys):
    assert cli.main(["capacities", "--state", "phi1", "--out", str(tmp_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["phi1"]["c_d"] == pytest.approx(0.4698, abs=5e-4)
    assert doc["phi1"]["E_joules"] == 2.45e-19
    assert (tmp_path / "capacities.json").exists()


def test_cli_scan(tmp_path):
    assert cli.main(["scan", "--state", "phi2", "--points", "32", "--out", str(tmp_path)]) == 0
    data = np.loadtxt(tmp_path / "scan_phi2.csv", delimiter=",", skiprows=1)
    assert data.shape == (32, 2)
    assert json.loads((tmp_path / "scan_phi2.json").read_text())["convention"] == "appendix"


def test_cli_simulate_then_tomo(tmp_path, capsys):
    assert cli.main(["simulate", "--state", "phi1", "--seed", "3", "--out", str(tmp_path)]) == 0
    counts_file = tmp_path / "counts_phi1.csv"
    assert counts_file.read_text().startswith("axis,repeat,n0,n1\n")
    capsys.readouterr()
    assert cli.main(["tomo", "--counts", str(counts_file), "--state", "phi1"]) == 0
    doc = json.loads(capsys.readouterr().out)["counts_phi1"]
    assert doc["fidelity"] > 0.98 and doc["converged"]


def test_cli_tomo_bootstrap(capsys):
    assert cli.main(["tomo", "--state", "phi3", "--bootstrap", "100"]) == 0
    doc = json.loads(capsys.readouterr().out)["phi3"]
    assert doc["capacities"]["std_errors"]["valid"]


def test_cli_reproduce_exit_codes(tmp_path, capsys):
    assert cli.main(["reproduce", "--figure", "4", "--analytic-only", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "figure4_report.json").read_text())["passed"]
    assert cli.main(["reproduce", "--figure", "3", "--state", "phi1", "--counts-per-axis", "200",
                     "--repeats", "10"]) in (0, 1)
    assert cli.main(["capacities", "--state", "nosuchstate"]) == 2


def test_cli_proptest(tmp_path, capsys):
    assert cli.main(["proptest", "--n-states", "1000", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "proptest.json").read_text())["passed"]


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
