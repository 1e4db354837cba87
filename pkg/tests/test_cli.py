"""End-to-end command runs against the documented exit-code contract.

Commands are driven through cli.main with temp directories; the replay
tests compare raw bytes, which is the reproducibility guarantee the CSV
headers advertise.
"""

import json

import pytest

from penergy.cli import (
    EXIT_CONFIG,
    EXIT_LAW_FAILURE,
    EXIT_NUMERIC,
    EXIT_PASS,
    main,
)
from penergy.pl import PLFunction


def write_config(tmp_path, name="config.json", **entries):
    path = tmp_path / name
    path.write_text(json.dumps(entries))
    return str(path)


def read_header(path):
    out = {}
    for line in path.read_text().splitlines():
        if not line.startswith("# "):
            break
        key, _, value = line[2:].partition("=")
        out[key] = value
    return out


# -- validate-form ------------------------------------------------------------


def test_validate_form_pl_passes(tmp_path):
    cfg = write_config(tmp_path, seed=5)
    assert main(["--config", cfg, "--out", str(tmp_path), "validate-form"]) \
        == EXIT_PASS
    report = tmp_path / "validate_form.csv"
    header = read_header(report)
    assert header["passed"] == "true"
    assert header["config.trials"] == "64"
    body = report.read_text()
    assert "clarkson_CI3" in body
    assert "strong_locality" in body


def test_validate_form_graph_notes_deviation(tmp_path):
    cfg = write_config(
        tmp_path, seed=5,
        form={"kind": "graph", "p": 2.0, "vertices": 4,
              "edges": [[0, 1, 1.0], [1, 2, 1.0], [2, 3, 1.0], [3, 0, 1.0]]})
    assert main(["--config", cfg, "--out", str(tmp_path), "validate-form"]) \
        == EXIT_PASS
    body = (tmp_path / "validate_form.csv").read_text()
    assert "skipped: model deviation" in body


def test_validate_form_rejects_small_p(tmp_path):
    cfg = write_config(tmp_path, seed=5, form={"kind": "pl", "p": 0.5})
    assert main(["--config", cfg, "validate-form"]) == EXIT_CONFIG


def test_unknown_config_key_rejected(tmp_path):
    cfg = write_config(tmp_path, seed=5, frobnicate=1)
    assert main(["--config", cfg, "validate-form"]) == EXIT_CONFIG


def test_seed_is_mandatory(tmp_path):
    cfg = write_config(tmp_path, trials=4)
    assert main(["--config", cfg, "validate-form"]) == EXIT_CONFIG


def test_config_must_be_object(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("[1, 2]")
    assert main(["--config", str(path), "validate-form"]) == EXIT_CONFIG
    path.write_text("{not json")
    assert main(["--config", str(path), "validate-form"]) == EXIT_CONFIG


# -- build-measure ------------------------------------------------------------


def test_build_measure_identity(tmp_path):
    cfg = write_config(tmp_path, seed=5, resolution=128)
    assert main(["--config", cfg, "--out", str(tmp_path), "--plot",
                 "build-measure"]) == EXIT_PASS
    report = tmp_path / "build_measure.csv"
    header = read_header(report)
    assert float(header["sup_rel_gap"]) <= 1e-4
    assert float(header["total_mass"]) == pytest.approx(1.0, rel=1e-7)
    assert (tmp_path / "build_measure.svg").exists()


def test_build_measure_constant_is_zero(tmp_path):
    cfg = write_config(tmp_path, seed=5, resolution=64,
                       function={"kind": "constant", "value": 0.7})
    assert main(["--config", cfg, "--out", str(tmp_path),
                 "build-measure"]) == EXIT_PASS
    report = tmp_path / "build_measure.csv"
    assert float(read_header(report)["total_mass"]) == 0.0
    for line in report.read_text().splitlines():
        if line.startswith("#") or line.startswith("cell_lo"):
            continue
        cells = line.split(",")
        assert float(cells[2]) == 0.0


def test_build_measure_tent_p3(tmp_path):
    cfg = write_config(tmp_path, seed=5, resolution=128,
                       form={"kind": "pl", "p": 3.0},
                       function={"kind": "tent", "height": 1.0})
    assert main(["--config", cfg, "--out", str(tmp_path),
                 "build-measure"]) == EXIT_PASS
    header = read_header(tmp_path / "build_measure.csv")
    assert float(header["sup_rel_gap"]) <= 1e-4
    assert float(header["energy"]) == pytest.approx(8.0, rel=1e-12)


def test_build_measure_needs_pl_form(tmp_path):
    cfg = write_config(
        tmp_path, seed=5,
        form={"kind": "graph", "p": 2.0, "vertices": 3,
              "edges": [[0, 1, 1.0], [1, 2, 1.0]]})
    assert main(["--config", cfg, "build-measure"]) == EXIT_CONFIG


# -- check-laws ---------------------------------------------------------------

FAST_LAWS = ["locality", "measure_clarkson", "measure_triangle",
             "total_mass"]


def test_check_laws_passes_and_replays(tmp_path):
    cfg = write_config(tmp_path, seed=11, trials=2, laws=FAST_LAWS)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "check-laws"]) \
        == EXIT_PASS
    first = (out / "check_laws.csv").read_bytes()
    assert main(["--config", cfg, "--out", str(out), "--jobs", "2",
                 "check-laws"]) == EXIT_PASS
    assert (out / "check_laws.csv").read_bytes() == first
    rows = [l for l in first.decode().splitlines()
            if not l.startswith("#")]
    assert rows[0] == "law,trials,worst_slack,tolerance,status"
    assert len(rows) == 1 + len(FAST_LAWS)


def test_check_laws_seed_changes_bytes(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, seed=11, trials=2, laws=["measure_triangle"])
    main(["--config", cfg, "--out", str(out), "check-laws"])
    first = (out / "check_laws.csv").read_bytes()
    main(["--config", cfg, "--out", str(out), "--seed", "12", "check-laws"])
    assert (out / "check_laws.csv").read_bytes() != first


def test_check_laws_crossed_weights(tmp_path):
    cfg = write_config(tmp_path, seed=3, trials=2, laws=["domination"],
                       domination_weight=[[0.0, 0.5, 2.0], [0.5, 1.0, 0.5]])
    assert main(["--config", cfg, "--out", str(tmp_path), "check-laws"]) \
        == EXIT_CONFIG


def test_check_laws_rejects_graph_form(tmp_path):
    cfg = write_config(
        tmp_path, seed=3,
        form={"kind": "graph", "p": 2.0, "vertices": 3,
              "edges": [[0, 1, 1.0], [1, 2, 1.0]]})
    assert main(["--config", cfg, "check-laws"]) == EXIT_CONFIG


def test_check_laws_unknown_law(tmp_path):
    cfg = write_config(tmp_path, seed=3, laws=["no_such_law"])
    assert main(["--config", cfg, "check-laws"]) == EXIT_CONFIG


# -- ks-energy ----------------------------------------------------------------


def test_ks_energy_flags_only(tmp_path):
    assert main(["--out", str(tmp_path), "--plot", "ks-energy",
                 "--space", "interval", "--n", "500", "--p", "2",
                 "--profile", "sine"]) == EXIT_PASS
    report = tmp_path / "ks_energy.csv"
    lines = report.read_text().splitlines()
    data = [l for l in lines if not l.startswith("#")]
    assert data[0] == "r,J,sup_so_far"
    assert len(data) >= 4
    assert read_header(report)["divergent"] == "false"
    assert (tmp_path / "ks_energy.svg").exists()


def test_ks_energy_step_flagged(tmp_path):
    assert main(["--out", str(tmp_path), "ks-energy", "--n", "2000",
                 "--profile", "step"]) == EXIT_PASS
    assert read_header(tmp_path / "ks_energy.csv")["divergent"] == "true"


def test_ks_energy_profile_file(tmp_path):
    prof = tmp_path / "profile.json"
    prof.write_text(PLFunction.tent(height=1.0).to_json())
    assert main(["--out", str(tmp_path), "ks-energy", "--n", "1000",
                 "--profile", "file", "--profile-file", str(prof)]) \
        == EXIT_PASS
    extrapolated = float(read_header(tmp_path / "ks_energy.csv")
                         ["extrapolated"])
    assert extrapolated == pytest.approx(4.0 / 3.0, rel=0.02)


def test_ks_energy_profile_file_needs_path(tmp_path):
    assert main(["--out", str(tmp_path), "ks-energy",
                 "--profile", "file"]) == EXIT_CONFIG


def test_ks_energy_bad_r_sequence(tmp_path):
    assert main(["--out", str(tmp_path), "ks-energy",
                 "--r-list", "0.01,0.05"]) == EXIT_CONFIG


def test_ks_energy_torus(tmp_path):
    assert main(["--out", str(tmp_path), "ks-energy", "--space", "torus",
                 "--n", "32", "--profile", "sine"]) == EXIT_PASS


# -- sg-renorm ----------------------------------------------------------------


def test_sg_renorm_p2(tmp_path):
    cfg = write_config(tmp_path, seed=1, p_list=[2.0])
    assert main(["--config", cfg, "--out", str(tmp_path), "sg-renorm"]) \
        == EXIT_PASS
    rows = [l for l in (tmp_path / "sg_renorm.csv").read_text().splitlines()
            if not l.startswith("#")]
    p, rho, residual, iterations, converged = rows[1].split(",")
    assert abs(float(rho) - 5.0 / 3.0) <= 1e-8
    assert float(residual) <= 1e-8
    assert converged == "true"


def test_sg_renorm_empty_p_list(tmp_path):
    cfg = write_config(tmp_path, seed=1, p_list=[])
    assert main(["--config", cfg, "sg-renorm"]) == EXIT_CONFIG


# -- entry point --------------------------------------------------------------


def test_help_exits_clean(capsys):
    assert main(["--help"]) == EXIT_PASS
    assert "validate-form" in capsys.readouterr().out


def test_missing_command_is_config_error(capsys):
    assert main([]) == EXIT_CONFIG
    capsys.readouterr()


def test_bad_jobs_rejected(tmp_path):
    cfg = write_config(tmp_path, seed=1)
    assert main(["--config", cfg, "--jobs", "0", "validate-form"]) \
        == EXIT_CONFIG


def test_exit_codes_are_distinct():
    assert len({EXIT_PASS, EXIT_LAW_FAILURE, EXIT_CONFIG, EXIT_NUMERIC}) == 4
