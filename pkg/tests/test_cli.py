import csv
from pathlib import Path

import numpy as np
import pytest

from nanopnp import cli, scenarios

FIXTURES = Path(__file__).parent / "fixtures"


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_negative_sweep_is_accepted(tmp_path):
    rc = cli.main(["run", "trumpet", "--solver", "quasi1d", "--sweep", "-0.2:0.2:5", "--out", str(tmp_path)])
    assert rc == 0
    data = rows(tmp_path / "iv_quasi1d.csv")
    assert [float(r[0]) for r in data[1:]] == pytest.approx(np.linspace(-0.2, 0.2, 5).tolist())


def test_module_sweep_writes_iv_csv(tmp_path):
    rc = cli.main(["area1d", "sweep", "cylinder_charged", "--v-min", "-0.1", "--v-max", "0.1",
                   "--steps", "3", "--out", str(tmp_path)])
    assert rc == 0
    data = rows(tmp_path / "iv.csv")
    assert data[0] == ["voltage_V", "current_dimensionless", "current_A", "iterations", "residual"]
    assert len(data) == 4


def test_module_solve_with_fields(tmp_path):
    rc = cli.main(["quasi1d", "solve", "trumpet", "--voltage", "0.1", "--fields", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "iv.csv").exists()
    assert (tmp_path / "axial.csv").exists()
    assert (tmp_path / "fields.csv").exists()


def test_unknown_scenario_is_a_config_error(tmp_path):
    assert cli.main(["quasi1d", "solve", "nowhere.toml", "--out", str(tmp_path)]) == 1


def test_bad_sweep_steps(tmp_path):
    assert cli.main(["quasi1d", "sweep", "trumpet", "--v-min", "0", "--v-max", "0.1",
                     "--steps", "0", "--out", str(tmp_path)]) == 1


@pytest.mark.parametrize("name", ["trumpet", "conical"])
def test_scenario_dump_matches_fixture(tmp_path, name):
    out = tmp_path / f"{name}.toml"
    assert cli.main(["scenario", "dump", name, "--out", str(out)]) == 0
    assert out.read_bytes() == (FIXTURES / f"{name}.toml").read_bytes()
    assert scenarios.load(str(out)) == scenarios.builtin(name)


def test_gfuncs_dump(tmp_path):
    out = tmp_path / "g.csv"
    assert cli.main(["gfuncs", "dump", "--beta", "5", "--points", "4", "--out", str(out)]) == 0
    data = rows(out)
    assert data[0] == ["lambda", "g1_large", "g1_small", "g1_smooth", "g1_oracle", "g2"]
    assert len(data) == 5
    oracle = np.array([float(r[4]) for r in data[1:]])
    smooth = np.array([float(r[3]) for r in data[1:]])
    assert np.all(np.abs(smooth / oracle - 1) < 0.15)


def test_radial_dump(tmp_path):
    out = tmp_path / "psi.csv"
    assert cli.main(["radial", "dump", "--lambda", "0.1", "--beta", "10", "--points", "50",
                     "--out", str(out)]) == 0
    assert len(rows(out)) > 10


def test_missing_subcommand_exits():
    with pytest.raises(SystemExit):
        cli.main([])
