"""INI config loading, dotted overrides, and the command line front end."""

import csv
import json

import numpy as np
import pytest

from quadctrl import ConfigError
from quadctrl.cli import main
from quadctrl.config import RunConfig, load_config, parse_overrides

FULL_INI = """\
[model]
theta1 = 0.0
theta2 = 0.0
sigma11 = 1.0
sigma12 = 0.0
sigma22 = 1.0
gamma = 1.0

[cost]
a = 1.0
b1 = 1.0
b2 = 0.0

[grid]
l1 = 8.0
l2 = 8.0
n1 = 32
n2 = 32

[solver]
omega = 1.2
"""


def write_ini(tmp_path, text=FULL_INI, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestLoadConfig:
    def test_defaults_describe_the_standard_fixture(self):
        cfg = RunConfig.default()
        assert cfg.cost.a == 1.0 and cfg.cost.b1 == 1.0 and cfg.cost.b2 == 0.0
        assert cfg.model.gamma == 1.0
        assert np.array_equal(cfg.model.sigma, np.eye(2))
        assert (cfg.grid.L1, cfg.grid.L2, cfg.grid.n1, cfg.grid.n2) == (8.0, 8.0, 256, 256)
        assert cfg.solver.omega == 1.5
        assert cfg.sim.t is None and cfg.sim.tail_tol is None

    def test_file_values_and_override_precedence(self, tmp_path):
        path = write_ini(tmp_path)
        assert load_config(path).solver.omega == 1.2
        cfg = load_config(path, overrides=["solver.omega=1.7", "grid.n1=64"])
        assert cfg.solver.omega == 1.7
        assert cfg.grid.n1 == 64
        assert cfg.grid.n2 == 32

    def test_unknown_section_and_key_are_named(self):
        with pytest.raises(ConfigError, match="unknown config section 'foo'"):
            load_config(overrides=["foo.bar=1"])
        with pytest.raises(ConfigError, match="unknown config key 'solver.zeta'"):
            load_config(overrides=["solver.zeta=1"])

    def test_horizon_and_tail_tol_are_exclusive(self):
        with pytest.raises(ConfigError, match="not both"):
            load_config(overrides=["sim.t=5", "sim.tail_tol=1e-4"])
        assert load_config(overrides=["sim.t=5"]).sim.t == 5.0
        assert load_config(overrides=["sim.tail_tol=1e-5"]).sim.tail_tol == 1e-5

    def test_config_file_must_pin_the_problem(self, tmp_path):
        text = FULL_INI.replace("gamma = 1.0\n", "")
        with pytest.raises(ConfigError, match="missing required config key 'model.gamma'"):
            load_config(write_ini(tmp_path, text))

    def test_defaults_need_no_file_sections(self):
        # without a file the physical defaults apply; only explicit values
        # are validated
        assert load_config().model.gamma == 1.0

    def test_type_errors_name_key_and_type(self):
        with pytest.raises(ConfigError, match=r"'grid.n1'.*'abc'.*int"):
            load_config(overrides=["grid.n1=abc"])
        with pytest.raises(ConfigError, match=r"'model.gamma'.*float"):
            load_config(overrides=["model.gamma=fast"])

    @pytest.mark.parametrize("override,match", [
        ("solver.omega=2.5", r"\(0, 2\)"),
        ("solver.max_iters=0", "max_iters"),
        ("sim.n_paths=1", "n_paths"),
        ("sim.dt=0", "dt"),
        ("grid.n1=2", "at least 4"),
        ("grid.l2=-1", "positive"),
        ("output.formats=parquet", "unsupported format"),
    ])
    def test_range_validation(self, override, match):
        with pytest.raises(ConfigError, match=match):
            load_config(overrides=[override])

    def test_bad_physical_parameters_surface_as_config_errors(self):
        with pytest.raises(ConfigError):
            load_config(overrides=["cost.b2=1.0"])
        with pytest.raises(ConfigError):
            load_config(overrides=["model.gamma=0"])

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/nonexistent/run.ini")

    def test_parse_overrides(self):
        raw = parse_overrides(["model.gamma=2", "grid.n1 = 16", "model.theta1=-1"])
        assert raw == {"model": {"gamma": "2", "theta1": "-1"},
                       "grid": {"n1": "16"}}
        assert parse_overrides(None) == {}
        for bad in ("gamma2", "gamma=2", ".key=2", "model.=2"):
            with pytest.raises(ConfigError, match="section.key=value"):
                parse_overrides([bad])

    def test_flat_lists_every_pinned_setting(self):
        flat = RunConfig.default().flat()
        assert flat["model.gamma"] == 1.0
        assert flat["grid.n1"] == 256
        assert flat["output.formats"] == "csv"
        assert "sim.t" not in flat
        assert load_config(overrides=["sim.t=4"]).flat()["sim.t"] == 4.0


def run_cli(args, tmp_path, extra=()):
    argv = list(args) + ["--set", f"output.directory={tmp_path / 'out'}"]
    for item in extra:
        argv += ["--set", item]
    return main(argv)


class TestCli:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert capsys.readouterr().out.strip() == "quadctrl 0.1.0"

    def test_unknown_command_exits_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_config_errors_exit_1(self, tmp_path, capsys):
        code = run_cli(["stopping", "--set", "solver.zeta=1"], tmp_path)
        assert code == 1
        assert "config error" in capsys.readouterr().err

    def test_stopping_writes_field_and_sidecar(self, tmp_path, capsys):
        code = run_cli(["stopping"], tmp_path,
                       extra=["grid.n1=24", "grid.n2=24"])
        assert code == 0
        out = capsys.readouterr().out
        assert "stopping value written to" in out
        path = tmp_path / "out" / "stopping_value.csv"
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["x1", "x2", "value"]
        side = json.loads((tmp_path / "out" / "stopping_value.csv.meta.json").read_text())
        assert side["command"] == "stopping"
        assert side["model.gamma"] == 1.0
        # the solver may enlarge the x2 extent; the sidecar records the
        # grid actually written
        assert side["grid"]["n1"] == 24
        assert side["grid"]["n2"] >= 24
        assert len(rows) == 1 + 25 * (side["grid"]["n2"] + 1)

    def test_hjb_writes_control_value(self, tmp_path, capsys):
        code = run_cli(["hjb"], tmp_path, extra=["grid.n1=24", "grid.n2=24"])
        assert code == 0
        assert "control value written to" in capsys.readouterr().out
        assert (tmp_path / "out" / "control_value.csv").is_file()

    def test_boundary_command_reports_checks(self, tmp_path, capsys):
        code = run_cli(["boundary"], tmp_path,
                       extra=["grid.n1=32", "grid.n2=32"])
        assert code == 0
        out = capsys.readouterr().out
        assert "checks: ok=True" in out
        rows = list(csv.reader((tmp_path / "out" / "boundary.csv").open()))
        assert rows[0] == ["x2", "psi"]
        assert len(rows) >= 1 + 33     # one row per grid line, maybe enlarged
        psi = np.array([float(r[1]) for r in rows[1:]])
        assert np.all(np.diff(psi) >= -1e-12)

    def test_degenerate_boundary_exits_2(self, tmp_path, capsys):
        code = run_cli(["boundary"], tmp_path,
                       extra=["cost.b1=0", "grid.n1=16", "grid.n2=16"])
        assert code == 2
        assert "degenerate mode" in capsys.readouterr().err

    def test_nonconvergence_exits_3(self, tmp_path, capsys):
        code = run_cli(["stopping"], tmp_path,
                       extra=["solver.max_iters=5", "grid.n1=16", "grid.n2=16"])
        assert code == 3
        assert "converge" in capsys.readouterr().err

    def test_simulate_writes_rows_per_probe(self, tmp_path, capsys):
        code = run_cli(["simulate", "--policy", "axis",
                        "--x", "1,1", "--x", "0.5,2"], tmp_path,
                       extra=["sim.n_paths=16", "sim.dt=0.01", "sim.t=0.5"])
        assert code == 0
        out = capsys.readouterr().out
        assert out.count("J=") == 2
        rows = list(csv.DictReader((tmp_path / "out" / "sim_results.csv").open()))
        assert [r["policy"] for r in rows] == ["axis-reflect"] * 2
        assert [float(r["x2"]) for r in rows] == [1.0, 2.0]
        side = json.loads((tmp_path / "out" / "sim_results.csv.meta.json").read_text())
        assert side["policy"] == "axis-reflect"

    def test_simulate_rejects_malformed_probe(self, tmp_path, capsys):
        code = run_cli(["simulate", "--policy", "axis", "--x", "oops"],
                       tmp_path, extra=["sim.n_paths=16", "sim.t=0.5",
                                        "sim.dt=0.01", "grid.n1=16", "grid.n2=16"])
        assert code == 1
        assert "--x expects" in capsys.readouterr().err

    def test_oracle1d_command(self, tmp_path, capsys):
        code = run_cli(["oracle1d", "--x0", "0.5"], tmp_path,
                       extra=["sim.n_paths=64", "sim.dt=0.01", "sim.t=2"])
        assert code == 0
        out = capsys.readouterr().out
        assert "closed form:" in out and "monte carlo:" in out

    def test_verify_suite_on_a_small_grid(self, tmp_path, capsys):
        # 64 cells per side keeps the whole battery to a few seconds; path
        # count sized so the Monte Carlo bands cover the coarse-grid bias
        # near the boundary (the shipped fixture config runs at 256)
        code = run_cli(["verify"], tmp_path,
                       extra=["grid.n1=64", "grid.n2=64",
                              "sim.n_paths=200", "sim.dt=0.01"])
        out = capsys.readouterr().out
        assert "== verification suite ==" in out
        assert "overall:" in out
        report = tmp_path / "out" / "verify_report.csv"
        assert report.is_file()
        side = json.loads((tmp_path / "out" / "verify_report.csv.meta.json").read_text())
        assert code == 0, out
        assert side["passed"] is True
