"""Tests for configuration parsing, artifact emission, and the CLI contract."""

import numpy as np
import pytest

from oldroyd.config import ConfigError, parse_config
from oldroyd.io import (
    CheckpointError,
    emit_plot,
    emit_report,
    emit_timeseries,
    read_checkpoint,
    read_timeseries,
    write_checkpoint,
)
from oldroyd.cli import cli
from oldroyd.rates import SCHEMA_COLUMNS, TimeSeries
from oldroyd.solver import SimState, SolverConfig, random_band_fields, run
from oldroyd.spectral import FluidParams, FourierGrid

from conftest import random_tensor_field, random_vector_field


MINIMAL = "mode = simulate\n"


def schema_series(exponents=None, n=24, t_lo=1.0, t_hi=100.0):
    t = np.geomspace(t_lo, t_hi, n)
    exponents = exponents or {}
    cols = {}
    for name in SCHEMA_COLUMNS:
        if name == "align_cos":
            cols[name] = 1.0 - 0.1 / (1.0 + t)
        elif name in ("div_u", "trace_tau_max"):
            cols[name] = np.zeros_like(t)
        else:
            cols[name] = 2.0 * (1.0 + t) ** exponents.get(name, -1.5)
    return TimeSeries(t, cols)


def flat_prediction_series():
    # matches predicted_exponents(0, 0)
    return schema_series({
        "u_l2sq": -1.5, "u_h1sq": -2.5, "u_h2sq": -3.5,
        "tau_l2sq": -2.5, "tau_h1sq": -3.5, "tau_h2sq": -3.5,
        "eps_l2sq": -3.5, "energy": -1.5,
    })


class TestParseConfig:
    def test_minimal_defaults(self):
        config = parse_config(MINIMAL)
        assert config.mode == "simulate"
        assert config.physics.omega == 0.5
        assert config.physics.a == 0.0
        assert config.grid.box_scale == 16.0
        assert config.grid.n_per_axis == 64
        assert config.solver.integrator == "etd_heun"

    def test_range_error_names_field(self):
        text = "mode = simulate\n[physics]\nomega = 1.2\n"
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        issues = info.value.issues
        assert len(issues) == 1
        assert issues[0].field == "physics.omega"
        assert issues[0].line == 3

    def test_multiple_errors_reported_together(self):
        text = (
            "mode = simulate\n"
            "[physics]\n"
            "omega = 1.2\n"
            "a = 7\n"
            "[grid]\n"
            "n = 63\n"
        )
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        fields = [i.field for i in info.value.issues]
        assert fields == ["physics.omega", "physics.a", "grid.n"]

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError) as info:
            parse_config("mode = simulate\n[physics]\nviscosity = 2\n")
        assert info.value.issues[0].message == "unknown key"

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError) as info:
            parse_config("[turbulence]\nmodel = les\n")
        assert info.value.issues[0].field == "turbulence"

    def test_random_band_needs_seed(self):
        text = "[initial.u]\nfamily = random_band\n"
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert "seed" in info.value.issues[0].field

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError) as info:
            parse_config("[physics]\nomega = 0.4\nomega = 0.6\n")
        assert "duplicate" in info.value.issues[0].message

    def test_syntax_error_line_number(self):
        with pytest.raises(ConfigError) as info:
            parse_config("[physics]\nomega 0.4\n")
        assert info.value.issues[0].line == 2

    def test_comments_and_blanks_ignored(self):
        text = (
            "# run configuration\n"
            "mode = linear\n"
            "\n"
            "[initial.u]  # velocity data\n"
            "family = power_gauss\n"
            "q = 1.0\n"
        )
        config = parse_config(text)
        assert config.mode == "linear"
        assert config.initial_u.family == "power_gauss"
        assert config.initial_u.q == 1.0

    def test_decay_characters_derived_and_overridable(self):
        config = parse_config(
            "[initial.u]\nfamily = power_gauss\nq = 1.0\n"
            "[initial.tau]\nfamily = lp_like\np = 1.5\n"
        )
        r_u, r_tau = config.decay_characters()
        assert r_u == 1.0
        assert r_tau == pytest.approx(-1.0)
        config = parse_config("[rates]\nr_u = 0.25\n")
        assert config.decay_characters() == (0.25, None)


class TestTimeseriesCsv:
    def test_round_trip_exact(self, tmp_path):
        series = flat_prediction_series()
        path = tmp_path / "series.csv"
        emit_timeseries(series, path)
        back = read_timeseries(path)
        assert np.array_equal(back.times, series.times)
        for name in SCHEMA_COLUMNS:
            assert np.array_equal(back.columns[name], series.columns[name])

    def test_header_schema(self, tmp_path):
        path = tmp_path / "series.csv"
        emit_timeseries(flat_prediction_series(), path)
        header = path.read_text().splitlines()[0]
        assert header == ("t,u_l2sq,u_h1sq,u_h2sq,tau_l2sq,tau_h1sq,tau_h2sq,"
                          "eps_l2sq,div_u,trace_tau_max,energy,align_cos")

    def test_empty_series_header_only(self, tmp_path):
        empty = TimeSeries(np.array([]), {name: np.array([]) for name in SCHEMA_COLUMNS})
        path = tmp_path / "empty.csv"
        emit_timeseries(empty, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 1

    def test_missing_column_rejected(self, tmp_path):
        series = TimeSeries(np.array([1.0]), {"u_l2sq": np.array([1.0])})
        with pytest.raises(ValueError):
            emit_timeseries(series, tmp_path / "bad.csv")


class TestReports:
    def test_deterministic_and_parseable(self, tmp_path):
        import json

        report = {"window": [5.0, 50.0], "records": [
            {"quantity": "eps_l2sq", "predicted_exponent": -3.5,
             "fitted_slope": -3.52, "stderr": 0.01, "window": [5.0, 50.0],
             "verdict": "pass"}]}
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        emit_report(report, p1)
        emit_report(report, p2)
        assert p1.read_bytes() == p2.read_bytes()
        parsed = json.loads(p1.read_text())
        assert parsed["records"][0]["quantity"] == "eps_l2sq"
        assert parsed["records"][0]["predicted_exponent"] == -3.5
        assert list(parsed["records"][0]) == [
            "quantity", "predicted_exponent", "fitted_slope", "stderr", "window", "verdict"]

    def test_rejects_non_finite(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report({"x": float("nan")}, tmp_path / "nan.json")


class TestCheckpoints:
    def make_state(self, seed=1, time=0.75):
        grid = FourierGrid(n_per_axis=8, box_scale=2.0)
        u = random_vector_field(grid, seed=seed, solenoidal=True)
        tau = random_tensor_field(grid, seed=seed + 1)
        params = FluidParams(omega=0.3, a=-0.5, reynolds=1.5, weissenberg=0.8)
        return SimState(time=time, u=u, tau=tau, params=params)

    def test_bit_exact_round_trip(self, tmp_path):
        state = self.make_state()
        path = tmp_path / "state.oldb"
        write_checkpoint(path, state)
        back = read_checkpoint(path)
        assert back.time == state.time
        assert back.params == state.params
        assert back.grid == state.grid
        assert np.array_equal(back.u.coeffs, state.u.coeffs)
        assert np.array_equal(back.tau.coeffs, state.tau.coeffs)
        # writing again reproduces the same bytes
        path2 = tmp_path / "state2.oldb"
        write_checkpoint(path2, back)
        assert path.read_bytes() == path2.read_bytes()

    def test_version_mismatch_hard_error(self, tmp_path):
        path = tmp_path / "state.oldb"
        write_checkpoint(path, self.make_state())
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="version"):
            read_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "state.oldb"
        write_checkpoint(path, self.make_state())
        blob = bytearray(path.read_bytes())
        blob[0:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="magic"):
            read_checkpoint(path)

    def test_truncated_body(self, tmp_path):
        path = tmp_path / "state.oldb"
        write_checkpoint(path, self.make_state())
        blob = path.read_bytes()
        path.write_bytes(blob[:-16])
        with pytest.raises(CheckpointError, match="bytes"):
            read_checkpoint(path)

    def test_resume_reproduces_run(self, tmp_path):
        grid = FourierGrid(n_per_axis=16, box_scale=2.0)
        u, tau = random_band_fields(grid, k_lo=0.4, k_hi=1.5, amplitude=0.05, seed=5)
        state = SimState(time=0.0, u=u, tau=tau, params=FluidParams())
        full = run(state, SolverConfig(dt=0.1, t_end=1.0))
        half = run(state, SolverConfig(dt=0.1, t_end=0.5), out_dir=tmp_path)
        resumed_state = read_checkpoint(tmp_path / "checkpoint_final.oldb")
        resumed = run(resumed_state, SolverConfig(dt=0.1, t_end=1.0))
        i_full = np.searchsorted(full.times, resumed.times[-1])
        for name in ("u_l2sq", "tau_l2sq", "eps_l2sq", "energy"):
            a = full.columns[name][i_full]
            b = resumed.columns[name][-1]
            assert b == pytest.approx(a, rel=1e-12)


class TestPlots:
    def test_byte_identical_output(self, tmp_path):
        series = flat_prediction_series()
        p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
        emit_plot(series, ["u_l2sq", "tau_l2sq"], p1, guides=[("slope -1.5", -1.5)])
        emit_plot(series, ["u_l2sq", "tau_l2sq"], p2, guides=[("slope -1.5", -1.5)])
        assert p1.read_bytes() == p2.read_bytes()

    def test_legend_contains_both_names(self, tmp_path):
        path = tmp_path / "plot.svg"
        emit_plot(flat_prediction_series(), ["u_l2sq", "tau_l2sq"], path)
        text = path.read_text()
        assert "u_l2sq" in text and "tau_l2sq" in text
        assert text.startswith("<svg ")

    def test_unknown_column_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown column"):
            emit_plot(flat_prediction_series(), ["nope"], tmp_path / "x.svg")


class TestCli:
    def write_config(self, tmp_path, text):
        path = tmp_path / "run.conf"
        path.write_text(text)
        return str(path)

    def test_verify_bounds_clean(self, capsys):
        code = cli(["verify-bounds", "--omega", "0.5", "--radius", "1",
                    "--grid-points", "50"])
        out = capsys.readouterr().out
        assert code == 0
        assert "violations: 0" in out

    def test_unknown_flag_exits_1(self, capsys):
        code = cli(["verify-bounds", "--omega", "0.5", "--radius", "1", "--bogus"])
        err = capsys.readouterr().err
        assert code == 1
        assert "usage" in err and "ERROR 1" in err

    def test_unknown_command_exits_1(self):
        assert cli(["frobnicate"]) == 1

    def test_config_errors_exit_1(self, tmp_path, capsys):
        conf = self.write_config(tmp_path, "[physics]\nomega = 1.5\nbogus = 1\n")
        code = cli(["decay-character", "--config", conf])
        err = capsys.readouterr().err
        assert code == 1
        assert err.count("ERROR 1") == 2

    def test_decay_character_flow(self, tmp_path, capsys):
        conf = self.write_config(
            tmp_path,
            "mode = decay-character\n"
            "[initial.u]\nfamily = power_gauss\nq = 1.0\n"
            f"[output]\ndirectory = {tmp_path / 'out'}\n",
        )
        code = cli(["decay-character", "--config", conf])
        out = capsys.readouterr().out
        assert code == 0
        assert "u: r* = " in out
        fitted = float(out.split("r* = ")[1].split()[0])
        assert fitted == pytest.approx(1.0, abs=0.05)
        assert (tmp_path / "out" / "decay_character.json").exists()

    def test_fit_pass_and_fail_exit_codes(self, tmp_path, capsys):
        import json

        series_path = tmp_path / "series.csv"
        emit_timeseries(flat_prediction_series(), series_path)
        conf = self.write_config(
            tmp_path,
            "mode = fit\n[rates]\nr_u = 0.0\nr_tau = 0.0\nt_lo = 1\nt_hi = 100\n"
            "tolerance = 0.05\n"
            f"[output]\ndirectory = {tmp_path / 'out'}\n",
        )
        assert cli(["fit", "--series", str(series_path), "--config", conf]) == 0
        report = json.loads((tmp_path / "out" / "fit_report.json").read_text())
        eps = [r for r in report["records"] if r["quantity"] == "eps_l2sq"]
        assert eps and eps[0]["predicted_exponent"] == -3.5
        capsys.readouterr()

        wrong = schema_series()  # every norm decays like -1.5
        wrong_path = tmp_path / "wrong.csv"
        emit_timeseries(wrong, wrong_path)
        code = cli(["fit", "--series", str(wrong_path), "--config", conf,
                    "--out", str(tmp_path / "verdict.json")])
        assert code == 3
        assert (tmp_path / "verdict.json").exists()

    def test_simulate_and_plot_flow(self, tmp_path, capsys):
        out = tmp_path / "out"
        conf = self.write_config(
            tmp_path,
            "mode = simulate\n"
            "[grid]\nn = 16\nbox_scale = 2.0\n"
            "[initial.u]\nfamily = random_band\nk_lo = 0.4\nk_hi = 1.5\n"
            "amplitude = 0.01\nseed = 7\n"
            "[solver]\ndt = 0.1\nt_end = 0.5\n"
            f"[output]\ndirectory = {out}\n",
        )
        assert cli(["simulate", "--config", conf]) == 0
        assert (out / "timeseries.csv").exists()
        assert (out / "checkpoint_final.oldb").exists()
        code = cli(["plot", "--series", str(out / "timeseries.csv"),
                    "--columns", "u_l2sq,tau_l2sq", "--out", str(out / "p.svg"),
                    "--guide", "-1.5"])
        assert code == 0
        assert (out / "p.svg").exists()

    def test_simulate_resume_matches(self, tmp_path, capsys):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        base = (
            "mode = simulate\n"
            "[grid]\nn = 16\nbox_scale = 2.0\n"
            "[initial.u]\nfamily = random_band\nk_lo = 0.4\nk_hi = 1.5\n"
            "amplitude = 0.01\nseed = 9\n"
        )
        conf_half = self.write_config(
            tmp_path, base + f"[solver]\ndt = 0.1\nt_end = 0.5\n[output]\ndirectory = {out_a}\n")
        assert cli(["simulate", "--config", conf_half]) == 0
        conf_full = (tmp_path / "full.conf")
        conf_full.write_text(
            base + f"[solver]\ndt = 0.1\nt_end = 1.0\n[output]\ndirectory = {out_b}\n")
        assert cli(["simulate", "--config", str(conf_full)]) == 0
        resumed_dir = tmp_path / "resumed"
        conf_resume = (tmp_path / "resume.conf")
        conf_resume.write_text(
            base + f"[solver]\ndt = 0.1\nt_end = 1.0\n[output]\ndirectory = {resumed_dir}\n")
        assert cli(["simulate", "--config", str(conf_resume),
                    "--resume", str(out_a / "checkpoint_final.oldb")]) == 0
        full = read_timeseries(out_b / "timeseries.csv")
        resumed = read_timeseries(resumed_dir / "timeseries.csv")
        assert resumed.times[-1] == pytest.approx(full.times[-1])
        for name in ("u_l2sq", "tau_l2sq", "energy"):
            assert resumed.columns[name][-1] == pytest.approx(
                full.columns[name][-1], rel=1e-12)

    def test_missing_series_file(self, tmp_path, capsys):
        conf = self.write_config(tmp_path, "[rates]\nr_u = 0.0\n")
        code = cli(["fit", "--series", str(tmp_path / "absent.csv"), "--config", conf])
        assert code == 1
