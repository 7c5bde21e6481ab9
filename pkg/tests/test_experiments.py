import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distcorr.cli import main
from distcorr.experiments import (
    ConfigError,
    PRESETS,
    ResultTable,
    ScenarioConfig,
    figure_preset,
    load_config,
    read_results,
    run_scenario,
    write_results,
)
from distcorr.experiments.config import ChannelSpec, FrontEndSpec, Sweep
from distcorr.experiments.results import format_csv
from distcorr.experiments.runner import realization_rng


def small(**kw):
    base = dict(channel=ChannelSpec("iid-rayleigh", 12, 2), front_end=FrontEndSpec("third-order"),
                sweep=Sweep("K", (1, 2)), seed=7, realizations=100, mc_samples=10_000)
    base.update(kw)
    return ScenarioConfig(**base)


def as_file(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


# --------------------------------------------------------------------------
# configuration

class TestConfig:
    @pytest.mark.parametrize("changes,field", [
        (dict(kappa=1.5), "kappa"),
        (dict(realizations=1), "realizations"),
        (dict(realizations=50), "realizations"),
        (dict(mc_samples=10), "mc-samples"),
        (dict(seed=-1), "seed"),
        (dict(seed=2**64), "seed"),
        (dict(schemes=()), "schemes"),
        (dict(schemes=("zf",)), "schemes"),
        (dict(schemes=("da-zf",)), "schemes"),
        (dict(correlation_mode="diag"), "correlation-mode"),
        (dict(metric="ber"), "metric"),
        (dict(sweep=Sweep("L", (1,))), "sweep.variable"),
        (dict(sweep=Sweep("K", ())), "sweep.values"),
        (dict(sweep=Sweep("M", (0,))), "sweep.values"),
        (dict(sweep=Sweep("b", (3,))), "sweep"),
        (dict(snr_db=(5.0, -5.0)), "snr-db"),
        (dict(hardware_cases=("bs",)), "hardware-cases"),
        (dict(metric="csi-sinr", schemes=("da-mmse",)), "schemes"),
        (dict(channel=ChannelSpec("iid-rayleigh", 0, 1)), "channel.M"),
        (dict(channel=ChannelSpec("ula", 4, 1)), "channel.kind"),
        (dict(channel=ChannelSpec("free-space-ula", 4, 2, ue_angles=(0.0, 70.0))), "channel.ue-angles"),
        (dict(front_end=FrontEndSpec("third-order", alpha=0.5)), "front-end.alpha"),
        (dict(front_end=FrontEndSpec("quantizer", bits=13)), "front-end.bits"),
    ])
    def test_field_level_errors(self, changes, field):
        with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
            small(**changes)

    def test_round_trip_and_hash(self):
        cfg = small(snr_db=(-10.0, 10.0), sweep=Sweep("M", (8, 16)),
                    channel=ChannelSpec("free-space-ula", 8, 2, ue_angles=(-5.0, 30.0)))
        data = json.loads(cfg.to_json())
        assert "mc-samples" in data and "front-end" in data and "correlation-mode" in data
        again = ScenarioConfig.from_dict(data)
        assert again == cfg
        assert again.config_hash() == cfg.config_hash()
        assert len(cfg.config_hash()) == 16
        assert small(seed=8).config_hash() != cfg.config_hash()

    def test_unknown_and_missing_fields(self):
        data = small().to_dict()
        with pytest.raises(ConfigError, match="bogus"):
            ScenarioConfig.from_dict({**data, "bogus": 1})
        del data["sweep"]
        with pytest.raises(ConfigError, match="sweep"):
            ScenarioConfig.from_dict(data)

    def test_load_config(self, tmp_path):
        cfg = small()
        assert load_config(as_file(tmp_path, cfg.to_dict())) == cfg
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_overrides(self):
        cfg = small().with_overrides(seed=3, realizations=None)
        assert cfg.seed == 3 and cfg.realizations == 100


class TestPresets:
    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_every_preset_is_valid(self, name):
        cfg = figure_preset(name)
        assert cfg.name == name
        assert any("antenna-spacing" in d for d in cfg.defaults)
        assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown(self):
        with pytest.raises(ConfigError):
            figure_preset("fig11")

    def test_reference_parameters(self):
        f3 = figure_preset("fig3")
        assert (f3.channel.M, f3.front_end.alpha, f3.front_end.backoff_db, f3.kappa, f3.snr_db) == \
            (200, 1 / 3, 7.0, 0.99, 0.0)
        assert f3.sweep.variable == "K"
        f6 = figure_preset("fig6")
        assert f6.channel.M == 100 and f6.front_end.bits == 6 and f6.sweep.values == tuple(range(1, 11))
        f7 = figure_preset("fig7")
        assert f7.channel.K == 1 and f7.sweep.values[0] == 10 and f7.sweep.values[-1] == 1000
        assert f7.hardware_cases == ("ideal", "ue-only", "bs-only", "ue+bs")
        f8 = figure_preset("fig8")
        assert f8.channel.K == 5 and f8.channel.M == 100 and f8.snr_db == (-10.0, 10.0)
        assert set(f8.sweep.values) == {"iid-rayleigh", "correlated-rayleigh", "free-space-ula"}


# --------------------------------------------------------------------------
# result tables

class TestResults:
    def test_empty_table_csv(self, tmp_path):
        t = ResultTable(["a", "b"], [], {"name": "x"})
        path = tmp_path / "t.csv"
        write_results(t, path)
        lines = path.read_text().splitlines()
        assert lines == ['# name: "x"', "a,b"]
        assert read_results(path) == t

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_round_trip(self, tmp_path, fmt):
        t = ResultTable(["x", "y_stderr"], [[1.0, 0.1], [2.5, math.nan], [1e-300, -3.0]],
                        {"seed": 3, "config": {"a": [1, 2]}})
        path = tmp_path / f"t.{fmt}"
        write_results(t, path, fmt)
        assert read_results(path) == t

    def test_csv_cells_are_doubles(self, tmp_path):
        t = ResultTable(["v"], [[1 / 3], [2e-17]])
        path = tmp_path / "t.csv"
        write_results(t, path)
        body = [l for l in path.read_text().splitlines() if not l.startswith("#")][1:]
        assert [float(x) for x in body] == [1 / 3, 2e-17]

    def test_write_error_has_path(self, tmp_path):
        with pytest.raises(OSError, match="missing"):
            write_results(ResultTable(["a"]), tmp_path / "missing" / "t.csv")

    def test_row_width_checked(self):
        with pytest.raises(ValueError):
            ResultTable(["a", "b"], [[1.0]])


# --------------------------------------------------------------------------
# runner

def test_realization_streams_are_independent_of_run_layout():
    a = realization_rng(5, 3).standard_normal(4)
    b = realization_rng(5, 3).standard_normal(4)
    c = realization_rng(5, 4).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@settings(max_examples=5, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), workers=st.integers(2, 3))
def test_worker_count_does_not_change_results(seed, workers):
    cfg = small(seed=seed, front_end=FrontEndSpec("composite", bits=3), sweep=Sweep("K", (2,)),
                channel=ChannelSpec("iid-rayleigh", 6, 2), realizations=100)
    assert run_scenario(cfg, workers=1) == run_scenario(cfg, workers=workers)


def test_same_seed_same_table():
    cfg = small()
    assert run_scenario(cfg) == run_scenario(cfg)
    assert run_scenario(cfg) != run_scenario(cfg.with_overrides(seed=8))


def test_metadata():
    t = run_scenario(small())
    md = t.metadata
    assert md["seed"] == 7 and md["realizations"] == 100 and md["sweep-variable"] == "K"
    assert md["config-hash"] == small().config_hash()
    assert ScenarioConfig.from_dict(md["config"]) == small()
    assert md["version"].startswith("v")


def test_paired_gap_sign_and_decay():
    cfg = small(channel=ChannelSpec("iid-rayleigh", 50, 1), sweep=Sweep("K", (1, 10)), realizations=300)
    t = run_scenario(cfg)
    for scheme in ("da-mmse", "da-mr"):
        gap, se = t.column(f"gap_{scheme}"), t.column(f"gap_{scheme}_stderr")
        assert np.all(gap >= -2 * se)
    g = t.column("gap_da-mmse")
    assert g[1] < g[0]


def test_hardware_cases_columns():
    cfg = small(sweep=Sweep("M", (8,)), channel=ChannelSpec("iid-rayleigh", 8, 1), correlation_mode="corr",
                hardware_cases=("ideal", "ue+bs"))
    t = run_scenario(cfg)
    assert "se_da-mmse_corr_ideal" in t.columns and "se_da-mr_corr_ue+bs" in t.columns
    assert t.column("se_da-mmse_corr_ideal")[0] > t.column("se_da-mmse_corr_ue+bs")[0]


@pytest.mark.parametrize("metric,kw,col", [
    ("distortion", dict(realizations=2), "ratio_db"),
    ("eigenvalues", dict(realizations=3, channel=ChannelSpec("iid-rayleigh", 8, 2)), "rank"),
    ("directivity", dict(realizations=5, schemes=("da-mr", "da-zf"), correlation_mode="corr",
                         sweep=Sweep("M", (10,))), "signal_da-zf"),
    ("quant-correlation", dict(realizations=2, front_end=FrontEndSpec("quantizer", bits=2),
                               sweep=Sweep("b", (1, 2))), "xi_eta"),
    ("csi-sinr", dict(realizations=3, schemes=("da-mr",), sweep=Sweep("snr-db", (0.0,))),
     "sinr_da-mr_corr_imperfect"),
])
def test_metric_tables(metric, kw, col):
    t = run_scenario(small(metric=metric, **kw))
    assert col in t.columns
    assert np.all(np.isfinite(t.column(col)))


def test_se_cdf_over_channel_models():
    cfg = small(metric="se-cdf", snr_db=(-10.0, 10.0), realizations=100,
                sweep=Sweep("channel", ("iid-rayleigh", "free-space-ula")))
    t = run_scenario(cfg)
    assert t.metadata["channel-labels"] == ["iid-rayleigh", "free-space-ula"]
    assert len(t.rows) == 2 * 100 * 2


# --------------------------------------------------------------------------
# command line

class TestCli:
    def test_run_scenario_file(self, tmp_path, capsys):
        path = as_file(tmp_path, small(realizations=100).to_dict())
        out = tmp_path / "r.json"
        assert main(["run", "--scenario", str(path), "--out", str(out), "--seed", "9"]) == 0
        t = read_results(out)
        assert t.metadata["seed"] == 9
        assert main(["run", "--scenario", str(path), "--seed", "9", "--format", "csv"]) == 0
        assert capsys.readouterr().out == format_csv(t)

    def test_run_figure_with_overrides(self, capsys):
        assert main(["run", "--figure", "fig3"]) == 0
        text = capsys.readouterr().out
        assert "ratio_db" in text and "# name: \"fig3\"" in text

    @pytest.mark.parametrize("argv", [
        ["run", "--figure", "fig99"],
        ["run", "--scenario", "/nonexistent/cfg.json"],
        ["run", "--figure", "fig6", "--mc-samples", "5"],
        ["quantizer", "--bits", "13"],
    ])
    def test_config_errors_exit_2(self, argv, capsys):
        assert main(argv) == 2
        assert "error" in capsys.readouterr().err

    def test_invalid_scenario_file_exit_2(self, tmp_path):
        data = small().to_dict()
        data["kappa"] = 2
        assert main(["run", "--scenario", str(as_file(tmp_path, data))]) == 2

    def test_numerical_failure_exit_3(self, tmp_path, capsys):
        cfg = small(metric="directivity", channel=ChannelSpec("iid-rayleigh", 1, 1), sweep=Sweep("M", (1,)),
                    schemes=("da-zf",), correlation_mode="corr", realizations=2)
        assert main(["run", "--scenario", str(as_file(tmp_path, cfg.to_dict()))]) == 3
        assert "numerical" in capsys.readouterr().err

    def test_argument_errors(self):
        with pytest.raises(SystemExit) as e:
            main(["run", "--figure", "fig3", "--workers", "0"])
        assert e.value.code == 2

    def test_presets_and_quantizer(self, capsys):
        assert main(["presets"]) == 0
        assert set(l.split("\t")[0] for l in capsys.readouterr().out.splitlines()) == set(PRESETS)
        assert main(["quantizer", "--bits", "2"]) == 0
        data = json.loads(capsys.readouterr().out)
        np.testing.assert_allclose(data["levels"][2:], [0.4528, 1.5104], atol=1e-4)
