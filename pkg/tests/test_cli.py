import json
import logging
import math

import pandas as pd
import pytest
from pydantic import ValidationError

from stepplate.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_TOLERANCE,
    TABLE1_REFERENCE,
    RunSpec,
    _report_diagnostics,
    _swept_config,
    load_plate_config,
    main,
    nearest_variant,
    peak_locations,
)
from stepplate.errors import ConfigFileError


class TestConfigLoading:

    @pytest.mark.parametrize("name", ["table1_free", "table1_free.json"])
    def test_bundled_by_name(self, name):
        config = load_plate_config(name)
        assert config.outer_bc == "free"
        assert [s.thickness for s in config.segments] == [0.2, 0.1]

    @pytest.mark.parametrize(
        "name",
        [
            "table1_free",
            "table1_sss",
            "table1_clamped",
            "step_location_free",
            "thickness_ratio_soft_ss",
            "thickness_ratio_hard_ss",
            "thin_clamped_homogeneous",
            "annulus_clamped_homogeneous",
            "three_step_clamped",
        ],
    )
    def test_all_bundled_configs_validate(self, name):
        assert load_plate_config(name).material.g == 1.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigFileError, match="not found"):
            load_plate_config(str(tmp_path / "nope.json"))

    def test_bad_json_reports_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "name": "x",\n  "segments": [\n}\n', encoding="utf-8")
        with pytest.raises(ConfigFileError, match="line"):
            load_plate_config(str(path))

    def test_invalid_fields_are_named(self, tmp_path):
        data = json.loads(load_plate_config("table1_free").model_dump_json())
        data["segments"] = []
        path = tmp_path / "empty.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        with pytest.raises(ConfigFileError, match="segments"):
            load_plate_config(str(path))


class TestRunSpec:

    def test_range_parsing(self):
        run = RunSpec(command="sweep", config="step_location_free", param="step_location", sweep_range="0.1:0.95:0.05")
        assert run.sweep_range == (0.1, 0.95, 0.05)
        values = run.sweep_values()
        assert len(values) == 18
        assert values[0] == 0.1
        assert values[-1] == pytest.approx(0.95)

    @pytest.mark.parametrize("text", ["1:0:0.1", "0:1:0", "0:1:-0.1", "0:1", "a:b:c"])
    def test_bad_ranges(self, text):
        with pytest.raises(ValidationError):
            RunSpec(command="sweep", config="step_location_free", param="step_location", sweep_range=text)

    def test_config_required(self):
        with pytest.raises(ValidationError):
            RunSpec(command="freqs")
        assert RunSpec(command="table1").config is None

    def test_expected_peaks(self):
        run = RunSpec(
            command="sweep", config="x", param="thickness_ratio", sweep_range="1:3:0.1", expect_peaks="2.2,1.8"
        )
        assert run.expect_peaks == (2.2, 1.8)

    @pytest.mark.parametrize(
        "fields",
        [
            {"command": "freqs", "config": "x", "bc": "both_ss"},
            {"command": "freqs", "config": "x", "expect_peaks": "2.2"},
            {"command": "sweep", "config": "x", "param": "power_index", "sweep_range": "0:1:0.5", "expect_peaks": ","},
        ],
    )
    def test_sweep_only_options(self, fields):
        with pytest.raises(ValidationError):
            RunSpec(**fields)


class TestSweepConfigs:

    def test_step_location(self):
        config = _swept_config(load_plate_config("table1_free"), "step_location", 0.25)
        assert config.segments[0].outer_radius == pytest.approx(0.5)

    def test_thickness_ratio(self):
        config = _swept_config(load_plate_config("thickness_ratio_soft_ss"), "thickness_ratio", 2.2)
        assert config.segments[0].thickness == pytest.approx(0.11)
        assert config.segments[0].tau == pytest.approx(2.2)

    def test_thinner_core_is_invalid(self):
        with pytest.raises(ValidationError):
            _swept_config(load_plate_config("thickness_ratio_soft_ss"), "thickness_ratio", 0.5)

    def test_power_index(self):
        config = _swept_config(load_plate_config("table1_free"), "power_index", 3.0)
        assert config.material.g == 3.0


class TestPeaks:

    def test_peak_locations(self):
        df = pd.DataFrame({"tau": [1.0, 1.5, 2.0], "beta_1": [4.0, 6.0, 5.0], "beta_2": [math.nan] * 3})
        assert peak_locations(df, "tau", ["beta_1"]) == [1.5]
        assert math.isnan(peak_locations(df, "tau", ["beta_2"])[0])

    def test_matching_variant(self):
        peaks = {"soft_ss": [2.2, 1.8, 3.0], "hard_ss": [2.2, 1.9, 3.0]}
        name, deviation, matched = nearest_variant(peaks, (2.2, 1.8), 0.1)
        assert name == "soft_ss"
        assert deviation == pytest.approx(0.0)
        assert matched

    def test_nearest_variant_is_flagged(self):
        peaks = {"soft_ss": [2.6, 1.5], "hard_ss": [2.4, 1.8]}
        name, deviation, matched = nearest_variant(peaks, (2.2, 1.8), 0.1)
        assert name == "hard_ss"
        assert deviation == pytest.approx(0.2)
        assert not matched

    def test_missing_peak_never_matches(self):
        name, deviation, matched = nearest_variant({"soft_ss": [math.nan, 1.8]}, (2.2, 1.8), 0.1)
        assert name == "soft_ss"
        assert deviation == math.inf
        assert not matched


class TestMain:

    def test_freqs_writes_csv(self, tmp_path):
        out = tmp_path / "modes.csv"
        argv = ["freqs", "--config", "thin_clamped_homogeneous", "--p-max", "0", "--modes", "1", "--csv", str(out)]
        code = main(argv)
        assert code == EXIT_OK
        df = pd.read_csv(out)
        assert list(df.columns) == ["mode", "p", "n", "frequency_hz", "beta"]
        assert df.loc[0, "mode"] == "(0,1)"
        assert df.loc[0, "beta"] == pytest.approx(10.2158, rel=5e-3)

    def test_sweep_writes_one_row_per_point(self, tmp_path):
        out = tmp_path / "sweep.csv"
        argv = ["sweep", "--config", "thin_clamped_homogeneous", "--param", "power_index", "--range", "0:1:0.5",
                "--modes", "1", "--p-max", "0", "--csv", str(out)]
        assert main(argv) == EXIT_OK
        df = pd.read_csv(out)
        assert list(df.columns) == ["power_index", "beta_1"]
        assert list(df["power_index"]) == [0.0, 0.5, 1.0]
        # homogeneous material: the index changes nothing
        assert df["beta_1"].nunique() == 1

    def test_sweep_both_simple_supports(self, tmp_path):
        out = tmp_path / "ss.csv"
        argv = ["sweep", "--config", "thin_clamped_homogeneous", "--param", "power_index", "--range", "0:1:0.5",
                "--modes", "1", "--p-max", "0", "--bc", "both_ss", "--csv", str(out)]
        assert main(argv) == EXIT_OK
        df = pd.read_csv(out)
        assert list(df.columns) == ["power_index", "soft_ss_beta_1", "hard_ss_beta_1"]
        assert len(df) == 3
        assert df["soft_ss_beta_1"].notna().all()
        assert df["hard_ss_beta_1"].notna().all()

    def test_sweep_flags_unmatched_peaks(self, tmp_path, capsys):
        argv = ["sweep", "--config", "thin_clamped_homogeneous", "--param", "power_index", "--range", "0:1:0.5",
                "--modes", "1", "--p-max", "0", "--expect-peaks", "0.5", "--csv", str(tmp_path / "flag.csv")]
        assert main(argv) == EXIT_TOLERANCE
        assert "[FLAG]" in capsys.readouterr().err

    def test_diagnostics_are_logged(self, caplog):
        with caplog.at_level(logging.WARNING, logger="stepplate.cli"):
            _report_diagnostics(["p=0: beta=4.600000 skipped: modal denominator of x2 vanishes"])
        assert "1 search diagnostic(s)" in caplog.text
        assert "x2 vanishes" in caplog.text

    def test_shape_profile(self, tmp_path):
        out = tmp_path / "shape.csv"
        argv = ["shape", "--config", "thin_clamped_homogeneous", "--p", "0", "--n", "1", "--points", "11",
                "--csv", str(out)]
        assert main(argv) == EXIT_OK
        df = pd.read_csv(out)
        assert len(df) == 11
        assert {"r", "w", "psi_r", "M_r", "Q_r"} <= set(df.columns)
        assert abs(df["w"].iloc[-1]) < 1e-4 * abs(df["w"]).max()

    def test_empty_segments_exit_code(self, tmp_path, capsys):
        data = json.loads(load_plate_config("table1_free").model_dump_json())
        data["segments"] = []
        path = tmp_path / "empty.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        assert main(["freqs", "--config", str(path)]) == EXIT_CONFIG
        assert "segments" in capsys.readouterr().err

    def test_unknown_config_exit_code(self):
        assert main(["validate", "--config", "no_such_plate"]) == EXIT_CONFIG

    def test_bad_range_exit_code(self):
        code = main(["sweep", "--config", "step_location_free", "--param", "step_location", "--range", "0.9:0.1:0.05"])
        assert code == EXIT_CONFIG

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["plot"])
        assert exc.value.code == 2


def test_reference_table_complete():
    for bc, (config_name, rows) in TABLE1_REFERENCE.items():
        assert load_plate_config(config_name).outer_bc == bc
        assert len(rows) == 10
        frequencies = [f for _, f in rows]
        assert frequencies == sorted(frequencies)
