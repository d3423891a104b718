"""
Unit tests for the configuration module.
"""
import os
import pytest
import yaml

from src.core import config
from src.core.config import ConfigError, ScenarioConfig


def _write(path, text):
    with open(path, 'w') as f:
        f.write(text)
    return str(path)


@pytest.mark.unit
class TestConfigFiles:
    """Tests for defaults, merging, loading and saving."""

    def test_get_default_config(self):
        """Test getting default configuration."""
        default_config = config.get_default_config()

        assert default_config['costs']['c_pv'] == 750.0
        assert default_config['costs']['c_grid_withdraw'] == 0.26
        assert default_config['costs']['annualize'] is False
        assert set(default_config['losses']) == {'pv_dcdc', 'battery_dcdc', 'inverter', 'battery_cell'}
        assert default_config['profiles']['load_csv'] is None
        assert default_config['solver']['cap_epsilon'] == 1e-6

    def test_merge_keeps_untouched_keys(self):
        """Test that a partial override keeps the other defaults."""
        merged = config.merge_config(config.get_default_config(), {'costs': {'c_pv': 800.0}})
        assert merged['costs']['c_pv'] == 800.0
        assert merged['costs']['c_battery'] == 250.0

    def test_merge_rejects_unknown_key(self):
        """Test that misspelled keys are reported."""
        with pytest.raises(ConfigError, match="c_pvv"):
            config.merge_config(config.get_default_config(), {'costs': {'c_pvv': 800.0}})

    def test_merge_none_replaces_section(self):
        """Test that None marks a component as ideal."""
        merged = config.merge_config(config.get_default_config(), {'losses': {'inverter': None}})
        assert merged['losses']['inverter'] is None
        assert merged['losses']['pv_dcdc'] is not None

    def test_load_config_file_not_exists(self, temp_dir):
        """Test loading config when file does not exist."""
        with pytest.raises(ConfigError, match="config file not found"):
            config.load_config(str(temp_dir.join('missing.yaml')))

    def test_load_config_resolves_relative_paths(self, temp_dir):
        """Test that profile paths and output_dir resolve against the file."""
        path = _write(temp_dir.join('scenario.yaml'),
                      "profiles:\n  load_csv: data/load.csv\n  pv_csv: /abs/pv.csv\noutput_dir: out\n")

        loaded_config = config.load_config(path)

        assert loaded_config['profiles']['load_csv'] == os.path.join(str(temp_dir), 'data', 'load.csv')
        assert loaded_config['profiles']['pv_csv'] == '/abs/pv.csv'
        assert loaded_config['output_dir'] == os.path.join(str(temp_dir), 'out')

    def test_load_config_rejects_non_mapping(self, temp_dir):
        """Test that a list document is rejected."""
        path = _write(temp_dir.join('list.yaml'), "- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            config.load_config(path)

    def test_load_config_rejects_bad_yaml(self, temp_dir):
        """Test that a syntax error is reported as a configuration error."""
        path = _write(temp_dir.join('bad.yaml'), "costs: [unclosed\n")
        with pytest.raises(ConfigError, match="could not read"):
            config.load_config(path)

    def test_save_config(self, temp_dir, mock_config):
        """Test saving configuration to file."""
        path = str(temp_dir.join('saved.yaml'))

        config.save_config(mock_config, path)

        with open(path) as f:
            assert yaml.safe_load(f) == mock_config

    def test_shipped_scenarios_load(self, week_config_path):
        """Test that the shipped week scenario is valid."""
        loaded = config.load_config(week_config_path)
        scenario_config = ScenarioConfig.from_dict(loaded)
        assert scenario_config.costs.annualize is True
        assert loaded['profiles']['synthetic']['steps'] == 672


@pytest.mark.unit
class TestScenarioConfig:
    """Tests for the typed scenario view."""

    def _merged(self, override):
        return config.merge_config(config.get_default_config(), override)

    def test_from_dict(self, mock_config):
        """Test converting a valid configuration."""
        scenario_config = ScenarioConfig.from_dict(self._merged(mock_config))

        assert scenario_config.costs.annualize is True
        assert scenario_config.costs.dt_hours == 1.0
        assert scenario_config.formulation.label == "CC-CB"
        assert scenario_config.formulation.eta == {}
        assert scenario_config.output_dir == "out"

    def test_invalid_costs(self):
        """Test that a negative price names the costs section."""
        with pytest.raises(ConfigError, match="invalid costs"):
            ScenarioConfig.from_dict(self._merged({'costs': {'c_inv': -5.0}}))

    def test_invalid_losses(self):
        """Test that an impossible converter names the losses section."""
        bad = {'a': 1.0, 'b': 1.5, 'c': 1e-6, 'p_nom_og': 1000.0}
        with pytest.raises(ConfigError, match="invalid losses"):
            ScenarioConfig.from_dict(self._merged({'losses': {'inverter': bad}}))

    def test_invalid_formulation(self):
        """Test that an unknown loss model names the settings."""
        with pytest.raises(ConfigError, match="invalid settings"):
            ScenarioConfig.from_dict(self._merged({'formulation': {'battery_model': 'cubic'}}))

    def test_ideal_components(self):
        """Test that None entries become ideal components."""
        lossless = {name: None for name in ('pv_dcdc', 'battery_dcdc', 'inverter', 'battery_cell')}
        scenario_config = ScenarioConfig.from_dict(self._merged({'losses': lossless}))
        assert scenario_config.losses.inverter is None
        assert scenario_config.losses.battery_cell is None

    def test_pinned_efficiencies(self):
        """Test that only set efficiencies are pinned."""
        merged = self._merged({'formulation': {'eta': {'inverter': 0.95}}})
        assert ScenarioConfig.from_dict(merged).formulation.eta == {'inverter': 0.95}

    def test_synthetic_profiles(self, mock_config):
        """Test that missing profile paths fall back to synthetic profiles."""
        scenario = ScenarioConfig.from_dict(self._merged(mock_config)).build_scenario()
        assert scenario.n_steps == 24
        assert scenario.dt_hours == 1.0

    def test_single_profile_path(self):
        """Test that one profile path without the other is rejected."""
        scenario_config = ScenarioConfig.from_dict(self._merged({'profiles': {'load_csv': '/x.csv'}}))
        with pytest.raises(ConfigError, match="together"):
            scenario_config.load_profiles()

    def test_missing_profile_file(self, temp_dir):
        """Test the message for a profile path that does not exist."""
        missing = str(temp_dir.join('nope.csv'))
        pv = _write(temp_dir.join('pv.csv'), "0.0\n")
        scenario_config = ScenarioConfig.from_dict(
            self._merged({'profiles': {'load_csv': missing, 'pv_csv': pv}}))
        with pytest.raises(ConfigError, match="profile file not found"):
            scenario_config.load_profiles()

    def test_csv_profiles_are_resampled(self, temp_dir):
        """Test reading and averaging CSV profiles."""
        load = _write(temp_dir.join('load.csv'), "100\n300\n500\n700\n")
        pv = _write(temp_dir.join('pv.csv'), "0.0\n0.2\n0.4\n0.6\n")
        scenario_config = ScenarioConfig.from_dict(self._merged(
            {'profiles': {'load_csv': load, 'pv_csv': pv, 'dt_hours': 0.25, 'resample_factor': 2}}))

        scenario = scenario_config.build_scenario()

        assert scenario.n_steps == 2
        assert scenario.dt_hours == 0.5
        assert list(scenario.load_kw) == pytest.approx([0.2, 0.6])
        assert scenario.costs.dt_hours == 0.5

    def test_mismatched_profiles(self, temp_dir):
        """Test that profiles of different lengths are rejected."""
        load = _write(temp_dir.join('load.csv'), "100\n300\n")
        pv = _write(temp_dir.join('pv.csv'), "0.0\n")
        scenario_config = ScenarioConfig.from_dict(
            self._merged({'profiles': {'load_csv': load, 'pv_csv': pv}}))
        with pytest.raises(ConfigError, match="lengths"):
            scenario_config.build_scenario()
