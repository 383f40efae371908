import json

import pytest

from common import _parse_values, load_values, read_values_from_file
from config import ConfigError, RunConfig


def test_defaults_and_paths():
    config = RunConfig()
    assert config.get('mesh.L') == 1e4
    assert config.get('solver.init') == 'zero'
    assert config.get('checks.copt_bound.enabled', True) is True
    assert config.get('mesh.L.deeper', 'x') == 'x'
    config.set('checks.copt_bound.enabled', False)
    assert config.get('checks.copt_bound.enabled') is False


def test_dict_merge_keeps_untouched_defaults():
    config = RunConfig({'mesh': {'L': 500.0}, 'verify': {'copt_p': 24}})
    assert config.get('mesh.L') == 500.0
    assert config.get('mesh.abs_cap') == 0.05
    assert config.get('verify.copt_p') == 24
    assert RunConfig.DEFAULT_CONFIG['mesh']['L'] == 1e4


def test_overrides():
    base = RunConfig()
    merged = base.with_overrides({'mesh_L': 2000.0, 'tol': None, 'init': 'family:f2',
                                  'verify.refine': 2})
    assert merged.get('mesh.L') == 2000.0
    assert merged.get('solver.tol') == 1e-6
    assert merged.get('solver.init') == 'family:f2'
    assert merged.get('verify.refine') == 2
    assert base.get('mesh.L') == 1e4


def test_out_override_moves_output_files(tmp_path):
    merged = RunConfig().with_overrides({'out': str(tmp_path)})
    assert merged.get('output.dir') == str(tmp_path)
    assert merged.get('output.checkpoint') == str(tmp_path / 'state.json')
    assert merged.get('output.history') == str(tmp_path / 'history.csv')
    assert merged.get('output.report') == str(tmp_path / 'report.json')


@pytest.mark.parametrize("overrides", [
    {'mesh': {'L': -1.0}},
    {'solver': {'tol': 1.5}},
    {'solver': {'init': 'family:f7'}},
    {'solver': {'max_steps': 'many'}},
    {'hilbert': {'delta': 'small'}},
    {'hilbert': {'fa_method': 'spline'}},
    {'verify': {'cell_split': 0}},
    {'energy': {'weights': {'alpha1': 'x'}}},
])
def test_validate_rejects(overrides):
    with pytest.raises(ConfigError):
        RunConfig(overrides).validate()


@pytest.mark.parametrize("init", ['zero', 'family:f1', 'f4'])
def test_validate_accepts(init):
    config = RunConfig({'solver': {'init': init}, 'hilbert': {'fa_method': 'hermite'}})
    assert config.validate() is config


def test_from_file(tmp_path):
    yaml_path = tmp_path / 'run.yaml'
    yaml_path.write_text("mesh:\n  L: 300.0\nsolver:\n  tol: 1.0e-5\n", encoding='utf-8')
    config = RunConfig.from_file(str(yaml_path))
    assert config.get('mesh.L') == 300.0
    assert config.get('solver.tol') == 1e-5

    json_path = tmp_path / 'run.json'
    json_path.write_text(json.dumps({'verify': {'LB_factor': 10.0}}), encoding='utf-8')
    assert RunConfig.from_file(str(json_path)).get('verify.LB_factor') == 10.0


def test_shipped_config_is_valid():
    config = RunConfig.from_file('blowup_config.yaml').validate()
    assert config.get('checks.copt_bound.priority') == 62
    assert config.get('hilbert.fa_method') == 'split'
    assert config.get('verify.cell_split') == 4


@pytest.mark.parametrize("name, content", [
    ('run.toml', 'a = 1'),
    ('bad.json', '{'),
    ('bad.yaml', 'mesh: [1, 2'),
    ('list.yaml', '- 1\n- 2\n'),
])
def test_from_file_errors(tmp_path, name, content):
    path = tmp_path / name
    path.write_text(content, encoding='utf-8')
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(path))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(tmp_path / 'absent.yaml'))


def test_parse_values():
    assert _parse_values(['1.5', ' 2 # two', '', '# only a comment', '1.5', '3e2']) == [1.5, 2.0, 300.0]
    with pytest.raises(ValueError):
        _parse_values(['abc'])


def test_load_values(tmp_path):
    path = tmp_path / 'points.txt'
    path.write_text("0.5\n# skip\n2.0\n", encoding='utf-8')
    assert read_values_from_file(str(path)) == [0.5, 2.0]
    assert load_values(['2.0', '7'], str(path)) == [0.5, 2.0, 7.0]
    with pytest.raises(ValueError):
        load_values([])
    with pytest.raises(RuntimeError):
        read_values_from_file(str(tmp_path / 'absent.txt'))
