import json

import pytest

from run_blowup import EXIT_INVALID, EXIT_IO, EXIT_OK, build_parser, main


def test_parser_flags():
    args = build_parser().parse_args(['solve', '--mesh-L', '500', '--tol', '1e-4', '--init', 'family:f3'])
    assert args.command == 'solve'
    assert args.mesh_L == 500.0
    assert args.tol == 1e-4
    args = build_parser().parse_args(['hilbert', '--rational', '2', '0.5', '-k', '2', '1', '3'])
    assert args.rational == [2.0, 0.5]
    assert args.x == ['1', '3']


def test_hilbert_rational(capsys):
    assert main(['--no-color', 'hilbert', '--rational', '1', '1', '-k', '1', '1.0', '2.0']) == EXIT_OK
    out = capsys.readouterr().out
    assert 'x=1 k=1' in out
    assert 'x=2 k=1' in out
    assert 'closed=1' in out


def test_hilbert_values_file(tmp_path, capsys):
    path = tmp_path / 'xs.txt'
    path.write_text("0.5\n# comment\n4\n", encoding='utf-8')
    assert main(['hilbert', '--rational', '1', '2', '-f', str(path)]) == EXIT_OK
    assert 'x=4 k=0' in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ['hilbert', '1.0'],
    ['hilbert', '--rational', '1', '1'],
    ['hilbert', '--rational', '1', '1', '-k', '5', '1.0'],
    ['solve', '--tol', '1.5'],
    ['solve', '--init', 'family:f9'],
    ['solve', '--mesh-L', '-3'],
])
def test_invalid_input(argv):
    assert main(argv) == EXIT_INVALID


def test_bad_config_file(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text('{"mesh": ', encoding='utf-8')
    assert main(['--config', str(path), 'hilbert', '--rational', '1', '1', '1']) == EXIT_INVALID
    assert main(['--config', str(tmp_path / 'absent.yaml'), 'solve']) == EXIT_INVALID


def test_config_file_is_applied(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'hilbert': {'delta': 'tiny'}}), encoding='utf-8')
    assert main(['--config', str(path), 'hilbert', '--rational', '1', '1', '1']) == EXIT_INVALID


def test_missing_or_corrupt_checkpoint(tmp_path):
    assert main(['verify', str(tmp_path / 'absent.json'), '-o', str(tmp_path)]) == EXIT_IO
    corrupt = tmp_path / 'state.json'
    corrupt.write_text('not json', encoding='utf-8')
    assert main(['export', str(corrupt), 'profile', str(tmp_path / 'p.csv')]) == EXIT_IO
