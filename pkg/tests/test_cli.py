import json
import os

import numpy as np
import pytest

from polyapprox import cli
from polyapprox.exceptions import ConsistencyError
from polyapprox.services import training_service

CUBE = {'type': 'hypercube', 'n': 2}
BALL = {'type': 'hypersphere', 'n': 2, 'radius': 1.0,
        'theta_box': {'lower': [0.0], 'upper': [1.0]}, 'modulation': {'radius': [[0.5]]}}


def stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


@pytest.fixture
def cube_model(tmp_path, write_json, capsys):
    region = write_json('cube.json', CUBE)
    model = str(tmp_path / 'model.json')
    code = cli.main(['fit', '--region', region, '--m', '4', '--seed', '7', '--lambda-schedule', '0.5:20',
                     '--out', model, '--history', str(tmp_path / 'history.csv')])
    assert code == 0
    summary = stdout_json(capsys)
    return region, model, summary


class TestFit:
    def test_summary_and_outputs(self, cube_model, tmp_path):
        _, model, summary = cube_model
        assert summary['status'] == 'schedule_complete'
        assert summary['iterations'] == 20
        assert (summary['n'], summary['M'], summary['mode']) == (2, 4, 'fixed')
        doc = json.loads(open(model).read())
        assert doc['schema'] == 1 and doc['M'] == 4
        with open(tmp_path / 'history.csv') as f:
            assert len(f.read().splitlines()) == 21

    def test_missing_region_file(self, tmp_path, capsys):
        out = tmp_path / 'model.json'
        code = cli.main(['fit', '--region', str(tmp_path / 'absent.json'), '--out', str(out)])
        assert code == 64
        assert capsys.readouterr().out == ''
        assert not out.exists()

    def test_needs_region_and_out(self, write_json):
        assert cli.main(['fit', '--region', write_json('cube.json', CUBE)]) == 64

    def test_unknown_flag(self):
        assert cli.main(['fit', '--colour', 'red']) == 64

    def test_missing_command(self):
        assert cli.main([]) == 64

    def test_theta_outside_box(self, tmp_path, write_json):
        code = cli.main(['fit', '--region', write_json('ball.json', BALL), '--theta', '3',
                         '--out', str(tmp_path / 'm.json'), '--lambda-schedule', '0.5:2'])
        assert code == 64

    def test_parameterized_run_document(self, tmp_path, write_json, capsys):
        write_json('ball.json', BALL)
        run = write_json('run.json', {'region': 'ball.json', 'out': 'model.json', 'mode': 'parameterized',
                                      'phases': '0.5:5', 'hidden': 4, 'batch': 2, 'eval_every': 5,
                                      'eval_dirs': 5, 'seed': 1})
        assert cli.main(['fit', '--config', run]) == 0
        summary = stdout_json(capsys)
        assert summary['mode'] == 'parameterized'
        assert 'last_eval' in summary
        doc = json.loads((tmp_path / 'model.json').read_text())
        assert doc['mlp']['hidden'] == 4
        assert doc['mlp']['theta_box'] == {'lower': [0], 'upper': [1]}

    def test_abort_writes_last_good_model(self, tmp_path, write_json, monkeypatch, capsys):
        def broken(P, samples, lam, act_tol):
            raise ConsistencyError('injected')

        monkeypatch.setattr(training_service, 'batch_loss', broken)
        out = tmp_path / 'model.json'
        code = cli.main(['fit', '--region', write_json('cube.json', CUBE), '--out', str(out),
                         '--lambda-schedule', '0.5:5'])
        assert code == 2
        assert out.exists()
        assert json.loads(out.read_text())['M'] == 4
        assert capsys.readouterr().out == ''

    def test_seeded_runs_write_identical_files(self, tmp_path, write_json, capsys):
        disk = write_json('disk.json', {'type': 'hypersphere', 'n': 2, 'radius': 1.0})
        outputs = []
        for run in ('a', 'b'):
            model, history = tmp_path / f'{run}.json', tmp_path / f'{run}.csv'
            assert cli.main(['fit', '--region', disk, '--m', '6', '--seed', '11', '--lambda-schedule', '0.5:15',
                             '--out', str(model), '--history', str(history)]) == 0
            outputs.append((model.read_bytes(), history.read_bytes()))
        assert outputs[0] == outputs[1]

    def test_unwritable_output_is_a_runtime_failure(self, tmp_path, write_json):
        blocker = tmp_path / 'file'
        blocker.write_text('')
        code = cli.main(['fit', '--region', write_json('cube.json', CUBE), '--lambda-schedule', '0.5:2',
                         '--out', str(blocker / 'model.json')])
        assert code == 2

    def test_linear_algebra_failure_is_a_runtime_failure(self, tmp_path, write_json, monkeypatch):
        def singular(*args, **kwargs):
            raise np.linalg.LinAlgError('Singular matrix')

        monkeypatch.setattr(training_service, 'fit', singular)
        code = cli.main(['fit', '--region', write_json('cube.json', CUBE), '--out', str(tmp_path / 'm.json')])
        assert code == 2


class TestEval:
    def test_exact_box_has_no_error(self, cube_model, capsys):
        region, model, _ = cube_model
        assert cli.main(['eval', '--model', model, '--region', region, '--dirs', '50', '--seed', '3']) == 0
        report = stdout_json(capsys)
        assert report == {'mean_feas': 0, 'mean_opt': 0, 'max_feas': 0, 'max_opt': 0, 'n_dirs': 50, 'seed': 3}

    def test_reproducible(self, cube_model, write_json, capsys):
        _, model, _ = cube_model
        disk = write_json('disk.json', {'type': 'hypersphere', 'n': 2, 'center': [0.5, 0.5], 'radius': 0.6})
        cli.main(['eval', '--model', model, '--region', disk, '--dirs', '40', '--seed', '9'])
        first = capsys.readouterr().out
        cli.main(['eval', '--model', model, '--region', disk, '--dirs', '40', '--seed', '9', '--workers', '2'])
        assert capsys.readouterr().out == first
        assert json.loads(first)['mean_feas'] > 0

    def test_theta_outside_box(self, cube_model, write_json):
        _, model, _ = cube_model
        ball = write_json('ball.json', BALL)
        assert cli.main(['eval', '--model', model, '--region', ball, '--theta', '5']) == 64

    def test_dimension_mismatch(self, cube_model, write_json):
        _, model, _ = cube_model
        cube3 = write_json('cube3.json', {'type': 'hypercube', 'n': 3})
        assert cli.main(['eval', '--model', model, '--region', cube3]) == 64

    def test_bad_model_document(self, write_json):
        model = write_json('model.json', {'schema': 1, 'n': 2})
        region = write_json('cube.json', CUBE)
        assert cli.main(['eval', '--model', model, '--region', region]) == 64


class TestValidate:
    def test_model_as_region_matches_itself(self, cube_model, tmp_path, capsys):
        _, model, _ = cube_model
        as_region = str(tmp_path / 'as_region.json')
        assert cli.main(['validate', model, '--as-region', '--out', as_region]) == 0
        assert json.loads(open(as_region).read())['type'] == 'linear_lifted'
        assert cli.main(['eval', '--model', model, '--region', as_region, '--dirs', '30']) == 0
        report = stdout_json(capsys)
        assert report['mean_feas'] == pytest.approx(0.0, abs=1e-12)
        assert report['mean_opt'] == pytest.approx(0.0, abs=1e-12)

    def test_region_is_written_canonically(self, write_json, capsys):
        assert cli.main(['validate', write_json('hex.json', {'type': 'polygon2d', 'sides': 6})]) == 0
        doc = stdout_json(capsys)
        assert doc['schema'] == 1
        assert len(doc['vertices']) == 6

    def test_invalid_region(self, write_json):
        assert cli.main(['validate', write_json('bad.json', {'type': 'hypercube', 'n': 2, 'lo': 3, 'hi': 1})]) == 2


class TestBench:
    def test_hypercube_strict(self, tmp_path, capsys):
        out = str(tmp_path / 'cube.csv')
        code = cli.main(['bench', 'hypercube', '--dims', '1', '--strict', '--lambda-schedule', '0.5:20',
                         '--out', out])
        assert code == 0
        summary = stdout_json(capsys)
        assert summary['failed'] == []
        assert [c['case'] for c in summary['cases']] == ['hypercube-1']
        assert os.path.exists(out)

    def test_seeded_bench_writes_identical_csv(self, tmp_path):
        paths = [tmp_path / 'a.csv', tmp_path / 'b.csv']
        for path in paths:
            assert cli.main(['bench', 'hypercube', '--dims', '1,2', '--seed', '5', '--lambda-schedule', '0.5:20',
                             '--out', str(path)]) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_unknown_suite(self):
        assert cli.main(['bench', 'tesseract']) == 64

    def test_m_is_rejected(self):
        assert cli.main(['bench', 'hypercube', '--m', '4']) == 64

    def test_bad_dims(self, tmp_path):
        assert cli.main(['bench', 'hypercube', '--dims', '0,x', '--out', str(tmp_path / 'b.csv')]) == 64

    @pytest.mark.slow
    def test_shapes_write_snapshots(self, tmp_path, capsys):
        out = str(tmp_path / 'shapes.csv')
        assert cli.main(['bench', 'shapes2d', '--lambda-schedule', '0.5:100,0.9:50', '--out', out]) == 0
        summary = stdout_json(capsys)
        for case in ('octagon', 'ellipse', 'disk_difference'):
            assert os.path.exists(tmp_path / f'shapes_{case}_snapshots.csv')
            assert summary['snapshots'][case].endswith(f'shapes_{case}_snapshots.csv')

    @pytest.mark.slow
    def test_shapes_strict_fails_on_the_curved_hull(self, tmp_path, capsys):
        # six hyperplanes cannot match the curved part of the disk-difference hull
        out = str(tmp_path / 'shapes.csv')
        assert cli.main(['bench', 'shapes2d', '--strict', '--lambda-schedule', '0.5:100,0.9:50',
                         '--out', out]) == 1
        assert 'disk_difference' in stdout_json(capsys)['failed']
