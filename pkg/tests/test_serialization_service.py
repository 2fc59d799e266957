import csv
import json
import os

import numpy as np
import pytest

from polyapprox.exceptions import NonFiniteError, SpecError, UsageError
from polyapprox.models import (
    BenchReport, ErrorEstimate, EvalRecord, IterationRecord, Phase, Polytope, ThetaBox, TrainConfig,
    TrainHistory,
)
from polyapprox.region_types import DiskDifferenceRegion
from polyapprox.services import paramnet_service, region_service, serialization_service


def read_rows(path):
    with open(path, newline='') as f:
        return list(csv.reader(f))


class TestNumbers:
    def test_format_number(self):
        assert serialization_service.format_number(0.1) == '0.10000000000000001'
        assert serialization_service.format_number(3) == '3'
        assert serialization_service.format_number(np.int64(7)) == '7'
        assert serialization_service.format_number(True) == 'true'
        assert serialization_service.format_number(np.float64(1.5)) == '1.5'

    def test_non_finite(self):
        with pytest.raises(NonFiniteError):
            serialization_service.format_number(float('nan'))

    def test_dumps_layout(self):
        text = serialization_service.dumps({'a': [1, 2.5], 'b': {'c': None, 'd': 'x'}})
        assert text == '{\n  "a": [1, 2.5],\n  "b": {\n    "c": null,\n    "d": "x"\n  }\n}'
        assert json.loads(text) == {'a': [1, 2.5], 'b': {'c': None, 'd': 'x'}}

    def test_dumps_rejects_objects(self):
        with pytest.raises(UsageError):
            serialization_service.dumps({'a': object()})


class TestModelDocuments:
    def test_fixed_model_round_trip_is_byte_identical(self, tmp_path, rng):
        A = rng.standard_normal((5, 3))
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        P = Polytope(A, rng.uniform(0.1, 1.0, 5), np.array([1.0 / 3.0, 2.0, 7.0]), np.array([0.1, -0.2, 0.3]))
        first = str(tmp_path / 'a.json')
        second = str(tmp_path / 'b.json')
        serialization_service.write_model(first, P)
        Q, mlp = serialization_service.read_model(first)
        assert mlp is None
        np.testing.assert_array_equal(Q.A, P.A)
        np.testing.assert_array_equal(Q.b, P.b)
        np.testing.assert_array_equal(Q.scale, P.scale)
        serialization_service.write_model(second, Q)
        assert open(first, 'rb').read() == open(second, 'rb').read()

    def test_parameterized_model_round_trip(self, tmp_path, rng, box_rows):
        net = paramnet_service.init_mlp(ThetaBox([0.0], [2.0]), box_rows, [1.0, 0.0, 1.0, 0.0], 5, rng)
        net.scale, net.offset = np.ones(2), np.zeros(2)
        P = paramnet_service.emit(net, net.theta_box.center)
        path = str(tmp_path / 'm.json')
        serialization_service.write_model(path, P, net)
        Q, loaded = serialization_service.read_model(path)
        assert loaded.hidden == 5 and loaded.theta_dim == 1 and loaded.M == 4 and loaded.n == 2
        for key, value in net.flat().items():
            np.testing.assert_array_equal(loaded.flat()[key], value)
        np.testing.assert_array_equal(loaded.theta_box.upper, [2.0])
        np.testing.assert_array_equal(paramnet_service.emit(loaded, [1.5]).A, paramnet_service.emit(net, [1.5]).A)

    def base_doc(self):
        return {'schema': 1, 'n': 2, 'M': 2, 'A': [[1, 0], [0, 1]], 'b': [1, 1],
                'norm': {'scale': [1, 1], 'offset': [0, 0]}}

    @pytest.mark.parametrize('change', [
        {'schema': 2},
        {'M': 3},
        {'A': [[1, 0], [0, 'x']]},
        {'b': [1, float('inf')]},
        {'norm': {'scale': [1, 0], 'offset': [0, 0]}},
        {'norm': {'scale': [1, 1]}},
        {'mlp': {'theta_dim': 1, 'hidden': 2}},
        {'mlp': {'theta_dim': 1, 'hidden': 1, 'theta_box': {'lower': [1], 'upper': [0]},
                 'a_net': {}, 'b_net': {}}},
    ])
    def test_bad_documents(self, change):
        doc = self.base_doc()
        doc.update(change)
        with pytest.raises(SpecError):
            serialization_service.model_from_doc(doc)

    def test_missing_field(self):
        doc = self.base_doc()
        del doc['b']
        with pytest.raises(SpecError, match='missing'):
            serialization_service.model_from_doc(doc)


class TestReadJson:
    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError):
            serialization_service.read_json(str(tmp_path / 'nope.json'), 'model document')

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('{"a": ')
        with pytest.raises(SpecError):
            serialization_service.read_json(str(path), 'model document')


def test_atomic_write_leaves_no_temporary_files(tmp_path):
    path = tmp_path / 'sub' / 'out.txt'
    serialization_service.write_text_atomic(str(path), 'one')
    serialization_service.write_text_atomic(str(path), 'two')
    assert path.read_text() == 'two'
    assert os.listdir(tmp_path / 'sub') == ['out.txt']


def test_region_document_round_trip(tmp_path, cut_disk):
    path = str(tmp_path / 'region.json')
    serialization_service.write_region(path, cut_disk)
    again = region_service.load_region(path)
    assert isinstance(again, DiskDifferenceRegion)
    assert again.to_spec_data() == cut_disk.to_spec_data()


class TestCsv:
    def history(self):
        history = TrainHistory()
        history.record(IterationRecord(1, 0.5, 0.25, 0.0, 0.125, 1.0))
        history.record(IterationRecord(2, 0.5, 0.2, 0.01, 0.1, 0.5))
        history.evals.append(EvalRecord(2, ErrorEstimate(0.1, 0.2, 0.3, 0.4, 10, 0), 0.5))
        return history

    def test_history(self, tmp_path):
        path = str(tmp_path / 'h.csv')
        serialization_service.write_history_csv(path, self.history())
        rows = read_rows(path)
        assert rows[0] == ['iter', 'lambda', 'e_feas', 'e_opt', 'loss', 'grad_norm']
        assert rows[1] == ['1', '0.5', '0.25', '0', '0.125', '1']
        assert len(rows) == 3

    def test_eval(self, tmp_path):
        path = str(tmp_path / 'e.csv')
        serialization_service.write_eval_csv(path, self.history())
        rows = read_rows(path)
        assert rows[0] == serialization_service.EVAL_COLUMNS
        assert rows[1][0] == '2'
        assert float(rows[1][4]) == 0.4

    def report(self):
        return BenchReport(case='cube_2', n=2, M=4, init_error=0.5, converged_error=1e-7, ideal_error=None,
                           reduction=0.9999998, iterations=120, wall_time=3.2, steps_to_tol=80,
                           max_feas=1e-6, max_opt=0.0, mc_se=1e-8, passed=True, notes='')

    def test_bench_without_timing(self, tmp_path):
        path = str(tmp_path / 'b.csv')
        serialization_service.write_bench_csv(path, [self.report()])
        header, row = read_rows(path)
        assert header == serialization_service.BENCH_COLUMNS
        record = dict(zip(header, row))
        assert record['ideal_error'] == ''
        assert record['passed'] == 'true'
        assert record['steps_to_tol'] == '80'
        assert 'wall_time' not in record

    def test_bench_with_timing(self, tmp_path):
        path = str(tmp_path / 'b.csv')
        serialization_service.write_bench_csv(path, [self.report()], timing=True)
        header, row = read_rows(path)
        assert header[header.index('iterations') + 1] == 'wall_time'
        assert dict(zip(header, row))['wall_time'] == '3.2000000000000002'

    def test_snapshots_are_raw(self, tmp_path, box_rows):
        P = Polytope(box_rows, np.array([1.0, 0.0, 1.0, 0.0]), np.array([2.0, 2.0]), np.array([-1.0, -1.0]))
        path = str(tmp_path / 's.csv')
        serialization_service.write_snapshot_csv(path, [(0, P), (50, P)])
        rows = read_rows(path)
        assert rows[0] == ['iter', 'row', 'a1', 'a2', 'b']
        assert len(rows) == 1 + 8
        assert rows[1] == ['0', '0', '1', '0', '1']
        assert rows[5][:2] == ['50', '0']


class TestRunConfig:
    def test_lambda_schedule(self):
        assert serialization_service.parse_lambda_schedule('0.5:500, 0.9:200') == [Phase(0.5, 500), Phase(0.9, 200)]

    @pytest.mark.parametrize('text', ['', '0.5', '0.5:abc', 'a:1'])
    def test_bad_schedule(self, text):
        with pytest.raises(UsageError):
            serialization_service.parse_lambda_schedule(text)

    def test_phase_objects_and_base(self):
        base = TrainConfig(lr=0.3, batch=5)
        config = serialization_service.train_config_from_doc(
            {'phases': [{'lambda': 0.9, 'iters': 10, 'lr': 0.05}], 'batch': 2, 'color': 'red'}, base)
        assert config.phases == [Phase(0.9, 10, 0.05)]
        assert config.batch == 2
        assert config.lr == 0.3

    def test_bad_phase_objects(self):
        with pytest.raises(SpecError):
            serialization_service.train_config_from_doc({'phases': [{'lam': 0.5}]})

    def test_invalid_values(self):
        with pytest.raises(UsageError):
            serialization_service.train_config_from_doc({'init': 'sideways'})

    def test_paths_resolve_against_the_document(self, write_json, tmp_path):
        path = write_json('run.json', {'region': 'disk.json', 'out': '/abs/model.json', 'history': 'h.csv',
                                       'M': 6, 'phases': '0.5:10', 'mode': 'parameterized',
                                       'theta_box': {'lower': [0], 'upper': [1]}})
        run = serialization_service.read_run_config(path)
        assert run.region == os.path.join(str(tmp_path), 'disk.json')
        assert run.out == '/abs/model.json'
        assert run.history == os.path.join(str(tmp_path), 'h.csv')
        assert run.eval_history is None
        assert run.mode == 'parameterized'
        assert run.train.M == 6
        assert run.theta_box.dim == 1

    def test_missing_region(self, write_json):
        with pytest.raises(SpecError, match="'region'"):
            serialization_service.read_run_config(write_json('run.json', {'out': 'm.json'}))

    def test_unknown_mode(self, write_json):
        with pytest.raises(SpecError):
            serialization_service.read_run_config(write_json('run.json', {'region': 'r', 'out': 'o', 'mode': 'x'}))
