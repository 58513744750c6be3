"""Run ledger: database service operations and the REST API."""
import pytest

from src.server.database_service import RunService, RunStoreError
from src.server.models import db, SearchRun
from src.server.results_service import record_run


def _run_data(name='sphere', resolution=64, candidates=2):
    return {
        'name': name,
        'resolution': resolution,
        'seed': 7,
        'config': {'rounds': 5, 'per_round': 6},
        'selected_arch': '16:relu,8:elu',
        'selected_size': 209,
        'iou': 0.981,
        'cd_x1000': 0.05,
        'candidates': [
            {'round': 1, 'index_in_round': i, 'arch': '8:relu', 'acc': 0.97 + i / 100,
             'size': 41, 'reward': 0.3, 'note': None}
            for i in range(candidates)
        ],
    }


class TestRunService:
    def test_add_and_get(self, ledger_app):
        with ledger_app.app_context():
            run_id = RunService.add_run(_run_data())
            run = RunService.get_run(run_id)
            assert run['name'] == 'sphere'
            assert run['config'] == {'rounds': 5, 'per_round': 6}
            assert run['candidate_count'] == 2
            assert 'candidates' not in run
            assert len(RunService.get_run(run_id, with_candidates=True)['candidates']) == 2

    def test_missing_run(self, ledger_app):
        with ledger_app.app_context():
            assert RunService.get_run('nope') is None
            assert RunService.get_candidates('nope') is None
            assert RunService.delete_run('nope') is False

    def test_candidates_in_discovery_order(self, ledger_app):
        data = _run_data(candidates=0)
        data['candidates'] = [
            {'round': 2, 'index_in_round': 0, 'arch': '8:relu', 'acc': 0.9, 'size': 41, 'reward': 0.1},
            {'round': 1, 'index_in_round': 1, 'arch': '8:relu', 'acc': 0.9, 'size': 41, 'reward': 0.1},
            {'round': 1, 'index_in_round': 0, 'arch': '8:relu', 'acc': 0.9, 'size': 41, 'reward': 0.1},
        ]
        with ledger_app.app_context():
            run_id = RunService.add_run(data)
            order = [(c['round'], c['index_in_round']) for c in RunService.get_candidates(run_id)]
            assert order == [(1, 0), (1, 1), (2, 0)]

    def test_delete_cascades(self, ledger_app):
        with ledger_app.app_context():
            run_id = RunService.add_run(_run_data())
            assert RunService.delete_run(run_id) is True
            assert RunService.get_run(run_id) is None
            assert db.session.execute(db.text('SELECT COUNT(*) FROM candidates')).scalar() == 0

    def test_by_resolution(self, ledger_app):
        with ledger_app.app_context():
            RunService.add_run(_run_data(name='a', resolution=64))
            RunService.add_run(_run_data(name='b', resolution=128))
            assert [r['name'] for r in RunService.get_runs_by_resolution(128)] == ['b']
            assert len(RunService.get_all_runs()) == 2

    def test_bad_data_rolls_back(self, ledger_app):
        data = _run_data()
        data['candidates'][1].pop('acc')
        with ledger_app.app_context():
            with pytest.raises(RunStoreError, match='Failed to add run'):
                RunService.add_run(data)
            assert db.session.execute(db.select(SearchRun)).scalars().all() == []


class TestRestApi:
    def test_health(self, ledger_client):
        response = ledger_client.get('/api/health')
        assert response.status_code == 200
        assert response.get_json()['status'] == 'healthy'

    def test_list_get_and_delete(self, ledger_app, ledger_client):
        with ledger_app.app_context():
            run_id = RunService.add_run(_run_data())

        body = ledger_client.get('/api/runs').get_json()
        assert body['status'] == 'success'
        assert [r['id'] for r in body['runs']] == [run_id]

        body = ledger_client.get(f'/api/runs/{run_id}').get_json()
        assert body['run']['selected_arch'] == '16:relu,8:elu'

        body = ledger_client.get(f'/api/runs/{run_id}/candidates').get_json()
        assert len(body['candidates']) == 2

        assert ledger_client.delete(f'/api/runs/{run_id}').status_code == 200
        response = ledger_client.get(f'/api/runs/{run_id}')
        assert response.status_code == 404
        assert response.get_json() == {'error': 'Run not found', 'status': 'error'}

    def test_unknown_run(self, ledger_client):
        assert ledger_client.get('/api/runs/missing/candidates').status_code == 404
        assert ledger_client.delete('/api/runs/missing').status_code == 404


def test_record_run_creates_database(tmp_path):
    path = tmp_path / 'ledger.db'
    run_id = record_run(path, _run_data())
    assert path.exists()
    assert len(run_id) == 36
