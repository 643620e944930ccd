import asyncio
import json

import pytest

from app.database.base import Session
from app.database.models import Run
from app.experiment import PERTURBATIONS, list_presets, load_preset, validate_config
from app.services.batch import BatchService
from app.services.checks import run_suite
from app.services.runner import run_experiment, tilt_group_checks
from errors import ConfigError
from flow import FlowSeries
from main import main
from report import ReportBundle

TINY = {'n_theta': 8, 'M': 8, 'L': 6.0, 'n_y': 121, 'steps': 20, 'cadence': 5, 'perturbation': 'orthogonal',
        'annotate': False, 'fit_radius': 3.0, 'checks': ['monotone']}


def _tiny(tmp_path, name, **overrides):
    return validate_config({**TINY, 'name': name, 'out_dir': str(tmp_path / name), **overrides})


def _status(name: str) -> str:
    session = Session()
    try:
        return session.query(Run).filter_by(name=name).order_by(Run.id.desc()).first().status
    finally:
        session.close()


class TestConfig:

    @pytest.mark.parametrize('data, field', [
        ({'n_theta': 7}, 'n_theta'),
        ({'n_y': 120}, 'n_y'),
        ({'bogus': 1}, 'bogus'),
        ({'perturbation': 'wobble'}, 'perturbation'),
        ({'checks': ['speed']}, 'checks'),
        ({'annotate': False, 'checks': ['uniqueness']}, '<root>'),
        ({'perturbation': [[40, 0, 0.01]]}, '<root>'),
    ])
    def test_invalid_fields(self, data, field):
        with pytest.raises(ConfigError) as info:
            validate_config(data)
        assert field in info.value.fields

    def test_presets(self):
        assert {'axial-quartic', 'cylinder', 'kernel-quadratic', 'kernel-tilt', 'kernel-tilt-alt', 'orthogonal',
                'radial', 'rotation', 'rotation-alt', 'unstable'} <= set(list_presets())
        config = load_preset('cylinder')
        assert config.name == 'cylinder'
        assert config.perturbation_spec == PERTURBATIONS['none']

    def test_radial_preset_is_round(self):
        config = load_preset('radial')
        assert config.perturbation_spec == [[0, 0, 0.01]]
        assert not config.stabilize
        assert not config.taper
        assert load_preset('axial-quartic').perturbation_spec == [[0, 4, 0.002]]

    def test_kernel_tilt_preset(self):
        tilt, alt = load_preset('kernel-tilt'), load_preset('kernel-tilt-alt')
        eps = 0.05
        assert tilt.perturbation_spec == [[0, 2, eps], [1, 1, 0.5 * eps]]
        assert alt.perturbation_spec[:2] == tilt.perturbation_spec
        assert tilt.tilt_group == alt.tilt_group == 'kernel-tilt'
        assert load_preset('rotation').tilt_group == load_preset('rotation-alt').tilt_group

    def test_tilt_group_needs_annotation(self):
        with pytest.raises(ConfigError):
            validate_config({'annotate': False, 'tilt_group': 'rotation'})

    def test_missing_preset(self):
        with pytest.raises(ConfigError):
            load_preset('no-such-preset')

    def test_config_file(self, tmp_path):
        path = tmp_path / 'mine.json'
        path.write_text(json.dumps({'steps': 5}), encoding='utf-8')
        config = load_preset(str(path))
        assert config.name == 'mine'
        assert config.steps == 5

    def test_broken_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{', encoding='utf-8')
        with pytest.raises(ConfigError):
            load_preset(str(path))


class TestRunner:

    def test_tiny_run(self, tmp_path):
        bundle = run_experiment(_tiny(tmp_path, 'tiny-run'))
        assert bundle.passed
        assert not bundle.partial
        for name in ('diagnostics.csv', 'kernel.csv', 'checks.csv', 'loglog.svg', 'manifest.json'):
            assert (tmp_path / 'tiny-run' / name).exists(), name
        manifest = json.loads((tmp_path / 'tiny-run' / 'manifest.json').read_text(encoding='utf-8'))
        assert manifest['steps_completed'] == 20
        assert manifest['provenance']['checks.csv'] == {'monotone': 'flow.FlowSeries.is_monotone'}
        assert _status('tiny-run') == 'passed'

    def test_annotated_run(self, tmp_path):
        bundle = run_experiment(_tiny(tmp_path, 'tiny-annotated', annotate=True, n_starts=2), plots=False)
        assert 'dC_R' in bundle.series.rows[0]
        assert not (tmp_path / 'tiny-annotated' / 'loglog.svg').exists()

    def test_unstable_run_halts(self, tmp_path):
        config = _tiny(tmp_path, 'tiny-unstable', perturbation='unstable', stabilize=False, dt=0.02, steps=400,
                       cadence=20)
        bundle = run_experiment(config, plots=False)
        assert bundle.partial
        assert not bundle.passed
        manifest = json.loads((tmp_path / 'tiny-unstable' / 'manifest.json').read_text(encoding='utf-8'))
        assert manifest['halt_reason'] == bundle.halt_reason
        assert _status('tiny-unstable') == 'halted'


class TestBatch:

    def test_shared_directory(self, tmp_path):
        first = _tiny(tmp_path, 'shared')
        second = validate_config({**first.echo(), 'name': 'other'})
        with pytest.raises(ConfigError) as info:
            BatchService([first, second])
        assert info.value.fields == ['out_dir']

    def test_two_runs(self, tmp_path):
        configs = [_tiny(tmp_path, 'batch-a'),
                   _tiny(tmp_path, 'batch-b', perturbation='radial', stabilize=False, taper=False)]
        service = BatchService(configs, max_workers=2, plots=False)
        bundles = asyncio.run(service.run())
        assert [b.out_dir.name for b in bundles] == ['batch-a', 'batch-b']
        assert service.group_checks == []
        assert service.passed

    def test_tilt_group_rows(self, tmp_path):
        configs = [_tiny(tmp_path, name, annotate=True, tilt_group='g') for name in ('g-a', 'g-b', 'g-c')]
        bundles = [ReportBundle(tmp_path / c.name, series=FlowSeries(rows=[{'axis_a': a, 'axis_b': 0.0}]))
                   for c, a in zip(configs, (0.01, 0.0104, 0.0095))]
        rows = tilt_group_checks(configs, bundles)
        assert len(rows) == 1
        assert rows[0].check == 'tilt_group'
        assert rows[0].lhs == pytest.approx(9e-4)
        assert rows[0].passed
        bundles[2] = None
        assert not tilt_group_checks(configs, bundles)[0].passed

    @pytest.mark.slow
    def test_shared_tilt_converges_to_one_axis(self, tmp_path):
        base = {'n_theta': 16, 'n_y': 161, 'L': 8.0, 'M': 16, 'dt': 0.05, 'steps': 400, 'cadence': 10,
                'fit_radius': 3.0, 'n_starts': 4, 'taper': False, 'sum_tol': 1e-4,
                'tilt_group': 'rotation', 'checks': ['monotone', 'uniqueness']}
        configs = [validate_config({**base, 'name': name, 'perturbation': name, 'out_dir': str(tmp_path / name)})
                   for name in ('rotation', 'rotation-alt')]
        service = BatchService(configs, max_workers=2, plots=False)
        bundles = asyncio.run(service.run())
        for bundle in bundles:
            assert not bundle.partial
            assert {c.check: c.passed for c in bundle.checks}['uniqueness']
        assert len(service.group_checks) == 1
        assert service.group_checks[0].lhs < 1e-3
        assert service.passed


class TestCli:

    def test_spectrum(self, capsys):
        assert main(['spectrum', '--method', 'spectral']) == 0
        assert 'kernel_dimension: 3' in capsys.readouterr().out

    def test_higher_dimensional_spectrum(self, capsys):
        assert main(['spectrum', '--k', '2', '--n', '3']) == 0
        assert 'kernel_dimension: 4' in capsys.readouterr().out

    def test_bad_config(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text(json.dumps({'n_theta': 7}), encoding='utf-8')
        assert main(['simulate', str(path)]) == 2

    def test_simulate_preset_override(self, tmp_path, capsys):
        path = tmp_path / 'tiny.json'
        path.write_text(json.dumps({**TINY, 'out_dir': str(tmp_path / 'cli')}), encoding='utf-8')
        assert main(['simulate', str(path), '--steps', '10', '--no-plots']) == 0
        assert capsys.readouterr().out.startswith('check,params,lhs,rhs,constant,pass')
        assert (tmp_path / 'cli' / 'checks.csv').exists()

    def test_loja_rejects_unknown_source(self, tmp_path):
        assert main(['loja', str(tmp_path / 'notes.txt')]) == 2

    @pytest.mark.slow
    def test_verify_scalar(self):
        assert main(['verify', '--suite', 'scalar']) == 0

    @pytest.mark.slow
    def test_verify_energy_identity_order(self):
        row = {row.check: row for row in run_suite('flow')}['energy_identity']
        assert row.lhs < 1e-3
        assert row.constant >= 3.5
        assert row.passed
