import json
import os

import pytest

from fluxreg.cli import run
from fluxreg.exceptions import DegenerateFlux
from fluxreg.models import LabJob
from fluxreg.services import LabService
from fluxreg_system import settings

BURGERS = {'type': 'poly', 'coeffs': [0, 0, 0.5]}
INDICATOR = {'type': 'indicator', 'a': 0, 'b': 1, 'h': 1}


@pytest.fixture
def write_scenario(tmp_path):
    def write(**document):
        path = tmp_path / 'scenario.json'
        path.write_text(json.dumps(dict({'flux': BURGERS, 'u0': INDICATOR}, **document)))
        return str(path)
    return write


def test_riemann_prints_the_fan(capsys):
    code = run(['riemann', '--flux', 'poly:0,0,0,1', '--ul', '1', '--ur', '-1'])
    assert code == 0
    fan = json.loads(capsys.readouterr().out)
    assert fan['waves'][0]['sigma'] == pytest.approx(0.75)
    assert fan['waves'][0]['kind'] == 'contact'


def test_riemann_on_the_grid(capsys):
    assert run(['riemann', '--flux', 'poly:0,0,0.5', '--ul', '0', '--ur', '1', '--delta', '0.25']) == 0
    fan = json.loads(capsys.readouterr().out)
    assert [w['sigma'] for w in fan['waves']] == pytest.approx([0.125, 0.375, 0.625, 0.875])


def test_evolve_writes_trajectory(write_scenario, output_dir):
    assert run(['--out', output_dir, 'evolve', '--scenario', write_scenario(delta=0.25, T=2.0)]) == 0
    for name in ('fronts.csv', 'events.csv', 'profile.csv', 'trajectory.json'):
        assert os.path.exists(os.path.join(output_dir, name))
    with open(os.path.join(output_dir, 'events.csv')) as f:
        lines = f.read().splitlines()
    assert lines[0] == 't,x,kind,n_in,n_out,ul_ext,ur_ext'
    assert lines[1].split(',')[2] == 'initial'
    with open(os.path.join(output_dir, 'profile.csv')) as f:
        lines = f.read().splitlines()
    assert lines[0] == 't,x,u'
    assert {line.split(',')[0] for line in lines[1:]} == {'0.25', '0.5', '1', '2'}
    assert not os.path.exists(os.path.join(output_dir, 'xt.svg'))


def test_evolve_honors_declared_outputs(write_scenario, output_dir):
    path = write_scenario(delta=0.25, T=1.0,
                          outputs={'formats': ['csv', 'svg'], 'plots': {'xt': True, 'profile': True},
                                   'paths': {'fronts': 'tables/burgers_fronts'}})
    assert run(['--out', output_dir, 'evolve', '--scenario', path]) == 0
    for name in ('tables/burgers_fronts.csv', 'events.csv', 'profile.csv', 'xt.svg', 'profile.svg'):
        assert os.path.exists(os.path.join(output_dir, name))
    assert not os.path.exists(os.path.join(output_dir, 'trajectory.json'))


def test_event_cap_exit_code(write_scenario, output_dir, capsys):
    path = write_scenario(delta=0.25, T=10.0)
    assert run(['--out', output_dir, 'evolve', '--scenario', path, '--max-events', '1']) == 3
    assert capsys.readouterr().err.startswith('error kind=CapExceeded')
    assert os.path.exists(os.path.join(output_dir, 'partial_fronts.csv'))


def test_verify_passes(write_scenario, output_dir):
    path = write_scenario(delta=0.0625, T=2.0, times=[1.0, 2.0], checks=['oleinik'])
    assert run(['--out', output_dir, 'verify', '--scenario', path, '--pdf']) == 0
    with open(os.path.join(output_dir, 'verification.csv')) as f:
        assert f.readline().strip() == 'kind,t,pair_id,lhs,rhs,margin,pass'
    assert os.path.exists(os.path.join(output_dir, 'verification.pdf'))


def test_verify_honors_declared_outputs(write_scenario, output_dir):
    path = write_scenario(delta=0.0625, T=1.0, times=[0.5, 1.0], checks=['oleinik', 'tv_speed'],
                          outputs={'formats': ['csv', 'pdf'], 'paths': {'verification': 'reports/burgers'}})
    assert run(['--out', output_dir, 'verify', '--scenario', path]) == 0
    assert os.path.exists(os.path.join(output_dir, 'reports', 'burgers.csv'))
    assert os.path.exists(os.path.join(output_dir, 'reports', 'burgers.pdf'))
    assert not os.path.exists(os.path.join(output_dir, 'reports', 'burgers.json'))
    # svg is not declared, so no decay plot
    assert not os.path.exists(os.path.join(output_dir, 'decay.svg'))


def test_verify_default_outputs(write_scenario, output_dir):
    path = write_scenario(delta=0.0625, T=1.0, times=[0.5, 1.0], checks=['tv_speed'])
    assert run(['--out', output_dir, 'verify', '--scenario', path]) == 0
    for name in ('verification.csv', 'verification.json', 'decay.svg'):
        assert os.path.exists(os.path.join(output_dir, name))
    assert not os.path.exists(os.path.join(output_dir, 'verification.pdf'))


def test_verify_failure_exit_code(write_scenario, output_dir, capsys):
    # staircase quotients over four grid cells reach 5/4 against the bare bound 1
    path = write_scenario(u0={'type': 'steps', 'breakpoints': [0], 'values': [0, 1]},
                          delta=0.0625, T=1.0, times=[1.0], checks=['oleinik'],
                          tolerances={'oleinik_rho': 1e-9, 'kappa': 1e-9})
    assert run(['--out', output_dir, 'verify', '--scenario', path]) == 2
    assert capsys.readouterr().err.startswith('error kind=VerificationFailed')
    assert os.path.exists(os.path.join(output_dir, 'verification.csv'))


def test_characteristics_and_plot(write_scenario, output_dir):
    path = write_scenario(delta=0.125, T=1.0, n_seeds=10)
    assert run(['--out', output_dir, 'characteristics', '--scenario', path]) == 0
    assert run(['--out', output_dir, 'xt-plot', '--scenario', path, '--no-characteristics']) == 0
    assert os.path.exists(os.path.join(output_dir, 'characteristics.csv'))
    with open(os.path.join(output_dir, 'xt.svg')) as f:
        assert '<svg' in f.read()


def test_analyze_flux(output_dir, monkeypatch):
    monkeypatch.setattr(settings, 'N_GRID_POINTS', 16)
    code = run(['--out', output_dir, 'analyze-flux', '--flux', 'poly:0,0,0.5', '--interval', '0', '1'])
    assert code == 0
    with open(os.path.join(output_dir, 'flux_analysis.json')) as f:
        summary = json.load(f)
    assert summary['d']['value'] == pytest.approx(0.125)
    assert summary['degeneracy']['overall'] == 1
    assert os.path.exists(os.path.join(output_dir, 'psi_profile.csv'))


@pytest.mark.parametrize('argv', [['bogus'], [], ['riemann', '--flux', 'poly:0,0,1'],
                                  ['analyze-flux']])
def test_usage_errors(argv, capsys):
    assert run(argv) == 1
    assert capsys.readouterr().err.startswith('error kind=UsageError')


def test_bad_scenario_file(tmp_path, output_dir, capsys):
    path = tmp_path / 'broken.json'
    path.write_text('{"flux": ')
    assert run(['--out', output_dir, 'evolve', '--scenario', str(path)]) == 1
    assert capsys.readouterr().err.startswith('error kind=ParseError')


@pytest.mark.parametrize('outputs', [
    {'formats': ['png']},
    {'plots': {'histogram': True}},
    {'plots': {'xt': 'yes'}},
    {'paths': {'summary': 'out'}},
    {'target': 'pdf'},
])
def test_invalid_outputs(write_scenario, output_dir, capsys, outputs):
    assert run(['--out', output_dir, 'evolve', '--scenario', write_scenario(outputs=outputs)]) == 1
    assert 'kind=ValidationError' in capsys.readouterr().err


def test_invalid_scenario(write_scenario, output_dir, capsys):
    assert run(['--out', output_dir, 'evolve', '--scenario', write_scenario(delta=0.3)]) == 1
    assert 'kind=ValidationError' in capsys.readouterr().err


def test_failed_job_is_recorded(output_dir):
    service = LabService(output_dir)
    job = LabJob(command='analyze-flux')

    def fail():
        raise DegenerateFlux('affine')

    with pytest.raises(DegenerateFlux):
        service.process(job, fail)
    assert job.status == 'failed'
    assert job.error_message == 'affine'
    assert job.processed_at is not None
