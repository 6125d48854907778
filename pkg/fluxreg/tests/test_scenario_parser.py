import json
from pathlib import Path

import pytest

from fluxreg.exceptions import ParseError, ValidationError
from fluxreg.forms import ScenarioForm
from fluxreg.utils.scenario_parser import ScenarioParser, emit_scenario, parse_scenario, write_scenario

MINIMAL = {'flux': {'type': 'poly', 'coeffs': [0, 0, 0.5]},
           'u0': {'type': 'indicator', 'a': 0, 'b': 1, 'h': 1}}


def errors_of(document):
    form = ScenarioForm(document)
    assert not form.is_valid()
    return form.errors


class TestParser:

    def test_minimal_scenario_gets_defaults(self, tmp_path):
        path = tmp_path / 'burgers.json'
        path.write_text(json.dumps(MINIMAL))
        sc = parse_scenario(path)
        assert sc.M == 1.0
        assert sc.delta == 1 / 64
        assert sc.T == 4.0
        assert sc.seed == 0
        assert sc.checks == []
        assert sc.check_times() == [0.25, 0.5, 1.0, 2.0, 4.0]

    def test_outputs_defaults_and_overrides(self):
        sc = ScenarioParser().parse_document(MINIMAL)
        assert sc.wants('csv') and sc.wants('json') and not sc.wants('pdf')
        assert sc.wants_plot('decay') and not sc.wants_plot('xt')
        assert sc.output_stem('fronts') == 'fronts'

        sc = ScenarioParser().parse_document(dict(MINIMAL, outputs={
            'formats': ['csv'], 'plots': {'xt': True}, 'paths': {'fronts': 'tables/f'}}))
        assert not sc.wants('json')
        assert not sc.wants_plot('xt')
        assert sc.output_stem('fronts') == 'tables/f'
        assert sc.output_stem('events') == 'events'

    def test_round_trip(self, tmp_path):
        document = dict(MINIMAL, M=2.0, delta=0.125, T=1.5, checks=['oleinik', 'length'],
                        times=[0.5, 1.5], tolerances={'kappa': 2.0})
        sc = ScenarioParser().parse_document(document)
        again = ScenarioParser().parse_text(emit_scenario(sc))
        assert again.to_dict() == sc.to_dict()

        path = tmp_path / 'copy.json'
        write_scenario(sc, path)
        assert parse_scenario(path).to_dict() == sc.to_dict()

    def test_malformed_json_reports_line(self):
        with pytest.raises(ParseError) as info:
            ScenarioParser().parse_text('{\n  "flux": {\n  "u0": 3,\n}')
        assert info.value.line is not None
        assert 'line' in str(info.value)

    def test_duplicate_key(self):
        with pytest.raises(ParseError) as info:
            ScenarioParser().parse_text('{"T": 1, "T": 2}')
        assert info.value.key == 'T'

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            parse_scenario(tmp_path / 'nowhere.json')

    def test_validation_lists_every_error(self):
        with pytest.raises(ValidationError) as info:
            ScenarioParser().parse_document({'fluxx': 1, 'u0': MINIMAL['u0']})
        assert "unknown key 'fluxx'" in info.value.errors
        assert "missing key 'flux'" in info.value.errors
        assert info.value.exit_code == 1


class TestForm:

    @pytest.mark.parametrize('change, message', [
        ({'delta': 0.3}, "'delta' must divide 'M' evenly"),
        ({'delta': 2.0}, "'delta' must not exceed 'M'"),
        ({'M': 0.5}, "'M' must bound the initial data"),
        ({'T': 1.0, 'times': [0.5, 2.0]}, "'times' must not exceed 'T'"),
    ])
    def test_cross_key_invariants(self, change, message):
        assert message in errors_of(dict(MINIMAL, **change))

    @pytest.mark.parametrize('change', [
        {'delta': -1.0},
        {'T': 'soon'},
        {'seed': 1.5},
        {'checks': ['entropy']},
        {'tolerances': {'slack': 1.0}},
        {'outputs': {'formats': ['png']}},
        {'n_seeds': 1},
        {'max_events': 0},
        {'flux': {'type': 'poly', 'coeffs': []}},
        {'flux': {'type': 'poly', 'coeffs': [3.0]}},
        {'u0': {'type': 'gaussian'}},
        {'u0': {'type': 'steps', 'breakpoints': [1.0, 0.0], 'values': [0, 1, 0]}},
        {'u0': {'type': 'indicator', 'a': 1.0, 'b': 0.0}},
    ])
    def test_bad_values(self, change):
        assert errors_of(dict(MINIMAL, **change))

    def test_zero_data_default_range(self):
        form = ScenarioForm(dict(MINIMAL, u0={'type': 'steps', 'breakpoints': [], 'values': [0]}))
        assert form.is_valid()
        assert form.save().M == 1.0

    def test_not_an_object(self):
        assert ScenarioForm([1, 2]).is_valid() is False


GOLDEN = sorted((Path(__file__).resolve().parents[2] / 'scenarios').glob('*.json'))


@pytest.mark.parametrize('path', GOLDEN, ids=[p.stem for p in GOLDEN])
def test_golden_scenarios_parse(path):
    sc = parse_scenario(path)
    assert sc.checks
    assert sc.check_times()[-1] <= sc.T
