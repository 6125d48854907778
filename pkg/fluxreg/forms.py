"""
forms.py - Validation of scenario documents
Each key has its own clean_<key> method; every violation is collected
before the form reports
"""

import math
from typing import Any, Dict, List

from fluxreg_system import settings
from .exceptions import UnsupportedFlux
from .models import CHECK_KINDS, Scenario, Tolerances
from .utils.flux_analysis import Flux

ALLOWED_KEYS = ('flux', 'u0', 'M', 'delta', 'T', 'seed', 'checks', 'tolerances', 'outputs',
                'times', 'n_pairs', 'n_seeds', 'max_events', 'x_resolution')
REQUIRED_KEYS = ('flux', 'u0')
U0_TYPES = {
    'steps': ('breakpoints', 'values'),
    'indicator': ('a', 'b'),
    'bump': ('a', 'b'),
    'sawtooth': ('a', 'b'),
    'random': ('a', 'b'),
    'samples': ('xs', 'vs'),
}
TOLERANCE_KEYS = tuple(Tolerances().to_dict())
OUTPUT_FORMATS = ('csv', 'json', 'svg', 'pdf')
OUTPUT_ARTIFACTS = ('verification', 'decay', 'fronts', 'events', 'profile', 'trajectory', 'xt')


class FormError(Exception):
    pass


def _number(value: Any, key: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise FormError(f"'{key}' must be a finite number")
    if positive and value <= 0:
        raise FormError(f"'{key}' must be positive")
    return float(value)


def _integer(value: Any, key: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise FormError(f"'{key}' must be an integer >= {minimum}")
    return value


class ScenarioForm:
    """Validates a parsed scenario document and builds the Scenario"""

    def __init__(self, data: Dict):
        self.data = data
        self.cleaned_data: Dict = {}
        self.errors: List[str] = []

    def is_valid(self) -> bool:
        if not isinstance(self.data, dict):
            self.errors = ["Scenario must be a JSON object"]
            return False

        for key in sorted(set(self.data) - set(ALLOWED_KEYS)):
            self.errors.append(f"unknown key '{key}'")
        for key in REQUIRED_KEYS:
            if key not in self.data:
                self.errors.append(f"missing key '{key}'")

        for key in ALLOWED_KEYS:
            if key not in self.data:
                continue
            try:
                self.cleaned_data[key] = getattr(self, f'clean_{key}')(self.data[key])
            except FormError as e:
                self.errors.append(str(e))

        if not self.errors:
            try:
                self.clean()
            except FormError as e:
                self.errors.append(str(e))
        return not self.errors

    # per-key cleaning

    def clean_flux(self, value):
        if not isinstance(value, dict):
            raise FormError("'flux' must be an object like {\"type\": \"poly\", \"coeffs\": [...]}")
        if set(value) - {'type', 'coeffs'}:
            raise FormError(f"'flux' has unknown keys {sorted(set(value) - {'type', 'coeffs'})}")
        coeffs = value.get('coeffs')
        if not isinstance(coeffs, list) or not coeffs:
            raise FormError("'flux.coeffs' must be a nonempty list")
        for c in coeffs:
            _number(c, 'flux.coeffs')
        try:
            return Flux.from_dict(value)
        except UnsupportedFlux as e:
            raise FormError(f"'flux': {e}")

    def clean_u0(self, value):
        if not isinstance(value, dict) or value.get('type') not in U0_TYPES:
            raise FormError(f"'u0.type' must be one of {sorted(U0_TYPES)}")
        missing = [k for k in U0_TYPES[value['type']] if k not in value]
        if missing:
            raise FormError(f"'u0' of type {value['type']} misses {missing}")
        kind = value['type']
        if kind == 'steps':
            if len(value['values']) != len(value['breakpoints']) + 1:
                raise FormError("'u0.values' needs one more entry than 'u0.breakpoints'")
            if list(value['breakpoints']) != sorted(value['breakpoints']):
                raise FormError("'u0.breakpoints' must be increasing")
        elif kind == 'samples':
            if len(value['xs']) != len(value['vs']) or len(value['xs']) < 2:
                raise FormError("'u0.xs' and 'u0.vs' must have equal length >= 2")
        elif _number(value['a'], 'u0.a') >= _number(value['b'], 'u0.b'):
            raise FormError("'u0.a' must be smaller than 'u0.b'")
        return value

    def clean_M(self, value):
        return _number(value, 'M', positive=True)

    def clean_delta(self, value):
        return _number(value, 'delta', positive=True)

    def clean_T(self, value):
        return _number(value, 'T', positive=True)

    def clean_seed(self, value):
        return _integer(value, 'seed')

    def clean_checks(self, value):
        if not isinstance(value, list):
            raise FormError("'checks' must be a list")
        unknown = [c for c in value if c not in CHECK_KINDS]
        if unknown:
            raise FormError(f"unknown checks {unknown}; expected a subset of {list(CHECK_KINDS)}")
        return list(value)

    def clean_tolerances(self, value):
        if not isinstance(value, dict):
            raise FormError("'tolerances' must be an object")
        unknown = sorted(set(value) - set(TOLERANCE_KEYS))
        if unknown:
            raise FormError(f"unknown tolerance keys {unknown}")
        return Tolerances(**{k: _number(v, f'tolerances.{k}', positive=True) for k, v in value.items()})

    def clean_outputs(self, value):
        if not isinstance(value, dict):
            raise FormError("'outputs' must be an object")
        unknown = sorted(set(value) - {'formats', 'paths', 'plots'})
        if unknown:
            raise FormError(f"'outputs' has unknown keys {unknown}")
        formats = value.get('formats', [])
        if not isinstance(formats, list):
            raise FormError("'outputs.formats' must be a list")
        bad = [f for f in formats if f not in OUTPUT_FORMATS]
        if bad:
            raise FormError(f"unknown output formats {bad}")
        paths = value.get('paths', {})
        if not isinstance(paths, dict) or not all(isinstance(p, str) and p for p in paths.values()):
            raise FormError("'outputs.paths' must map artifacts to file names")
        bad = sorted(set(paths) - set(OUTPUT_ARTIFACTS))
        if bad:
            raise FormError(f"unknown output artifacts {bad}; expected a subset of {list(OUTPUT_ARTIFACTS)}")
        plots = value.get('plots', {})
        if not isinstance(plots, dict) or not all(isinstance(v, bool) for v in plots.values()):
            raise FormError("'outputs.plots' must map plot names to true or false")
        bad = sorted(set(plots) - set(settings.DEFAULT_PLOTS))
        if bad:
            raise FormError(f"unknown plots {bad}")
        return value

    def clean_times(self, value):
        if not isinstance(value, list):
            raise FormError("'times' must be a list")
        return [_number(t, 'times', positive=True) for t in value]

    def clean_n_pairs(self, value):
        return _integer(value, 'n_pairs', minimum=1)

    def clean_n_seeds(self, value):
        return _integer(value, 'n_seeds', minimum=2)

    def clean_max_events(self, value):
        return _integer(value, 'max_events', minimum=1)

    def clean_x_resolution(self, value):
        return _number(value, 'x_resolution', positive=True)

    # cross-key invariants

    def clean(self):
        data = self.cleaned_data
        u0 = data['u0']
        if 'M' not in data:
            data['M'] = self._sup_norm(u0)
            if data['M'] <= 0.0:
                data['M'] = 1.0
        if 'delta' not in data:
            data['delta'] = data['M'] / settings.DEFAULT_DELTA_DIVISOR
        if data['delta'] > data['M']:
            raise FormError("'delta' must not exceed 'M'")
        cells = data['M'] / data['delta']
        if abs(cells - round(cells)) > 1e-9 * cells:
            raise FormError("'delta' must divide 'M' evenly")
        if self._sup_norm(u0) > data['M'] * (1.0 + 1e-12):
            raise FormError("'M' must bound the initial data")
        T = data.get('T', settings.DEFAULT_T)
        if any(t > T for t in data.get('times', [])):
            raise FormError("'times' must not exceed 'T'")

    @staticmethod
    def _sup_norm(u0: Dict) -> float:
        kind = u0['type']
        if kind == 'steps':
            return max(abs(float(v)) for v in u0['values'])
        if kind == 'samples':
            return max(abs(float(v)) for v in u0['vs'])
        return abs(float(u0.get('h', 1.0)))

    def save(self) -> Scenario:
        if self.errors or not self.cleaned_data:
            raise FormError("save() called on an invalid form")
        return Scenario(**self.cleaned_data)
