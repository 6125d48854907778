"""
models.py - Records shared by the lab components
Scenario settings, verification rows and the job record of one lab run
"""

from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Dict, List, Optional

import pandas as pd

from fluxreg_system import settings
from .utils.flux_analysis import Flux


CHECK_KINDS = ('oleinik', 'length', 'tv_speed', 'frac_bv', 'bvphi', 'tvs_tv', 'sign', 'linear')


@dataclass
class Tolerances:
    rho_lower: float = settings.RHO_LOWER
    rho_upper: float = settings.RHO_UPPER
    oleinik_rho: float = settings.OLEINIK_RHO
    kappa: float = settings.KAPPA
    bvphi_stability: float = settings.BVPHI_STABILITY
    psi_eps: float = settings.PSI_EPS

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class Scenario:
    """One experiment: flux, initial data, grid spacing and the checks to run"""
    flux: Flux
    u0: Dict
    M: float
    delta: float
    T: float = settings.DEFAULT_T
    seed: int = settings.DEFAULT_SEED
    checks: List[str] = field(default_factory=list)
    tolerances: Tolerances = field(default_factory=Tolerances)
    outputs: Dict = field(default_factory=dict)
    times: List[float] = field(default_factory=list)
    n_pairs: int = settings.DEFAULT_N_PAIRS
    n_seeds: int = settings.DEFAULT_N_SEEDS
    max_events: int = settings.EVENT_CAP
    x_resolution: float = settings.X_RESOLUTION

    @property
    def value_range(self):
        return -self.M, self.M

    # declared outputs

    def wants(self, fmt: str) -> bool:
        return fmt in self.outputs.get('formats', settings.DEFAULT_OUTPUT_FORMATS)

    def wants_plot(self, name: str) -> bool:
        plots = dict(settings.DEFAULT_PLOTS, **self.outputs.get('plots', {}))
        return self.wants('svg') and bool(plots.get(name))

    def output_stem(self, artifact: str) -> str:
        """File name without extension, relative to the output directory unless absolute"""
        return self.outputs.get('paths', {}).get(artifact, artifact)

    def check_times(self) -> List[float]:
        times = self.times or [t for t in settings.DEFAULT_TIMES if t <= self.T]
        return sorted(t for t in times if 0.0 < t <= self.T) or [self.T]

    def with_delta(self, delta: float) -> 'Scenario':
        data = dict(self.__dict__)
        data['delta'] = delta
        return Scenario(**data)

    def to_dict(self) -> Dict:
        return {
            'flux': self.flux.to_dict(),
            'u0': self.u0,
            'M': self.M,
            'delta': self.delta,
            'T': self.T,
            'seed': self.seed,
            'checks': list(self.checks),
            'tolerances': self.tolerances.to_dict(),
            'outputs': self.outputs,
            'times': list(self.times),
            'n_pairs': self.n_pairs,
            'n_seeds': self.n_seeds,
            'max_events': self.max_events,
            'x_resolution': self.x_resolution,
        }


@dataclass
class CheckRow:
    kind: str
    t: float
    pair_id: str
    lhs: float
    rhs: float
    margin: float
    passed: bool


REPORT_COLUMNS = ['kind', 't', 'pair_id', 'lhs', 'rhs', 'margin', 'pass']


@dataclass
class VerificationReport:
    rows: List[CheckRow] = field(default_factory=list)
    summary: Dict = field(default_factory=dict)

    @property
    def violations(self) -> int:
        return sum(not r.passed for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def sort(self) -> 'VerificationReport':
        self.rows.sort(key=lambda r: (r.kind, r.t, r.pair_id))
        return self

    @classmethod
    def combine(cls, reports: List['VerificationReport']) -> 'VerificationReport':
        combined = cls()
        for report in reports:
            combined.rows.extend(report.rows)
            for kind, info in report.summary.items():
                combined.summary[kind] = info
        combined.summary['violations'] = combined.violations
        return combined

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[r.kind, r.t, r.pair_id, r.lhs, r.rhs, r.margin, r.passed] for r in self.rows],
            columns=REPORT_COLUMNS,
        )

    def to_dict(self) -> Dict:
        return {
            'passed': self.passed,
            'violations': self.violations,
            'rows': len(self.rows),
            'summary': self.summary,
        }


@dataclass
class LabJob:
    """Status record of one command run (pending -> processing -> completed | failed)"""
    command: str
    scenario_path: Optional[str] = None
    status: str = 'pending'
    error_message: str = ''
    created_at: datetime = field(default_factory=datetime.now)
    processed_at: Optional[datetime] = None
    artifacts: Dict[str, str] = field(default_factory=dict)

    def __str__(self):
        return f"{self.command} ({self.status})"
