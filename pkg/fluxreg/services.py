"""
services.py - Service layer for lab runs
Drives one command end to end and keeps the job record up to date
"""

import logging
import os
from datetime import datetime
from typing import Callable, Dict, Optional

import pandas as pd

from fluxreg_system import settings
from .exceptions import CapExceeded, VerificationFailed
from .models import LabJob, Scenario, VerificationReport
from .utils.flux_analysis import (
    Flux,
    curvature_bounds,
    degeneracy,
    inflection_points,
    is_weakly_genuinely_nonlinear,
    nonlinearity_d,
    nonlinearity_exponent,
    psi_profile,
)
from .utils.front_tracking import Caps, evolve
from .utils.harness import Experiment, run_checks, variation_table
from .utils.lagrangian import build_characteristics, characteristics_frame, check_property1, seed_grid
from .utils.plot_mapper import emit_plot
from .utils.report_mapper import ReportMapper
from .utils.riemann import affine_interpolant, solve_riemann
from .utils.variation import Profile

logger = logging.getLogger(__name__)


class LabService:
    """Runs lab commands and writes their artifacts"""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = output_dir or settings.OUTPUT_DIR
        os.makedirs(self.output_dir, exist_ok=True)
        self.mapper = ReportMapper(output_dir=self.output_dir)
        self.last_report: Optional[VerificationReport] = None

    def process(self, job: LabJob, action: Callable[[], Dict[str, str]]) -> LabJob:
        """
        Run one action under the job record

        Args:
            job: LabJob in status pending
            action: callable returning the written artifacts

        Returns:
            Updated LabJob
        """
        try:
            job.status = 'processing'
            logger.info("🚀 %s", job.command)
            job.artifacts.update(action())
            job.status = 'completed'
            job.processed_at = datetime.now()
            logger.info("✅ %s done, %d artifacts", job.command, len(job.artifacts))
            return job
        except Exception as e:
            job.status = 'failed'
            job.error_message = str(e)
            job.processed_at = datetime.now()
            logger.error("❌ %s failed: %s", job.command, e)
            raise

    # commands

    def analyze_flux(self, flux: Flux, M: float, eps: float = settings.PSI_EPS,
                     interval: Optional[tuple] = None) -> Dict[str, str]:
        logger.info("📖 Analyzing %s on [-%g, %g]", flux.to_text(), M, M)
        rng = (-M, M)
        summary = {
            'flux': flux.to_dict(),
            'range': list(rng),
            'weakly_genuinely_nonlinear': is_weakly_genuinely_nonlinear(flux, rng),
            'curvature_bounds': list(curvature_bounds(flux, rng)),
        }
        if not flux.is_affine():
            summary['inflection_points'] = inflection_points(flux, rng)
            summary['degeneracy'] = degeneracy(flux, rng).to_dict()
            summary['nonlinearity_exponent'] = nonlinearity_exponent(flux, M)
        if interval is not None:
            summary['d'] = {'w1': interval[0], 'w2': interval[1],
                            'value': nonlinearity_d(flux, interval[0], interval[1])}
        profile = psi_profile(flux, M, 64, eps)
        return {
            'analysis': self.mapper.write_json(summary, 'flux_analysis.json'),
            'psi': self.mapper.write_csv(profile.to_frame(), 'psi_profile.csv'),
        }

    def riemann(self, flux: Flux, u_l: float, u_r: float, delta: Optional[float] = None) -> Dict:
        """WaveFan as a dict; exact flux unless delta is given"""
        if delta is not None:
            flux = affine_interpolant(flux, max(abs(u_l), abs(u_r), delta), delta)
        return solve_riemann(flux, u_l, u_r).to_dict()

    def evolve(self, scenario: Scenario, max_events: Optional[int] = None) -> Dict[str, str]:
        exp = Experiment(scenario)
        caps = Caps(max_events or scenario.max_events)
        logger.info("📦 Evolving %d initial jumps to T=%g", len(exp.u0.breakpoints), scenario.T)
        try:
            traj = evolve(exp.u0, exp.flux_delta, scenario.T, caps)
        except CapExceeded as e:
            if e.partial is not None:
                self._write_trajectory(e.partial, scenario, 'partial_')
            raise
        artifacts = self._write_trajectory(traj, scenario)
        logger.info("✅ %d fronts, %d interactions", len(traj.fronts), len(traj.events))
        return artifacts

    def _name(self, scenario: Scenario, artifact: str, ext: str, prefix: str = '') -> str:
        head, tail = os.path.split(scenario.output_stem(artifact))
        return self.mapper.path_for(os.path.join(head, f'{prefix}{tail}.{ext}'))

    def _write_trajectory(self, traj, scenario: Scenario, prefix: str = '') -> Dict[str, str]:
        """fronts, events and profile tables, the JSON dump and the declared plots"""
        artifacts: Dict[str, str] = {}
        times = sorted({t for t in scenario.check_times() if t <= traj.T} | {traj.T})
        if scenario.wants('csv'):
            fronts = pd.DataFrame([f.to_dict() for f in sorted(traj.fronts.values(), key=lambda f: f.id)],
                                  columns=['id', 't0', 'x0', 'sigma', 'left_value', 'right_value',
                                           'birth', 'death'])
            events = pd.DataFrame(
                [{'t': e.time, 'x': e.x, 'kind': e.kind, 'n_in': len(e.incoming), 'n_out': len(e.outgoing),
                  'ul_ext': e.ul_ext, 'ur_ext': e.ur_ext} for e in traj.origins + traj.events],
                columns=['t', 'x', 'kind', 'n_in', 'n_out', 'ul_ext', 'ur_ext'],
            )
            profile = pd.DataFrame(
                [{'t': t, 'x': x, 'u': u} for t in times
                 for x, u in _profile_points(traj, t)],
                columns=['t', 'x', 'u'],
            )
            artifacts['fronts'] = self.mapper.write_csv(fronts, self._name(scenario, 'fronts', 'csv', prefix))
            artifacts['events'] = self.mapper.write_csv(events, self._name(scenario, 'events', 'csv', prefix))
            artifacts['profile'] = self.mapper.write_csv(profile, self._name(scenario, 'profile', 'csv', prefix))
        if scenario.wants('json'):
            artifacts['trajectory'] = self.mapper.write_json(
                traj.to_dict(), self._name(scenario, 'trajectory', 'json', prefix))
        if scenario.wants_plot('xt'):
            artifacts['xt'] = emit_plot({'trajectory': traj}, 'xt', self._name(scenario, 'xt', 'svg', prefix))
        if scenario.wants_plot('profile'):
            artifacts['profile_plot'] = emit_plot({'solution': traj.solution_at(traj.T), 't': traj.T},
                                                  'profile', self._name(scenario, 'profile', 'svg', prefix))
        return artifacts

    def characteristics(self, scenario: Scenario, n_times: int = 64) -> Dict[str, str]:
        exp = Experiment(scenario)
        traj = exp.trajectory
        paths = build_characteristics(traj, seed_grid(traj, scenario.n_seeds))
        failures = sum(check_property1(traj, p, n_times).failures for p in paths if not p.cancelled)
        logger.info("✅ %d characteristics, %d Property 1 failures", len(paths), failures)
        return {
            'characteristics': self.mapper.write_csv(characteristics_frame(paths), 'characteristics.csv'),
            'xt': emit_plot({'trajectory': traj, 'paths': paths}, 'xt',
                            self.mapper.path_for('xt.svg')),
        }

    def variation(self, scenario: Scenario) -> Dict[str, str]:
        table = variation_table(scenario)
        return {'variation': self.mapper.write_csv(table, 'variation.csv')}

    def verify(self, scenario: Scenario, pdf: bool = False) -> Dict[str, str]:
        """
        Run the scenario's checks and write the declared outputs; --pdf adds
        the PDF report even when the scenario does not declare it
        """
        logger.info("🔍 Running checks %s", ', '.join(scenario.checks) or '(none)')
        report = run_checks(scenario)
        self.last_report = report
        stem = scenario.output_stem('verification')
        artifacts = self.mapper.write_verification(
            report, stem, [fmt for fmt in ('csv', 'json') if scenario.wants(fmt)])
        if pdf or scenario.wants('pdf'):
            artifacts['pdf'] = self.mapper.generate_report_pdf(report, scenario, stem)
        decay_rows = [r for r in report.rows if r.kind in ('tv_speed', 'frac_bv')]
        if decay_rows and scenario.wants_plot('decay'):
            decay = VerificationReport(rows=decay_rows, summary=report.summary)
            artifacts['decay'] = emit_plot({'report': decay}, 'decay',
                                           self.mapper.path_for(f"{scenario.output_stem('decay')}.svg"))
        if not report.passed:
            raise VerificationFailed(f"{report.violations} of {len(report.rows)} rows violated")
        return artifacts

    def xt_plot(self, scenario: Scenario, with_characteristics: bool = True) -> Dict[str, str]:
        exp = Experiment(scenario)
        traj = exp.trajectory
        paths = build_characteristics(traj, seed_grid(traj, scenario.n_seeds)) if with_characteristics else []
        return {'xt': emit_plot({'trajectory': traj, 'paths': paths}, 'xt', self.mapper.path_for('xt.svg'))}

def _profile_points(traj, t: float):
    """(x, u) with both one-sided values at every front"""
    prof = Profile.from_step_function(traj.solution_at(t))
    return zip(prof.xs.tolist(), prof.vs.tolist())



def print_run_summary(job: LabJob, report: Optional[VerificationReport] = None) -> None:
    """Human summary block after a command"""
    print(f"\n{'=' * 70}")
    print(f"📊 {job.command.upper()} SUMMARY")
    print(f"{'=' * 70}")
    print(f"Status: {job.status}")
    for name, path in sorted(job.artifacts.items()):
        print(f"  {name:<18} {path}")
    if report is not None:
        print(f"Rows: {len(report.rows)}   Violations: {report.violations}")
        for kind, info in sorted(report.summary.items()):
            if isinstance(info, dict):
                values = ', '.join(f"{k}={v}" for k, v in sorted(info.items())
                                   if isinstance(v, (int, float)) and not isinstance(v, bool))
                print(f"  {kind:<18} {values}")
    print(f"{'=' * 70}\n")
