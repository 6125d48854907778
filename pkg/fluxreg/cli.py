#!/usr/bin/env python3
"""
cli.py - Command-line front end of the flux regularity lab

Usage:
    lab.py analyze-flux --flux poly:0,0,0,1 [--M 1]
    lab.py riemann --flux poly:0,0,0,1 --ul 1 --ur -1 [--delta 0.125]
    lab.py evolve --scenario burgers.json [--max-events N]
    lab.py characteristics --scenario burgers.json
    lab.py variation --scenario burgers.json
    lab.py verify --scenario burgers.json [--pdf]
    lab.py xt-plot --scenario burgers.json

Exit codes: 0 success, 1 usage or input error, 2 verification failure,
3 event cap exceeded. Errors go to stderr as one line:
    error kind=<Name> message="..."
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from fluxreg_system import settings
from .exceptions import FluxLabError, UsageError
from .models import LabJob
from .services import LabService, print_run_summary
from .utils.flux_analysis import Flux
from .utils.scenario_parser import parse_scenario

logger = logging.getLogger(__name__)

COMMANDS = ('analyze-flux', 'riemann', 'evolve', 'characteristics', 'variation', 'verify', 'xt-plot')


class LabArgumentParser(argparse.ArgumentParser):
    """Usage errors become UsageError instead of exiting with status 2"""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = LabArgumentParser(
        prog='lab.py',
        description='Entropy solutions of scalar conservation laws: front tracking, '
                    'characteristics and regularity checks',
    )
    parser.add_argument('--verbose', '-v', action='store_true', help='debug logging')
    parser.add_argument('--out', default=None, help=f'output directory (default {settings.OUTPUT_DIR})')
    sub = parser.add_subparsers(dest='command', parser_class=LabArgumentParser)

    p = sub.add_parser('analyze-flux', help='inflection points, degeneracy, N and Psi profiles')
    p.add_argument('--flux', help='poly:c0,c1,...')
    p.add_argument('--scenario')
    p.add_argument('--M', type=float, default=None, help='half-width of the value range')
    p.add_argument('--eps', type=float, default=settings.PSI_EPS)
    p.add_argument('--interval', type=float, nargs=2, metavar=('W1', 'W2'),
                   help='also report d(W1, W2)')

    p = sub.add_parser('riemann', help='entropy fan for one jump, as JSON')
    p.add_argument('--flux', required=True)
    p.add_argument('--ul', type=float, required=True)
    p.add_argument('--ur', type=float, required=True)
    p.add_argument('--delta', type=float, default=None, help='use the piecewise-affine interpolant')

    p = sub.add_parser('evolve', help='front tracking up to T')
    p.add_argument('--scenario', required=True)
    p.add_argument('--max-events', type=int, default=None)

    for name, text in (('characteristics', 'characteristic paths and x-t diagram'),
                       ('variation', 'variation functionals over time')):
        p = sub.add_parser(name, help=text)
        p.add_argument('--scenario', required=True)

    p = sub.add_parser('verify', help='run the checks named by the scenario')
    p.add_argument('--scenario', required=True)
    p.add_argument('--pdf', action='store_true', help='also write a PDF report')

    p = sub.add_parser('xt-plot', help='x-t diagram of fronts and characteristics')
    p.add_argument('--scenario', required=True)
    p.add_argument('--no-characteristics', action='store_true')
    return parser


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )


def _flux_and_range(args):
    if args.scenario:
        scenario = parse_scenario(args.scenario)
        return scenario.flux, args.M or scenario.M
    if not args.flux:
        raise UsageError("analyze-flux needs --flux or --scenario")
    return Flux.parse(args.flux), args.M or 1.0


def run(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run the command and return the process exit code"""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e.record(), file=sys.stderr)
        return e.exit_code
    configure_logging(args.verbose)
    if args.command is None:
        print(UsageError(f"missing command, one of {', '.join(COMMANDS)}").record(), file=sys.stderr)
        return 1

    service = LabService(output_dir=args.out)
    job = LabJob(command=args.command, scenario_path=getattr(args, 'scenario', None))
    try:
        if args.command == 'riemann':
            fan = service.riemann(Flux.parse(args.flux), args.ul, args.ur, args.delta)
            print(json.dumps(fan, indent=2, sort_keys=True))
            return 0
        if args.command == 'analyze-flux':
            flux, M = _flux_and_range(args)
            action = lambda: service.analyze_flux(flux, M, args.eps, args.interval)
        else:
            scenario = parse_scenario(args.scenario)
            action = {
                'evolve': lambda: service.evolve(scenario, args.max_events if args.command == 'evolve' else None),
                'characteristics': lambda: service.characteristics(scenario),
                'variation': lambda: service.variation(scenario),
                'verify': lambda: service.verify(scenario, pdf=getattr(args, 'pdf', False)),
                'xt-plot': lambda: service.xt_plot(
                    scenario, not getattr(args, 'no_characteristics', False)),
            }[args.command]
        service.process(job, action)
    except ValueError as e:
        error = UsageError(str(e))
        print(error.record(), file=sys.stderr)
        return error.exit_code
    except FluxLabError as e:
        print(e.record(), file=sys.stderr)
        if service.last_report is not None:
            print_run_summary(job, service.last_report)
        return e.exit_code
    print_run_summary(job, service.last_report)
    return 0


def main():
    sys.exit(run())


if __name__ == '__main__':
    main()
