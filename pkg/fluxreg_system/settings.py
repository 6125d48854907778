
import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Artifacts (CSV, JSON, SVG, PDF) land here unless a scenario says otherwise
OUTPUT_DIR = os.environ.get('FLUXREG_OUTPUT_DIR', os.path.join(BASE_DIR, 'output'))


def threads_from_env(environ=os.environ) -> int:
    """FLUXREG_THREADS when it is a positive integer, else the CPU count"""
    try:
        value = int(environ.get('FLUXREG_THREADS', ''))
    except ValueError:
        return os.cpu_count() or 1
    return value if value > 0 else os.cpu_count() or 1


# Parallelism cap for the verification harness
THREADS = threads_from_env()


# Flux analysis
# Roots of f'' are isolated on a uniform grid, then refined by brentq

ROOT_GRID_CELLS = 1024
ROOT_REL_TOL = 1e-12          # |f''(w)| <= ROOT_REL_TOL * scale at a root
DERIV_REL_TOL = 1e-9          # |f^(p+1)(w)| > DERIV_REL_TOL * scale
ROOT_SEPARATION = 1e-9        # roots closer than this (times range width) are merged
GOLDEN_TOL = 1e-10            # lambda tolerance (times scale) for the d-functional
N_GRID_POINTS = 256           # w-grid for the N-functional
ENVELOPE_TOL = 1e-10          # one-sidedness slack (times scale) for envelopes
ENVELOPE_SAMPLES = 2048       # sample count when enveloping an exact polynomial flux
RAREFACTION_STEPS = 16        # jumps per graph piece when solving with an exact flux


# Front tracking

EVENT_CAP = 10 ** 7
EVENT_TIME_TOL = 1e-12        # times max(1, T)
EVENT_SPACE_TOL = 1e-12       # times domain width
X_RESOLUTION = 1e-3           # sampling step for continuous initial data


# Variation functionals

TV_SIZE_CAP = 20000
PHI_SAMPLE_POINTS = 128


# Verification slacks

RHO_LOWER = 0.9               # multiplicative slack for lower bounds
RHO_UPPER = 0.2               # upper bounds are checked against (1 + RHO_UPPER)
OLEINIK_RHO = 0.05
KAPPA = 4.0                   # additive O(delta) slack multiplier
BVPHI_STABILITY = 0.2         # relative change allowed when delta is halved
DECAY_CALIBRATION_T = 1.0       # C* is fitted at the check time nearest this
PSI_EPS = 0.5


# Scenario defaults

DEFAULT_T = 4.0
DEFAULT_DELTA_DIVISOR = 64    # delta = M / 64
DEFAULT_SEED = 0
DEFAULT_TIMES = [0.25, 0.5, 1.0, 2.0, 4.0]
DEFAULT_N_PAIRS = 100
DEFAULT_N_SEEDS = 200


# Output formatting

FLOAT_FORMAT = '%.17g'
DEFAULT_OUTPUT_FORMATS = ['csv', 'json', 'svg']
DEFAULT_PLOTS = {'decay': True, 'profile': False, 'xt': False}
