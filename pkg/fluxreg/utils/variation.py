#!/usr/bin/env python3
"""
variation.py - Generalized variation functionals on sampled profiles
TV, TV^Phi by dynamic programming over point selections, and one-sided
Lipschitz quotients
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from fluxreg_system import settings
from ..exceptions import InvalidPhi, SizeCap

logger = logging.getLogger(__name__)


@dataclass
class Profile:
    """Values vs at strictly increasing positions xs"""
    xs: np.ndarray
    vs: np.ndarray

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.vs = np.asarray(self.vs, dtype=float)
        if self.xs.shape != self.vs.shape:
            raise ValueError("Profile positions and values differ in length")
        if np.any(np.diff(self.xs) <= 0.0):
            raise ValueError("Profile positions must be strictly increasing")

    def __len__(self) -> int:
        return len(self.vs)

    @classmethod
    def from_values(cls, vs) -> 'Profile':
        vs = np.asarray(vs, dtype=float)
        return cls(np.arange(len(vs), dtype=float), vs)

    @classmethod
    def from_step_function(cls, sf, a: Optional[float] = None, b: Optional[float] = None) -> 'Profile':
        """
        Both one-sided values at every jump; the right value sits one ulp to
        the right. With a window (a, b) only the part inside is kept.
        """
        bps, vals = sf.breakpoints, sf.values
        lo = -np.inf if a is None else a
        hi = np.inf if b is None else b
        inside = np.nonzero((bps > lo) & (bps < hi))[0]

        xs, vs = [], []
        if a is not None:
            xs.append(a)
            vs.append(float(sf(a)))
        for k in inside:
            if not xs or xs[-1] < bps[k]:
                xs.append(float(bps[k]))
                vs.append(float(vals[k]))
            xs.append(float(np.nextafter(bps[k], np.inf)))
            vs.append(float(vals[k + 1]))
        if b is not None and (not xs or xs[-1] < b):
            xs.append(b)
            vs.append(float(vals[np.searchsorted(bps, b, side='left')]))
        if not xs:
            xs, vs = [0.0], [float(vals[0])]
        return cls(np.asarray(xs), np.asarray(vs))

    def mapped(self, fn: Callable) -> 'Profile':
        """Same positions, values fn(vs)"""
        return Profile(self.xs, np.asarray(fn(self.vs), dtype=float))


class PhiSpec:
    """
    Nonnegative nondecreasing Phi with Phi(0) = 0
    kind is 'power' (h^p), 'tabulated' (a sampled Phi^eps) or 'custom'
    """

    def __init__(self, kind: str, evaluator: Callable, exponent: Optional[float] = None):
        self.kind = kind
        self.evaluator = evaluator
        self.exponent = exponent

    @classmethod
    def power(cls, p: float) -> 'PhiSpec':
        if p <= 0.0:
            raise InvalidPhi(f"Power exponent must be positive, got {p!r}")
        return cls('power', lambda h: np.power(h, p), exponent=p)

    @classmethod
    def tabulated(cls, profile) -> 'PhiSpec':
        """Phi^eps from a NonlinearityProfile"""
        return cls('tabulated', profile.phi_eps)

    @classmethod
    def custom(cls, evaluator: Callable) -> 'PhiSpec':
        return cls('custom', evaluator)

    @property
    def superadditive(self) -> bool:
        return self.kind == 'power' and self.exponent >= 1.0

    def __call__(self, h):
        return self.evaluator(np.asarray(h, dtype=float))

    def validate(self, h_max: float = 1.0) -> None:
        hs = np.linspace(0.0, max(h_max, 1e-12), settings.PHI_SAMPLE_POINTS)
        values = self(hs)
        scale = max(1.0, float(np.max(np.abs(values))))
        if values[0] != 0.0:
            raise InvalidPhi(f"Phi(0) = {values[0]!r}, expected 0")
        if np.any(values < 0.0):
            raise InvalidPhi("Phi takes negative values")
        if np.any(np.diff(values) < -1e-14 * scale):
            raise InvalidPhi("Phi is not nondecreasing")


def total_variation(p: Profile) -> float:
    return float(np.sum(np.abs(np.diff(p.vs))))


def reduce_to_extrema(vs: np.ndarray) -> np.ndarray:
    """Drop repeated values, keep endpoints and strict local extrema"""
    vs = np.asarray(vs, dtype=float)
    if len(vs) <= 2:
        return vs
    vs = vs[np.concatenate([[True], vs[1:] != vs[:-1]])]
    if len(vs) <= 2:
        return vs
    d = np.diff(vs)
    turn = d[:-1] * d[1:] < 0.0
    return vs[np.concatenate([[True], turn, [True]])]


def tv_phi(p: Profile, phi: PhiSpec, reduce: Optional[bool] = None) -> float:
    """
    sup over increasing point selections of sum Phi(|v(x_{i+1}) - v(x_i)|)

    V[i] = max_{j<i} V[j] + Phi(|v_i - v_j|) with V[0] = 0; the answer is
    max V. Extremum reduction is applied only for superadditive Phi unless
    forced by `reduce`.
    """
    vs = p.vs
    if len(vs) < 2:
        return 0.0
    phi.validate(float(vs.max() - vs.min()))
    if reduce is None:
        reduce = phi.superadditive
    if reduce:
        vs = reduce_to_extrema(vs)
    n = len(vs)
    if n > settings.TV_SIZE_CAP:
        raise SizeCap(f"Profile of {n} points exceeds the cap of {settings.TV_SIZE_CAP}")

    best = np.zeros(n)
    for i in range(1, n):
        best[i] = np.max(best[:i] + phi(np.abs(vs[i] - vs[:i])))
    logger.debug("tv_phi over %d points (%s)", n, phi.kind)
    return float(best.max())


def tv_power(p: Profile, pexp: float) -> float:
    """TV^{1/pexp}: tv_phi with Phi(h) = h^pexp"""
    if pexp < 1.0:
        raise ValueError("tv_power needs pexp >= 1")
    if pexp == 1.0:
        return total_variation(p)
    return tv_phi(p, PhiSpec.power(pexp))


def one_sided_lipschitz(p: Profile, h_min: float) -> float:
    """
    max over pairs with x_j - x_i >= h_min of (v_j - v_i) / (x_j - x_i);
    -inf when no pair is that far apart
    """
    if h_min <= 0.0:
        raise ValueError("one_sided_lipschitz needs h_min > 0")
    xs, vs = p.xs, p.vs
    best = -np.inf
    for i in range(len(xs) - 1):
        j0 = int(np.searchsorted(xs, xs[i] + h_min, side='left'))
        if j0 >= len(xs):
            break
        quotients = (vs[j0:] - vs[i]) / (xs[j0:] - xs[i])
        best = max(best, float(quotients.max()))
    return best
