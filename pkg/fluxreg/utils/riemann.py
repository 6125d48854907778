#!/usr/bin/env python3
"""
riemann.py - Entropy solution of the Riemann problem for general flux
Reads admissible waves off convex/concave envelopes; exact on the
piecewise-affine flux used by front tracking
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from fluxreg_system import settings
from ..exceptions import OffGrid
from .flux_analysis import Flux, hull_edges, real_roots, flux_envelope

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PiecewiseAffineFlux:
    """
    Interpolant f_delta of a flux on the value grid j * delta
    value_grid[i] = (i - offset) * delta, so 0 is always a grid value
    """
    delta: float
    offset: int
    value_grid: np.ndarray
    flux_values: np.ndarray
    slopes: np.ndarray

    @property
    def n_values(self) -> int:
        return len(self.value_grid)

    @property
    def M(self) -> float:
        """Half-width of the data range (grid minus one guard cell per side)"""
        return (self.offset - 1) * self.delta

    def index_of(self, w: float) -> int:
        i = int(round(w / self.delta)) + self.offset
        if not 0 <= i < self.n_values or abs(self.value_grid[i] - w) > 1e-9 * self.delta:
            raise OffGrid(f"State {w!r} is not on the delta={self.delta!r} grid")
        return i

    def snap(self, w: float) -> float:
        """Nearest grid value"""
        i = min(max(int(round(w / self.delta)) + self.offset, 0), self.n_values - 1)
        return float(self.value_grid[i])

    def __call__(self, w):
        return np.interp(w, self.value_grid, self.flux_values)

    def speed_index(self, i: int) -> float:
        """Averaged one-sided slope at grid value i"""
        if i <= 0:
            return float(self.slopes[0])
        if i >= self.n_values - 1:
            return float(self.slopes[-1])
        return 0.5 * float(self.slopes[i - 1] + self.slopes[i])

    def speed(self, w: float) -> float:
        pos = (w - self.value_grid[0]) / self.delta
        i = int(round(pos))
        if abs(pos - i) <= 1e-9:
            return self.speed_index(i)
        cell = min(max(int(math.floor(pos)), 0), len(self.slopes) - 1)
        return float(self.slopes[cell])

    def critical_points(self, lam: float, w1: float, w2: float) -> List[float]:
        grid = self.value_grid
        return [float(w) for w in grid[(grid > w1) & (grid < w2)]]

    def _cells(self, w1: float, w2: float) -> np.ndarray:
        grid = self.value_grid
        mask = (grid[:-1] < w2) & (grid[1:] > w1)
        if not mask.any():
            mask = (grid[:-1] <= w2) & (grid[1:] >= w1)
        return self.slopes[mask]

    def slope_bounds(self, w1: float, w2: float) -> Tuple[float, float]:
        cells = self._cells(w1, w2)
        return float(cells.min()), float(cells.max())

    def lipschitz(self, w1: float, w2: float) -> float:
        """max |slope| over the cells meeting [w1, w2]"""
        return float(np.max(np.abs(self._cells(w1, w2))))

    def to_dict(self) -> Dict:
        return {
            'delta': self.delta,
            'offset': self.offset,
            'value_grid': self.value_grid.tolist(),
            'flux_values': self.flux_values.tolist(),
        }

    @classmethod
    def from_values(cls, delta: float, offset: int, flux_values) -> 'PiecewiseAffineFlux':
        flux_values = np.asarray(flux_values, dtype=float)
        grid = (np.arange(len(flux_values)) - offset) * delta
        slopes = (flux_values[1:] - flux_values[:-1]) / delta
        return cls(delta=delta, offset=offset, value_grid=grid,
                   flux_values=flux_values, slopes=slopes)


def affine_interpolant(f: Flux, M: float, delta: float) -> PiecewiseAffineFlux:
    """
    Interpolate f on the grid j * delta covering [-M - delta, M + delta]

    Args:
        f: exact flux
        M: data half-width
        delta: grid spacing

    Returns:
        PiecewiseAffineFlux agreeing with f at every grid value
    """
    if delta <= 0.0 or M <= 0.0:
        raise ValueError("affine_interpolant needs delta > 0 and M > 0")
    k = int(math.ceil(M / delta - 1e-9))
    offset = k + 1
    grid = (np.arange(2 * k + 3) - offset) * delta
    pa = PiecewiseAffineFlux.from_values(delta, offset, f(grid))

    gap = interpolation_gap(f, pa, M)
    bound = _curvature_sup(f, M) * delta ** 2 / 8.0
    if gap > bound * (1.0 + 1e-6) + 1e-14:
        logger.warning("Interpolation gap %.3e exceeds bound %.3e", gap, bound)
    return pa


def _curvature_sup(f: Flux, M: float) -> float:
    pts = np.asarray([-M, M] + real_roots(f.derivative(3), -M, M))
    return float(np.max(np.abs(f.derivative(2)(pts))))


def interpolation_gap(f: Flux, pa: PiecewiseAffineFlux, M: float, n_samples: int = 4097) -> float:
    """Sup-norm distance between f and f_delta on [-M, M], on a uniform sample"""
    ws = np.linspace(-M, M, n_samples)
    return float(np.max(np.abs(f(ws) - pa(ws))))


@dataclass
class Wave:
    ul: float
    ur: float
    sigma: float
    kind: str
    il: Optional[int] = None
    ir: Optional[int] = None

    def to_dict(self) -> Dict:
        return {'ul': self.ul, 'ur': self.ur, 'sigma': self.sigma, 'kind': self.kind}


@dataclass
class WaveFan:
    """Self-similar solution of a Riemann problem as a chain of jumps"""
    left_state: float
    right_state: float
    waves: List[Wave] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.waves)

    def values(self) -> List[float]:
        """States crossed from left to right"""
        if not self.waves:
            return [self.left_state]
        return [self.waves[0].ul] + [w.ur for w in self.waves]

    def to_dict(self) -> Dict:
        return {'left': self.left_state, 'right': self.right_state,
                'waves': [w.to_dict() for w in self.waves]}


def _merge_equal_speeds(raw: List[Tuple[Wave, str]], flux) -> List[Tuple[Wave, str]]:
    """Fuse neighbours whose speeds do not increase; a fused wave is a chord if either part was"""
    merged: List[Tuple[Wave, str]] = []
    for wave, tag in raw:
        if merged:
            prev, prev_tag = merged[-1]
            scale = max(1.0, abs(prev.sigma), abs(wave.sigma))
            if wave.sigma <= prev.sigma + 1e-12 * scale:
                ul, ur = prev.ul, wave.ur
                sigma = (float(flux(ur)) - float(flux(ul))) / (ur - ul)
                fused = 'chord' if 'chord' in (prev_tag, tag) else 'graph'
                merged[-1] = (Wave(ul=ul, ur=ur, sigma=sigma, kind='', il=prev.il, ir=wave.ir), fused)
                continue
        merged.append((wave, tag))
    return merged


def _tag_kinds(raw: List[Tuple[Wave, str]]) -> List[Wave]:
    """chord -> shock (contact when it borders graph waves), graph -> rarefaction-step"""
    waves = []
    for k, (wave, tag) in enumerate(raw):
        if tag == 'chord':
            neighbours = [raw[m][1] for m in (k - 1, k + 1) if 0 <= m < len(raw)]
            wave.kind = 'contact' if 'graph' in neighbours else 'shock'
        else:
            wave.kind = 'rarefaction-step' if len(raw) > 1 else 'contact'
        waves.append(wave)
    return waves


def _grid_fan(pa: PiecewiseAffineFlux, il: int, ir: int) -> WaveFan:
    grid, fv = pa.value_grid, pa.flux_values
    lo, hi = min(il, ir), max(il, ir)
    ws, fs = grid[lo:hi + 1], fv[lo:hi + 1]
    kind = 'convex' if il < ir else 'concave'
    tol = settings.ENVELOPE_TOL * max(1.0, float(fs.max() - fs.min()))
    edges = hull_edges(ws, fs, kind, tol)
    if il > ir:
        edges = [(j, i, tag) for i, j, tag in reversed(edges)]

    raw = []
    for i, j, tag in edges:
        a, b = lo + i, lo + j
        sigma = (fv[b] - fv[a]) / (grid[b] - grid[a])
        raw.append((Wave(ul=float(grid[a]), ur=float(grid[b]), sigma=float(sigma),
                         kind='', il=a, ir=b), tag))
    waves = _tag_kinds(_merge_equal_speeds(raw, pa))
    return WaveFan(left_state=float(grid[il]), right_state=float(grid[ir]), waves=waves)


def _exact_fan(f: Flux, u_l: float, u_r: float) -> WaveFan:
    kind = 'convex' if u_l < u_r else 'concave'
    env = flux_envelope(f, min(u_l, u_r), max(u_l, u_r), kind)
    pieces = env.pieces if u_l < u_r else list(reversed(env.pieces))
    steps = settings.RAREFACTION_STEPS

    raw = []
    for piece in pieces:
        start, end = (piece.w_start, piece.w_end) if u_l < u_r else (piece.w_end, piece.w_start)
        if piece.tag == 'chord':
            raw.append((Wave(ul=start, ur=end, sigma=piece.slope, kind=''), 'chord'))
            continue
        nodes = np.linspace(start, end, steps + 1)
        for a, b in zip(nodes[:-1], nodes[1:]):
            sigma = (float(f(b)) - float(f(a))) / (b - a)
            raw.append((Wave(ul=float(a), ur=float(b), sigma=sigma, kind=''), 'graph'))
    waves = _tag_kinds(_merge_equal_speeds(raw, f))
    return WaveFan(left_state=u_l, right_state=u_r, waves=waves)


def solve_riemann(flux, u_l: float, u_r: float) -> WaveFan:
    """
    Entropy-admissible fan for data (u_l, u_r)

    Increasing data follow the convex envelope on [u_l, u_r], decreasing data
    the concave one; with a piecewise-affine flux every wave is an exact jump.
    """
    if isinstance(flux, PiecewiseAffineFlux):
        return solve_riemann_indices(flux, flux.index_of(u_l), flux.index_of(u_r))
    if u_l == u_r:
        return WaveFan(left_state=u_l, right_state=u_r)
    return _exact_fan(flux, u_l, u_r)


def solve_riemann_indices(pa: PiecewiseAffineFlux, il: int, ir: int) -> WaveFan:
    """Same as solve_riemann with states given as grid indices"""
    if il == ir:
        w = float(pa.value_grid[il])
        return WaveFan(left_state=w, right_state=w)
    return _grid_fan(pa, il, ir)


def is_admissible_jump(flux, u_l: float, u_r: float) -> bool:
    """
    True iff the chord from u_l to u_r lies on the convex envelope
    (u_l < u_r) or the concave envelope (u_l > u_r)
    """
    if u_l == u_r:
        raise ValueError("is_admissible_jump needs u_l != u_r")
    lo, hi = min(u_l, u_r), max(u_l, u_r)
    f_l = float(flux(u_l))
    sigma = (float(flux(u_r)) - f_l) / (u_r - u_l)
    pts = np.asarray([lo, hi] + list(flux.critical_points(sigma, lo, hi)), dtype=float)
    residual = flux(pts) - (f_l + sigma * (pts - u_l))

    samples = np.linspace(lo, hi, 65)
    vals = flux(samples)
    tol = settings.ENVELOPE_TOL * max(1.0, float(vals.max() - vals.min()))
    if u_l < u_r:
        return bool(residual.min() >= -tol)
    return bool(residual.max() <= tol)
