#!/usr/bin/env python3
"""
flux_analysis.py - Exact polynomial flux and its nonlinearity functionals
Handles derivatives, inflection points, degeneracy, the d / N / Psi
functionals and convex/concave envelopes on value intervals
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from scipy import optimize

from fluxreg_system import settings
from ..exceptions import DegenerateFlux, NoFiniteOrder, UnsupportedFlux

logger = logging.getLogger(__name__)

ValueRange = Tuple[float, float]


def real_roots(poly: Polynomial, lo: float, hi: float) -> List[float]:
    """Real roots of poly strictly inside (lo, hi), liberal on imaginary noise"""
    poly = poly.trim()
    if poly.degree() < 1:
        return []
    roots = poly.roots()
    real = roots[np.abs(roots.imag) <= 1e-6 * (1.0 + np.abs(roots))].real
    return sorted(float(r) for r in real if lo < r < hi)


@dataclass(frozen=True)
class Flux:
    """
    Polynomial flux f(w) = c0 + c1 w + c2 w^2 + ...
    All derivatives are built once at construction
    """
    coefficients: Tuple[float, ...]
    derivative_cache: Tuple[Polynomial, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            raise UnsupportedFlux("Flux needs at least one coefficient")
        biggest = max(abs(c) for c in coeffs)
        while len(coeffs) > 1 and abs(coeffs[-1]) <= 1e-14 * biggest:
            coeffs = coeffs[:-1]
        if len(coeffs) < 2:
            raise UnsupportedFlux("Flux degree must be at least 1")
        object.__setattr__(self, 'coefficients', coeffs)

        cache = [Polynomial(coeffs)]
        for _ in range(len(coeffs)):
            cache.append(cache[-1].deriv())
        object.__setattr__(self, 'derivative_cache', tuple(cache))

    # construction helpers

    @classmethod
    def parse(cls, text: str) -> 'Flux':
        """Parse the CLI form 'poly:c0,c1,...'"""
        kind, _, body = text.partition(':')
        if kind.strip() != 'poly' or not body.strip():
            raise UnsupportedFlux(f"Unrecognized flux '{text}', expected poly:c0,c1,...")
        try:
            return cls(tuple(float(c) for c in body.split(',')))
        except ValueError as e:
            raise UnsupportedFlux(f"Bad coefficient in '{text}': {e}") from e

    @classmethod
    def from_dict(cls, data: Dict) -> 'Flux':
        if data.get('type') != 'poly':
            raise UnsupportedFlux(f"Unsupported flux type {data.get('type')!r}")
        return cls(tuple(data['coeffs']))

    def to_dict(self) -> Dict:
        return {'type': 'poly', 'coeffs': list(self.coefficients)}

    def to_text(self) -> str:
        return 'poly:' + ','.join(repr(c) for c in self.coefficients)

    # evaluation

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def derivative(self, k: int) -> Polynomial:
        if k >= len(self.derivative_cache):
            return self.derivative_cache[-1]
        return self.derivative_cache[k]

    def __call__(self, w):
        return self.derivative_cache[0](w)

    def speed(self, w):
        """Characteristic speed f'(w)"""
        return self.derivative_cache[1](w)

    def critical_points(self, lam: float, w1: float, w2: float) -> List[float]:
        """Points of (w1, w2) where f' = lam"""
        return real_roots(self.derivative(1) - lam, w1, w2)

    def slope_bounds(self, w1: float, w2: float) -> ValueRange:
        """(min f', max f') on [w1, w2]"""
        pts = [w1, w2] + real_roots(self.derivative(2), w1, w2)
        vals = self.speed(np.asarray(pts))
        return float(vals.min()), float(vals.max())

    def is_affine(self) -> bool:
        return self.degree < 2


FluxLike = Union[Flux, 'PiecewiseAffineFlux']  # noqa: F821 - defined in riemann


def eval_deriv(f: Flux, k: int, w: float) -> float:
    """k-th derivative of f at w; zero past the degree"""
    if k < 0:
        raise ValueError("Derivative order must be nonnegative")
    return float(f.derivative(k)(w))


def _second_derivative_scale(f: Flux, rng: ValueRange) -> float:
    ws = np.linspace(rng[0], rng[1], settings.ROOT_GRID_CELLS + 1)
    return max(1.0, float(np.max(np.abs(f.derivative(2)(ws)))))


def _grid_roots(poly: Polynomial, rng: ValueRange, cells: int, xtol: float) -> List[float]:
    """Sign-change roots of poly on a uniform grid, refined by brentq"""
    ws = np.linspace(rng[0], rng[1], cells + 1)
    vals = poly(ws)
    roots = []
    for i in range(cells):
        if vals[i] == 0.0:
            roots.append(float(ws[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(float(optimize.brentq(poly, ws[i], ws[i + 1], xtol=xtol)))
    if vals[-1] == 0.0:
        roots.append(float(ws[-1]))
    return roots


def inflection_points(f: Flux, rng: ValueRange) -> List[float]:
    """
    All real roots of f'' in the working range

    Odd-multiplicity roots come from sign changes on a grid; even-multiplicity
    ones are recovered as roots of f''' where |f''| is below the root tolerance.
    """
    w_lo, w_hi = rng
    if not w_lo < w_hi:
        raise ValueError("Range must satisfy w_lo < w_hi")
    second = f.derivative(2).trim()
    if f.is_affine() or np.all(second.coef == 0.0):
        raise DegenerateFlux(f"f'' vanishes identically for {f.to_text()}")

    scale = _second_derivative_scale(f, rng)
    eps_root = settings.ROOT_REL_TOL * scale
    xtol = max(1e-15, settings.ROOT_REL_TOL * (w_hi - w_lo))
    cells = settings.ROOT_GRID_CELLS

    candidates = _grid_roots(second, rng, cells, xtol)
    third = f.derivative(3).trim()
    if np.any(third.coef != 0.0):
        for w in _grid_roots(third, rng, cells, xtol):
            if abs(second(w)) <= eps_root:
                candidates.append(w)

    separation = settings.ROOT_SEPARATION * (w_hi - w_lo)
    roots: List[float] = []
    for w in sorted(candidates):
        if roots and w - roots[-1] <= separation:
            continue
        roots.append(w)
    logger.debug("Inflection points of %s on %s: %s", f.to_text(), rng, roots)
    return roots


@dataclass
class DegeneracyReport:
    """Inflection points, their flatness orders p_w and the overall degeneracy"""
    inflection_points: List[float]
    orders: List[int]
    overall: int

    def to_dict(self) -> Dict:
        return {
            'inflection_points': list(self.inflection_points),
            'orders': list(self.orders),
            'overall': self.overall,
        }


def degeneracy(f: Flux, rng: ValueRange) -> DegeneracyReport:
    """
    Degeneracy of f on the range: p_w is the smallest p >= 2 with
    f^(p+1)(w) != 0; overall is max p_w, or 1 when f'' has no root
    """
    points = inflection_points(f, rng)
    scale = _second_derivative_scale(f, rng)
    eps_deriv = settings.DERIV_REL_TOL * scale

    orders = []
    for w in points:
        order = None
        for p in range(2, f.degree + 1):
            if abs(eval_deriv(f, p + 1, w)) > eps_deriv:
                order = p
                break
        if order is None:
            raise NoFiniteOrder(f"All derivatives vanish at w={w!r} for {f.to_text()}")
        orders.append(order)

    overall = max(orders) if orders else 1
    return DegeneracyReport(inflection_points=points, orders=orders, overall=overall)


def curvature_bounds(f: Flux, rng: ValueRange) -> ValueRange:
    """(min f'', max f'') on the range"""
    pts = [rng[0], rng[1]] + real_roots(f.derivative(3), rng[0], rng[1])
    vals = f.derivative(2)(np.asarray(pts))
    return float(vals.min()), float(vals.max())


def is_weakly_genuinely_nonlinear(f, rng: ValueRange) -> bool:
    """{f'' != 0} dense in the range; piecewise-affine fluxes never are"""
    if not isinstance(f, Flux):
        return False
    return not f.is_affine()


# Nonlinearity functionals

def _oscillation(f, lam: float, w1: float, w2: float) -> float:
    pts = np.asarray([w1, w2] + list(f.critical_points(lam, w1, w2)), dtype=float)
    g = f(pts) - lam * pts
    return float(g.max() - g.min())


def nonlinearity_d(f, w1: float, w2: float, tol: Optional[float] = None) -> float:
    """
    Twice the C0 distance of f on [w1, w2] from affine functions:
    min over lambda of osc(f - lambda * id)
    """
    if w2 < w1:
        raise ValueError("nonlinearity_d needs w1 <= w2")
    if w2 == w1:
        return 0.0
    lo, hi = f.slope_bounds(w1, w2)
    scale = max(1.0, abs(lo), abs(hi))
    tol = settings.GOLDEN_TOL if tol is None else tol
    best = min(_oscillation(f, lo, w1, w2), _oscillation(f, hi, w1, w2))
    if hi - lo > tol * scale:
        res = optimize.minimize_scalar(
            lambda lam: _oscillation(f, lam, w1, w2),
            bounds=(lo, hi), method='bounded', options={'xatol': tol * scale},
        )
        best = min(best, float(res.fun))
    return max(0.0, best)


def nonlinearity_N_argmin(f, M: float, h: float, n_grid: Optional[int] = None) -> Tuple[float, float]:
    """(N(h), w*) with N(h) = min over w in [-M, M-h] of d(w, w+h)"""
    if h <= 0.0:
        return 0.0, -M
    n_grid = n_grid or settings.N_GRID_POINTS
    w_hi = max(-M, M - h)
    if w_hi <= -M:
        return nonlinearity_d(f, -M, -M + h), -M

    ws = np.linspace(-M, w_hi, n_grid)
    vals = np.array([nonlinearity_d(f, w, w + h) for w in ws])
    i = int(np.argmin(vals))
    best_val, best_w = float(vals[i]), float(ws[i])

    lo, hi = ws[max(i - 1, 0)], ws[min(i + 1, n_grid - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(
            lambda w: nonlinearity_d(f, w, w + h),
            bounds=(lo, hi), method='bounded',
            options={'xatol': max(1e-12, 1e-6 * h)},
        )
        if res.fun < best_val:
            best_val, best_w = float(res.fun), float(res.x)
    return best_val, best_w


def nonlinearity_N(f, M: float, h: float, n_grid: Optional[int] = None) -> float:
    if not 0.0 <= h <= 2.0 * M + 1e-12:
        raise ValueError(f"h={h!r} outside [0, 2M]")
    return nonlinearity_N_argmin(f, M, h, n_grid)[0]


def lower_convex_hull(xs: Sequence[float], ys: Sequence[float]) -> List[int]:
    """Indices of the lower hull of points sorted by x (monotone chain)"""
    hull: List[int] = []
    for k in range(len(xs)):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            cross = (xs[j] - xs[i]) * (ys[k] - ys[i]) - (ys[j] - ys[i]) * (xs[k] - xs[i])
            if cross <= 0.0:
                hull.pop()
            else:
                break
        hull.append(k)
    return hull


@dataclass
class NonlinearityProfile:
    """Samples of N on [0, 2M] and their lower convex envelope Psi"""
    M: float
    eps: float
    hs: np.ndarray
    n_values: np.ndarray
    hull_h: np.ndarray
    hull_psi: np.ndarray

    def psi(self, h):
        return np.interp(h, self.hull_h, self.hull_psi)

    def phi_eps(self, h):
        """Phi^eps(h) = Psi(h/2) * h^eps"""
        h = np.asarray(h, dtype=float)
        return self.psi(h / 2.0) * np.power(h, self.eps)

    @property
    def psi_values(self) -> np.ndarray:
        return self.psi(self.hs)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'h': self.hs, 'N_of_h': self.n_values, 'Psi_of_h': self.psi_values})

    def to_dict(self) -> Dict:
        return {
            'M': self.M,
            'eps': self.eps,
            'h': self.hs.tolist(),
            'N_of_h': self.n_values.tolist(),
            'Psi_of_h': self.psi_values.tolist(),
        }


def psi_profile(f, M: float, n_samples: int, eps: float,
                n_grid: Optional[int] = None) -> NonlinearityProfile:
    """Sample N on a uniform h-grid and take its lower convex envelope"""
    if n_samples < 8:
        raise ValueError("psi_profile needs at least 8 samples")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")

    hs = np.linspace(0.0, 2.0 * M, n_samples)
    n_values = np.array([nonlinearity_N_argmin(f, M, h, n_grid)[0] for h in hs])
    n_values[0] = 0.0
    # N is nondecreasing in h; remove minimization noise
    n_values = np.maximum.accumulate(n_values)

    hull = lower_convex_hull(hs, n_values)
    logger.info("Psi profile: %d samples, %d hull vertices", n_samples, len(hull))
    return NonlinearityProfile(
        M=M, eps=eps, hs=hs, n_values=n_values,
        hull_h=hs[hull], hull_psi=n_values[hull],
    )


def nonlinearity_exponent(f, M: float, h_lo: float = 1e-3, decades: float = 2.0,
                          points: int = 9, n_grid: Optional[int] = None) -> float:
    """Log-log slope of N near 0; p+1 for a flux of degeneracy p"""
    hs = np.geomspace(h_lo, h_lo * 10.0 ** decades, points)
    ns = np.array([nonlinearity_N_argmin(f, M, h, n_grid)[0] for h in hs])
    if np.any(ns <= 0.0):
        return float('inf')
    slope, _ = np.polyfit(np.log(hs), np.log(ns), 1)
    return float(slope)


# Envelopes

@dataclass
class EnvelopePiece:
    tag: str          # 'graph' or 'chord'
    w_start: float
    w_end: float
    slope: float

    def to_dict(self) -> Dict:
        return {'tag': self.tag, 'w_start': self.w_start, 'w_end': self.w_end, 'slope': self.slope}


@dataclass
class EnvelopeDescription:
    """Convex or concave envelope of a flux on [a, b], as graph/chord pieces"""
    a: float
    b: float
    kind: str
    pieces: List[EnvelopePiece]
    flux: object = field(repr=False, default=None)

    def value(self, w: float) -> float:
        for piece in self.pieces:
            if piece.w_start <= w <= piece.w_end:
                if piece.tag == 'graph':
                    return float(self.flux(w))
                return float(self.flux(piece.w_start)) + piece.slope * (w - piece.w_start)
        raise ValueError(f"w={w!r} outside [{self.a}, {self.b}]")

    def to_dict(self) -> Dict:
        return {'a': self.a, 'b': self.b, 'kind': self.kind,
                'pieces': [p.to_dict() for p in self.pieces]}


def _envelope_scale(f, ws: np.ndarray) -> float:
    vals = f(ws)
    return max(1.0, float(vals.max() - vals.min()))


def hull_edges(ws: np.ndarray, fs: np.ndarray, kind: str, tol: float) -> List[Tuple[int, int, str]]:
    """Hull edges as (i, j, tag): chord when a skipped vertex is strictly off the edge"""
    sign = 1.0 if kind == 'convex' else -1.0
    hull = lower_convex_hull(ws, sign * fs)
    edges = []
    for i, j in zip(hull[:-1], hull[1:]):
        tag = 'graph'
        if j > i + 1:
            slope = (fs[j] - fs[i]) / (ws[j] - ws[i])
            gap = sign * (fs[i + 1:j] - (fs[i] + slope * (ws[i + 1:j] - ws[i])))
            if gap.max() > tol:
                tag = 'chord'
        edges.append((i, j, tag))
    return edges


def _tangent_point(f: Flux, anchor: float, guess: float, a: float, b: float, step: float) -> float:
    """Point w near guess where the chord from anchor is tangent to f"""
    f_anchor = float(f(anchor))

    def gap(w):
        return float(f.speed(w)) * (anchor - w) - (f_anchor - float(f(w)))

    for width in (2, 4, 8, 16):
        lo, hi = max(a, guess - width * step), min(b, guess + width * step)
        if anchor > guess:
            hi = min(hi, guess + 0.5 * (anchor - guess))
        else:
            lo = max(lo, guess - 0.5 * (guess - anchor))
        if hi > lo and gap(lo) * gap(hi) < 0.0:
            return float(optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return guess


def _polynomial_envelope(f: Flux, a: float, b: float, kind: str) -> List[EnvelopePiece]:
    n = settings.ENVELOPE_SAMPLES
    extra = real_roots(f.derivative(1), a, b) + real_roots(f.derivative(2), a, b)
    ws = np.unique(np.concatenate([np.linspace(a, b, n + 1), extra]))
    fs = f(ws)
    tol = settings.ENVELOPE_TOL * _envelope_scale(f, ws)
    step = (b - a) / n

    # merge runs of graph edges, keep chords separate
    raw: List[List] = []
    for i, j, tag in hull_edges(ws, fs, kind, tol):
        if tag == 'graph' and raw and raw[-1][0] == 'graph':
            raw[-1][2] = float(ws[j])
        else:
            raw.append([tag, float(ws[i]), float(ws[j])])

    for k, piece in enumerate(raw):
        if piece[0] != 'chord':
            continue
        p, q = piece[1], piece[2]
        for _ in range(50):
            new_p = _tangent_point(f, q, p, a, b, step) if p > a else p
            new_q = _tangent_point(f, new_p, q, a, b, step) if q < b else q
            done = abs(new_p - p) <= 1e-15 and abs(new_q - q) <= 1e-15
            p, q = new_p, new_q
            if done:
                break
        piece[1], piece[2] = p, q
        if k > 0:
            raw[k - 1][2] = p
        if k + 1 < len(raw):
            raw[k + 1][1] = q

    pieces = []
    for tag, w0, w1 in raw:
        if w1 <= w0:
            continue
        slope = (float(f(w1)) - float(f(w0))) / (w1 - w0)
        pieces.append(EnvelopePiece(tag=tag, w_start=w0, w_end=w1, slope=slope))
    return pieces


def _grid_envelope(f, a: float, b: float, kind: str) -> List[EnvelopePiece]:
    grid = f.value_grid
    inner = grid[(grid > a) & (grid < b)]
    ws = np.concatenate([[a], inner, [b]])
    fs = f(ws)
    tol = settings.ENVELOPE_TOL * _envelope_scale(f, ws)
    pieces = []
    for i, j, tag in hull_edges(ws, fs, kind, tol):
        slope = (fs[j] - fs[i]) / (ws[j] - ws[i])
        pieces.append(EnvelopePiece(tag=tag, w_start=float(ws[i]), w_end=float(ws[j]), slope=float(slope)))
    return pieces


def flux_envelope(f, a: float, b: float, kind: str) -> EnvelopeDescription:
    """
    Convex (largest convex minorant) or concave envelope of f on [a, b]

    Args:
        f: exact Flux or PiecewiseAffineFlux
        a, b: value interval, a < b
        kind: 'convex' or 'concave'

    Returns:
        EnvelopeDescription with pieces ordered by value
    """
    if not a < b:
        raise ValueError("flux_envelope needs a < b")
    if kind not in ('convex', 'concave'):
        raise ValueError(f"Unknown envelope kind {kind!r}")
    if hasattr(f, 'value_grid'):
        pieces = _grid_envelope(f, a, b, kind)
    else:
        pieces = _polynomial_envelope(f, a, b, kind)
    return EnvelopeDescription(a=a, b=b, kind=kind, pieces=pieces, flux=f)
