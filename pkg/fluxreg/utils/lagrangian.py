#!/usr/bin/env python3
"""
lagrangian.py - Generalized characteristics over a front-tracking trajectory
Builds a monotone family of paths X(t, y) carrying u0(y) and checks that
the solution is transported along them
"""

import bisect
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..exceptions import (
    AmbiguousAttachment,
    CharacteristicsCrossed,
    SeedOutOfDomain,
    ValueMismatch,
)
from .front_tracking import Event, Trajectory, one_sided_limits, sample_solution, value_range_on

logger = logging.getLogger(__name__)

FREE = 'free'
ATTACHED = 'attached'


@dataclass
class PathSegment:
    t0: float
    x0: float
    t1: float
    x1: float
    status: str
    front_id: Optional[int]
    speed: float
    cancelled: bool = False


@dataclass
class CharacteristicPath:
    """
    One generalized characteristic. A seed sitting on a jump of u0 yields one
    path per grid value crossed by the jump, ordered by rank.
    """
    seed: float
    value: float
    rank: int = 0
    segments: List[PathSegment] = field(default_factory=list)

    @property
    def vertices(self) -> List[Tuple[float, float]]:
        if not self.segments:
            return [(0.0, self.seed)]
        return [(s.t0, s.x0) for s in self.segments] + [(self.segments[-1].t1, self.segments[-1].x1)]

    @property
    def cancelled(self) -> bool:
        return any(s.cancelled for s in self.segments)

    def cancelled_at(self) -> float:
        """First time the carried value was cancelled by an interaction; inf if never"""
        for s in self.segments:
            if s.cancelled:
                return s.t0
        return float('inf')

    def position(self, t: float) -> float:
        if not self.segments:
            return self.seed
        starts = [s.t0 for s in self.segments]
        k = max(bisect.bisect_right(starts, t) - 1, 0)
        s = self.segments[k]
        return s.x0 + s.speed * (min(t, s.t1) - s.t0)

    def max_speed(self) -> float:
        return max((abs(s.speed) for s in self.segments), default=0.0)


@dataclass
class _Free:
    left: Optional[int]
    right: Optional[int]
    region_value: float


@dataclass
class _Attached:
    front: int


class _PathWalker:
    """Advances one characteristic through the trajectory event by event"""

    def __init__(self, traj: Trajectory, seed: float, value: float, rank: int):
        self.traj = traj
        self.fronts = traj.fronts
        self.path = CharacteristicPath(seed=seed, value=value, rank=rank)
        self.t = 0.0
        self.x = seed
        self.cancelled = False
        self.budget = 4 * (len(traj.events) + len(traj.fronts)) + 64
        self.tol = 1e-9 * traj.delta

    def speed_of(self, w: float) -> float:
        flux = self.traj.flux
        return flux.speed_index(flux.index_of(w))

    def _push(self, status: str, front_id: Optional[int], speed: float, t1: float,
              x1: Optional[float] = None) -> None:
        if t1 <= self.t:
            return
        x1 = self.x + speed * (t1 - self.t) if x1 is None else x1
        self.path.segments.append(PathSegment(
            t0=self.t, x0=self.x, t1=t1, x1=x1, status=status,
            front_id=front_id, speed=speed, cancelled=self.cancelled,
        ))
        self.t, self.x = t1, x1

    def resolve(self, event: Event):
        """Place the path on the fan of an event"""
        v = self.path.value
        if event.kind == 'interaction':
            self.t, self.x = event.time, event.x
        waves = [self.fronts[i] for i in event.outgoing]
        regions = [event.ul_ext] + [w.right_value for w in waves]

        for k, region in enumerate(regions):
            if abs(region - v) <= self.tol:
                left = waves[k - 1].id if k > 0 else event.left_neighbor
                right = waves[k].id if k < len(waves) else event.right_neighbor
                return _Free(left, right, region)

        for wave in waves:
            lo, hi = sorted((wave.left_value, wave.right_value))
            if lo < v < hi:
                return _Attached(wave.id)

        if not self.cancelled:
            logger.debug("Value %.6g cancelled at t=%.6g x=%.6g", v, event.time, event.x)
        self.cancelled = True
        if not waves:
            return _Free(event.left_neighbor, event.right_neighbor, event.ul_ext)
        if abs(v - event.ul_ext) <= abs(v - event.ur_ext):
            return _Attached(waves[0].id)
        return _Attached(waves[-1].id)

    def _hit_time(self, front_id: Optional[int], lam: float, side: str) -> float:
        if front_id is None:
            return np.inf
        f = self.fronts[front_id]
        closing = lam - f.sigma if side == 'right' else f.sigma - lam
        if closing <= 0.0:
            return np.inf
        t_hit = self.t + (f.position(self.t) - self.x) / (lam - f.sigma)
        return max(t_hit, self.t)

    def _attach(self, front_id: int) -> _Attached:
        self.x = self.fronts[front_id].position(self.t)
        return _Attached(front_id)

    def _step_free(self, state: _Free):
        T, eps = self.traj.T, self.traj.eps_t
        lam = self.speed_of(state.region_value)
        hit_l = self._hit_time(state.left, lam, 'left')
        hit_r = self._hit_time(state.right, lam, 'right')
        death_l = self.fronts[state.left].death if state.left is not None else np.inf
        death_r = self.fronts[state.right].death if state.right is not None else np.inf

        t_next = min(hit_l, hit_r, death_l, death_r, T)
        self._push(FREE, None, lam, t_next)
        if t_next >= T:
            return None

        reach_l, reach_r = hit_l <= t_next + eps, hit_r <= t_next + eps
        gone_l, gone_r = death_l <= t_next + eps, death_r <= t_next + eps
        if reach_r and not gone_r:
            return self._attach(state.right)
        if reach_l and not gone_l:
            return self._attach(state.left)

        killer_l = self.fronts[state.left].killed_by if gone_l else None
        killer_r = self.fronts[state.right].killed_by if gone_r else None
        if gone_l and gone_r and killer_l == killer_r:
            return self.resolve(self.traj.events[killer_r])
        if reach_r and gone_r:
            return self.resolve(self.traj.events[killer_r])
        if reach_l and gone_l:
            return self.resolve(self.traj.events[killer_l])

        left, right = state.left, state.right
        if gone_r:
            event = self.traj.events[killer_r]
            right = event.outgoing[0] if event.outgoing else event.right_neighbor
        if gone_l:
            event = self.traj.events[killer_l]
            left = event.outgoing[-1] if event.outgoing else event.left_neighbor
        return _Free(left, right, state.region_value)

    def run(self, state) -> CharacteristicPath:
        T = self.traj.T
        while state is not None and self.t < T:
            self.budget -= 1
            if self.budget < 0:
                raise AmbiguousAttachment(
                    f"Characteristic from y={self.path.seed!r} does not settle at t={self.t!r}"
                )
            if isinstance(state, _Attached):
                front = self.fronts[state.front]
                end = min(front.death, T)
                self._push(ATTACHED, front.id, front.sigma, end, x1=front.position(end))
                if front.death > T:
                    break
                state = self.resolve(self.traj.events[front.killed_by])
            else:
                state = self._step_free(state)
        return self.path


def _initial_states(traj: Trajectory, y: float) -> List[Tuple[float, object]]:
    """(value, state) pairs for the paths started at seed y"""
    u0 = traj.u0
    bps = u0.breakpoints
    k = int(np.searchsorted(bps, y, side='left'))
    if k < len(bps) and abs(bps[k] - y) <= traj.eps_x:
        origin = traj.origins[k]
        il = traj.flux.index_of(origin.ul_ext)
        ir = traj.flux.index_of(origin.ur_ext)
        step = 1 if ir > il else -1
        values = [float(traj.flux.value_grid[i]) for i in range(il, ir + step, step)]
        return [(v, origin) for v in values]

    k = int(np.searchsorted(bps, y, side='right'))
    left = traj.origins[k - 1].outgoing[-1] if k > 0 else None
    right = traj.origins[k].outgoing[0] if k < len(traj.origins) else None
    value = float(u0.values[k])
    return [(value, _Free(left, right, value))]


def seed_grid(traj: Trajectory, n_seeds: int, include_breakpoints: bool = True) -> np.ndarray:
    """Uniform seeds over the support of u0, plus its breakpoints"""
    support = traj.u0.support() or (traj.domain[0] + 1.0, traj.domain[1] - 1.0)
    seeds = np.linspace(support[0], support[1], n_seeds)
    if include_breakpoints:
        seeds = np.concatenate([seeds, traj.u0.breakpoints])
    return np.unique(seeds)


def count_inversions(paths: Sequence[CharacteristicPath], times: Sequence[float], tol: float) -> int:
    inversions = 0
    for t in times:
        positions = np.asarray([p.position(t) for p in paths])
        inversions += int(np.sum(np.diff(positions) < -tol))
    return inversions


def build_characteristics(traj: Trajectory, seeds: Sequence[float]) -> List[CharacteristicPath]:
    """
    Build the characteristic paths for sorted seeds

    Args:
        traj: evolved trajectory
        seeds: nondecreasing seed positions inside the spatial domain

    Returns:
        Paths ordered by (seed, rank)

    Raises:
        SeedOutOfDomain: a seed outside the trajectory domain
        CharacteristicsCrossed: two paths change order
    """
    seeds = np.asarray(seeds, dtype=float)
    if np.any(np.diff(seeds) < 0.0):
        raise ValueError("Seeds must be sorted")
    lo, hi = traj.domain
    if len(seeds) and (seeds[0] < lo or seeds[-1] > hi):
        raise SeedOutOfDomain(f"Seeds must lie in [{lo!r}, {hi!r}]")

    paths: List[CharacteristicPath] = []
    for y in seeds:
        for rank, (value, start) in enumerate(_initial_states(traj, float(y))):
            walker = _PathWalker(traj, float(y), value, rank)
            state = walker.resolve(start) if isinstance(start, Event) else start
            paths.append(walker.run(state))

    times = np.linspace(0.0, traj.T, 33)
    inversions = count_inversions(paths, times, tol=1e-9 * (hi - lo))
    if inversions:
        raise CharacteristicsCrossed(f"{inversions} seed-order inversions among {len(paths)} paths")
    logger.info("Built %d characteristics from %d seeds", len(paths), len(seeds))
    return paths


def characteristics_frame(paths: Sequence[CharacteristicPath]) -> pd.DataFrame:
    """One row per path vertex: seed, rank, value, t, x, status, front_id"""
    rows = []
    for p in paths:
        for s in p.segments:
            rows.append({'seed': p.seed, 'rank': p.rank, 'value': p.value, 't': s.t0, 'x': s.x0,
                         'status': s.status, 'front_id': -1 if s.front_id is None else s.front_id})
        t_end, x_end = p.vertices[-1]
        rows.append({'seed': p.seed, 'rank': p.rank, 'value': p.value, 't': t_end, 'x': x_end,
                     'status': 'end', 'front_id': -1})
    return pd.DataFrame(rows, columns=['seed', 'rank', 'value', 't', 'x', 'status', 'front_id'])


# Property checks

@dataclass
class Property1Report:
    seed: float
    value: float
    rows: List[Dict] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(not r['passed'] for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=['t', 'x', 'u_minus', 'u_plus', 'slack', 'passed'])


def check_property1(traj: Trajectory, path: CharacteristicPath, n_times: int,
                    t_max: Optional[float] = None) -> Property1Report:
    """
    Test at n_times uniform times in (0, t_max] that the carried value lies
    between the one-sided limits of u at the path position, with slack delta
    """
    t_max = traj.T if t_max is None else t_max
    slack = traj.delta
    report = Property1Report(seed=path.seed, value=path.value)
    for t in t_max * np.arange(1, n_times + 1) / n_times:
        x = path.position(t)
        u_minus, u_plus = one_sided_limits(traj, t, x)
        lo, hi = min(u_minus, u_plus), max(u_minus, u_plus)
        report.rows.append({
            't': float(t), 'x': x, 'u_minus': u_minus, 'u_plus': u_plus, 'slack': slack,
            'passed': bool(lo - slack <= path.value <= hi + slack),
        })
    return report


@dataclass
class RepresentationReport:
    t: float
    xs: np.ndarray
    mismatch: np.ndarray          # nan at excluded points
    excluded: int

    @property
    def max(self) -> float:
        valid = self.mismatch[~np.isnan(self.mismatch)]
        return float(valid.max()) if len(valid) else 0.0

    @property
    def p90(self) -> float:
        valid = self.mismatch[~np.isnan(self.mismatch)]
        return float(np.percentile(valid, 90)) if len(valid) else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'x': self.xs, 'mismatch': self.mismatch})


def check_representation(traj: Trajectory, paths: Sequence[CharacteristicPath], t: float,
                         xs: Sequence[float], exclusion: Optional[float] = None,
                         u0: Optional[Callable[[float], float]] = None) -> RepresentationReport:
    """
    Pull each x back along the bracketing characteristics and compare u(t, x)
    with the values they carry; points near a front are excluded.

    With u0 given, x is pulled back to the seed y interpolated between the
    bracketing paths and the mismatch is |u0(y) - u(t, x)|.
    """
    exclusion = traj.eps_x if exclusion is None else exclusion
    xs = np.asarray(xs, dtype=float)
    _, fronts_x, _ = traj.state(t)
    positions = np.asarray([p.position(t) for p in paths])
    values = np.asarray([p.value for p in paths])
    seeds = np.asarray([p.seed for p in paths])
    u = sample_solution(traj, t, xs)

    mismatch = np.full(len(xs), np.nan)
    excluded = 0
    for k, x in enumerate(xs):
        if len(fronts_x) and np.min(np.abs(fronts_x - x)) <= exclusion:
            excluded += 1
            continue
        j = int(np.searchsorted(positions, x, side='right'))
        if u0 is not None:
            i0, i1 = max(j - 1, 0), min(j, len(paths) - 1)
            x0, x1 = positions[i0], positions[i1]
            y = seeds[i0] if x1 <= x0 else seeds[i0] + (seeds[i1] - seeds[i0]) * (x - x0) / (x1 - x0)
            mismatch[k] = abs(float(u0(y)) - u[k])
            continue
        around = values[max(j - 1, 0):min(j + 1, len(values))]
        lo, hi = around.min(), around.max()
        mismatch[k] = max(lo - u[k], u[k] - hi, 0.0)
    return RepresentationReport(t=t, xs=xs, mismatch=mismatch, excluded=excluded)


def pair_gap_stats(traj: Trajectory, path_l: CharacteristicPath, path_r: CharacteristicPath,
                   t: float) -> Tuple[float, float, float]:
    """
    (s, w_m, w_M) for a pair of equal-value characteristics: s is the larger of
    the seed gap and the gap at time t; w_m, w_M bound u(t) between the paths
    """
    if abs(path_l.value - path_r.value) > traj.delta * (1.0 + 1e-9):
        raise ValueMismatch(
            f"Pair carries values {path_l.value!r} and {path_r.value!r} (delta={traj.delta!r})"
        )
    if path_l.seed > path_r.seed:
        raise ValueError("pair_gap_stats needs y_l <= y_r")
    x_l, x_r = path_l.position(t), path_r.position(t)
    s = max(path_r.seed - path_l.seed, x_r - x_l)
    w_bar = path_l.value
    bounds = value_range_on(traj, t, x_l, x_r)
    if bounds is None:
        return s, w_bar, w_bar
    return s, min(bounds[0], w_bar), max(bounds[1], w_bar)
