#!/usr/bin/env python3
"""
front_tracking.py - Wave-front tracking for piecewise-constant data
Evolves a step function under a piecewise-affine flux by resolving
front collisions in time order
"""

import heapq
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from fluxreg_system import settings
from ..exceptions import CapExceeded, NonGridValue, OffGrid, OutOfTimeRange, UnboundedSupport
from .riemann import PiecewiseAffineFlux, WaveFan, solve_riemann_indices

logger = logging.getLogger(__name__)


@dataclass
class StepFunction:
    """
    Piecewise-constant profile: values[0] left of breakpoints[0], values[k]
    between breakpoints[k-1] and breakpoints[k], values[-1] to the right
    """
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bps = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if len(vals) != len(bps) + 1:
            raise ValueError("StepFunction needs exactly one more value than breakpoints")
        if np.any(np.diff(bps) < 0.0):
            raise ValueError("Breakpoints must be increasing")

        keep_bps, keep_vals = [], [vals[0]]
        for x, v in zip(bps, vals[1:]):
            if keep_bps and x == keep_bps[-1]:
                keep_vals[-1] = v
                if keep_vals[-1] == keep_vals[-2]:
                    keep_bps.pop()
                    keep_vals.pop()
                continue
            if v == keep_vals[-1]:
                continue
            keep_bps.append(x)
            keep_vals.append(v)
        self.breakpoints = np.asarray(keep_bps, dtype=float)
        self.values = np.asarray(keep_vals, dtype=float)

    @classmethod
    def constant(cls, value: float) -> 'StepFunction':
        return cls(np.empty(0), np.asarray([value]))

    def __call__(self, x):
        """Right-continuous evaluation"""
        return self.values[np.searchsorted(self.breakpoints, x, side='right')]

    def lower(self, x: float) -> float:
        """Lower semicontinuous evaluation (min of both sides at a breakpoint)"""
        right = np.searchsorted(self.breakpoints, x, side='right')
        left = np.searchsorted(self.breakpoints, x, side='left')
        return float(min(self.values[left], self.values[right]))

    @property
    def is_compact(self) -> bool:
        return self.values[0] == 0.0 and self.values[-1] == 0.0

    def support(self) -> Optional[Tuple[float, float]]:
        if len(self.breakpoints) == 0:
            return None
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def total_variation(self) -> float:
        return float(np.sum(np.abs(np.diff(self.values))))

    def integral(self, a: float, b: float) -> float:
        edges = np.concatenate([[a], np.clip(self.breakpoints, a, b), [b]])
        return float(np.sum(self.values * np.diff(edges)))

    def to_dict(self) -> Dict:
        return {'type': 'steps', 'breakpoints': self.breakpoints.tolist(), 'values': self.values.tolist()}


# Initial data

def _snap(values, delta: float) -> np.ndarray:
    return np.round(np.asarray(values, dtype=float) / delta) * delta


def _node_profile(spec: Dict) -> Tuple[float, float, Callable]:
    """Continuous initial data as (a, b, callable)"""
    kind = spec['type']
    if kind == 'bump':
        a, b, h = float(spec['a']), float(spec['b']), float(spec.get('h', 1.0))
        return a, b, lambda x: h * np.sin(np.pi * (x - a) / (b - a))
    if kind == 'sawtooth':
        a, b, h = float(spec['a']), float(spec['b']), float(spec.get('h', 1.0))
        teeth = int(spec.get('teeth', 3))
        nodes_v = [0.0] + [h if k % 2 == 0 else -h for k in range(teeth)] + [0.0]
        nodes_x = np.linspace(a, b, len(nodes_v))
        return a, b, lambda x: np.interp(x, nodes_x, nodes_v)
    if kind == 'random':
        a, b, h = float(spec['a']), float(spec['b']), float(spec.get('h', 1.0))
        pieces = int(spec.get('pieces', 8))
        rng = np.random.default_rng(int(spec.get('seed', 0)))
        inner = np.sort(rng.uniform(a, b, pieces - 1))
        nodes_x = np.concatenate([[a], inner, [b]])
        nodes_v = np.concatenate([[0.0], rng.uniform(-h, h, pieces - 1), [0.0]])
        if spec.get('positive'):
            nodes_v = np.abs(nodes_v)
        return a, b, lambda x: np.interp(x, nodes_x, nodes_v)
    if kind == 'samples':
        xs = np.asarray(spec['xs'], dtype=float)
        vs = np.asarray(spec['vs'], dtype=float)
        return float(xs[0]), float(xs[-1]), lambda x: np.interp(x, xs, vs, left=0.0, right=0.0)
    raise ValueError(f"Unknown initial data type {kind!r}")


def discretize_initial(u0_spec: Union[Dict, Callable], delta: float,
                       x_resolution: Optional[float] = None,
                       domain: Optional[Tuple[float, float]] = None) -> StepFunction:
    """
    Turn an initial-data description into a step function on the delta-grid

    Args:
        u0_spec: dict with type steps | indicator | bump | sawtooth | random |
                 samples, or a callable sampled on the domain
        delta: value grid spacing
        x_resolution: sampling step for continuous data
        domain: declared spatial domain; support outside it is rejected

    Returns:
        StepFunction with values on the delta-grid
    """
    x_resolution = x_resolution or settings.X_RESOLUTION

    if callable(u0_spec):
        if domain is None:
            raise ValueError("Callable initial data needs a domain")
        a, b, g = domain[0], domain[1], u0_spec
    elif u0_spec['type'] == 'steps':
        sf = StepFunction(u0_spec['breakpoints'], _snap(u0_spec['values'], delta))
        _check_support(sf, domain)
        return sf
    elif u0_spec['type'] == 'indicator':
        a, b = float(u0_spec['a']), float(u0_spec['b'])
        sf = StepFunction([a, b], [0.0, _snap([u0_spec.get('h', 1.0)], delta)[0], 0.0])
        _check_support(sf, domain)
        return sf
    else:
        a, b, g = _node_profile(u0_spec)

    n = max(2, int(math.ceil((b - a) / x_resolution)) + 1)
    xs = np.linspace(a, b, n)
    levels = _snap(g(xs), delta)
    if callable(u0_spec) and (levels[0] != 0.0 or levels[-1] != 0.0):
        raise UnboundedSupport(f"Initial data do not vanish at the domain ends {domain}")
    change = np.nonzero(levels[1:] != levels[:-1])[0]
    breakpoints = 0.5 * (xs[change] + xs[change + 1])
    values = np.concatenate([[levels[0]], levels[change + 1]])
    # continuous data vanish outside [a, b]
    breakpoints = np.concatenate([[a], breakpoints, [b]])
    values = np.concatenate([[0.0], values, [0.0]])
    sf = StepFunction(breakpoints, values)
    _check_support(sf, domain)
    return sf


def _check_support(sf: StepFunction, domain: Optional[Tuple[float, float]]) -> None:
    support = sf.support()
    if domain is None or support is None:
        return
    if support[0] < domain[0] or support[1] > domain[1]:
        raise UnboundedSupport(f"Support {support} exceeds declared domain {domain}")


# Fronts and events

@dataclass
class Front:
    id: int
    t0: float
    x0: float
    sigma: float
    il: int
    ir: int
    left_value: float
    right_value: float
    birth: float
    origin: int                      # event index; negative for initial fans
    death: float = math.inf
    killed_by: Optional[int] = None

    def position(self, t: float) -> float:
        return self.x0 + self.sigma * (t - self.t0)

    def alive_at(self, t: float) -> bool:
        return self.birth <= t < self.death

    def to_dict(self) -> Dict:
        return {
            'id': self.id, 't0': self.t0, 'x0': self.x0, 'sigma': self.sigma,
            'left_value': self.left_value, 'right_value': self.right_value,
            'birth': self.birth, 'death': None if math.isinf(self.death) else self.death,
        }


@dataclass
class Event:
    """A Riemann fan born at (time, x): initial breakpoint or front interaction"""
    index: int
    kind: str                        # 'initial' or 'interaction'
    time: float
    x: float
    incoming: Tuple[int, ...]
    outgoing: Tuple[int, ...]
    fan: WaveFan
    ul_ext: float
    ur_ext: float
    left_neighbor: Optional[int] = None
    right_neighbor: Optional[int] = None

    def to_dict(self) -> Dict:
        return {
            't': self.time, 'x': self.x, 'kind': self.kind,
            'incoming': list(self.incoming), 'outgoing': list(self.outgoing),
            'fan': self.fan.to_dict(),
        }


@dataclass
class Caps:
    max_events: int = settings.EVENT_CAP


@dataclass
class Trajectory:
    """Full front history of one evolution, immutable once evolve returns"""
    delta: float
    flux: PiecewiseAffineFlux
    u0: StepFunction
    T: float
    domain: Tuple[float, float]
    fronts: Dict[int, Front]
    origins: List[Event]
    events: List[Event]
    eps_x: float
    eps_t: float

    def check_time(self, t: float) -> None:
        if t < 0.0 or t > self.T + self.eps_t:
            raise OutOfTimeRange(f"t={t!r} outside [0, {self.T!r}]")

    def living(self, t: float) -> List[Front]:
        """Fronts alive at t, ordered by position"""
        self.check_time(t)
        alive = [f for f in self.fronts.values() if f.alive_at(t)]
        alive.sort(key=lambda f: (f.position(t), f.sigma))
        return alive

    def state(self, t: float) -> Tuple[List[Front], np.ndarray, np.ndarray]:
        """(fronts, positions, region values) with len(values) = len(fronts) + 1"""
        fronts = self.living(t)
        positions = np.asarray([f.position(t) for f in fronts], dtype=float)
        values = np.asarray([self.u0.values[0]] + [f.right_value for f in fronts], dtype=float)
        return fronts, positions, values

    def event_of(self, index: int) -> Event:
        return self.origins[-index - 1] if index < 0 else self.events[index]

    def solution_at(self, t: float) -> StepFunction:
        _, positions, values = self.state(t)
        bps, vals = [], [values[0]]
        for k, p in enumerate(positions):
            if bps and p - bps[-1] <= self.eps_x:
                vals[-1] = values[k + 1]
            else:
                bps.append(p)
                vals.append(values[k + 1])
        return StepFunction(bps, vals)

    def mass(self, t: float) -> float:
        return self.solution_at(t).integral(*self.domain)

    def to_dict(self) -> Dict:
        return {
            'delta': self.delta,
            'T': self.T,
            'domain': list(self.domain),
            'u0': self.u0.to_dict(),
            'flux': self.flux.to_dict(),
            'fronts': [f.to_dict() for f in sorted(self.fronts.values(), key=lambda f: f.id)],
            'events': [e.to_dict() for e in self.events],
        }


def _data_indices(u0: StepFunction, flux: PiecewiseAffineFlux) -> List[int]:
    try:
        return [flux.index_of(float(v)) for v in u0.values]
    except OffGrid as e:
        raise NonGridValue(str(e)) from e


def compute_domain(u0: StepFunction, flux: PiecewiseAffineFlux, T: float) -> Tuple[float, float]:
    """[a - Lip T - 1, b + Lip T + 1] around the data breakpoints"""
    support = u0.support() or (0.0, 0.0)
    lo, hi = float(u0.values.min()), float(u0.values.max())
    lip = flux.lipschitz(lo, hi) if hi > lo else abs(flux.speed(lo))
    return support[0] - lip * T - 1.0, support[1] + lip * T + 1.0


class FrontTracker:
    """
    Event loop of one evolution
    Living fronts form a doubly linked list; collisions sit in a heap keyed by
    (time, position, smaller id)
    """

    def __init__(self, u0: StepFunction, flux: PiecewiseAffineFlux, T: float, caps: Caps):
        self.u0 = u0
        self.flux = flux
        self.T = T
        self.caps = caps
        self.domain = compute_domain(u0, flux, T)
        self.eps_t = settings.EVENT_TIME_TOL * max(1.0, T)
        self.eps_x = settings.EVENT_SPACE_TOL * (self.domain[1] - self.domain[0])

        self.fronts: Dict[int, Front] = {}
        self.left_of: Dict[int, Optional[int]] = {}
        self.right_of: Dict[int, Optional[int]] = {}
        self.origins: List[Event] = []
        self.events: List[Event] = []
        self.heap: List[Tuple] = []

    def _spawn(self, fan: WaveFan, t: float, x: float, origin: int) -> List[int]:
        ids = []
        for wave in fan.waves:
            fid = len(self.fronts)
            self.fronts[fid] = Front(
                id=fid, t0=t, x0=x, sigma=wave.sigma, il=wave.il, ir=wave.ir,
                left_value=wave.ul, right_value=wave.ur, birth=t, origin=origin,
            )
            ids.append(fid)
        return ids

    def _link(self, left: Optional[int], ids: List[int], right: Optional[int]) -> None:
        chain = [left] + ids + [right]
        for a, b in zip(chain[:-1], chain[1:]):
            if a is not None:
                self.right_of[a] = b
            if b is not None:
                self.left_of[b] = a

    def _schedule(self, lid: Optional[int], rid: Optional[int], t_now: float) -> None:
        if lid is None or rid is None:
            return
        a, b = self.fronts[lid], self.fronts[rid]
        if a.sigma <= b.sigma:
            return
        t_c = (b.x0 - b.sigma * b.t0 - a.x0 + a.sigma * a.t0) / (a.sigma - b.sigma)
        t_c = max(t_c, t_now)
        if t_c > self.T:
            return
        x_c = 0.5 * (a.position(t_c) + b.position(t_c))
        heapq.heappush(self.heap, (t_c, x_c, min(lid, rid), lid, rid))

    def _initial_fans(self) -> None:
        indices = _data_indices(self.u0, self.flux)
        previous_last: Optional[int] = None
        for k, x in enumerate(self.u0.breakpoints):
            fan = solve_riemann_indices(self.flux, indices[k], indices[k + 1])
            ids = self._spawn(fan, 0.0, float(x), origin=-k - 1)
            self._link(previous_last, ids, None)
            origin = Event(
                index=-k - 1, kind='initial', time=0.0, x=float(x), incoming=(),
                outgoing=tuple(ids), fan=fan, ul_ext=fan.left_state, ur_ext=fan.right_state,
                left_neighbor=previous_last,
            )
            if self.origins:
                self.origins[-1].right_neighbor = ids[0]
            self.origins.append(origin)
            if previous_last is not None:
                self._schedule(previous_last, ids[0], 0.0)
            previous_last = ids[-1]

    def _trajectory(self, T: float) -> Trajectory:
        return Trajectory(
            delta=self.flux.delta, flux=self.flux, u0=self.u0, T=T, domain=self.domain,
            fronts=self.fronts, origins=self.origins, events=self.events,
            eps_x=self.eps_x, eps_t=self.eps_t,
        )

    def _interact(self, t: float, x: float, lid: int, rid: int) -> None:
        group = [lid, rid]
        left = self.left_of.get(lid)
        while left is not None and abs(self.fronts[left].position(t) - x) <= self.eps_x:
            group.insert(0, left)
            left = self.left_of.get(left)
        right = self.right_of.get(rid)
        while right is not None and abs(self.fronts[right].position(t) - x) <= self.eps_x:
            group.append(right)
            right = self.right_of.get(right)

        first, last = self.fronts[group[0]], self.fronts[group[-1]]
        index = len(self.events)
        for fid in group:
            self.fronts[fid].death = t
            self.fronts[fid].killed_by = index

        fan = solve_riemann_indices(self.flux, first.il, last.ir)
        ids = self._spawn(fan, t, x, origin=index)
        self._link(left, ids, right)
        self.events.append(Event(
            index=index, kind='interaction', time=t, x=x, incoming=tuple(group),
            outgoing=tuple(ids), fan=fan, ul_ext=first.left_value, ur_ext=last.right_value,
            left_neighbor=left, right_neighbor=right,
        ))
        if ids:
            self._schedule(left, ids[0], t)
            self._schedule(ids[-1], right, t)
        else:
            self._schedule(left, right, t)

    def run(self) -> Trajectory:
        self._initial_fans()
        while self.heap:
            t, x, _, lid, rid = heapq.heappop(self.heap)
            if t > self.T:
                break
            a, b = self.fronts[lid], self.fronts[rid]
            if not (math.isinf(a.death) and math.isinf(b.death)) or self.right_of.get(lid) != rid:
                continue
            if len(self.events) >= self.caps.max_events:
                raise CapExceeded(
                    f"Event budget of {self.caps.max_events} exhausted at t={t!r}",
                    partial=self._trajectory(t),
                )
            self._interact(t, x, lid, rid)
        logger.info("Front tracking done: %d fronts, %d events", len(self.fronts), len(self.events))
        return self._trajectory(self.T)


def evolve(u0: StepFunction, flux_delta: PiecewiseAffineFlux, T: float,
           caps: Optional[Caps] = None) -> Trajectory:
    """
    Evolve u0 up to time T under the piecewise-affine flux

    Raises:
        CapExceeded: more than caps.max_events interactions needed
        NonGridValue: u0 takes a value off the flux grid
    """
    caps = caps or Caps()
    if T <= 0.0:
        raise ValueError("evolve needs T > 0")
    if caps.max_events < 1:
        raise ValueError("max_events must be at least 1")
    return FrontTracker(u0, flux_delta, T, caps).run()


# Queries

def _bracket(traj: Trajectory, t: float, x: float):
    _, positions, values = traj.state(t)
    lo = int(np.searchsorted(positions, x - traj.eps_x, side='left'))
    hi = int(np.searchsorted(positions, x + traj.eps_x, side='right'))
    return lo, hi, values


def sample_solution(traj: Trajectory, t: float, xs: Sequence[float]) -> np.ndarray:
    """u(t, x) with the lower semicontinuous value on fronts"""
    _, positions, values = traj.state(t)
    xs = np.asarray(xs, dtype=float)
    out = np.empty(len(xs))
    for k, x in enumerate(xs):
        lo = int(np.searchsorted(positions, x - traj.eps_x, side='left'))
        hi = int(np.searchsorted(positions, x + traj.eps_x, side='right'))
        out[k] = values[lo:hi + 1].min()
    return out


def one_sided_limits(traj: Trajectory, t: float, x: float) -> Tuple[float, float]:
    """(u(t, x-), u(t, x+))"""
    lo, hi, values = _bracket(traj, t, x)
    return float(values[lo]), float(values[hi])


def value_range_on(traj: Trajectory, t: float, a: float, b: float) -> Optional[Tuple[float, float]]:
    """(inf, sup) of u(t) on the open interval (a, b); None when empty"""
    if not a < b:
        return None
    _, positions, values = traj.state(t)
    edges = np.concatenate([[-np.inf], positions, [np.inf]])
    hit = [values[k] for k in range(len(values))
           if edges[k] < b and edges[k + 1] > a and edges[k + 1] > edges[k]]
    if not hit:
        return None
    return float(min(hit)), float(max(hit))


def discontinuities(traj: Trajectory, t: float) -> List[Tuple[float, float, float, float]]:
    """Living fronts at t as (x, u-, u+, sigma), ordered by position"""
    return [(f.position(t), f.left_value, f.right_value, f.sigma) for f in traj.living(t)]
