"""Busemann-type potential differences and the global velocity field.

The potential difference between two anchors is the action difference of
their backward minimizers measured from the coalescence vertex; the global
potential normalizes at the origin, and the global velocity on a slice is
read off the domains-of-influence tessellation. check_global_solution
closes the loop: the potential of a past slice, evolved with the cocycle on
the same realization, must land on the potential of the later slice up to
an additive constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, TextIO

import numpy as np

from .errors import (
    CorridorEscapeError,
    HorizonInsufficientError,
    InvalidParameterError,
    WindowTooSmallError,
)
from .point_field import SpaceTimePoint, Window
from .action_engine import BrokenPath, PathAnchor, path_action
from .hopf_lax import (
    PiecewiseLinearPotential,
    _CocycleSolver,
    apply_cocycle,
    fit_piecewise_linear,
)
from .backward_minimizers import (
    BackwardMinimizer,
    DeepSliceSolver,
    FieldCache,
    HorizonPolicy,
    _deep_slice,
    backward_minimizer,
    coalescence,
    influence_domains,
)

__all__ = [
    "BusemannValue",
    "VelocityDomain",
    "VelocityProfile",
    "busemann",
    "global_potential",
    "global_velocity",
    "global_profile_samples",
    "check_global_solution",
    "increment_autocovariance",
    "dump_busemann",
]


@dataclass(frozen=True)
class BusemannValue:
    """Action difference of two backward minimizers from their coalescence
    vertex. value and coalescence_time are nan when horizon-insufficient."""

    p1: PathAnchor
    p2: PathAnchor
    v: float
    value: float
    coalescence_time: float
    status: str  # "exact" | "horizon-insufficient"

    def __post_init__(self):
        if self.status not in ("exact", "horizon-insufficient"):
            raise InvalidParameterError(f"unknown status {self.status!r}")
        if self.status == "exact" and not (
            np.isfinite(self.value) and np.isfinite(self.coalescence_time)
        ):
            raise InvalidParameterError("exact value must be finite")


@dataclass(frozen=True)
class VelocityDomain:
    """One linear piece of the global velocity: u(x) = slope * x + intercept
    on [lo, hi), generated by one configuration point (None for the chord
    route, where u is constant at the prescribed mean slope)."""

    lo: float
    hi: float
    generator: Optional[SpaceTimePoint]
    slope: float
    intercept: float
    unreliable: bool


@dataclass(frozen=True)
class VelocityProfile:
    """Piecewise-linear global velocity on a slice.

    Domains partition the queried interval; within each one the velocity is
    the straight-characteristic slope (x - p.x)/(t - p.t) of its generating
    point. Negative inter-domain jumps are the expected shock structure;
    they are exposed by boundary_jumps() rather than enforced, so the sign
    statistics stay measurable.
    """

    t: float
    slope_v: float
    domains: tuple[VelocityDomain, ...]
    horizon_T: float
    stabilized: bool

    def __post_init__(self):
        if not self.domains:
            raise InvalidParameterError("profile needs at least one domain")
        for d in self.domains:
            if not d.lo < d.hi:
                raise InvalidParameterError("empty velocity domain")
            if d.generator is None:
                if d.slope != 0.0 or d.intercept != self.slope_v:
                    raise InvalidParameterError("chord domain must carry u == v")
            elif not d.generator.t < self.t:
                raise InvalidParameterError("generator must precede the slice")
        for da, db in zip(self.domains, self.domains[1:]):
            if da.hi != db.lo:
                raise InvalidParameterError("domains must tile the interval")

    @property
    def boundaries(self) -> np.ndarray:
        return np.array([d.hi for d in self.domains[:-1]])

    def _domain_velocity(self, d: VelocityDomain, xs: np.ndarray) -> np.ndarray:
        if d.generator is None:
            return np.full(xs.shape, self.slope_v)
        # straight characteristic; better conditioned than slope*x + intercept
        return (xs - d.generator.x) / (self.t - d.generator.t)

    def velocity_at(self, x):
        scalar = np.isscalar(x)
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if xs.size and (xs.min() < self.domains[0].lo or xs.max() > self.domains[-1].hi):
            raise InvalidParameterError("query outside the profiled interval")
        idx = np.searchsorted(self.boundaries, xs, side="right")
        out = np.empty_like(xs)
        for k, d in enumerate(self.domains):
            hit = idx == k
            if hit.any():
                out[hit] = self._domain_velocity(d, xs[hit])
        return float(out[0]) if scalar else out

    def boundary_jumps(self) -> np.ndarray:
        """u(x_k+) - u(x_k-) at every interior boundary, from the two
        generating lines evaluated at the same abscissa (no grid smear)."""
        out = np.empty(len(self.domains) - 1)
        for k in range(out.shape[0]):
            xk = np.array([self.domains[k].hi])
            left = self._domain_velocity(self.domains[k], xk)
            right = self._domain_velocity(self.domains[k + 1], xk)
            out[k] = right[0] - left[0]
        return out


def _minimizer(
    seed: int,
    endpoint: SpaceTimePoint,
    v: float,
    horizon: HorizonPolicy,
    cache: FieldCache,
) -> BackwardMinimizer:
    return backward_minimizer(
        seed,
        endpoint,
        v,
        horizon.T0,
        horizon.T_max,
        horizon.stability_window_fraction,
        intensity=horizon.intensity,
        policy=horizon.corridor,
        cache=cache,
    )


def _action_since(m: BackwardMinimizer, t_c: float) -> float:
    """Total action of the minimizer restricted to [t_c, endpoint.t].

    The restriction starts at the vertex sitting exactly at t_c and keeps it
    as a visited vertex (zero-duration first segment), so the shared
    coalescence point contributes -1 to both restrictions of a Busemann
    difference and cancels.
    """
    path = m.path
    ts = path.field.ts
    idx = tuple(i for i in path.vertex_indices if ts[i] >= t_c)
    start = path.field.point(idx[0])
    sub = BrokenPath(path.field, start, idx, path.end)
    return path_action(path.field, sub).total


def busemann(
    seed: int,
    v: float,
    p1: PathAnchor,
    p2: PathAnchor,
    horizon: HorizonPolicy = HorizonPolicy(),
    *,
    cache: Optional[FieldCache] = None,
) -> BusemannValue:
    """Potential difference B(p1, p2) of the slope-v minimizer family.

    Both backward minimizers are stabilized on the same realization; when
    they coalesce, the value is the action of the p2 path minus the action
    of the p1 path, each measured from the shared coalescence vertex.
    Identical anchors short-circuit to an exact zero.
    """
    a1 = SpaceTimePoint(float(p1[0]), float(p1[1]))
    a2 = SpaceTimePoint(float(p2[0]), float(p2[1]))
    if not all(map(np.isfinite, (a1.x, a1.t, a2.x, a2.t, v))):
        raise InvalidParameterError("anchors and slope must be finite")
    if a1 == a2:
        return BusemannValue(a1, a2, float(v), 0.0, a1.t, "exact")
    if cache is None:
        cache = FieldCache(seed, horizon.intensity)
    m1 = _minimizer(seed, a1, v, horizon, cache)
    m2 = _minimizer(seed, a2, v, horizon, cache)
    c = coalescence(seed, m1, m2)
    if c.status != "coalesced":
        return BusemannValue(a1, a2, float(v), float("nan"), float("nan"), "horizon-insufficient")
    value = _action_since(m2, c.time) - _action_since(m1, c.time)
    return BusemannValue(a1, a2, float(v), float(value), float(c.time), "exact")


def global_potential(
    seed: int,
    v: float,
    x: float,
    t: float,
    horizon: HorizonPolicy = HorizonPolicy(),
    *,
    cache: Optional[FieldCache] = None,
) -> float:
    """Potential normalized at the origin, B((0,0), (x,t)); raises when the
    pair does not coalesce within the horizon ladder."""
    bv = busemann(seed, v, (0.0, 0.0), (float(x), float(t)), horizon, cache=cache)
    if bv.status != "exact":
        raise HorizonInsufficientError(
            f"no coalescence of (0,0) and ({x}, {t}) within T_max={horizon.T_max}"
        )
    return bv.value


def global_velocity(
    seed: int,
    v: float,
    t: float,
    interval: tuple[float, float],
    tol: float,
    horizon: HorizonPolicy = HorizonPolicy(),
    *,
    cache: Optional[FieldCache] = None,
) -> VelocityProfile:
    """Global velocity on interval at time t: the influence tessellation with
    each cell carrying its straight-characteristic velocity line."""
    dom = influence_domains(seed, v, t, interval, tol, horizon, cache=cache)
    domains = []
    for cell in dom.cells:
        if cell.generator is None:
            slope, intercept = 0.0, float(v)
        else:
            dt = float(t) - cell.generator.t
            slope, intercept = 1.0 / dt, -cell.generator.x / dt
        domains.append(
            VelocityDomain(cell.lo, cell.hi, cell.generator, slope, intercept, cell.unreliable)
        )
    return VelocityProfile(
        t=float(t),
        slope_v=float(v),
        domains=tuple(domains),
        horizon_T=dom.horizon_T,
        stabilized=dom.stabilized,
    )


def global_profile_samples(
    seed: int,
    v: float,
    t: float,
    interval: tuple[float, float],
    resolution: int,
    horizon: HorizonPolicy = HorizonPolicy(),
    *,
    cache: Optional[FieldCache] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(x, potential, velocity, generator_x) of the global solution sampled
    on a uniform grid; the potential is normalized at the left endpoint and
    generator_x is nan on chord routes."""
    a, b = float(interval[0]), float(interval[1])
    if not (np.isfinite(a) and np.isfinite(b) and a < b) or resolution < 2:
        raise InvalidParameterError("need a < b and at least two samples")
    if cache is None:
        cache = FieldCache(seed, horizon.intensity)
    xs = np.linspace(a, b, int(resolution))

    def run(slice_: DeepSliceSolver):
        if not slice_.stabilized:
            raise HorizonInsufficientError(
                f"slice values did not stabilize by T_max={horizon.T_max}"
            )
        pot, vel, _, gidx, gx, _ = slice_.query(xs)
        return pot - pot[0], vel, np.where(gidx >= 0, gx, np.nan)

    pot, vel, gen_x = _deep_slice(cache, v, t, a, b, horizon, run, track_values=True)
    return xs, pot, vel, gen_x


def _anchored_slice_potential(
    cache: FieldCache,
    v: float,
    s0: float,
    t: float,
    lo: float,
    hi: float,
    horizon: HorizonPolicy,
    xs: np.ndarray,
    slack: Optional[float] = None,
) -> np.ndarray:
    """Potential at time t of the slope-v line evolved from the fixed anchor
    time s0 (single solve, no ladder), sampled at xs in [lo, hi]."""
    W = PiecewiseLinearPotential(0.0, 0.0, np.empty(0), np.array([float(v)]))
    corridor = horizon.corridor
    slack = corridor.slack if slack is None else float(slack)
    for _ in range(corridor.max_widenings + 1):
        hw = corridor.half_width_rate * (t - s0) + slack
        field_ = cache.covering(Window(lo - hw, hi + hw, s0, t))
        while True:
            try:
                solver = _CocycleSolver(field_, W, s0, t, lo, hi, corridor, slack)
                break
            except WindowTooSmallError as err:
                field_ = cache.covering(err.required_window)
        out = solver.query(xs)
        if not out[-1]:
            return out[0]
        slack *= 2.0
    raise CorridorEscapeError(
        f"anchored slice chains kept approaching the corridor walls "
        f"after {corridor.max_widenings} widenings"
    )


def check_global_solution(
    seed: int,
    v: float,
    s: float,
    t: float,
    interval: tuple[float, float],
    horizon: HorizonPolicy = HorizonPolicy(),
    *,
    cache: Optional[FieldCache] = None,
    fit_tol: float = 1e-7,
    grid_points: int = 512,
) -> float:
    """Sup discrepancy between the evolved past potential and the later one.

    The potential of the slice at time s is densely sampled on a padded
    range, refit piecewise-linear, evolved to time t with the cocycle on the
    same field realization, and compared on a dense grid against the slice
    at t computed directly from the source's own deep anchor, both
    normalized at the interval's left endpoint. Anchoring both slices at
    the same remote time keeps the comparison free of truncation drift:
    deep near-tie trees flap between ladder rungs and long-range potential
    differences only settle once the whole band has merged into one tree,
    but both sides of a matched-anchor comparison inherit the same
    resolution of every such tie, so the identity is checkable at whatever
    horizon the ladder reached (it stops early when adjacent increments
    stabilize).
    """
    a, b = float(interval[0]), float(interval[1])
    if not (np.isfinite(a) and np.isfinite(b) and a < b):
        raise InvalidParameterError(f"bad interval [{a}, {b}]")
    if not (np.isfinite(s) and np.isfinite(t) and s <= t):
        raise InvalidParameterError(f"need s <= t, got {s}, {t}")
    if s == t:
        return 0.0
    if cache is None:
        cache = FieldCache(seed, horizon.intensity)
    tau = t - s
    # argmins of the evolution must stay inside the sampled source range
    pad = (abs(v) + 2.0) * tau + 8.0
    lo, hi = a - pad, b + pad

    def sampled(slice_: DeepSliceSolver):
        xs_, vals_ = slice_.dense_samples(fit_tol)
        return xs_, vals_, slice_.horizon_T, slice_.slack

    xs_s, vals_s, T_s, slack_s = _deep_slice(
        cache, v, s, lo, hi, horizon, sampled, track_values=True, require_keys=False
    )
    # barrier end slopes keep evolution argmins off the unsampled tails
    barrier = (hi - lo) / tau + abs(v) + 10.0
    W = fit_piecewise_linear(xs_s, vals_s, -barrier, barrier)

    grid = np.linspace(a, b, int(grid_points))
    hw = horizon.corridor.half_width_rate * tau + horizon.corridor.slack
    field_ = cache.covering(Window(a - hw, b + hw, s, t))
    while True:
        try:
            prof = apply_cocycle(field_, W, s, t, grid, horizon.corridor)
            break
        except WindowTooSmallError as err:
            field_ = cache.covering(err.required_window)

    # route-set parity: give the direct solve the same corridor walls the
    # source slice used, so neither side can see a deep excursion the other
    # truncated (wall = interval end + pad + rate*(s - s0) + slack_s)
    slack_t = slack_s + pad - horizon.corridor.half_width_rate * tau
    target = _anchored_slice_potential(
        cache, v, s - T_s, t, a, b, horizon, grid, slack=slack_t
    )
    d = (prof.potential - prof.potential[0]) - (target - target[0])
    return float(np.max(np.abs(d)))


def increment_autocovariance(
    seed: int,
    v: float,
    t: float,
    half_width: int,
    max_lag: int,
    horizon: HorizonPolicy = HorizonPolicy(),
    *,
    cache: Optional[FieldCache] = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Sample autocovariance of unit potential increments on one slice.

    Increments U(k+1) - U(k) for integer k in [-half_width, half_width) come
    from one slice solve at the deepest horizon the ladder reached; lag 0 is
    the sample variance. Reported as a diagnostic — mixing predicts decay,
    no threshold is set. Wide bands essentially never settle whole (a few
    near-tie cells keep flapping between rungs however deep the ladder
    goes), so instead of gating on stabilization the third return value
    counts the unit increments still moving between the final two rungs;
    0 means every increment is settled to 1e-9.
    """
    if half_width < 1 or max_lag < 1 or max_lag >= 2 * half_width:
        raise InvalidParameterError("need half_width >= 1 and 1 <= max_lag < 2*half_width")
    if cache is None:
        cache = FieldCache(seed, horizon.intensity)
    xs = np.arange(-half_width, half_width + 1, dtype=np.float64)

    def run(slice_: DeepSliceSolver):
        pot_ = slice_.query(xs)[0]
        if slice_.penultimate_norm is None:
            return pot_, xs.shape[0] - 1  # single rung: nothing to compare
        # integer abscissas sit on the probe grid exactly for the default
        # quarter-unit step; off-grid endpoints count as unsettled
        ii = np.clip(np.searchsorted(slice_.coarse_xs, xs), 0, slice_.coarse_xs.shape[0] - 1)
        on_grid = slice_.coarse_xs[ii] == xs
        drift = np.abs(np.diff(slice_.coarse_norm[ii]) - np.diff(slice_.penultimate_norm[ii]))
        moving = (drift > 1e-9) | ~(on_grid[1:] & on_grid[:-1])
        return pot_, int(moving.sum())

    pot, unsettled = _deep_slice(
        cache, v, t, xs[0], xs[-1], horizon, run, track_values=True, require_keys=False
    )
    inc = np.diff(pot)
    inc = inc - inc.mean()
    n = inc.shape[0]
    lags = np.arange(0, max_lag + 1)
    acov = np.array([float(inc[: n - L] @ inc[L:]) / n for L in lags])
    return lags, acov, unsettled


def dump_busemann(samples: Iterable[tuple[int, BusemannValue]], fp: TextIO) -> None:
    """CSV rows (seed, v, p1, p2, value, t_c, status)."""
    fp.write("seed,v,p1_x,p1_t,p2_x,p2_t,value,t_c,status\n")
    for seed, bv in samples:
        fp.write(
            f"{seed},{bv.v:.17g},{bv.p1.x:.17g},{bv.p1.t:.17g},"
            f"{bv.p2.x:.17g},{bv.p2.t:.17g},{bv.value:.17g},"
            f"{bv.coalescence_time:.17g},{bv.status}\n"
        )
