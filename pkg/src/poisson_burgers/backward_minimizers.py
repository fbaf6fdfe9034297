"""Finite-horizon backward minimizers of prescribed mean slope.

A backward minimizer ending at p with slope v is approximated by the
minimal-action path from the remote anchor (p.x - v T, p.t - T) to p,
with the horizon T doubled until the vertex sequence near the endpoint
stops changing. Coalescence of two such minimizers and the tessellation
of a time slice into domains of influence build on that.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field as dataclass_field
from typing import Optional, TextIO

import numpy as np

from .errors import (
    CorridorEscapeError,
    InvalidPairingError,
    InvalidParameterError,
    WindowTooSmallError,
)
from .point_field import PointField, SpaceTimePoint, Window, generate, restrict
from .action_engine import (
    TIE_TOL,
    ActionValue,
    BrokenPath,
    CorridorPolicy,
    PathAnchor,
    corridor_window,
    min_action_two_point,
)
from .hopf_lax import PiecewiseLinearPotential, _CocycleSolver, _envelope_batch

__all__ = [
    "FieldCache",
    "HorizonPolicy",
    "BackwardMinimizer",
    "CoalescenceResult",
    "InfluenceCell",
    "InfluenceDomains",
    "backward_minimizer",
    "coalescence",
    "influence_domains",
    "dump_minimizer",
]

# Backward corridors span long durations, so the growth rate is kept well
# below the two-point default; escape-and-widen covers the exceptions.
_BACKWARD_CORRIDOR = CorridorPolicy(half_width_rate=0.5, slack=8.0, max_widenings=8)


def _quantized(window: Window) -> Window:
    """Expand a window outward to the integer grid with one cell of margin."""
    return Window(
        float(np.floor(window.x_min)) - 1.0,
        float(np.ceil(window.x_max)) + 1.0,
        float(np.floor(window.t_min)) - 1.0,
        float(np.ceil(window.t_max)) + 1.0,
    )


class FieldCache:
    """Grow-only window cache for one field realization.

    covering() returns a field whose window contains the request,
    regenerating at the quantized union when it does not. Window-consistent
    generation makes the contents independent of the growth history, so
    concurrent readers are safe (the lock only orders regenerations) and
    every computation on the returned fields is deterministic.
    """

    def __init__(self, master_seed: int, intensity: float = 1.0):
        self.master_seed = int(master_seed)
        self.intensity = float(intensity)
        self._lock = threading.Lock()
        self._field: Optional[PointField] = None
        self._fixed = False

    @classmethod
    def wrapping(cls, field_: PointField) -> "FieldCache":
        """Fixed cache serving an existing (e.g. transformed) field; covering
        a window outside it raises instead of regenerating."""
        cache = cls(field_.master_seed, field_.intensity)
        cache._field = field_
        cache._fixed = True
        return cache

    def covering(self, window: Window) -> PointField:
        with self._lock:
            if self._field is not None and self._field.window.contains_rect(window):
                return self._field
            if self._fixed:
                raise WindowTooSmallError(
                    f"fixed field window {self._field.window} does not cover {window}",
                    required_window=window,
                )
            grown = _quantized(window)
            if self._field is not None:
                grown = grown.union(self._field.window)
            self._field = generate(self.master_seed, self.intensity, grown)
            return self._field


@dataclass(frozen=True)
class HorizonPolicy:
    """Horizon-doubling schedule plus the field and corridor parameters
    shared by everything built on backward minimizers."""

    T0: float = 16.0
    T_max: float = 512.0
    stability_window_fraction: float = 0.5
    intensity: float = 1.0
    corridor: CorridorPolicy = _BACKWARD_CORRIDOR
    slice_grid_step: float = 0.25  # probe spacing of the tessellation sweep

    def __post_init__(self):
        if not (np.isfinite(self.T0) and 0.0 < self.T0 <= self.T_max):
            raise InvalidParameterError(f"bad horizon ladder {self.T0}..{self.T_max}")
        if not 0.5 <= self.stability_window_fraction <= 1.0:
            # below 1/2 the stabilized window could be shallower than T/4,
            # breaking the stable_until guarantee
            raise InvalidParameterError(
                f"stability window fraction {self.stability_window_fraction} outside [0.5, 1]"
            )
        if not (np.isfinite(self.intensity) and self.intensity > 0.0):
            raise InvalidParameterError(f"intensity must be positive, got {self.intensity}")
        if not (np.isfinite(self.slice_grid_step) and self.slice_grid_step > 0.0):
            raise InvalidParameterError(f"bad slice grid step {self.slice_grid_step}")

    def ladder(self) -> list[float]:
        out = []
        T = float(self.T0)
        while T <= self.T_max:
            out.append(T)
            T *= 2.0
        return out


@dataclass(frozen=True)
class BackwardMinimizer:
    """Finite-horizon stand-in for the backward minimizer of mean slope v.

    vertices are ordered by decreasing time. Vertices later than
    stable_until agreed exactly across the last horizon doubling; when
    stabilized is false nothing agreed (stable_until then sits at
    endpoint.t, leaving the trusted set empty).
    """

    master_seed: int
    endpoint: PathAnchor
    slope_v: float
    horizon_T: float
    anchor: PathAnchor
    vertices: tuple[SpaceTimePoint, ...]
    stable_until: float
    stabilized: bool
    action: ActionValue
    path: BrokenPath = dataclass_field(repr=False)

    def __post_init__(self):
        ts = [p.t for p in self.vertices]
        if any(t2 >= t1 for t1, t2 in zip(ts, ts[1:])):
            raise InvalidParameterError("vertex times must strictly decrease")
        if ts and not (self.anchor.t < ts[-1] and ts[0] < self.endpoint.t):
            raise InvalidParameterError("vertex times outside (anchor.t, endpoint.t)")
        if self.stabilized and self.stable_until > self.endpoint.t - self.horizon_T / 4.0:
            raise InvalidParameterError("stabilized window shallower than a quarter horizon")

    @property
    def first_vertex(self) -> Optional[SpaceTimePoint]:
        """Largest-time vertex (the generating point of the endpoint)."""
        return self.vertices[0] if self.vertices else None


@dataclass(frozen=True)
class CoalescenceResult:
    point: Optional[SpaceTimePoint]
    time: Optional[float]
    status: str  # "coalesced" | "horizon-insufficient"


def _anchored_path(
    cache: FieldCache,
    start: SpaceTimePoint,
    end: SpaceTimePoint,
    policy: CorridorPolicy,
) -> tuple[ActionValue, BrokenPath]:
    """min_action_two_point against the cache, growing the window on demand."""
    field_ = cache.covering(corridor_window(start, end, policy))
    while True:
        try:
            return min_action_two_point(field_, start, end, policy)
        except WindowTooSmallError as err:
            # escape-and-widen inside the solve can push the corridor past
            # the current window; the cache regeneration is consistent, so
            # retrying repeats the widening ladder on the same points
            field_ = cache.covering(err.required_window)


def _vertices_since(path: BrokenPath, cutoff: float) -> tuple[SpaceTimePoint, ...]:
    return tuple(p for p in path.vertices() if p.t >= cutoff)


def backward_minimizer(
    seed: int,
    endpoint: PathAnchor,
    v: float,
    T0: float,
    T_max: float,
    stability_window_fraction: float = 0.5,
    *,
    intensity: float = 1.0,
    policy: CorridorPolicy = _BACKWARD_CORRIDOR,
    cache: Optional[FieldCache] = None,
) -> BackwardMinimizer:
    """Horizon-doubled minimal path into endpoint with mean slope v.

    For T = T0, 2 T0, ... <= T_max the minimal-action path from the exact-
    slope anchor (endpoint.x - v T, endpoint.t - T) to the endpoint is
    solved on the same realization; once the vertices in the most recent
    stability_window_fraction * T_prev agree exactly across a doubling, the
    larger-horizon path is returned as stabilized. Exhausting T_max without
    agreement is an answer (stabilized=False), not an error.
    """
    endpoint = SpaceTimePoint(float(endpoint[0]), float(endpoint[1]))
    if not (np.isfinite(endpoint.x) and np.isfinite(endpoint.t) and np.isfinite(v)):
        raise InvalidParameterError(f"bad endpoint/slope {endpoint}, {v}")
    horizon = HorizonPolicy(
        T0=T0,
        T_max=T_max,
        stability_window_fraction=stability_window_fraction,
        intensity=intensity,
        corridor=policy,
    )
    if cache is None:
        cache = FieldCache(seed, intensity)
    elif cache.master_seed != seed or cache.intensity != intensity:
        raise InvalidParameterError("cache does not match the requested realization")

    prev: Optional[tuple[float, ActionValue, BrokenPath]] = None
    T = horizon.T0
    for T in horizon.ladder():
        anchor = SpaceTimePoint(endpoint.x - v * T, endpoint.t - T)
        action, path = _anchored_path(cache, anchor, endpoint, policy)
        if prev is not None:
            T_prev, _, prev_path = prev
            cutoff = endpoint.t - stability_window_fraction * T_prev
            if _vertices_since(path, cutoff) == _vertices_since(prev_path, cutoff):
                return BackwardMinimizer(
                    master_seed=seed,
                    endpoint=endpoint,
                    slope_v=float(v),
                    horizon_T=T,
                    anchor=anchor,
                    vertices=tuple(reversed(path.vertices())),
                    stable_until=cutoff,
                    stabilized=True,
                    action=action,
                    path=path,
                )
        prev = (T, action, path)
    T, action, path = prev
    return BackwardMinimizer(
        master_seed=seed,
        endpoint=endpoint,
        slope_v=float(v),
        horizon_T=T,
        anchor=SpaceTimePoint(endpoint.x - v * T, endpoint.t - T),
        vertices=tuple(reversed(path.vertices())),
        stable_until=endpoint.t,
        stabilized=False,
        action=action,
        path=path,
    )


def coalescence(seed: int, m1: BackwardMinimizer, m2: BackwardMinimizer) -> CoalescenceResult:
    """Latest common vertex below which the stabilized sequences coincide.

    The scan covers the certified range only, times in
    [min(stable_until), endpoint.t]: both paths eventually peel off toward
    their own anchors, so identity below the coalescence point is a
    statement about the stabilized lists, not the full tails. The reported
    point is the top of their longest common suffix; no common suffix (or
    an unstabilized input) is horizon-insufficient rather than an error.
    """
    if m1.slope_v != m2.slope_v:
        raise InvalidPairingError(f"slopes differ: {m1.slope_v} vs {m2.slope_v}")
    if m1.master_seed != seed or m2.master_seed != seed:
        raise InvalidPairingError("minimizers come from a different realization")
    if not (m1.stabilized and m2.stabilized):
        return CoalescenceResult(None, None, "horizon-insufficient")
    floor_t = min(m1.stable_until, m2.stable_until)
    s1 = [p for p in m1.vertices if p.t >= floor_t]
    s2 = [p for p in m2.vertices if p.t >= floor_t]
    k = 0
    while k < min(len(s1), len(s2)) and s1[-1 - k] == s2[-1 - k]:
        k += 1
    if k == 0:
        return CoalescenceResult(None, None, "horizon-insufficient")
    c = s1[-k]
    return CoalescenceResult(c, c.t, "coalesced")


def dump_minimizer(m: BackwardMinimizer, fp: TextIO) -> None:
    """CSV of (t, x) vertices in descending time, header carrying the query."""
    fp.write(
        f"# endpoint_x={m.endpoint.x:.17g} endpoint_t={m.endpoint.t:.17g} "
        f"v={m.slope_v:.17g} T={m.horizon_T:.17g} "
        f"stabilized={'true' if m.stabilized else 'false'}\n"
    )
    fp.write("t,x\n")
    for p in m.vertices:
        fp.write(f"{p.t:.17g},{p.x:.17g}\n")


# ---------------------------------------------------------------------------
# Domains of influence of a time slice.
#
# Minimizers from every abscissa of the slice are solved at once: evolving
# the exact-slope linear potential z -> v z from time t - T gives each
# configuration point its own slope-v entry (the envelope argmin satisfies
# z* = p.x - v (p.t - (t-T)) exactly), so the winning chain of a query is
# the slope-v backward minimizer with a free rather than pinned deep end,
# and its last configuration point is the first vertex. One chain solve
# per horizon then serves the whole tessellation sweep, where anchored
# solves per probe would repeat the O(n^2) work hundreds of times.
# ---------------------------------------------------------------------------


class _SliceEscaped(Exception):
    """A winning chain of the slice ran near the corridor wall."""


_SliceKey = Optional[tuple[float, float]]  # generating point, None for chord routes


class DeepSliceSolver:
    """Slope-v linear data evolved from a doubling horizon into one slice.

    The ladder stops once every coarse probe keeps its generating point
    across a doubling (and, when track_values is set, adjacent-probe
    increments of the potential move by at most value_tol — increments
    settle with local coalescence, long-range differences only with the
    much deeper merging of the whole band). require_keys=False drops the
    generator condition, for value-level work on ranges wide enough that
    some probe always sits near a microscopically drifting cell boundary.
    Queries after construction all hit the final, largest-horizon solver.
    """

    def __init__(
        self,
        cache: FieldCache,
        v: float,
        t: float,
        lo: float,
        hi: float,
        horizon: HorizonPolicy = HorizonPolicy(),
        *,
        slack: Optional[float] = None,
        track_values: bool = False,
        value_tol: float = 1e-9,
        require_keys: bool = True,
    ):
        if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
            raise InvalidParameterError(f"bad slice range [{lo}, {hi}]")
        self.v = float(v)
        self.t = float(t)
        self.lo, self.hi = float(lo), float(hi)
        self.horizon = horizon
        self.slack = horizon.corridor.slack if slack is None else float(slack)
        W = PiecewiseLinearPotential(0.0, 0.0, np.empty(0), np.array([self.v]))
        if hi > lo:
            n_coarse = max(2, int(np.ceil((hi - lo) / horizon.slice_grid_step)) + 1)
            self.coarse_xs = np.linspace(lo, hi, n_coarse)
        else:
            self.coarse_xs = np.array([lo])

        prev_keys: Optional[list[_SliceKey]] = None
        prev_norm: Optional[np.ndarray] = None
        self.stabilized = False
        self.probe_stable = np.zeros(self.coarse_xs.shape[0], dtype=bool)
        self.penultimate_norm: Optional[np.ndarray] = None
        for T in horizon.ladder():
            s0 = self.t - T
            hw = horizon.corridor.half_width_rate * T + self.slack
            field_ = cache.covering(Window(lo - hw, hi + hw, s0, self.t))
            while True:
                try:
                    solver = _CocycleSolver(
                        field_, W, s0, self.t, lo, hi, horizon.corridor, self.slack
                    )
                    break
                except WindowTooSmallError as err:
                    field_ = cache.covering(err.required_window)
            self.solver = solver
            self.horizon_T = T
            keys, norm = self._probe(self.coarse_xs)
            if prev_keys is not None:
                self.probe_stable = np.array(
                    [a == b for a, b in zip(keys, prev_keys)], dtype=bool
                )
                self.penultimate_norm = prev_norm
                values_ok = (not track_values) or norm.shape[0] < 2 or bool(
                    np.max(np.abs(np.diff(norm) - np.diff(prev_norm))) <= value_tol
                )
                keys_ok = self.probe_stable.all() or not require_keys
                if keys_ok and values_ok:
                    self.stabilized = True
                    break
            prev_keys, prev_norm = keys, norm
        self.coarse_keys, self.coarse_norm = keys, norm

    def _probe(self, xs: np.ndarray) -> tuple[list[_SliceKey], np.ndarray]:
        pot, _, _, gidx, gx, gt, escaped = self.solver.query(xs)
        if escaped:
            raise _SliceEscaped
        keys: list[_SliceKey] = [
            (float(gx[i]), float(gt[i])) if gidx[i] >= 0 else None
            for i in range(xs.shape[0])
        ]
        return keys, pot - pot[0]

    def query(self, xs) -> tuple[np.ndarray, ...]:
        """(potential, velocity, ystar, generator idx/x/t) at abscissas inside
        the slice range; raises on a corridor escape."""
        xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
        if xs.size and (xs.min() < self.lo or xs.max() > self.hi):
            raise InvalidParameterError("query outside the prepared slice range")
        out = self.solver.query(xs)
        if out[-1]:
            raise _SliceEscaped
        return out[:-1]

    def key_at(self, x: float) -> _SliceKey:
        keys, _ = self._probe(np.array([float(x)]))
        return keys[0]

    def dense_samples(self, tol: float, max_points: int = 2_000_000):
        """Samples dense enough that a linear interpolant stays within tol.

        Restricted to the slice, the potential is the lower envelope of one
        parabola per corridor point, value_i + (x - p.x)^2 / (2 (t - p.t)),
        plus the point-free route (exactly linear for the slope-v initial
        line). Querying the chain solver point by point costs O(corridor
        points) per abscissa, which is prohibitive at the node density a
        curvature-1/(2(t-p.t)) parabola forces on a tol-faithful refit, so
        the envelope structure is certified once instead: subintervals are
        split until the midpoint winner provably stays below every other
        candidate (pairwise differences are quadratics, so their minimum
        over an interval is exact), and nodes are then laid per certified
        span at the spacing that keeps the winner's chord defect within
        tol. Spans still ambiguous at width 1e-9 sit at piece boundaries,
        where the few surviving candidates agree to curvature * width^2;
        their nodes take the explicit minimum. Node values use the same
        expression query() evaluates, and a chain that wins or ties
        anywhere raises the escape signal exactly as a query would.
        """
        if not self.hi > self.lo:
            raise InvalidParameterError("dense sampling needs a nondegenerate range")
        if not (np.isfinite(tol) and tol > 0.0):
            raise InvalidParameterError(f"need tol > 0, got {tol}")
        sol = self.solver
        lo, hi = self.lo, self.hi
        tau = self.t - sol.s
        env2 = _envelope_batch(sol.W, np.array([lo, hi]), np.full(2, tau))[0]
        chord_slope = (env2[1] - env2[0]) / (hi - lo)

        px, val = sol.pxs, sol.values
        A = self.t - sol.pts
        npts = px.shape[0]  # candidate npts is the point-free route
        qa = np.concatenate((0.5 / A, [0.0])) if npts else np.array([0.0])
        qb = np.concatenate((-px / A, [chord_slope])) if npts else np.array([chord_slope])
        walls = np.concatenate((sol.chain_walldist, [np.inf]))
        margin = sol.slack / 2.0

        def f_one(k: int, xs):
            xs = np.asarray(xs, dtype=np.float64)
            if k < npts:
                return val[k] + (xs - px[k]) ** 2 / (2.0 * A[k])
            return env2[0] + chord_slope * (xs - lo)

        def f_at(idx: np.ndarray, x) -> np.ndarray:
            x = np.asarray(x, dtype=np.float64)
            out = np.empty(idx.shape[0])
            m = idx < npts
            ii = idx[m]
            xm = x[m] if x.shape else x
            out[m] = val[ii] + (xm - px[ii]) ** 2 / (2.0 * A[ii])
            xc = x[~m] if x.shape else x
            out[~m] = env2[0] + chord_slope * (xc - lo)
            return out

        def f_min(idx: np.ndarray, l: float, r: float) -> np.ndarray:
            out = np.empty(idx.shape[0])
            m = idx < npts
            ii = idx[m]
            d = np.maximum(0.0, np.maximum(l - px[ii], px[ii] - r))
            out[m] = val[ii] + d * d / (2.0 * A[ii])
            out[~m] = env2[0] + chord_slope * ((l if chord_slope >= 0.0 else r) - lo)
            return out

        eps_b = 1e-9
        stack = [(lo, hi, np.arange(npts + 1, dtype=np.int64))]
        pieces: list[tuple[float, float, int, np.ndarray]] = []
        while stack:
            l, r, cand = stack.pop()
            k = int(cand[int(np.argmin(f_at(cand, 0.5 * (l + r))))])
            fk_ends = f_one(k, np.array([l, r]))
            fmax_k = float(fk_ends.max())
            cand = cand[f_min(cand, l, r) <= fmax_k + TIE_TOL]
            others = cand[cand != k]
            if others.size:
                # min over [l, r] of f_other - f_k: endpoints, plus the
                # vertex of the difference when it is convex and interior
                gm = np.minimum(f_at(others, l) - fk_ends[0], f_at(others, r) - fk_ends[1])
                ag = qa[others] - qa[k]
                bg = qb[others] - qb[k]
                pos = ag > 0.0
                xv = np.where(pos, -bg / np.where(pos, 2.0 * ag, 1.0), l)
                inside = pos & (xv > l) & (xv < r)
                if inside.any():
                    sub = others[inside]
                    gv = f_at(sub, xv[inside]) - f_one(k, xv[inside])
                    gm[inside] = np.minimum(gm[inside], gv)
                certified = bool((gm >= 0.0).all())
            else:
                certified = True
            if certified:
                near = others[gm <= TIE_TOL] if others.size else others
                if walls[np.concatenate(([k], near))].min() < margin:
                    raise _SliceEscaped
                pieces.append((l, r, k, near))
            elif r - l <= eps_b:
                if walls[cand].min() < margin:
                    raise _SliceEscaped
                pieces.append((l, r, k, others))
            else:
                mid = 0.5 * (l + r)
                stack.append((mid, r, cand))
                stack.append((l, mid, cand))

        xs_parts, val_parts = [], []
        total = 0
        for l, r, k, near in pieces:
            if k < npts:
                n = max(1, int(np.ceil((r - l) / np.sqrt(8.0 * tol * A[k]))))
            else:
                n = 1
            total += n
            if total > max_points:
                raise InvalidParameterError("slice sampling exceeded the point budget")
            xs_p = l + (r - l) * (np.arange(n) / n)
            vals_p = f_one(k, xs_p)
            for j in near:  # ties and eps_b-sliver contenders
                vals_p = np.minimum(vals_p, f_one(int(j), xs_p))
            xs_parts.append(xs_p)
            val_parts.append(vals_p)
        l, r, k, near = pieces[-1]
        xs_parts.append(np.array([hi]))
        vtail = f_one(k, np.array([hi]))
        for j in near:
            vtail = np.minimum(vtail, f_one(int(j), np.array([hi])))
        val_parts.append(vtail)
        xs_all = np.concatenate(xs_parts)
        vals_all = np.concatenate(val_parts)
        # piece-boundary nodes can collide after rounding; keep the first
        keep = np.concatenate(([True], np.diff(xs_all) > 0.0))
        return xs_all[keep], vals_all[keep]


def _deep_slice(
    cache: FieldCache,
    v: float,
    t: float,
    lo: float,
    hi: float,
    horizon: HorizonPolicy,
    run,
    *,
    track_values: bool = False,
    value_tol: float = 1e-9,
    require_keys: bool = True,
):
    """Build a DeepSliceSolver and run a sweep over it, doubling the corridor
    slack and redoing everything whenever a winning chain nears a wall, so
    one consistent solver produced the final answer."""
    slack = horizon.corridor.slack
    for _ in range(horizon.corridor.max_widenings + 1):
        try:
            solver = DeepSliceSolver(
                cache, v, t, lo, hi, horizon,
                slack=slack, track_values=track_values, value_tol=value_tol,
                require_keys=require_keys,
            )
            return run(solver)
        except _SliceEscaped:
            slack *= 2.0
    raise CorridorEscapeError(
        f"slice chains kept approaching the corridor walls "
        f"after {horizon.corridor.max_widenings} widenings"
    )


@dataclass(frozen=True)
class InfluenceCell:
    lo: float
    hi: float
    generator: Optional[SpaceTimePoint]  # None when the chord route wins
    unreliable: bool


@dataclass(frozen=True)
class InfluenceDomains:
    """Tessellation of a slice interval by generating point."""

    slope_v: float
    t: float
    boundaries: np.ndarray  # interior boundaries, strictly increasing
    cells: tuple[InfluenceCell, ...]
    horizon_T: float
    stabilized: bool


def influence_domains(
    seed: int,
    v: float,
    t: float,
    interval: tuple[float, float],
    tol: float,
    horizon: HorizonPolicy = HorizonPolicy(),
    *,
    cache: Optional[FieldCache] = None,
) -> InfluenceDomains:
    """Partition [a, b] at time t by the first vertex of the slope-v
    backward minimizer, bisecting each change of generating point to tol.

    A probe landing on an action tie takes the rightmost minimizer, so tied
    boundaries belong to the right cell. Cells whose bracketing coarse
    probes kept changing at T_max carry unreliable=True.
    """
    a, b = float(interval[0]), float(interval[1])
    if not (np.isfinite(a) and np.isfinite(b) and a < b):
        raise InvalidParameterError(f"bad interval [{a}, {b}]")
    if not (np.isfinite(tol) and tol > 0.0):
        raise InvalidParameterError(f"tolerance must be positive, got {tol}")
    if cache is None:
        cache = FieldCache(seed, horizon.intensity)

    def sweep(slice_: DeepSliceSolver) -> InfluenceDomains:
        xs = slice_.coarse_xs
        keys = slice_.coarse_keys
        boundaries: list[float] = []
        cell_keys: list[_SliceKey] = [keys[0]]
        stack = [
            (float(xs[i]), keys[i], float(xs[i + 1]), keys[i + 1])
            for i in range(xs.shape[0] - 2, -1, -1)
        ]
        while stack:
            xl, kl, xr, kr = stack.pop()
            if kl == kr:
                continue
            if xr - xl <= tol:
                boundaries.append(0.5 * (xl + xr))
                cell_keys.append(kr)
                continue
            xm = 0.5 * (xl + xr)
            km = slice_.key_at(xm)
            stack.append((xm, km, xr, kr))
            stack.append((xl, kl, xm, km))
        edges = [a] + boundaries + [b]
        if slice_.stabilized:
            shaky = np.empty(0)
        else:
            shaky = xs[~slice_.probe_stable]
        step = slice_.horizon.slice_grid_step
        cells = []
        for k, key in enumerate(cell_keys):
            gen = None if key is None else SpaceTimePoint(*key)
            bad = bool(
                shaky.size
                and np.any((shaky >= edges[k] - step) & (shaky <= edges[k + 1] + step))
            )
            cells.append(InfluenceCell(edges[k], edges[k + 1], gen, bad))
        return InfluenceDomains(
            slope_v=float(v),
            t=float(t),
            boundaries=np.asarray(boundaries),
            cells=tuple(cells),
            horizon_T=slice_.horizon_T,
            stabilized=slice_.stabilized,
        )

    return _deep_slice(cache, v, t, a, b, horizon, sweep)
