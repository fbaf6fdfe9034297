"""Two-point action minimization over a Poisson configuration.

The action of a broken line is its kinetic cost sum (dx)^2/(2 dt) minus the
number of configuration points it visits during [start.t, end.t). Minimizers
are broken lines whose vertices are configuration points, so the minimum is
a dynamic program over points sorted by time. Points are truncated to a
corridor around the chord; if the optimal path hugs the corridor wall the
corridor is widened and the computation repeated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._dp import backtrack, chain_solve
from .errors import (
    CorridorEscapeError,
    InvalidParameterError,
    InvalidPathError,
    OracleCapacityError,
    WindowTooSmallError,
)
from .point_field import PointField, SpaceTimePoint, Window

TIE_TOL = 1e-12

PathAnchor = SpaceTimePoint


@dataclass(frozen=True)
class ActionValue:
    kinetic: float
    visited: int
    total: float  # always kinetic - visited


@dataclass(frozen=True)
class CorridorPolicy:
    """Spatial truncation around the chord between the endpoints.

    The corridor is {|x - chord(t)| <= half_width_rate * duration + slack}.
    When the optimal path comes within slack/2 of the wall, slack doubles
    and the solve repeats, at most max_widenings times.
    """

    half_width_rate: float = 4.0
    slack: float = 5.0
    max_widenings: int = 6

    def __post_init__(self):
        if self.half_width_rate <= 0 or self.slack <= 0 or self.max_widenings < 0:
            raise InvalidParameterError(f"bad corridor policy {self}")


@dataclass(frozen=True)
class BrokenPath:
    """Piecewise-linear path from start to end with configuration-point
    vertices, stored as indices into its field."""

    field: PointField
    start: SpaceTimePoint
    vertex_indices: tuple[int, ...]
    end: SpaceTimePoint

    @property
    def vertex_xs(self) -> np.ndarray:
        return self.field.xs[list(self.vertex_indices)]

    @property
    def vertex_ts(self) -> np.ndarray:
        return self.field.ts[list(self.vertex_indices)]

    def vertices(self) -> list[SpaceTimePoint]:
        return [self.field.point(i) for i in self.vertex_indices]

    def node_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """All nodes start, vertices..., end as coordinate arrays."""
        xs = np.concatenate(([self.start.x], self.vertex_xs, [self.end.x]))
        ts = np.concatenate(([self.start.t], self.vertex_ts, [self.end.t]))
        return xs, ts

    def position_at(self, t: float) -> float:
        """Position of the path at time t in [start.t, end.t]."""
        if not (self.start.t <= t <= self.end.t):
            raise InvalidParameterError(f"time {t} outside path span")
        xs, ts = self.node_arrays()
        return float(np.interp(t, ts, xs))


def kinetic_action(path: BrokenPath) -> float:
    """Sum of (dx)^2 / (2 dt) over the segments of the path.

    A zero-duration segment is allowed only with zero displacement (it
    contributes nothing); this is how a path anchored exactly at a
    configuration point carries that point as its first vertex.
    """
    xs, ts = path.node_arrays()
    total = 0.0
    for k in range(len(xs) - 1):
        dt = ts[k + 1] - ts[k]
        dx = xs[k + 1] - xs[k]
        if dt < 0.0 or (dt == 0.0 and dx != 0.0):
            raise InvalidPathError(f"segment {k} has dt={dt}, dx={dx}")
        if dt > 0.0:
            total += dx * dx / (2.0 * dt)
    return total


def path_action(field: PointField, path: BrokenPath, omit_start_vertex: bool = False) -> ActionValue:
    """Action of the path over [start.t, end.t): kinetic cost minus the
    number of vertices visited in that half-open span.

    A vertex at exactly end.t is not counted; one at start.t is. With
    omit_start_vertex=True a vertex at start.t is skipped too (used when
    splitting a path at a shared vertex so the vertex is counted once).
    """
    if path.start.t >= path.end.t:
        raise InvalidPathError("start must precede end")
    for i in path.vertex_indices:
        if not (0 <= i < field.n):
            raise InvalidPathError(f"vertex index {i} out of range")
    vxs, vts = path.vertex_xs, path.vertex_ts
    if path.field is not field:
        ids = list(path.vertex_indices)
        if not (np.array_equal(vxs, field.xs[ids]) and np.array_equal(vts, field.ts[ids])):
            raise InvalidPathError("path vertices do not match the given field")
    if vts.size and (vts.min() < path.start.t or vts.max() > path.end.t):
        raise InvalidPathError("vertex time outside [start.t, end.t]")
    kinetic = kinetic_action(path)
    visited = int(np.count_nonzero((vts >= path.start.t) & (vts < path.end.t)))
    if omit_start_vertex:
        visited -= int(np.count_nonzero(vts == path.start.t))
    return ActionValue(kinetic, visited, kinetic - visited)


def corridor_window(
    start: SpaceTimePoint, end: SpaceTimePoint, policy: CorridorPolicy, slack: float | None = None
) -> Window:
    """Bounding window of the corridor for the given endpoints and slack."""
    hw = policy.half_width_rate * (end.t - start.t) + (policy.slack if slack is None else slack)
    return Window(min(start.x, end.x) - hw, max(start.x, end.x) + hw, start.t, end.t)


def _segment_cost(x0: float, t0: float, x1: float, t1: float) -> float:
    return (x1 - x0) ** 2 / (2.0 * (t1 - t0))


def min_action_two_point(
    field: PointField,
    start: SpaceTimePoint,
    end: SpaceTimePoint,
    policy: CorridorPolicy = CorridorPolicy(),
) -> tuple[ActionValue, BrokenPath]:
    """Minimal action over all broken lines from start to end.

    Exact over configurations inside the corridor; the escape-and-widen
    rule re-solves with doubled slack whenever the optimum approaches the
    corridor wall. Ties within TIE_TOL of the optimum resolve to the
    rightmost path (lexicographically maximal vertex x-sequence scanning
    backward from the end). The returned ActionValue is recomputed from
    the returned path, so path_action reproduces it exactly.
    """
    if end.t <= start.t:
        raise InvalidParameterError("end must be strictly later than start")
    duration = end.t - start.t
    chord_slope = (end.x - start.x) / duration
    slack = policy.slack
    for _ in range(policy.max_widenings + 1):
        hw = policy.half_width_rate * duration + slack
        corridor = Window(min(start.x, end.x) - hw, max(start.x, end.x) + hw, start.t, end.t)
        if not field.window.contains_rect(corridor):
            raise WindowTooSmallError(
                f"field window {field.window} does not contain corridor {corridor}",
                required_window=corridor,
            )
        dev_all = np.abs(field.xs - (start.x + chord_slope * (field.ts - start.t)))
        mask = (field.ts >= start.t) & (field.ts < end.t) & (dev_all <= hw)
        idx = np.flatnonzero(mask)
        xs, ts = field.xs[idx], field.ts[idx]

        with np.errstate(divide="ignore", invalid="ignore"):
            entries = (xs - start.x) ** 2 / (2.0 * (ts - start.t))
        at_start = ts == start.t
        entries[at_start] = np.where(xs[at_start] == start.x, 0.0, np.inf)
        src_kx = np.full(xs.shape, start.x)
        src_kt = np.full(xs.shape, start.t)
        values, preds = chain_solve(xs, ts, entries, src_kx, src_kt, TIE_TOL)

        direct = _segment_cost(start.x, start.t, end.x, end.t)
        tails = values + (end.x - xs) ** 2 / (2.0 * (end.t - ts))
        best = min(direct, tails.min()) if tails.size else direct

        last = -1  # -1 means the direct segment
        key = (start.x, start.t)
        if tails.size:
            if direct > best + TIE_TOL:
                key = (-np.inf, -np.inf)
            for j in np.flatnonzero(tails <= best + TIE_TOL):
                kj = (float(xs[j]), float(ts[j]))
                if kj > key:
                    key = kj
                    last = int(j)

        chain = backtrack(preds, last) if last >= 0 else []
        vertex_indices = tuple(int(idx[c]) for c in chain)
        path = BrokenPath(field, start, vertex_indices, end)

        if chain:
            dev = np.abs(xs[chain] - (start.x + chord_slope * (ts[chain] - start.t)))
            if dev.max() > hw - slack / 2.0:
                slack *= 2.0
                continue
        return path_action(field, path), path
    raise CorridorEscapeError(
        f"optimal path kept approaching the corridor wall after {policy.max_widenings} widenings"
    )


def brute_force_action(
    field: PointField, start: SpaceTimePoint, end: SpaceTimePoint
) -> tuple[ActionValue, BrokenPath]:
    """Exhaustive minimum over every subset of configuration points forming
    a time-increasing chain. Independent of the DP machinery; used as the
    correctness oracle. Capacity-limited to 20 interior points."""
    if end.t <= start.t:
        raise InvalidParameterError("end must be strictly later than start")
    interior = np.count_nonzero((field.ts > start.t) & (field.ts < end.t))
    if interior > 20:
        raise OracleCapacityError(f"{interior} interior points exceed the oracle cap of 20")
    eligible = np.flatnonzero((field.ts >= start.t) & (field.ts < end.t))
    order = np.lexsort((field.xs[eligible], field.ts[eligible]))
    pool = [(float(field.xs[i]), float(field.ts[i]), int(i)) for i in eligible[order]]
    n = len(pool)

    source_key = (start.x, start.t)
    best_total = _segment_cost(start.x, start.t, end.x, end.t)
    best_chain: tuple[int, ...] = ()
    best_key: tuple[tuple[float, float], ...] = (source_key,)

    chain: list[int] = []

    def finish(cost: float, last_x: float, last_t: float) -> None:
        nonlocal best_total, best_chain, best_key
        total = cost + _segment_cost(last_x, last_t, end.x, end.t)
        if total > best_total + TIE_TOL:
            return
        # rightmost rule: compare (x, t) per turning point scanning backward
        # from the end, the start anchor included last (matches the DP)
        key = tuple((pool[k][0], pool[k][1]) for k in reversed(chain)) + (source_key,)
        if total < best_total - TIE_TOL or key > best_key:
            best_total = min(best_total, total)
            best_chain = tuple(chain)
            best_key = key

    def explore(k: int, cost: float, last_x: float, last_t: float) -> None:
        if k == n:
            finish(cost, last_x, last_t)
            return
        explore(k + 1, cost, last_x, last_t)
        x, t, _ = pool[k]
        if t > last_t:
            chain.append(k)
            explore(k + 1, cost + _segment_cost(last_x, last_t, x, t) - 1.0, x, t)
            chain.pop()
        elif t == last_t and x == last_x and not chain:
            # configuration point exactly at the start anchor: free visit
            chain.append(k)
            explore(k + 1, cost - 1.0, x, t)
            chain.pop()

    explore(0, 0.0, start.x, start.t)
    vertex_indices = tuple(pool[k][2] for k in best_chain)
    path = BrokenPath(field, start, vertex_indices, end)
    return path_action(field, path), path
