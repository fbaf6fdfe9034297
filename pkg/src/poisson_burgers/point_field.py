"""Planar Poisson point fields with window-consistent generation.

A field is the restriction of one global realization to a rectangular
window. Points are generated per unit cell [i, i+1) x [j, j+1) from the
counter-based RNG in `rng`, so two windows generated from the same seed
agree point for point on their overlap, and generation order (or thread
count) cannot change the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, TextIO

import numpy as np

from .errors import InvalidParameterError, OutOfWindowError
from .rng import cell_uniform, poisson_icdf

_CELL_LIMIT = 100_000_000
_REDRAW_STRIDE = 1 << 40


class SpaceTimePoint(NamedTuple):
    x: float
    t: float


@dataclass(frozen=True)
class Window:
    """Closed rectangle [x_min, x_max] x [t_min, t_max], nonempty."""

    x_min: float
    x_max: float
    t_min: float
    t_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.t_min < self.t_max):
            raise InvalidParameterError(f"empty window {self}")

    def contains_rect(self, other: "Window") -> bool:
        return (
            self.x_min <= other.x_min
            and other.x_max <= self.x_max
            and self.t_min <= other.t_min
            and other.t_max <= self.t_max
        )

    def union(self, other: "Window") -> "Window":
        return Window(
            min(self.x_min, other.x_min),
            max(self.x_max, other.x_max),
            min(self.t_min, other.t_min),
            max(self.t_max, other.t_max),
        )


@dataclass(frozen=True)
class PointField:
    """Point configuration in a window, sorted by (t, x).

    derived=True marks fields obtained by transformation or loaded from
    disk; they carry the ancestor's seed but cannot be regenerated from it.
    """

    master_seed: int
    intensity: float
    window: Window
    xs: np.ndarray = field(repr=False)
    ts: np.ndarray = field(repr=False)
    derived: bool = False

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    def point(self, i: int) -> SpaceTimePoint:
        return SpaceTimePoint(float(self.xs[i]), float(self.ts[i]))

    def __iter__(self) -> Iterator[SpaceTimePoint]:
        for x, t in zip(self.xs, self.ts):
            yield SpaceTimePoint(float(x), float(t))


def _sort_points(xs: np.ndarray, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((xs, ts))
    return xs[order], ts[order]


def generate(master_seed: int, intensity: float, window: Window) -> PointField:
    """Generate the Poisson field of the given seed restricted to window.

    Each unit cell draws its count by CDF inversion from one addressed
    uniform and its point coordinates from further addressed uniforms, so
    the contents of a cell are a pure function of (seed, cell). Exact
    duplicate points inside a cell are redrawn (probability ~0, kept for
    the invariant that sort order is strict).
    """
    if not np.isfinite(intensity) or intensity <= 0.0:
        raise InvalidParameterError(f"intensity must be positive, got {intensity}")
    i_lo = int(np.floor(window.x_min))
    i_hi = int(np.floor(window.x_max))
    j_lo = int(np.floor(window.t_min))
    j_hi = int(np.floor(window.t_max))
    n_cells = (i_hi - i_lo + 1) * (j_hi - j_lo + 1)
    if n_cells > _CELL_LIMIT:
        raise InvalidParameterError(f"window spans {n_cells} unit cells")

    ii, jj = np.meshgrid(
        np.arange(i_lo, i_hi + 1, dtype=np.int64),
        np.arange(j_lo, j_hi + 1, dtype=np.int64),
        indexing="ij",
    )
    ci = ii.ravel()
    cj = jj.ravel()
    counts = poisson_icdf(cell_uniform(master_seed, ci, cj, 0), intensity)

    rep_ci = np.repeat(ci, counts)
    rep_cj = np.repeat(cj, counts)
    offsets = np.repeat(np.cumsum(counts) - counts, counts)
    m = np.arange(rep_ci.shape[0], dtype=np.int64) - offsets
    xs = rep_ci + cell_uniform(master_seed, rep_ci, rep_cj, 1 + 2 * m)
    ts = rep_cj + cell_uniform(master_seed, rep_ci, rep_cj, 2 + 2 * m)

    attempt = 1
    while True:
        order = np.lexsort((xs, ts))
        dup = np.zeros(xs.shape[0], dtype=bool)
        if xs.shape[0] > 1:
            same = (np.diff(xs[order]) == 0.0) & (np.diff(ts[order]) == 0.0)
            dup[order[1:][same]] = True
        if not dup.any():
            break
        ctr = _REDRAW_STRIDE * attempt + 2 * m[dup]
        xs[dup] = rep_ci[dup] + cell_uniform(master_seed, rep_ci[dup], rep_cj[dup], 1 + ctr)
        ts[dup] = rep_cj[dup] + cell_uniform(master_seed, rep_ci[dup], rep_cj[dup], 2 + ctr)
        attempt += 1

    keep = (
        (xs >= window.x_min)
        & (xs <= window.x_max)
        & (ts >= window.t_min)
        & (ts <= window.t_max)
    )
    xs, ts = _sort_points(xs[keep], ts[keep])
    return PointField(master_seed, float(intensity), window, xs, ts)


def count_in(field_: PointField, rect: Window) -> int:
    """Number of points in [x_min, x_max) x [t_min, t_max).

    Upper edges are exclusive so counts over a partition of the window add
    up to the total. The rectangle must lie inside the field window.
    """
    if not field_.window.contains_rect(rect):
        raise OutOfWindowError(f"{rect} not contained in field window {field_.window}")
    inside = (
        (field_.xs >= rect.x_min)
        & (field_.xs < rect.x_max)
        & (field_.ts >= rect.t_min)
        & (field_.ts < rect.t_max)
    )
    return int(np.count_nonzero(inside))


def shear(field_: PointField, v: float, a: float = 0.0) -> PointField:
    """Galilean shear (x, s) -> (x + a + v s, s) applied to every point.

    The window maps to a parallelogram; the result carries its bounding
    box. The output is marked derived: it reuses the input's points.
    """
    xs = field_.xs + a + v * field_.ts
    w = field_.window
    new_window = Window(
        w.x_min + a + min(v * w.t_min, v * w.t_max),
        w.x_max + a + max(v * w.t_min, v * w.t_max),
        w.t_min,
        w.t_max,
    )
    xs, ts = _sort_points(xs, field_.ts.copy())
    return PointField(field_.master_seed, field_.intensity, new_window, xs, ts, derived=True)


def time_shift(field_: PointField, tau: float) -> PointField:
    """Shift time forward by tau: (x, s) -> (x, s - tau). Marked derived."""
    w = field_.window
    new_window = Window(w.x_min, w.x_max, w.t_min - tau, w.t_max - tau)
    return PointField(
        field_.master_seed,
        field_.intensity,
        new_window,
        field_.xs.copy(),
        field_.ts - tau,
        derived=True,
    )


def restrict(field_: PointField, sub: Window) -> PointField:
    """Restriction to a closed sub-window (derived view of the same points)."""
    if not field_.window.contains_rect(sub):
        raise OutOfWindowError(f"{sub} not contained in field window {field_.window}")
    keep = (
        (field_.xs >= sub.x_min)
        & (field_.xs <= sub.x_max)
        & (field_.ts >= sub.t_min)
        & (field_.ts <= sub.t_max)
    )
    return replace(field_, window=sub, xs=field_.xs[keep], ts=field_.ts[keep], derived=True)


def dump_field(field_: PointField, fp: TextIO) -> None:
    """Write the text dump: header `seed intensity x_min x_max t_min t_max`,
    then one `x t` line per point in sort order, 17 significant digits."""
    w = field_.window
    fp.write(
        f"{field_.master_seed} {field_.intensity:.17g} "
        f"{w.x_min:.17g} {w.x_max:.17g} {w.t_min:.17g} {w.t_max:.17g}\n"
    )
    for x, t in zip(field_.xs, field_.ts):
        fp.write(f"{x:.17g} {t:.17g}\n")


def load_field(fp: TextIO) -> PointField:
    """Read a dump produced by dump_field. The result is marked derived:
    the points on disk are authoritative, not regenerated."""
    header = fp.readline().split()
    if len(header) != 6:
        raise InvalidParameterError(f"bad field header: {header!r}")
    seed = int(header[0])
    intensity = float(header[1])
    window = Window(*(float(v) for v in header[2:]))
    xs, ts = [], []
    for line in fp:
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise InvalidParameterError(f"bad point line: {line!r}")
        xs.append(float(parts[0]))
        ts.append(float(parts[1]))
    xs = np.asarray(xs, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    return PointField(seed, intensity, window, xs, ts, derived=True)
