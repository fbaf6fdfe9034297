"""Variational evolution of piecewise-linear potentials.

The evolution operator sends a potential W at time s to

    (F W)(x) = inf over paths { W(path(s)) + kinetic - points visited }

at time t. With no configuration points this is the inf-convolution of W
with the quadratic kernel (Moreau envelope, exact closed form per linear
piece); configuration points enter through the same chain DP as two-point
minimization, with the envelope as entry cost. The velocity field is the
slope of the final segment of the rightmost minimizer at each abscissa.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._dp import chain_solve
from .action_engine import TIE_TOL, CorridorPolicy
from .errors import (
    CorridorEscapeError,
    InvalidParameterError,
    WindowTooSmallError,
)
from .point_field import PointField, Window

_ENVELOPE_CHUNK = 4_000_000  # cap on rows x columns per vectorized block


@dataclass(frozen=True)
class PiecewiseLinearPotential:
    """Continuous piecewise-linear W: R -> R.

    K breakpoints split the line into K+1 pieces; slopes[k] applies left of
    breakpoints[k] and slopes[K] beyond the last one. The anchor pins the
    additive constant: W(anchor_x) = anchor_value. The asymptotic slopes are
    slopes[0] on the left and slopes[-1] on the right.
    """

    anchor_x: float
    anchor_value: float
    breakpoints: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=np.float64)
        m = np.asarray(self.slopes, dtype=np.float64)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "slopes", m)
        if b.ndim != 1 or m.ndim != 1 or m.shape[0] != b.shape[0] + 1:
            raise InvalidParameterError("need exactly one more slope than breakpoints")
        if b.shape[0] and not np.all(np.diff(b) > 0.0):
            raise InvalidParameterError("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(m))):
            raise InvalidParameterError("breakpoints and slopes must be finite")
        if not (np.isfinite(self.anchor_x) and np.isfinite(self.anchor_value)):
            raise InvalidParameterError("anchor must be finite")

    @cached_property
    def _breakpoint_values(self) -> np.ndarray:
        b, m, ax, av = self.breakpoints, self.slopes, self.anchor_x, self.anchor_value
        K = b.shape[0]
        vals = np.empty(K, dtype=np.float64)
        ia = int(np.searchsorted(b, ax, side="right"))
        if ia < K:
            seg = np.empty(K - ia)
            seg[0] = m[ia] * (b[ia] - ax)
            seg[1:] = m[ia + 1 : K] * np.diff(b[ia:])
            vals[ia:] = av + np.cumsum(seg)
        if ia > 0:
            seg = np.empty(ia)
            seg[0] = m[ia] * (ax - b[ia - 1])
            seg[1:] = (m[1:ia] * np.diff(b[:ia]))[::-1]
            vals[:ia] = av - np.cumsum(seg)[::-1]
        return vals

    @property
    def end_slopes(self) -> tuple[float, float]:
        return float(self.slopes[0]), float(self.slopes[-1])

    def evaluate(self, x):
        scalar = np.isscalar(x)
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        b, m = self.breakpoints, self.slopes
        if b.shape[0] == 0:
            out = self.anchor_value + m[0] * (x - self.anchor_x)
        else:
            vals = self._breakpoint_values
            idx = np.searchsorted(b, x, side="right")
            ref_i = np.maximum(idx - 1, 0)
            out = vals[ref_i] + m[idx] * (x - b[ref_i])
        return float(out[0]) if scalar else out

    def slope_at(self, x):
        """Right-continuous derivative."""
        scalar = np.isscalar(x)
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        idx = np.searchsorted(self.breakpoints, x, side="right")
        out = self.slopes[idx]
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class EnvelopeResult:
    value: float
    argmin_z: float


@dataclass(frozen=True)
class EvolvedProfile:
    """Evolution sampled on abscissas.

    Per abscissa: evolved potential value, velocity (slope of the final
    segment of the rightmost minimizer), start point ystar at time s, and
    the last configuration point visited by the winning path (index -1 and
    nan coordinates when the path visits no point).
    """

    s: float
    t: float
    xs: np.ndarray
    potential: np.ndarray
    velocity: np.ndarray
    ystar: np.ndarray
    generator_index: np.ndarray
    generator_x: np.ndarray
    generator_t: np.ndarray


def potential_from_literal(text: str) -> PiecewiseLinearPotential:
    """Parse `anchor_x anchor_value ; b1 b2 ... ; m0 m1 ... mK`."""
    sections = text.split(";")
    if len(sections) != 3:
        raise InvalidParameterError(f"potential literal needs two ';', got {text!r}")
    anchor = sections[0].split()
    if len(anchor) != 2:
        raise InvalidParameterError(f"bad anchor section {sections[0]!r}")
    return PiecewiseLinearPotential(
        float(anchor[0]),
        float(anchor[1]),
        np.asarray([float(v) for v in sections[1].split()]),
        np.asarray([float(v) for v in sections[2].split()]),
    )


def potential_literal(W: PiecewiseLinearPotential) -> str:
    bs = " ".join(f"{v:.17g}" for v in W.breakpoints)
    ms = " ".join(f"{v:.17g}" for v in W.slopes)
    return f"{W.anchor_x:.17g} {W.anchor_value:.17g} ; {bs} ; {ms}"


def _envelope_batch(
    W: PiecewiseLinearPotential, qs: np.ndarray, taus: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized exact Moreau envelope with rightmost-tie argmins.

    Per linear piece the unconstrained minimizer q - m*tau clamps to the
    piece; tau == 0 entries degenerate to (W(q), q). Values are recomputed
    from the reported argmin so the defining identity holds exactly.
    """
    qs = np.asarray(qs, dtype=np.float64)
    taus = np.asarray(taus, dtype=np.float64)
    values = np.empty(qs.shape, dtype=np.float64)
    argmins = np.empty(qs.shape, dtype=np.float64)

    zero = taus == 0.0
    if zero.any():
        values[zero] = W.evaluate(qs[zero])
        argmins[zero] = qs[zero]
    live = np.flatnonzero(~zero)
    if live.size == 0:
        return values, argmins

    b, m = W.breakpoints, W.slopes
    lo = np.concatenate(([-np.inf], b))
    hi = np.concatenate((b, [np.inf]))
    block = max(1, _ENVELOPE_CHUNK // m.shape[0])
    for c0 in range(0, live.size, block):
        sel = live[c0 : c0 + block]
        q = qs[sel][:, None]
        tau = taus[sel][:, None]
        z = np.clip(q - m[None, :] * tau, lo[None, :], hi[None, :])
        obj = W.evaluate(z.ravel()).reshape(z.shape) + (q - z) ** 2 / (2.0 * tau)
        row_min = obj.min(axis=1)
        zbest = np.where(obj <= row_min[:, None] + TIE_TOL, z, -np.inf).max(axis=1)
        argmins[sel] = zbest
        values[sel] = W.evaluate(zbest) + (qs[sel] - zbest) ** 2 / (2.0 * taus[sel])
    return values, argmins


def moreau_envelope(W: PiecewiseLinearPotential, q: float, tau: float) -> EnvelopeResult:
    """inf_z [ W(z) + (q - z)^2 / (2 tau) ], exact for piecewise-linear W.

    The value is recomputed from the argmin in scalar arithmetic so the
    defining identity holds bit-for-bit for callers who recheck it.
    """
    if not (np.isfinite(q) and np.isfinite(tau)) or tau <= 0.0:
        raise InvalidParameterError(f"need finite q and tau > 0, got q={q}, tau={tau}")
    _, argmins = _envelope_batch(W, np.asarray([q]), np.asarray([tau]))
    z = float(argmins[0])
    return EnvelopeResult(W.evaluate(z) + (q - z) ** 2 / (2.0 * tau), z)


class _CocycleSolver:
    """Chain DP state for evolving one potential over one corridor.

    The per-point value table is query-independent, so one solve serves any
    number of abscissas in [lo, hi]. Escape checks run on the winning chains
    of the queries actually made; the caller widens and re-solves on escape.
    """

    def __init__(
        self,
        field: PointField,
        W: PiecewiseLinearPotential,
        s: float,
        t: float,
        lo: float,
        hi: float,
        policy: CorridorPolicy,
        slack: float,
    ):
        self.W = W
        self.s = s
        self.t = t
        self.slack = slack
        hw = policy.half_width_rate * (t - s) + slack
        self.wall_lo = lo - hw
        self.wall_hi = hi + hw
        corridor = Window(self.wall_lo, self.wall_hi, s, t)
        if not field.window.contains_rect(corridor):
            raise WindowTooSmallError(
                f"field window {field.window} does not contain corridor {corridor}",
                required_window=corridor,
            )
        mask = (
            (field.ts >= s)
            & (field.ts < t)
            & (field.xs >= self.wall_lo)
            & (field.xs <= self.wall_hi)
        )
        self.idx = np.flatnonzero(mask)
        self.pxs = field.xs[self.idx]
        self.pts = field.ts[self.idx]
        entries, self.entry_argmins = _envelope_batch(W, self.pxs, self.pts - s)
        self.values, self.preds = chain_solve(
            self.pxs,
            self.pts,
            entries,
            self.entry_argmins,
            np.full(self.pxs.shape, s),
            TIE_TOL,
        )
        n = self.pxs.shape[0]
        # chain roots and wall clearances in one forward pass (predecessors
        # always precede in time order)
        self.root_argmin = self.entry_argmins.copy()
        walld = np.minimum(self.pxs - self.wall_lo, self.wall_hi - self.pxs)
        self.chain_walldist = walld
        for i in range(n):
            p = self.preds[i]
            if p >= 0:
                self.root_argmin[i] = self.root_argmin[p]
                if self.chain_walldist[p] < self.chain_walldist[i]:
                    self.chain_walldist[i] = self.chain_walldist[p]
        # (x, t)-ascending order so a lexicographic tie-max is a last index
        self.perm = np.lexsort((self.pts, self.pxs))
        self.pxs_o = self.pxs[self.perm]
        self.pts_o = self.pts[self.perm]
        self.values_o = self.values[self.perm]

    def query(self, xs: np.ndarray):
        """Evaluate the evolution at each abscissa.

        Returns (potential, velocity, ystar, generator index/x/t, escaped);
        escaped means some winning chain came within slack/2 of a corridor
        wall, so the result may be truncation-biased.
        """
        xs = np.asarray(xs, dtype=np.float64)
        tau_full = self.t - self.s
        env_vals, env_args = _envelope_batch(self.W, xs, np.full(xs.shape, tau_full))

        n = xs.shape[0]
        potential = env_vals.copy()
        velocity = (xs - env_args) / tau_full
        ystar = env_args.copy()
        gen_x = np.full(n, np.nan)
        gen_t = np.full(n, np.nan)
        gen_idx = np.full(n, -1, dtype=np.int64)
        escaped = False
        npts = self.pxs_o.shape[0]
        if npts:
            margin = self.slack / 2.0
            block = max(1, _ENVELOPE_CHUNK // npts)
            for c0 in range(0, n, block):
                q = xs[c0 : c0 + block][:, None]
                tails = self.values_o[None, :] + (q - self.pxs_o[None, :]) ** 2 / (
                    2.0 * (self.t - self.pts_o[None, :])
                )
                best = np.minimum(tails.min(axis=1), env_vals[c0 : c0 + block])
                potential[c0 : c0 + block] = best
                # rightmost tie-break on the last turning point (x, t): the
                # best tied point is the last one in (x, t) order; the
                # envelope route's turning point (argmin, s) beats it only
                # if it lies beyond it lexicographically
                tied = tails <= best[:, None] + TIE_TOL
                has_pt = tied.any(axis=1)
                wp = npts - 1 - np.argmax(tied[:, ::-1], axis=1)
                px_w = self.pxs_o[wp]
                pt_w = self.pts_o[wp]
                ea = env_args[c0 : c0 + block]
                env_tied = env_vals[c0 : c0 + block] <= best + TIE_TOL
                env_wins = ~has_pt | (
                    env_tied & ((ea > px_w) | ((ea == px_w) & (pt_w <= self.s)))
                )
                rows = np.flatnonzero(~env_wins)
                if rows.size == 0:
                    continue
                w = self.perm[wp[rows]]
                g = c0 + rows
                velocity[g] = (xs[g] - self.pxs[w]) / (self.t - self.pts[w])
                ystar[g] = self.root_argmin[w]
                gen_x[g] = self.pxs[w]
                gen_t[g] = self.pts[w]
                gen_idx[g] = self.idx[w]
                if (self.chain_walldist[w] < margin).any():
                    escaped = True
        return potential, velocity, ystar, gen_idx, gen_x, gen_t, escaped


def apply_cocycle(
    field: PointField,
    W: PiecewiseLinearPotential,
    s: float,
    t: float,
    xs,
    policy: CorridorPolicy = CorridorPolicy(),
) -> EvolvedProfile:
    """Evolve W from time s to time t and sample at sorted abscissas xs.

    t == s returns W sampled unchanged (velocity is the right-continuous
    slope). Configuration points are truncated to a corridor covering the
    query range, with the same escape-and-widen rule as two-point actions.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    if xs.size == 0:
        raise InvalidParameterError("need at least one abscissa")
    if np.any(np.diff(xs) < 0.0):
        raise InvalidParameterError("abscissas must be sorted")
    if t < s:
        raise InvalidParameterError(f"cannot evolve backward from {s} to {t}")
    if t == s:
        n = xs.shape[0]
        return EvolvedProfile(
            s,
            t,
            xs,
            np.asarray(W.evaluate(xs), dtype=np.float64),
            np.asarray(W.slope_at(xs), dtype=np.float64),
            xs.copy(),
            np.full(n, -1, dtype=np.int64),
            np.full(n, np.nan),
            np.full(n, np.nan),
        )
    lo, hi = float(xs.min()), float(xs.max())
    slack = policy.slack
    for _ in range(policy.max_widenings + 1):
        solver = _CocycleSolver(field, W, s, t, lo, hi, policy, slack)
        pot, vel, ystar, gidx, gx, gt, escaped = solver.query(xs)
        if not escaped:
            return EvolvedProfile(s, t, xs, pot, vel, ystar, gidx, gx, gt)
        slack *= 2.0
    raise CorridorEscapeError(
        f"winning chains kept approaching the corridor walls "
        f"after {policy.max_widenings} widenings"
    )


def velocity_profile(
    field: PointField,
    W: PiecewiseLinearPotential,
    s: float,
    t: float,
    interval: tuple[float, float],
    resolution: int,
    policy: CorridorPolicy = CorridorPolicy(),
) -> EvolvedProfile:
    """Evolution sampled on a uniform grid of `resolution` abscissas."""
    a, b = interval
    if not (a < b) or resolution < 2:
        raise InvalidParameterError("need a < b and at least two samples")
    return apply_cocycle(field, W, s, t, np.linspace(a, b, resolution), policy)


def velocity_jumps(
    field: PointField,
    W: PiecewiseLinearPotential,
    s: float,
    t: float,
    interval: tuple[float, float],
    resolution: int,
    policy: CorridorPolicy = CorridorPolicy(),
) -> tuple[np.ndarray, np.ndarray]:
    """Localize velocity discontinuities on the interval.

    Returns (locations, jumps), jump = u(xi+) - u(xi-). Each boundary where
    the minimizer anchor changes between adjacent samples is bisected until
    the two anchor lines are compared at essentially one abscissa, so the
    jump estimate carries no finite-difference smear from the within-run
    slope. Envelope anchors drift continuously at unit rate, so an anchor
    move is only treated as a boundary when it exceeds twice the sample gap.
    """
    a, b = interval
    if not (a < b) or resolution < 2:
        raise InvalidParameterError("need a < b and at least two samples")
    if t <= s:
        raise InvalidParameterError("jump detection needs t > s")
    xs = np.linspace(a, b, resolution)

    slack = policy.slack
    for _ in range(policy.max_widenings + 1):
        solver = _CocycleSolver(field, W, s, t, a, b, policy, slack)
        _, _, ystar, gidx, gx, gt, escaped = solver.query(xs)
        if escaped:
            slack *= 2.0
            continue

        ax = np.where(gidx >= 0, gx, ystar)
        at = np.where(gidx >= 0, gt, s)

        def anchors_match(ax1, at1, ax2, at2, gap):
            return abs(at1 - at2) <= 1e-12 and abs(ax1 - ax2) <= 2.0 * gap + 1e-9

        locations = []
        jumps = []
        for i in range(xs.shape[0] - 1):
            if anchors_match(ax[i], at[i], ax[i + 1], at[i + 1], xs[i + 1] - xs[i]):
                continue
            lo_x, hi_x = xs[i], xs[i + 1]
            a_lo = (ax[i], at[i])
            a_hi = (ax[i + 1], at[i + 1])
            while True:
                width = hi_x - lo_x
                dslope = abs(1.0 / (t - a_hi[1]) - 1.0 / (t - a_lo[1]))
                if width * (dslope + 1.0) < 1e-12 or width < 1e-13:
                    break
                mid = 0.5 * (lo_x + hi_x)
                _, _, mys, mgi, mgx, mgt, esc = solver.query(np.asarray([mid]))
                if esc:
                    escaped = True
                    break
                m_ax = mgx[0] if mgi[0] >= 0 else mys[0]
                m_at = mgt[0] if mgi[0] >= 0 else s
                if anchors_match(a_lo[0], a_lo[1], m_ax, m_at, mid - lo_x):
                    lo_x = mid
                    a_lo = (m_ax, m_at)
                else:
                    hi_x = mid
                    a_hi = (m_ax, m_at)
            if escaped:
                break
            xm = 0.5 * (lo_x + hi_x)
            jump = (xm - a_hi[0]) / (t - a_hi[1]) - (xm - a_lo[0]) / (t - a_lo[1])
            locations.append(xm)
            jumps.append(jump)
        if escaped:
            slack *= 2.0
            continue
        return np.asarray(locations), np.asarray(jumps)
    raise CorridorEscapeError("jump detection exhausted corridor widenings")


def fit_piecewise_linear(
    xs: np.ndarray, values: np.ndarray, slope_left: float, slope_right: float
) -> PiecewiseLinearPotential:
    """Interpolant through (xs, values) with given extension slopes."""
    xs = np.asarray(xs, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if xs.shape[0] < 2 or not np.all(np.diff(xs) > 0.0):
        raise InvalidParameterError("need at least two strictly increasing samples")
    secants = np.diff(values) / np.diff(xs)
    slopes = np.concatenate(([slope_left], secants, [slope_right]))
    return PiecewiseLinearPotential(float(xs[0]), float(values[0]), xs, slopes)


def sample_evolution_adaptive(
    field: PointField,
    W: PiecewiseLinearPotential,
    s: float,
    t: float,
    lo: float,
    hi: float,
    policy: CorridorPolicy = CorridorPolicy(),
    tol: float = 1e-7,
    init_step: float = 0.25,
    max_points: int = 300_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample the evolved potential on [lo, hi] densely enough that linear
    interpolation between samples is within tol.

    The evolved potential is piecewise quadratic, so midpoint refinement
    converges quadratically; intervals whose midpoint already lies on the
    chord are left alone.
    """
    npts = max(2, int(np.ceil((hi - lo) / init_step)) + 1)
    if t == s:
        xs = np.linspace(lo, hi, npts)
        return xs, np.asarray(W.evaluate(xs), dtype=np.float64)
    slack = policy.slack
    for _ in range(policy.max_widenings + 1):
        solver = _CocycleSolver(field, W, s, t, lo, hi, policy, slack)
        xs = np.linspace(lo, hi, npts)
        pot, *_rest, escaped = solver.query(xs)
        while not escaped and xs.shape[0] < max_points:
            wide = np.flatnonzero(np.diff(xs) > 1e-9)
            if wide.size == 0:
                return xs, pot
            mids = 0.5 * (xs[wide] + xs[wide + 1])
            mid_pot, *_r, escaped = solver.query(mids)
            if escaped:
                break
            err = np.abs(mid_pot - 0.5 * (pot[wide] + pot[wide + 1]))
            keep = err > tol
            if not keep.any():
                return xs, pot
            xs = np.insert(xs, wide[keep] + 1, mids[keep])
            pot = np.insert(pot, wide[keep] + 1, mid_pot[keep])
        slack *= 2.0
    raise CorridorEscapeError("adaptive sampling exhausted corridor widenings")
