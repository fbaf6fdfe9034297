"""Seed-parallel Monte Carlo drivers.

Shape-function estimation, action concentration, mean Busemann increments,
coalescence statistics, pullback attraction, and minimizer straightness,
each driven by a deterministic replica plan. Replica k always runs on
derive_seed(master_seed, k) with its own field realization, and results
reduce in replica-index order, so every report is bit-identical no matter
how many worker threads execute it.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

import numpy as np

from .action_engine import CorridorPolicy, corridor_window, min_action_two_point
from .backward_minimizers import (
    FieldCache,
    HorizonPolicy,
    backward_minimizer,
    coalescence,
)
from .busemann_solutions import busemann, global_velocity
from .errors import (
    CorridorEscapeError,
    HorizonInsufficientError,
    InvalidInitialConditionError,
    InvalidParameterError,
    WindowTooSmallError,
)
from .hopf_lax import PiecewiseLinearPotential, apply_cocycle
from .point_field import SpaceTimePoint, generate
from .rng import derive_seed

__all__ = [
    "ReplicaPlan",
    "EstimateReport",
    "estimate_shape",
    "concentration_scan",
    "mean_busemann_increment",
    "coalescence_statistics",
    "attraction_experiment",
    "straightness_scan",
    "dump_report_csv",
    "dump_report_json",
]

# anchored solves over durations up to a few hundred: minimizer wander is
# ~duration^(2/3), well inside rate 0.3 once slack covers the short end
_EXPERIMENT_CORRIDOR = CorridorPolicy(half_width_rate=0.3, slack=6.0, max_widenings=8)

# coalescence retry ladder: (T0 fraction of T_max, stability window fraction);
# the last stage certifies to depth T_max/2, needed because a few percent of
# pairs coalesce below T_max/4
_COALESCENCE_STAGES = ((1.0 / 16.0, 0.5), (1.0 / 4.0, 0.5), (1.0 / 2.0, 1.0))


@dataclass(frozen=True)
class ReplicaPlan:
    """Deterministic replica schedule.

    Replica k runs on derive_seed(master_seed, k); the derived seeds are a
    pure function of the plan, pairwise distinct, and independent of how
    replicas are scheduled. params carries free-form experiment parameters
    for serialized provenance (the library passes parameters explicitly).
    """

    master_seed: int
    replica_count: int
    params: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.replica_count < 1:
            raise InvalidParameterError(f"need at least one replica, got {self.replica_count}")
        if len(set(self.seeds())) != self.replica_count:
            raise InvalidParameterError("derived seeds collide; change master_seed")

    def seeds(self) -> list[int]:
        return [derive_seed(self.master_seed, k) for k in range(self.replica_count)]


@dataclass(frozen=True)
class EstimateReport:
    """Per-parameter estimates with per-replica sample rows.

    samples[i][k] is replica k's value at parameters[i], nan when that
    replica was skipped there; replica_counts and skipped_counts are the
    finite/nan tallies, SE = sample sd / sqrt(n) of whatever the samples
    row holds (see each experiment's docstring for dispersion-type
    estimates). extras carries named scalars such as shape residuals.
    """

    experiment: str
    parameters: tuple[float, ...]
    estimates: tuple[float, ...]
    standard_errors: tuple[float, ...]
    replica_counts: tuple[int, ...]
    skipped_counts: tuple[int, ...]
    samples: tuple[tuple[float, ...], ...]
    extras: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        m = len(self.parameters)
        if not (
            len(self.estimates) == len(self.standard_errors) == m
            and len(self.replica_counts) == len(self.skipped_counts) == m
            and len(self.samples) == m
        ):
            raise InvalidParameterError("report rows disagree with the parameter grid")
        for row, n, sk in zip(self.samples, self.replica_counts, self.skipped_counts):
            finite = sum(1 for v in row if math.isfinite(v))
            # counted and skipped partition the replicas; counted rows may
            # still hold nan samples (e.g. undetected coalescence)
            if n + sk != len(row) or finite > n:
                raise InvalidParameterError("replica/skipped counts disagree with samples")


def _run_replicas(fn: Callable, seeds: Sequence[int], threads: int) -> list:
    """fn(seed) per replica, results in replica-index order."""
    if threads <= 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, seeds))


def _mean_se(row: np.ndarray) -> tuple[float, float, int, int]:
    ok = np.isfinite(row)
    n = int(ok.sum())
    mean = float(row[ok].mean()) if n else float("nan")
    se = float(row[ok].std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return mean, se, n, int(row.size - n)


def _pure_min_action(seed, intensity, start, end, policy):
    """Two-point solve against a plain generated field, regrowing on demand."""
    field_ = generate(seed, intensity, corridor_window(start, end, policy))
    while True:
        try:
            return min_action_two_point(field_, start, end, policy)
        except WindowTooSmallError as err:
            field_ = generate(seed, intensity, err.required_window)


def estimate_shape(
    plan: ReplicaPlan,
    t: float,
    v_list: Sequence[float],
    policy: CorridorPolicy = _EXPERIMENT_CORRIDOR,
    *,
    intensity: float = 1.0,
    threads: int = 1,
) -> EstimateReport:
    """Time-normalized two-point actions A^{0,t}(0, v t) / t per slope.

    One field realization per replica (window-consistent across the v
    grid); replicas whose solve escapes the corridor at a slope are skipped
    there and counted. When the grid contains v = 0, extras reports the
    quadraticity residuals r(v) = est(v) - est(0) - v^2/2.
    """
    t = float(t)
    vs = [float(v) for v in v_list]
    if not (np.isfinite(t) and t > 0.0):
        raise InvalidParameterError(f"need t > 0, got {t}")
    if not vs or not all(np.isfinite(vs)):
        raise InvalidParameterError(f"bad slope grid {v_list}")

    def one(seed: int) -> list[float]:
        out = []
        for v in vs:
            try:
                av, _ = _pure_min_action(
                    seed, intensity, SpaceTimePoint(0.0, 0.0), SpaceTimePoint(v * t, t), policy
                )
                out.append(av.total / t)
            except CorridorEscapeError:
                out.append(float("nan"))
        return out

    rows = np.asarray(_run_replicas(one, plan.seeds(), threads), dtype=np.float64).T
    stats = [_mean_se(rows[i]) for i in range(len(vs))]
    extras: list[tuple[str, float]] = []
    if 0.0 in vs:
        a0 = stats[vs.index(0.0)][0]
        extras = [
            (f"residual@{v:.17g}", stats[i][0] - a0 - v * v / 2.0)
            for i, v in enumerate(vs)
            if v != 0.0
        ]
    return EstimateReport(
        "shape",
        tuple(vs),
        tuple(s[0] for s in stats),
        tuple(s[1] for s in stats),
        tuple(s[2] for s in stats),
        tuple(s[3] for s in stats),
        tuple(tuple(rows[i]) for i in range(len(vs))),
        tuple(extras),
    )


def concentration_scan(
    plan: ReplicaPlan,
    t_list: Sequence[float],
    policy: CorridorPolicy = _EXPERIMENT_CORRIDOR,
    *,
    intensity: float = 1.0,
    threads: int = 1,
) -> EstimateReport:
    """Normalized dispersion sd(A^t(0,0)) / (t^(1/2) ln t) per duration.

    samples hold the raw per-replica actions; the estimate is the
    normalized sd, so the SE column carries the normal-theory standard
    error of an sd, sd / sqrt(2 (n-1)), under the same normalization
    (the sd/sqrt(n) convention applies to mean-type estimates only).
    """
    ts = [float(x) for x in t_list]
    if not ts or any(not np.isfinite(x) or x <= 1.0 for x in ts):
        raise InvalidParameterError(f"need durations > 1, got {t_list}")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise InvalidParameterError("durations must increase")

    def one(seed: int) -> list[float]:
        out = []
        for t in ts:
            try:
                av, _ = _pure_min_action(
                    seed, intensity, SpaceTimePoint(0.0, 0.0), SpaceTimePoint(0.0, t), policy
                )
                out.append(av.total)
            except CorridorEscapeError:
                out.append(float("nan"))
        return out

    rows = np.asarray(_run_replicas(one, plan.seeds(), threads), dtype=np.float64).T
    est, ses, ns, sks = [], [], [], []
    for i, t in enumerate(ts):
        ok = np.isfinite(rows[i])
        n = int(ok.sum())
        norm = math.sqrt(t) * math.log(t)
        sd = float(rows[i][ok].std(ddof=1)) if n > 1 else float("nan")
        est.append(sd / norm)
        ses.append(sd / math.sqrt(2.0 * (n - 1)) / norm if n > 1 else float("nan"))
        ns.append(n)
        sks.append(int(rows[i].size - n))
    return EstimateReport(
        "concentration",
        tuple(ts),
        tuple(est),
        tuple(ses),
        tuple(ns),
        tuple(sks),
        tuple(tuple(rows[i]) for i in range(len(ts))),
    )


def mean_busemann_increment(
    plan: ReplicaPlan,
    v: float,
    horizon: HorizonPolicy = HorizonPolicy(),
    *,
    threads: int = 1,
) -> EstimateReport:
    """Mean B_v((0,0),(1,0)) over replicas that coalesce within the horizon.

    Non-coalescing replicas are skipped and counted, never silently
    dropped; the estimate should sit within a few SE of v.
    """
    v = float(v)
    if not np.isfinite(v):
        raise InvalidParameterError(f"bad slope {v}")

    def one(seed: int) -> float:
        try:
            bv = busemann(seed, v, (0.0, 0.0), (1.0, 0.0), horizon)
        except CorridorEscapeError:
            return float("nan")
        return bv.value if bv.status == "exact" else float("nan")

    row = np.asarray(_run_replicas(one, plan.seeds(), threads), dtype=np.float64)
    mean, se, n, sk = _mean_se(row)
    return EstimateReport(
        "increment", (v,), (mean,), (se,), (n,), (sk,), (tuple(row),)
    )


def coalescence_statistics(
    plan: ReplicaPlan,
    v: float,
    separations: Sequence[float],
    horizon: HorizonPolicy = HorizonPolicy(),
    *,
    threads: int = 1,
) -> EstimateReport:
    """Coalescence of backward-minimizer pairs at (0,0) and (sep,0).

    Each pair walks the retry ladder (shallow first start, then deeper
    starts with a full-width stability window) until coalescence is
    detected or T_max certifies nothing. The estimate per separation is
    the coalesced fraction (SE from the 0/1 indicators); samples hold the
    coalescence depth endpoint.t - t_c, nan when undetected, so the CSV
    rows carry the empirical depth distribution. Corridor escapes skip
    the replica at that separation.
    """
    v = float(v)
    seps = [float(s) for s in separations]
    if not np.isfinite(v) or not seps or not all(np.isfinite(s) for s in seps):
        raise InvalidParameterError(f"bad separations {separations}")

    def one(seed: int) -> list[float]:
        cache = FieldCache(seed, horizon.intensity)
        origin: dict[int, object] = {}  # the (0,0) minimizer is shared by all separations

        def minimizer(x: float, stage: int):
            t0_frac, frac = _COALESCENCE_STAGES[stage]
            return backward_minimizer(
                seed, (x, 0.0), v, t0_frac * horizon.T_max, horizon.T_max,
                frac, intensity=horizon.intensity, policy=horizon.corridor,
                cache=cache,
            )

        out = []
        for sep in seps:
            depth = float("nan")
            try:
                for stage in range(len(_COALESCENCE_STAGES)):
                    if stage not in origin:
                        origin[stage] = minimizer(0.0, stage)
                    m1 = origin[stage]
                    m2 = m1 if sep == 0.0 else minimizer(sep, stage)
                    res = coalescence(seed, m1, m2)
                    if res.status == "coalesced":
                        depth = 0.0 - res.time
                        break
            except CorridorEscapeError:
                depth = float("inf")  # marks a skip, distinct from undetected
            out.append(depth)
        return out

    rows = np.asarray(_run_replicas(one, plan.seeds(), threads), dtype=np.float64).T
    est, ses, ns, sks, samples = [], [], [], [], []
    for i in range(len(seps)):
        row = rows[i]
        skipped = np.isinf(row)
        eff = row[~skipped]
        ind = np.isfinite(eff).astype(np.float64)
        n = int(ind.size)
        frac = float(ind.mean()) if n else float("nan")
        se = float(ind.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        est.append(frac)
        ses.append(se)
        ns.append(n)
        sks.append(int(skipped.sum()))
        samples.append(tuple(np.where(skipped, np.nan, row)))
    return EstimateReport(
        "coalescence", tuple(seps), tuple(est), tuple(ses), tuple(ns), tuple(sks),
        tuple(samples),
    )


def _check_attraction_condition(W: PiecewiseLinearPotential, v: float) -> None:
    """End-slope conditions under which the pullback limit exists.

    No macroscopic flux from infinity: for v = 0 the end slopes must
    straddle 0; for v > 0 the left end must already travel at v with the
    right end above -v (mirror case for v < 0).
    """
    v_minus, v_plus = float(W.slopes[0]), float(W.slopes[-1])
    if v == 0.0:
        ok = v_minus <= 0.0 <= v_plus
    elif v > 0.0:
        ok = v_minus == v and v_plus > -v
    else:
        ok = v_plus == v and v_minus < -v
    if not ok:
        raise InvalidInitialConditionError(
            f"end slopes ({v_minus}, {v_plus}) incompatible with slope {v}"
        )


def attraction_experiment(
    plan: ReplicaPlan,
    W: PiecewiseLinearPotential,
    v: float,
    s_list: Sequence[float],
    region: float,
    horizon: HorizonPolicy = HorizonPolicy(),
    *,
    evolution_policy: CorridorPolicy = CorridorPolicy(
        half_width_rate=0.15, slack=8.0, max_widenings=8
    ),
    agreement_tol: float = 1e-6,
    domain_tol: float = 1e-7,
    grid_points: int = 129,
    threads: int = 1,
) -> EstimateReport:
    """Pullback attraction of W toward the global slope-v solution.

    Per replica and start time s < 0, W evolves to time 0 on [-R, R] and
    its velocity is compared probe-by-probe with the replica's global
    profile; the estimate per s is the mean agreement fraction. extras
    carries the median entry-point slope ystar(0)/s per s, which should
    drift toward v as s recedes. Skips (corridor escapes) are counted.
    The reference profile runs under the horizon's corridor; the long
    evolutions get their own leaner rate (wander is ~|s|^(2/3), far below
    a deep corridor's linear growth) so the depth-500 solves stay
    tractable, with the usual widening on escape.
    """
    v = float(v)
    R = float(region)
    ss = [float(s) for s in s_list]
    if not (np.isfinite(R) and R > 0.0):
        raise InvalidParameterError(f"need a positive region half-width, got {region}")
    if not ss or any(not np.isfinite(s) or s >= 0.0 for s in ss):
        raise InvalidParameterError(f"start times must be negative, got {s_list}")
    if any(b >= a for a, b in zip(ss, ss[1:])):
        raise InvalidParameterError("start times must strictly descend")
    if grid_points < 3:
        raise InvalidParameterError("need at least three probe points")
    _check_attraction_condition(W, v)

    grid = np.linspace(-R, R, int(grid_points))
    probes = np.unique(np.concatenate([(grid[:-1] + grid[1:]) / 2.0, [0.0]]))

    def one(seed: int) -> list[float]:
        cache = FieldCache(seed, horizon.intensity)
        ref = global_velocity(seed, v, 0.0, (-R, R), domain_tol, horizon, cache=cache)
        ref_u = ref.velocity_at(probes)
        out = []
        for s in ss:
            try:
                field_ = cache.covering(
                    corridor_window(SpaceTimePoint(-R, s), SpaceTimePoint(R, 0.0),
                                    evolution_policy)
                )
                while True:
                    try:
                        evo = apply_cocycle(field_, W, s, 0.0, probes, evolution_policy)
                        break
                    except WindowTooSmallError as err:
                        field_ = cache.covering(err.required_window)
                agree = float(np.mean(np.abs(evo.velocity - ref_u) <= agreement_tol))
                y0 = float(evo.ystar[np.searchsorted(probes, 0.0)])
                out.extend([agree, y0 / s])
            except CorridorEscapeError:
                out.extend([float("nan"), float("nan")])
        return out

    raw = np.asarray(_run_replicas(one, plan.seeds(), threads), dtype=np.float64)
    est, ses, ns, sks, samples, extras = [], [], [], [], [], []
    for i, s in enumerate(ss):
        agree_row = raw[:, 2 * i]
        slope_row = raw[:, 2 * i + 1]
        mean, se, n, sk = _mean_se(agree_row)
        est.append(mean)
        ses.append(se)
        ns.append(n)
        sks.append(sk)
        samples.append(tuple(agree_row))
        fin = slope_row[np.isfinite(slope_row)]
        extras.append(
            (f"median_ystar_slope@{s:.17g}",
             float(np.median(fin)) if fin.size else float("nan"))
        )
    return EstimateReport(
        "attraction", tuple(ss), tuple(est), tuple(ses), tuple(ns), tuple(sks),
        tuple(samples), tuple(extras),
    )


def straightness_scan(
    plan: ReplicaPlan,
    v: float,
    delta: float,
    T_list: Sequence[float],
    horizon: HorizonPolicy = HorizonPolicy(),
    *,
    threads: int = 1,
) -> EstimateReport:
    """Chord deviation of stabilized minimizers, normalized by T^(1-delta).

    Per replica and horizon T, the slope-v minimizer into (0,0) is solved
    with the T/2 -> T doubling; the sample is its maximal deviation from
    the chord divided by T^(1-delta), and the estimate per T is the
    median ratio (SE column: sd/sqrt(n) of the ratios). Unstabilized
    replicas are skipped and counted.
    """
    v = float(v)
    delta = float(delta)
    Ts = [float(T) for T in T_list]
    if not np.isfinite(delta) or not (0.0 <= delta < 1.0):
        raise InvalidParameterError(f"need 0 <= delta < 1, got {delta}")
    if not Ts or any(not np.isfinite(T) or T <= 0.0 for T in Ts):
        raise InvalidParameterError(f"bad horizon list {T_list}")

    def one(seed: int) -> list[float]:
        cache = FieldCache(seed, horizon.intensity)
        out = []
        for T in Ts:
            try:
                m = backward_minimizer(
                    seed, (0.0, 0.0), v, T / 2.0, T,
                    intensity=horizon.intensity, policy=horizon.corridor, cache=cache,
                )
            except CorridorEscapeError:
                out.append(float("nan"))
                continue
            if not m.stabilized:
                out.append(float("nan"))
                continue
            if m.vertices:
                vx = np.array([p.x for p in m.vertices])
                vt = np.array([p.t for p in m.vertices])
                dev = float(np.abs(vx - v * vt).max())
            else:
                dev = 0.0  # empty corridor: the minimizer is the chord
            out.append(dev / T ** (1.0 - delta))
        return out

    rows = np.asarray(_run_replicas(one, plan.seeds(), threads), dtype=np.float64).T
    est, ses, ns, sks = [], [], [], []
    for i in range(len(Ts)):
        row = rows[i]
        ok = np.isfinite(row)
        n = int(ok.sum())
        est.append(float(np.median(row[ok])) if n else float("nan"))
        ses.append(float(row[ok].std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan"))
        ns.append(n)
        sks.append(int(row.size - n))
    return EstimateReport(
        "straightness", tuple(Ts), tuple(est), tuple(ses), tuple(ns), tuple(sks),
        tuple(tuple(rows[i]) for i in range(len(Ts))),
    )


def dump_report_csv(report: EstimateReport, fp: TextIO) -> None:
    """Long-format rows (experiment, parameter, replica, value)."""
    fp.write("experiment,parameter,replica,value\n")
    for p, row in zip(report.parameters, report.samples):
        for k, val in enumerate(row):
            fp.write(f"{report.experiment},{p:.17g},{k},{val:.17g}\n")


def dump_report_json(report: EstimateReport, fp: TextIO) -> None:
    """Summary with estimates, SEs, counts, and extras (no sample rows)."""
    json.dump(
        {
            "experiment": report.experiment,
            "parameters": list(report.parameters),
            "estimates": list(report.estimates),
            "standard_errors": list(report.standard_errors),
            "replica_counts": list(report.replica_counts),
            "skipped_counts": list(report.skipped_counts),
            "extras": dict(report.extras),
        },
        fp,
        indent=2,
        sort_keys=True,
    )
    fp.write("\n")
