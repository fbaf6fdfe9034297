"""Envelope and evolution tests.

The evolution oracle enumerates every time-ordered point chain and grid
searches the entry start, sharing no code with the chain DP.
"""

import itertools

import numpy as np
import pytest

from poisson_burgers.action_engine import CorridorPolicy
from poisson_burgers.errors import InvalidParameterError
from poisson_burgers.hopf_lax import (
    EnvelopeResult,
    PiecewiseLinearPotential,
    apply_cocycle,
    fit_piecewise_linear,
    moreau_envelope,
    potential_from_literal,
    potential_literal,
    sample_evolution_adaptive,
    velocity_jumps,
    velocity_profile,
)
from poisson_burgers.point_field import PointField, Window, generate


def make_field(xs, ts, window):
    xs = np.asarray(xs, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    order = np.lexsort((xs, ts))
    return PointField(0, 1.0, window, xs[order], ts[order], derived=True)


def flat_potential():
    return PiecewiseLinearPotential(0.0, 0.0, np.asarray([]), np.asarray([0.0]))


def random_potential(rng, max_pieces=10):
    K = int(rng.integers(0, max_pieces + 1))
    bps = np.sort(rng.uniform(-5.0, 5.0, K))
    while K and np.any(np.diff(bps) < 1e-3):
        bps = np.sort(rng.uniform(-5.0, 5.0, K))
    slopes = rng.uniform(-2.0, 2.0, K + 1)
    return PiecewiseLinearPotential(
        float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), bps, slopes
    )


def reference_evaluate(W, x):
    """Slope-overlap integration, independent of the cumsum table."""
    a, b = sorted((W.anchor_x, x))
    bounds = np.concatenate(([-np.inf], W.breakpoints, [np.inf]))
    total = 0.0
    for k in range(W.slopes.shape[0]):
        lo, hi = max(a, bounds[k]), min(b, bounds[k + 1])
        if hi > lo:
            total += W.slopes[k] * (hi - lo)
    return W.anchor_value + (total if x >= W.anchor_x else -total)


def envelope_grid_oracle(W, q, tau, step=1e-4):
    m_max = max(np.abs(W.slopes).max(), 1.0)
    span = m_max * tau + 1.0
    cands = np.concatenate((np.arange(q - span, q + span + step, step), W.breakpoints))
    return float((W.evaluate(cands) + (q - cands) ** 2 / (2.0 * tau)).min())


def evolution_start_grid_oracle(field, W, s, t, x):
    """min over time-ordered point chains, entry start minimized on a grid."""
    mask = (field.ts >= s) & (field.ts < t)
    pxs, pts = field.xs[mask], field.ts[mask]
    n = pxs.size
    assert n <= 12
    m_max = np.abs(W.slopes).max()
    span = m_max * (t - s) + abs(x) + 8.0
    coarse = np.arange(-span, span + 5e-4, 5e-4)
    best = np.inf
    for r in range(n + 1):
        for subset in itertools.combinations(range(n), r):
            idx = sorted(subset, key=lambda i: (pts[i], pxs[i]))
            cx, ct = pxs[idx], pts[idx]
            if r and np.any(np.diff(ct) <= 0):
                continue
            if r == 0:
                kin_within, tail = 0.0, 0.0
                first_x, first_t = x, t
            else:
                kin_within = float(np.sum(np.diff(cx) ** 2 / (2.0 * np.diff(ct))))
                tail = (x - cx[-1]) ** 2 / (2.0 * (t - ct[-1]))
                first_x, first_t = cx[0], ct[0]
            tau1 = first_t - s
            if tau1 <= 0:
                continue
            # short first legs concentrate the entry minimum near first_x
            # with curvature 1/tau1, beyond coarse-grid resolution
            half = m_max * tau1 + 0.01 if tau1 < 0.15 else 0.02
            fine = np.arange(first_x - half, first_x + half, 1e-5)
            cands = np.concatenate((coarse, fine, W.breakpoints))
            entry = float(
                (W.evaluate(cands) + (first_x - cands) ** 2 / (2.0 * tau1)).min()
            )
            best = min(best, entry + kin_within + tail - r)
    return best


# ---------------------------------------------------------------------------
# potential plumbing


def test_evaluate_examples():
    assert flat_potential().evaluate(3.7) == 0.0
    wlin = PiecewiseLinearPotential(0.0, 0.0, np.asarray([]), np.asarray([1.0]))
    assert wlin.evaluate(3.0) == 3.0
    hat = PiecewiseLinearPotential(0.0, 1.0, np.asarray([0.0]), np.asarray([1.0, -1.0]))
    assert hat.evaluate(0.0) == 1.0
    assert hat.evaluate(-2.0) == pytest.approx(-1.0, abs=1e-15)
    assert hat.evaluate(2.0) == pytest.approx(-1.0, abs=1e-15)


def test_evaluate_matches_piece_walk():
    rng = np.random.default_rng(3)
    for _ in range(50):
        W = random_potential(rng)
        xs = rng.uniform(-8, 8, 40)
        got = W.evaluate(xs)
        want = np.asarray([reference_evaluate(W, float(x)) for x in xs])
        np.testing.assert_allclose(got, want, atol=1e-10)


def test_potential_validation():
    with pytest.raises(InvalidParameterError):
        PiecewiseLinearPotential(0, 0, np.asarray([1.0, 1.0]), np.asarray([0, 0, 0.0]))
    with pytest.raises(InvalidParameterError):
        PiecewiseLinearPotential(0, 0, np.asarray([1.0]), np.asarray([0.0]))
    with pytest.raises(InvalidParameterError):
        PiecewiseLinearPotential(np.nan, 0, np.asarray([]), np.asarray([0.0]))


def test_literal_round_trip():
    rng = np.random.default_rng(4)
    for _ in range(20):
        W = random_potential(rng)
        back = potential_from_literal(potential_literal(W))
        assert back.anchor_x == W.anchor_x and back.anchor_value == W.anchor_value
        np.testing.assert_array_equal(back.breakpoints, W.breakpoints)
        np.testing.assert_array_equal(back.slopes, W.slopes)
    with pytest.raises(InvalidParameterError):
        potential_from_literal("0 0 ; 1 2")
    with pytest.raises(InvalidParameterError):
        potential_from_literal("0 ; 1 ; 2 3")


def test_fit_piecewise_linear_reproduces_exactly():
    W = PiecewiseLinearPotential(
        0.0, 0.3, np.asarray([-1.0, 0.5, 2.0]), np.asarray([-0.5, 1.0, 0.0, 2.0])
    )
    gx = np.unique(np.concatenate((np.linspace(-4, 4, 33), W.breakpoints)))
    fit = fit_piecewise_linear(gx, W.evaluate(gx), W.slopes[0], W.slopes[-1])
    probe = np.linspace(-9, 9, 301)
    np.testing.assert_allclose(fit.evaluate(probe), W.evaluate(probe), atol=1e-9)


# ---------------------------------------------------------------------------
# Moreau envelope


def test_envelope_flat():
    env = moreau_envelope(flat_potential(), 1.3, 0.7)
    assert env == EnvelopeResult(0.0, 1.3)


def test_envelope_linear_closed_form():
    wlin = PiecewiseLinearPotential(0.0, 0.0, np.asarray([]), np.asarray([1.0]))
    for x in (-1.0, 0.0, 2.0):
        env = moreau_envelope(wlin, x, 1.0)
        assert env.value == pytest.approx(x - 0.5, abs=1e-12)
        assert env.argmin_z == pytest.approx(x - 1.0, abs=1e-12)


def test_envelope_tie_breaks_rightmost():
    # peaked potential, symmetric minima at +-tau: report the right one
    peak = PiecewiseLinearPotential(0.0, 0.0, np.asarray([0.0]), np.asarray([1.0, -1.0]))
    env = moreau_envelope(peak, 0.0, 0.8)
    assert env.argmin_z == pytest.approx(0.8, abs=1e-12)
    assert env.value == pytest.approx(-0.4, abs=1e-12)


def test_envelope_identity_exact():
    rng = np.random.default_rng(5)
    for _ in range(200):
        W = random_potential(rng)
        q = float(rng.uniform(-6, 6))
        tau = float(rng.uniform(0.05, 3.0))
        env = moreau_envelope(W, q, tau)
        assert env.value == W.evaluate(env.argmin_z) + (q - env.argmin_z) ** 2 / (
            2.0 * tau
        )


def test_envelope_grid_oracle_1000():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        W = random_potential(rng)
        q = float(rng.uniform(-6, 6))
        tau = float(rng.uniform(0.05, 3.0))
        env = moreau_envelope(W, q, tau)
        grid = envelope_grid_oracle(W, q, tau)
        assert env.value <= grid + 1e-9
        assert grid - env.value <= 1e-6


def test_envelope_rejects_bad_tau():
    with pytest.raises(InvalidParameterError):
        moreau_envelope(flat_potential(), 0.0, 0.0)
    with pytest.raises(InvalidParameterError):
        moreau_envelope(flat_potential(), 0.0, -1.0)


# ---------------------------------------------------------------------------
# evolution


def test_empty_field_flat_rest_state():
    field = make_field([], [], Window(-20, 20, 0, 1))
    prof = apply_cocycle(field, flat_potential(), 0.0, 1.0, np.linspace(-3, 3, 13))
    np.testing.assert_array_equal(prof.potential, np.zeros(13))
    np.testing.assert_array_equal(prof.velocity, np.zeros(13))
    assert np.all(prof.generator_index == -1)


def test_empty_field_matches_envelope():
    # classical evolution of |z|: parabola in the middle, shifted lines outside
    wabs = PiecewiseLinearPotential(0.0, 0.0, np.asarray([0.0]), np.asarray([-1.0, 1.0]))
    field = make_field([], [], Window(-30, 30, 0, 1))
    xs = np.asarray([-2.0, -1.0, -0.3, 0.0, 0.7, 1.0, 2.5])
    prof = apply_cocycle(field, wabs, 0.0, 1.0, xs)
    for x, got in zip(xs, prof.potential):
        env = moreau_envelope(wabs, float(x), 1.0)
        closed = x * x / 2.0 if abs(x) <= 1.0 else abs(x) - 0.5
        assert got == env.value
        assert got == pytest.approx(closed, abs=1e-12)


def test_single_point_example():
    # value through (0.5, 0.5): free start parks on the point, then one
    # kinetic leg to the query: 0 - 1 + 0.25
    field = make_field([0.5], [0.5], Window(-20, 20, 0, 1))
    prof = apply_cocycle(field, flat_potential(), 0.0, 1.0, [0.0])
    assert prof.potential[0] == pytest.approx(-0.75, abs=1e-12)
    assert prof.velocity[0] == pytest.approx(-1.0, abs=1e-12)
    assert prof.ystar[0] == pytest.approx(0.5, abs=1e-12)
    assert prof.generator_x[0] == 0.5 and prof.generator_t[0] == 0.5
    oracle = evolution_start_grid_oracle(field, flat_potential(), 0.0, 1.0, 0.0)
    assert prof.potential[0] == pytest.approx(oracle, abs=1e-6)


def test_matches_start_grid_oracle_on_random_fields():
    rng = np.random.default_rng(7)
    checked = 0
    for trial in range(30):
        s = float(rng.uniform(-1, 1))
        t = s + float(rng.uniform(1.0, 2.5))
        npts = int(rng.integers(1, 7))
        pxs = rng.uniform(-4, 4, npts)
        pts = rng.uniform(s, t - 1e-6, npts)
        W = random_potential(rng, max_pieces=4)
        # clamp to the oracle's slope assumptions
        W = PiecewiseLinearPotential(
            W.anchor_x, W.anchor_value, W.breakpoints, np.clip(W.slopes, -1.5, 1.5)
        )
        field = make_field(pxs, pts, Window(-40, 40, s, t))
        xq = np.sort(rng.uniform(-3, 3, 3))
        prof = apply_cocycle(
            field, W, s, t, xq, CorridorPolicy(half_width_rate=8.0, slack=10.0)
        )
        for k, x in enumerate(xq):
            oracle = evolution_start_grid_oracle(field, W, s, t, float(x))
            assert prof.potential[k] <= oracle + 1e-9
            assert oracle - prof.potential[k] <= 1e-6
            checked += 1
    assert checked == 90


def test_cocycle_identity_sampled_refit():
    policy = CorridorPolicy()
    rng = np.random.default_rng(11)
    for seed in range(5):
        s, t = 0.0, 2.0
        r = float(rng.uniform(0.7, 1.3))
        v_minus = float(rng.uniform(-1, 0.5))
        v_plus = float(rng.uniform(-0.5, 1))
        W = PiecewiseLinearPotential(
            0.0,
            0.0,
            np.asarray([-1.0, 1.5]),
            np.asarray([v_minus, 0.5 * (v_minus + v_plus), v_plus]),
        )
        vmax = max(abs(v_minus), abs(v_plus))
        margin = (vmax + policy.half_width_rate) * (t - r) + 4 * policy.slack
        lo_mid, hi_mid = -3.0 - margin, 3.0 + margin
        need = max(abs(lo_mid), abs(hi_mid)) + policy.half_width_rate * (t - s)
        window = Window(-need - 8 * policy.slack, need + 8 * policy.slack, s, t)
        field = generate(seed + 100, 1.0, window)

        xs_q = np.linspace(-3.0, 3.0, 121)
        direct = apply_cocycle(field, W, s, t, xs_q, policy)
        gx, gv = sample_evolution_adaptive(field, W, s, r, lo_mid, hi_mid, policy)
        W_mid = fit_piecewise_linear(gx, gv, W.slopes[0], W.slopes[-1])
        two_leg = apply_cocycle(field, W_mid, r, t, xs_q, policy)
        diff = direct.potential - two_leg.potential
        diff -= diff[0]  # potentials compare modulo an additive constant
        assert np.abs(diff).max() <= 1e-6


def test_adaptive_sampling_interpolates_within_tol():
    field = generate(21, 1.0, Window(-40, 40, 0, 1.5))
    W = PiecewiseLinearPotential(0.0, 0.0, np.asarray([0.0]), np.asarray([-0.4, 0.4]))
    gx, gv = sample_evolution_adaptive(field, W, 0.0, 1.5, -6.0, 6.0, tol=1e-7)
    probe = np.sort(np.random.default_rng(1).uniform(-6, 6, 200))
    direct = apply_cocycle(field, W, 0.0, 1.5, probe)
    np.testing.assert_allclose(
        np.interp(probe, gx, gv), direct.potential, atol=5e-7
    )


def test_degenerate_equal_times_returns_potential():
    field = generate(8, 1.0, Window(-10, 10, 0, 1))
    W = PiecewiseLinearPotential(0.0, 0.2, np.asarray([0.4]), np.asarray([-0.3, 1.1]))
    xs = np.linspace(-2, 2, 9)
    prof = apply_cocycle(field, W, 0.5, 0.5, xs)
    np.testing.assert_array_equal(prof.potential, W.evaluate(xs))
    np.testing.assert_array_equal(prof.velocity, W.slope_at(xs))
    np.testing.assert_array_equal(prof.ystar, xs)


def test_rejects_bad_queries():
    field = make_field([], [], Window(-10, 10, 0, 1))
    W = flat_potential()
    with pytest.raises(InvalidParameterError):
        apply_cocycle(field, W, 0.0, 1.0, [])
    with pytest.raises(InvalidParameterError):
        apply_cocycle(field, W, 0.0, 1.0, [1.0, 0.0])
    with pytest.raises(InvalidParameterError):
        apply_cocycle(field, W, 1.0, 0.0, [0.0])
    with pytest.raises(InvalidParameterError):
        velocity_profile(field, W, 0.0, 1.0, (2.0, -2.0), 10)


def test_point_free_corridor_equals_envelope():
    # all points sit beyond the corridor walls for this policy
    field = make_field([20.0, 25.0, -22.0], [0.3, 0.6, 0.5], Window(-40, 40, 0, 1))
    xs = np.linspace(-3, 3, 25)
    prof = apply_cocycle(
        field, flat_potential(), 0.0, 1.0, xs, CorridorPolicy(half_width_rate=1.0, slack=2.0)
    )
    np.testing.assert_array_equal(prof.potential, np.zeros(25))
    assert np.all(prof.generator_index == -1)


# ---------------------------------------------------------------------------
# velocity structure


def test_velocity_profile_single_point_pieces():
    # point (0, 0.5): potential min(0, x^2 - 1); velocity 0 | 2x | 0 with
    # the tie at x = -1 going to the point route (rightmost turning point)
    # and the tie at x = +1 going to the envelope
    field = make_field([0.0], [0.5], Window(-25, 25, 0, 1))
    prof = velocity_profile(field, flat_potential(), 0.0, 1.0, (-2.0, 2.0), 401)
    want_pot = np.minimum(0.0, prof.xs**2 - 1.0)
    np.testing.assert_allclose(prof.potential, want_pot, atol=1e-12)
    inside = (prof.xs >= -1.0) & (prof.xs < 1.0)
    np.testing.assert_allclose(prof.velocity[inside], 2.0 * prof.xs[inside], atol=1e-12)
    np.testing.assert_allclose(prof.velocity[~inside], 0.0, atol=1e-12)

    locs, jumps = velocity_jumps(field, flat_potential(), 0.0, 1.0, (-2.0, 2.0), 101)
    np.testing.assert_allclose(locs, [-1.0, 1.0], atol=1e-9)
    np.testing.assert_allclose(jumps, [-2.0, -2.0], atol=1e-9)


def test_velocity_linear_within_runs():
    field = generate(31, 1.0, Window(-40, 40, 0, 2))
    W = PiecewiseLinearPotential(0.0, 0.0, np.asarray([0.0]), np.asarray([-0.3, 0.3]))
    prof = velocity_profile(field, W, 0.0, 2.0, (-5.0, 5.0), 801)
    on_point = prof.generator_index >= 0
    np.testing.assert_allclose(
        prof.velocity[on_point],
        (prof.xs[on_point] - prof.generator_x[on_point])
        / (prof.t - prof.generator_t[on_point]),
        atol=1e-9,
    )
    np.testing.assert_allclose(
        prof.velocity[~on_point],
        (prof.xs[~on_point] - prof.ystar[~on_point]) / (prof.t - prof.s),
        atol=1e-9,
    )
    # rightmost minimizers do not cross: start points are monotone
    assert np.all(np.diff(prof.ystar) >= -1e-9)


def test_random_field_jumps_are_negative():
    W = flat_potential()
    for seed in range(20, 30):
        field = generate(seed, 1.0, Window(-40, 40, 0, 2))
        locs, jumps = velocity_jumps(
            field, W, 0.0, 2.0, (-5.0, 5.0), 401,
            CorridorPolicy(half_width_rate=8.0, slack=10.0),
        )
        assert jumps.size > 0
        assert jumps.max() <= 1e-9


def test_lipschitz_panels():
    field = generate(41, 1.0, Window(-40, 40, 0, 2))
    W = PiecewiseLinearPotential(0.0, 0.0, np.asarray([0.0]), np.asarray([-0.5, 0.5]))
    prof = velocity_profile(field, W, 0.0, 2.0, (-5.0, 5.0), 501)
    quotients = np.abs(np.diff(prof.potential) / np.diff(prof.xs))
    assert quotients.max() <= np.abs(prof.velocity).max() + 1.0


def test_space_invariance_decile_slopes():
    v_minus, v_plus = -0.5, 0.5
    W = PiecewiseLinearPotential(
        0.0, 0.0, np.asarray([0.0]), np.asarray([v_minus, v_plus])
    )
    ok = 0
    for seed in range(100):
        field = generate(seed, 1.0, Window(-64, 64, 0, 1))
        prof = velocity_profile(field, W, 0.0, 1.0, (-50.0, 50.0), 101)
        pot = dict(zip(prof.xs.tolist(), prof.potential.tolist()))
        left = (pot[-40.0] - pot[-50.0]) / 10.0
        right = (pot[50.0] - pot[40.0]) / 10.0
        if abs(left - v_minus) <= 0.2 and abs(right - v_plus) <= 0.2:
            ok += 1
    assert ok >= 90
