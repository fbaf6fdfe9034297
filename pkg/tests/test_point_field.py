import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from poisson_burgers.errors import InvalidParameterError, OutOfWindowError
from poisson_burgers.point_field import (
    SpaceTimePoint,
    Window,
    count_in,
    dump_field,
    generate,
    load_field,
    restrict,
    shear,
    time_shift,
)
from poisson_burgers.rng import cell_uniform, derive_seed, poisson_icdf


def points_list(f):
    return list(zip(f.xs.tolist(), f.ts.tolist()))


def test_generation_is_deterministic():
    a = generate(42, 1.5, Window(-3.0, 3.0, -2.0, 2.0))
    b = generate(42, 1.5, Window(-3.0, 3.0, -2.0, 2.0))
    assert np.array_equal(a.xs, b.xs) and np.array_equal(a.ts, b.ts)
    c = generate(43, 1.5, Window(-3.0, 3.0, -2.0, 2.0))
    assert points_list(a) != points_list(c)


def test_points_sorted_and_inside_window():
    f = generate(7, 2.0, Window(-5.5, 4.25, -1.75, 3.0))
    assert np.all(f.xs >= -5.5) and np.all(f.xs <= 4.25)
    assert np.all(f.ts >= -1.75) and np.all(f.ts <= 3.0)
    keys = list(zip(f.ts.tolist(), f.xs.tolist()))
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)


def test_window_consistency_example():
    big = generate(11, 1.0, Window(-10.0, 10.0, -10.0, 10.0))
    small = generate(11, 1.0, Window(0.0, 1.0, 0.0, 1.0))
    inside = [
        (x, t) for x, t in points_list(big) if 0.0 <= x <= 1.0 and 0.0 <= t <= 1.0
    ]
    assert inside == points_list(small)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**63 - 1),
    x0=st.integers(-20, 18),
    t0=st.integers(-20, 18),
    wx=st.integers(1, 6),
    wt=st.integers(1, 6),
    pad_left=st.integers(0, 4),
    pad_right=st.integers(0, 4),
    pad_down=st.integers(0, 4),
    pad_up=st.integers(0, 4),
)
def test_window_consistency_property(seed, x0, t0, wx, wt, pad_left, pad_right, pad_down, pad_up):
    inner = Window(float(x0), float(x0 + wx), float(t0), float(t0 + wt))
    outer = Window(
        float(x0 - pad_left), float(x0 + wx + pad_right),
        float(t0 - pad_down), float(t0 + wt + pad_up),
    )
    small = generate(seed, 1.3, inner)
    big = generate(seed, 1.3, outer)
    assert points_list(restrict(big, inner)) == points_list(small)


def test_count_in_half_open_partition():
    f = generate(3, 2.0, Window(0.0, 4.0, 0.0, 4.0))
    total = count_in(f, Window(0.0, 4.0, 0.0, 4.0))
    parts = sum(
        count_in(f, Window(i, i + 1.0, j, j + 1.0))
        for i in range(4)
        for j in range(4)
    )
    # the half-open partition misses only points on the outer top/right edges
    on_edge = int(np.count_nonzero((f.xs == 4.0) | (f.ts == 4.0)))
    assert parts == total
    assert f.n == total + on_edge


def test_count_in_requires_contained_rect():
    f = generate(3, 1.0, Window(0.0, 2.0, 0.0, 2.0))
    with pytest.raises(OutOfWindowError):
        count_in(f, Window(1.0, 3.0, 0.0, 1.0))


def test_mean_count_over_seeds():
    # area-4 window at unit intensity: mean count within 4 +- 3*sqrt(4/2000)
    counts = np.array([generate(s, 1.0, Window(0.0, 2.0, 0.0, 2.0)).n for s in range(2000)])
    bound = 3.0 * np.sqrt(4.0 / 2000.0)
    assert abs(counts.mean() - 4.0) <= bound


def test_counts_match_poisson_distribution():
    cells = []
    for s in range(1000):
        f = generate(s, 1.0, Window(0.0, 2.0, 0.0, 2.0))
        for a, b in [(0, 0), (0, 1), (1, 0), (1, 1)]:
            cells.append(count_in(f, Window(a, a + 1.0, b, b + 1.0)))
    cells = np.array(cells)
    kmax = 6
    obs = np.bincount(np.minimum(cells, kmax), minlength=kmax + 1)
    pmf = [stats.poisson.pmf(k, 1.0) for k in range(kmax)] + [stats.poisson.sf(kmax - 1, 1.0)]
    _, p = stats.chisquare(obs, np.array(pmf) * cells.size)
    assert p > 0.01


def test_disjoint_cells_uncorrelated():
    c1, c2 = [], []
    for s in range(1000):
        f = generate(s, 1.0, Window(0.0, 2.0, 0.0, 2.0))
        c1.append(count_in(f, Window(0.0, 1.0, 0.0, 1.0)))
        c2.append(count_in(f, Window(1.0, 2.0, 1.0, 2.0)))
    rho = np.corrcoef(c1, c2)[0, 1]
    assert abs(rho) < 0.1


def test_shear_maps_single_point():
    f = generate(5, 0.5, Window(0.0, 3.0, 0.0, 3.0))
    g = shear(f, v=1.0, a=0.0)
    # (x, s) -> (x + v s, s)
    expect = sorted(zip((f.xs + f.ts).tolist(), f.ts.tolist()), key=lambda p: (p[1], p[0]))
    assert points_list(g) == expect
    assert g.derived


def test_shear_window_is_bounding_box():
    f = generate(5, 0.5, Window(0.0, 3.0, -1.0, 2.0))
    g = shear(f, v=2.0, a=1.0)
    assert g.window == Window(0.0 + 1.0 + 2.0 * -1.0, 3.0 + 1.0 + 2.0 * 2.0, -1.0, 2.0)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    v=st.floats(-2.0, 2.0),
    a=st.floats(-3.0, 3.0),
)
def test_shear_round_trip(seed, v, a):
    f = generate(seed, 1.0, Window(-2.0, 2.0, -2.0, 2.0))
    g = shear(shear(f, v, a), -v, -a)
    assert np.allclose(g.xs, f.xs, atol=1e-12, rtol=0.0)
    assert np.array_equal(g.ts, f.ts)


def test_time_shift_example():
    f = generate(5, 0.5, Window(0.0, 3.0, 0.0, 3.0))
    g = time_shift(f, 2.0)
    assert np.array_equal(g.ts, f.ts - 2.0)
    assert g.window == Window(0.0, 3.0, -2.0, 1.0)
    assert g.derived
    h = time_shift(g, -2.0)
    assert np.allclose(h.ts, f.ts, atol=1e-12, rtol=0.0)


def test_dump_load_round_trip():
    f = generate(99, 1.0, Window(-2.5, 2.5, 0.0, 2.0))
    buf = io.StringIO()
    dump_field(f, buf)
    buf.seek(0)
    g = load_field(buf)
    assert g.master_seed == f.master_seed
    assert g.intensity == f.intensity
    assert g.window == f.window
    assert np.array_equal(g.xs, f.xs) and np.array_equal(g.ts, f.ts)
    assert g.derived


def test_dump_format():
    f = generate(99, 1.0, Window(-2.5, 2.5, 0.0, 2.0))
    buf = io.StringIO()
    dump_field(f, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0].split()[0] == "99"
    assert len(lines) == 1 + f.n
    assert all(len(line.split()) == 2 for line in lines[1:])


def test_invalid_parameters():
    with pytest.raises(InvalidParameterError):
        generate(1, 0.0, Window(0.0, 1.0, 0.0, 1.0))
    with pytest.raises(InvalidParameterError):
        generate(1, -2.0, Window(0.0, 1.0, 0.0, 1.0))
    with pytest.raises(InvalidParameterError):
        Window(1.0, 1.0, 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        Window(0.0, 1.0, 2.0, 1.0)


def test_poisson_icdf_inversion():
    assert poisson_icdf(np.array([0.0]), 1.0)[0] == 0
    assert poisson_icdf(np.array([np.exp(-1.0) - 1e-12]), 1.0)[0] == 0
    assert poisson_icdf(np.array([np.exp(-1.0) + 1e-12]), 1.0)[0] == 1
    u = cell_uniform(0, np.arange(200_000), 0, 0)
    assert abs(poisson_icdf(u, 2.5).mean() - 2.5) < 0.02


def test_derive_seed_pure_and_distinct():
    a = [derive_seed(123, i) for i in range(100)]
    b = [derive_seed(123, i) for i in range(100)]
    assert a == b
    assert len(set(a)) == 100
    assert derive_seed(124, 0) != derive_seed(123, 0)
