import time
import numpy as np

from poisson_burgers.action_engine import CorridorPolicy
from poisson_burgers.point_field import Window
from poisson_burgers.backward_minimizers import FieldCache, HorizonPolicy, _deep_slice
from poisson_burgers.busemann_solutions import _anchored_slice_potential
from poisson_burgers.hopf_lax import apply_cocycle, fit_piecewise_linear

NARROW = CorridorPolicy(half_width_rate=0.3, slack=6.0, max_widenings=8)
HZC = HorizonPolicy(T0=16.0, T_max=256.0, corridor=NARROW)

seed, v, s, t = 400, 0.0, -5.0, 0.0
a, b = -5.0, 5.0
fit_tol, grid_points = 1e-7, 512
cache = FieldCache(seed, HZC.intensity)
tau = t - s
pad = (abs(v) + 2.0) * tau + 8.0
lo, hi = a - pad, b + pad

t0 = time.perf_counter()

def sampled(slice_):
    t1 = time.perf_counter()
    print(f"ladder done: {t1-t0:.1f}s  T={slice_.horizon_T} stab={slice_.stabilized}")
    xs_, vals_ = slice_.dense_samples(fit_tol)
    t2 = time.perf_counter()
    print(f"dense sampling: {t2-t1:.2f}s  nodes={xs_.shape[0]}")
    return xs_, vals_, slice_.horizon_T

xs_s, vals_s, T_s = _deep_slice(cache, v, s, lo, hi, HZC, sampled,
                                track_values=True, require_keys=False)
t3 = time.perf_counter()
barrier = (hi - lo) / tau + abs(v) + 10.0
W = fit_piecewise_linear(xs_s, vals_s, -barrier, barrier)
grid = np.linspace(a, b, grid_points)
hw = HZC.corridor.half_width_rate * tau + HZC.corridor.slack
field_ = cache.covering(Window(a - hw, b + hw, s, t))
prof = apply_cocycle(field_, W, s, t, grid, HZC.corridor)
t4 = time.perf_counter()
print(f"fit+cocycle: {t4-t3:.2f}s  (W pieces: {W.slopes.shape[0]})")
target = _anchored_slice_potential(cache, v, s - T_s, t, a, b, HZC, grid)
t5 = time.perf_counter()
print(f"anchored target: {t5-t4:.2f}s")
d = (prof.potential - prof.potential[0]) - (target - target[0])
print(f"discrepancy {np.max(np.abs(d)):.3e}  total {t5-t0:.1f}s")
