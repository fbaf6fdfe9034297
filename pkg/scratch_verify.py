"""One-off verifications: matched-wall check fix, autocovariance params,
and the four not-yet-executed test expectations."""
import io
import math
import time

import numpy as np

from poisson_burgers.backward_minimizers import FieldCache, HorizonPolicy
from poisson_burgers.busemann_solutions import (
    BusemannValue,
    busemann,
    check_global_solution,
    dump_busemann,
    global_potential,
    global_profile_samples,
    increment_autocovariance,
)
from poisson_burgers.action_engine import CorridorPolicy
from poisson_burgers.errors import HorizonInsufficientError, InvalidParameterError
from poisson_burgers.point_field import SpaceTimePoint

NARROW = CorridorPolicy(half_width_rate=0.3, slack=6.0, max_widenings=8)

print("== 1. check_global_solution with matched walls ==")
hzc = HorizonPolicy(T0=16.0, T_max=256.0, corridor=NARROW)
for seed in (436, 400, 403, 440, 410):
    t0 = time.time()
    d = check_global_solution(seed, 0.0, -5.0, 0.0, (-5.0, 5.0), hzc)
    print(f"  seed {seed}: {d:.3e}  ({time.time()-t0:.1f}s)")

print("== 2. trivials refreeze ==")
hzq = HorizonPolicy(T0=8.0, T_max=64.0, intensity=1e-6, corridor=NARROW)
print("  v=0:", check_global_solution(3, 0.0, -5.0, 0.0, (-5.0, 5.0), hzq))
print("  v=0.7:", check_global_solution(3, 0.7, -5.0, 0.0, (-5.0, 5.0), hzq))

print("== 3. autocovariance parameter search ==")
for hw, tmax in ((30, 512.0), (12, 256.0), (12, 512.0)):
    hza = HorizonPolicy(T0=16.0, T_max=tmax, corridor=NARROW)
    t0 = time.time()
    try:
        lags, acov = increment_autocovariance(1, 0.0, 0.0, hw, min(20, 2 * hw - 1), hza)
        print(
            f"  hw={hw} Tmax={tmax}: var={acov[0]:.17g} a1={acov[1]:.17g} "
            f"a5={acov[5]:.6g} a10={acov[10]:.6g} a20={acov[-1]:.6g} "
            f"max|a10:|={np.abs(acov[10:]).max():.6g} ({time.time()-t0:.1f}s)"
        )
    except HorizonInsufficientError as e:
        print(f"  hw={hw} Tmax={tmax}: insufficient ({time.time()-t0:.1f}s)")

print("== 4. global_potential far pair raises ==")
hz64 = HorizonPolicy(T0=16.0, T_max=64.0, corridor=NARROW)
cache42 = FieldCache(42, 1.0)
bv = busemann(42, 0.0, (-40.0, 0.0), (40.0, 0.0), hz64, cache=cache42)
print("  busemann status:", bv.status, "nan:", math.isnan(bv.value))
try:
    global_potential(42, 0.0, 40.0, 0.0, hz64, cache=cache42)
    print("  global_potential: NO RAISE  <-- PROBLEM")
except HorizonInsufficientError:
    print("  global_potential: raised HorizonInsufficientError")

print("== 5. near-empty profile samples ==")
hzq2 = HorizonPolicy(T0=8.0, T_max=32.0, intensity=1e-6, corridor=NARROW)
xs, pot, vel, gen_x = global_profile_samples(5, 0.4, 1.0, (-2.0, 2.0), 9, hzq2)
print("  xs == linspace:", np.array_equal(xs, np.linspace(-2.0, 2.0, 9)))
print("  max|pot - 0.4(x+2)|:", np.max(np.abs(pot - 0.4 * (xs + 2.0))))
print("  vel all 0.4:", bool(np.all(vel == 0.4)), " gen all nan:", bool(np.all(np.isnan(gen_x))))
for bad in (((2.0, -2.0), 9), (((-2.0, 2.0)), 1)):
    try:
        global_profile_samples(5, 0.4, 1.0, bad[0], bad[1], hzq2)
        print("  bad args NO RAISE  <-- PROBLEM", bad)
    except InvalidParameterError:
        print("  bad args raised:", bad)

print("== 6. single-rung profile samples raises ==")
hz1 = HorizonPolicy(T0=16.0, T_max=16.0, corridor=NARROW)
try:
    global_profile_samples(1, 0.0, 0.0, (-2.0, 2.0), 33, hz1)
    print("  NO RAISE  <-- PROBLEM")
except HorizonInsufficientError:
    print("  raised HorizonInsufficientError")

print("== 7. dump format ==")
HZ = HorizonPolicy(T0=16.0, T_max=128.0, corridor=NARROW)
rows = [
    (9, busemann(9, 0.3, (1.0, 2.0), (1.0, 2.0), HZ)),
    (11, BusemannValue(SpaceTimePoint(0.0, 0.0), SpaceTimePoint(1.0, 0.0), 0.5,
                       float("nan"), float("nan"), "horizon-insufficient")),
]
buf = io.StringIO()
dump_busemann(rows, buf)
for line in buf.getvalue().splitlines():
    print("  |" + line + "|")
print("done")
