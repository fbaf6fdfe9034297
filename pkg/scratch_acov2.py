"""Freeze runs: new-API autocovariance values + matched-wall 50-seed scan."""
import time

import numpy as np

from poisson_burgers.action_engine import CorridorPolicy
from poisson_burgers.backward_minimizers import HorizonPolicy
from poisson_burgers.busemann_solutions import (
    check_global_solution,
    increment_autocovariance,
)
from poisson_burgers.errors import CorridorEscapeError, HorizonInsufficientError

NARROW = CorridorPolicy(half_width_rate=0.3, slack=6.0, max_widenings=8)
HZA = HorizonPolicy(T0=16.0, T_max=256.0, corridor=NARROW)

print("== autocovariance, new API ==")
for seed, hw in ((1, 30), (2, 12), (2, 30), (3, 30), (4, 30), (5, 30)):
    t0 = time.time()
    lags, acov, unsettled = increment_autocovariance(seed, 0.0, 0.0, hw, min(20, 2 * hw - 1), HZA)
    print(
        f"  seed {seed} hw {hw}: unsettled {unsettled} var {acov[0]:.17g} "
        f"a1 {acov[1]:.17g} a10 {acov[10]:.6g} max|a10:| {np.abs(acov[10:]).max():.6g} "
        f"({time.time()-t0:.1f}s)"
    )

print("== 50-seed matched-wall scan, v=0 tau=5 [-5,5] ==")
HZC = HorizonPolicy(T0=16.0, T_max=256.0, corridor=NARROW)
t_all = time.time()
res = {}
skips = 0
for seed in range(400, 450):
    t0 = time.time()
    try:
        d = check_global_solution(seed, 0.0, -5.0, 0.0, (-5.0, 5.0), HZC)
        res[seed] = d
        flag = "  <-- BIG" if d > 1e-6 else ""
        print(f"  seed {seed}: {d:.3e}  ({time.time()-t0:.1f}s){flag}")
    except (HorizonInsufficientError, CorridorEscapeError) as e:
        skips += 1
        print(f"  seed {seed}: SKIP {type(e).__name__} ({time.time()-t0:.1f}s)")
ok = sum(1 for d in res.values() if d <= 1e-6)
print(
    f"skips {skips}/50; within 1e-6: {ok}/{len(res)}; "
    f"max {max(res.values()):.3e}; elapsed {time.time()-t_all:.1f}s "
    f"({(time.time()-t_all)/50:.2f}s/seed)"
)
print("done")
