import time
import numpy as np

from poisson_burgers.action_engine import CorridorPolicy
from poisson_burgers.backward_minimizers import FieldCache, HorizonPolicy
from poisson_burgers.busemann_solutions import (
    busemann, check_global_solution, increment_autocovariance,
)
from poisson_burgers.errors import CorridorEscapeError, HorizonInsufficientError

NARROW = CorridorPolicy(half_width_rate=0.3, slack=6.0, max_widenings=8)

print("== check_global_solution trivials (redesigned) ==")
hzq2 = HorizonPolicy(T0=8.0, T_max=64.0, intensity=1e-6, corridor=NARROW)
print("empty v=0:", check_global_solution(3, 0.0, -5.0, 0.0, (-5.0, 5.0), hzq2))
print("empty v=0.7:", check_global_solution(3, 0.7, -5.0, 0.0, (-5.0, 5.0), hzq2))
print("s == t:", check_global_solution(3, 0.0, 1.0, 1.0, (-5.0, 5.0), hzq2))

print("== check_global_solution: 50 seeds, v=0, tau=5 ==")
HZC = HorizonPolicy(T0=16.0, T_max=256.0, corridor=NARROW)
t0 = time.time()
vals, nskip = [], 0
for seed in range(400, 450):
    t1 = time.time()
    try:
        d = check_global_solution(seed, 0.0, -5.0, 0.0, (-5.0, 5.0), HZC)
        vals.append(d)
        flag = " <-- BIG" if d > 1e-6 else ""
        print(f"  seed {seed}: {d:.3e}  ({time.time()-t1:.1f}s){flag}")
    except (HorizonInsufficientError, CorridorEscapeError):
        nskip += 1
        print(f"  seed {seed}: skipped ({time.time()-t1:.1f}s)")
el = time.time() - t0
ok = sum(1 for d in vals if d <= 1e-6)
print(f"skips {nskip}/50; within 1e-6: {ok}/{len(vals)}; max {max(vals):.3e}; "
      f"elapsed {el:.1f}s ({el/50:.2f}s/seed)")

print("== increment autocovariance, 5 seeds (diff-tracked) ==")
HZA = HorizonPolicy(T0=16.0, T_max=256.0, corridor=NARROW)
t0 = time.time()
rows = []
for seed in (1, 2, 3, 4, 5):
    try:
        lags, acov = increment_autocovariance(seed, 0.0, 0.0, 30, 20, HZA)
        rows.append(acov)
        print(f"  seed {seed}: var {acov[0]:.3f} acov[1] {acov[1]:+.4f} "
              f"acov[5] {acov[5]:+.4f} acov[10] {acov[10]:+.4f} acov[20] {acov[20]:+.4f}")
    except HorizonInsufficientError:
        print(f"  seed {seed}: insufficient")
if rows:
    m = np.mean(rows, axis=0)
    print("  mean: ", " ".join(f"{x:+.4f}" for x in m[[0, 1, 2, 5, 10, 20]]))
print(f"elapsed {time.time()-t0:.1f}s")

print("== criterion 6 scale test: T_max=256, 30 seeds ==")
HZ6 = HorizonPolicy(T0=16.0, T_max=256.0, corridor=NARROW)
t0 = time.time()
n_pairs = n_triples = 0
max_anti = 0.0
max_add = -1.0
for seed in range(50, 80):
    cache = FieldCache(seed, 1.0)
    p1, p2, p3 = (-1.0, 0.0), (0.2, 0.0), (1.3, 0.0)
    b12 = busemann(seed, 0.0, p1, p2, HZ6, cache=cache)
    b21 = busemann(seed, 0.0, p2, p1, HZ6, cache=cache)
    if b12.status == b21.status == "exact":
        n_pairs += 1
        max_anti = max(max_anti, abs(b12.value + b21.value))
    b13 = busemann(seed, 0.0, p1, p3, HZ6, cache=cache)
    b23 = busemann(seed, 0.0, p2, p3, HZ6, cache=cache)
    if all(b.status == "exact" for b in (b12, b23, b13)):
        n_triples += 1
        max_add = max(max_add, abs(b13.value - b12.value - b23.value))
print(f"pairs {n_pairs}/30 triples {n_triples}/30 anti {max_anti:.1e} add {max_add:.1e} "
      f"elapsed {time.time()-t0:.1f}s")

print("== criterion 7 scale test: increment pairs, 40 seeds ==")
t0 = time.time()
n_coal = 0
vals7 = []
for seed in range(1000, 1040):
    b = busemann(seed, 0.0, (0.0, 0.0), (1.0, 0.0), HZ6)
    if b.status == "exact":
        n_coal += 1
        vals7.append(b.value)
el = time.time() - t0
print(f"coalesced {n_coal}/40 mean {np.mean(vals7):+.3f} sd {np.std(vals7):.3f} "
      f"elapsed {el:.1f}s ({el/40:.2f}s/seed)")
