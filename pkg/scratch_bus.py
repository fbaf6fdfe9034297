import time
import numpy as np

from poisson_burgers.action_engine import CorridorPolicy
from poisson_burgers.point_field import SpaceTimePoint, Window, generate, restrict, shear
from poisson_burgers.backward_minimizers import FieldCache, HorizonPolicy
from poisson_burgers.busemann_solutions import (
    busemann, global_potential, global_velocity, global_profile_samples,
    check_global_solution, increment_autocovariance,
)

NARROW = CorridorPolicy(half_width_rate=0.3, slack=6.0, max_widenings=8)
HZ = HorizonPolicy(T0=16.0, T_max=128.0, corridor=NARROW)

print("== trivials ==")
bv = busemann(5, 0.3, (1.0, 2.0), (1.0, 2.0), HZ)
print("B(p,p):", bv.value, bv.status, bv.coalescence_time)

print("== antisymmetry / additivity, seeds 50..79 ==")
t0 = time.time()
max_anti = 0.0
max_add = -1.0
n_pairs_ok = n_triples_ok = n_tot = 0
for seed in range(50, 80):
    cache = FieldCache(seed, 1.0)
    p1, p2, p3 = (-1.0, 0.0), (0.2, 0.0), (1.3, 0.0)
    b12 = busemann(seed, 0.0, p1, p2, HZ, cache=cache)
    b21 = busemann(seed, 0.0, p2, p1, HZ, cache=cache)
    n_tot += 1
    if b12.status == "exact" and b21.status == "exact":
        n_pairs_ok += 1
        d = b12.value + b21.value
        max_anti = max(max_anti, abs(d))
        if d != 0.0:
            print("  seed", seed, "antisym residual", d)
    b13 = busemann(seed, 0.0, p1, p3, HZ, cache=cache)
    b23 = busemann(seed, 0.0, p2, p3, HZ, cache=cache)
    if all(b.status == "exact" for b in (b12, b23, b13)):
        n_triples_ok += 1
        r = abs(b13.value - b12.value - b23.value)
        max_add = max(max_add, r)
print(f"pairs exact {n_pairs_ok}/{n_tot} triples {n_triples_ok}/{n_tot}")
print(f"max |B12+B21| = {max_anti:.3e}  max additivity = {max_add:.3e}")
print(f"elapsed {time.time()-t0:.1f}s  (per seed {(time.time()-t0)/30:.2f}s)")

print("== global_potential consistency: direct vs unit telescoping, seeds 90..99 ==")
t0 = time.time()
worst = -1.0
n_ok = 0
for seed in range(90, 100):
    cache = FieldCache(seed, 1.0)
    try:
        direct = global_potential(seed, 0.0, 3.0, 0.0, HZ, cache=cache)
    except Exception as e:
        print("  seed", seed, "direct insufficient", type(e).__name__)
        continue
    parts = []
    ok = True
    for k in range(3):
        b = busemann(seed, 0.0, (float(k), 0.0), (float(k + 1), 0.0), HZ, cache=cache)
        if b.status != "exact":
            ok = False
            break
        parts.append(b.value)
    if not ok:
        print("  seed", seed, "telescoping insufficient")
        continue
    n_ok += 1
    worst = max(worst, abs(direct - sum(parts)))
print(f"consistency ok {n_ok}/10 worst {worst:.3e} elapsed {time.time()-t0:.1f}s")

print("== velocity profile: near-empty ==")
hzq = HorizonPolicy(T0=8.0, T_max=32.0, intensity=1e-6, corridor=NARROW)
prof = global_velocity(5, 0.4, 1.0, (-2.0, 2.0), 1e-6, hzq)
print("domains:", len(prof.domains), "u(0.5) =", prof.velocity_at(0.5), "stab", prof.stabilized)

print("== velocity jumps at criterion scale (20 seeds, default-ish horizon) ==")
HZJ = HorizonPolicy(T0=16.0, T_max=512.0, corridor=NARROW)
t0 = time.time()
max_jump = -np.inf
n_unstab = 0
n_bound = 0
n_unrel = 0
for seed in range(300, 320):
    prof = global_velocity(seed, 0.0, 0.0, (-5.0, 5.0), 1e-6, HZJ)
    j = prof.boundary_jumps()
    n_bound += j.size
    n_unrel += sum(1 for d in prof.domains if d.unreliable)
    if not prof.stabilized:
        n_unstab += 1
    if j.size:
        max_jump = max(max_jump, float(j.max()))
print(f"20 seeds: boundaries {n_bound} max jump {max_jump:.3e} unstab {n_unstab} "
      f"unreliable cells {n_unrel} elapsed {time.time()-t0:.1f}s")

print("== profile samples / shear covariance ==")
seed, v, t = 11, 1.2, 0.0
HZS = HorizonPolicy(T0=16.0, T_max=256.0, corridor=NARROW)
pv = global_velocity(seed, v, t, (-3.0, 3.0), 1e-7, HZS)
full = FieldCache(seed, 1.0).covering(Window(-200.0, 200.0, -300.0, 2.0))
sheared = FieldCache.wrapping(shear(full, -v))
p0 = global_velocity(seed, 0.0, t, (-3.0 - v * t, 3.0 - v * t), 1e-7, HZS, cache=sheared)
print("cells:", len(pv.domains), len(p0.domains))
if len(pv.domains) == len(p0.domains):
    gen_match = all(
        (a.generator is None and b.generator is None)
        or (
            a.generator is not None
            and b.generator is not None
            and b.generator.x == a.generator.x - v * a.generator.t
            and b.generator.t == a.generator.t
        )
        for a, b in zip(pv.domains, p0.domains)
    )
    bdiff = np.max(np.abs(pv.boundaries - (p0.boundaries + v * t))) if len(pv.domains) > 1 else 0.0
    xs = np.linspace(-2.9, 2.9, 41)
    udiff = np.max(np.abs(pv.velocity_at(xs) - (v + p0.velocity_at(xs - v * t))))
    print("generators mapped exactly:", gen_match, "boundary diff", bdiff, "u diff", udiff)

print("== measurability in the past (exact) ==")
seed = 17
cacheF = FieldCache(seed, 1.0)
full = cacheF.covering(Window(-100.0, 100.0, -200.0, 2.0))
past = restrict(full, Window(-100.0, 100.0, -200.0, 0.0))
cacheP = FieldCache.wrapping(past)
bF = busemann(seed, 0.0, (-0.5, 0.0), (0.7, 0.0), HZ, cache=cacheF)
bP = busemann(seed, 0.0, (-0.5, 0.0), (0.7, 0.0), HZ, cache=cacheP)
print("values equal bitwise:", bF.value == bP.value, bF.status, bP.status, bF.value)
pF = global_velocity(seed, 0.0, 0.0, (-3.0, 3.0), 1e-7, HZ, cache=cacheF)
pP = global_velocity(seed, 0.0, 0.0, (-3.0, 3.0), 1e-7, HZ, cache=cacheP)
print("profiles equal:", pF.domains == pP.domains)

print("== check_global_solution: trivial empty ==")
hzq2 = HorizonPolicy(T0=8.0, T_max=64.0, intensity=1e-6, corridor=NARROW)
d0 = check_global_solution(3, 0.0, -5.0, 0.0, (-5.0, 5.0), hzq2)
dv = check_global_solution(3, 0.7, -5.0, 0.0, (-5.0, 5.0), hzq2)
print("empty v=0:", d0, " v=0.7:", dv)
print("s == t:", check_global_solution(3, 0.0, 1.0, 1.0, (-5.0, 5.0), hzq2))

print("== check_global_solution: 10 seeds, v=0, tau=5 ==")
HZC = HorizonPolicy(T0=16.0, T_max=256.0, corridor=NARROW)
t0 = time.time()
vals = []
for seed in range(400, 410):
    t1 = time.time()
    try:
        d = check_global_solution(seed, 0.0, -5.0, 0.0, (-5.0, 5.0), HZC)
        vals.append(d)
        print(f"  seed {seed}: {d:.3e}  ({time.time()-t1:.1f}s)")
    except Exception as e:
        print(f"  seed {seed}: skipped {type(e).__name__} ({time.time()-t1:.1f}s)")
print(f"elapsed {time.time()-t0:.1f}s; max {max(vals):.3e}" if vals else "none")

print("== increment autocovariance, 3 seeds ==")
for seed in (1, 2, 3):
    lags, acov = increment_autocovariance(seed, 0.0, 0.0, 30, 20, HZ)
    print(f"  seed {seed}: var {acov[0]:.3f} acov[1] {acov[1]:+.3f} "
          f"acov[5] {acov[5]:+.3f} acov[20] {acov[20]:+.3f}")
