"""Smoke + calibration for experiments.py: correctness spot checks and
per-replica timings to size the acceptance budgets."""
import io
import time

import numpy as np

from poisson_burgers.action_engine import CorridorPolicy
from poisson_burgers.backward_minimizers import HorizonPolicy
from poisson_burgers.experiments import (
    EstimateReport,
    ReplicaPlan,
    attraction_experiment,
    coalescence_statistics,
    concentration_scan,
    dump_report_csv,
    dump_report_json,
    estimate_shape,
    mean_busemann_increment,
    straightness_scan,
)
from poisson_burgers.hopf_lax import PiecewiseLinearPotential

NARROW = CorridorPolicy(half_width_rate=0.3, slack=6.0, max_widenings=8)

print("== plan ==")
plan = ReplicaPlan(1, 6)
print("  seeds:", plan.seeds())

print("== shape t=25 (6 replicas, 5 slopes) ==")
t0 = time.time()
rep = estimate_shape(plan, 25.0, [-1.0, -0.5, 0.0, 0.5, 1.0])
print("  estimates:", [f"{e:.4f}" for e in rep.estimates])
print("  SEs:", [f"{e:.4f}" for e in rep.standard_errors])
print("  extras:", rep.extras)
print(f"  elapsed {time.time()-t0:.1f}s -> {(time.time()-t0)/6:.2f}s/replica")

print("== shape t=100 (2 replicas) ==")
t0 = time.time()
rep100 = estimate_shape(ReplicaPlan(1, 2), 100.0, [-1.0, -0.5, 0.0, 0.5, 1.0])
print("  estimates:", [f"{e:.4f}" for e in rep100.estimates])
print(f"  elapsed {time.time()-t0:.1f}s -> {(time.time()-t0)/2:.2f}s/replica")

print("== determinism across threads (shape t=25) ==")
r1 = estimate_shape(ReplicaPlan(3, 6), 25.0, [0.0, 1.0], threads=1)
r4 = estimate_shape(ReplicaPlan(3, 6), 25.0, [0.0, 1.0], threads=4)
print("  bit-identical:", r1 == r4)

print("== concentration t {25,50,100,200} (3 replicas) ==")
t0 = time.time()
repc = concentration_scan(ReplicaPlan(2, 3), [25.0, 50.0, 100.0, 200.0])
print("  estimates:", [f"{e:.4f}" for e in repc.estimates])
per = (time.time() - t0) / 3
print(f"  elapsed {time.time()-t0:.1f}s -> {per:.2f}s/replica -> 200 replicas ~ {200*per/60:.1f} min")

print("== increment v=0 (20 replicas, T_max=256 NARROW) ==")
HZ7 = HorizonPolicy(T0=16.0, T_max=256.0, corridor=NARROW)
t0 = time.time()
repi = mean_busemann_increment(ReplicaPlan(5, 20), 0.0, HZ7)
print(
    f"  mean {repi.estimates[0]:+.4f} SE {repi.standard_errors[0]:.4f} "
    f"n {repi.replica_counts[0]} skipped {repi.skipped_counts[0]}"
)
per = (time.time() - t0) / 20
print(f"  elapsed {time.time()-t0:.1f}s -> {per:.2f}s/replica -> 520 replicas ~ {520*per/60:.1f} min")

print("== coalescence sep {0,1} (5 replicas, T_max=500 NARROW) ==")
HZ8 = HorizonPolicy(T0=16.0, T_max=500.0, corridor=NARROW)
t0 = time.time()
repk = coalescence_statistics(ReplicaPlan(7, 5), 0.0, [0.0, 1.0], HZ8)
print("  fractions:", repk.estimates, "counts:", repk.replica_counts, "skipped:", repk.skipped_counts)
print("  depths sep1:", [f"{v:.1f}" for v in repk.samples[1]])
per = (time.time() - t0) / 5
print(f"  elapsed {time.time()-t0:.1f}s -> {per:.2f}s/replica -> 200 replicas ~ {200*per/60:.1f} min")

print("== straightness v=0 delta=0.2 T {32,64} (5 replicas, NARROW horizon) ==")
HZS = HorizonPolicy(T0=16.0, T_max=128.0, corridor=NARROW)
t0 = time.time()
reps = straightness_scan(ReplicaPlan(9, 5), 0.0, 0.2, [32.0, 64.0], HZS)
print("  medians:", [f"{e:.3f}" for e in reps.estimates], "n:", reps.replica_counts)
print(f"  elapsed {time.time()-t0:.1f}s")

print("== attraction W=0 v=0, s {-31.25,-62.5} region 5 (2 replicas, lean corridor) ==")
LEAN = CorridorPolicy(half_width_rate=0.15, slack=8.0, max_widenings=8)
HZA = HorizonPolicy(T0=16.0, T_max=256.0, corridor=LEAN)
W0 = PiecewiseLinearPotential(0.0, 0.0, np.empty(0), np.array([0.0]))
t0 = time.time()
repa = attraction_experiment(ReplicaPlan(11, 2), W0, 0.0, [-31.25, -62.5], 5.0, HZA)
print("  agreement:", repa.estimates, "n:", repa.replica_counts)
print("  extras:", repa.extras)
print(f"  elapsed {time.time()-t0:.1f}s -> {(time.time()-t0)/2:.2f}s/replica (2 rungs)")

print("== attraction deep rung timing: s=-500, 1 replica ==")
t0 = time.time()
repa5 = attraction_experiment(ReplicaPlan(11, 1), W0, 0.0, [-500.0], 5.0, HZA)
print("  agreement:", repa5.estimates, "extras:", repa5.extras)
print(f"  elapsed {time.time()-t0:.1f}s/replica at s=-500")

print("== writers ==")
buf = io.StringIO()
dump_report_csv(repk, buf)
print("  csv head:", buf.getvalue().splitlines()[:3])
buf2 = io.StringIO()
dump_report_json(repk, buf2)
print("  json bytes:", len(buf2.getvalue()))
print("done")
