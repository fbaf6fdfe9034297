"""Measure inter-rung increment drift on integer grids to see why the
autocovariance stability gate fails: real unmerged trees vs tolerance."""
import time

import numpy as np

from poisson_burgers.action_engine import CorridorPolicy
from poisson_burgers.backward_minimizers import (
    FieldCache,
    HorizonPolicy,
    _deep_slice,
)

NARROW = CorridorPolicy(half_width_rate=0.3, slack=6.0, max_widenings=8)


def rung_values(seed, hw, T):
    cache = FieldCache(seed, 1.0)
    xs = np.arange(-hw, hw + 1, dtype=np.float64)
    hz = HorizonPolicy(T0=float(T), T_max=float(T), corridor=NARROW)

    def grab(sl):
        return sl.query(xs)[0]

    return _deep_slice(cache, 0.0, 0.0, xs[0], xs[-1], hz, grab,
                       track_values=True, require_keys=False)


for seed in (1, 2):
    for hw in (12, 30):
        prev = None
        print(f"seed {seed} hw {hw}:")
        for T in (16, 32, 64, 128, 256, 512):
            t0 = time.time()
            vals = rung_values(seed, hw, T)
            inc = np.diff(vals)
            if prev is not None:
                d = np.abs(inc - prev)
                big = int((d > 1e-9).sum())
                print(
                    f"  T {T:4d}: max|dinc| {d.max():.3e} n>(1e-9) {big:3d}"
                    f" worst at k={np.argmax(d)-hw} ({time.time()-t0:.1f}s)"
                )
            prev = inc
print("done")
