import numpy as np
from poisson_burgers.action_engine import CorridorPolicy
from poisson_burgers.backward_minimizers import FieldCache, HorizonPolicy, _deep_slice

NARROW = CorridorPolicy(half_width_rate=0.3, slack=6.0, max_widenings=8)

def audit(sl):
    xs, vals = sl.dense_samples(1e-7)
    sub = np.unique(np.concatenate([xs[:: max(1, xs.shape[0] // 4000)], xs[-1:]]))
    ref = sl.query(sub)[0]
    exact = vals[np.searchsorted(xs, sub)]
    rng = np.random.default_rng(0)
    i = rng.integers(0, xs.shape[0] - 1, size=3000)
    w = rng.uniform(0.0, 1.0, size=3000)
    mid = np.sort(xs[i] * (1 - w) + xs[i + 1] * w)
    lin = np.interp(mid, xs, vals)
    true = sl.query(mid)[0]
    return (xs.shape[0], np.max(np.abs(exact - ref)), bool(np.all(np.diff(xs) > 0)),
            np.max(lin - true), np.min(lin - true))

for seed, T_max, lo, hi in [(7, 64.0, -3.0, 3.0), (11, 128.0, -10.0, 2.0),
                            (1, 32.0, 0.0, 1.0), (3, 256.0, -23.0, 23.0)]:
    hz = HorizonPolicy(T0=16.0, T_max=T_max, corridor=NARROW)
    n, dq, inc, dmax, dmin = _deep_slice(
        FieldCache(seed, 1.0), 0.0, 0.0, lo, hi, hz, audit,
        track_values=True, require_keys=False)
    print(f"seed {seed} T={T_max}: nodes {n}  max|dense-query| {dq:.3e}  "
          f"increasing {inc}  defect [{dmin:.2e}, {dmax:.2e}]")

hzq = HorizonPolicy(T0=8.0, T_max=32.0, intensity=1e-6, corridor=NARROW)
def audit_empty(sl):
    xs, vals = sl.dense_samples(1e-7)
    ref = sl.query(xs)[0]
    return xs, np.max(np.abs(vals - ref))
xs, d = _deep_slice(FieldCache(5, 1e-6), 0.4, 1.0, -2.0, 2.0, hzq, audit_empty,
                    track_values=True, require_keys=False)
print("empty corridor nodes:", xs, " max|dense-query|", d)
