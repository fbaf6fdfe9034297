"""Counter-based hashing RNG.

All randomness in the package flows through `cell_uniform`: a pure function
of (seed, cell i, cell j, counter) built from the 64-bit murmur3 finalizer.
Because every draw is addressed rather than sequential, any window over the
plane regenerates the same points in its cells regardless of which other
cells are generated alongside it, and regardless of evaluation order or
parallelism.
"""

from __future__ import annotations

import numpy as np

_U64 = np.uint64

_MIX_1 = _U64(0xFF51AFD7ED558CCD)
_MIX_2 = _U64(0xC4CEB9FE1A85EC53)
_SHIFT = _U64(33)

# distinct absorption constants so (i, j, ctr) enter the state asymmetrically
_PHI_SEED = _U64(0x9E3779B97F4A7C15)
_PHI_I = _U64(0xBF58476D1CE4E5B9)
_PHI_J = _U64(0x94D049BB133111EB)
_PHI_CTR = _U64(0xD6E8FEB86659FD93)

_INV_2_53 = np.float64(1.0 / (1 << 53))


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _SHIFT)) * _MIX_1
    z = (z ^ (z >> _SHIFT)) * _MIX_2
    return z ^ (z >> _SHIFT)


def cell_hash(seed: int, i, j, ctr) -> np.ndarray:
    """64-bit hash of (seed, i, j, ctr); accepts scalars or arrays."""
    with np.errstate(over="ignore"):
        i = np.asarray(i, dtype=np.int64).astype(_U64)
        j = np.asarray(j, dtype=np.int64).astype(_U64)
        ctr = np.asarray(ctr, dtype=np.int64).astype(_U64)
        h = _mix64(_U64(seed & 0xFFFFFFFFFFFFFFFF) ^ _PHI_SEED)
        h = _mix64(h ^ (i + _PHI_I))
        h = _mix64(h ^ (j + _PHI_J))
        h = _mix64(h ^ (ctr + _PHI_CTR))
    return h


def cell_uniform(seed: int, i, j, ctr) -> np.ndarray:
    """Uniform draw in [0, 1) addressed by (seed, i, j, ctr)."""
    return (cell_hash(seed, i, j, ctr) >> _U64(11)).astype(np.float64) * _INV_2_53


def derive_seed(master_seed: int, index: int) -> int:
    """Per-replica seed, a pure function of (master_seed, index)."""
    return int(cell_hash(master_seed, index, 0x5EED, 0))


def poisson_icdf(u: np.ndarray, lam: float) -> np.ndarray:
    """Poisson count by CDF inversion from a single uniform per entry.

    Exact given u: count = min k with CDF(k) > u. The scan is capped well
    past any mass representable in float64.
    """
    u = np.asarray(u, dtype=np.float64)
    counts = np.zeros(u.shape, dtype=np.int64)
    if lam <= 0.0:
        return counts
    pmf = np.exp(-lam)
    cdf = pmf
    k = 0
    cap = int(lam + 12.0 * np.sqrt(lam) + 40.0)
    remaining = u >= cdf
    while remaining.any() and k < cap:
        k += 1
        pmf *= lam / k
        cdf += pmf
        counts[remaining] = k
        remaining = u >= cdf
    return counts
