"""Shared test helpers: random partitioned distributions and the
constraint-preserving tilt used to probe canonical maximality."""

import numpy as np

from enslab.probcore import PartitionedDistribution


def random_partition(rng, max_states=10_000, max_blocks=30) -> PartitionedDistribution:
    """Random block structure with occasional exact-zero entries and blocks."""
    n_blocks = int(rng.integers(1, max_blocks + 1))
    cap = max(2, max_states // n_blocks)
    sizes = rng.integers(1, cap + 1, size=n_blocks)
    blocks = []
    weights = []
    for b, size in enumerate(sizes):
        w = rng.random(int(size))
        if rng.random() < 0.2:  # sprinkle exact zeros
            w *= rng.random(int(size)) > 0.3
        if n_blocks > 1 and rng.random() < 0.1:  # occasional zero-mass block
            w[:] = 0.0
        weights.append(w)
    total = sum(float(w.sum()) for w in weights)
    if total == 0.0:
        weights[0] = np.ones_like(weights[0])
        total = float(weights[0].sum())
    for b, w in enumerate(weights):
        blocks.append((f"b{b}", w / total))
    return PartitionedDistribution(tuple(blocks))


def tilt_rows_to_mean(rows, energies, target, iters=200):
    """Exponentially tilt each positive row of ``rows`` to the target mean.

    Returns rows q'_k proportional to q_k * exp(-lam * E_k) with lam chosen
    per row by bisection so that sum q' E = target. The tilt keeps entries
    positive and rows normalized, so it is a projection onto the
    fixed-mean-energy constraint set.
    """
    q = np.asarray(rows, dtype=float)
    e = np.asarray(energies, dtype=float)
    span = float(e.max() - e.min())
    lo = np.full(q.shape[0], -2000.0 / span)
    hi = np.full(q.shape[0], 2000.0 / span)

    def mean_at(lam):
        x = -lam[:, None] * e[None, :]
        w = q * np.exp(x - x.max(axis=1, keepdims=True))
        return (w @ e) / w.sum(axis=1)

    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        too_high = mean_at(mid) > target
        lo = np.where(too_high, mid, lo)
        hi = np.where(too_high, hi, mid)
    lam = 0.5 * (lo + hi)
    x = -lam[:, None] * e[None, :]
    w = q * np.exp(x - x.max(axis=1, keepdims=True))
    return w / w.sum(axis=1, keepdims=True)
