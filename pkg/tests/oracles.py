"""Independent brute-force references used by the tests.

Nothing here imports the package's algorithms; paths are described by plain
lists (initial value, [(time, size), ...], drift) and evaluated directly.
"""
from __future__ import annotations

import numpy as np


def step_value(initial, jumps, t, drift=0.0):
    """Right-continuous value of a scalar step path plus linear drift."""
    return initial + sum(h for s, h in jumps if s <= t) + drift * t


def step_vector(initial, jumps, t):
    out = np.array(initial, dtype=float)
    for s, h in jumps:
        if s <= t:
            out = out + np.asarray(h, dtype=float)
    return out


def grid_inverse(fn, level, horizon, grid):
    """sup{s in grid : fn(s) <= level}; None if the set is empty."""
    ok = [s for s in grid if fn(s) <= level]
    return max(ok) if ok else None


def grid_modulus_J(fn, c, T, T2, grid):
    """Triple loop over grid points; fn returns a vector."""
    vals = {s: np.atleast_1d(fn(s)) for s in grid}
    best = 0.0
    for t in grid:
        if not T <= t <= T2:
            continue
        left = [s for s in grid if max(T, t - c) <= s <= t]
        right = [s for s in grid if t <= s <= min(T2, t + c)]
        dl = max(float(np.linalg.norm(vals[s] - vals[t])) for s in left)
        dr = max(float(np.linalg.norm(vals[s] - vals[t])) for s in right)
        best = max(best, min(dl, dr))
    return best


def grid_modulus_U(fn, c, T, T2, grid):
    pts = [s for s in grid if T <= s <= T2]
    vals = {s: np.atleast_1d(fn(s)) for s in pts}
    best = 0.0
    for i, a in enumerate(pts):
        for b in pts[i:]:
            if b - a <= c:
                best = max(best, float(np.linalg.norm(vals[b] - vals[a])))
    return best


def renewal_count(x, t):
    """max{k >= 0 : x_1 + ... + x_k <= t} by a plain loop."""
    total, k = 0.0, 0
    for v in x:
        if total + v > t:
            break
        total += v
        k += 1
    return k


def pareto_sf(x, alpha):
    x = np.asarray(x, dtype=float)
    return np.where(x < 1.0, 1.0, np.maximum(x, 1.0) ** -alpha)


def step_values_on_grid(initial, times, sizes, grid):
    """Scalar step path on a whole grid by broadcasting: initial + sum of sizes with time <= s."""
    times = np.asarray(times, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    grid = np.asarray(grid, dtype=float)
    return initial + (grid[:, None] >= times[None, :]).astype(float) @ sizes
