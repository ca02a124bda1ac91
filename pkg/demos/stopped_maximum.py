"""Stopped claim maximum in the insurance pair model.

Claims arrive after unit-mean exponential waits and carry Pareto(2.5) sizes.
The largest claim seen up to the renewal stopping time tau(1) is compared
with its Frechet limit for shrinking scales, and the KS distance is printed
for each array size.
"""
import numpy as np

from maxsum.diagnostics import SweepResult, ks_distance, ks_se, prelimit_stopped
from maxsum.limit_sampler import HybridSampleConfig, stopped_limit_batch
from maxsum.presets import get_preset
from maxsum.triangular_array import child_rng

SEED = 7
SAMPLES = 10000

model, chars = get_preset("example2").make()
limit = stopped_limit_batch(HybridSampleConfig(chars, 2.0), [1.0], SAMPLES, child_rng(SEED, 0, 0))[:, 0, 0]

eps_grid = [1e-2, 1e-3, 1e-4]
dists = []
for j, eps in enumerate(eps_grid):
    pre = prelimit_stopped(model, eps, 1.0, SAMPLES, child_rng(SEED, 0, j + 1))[:, 0]
    dists.append(ks_distance(pre, limit))
    print(f"n = {model.n(eps):>6d}  median prelimit {np.median(pre):.3f}  "
          f"median limit {np.median(limit):.3f}  KS {dists[-1]:.4f}")

res = SweepResult(eps_grid, [model.n(e) for e in eps_grid], dists, [ks_se(SAMPLES, SAMPLES)] * 3, 0.03)
print("verdict:", res.verdict())
