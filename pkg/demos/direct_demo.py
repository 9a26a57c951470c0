"""DIRECT (DIviding RECTangles) on a shifted sphere, trace included.

The optimizer never sees gradients -- it only samples the function -- which
is exactly what a piecewise-constant pipeline loss requires.
"""

import numpy as np

from co_pipeline import learning

target = np.array([0.3, -1.2, 0.8])


def sphere(w):
    return float(np.sum((w - target) ** 2))


res = learning.direct_minimize(sphere, bounds=[(-2.0, 2.0)] * 3, budget=500)
print("best point:", np.round(res.w, 4))
print("best value:", res.value)
print("function evaluations:", res.n_evals)

# The incumbent trace is non-increasing; print every 25th entry.
print("\ntrace (every 25 evals):")
for i in range(0, len(res.trace), 25):
    print(f"  eval {i:4d}   best {res.trace[i]:.6f}")

# Budget controls accuracy: rerun with more samples.
for budget in (50, 200, 1000, 4000):
    r = learning.direct_minimize(sphere, bounds=[(-2.0, 2.0)] * 3, budget=budget)
    print(f"budget {budget:5d} -> value {r.value:.2e}")
