"""Screening and combining forecasts.

The confidence set decides which models are worth combining; the
combinations then weight survivors equally, by inverse past RMSE, or by
exponentially discounted cumulative loss. A second exponential layer
hedges over the learning rate.

    python demos/02_combinations.py
"""

import numpy as np

from nowcast.combine import DEFAULT_ETA_GRID, combine_ewa, combine_meta_ewa, combine_sa, combine_wa, mcs
from nowcast.evaluate import metrics

rng = np.random.default_rng(7)
N = 26
y = rng.normal(1.0, 2.0, size=N)

# Four forecasters of differing skill, and one that is badly biased.
noise = np.array([0.6, 0.8, 1.0, 1.2, 1.0])
F = y[:, None] + rng.normal(size=(N, 5)) * noise
F[:, 4] += 4.0
names = ["sharp", "good", "fair", "noisy", "biased"]

res = mcs((F - y[:, None]) ** 2, names, alpha=0.10, n_boot=5000, seed=42)
print("MCS p-values:", {k: round(v, 3) for k, v in res.pvalues.items()})
print("survivors:", res.survivors)

keep = [names.index(m) for m in res.survivors]
Fs = F[:, keep]

sa, _ = combine_sa(Fs, res.survivors)
wa, wa_w = combine_wa(Fs, y, res.survivors)
ewa, ewa_w = combine_ewa(Fs, y, 0.1, res.survivors)
meta = combine_meta_ewa(Fs, y, DEFAULT_ETA_GRID, 1.0, res.survivors)

print("\nRMSFE")
for label, f in [("best single", F[:, 0]), ("SA", sa), ("WA", wa), ("EWA", ewa), ("Meta-EWA", meta.combined)]:
    print(f"  {label:<12} {metrics(f, y).rmsfe:.3f}")

# Weights only use errors up to the previous quarter, so row 0 is flat.
print("\nWA weights, first and last quarter")
print("  ", np.round(wa_w.weights[0], 3), "->", np.round(wa_w.weights[-1], 3))
print("dominant model each year-end under EWA:",
      [ewa_w.dominant(t) for t in range(3, N, 4)])
print("meta weight on each eta at the end:",
      {eta: round(float(w), 3) for eta, w in zip(meta.grid, meta.meta_weights[-1])})
