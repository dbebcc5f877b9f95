"""
How second-stage scores turn into first-stage sample weights
============================================================

Positives the second stage likes get heavier; negatives it would reject
anyway get lighter, so the first stage stops spending capacity on them.
"""
import numpy as np

from cascadeforge.weighting import WeightParams, compute_weights

np.set_printoptions(suppress=True)
scores = np.linspace(0, 1, 11)

print("== sharp curves (t = 0.1) ==")
p = WeightParams(t_pos=0.1, t_neg=0.1, w_neg_min=0.2, w_max=1.8)
print("score     ", np.round(scores, 2))
print("positive w", np.round(compute_weights(scores, np.ones(11, int), p), 3))
print("negative w", np.round(compute_weights(scores, np.zeros(11, int), p), 3))

print("\n== flat curves: every weight is ~1 ==")
flat = WeightParams.uniform()
w = compute_weights(np.concatenate([scores, scores]), np.repeat([0, 1], 11), flat)
print("max |w - 1| =", np.abs(w - 1).max())

print("\n== the cap ==")
capped = WeightParams(t_pos=0.05, t_neg=0.05, w_neg_min=0.5, w_max=1.2)
print("positive w", np.round(compute_weights(scores, np.ones(11, int), capped), 3))
