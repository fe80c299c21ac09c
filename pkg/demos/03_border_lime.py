"""
BorderLIME and prediction similarity
====================================

Far from the decision boundary every neighborhood point gets the same
label and plain LIME has nothing to fit. BorderLIME first walks along a few
random rays to the nearest point with the other label and explains there.
"""

import numpy as np

from expproof import LimeConfig
from expproof.fidelity import eval_fidelity, make_dataset, results_table, timing_report
from expproof.lime import border_steps, find_opposite_point, unit_steps
from expproof.model import linear_model, synthesize_model
from expproof.numeric import quantize_array

S = 10_000

# the line search on f(x) = 1[x0 > 0], starting at x0 = -0.45 with steps of 0.1
f = linear_model([1.0, 0.0])
cfg = LimeConfig(delta=0.1, m=1)
x = quantize_array([-0.45, 0.2], S)
step = unit_steps(np.array([[S, 0]]), cfg)
print("border point:", find_opposite_point(x, f, cfg, step) / S)

# with random directions the walk still lands within one step of the boundary
cfg = LimeConfig(m=5)
steps = border_steps(np.random.default_rng(0).integers(0, 1 << 16, size=10), 2, cfg)
print("from 5 random rays:", find_opposite_point(x, f, cfg, steps) / S)

# fidelity of all eight variants on a synthetic 14-feature task
ds = make_dataset("adult", rows=400, seed=0)
model = synthesize_model({"kind": "mlp", "sizes": [14, 16, 16, 2]}, seed=3)
inputs = ds.X[:8]
timings = []
results = eval_fidelity(model, inputs, eval_n=500, timings=timings)
print()
print(results_table(results))

print("\nper-phase seconds, first three runs:")
print(timing_report(timings[:3]), end="")
