"""
Certifying a LASSO fit in fixed point
=====================================

The surrogate behind every explanation is a weighted LASSO. Instead of
trusting the solver, the checker recomputes the primal and dual objectives
in exact integer arithmetic and accepts if their gap is below epsilon.
"""

import numpy as np

from expproof import LimeConfig
from expproof.lasso import certify_lasso, duality_gap, dual_correlations, weighted_design
from expproof.lime import build_neighborhood
from expproof.model import synthesize_model
from expproof.numeric import quantize_array, quantize_raw

cfg = LimeConfig()
S = cfg.scale
model = synthesize_model({"kind": "forest", "n_features": 14, "n_trees": 5, "max_depth": 4}, seed=1)
rng = np.random.default_rng(0)

# a neighborhood of 300 points, labelled by the model and weighted by the exp
# kernel; keep drawing inputs until both labels show up in it
while True:
    x = quantize_array(rng.normal(size=14), S)
    nb = build_neighborhood(x, cfg, rng.integers(0, 1 << cfg.b, size=cfg.n * 14), model)
    if 30 <= nb.y.sum() <= 270:
        break
print("labels in the neighborhood:", np.bincount(nb.y, minlength=2))

# kernel weights fold into the data: X = sqrt(pi) z, y' = sqrt(pi) y
X, yp = weighted_design(nb.z, nb.y * S, nb.pi, S)
sol = certify_lasso(X, yp, cfg.alpha, cfg.epsilon, S)

print("\nprimal p  =", sol.primal / S)
print("dual d    =", sol.dual / S)
print("gap p - d =", sol.gap / S, "  (epsilon", cfg.epsilon, ")")

# dual feasibility is an integer comparison, no tolerance involved
corr = np.abs(np.asarray(dual_correlations(X, sol.v_hat), dtype=float)) / S**2
print("\nmax |X^T v| =", corr.max(), " alpha =", cfg.alpha)

# a worse primal point cannot hide behind the same dual point
w_bad = sol.w_hat.copy()
w_bad[int(np.argmax(np.abs(w_bad)))] //= 2
_, _, gap_bad = duality_gap(X, yp, sol.intercept, w_bad, sol.v_hat, quantize_raw(cfg.alpha, S), S)
print("gap after halving the largest weight:", gap_bad / S)
