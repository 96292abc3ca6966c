"""
Coarsening feature importances
==============================

Raw importance vectors are almost never repeated, so their consistency
cannot be estimated.  Coarser discretizers trade detail for repeats.
"""

# %%
import numpy as np

from faithcheck import ExplanationPayload, Instance, Trace, TraceRecord, estimate_global
from faithcheck import discretize_trace, uniqueness
from faithcheck.harness import make_rng

rng = make_rng(0)
schema = ("f0", "f1", "f2", "f3")
X = rng.normal(size=(5000, 4))
w = np.array([1.5, -1.0, 0.3, 0.0])
phi = X * w
labels = np.where(X @ w > 0, "1", "0")
trace = Trace(schema, [TraceRecord(Instance(f"r{i}", tuple(map(float, X[i])), schema), labels[i],
                                   ExplanationPayload.from_importance(phi[i]))
                       for i in range(len(X))])

# %%
print(f"{'method':>14} {'uniq':>6} {'consistency':>12}")
for method in ("original", "fp:2", "fp:1", "rank", "sign-of-top:2", "sign"):
    t = discretize_trace(trace, method)
    print(f"{method:>14} {uniqueness(t):6.3f} {estimate_global(t).estimate:12.3f}")
