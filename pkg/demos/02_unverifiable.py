"""
When every explanation is unique
================================

Two explainers over the same model: one gives an honest explanation, the
other a useless one.  Their true consistency differs (1.0 against 0.5),
but with continuous keys no key ever repeats and the estimator sees nothing.
"""

# %%
from faithcheck import estimate_global, uniqueness
from faithcheck.harness import balanced_pair_world, make_rng

finite = balanced_pair_world(domain_size=20)
print("finite truths:", {k: round(v["m_c"], 3) for k, v in finite.ground_truth.items()})

# %%
traces = finite.sample(5000, make_rng(1))
for name, t in traces.items():
    print(name, "estimate", round(estimate_global(t).estimate, 3), "uniqueness", uniqueness(t))

# %%
# The continuous version has the same truths but every key is fresh.
continuous = balanced_pair_world()
for name, t in continuous.sample(10_000, make_rng(1)).items():
    rep = estimate_global(t)
    print(name, "estimate", rep.estimate, "uniqueness", rep.uniqueness)
