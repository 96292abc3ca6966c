"""
Anchors at increasing precision thresholds
==========================================

An anchor must reach a precision threshold on a search sample.  Raising the
threshold forces longer rules, which makes explanations more specific and
rarer.
"""

# %%
from faithcheck.harness import sweep_threshold, tree_world

world = tree_world(16, seed=0, dim=4)
res = sweep_threshold(world, [0.5, 0.7, 0.9, 0.95], search_sample_size=1000,
                      eval_size=150, seed=0)

# %%
suff = res["sufficiency"]
print(f"{'tau':>5} {'sufficiency':>12} {'uniqueness':>11}")
for row in suff.rows:
    print(f"{row.param:5.2f} {row.mean:12.3f} {row.uniqueness:11.3f}")

# %%
anchors = suff.details["anchors"]
for tau in (0.5, 0.95):
    lengths = [len(a.rule.bounds) for a in anchors[tau]]
    print(f"tau={tau}: mean anchor length {sum(lengths) / len(lengths):.2f}")
