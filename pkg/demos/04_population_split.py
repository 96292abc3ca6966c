"""
One explainer, two populations
==============================

The same explainer can look better or worse depending on who is being
explained.  We split a trace so that population 1 is rich in the label with
pure explanations and population 2 is rich in the mixed ones.
"""

# %%
from faithcheck import estimate_global
from faithcheck.harness import label_purity_world, make_rng, population_truth, split_populations

world = label_purity_world(seed=0)
trace = world.sample(20_000, make_rng(0))["purity"]
print("overall:", round(estimate_global(trace).estimate, 3),
      "truth", round(world.ground_truth["purity"]["m_c"], 3))

# %%
for p in (0.5, 0.75, 0.9):
    one, two = split_populations(trace, "pos", p, seed=1)
    t1, t2 = population_truth(world, p)
    print(f"p={p}: pop1 {estimate_global(one).estimate:.3f} (truth {t1:.3f})  "
          f"pop2 {estimate_global(two).estimate:.3f} (truth {t2:.3f})")
