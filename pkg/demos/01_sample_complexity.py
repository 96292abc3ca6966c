"""
How many samples does the consistency estimate need?
=====================================================

We sample traces from a clean 64-leaf tree world, where every leaf is pure
and the true consistency is exactly 1, and watch the estimate climb as the
trace grows.
"""

# %%
from faithcheck import sample_size_for_epsilon
from faithcheck.harness import first_reaching, sweep_samples, tree_world

world = tree_world(64, seed=5)
print("ground truth:", world.ground_truth["tree"])

# %%
# A record only scores once another record shares its leaf, so small traces
# are dragged toward zero by singletons.
grid = [10, 30, 100, 300, 1000]
res = sweep_samples(world, grid, repetitions=20, measures=("consistency",))["consistency"]
print(f"{'n':>6} {'mean':>7} {'std':>7} {'uniq':>6}")
for row in res.rows:
    print(f"{row.param:6.0f} {row.mean:7.3f} {row.std:7.3f} {row.uniqueness:6.3f}")

# %%
print("first n with mean >= 0.9:", first_reaching(res, 0.9))
# The distribution-free sizes below hold for any 64-key world, so they sit
# far above what this easy world needs.
for eps in (0.2, 0.1, 0.05):
    print(f"worst-case size for eps={eps}: {sample_size_for_epsilon(64, eps)}")
