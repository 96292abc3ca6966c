from faithcheck.harness.populations import split_populations
from faithcheck.harness.sweeps import (
    MEASURES,
    SweepResult,
    SweepRow,
    anchor_traces,
    first_reaching,
    sweep_samples,
    sweep_threshold,
)
from faithcheck.harness.worlds import (
    World,
    WorldSpec,
    balanced_pair_world,
    generate_world,
    label_purity_world,
    make_rng,
    population_truth,
    sample_codes,
    sample_system,
    system_records,
    tree_world,
    xor_world,
)

__all__ = [
    "MEASURES", "SweepResult", "SweepRow", "World", "WorldSpec", "anchor_traces",
    "balanced_pair_world", "first_reaching", "generate_world", "label_purity_world", "make_rng",
    "population_truth", "sample_codes", "sample_system", "split_populations", "sweep_samples",
    "sweep_threshold", "system_records", "tree_world", "xor_world",
]
