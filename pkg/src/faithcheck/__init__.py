"""Consistency and sufficiency of explanation systems, exact and estimated."""

from faithcheck.core import (
    ExplanationKey,
    ExplanationPayload,
    FeatureTable,
    Instance,
    Trace,
    TraceError,
    TraceRecord,
    canonical_key,
    dumps_trace,
    load_trace,
    loads_trace,
    write_trace,
)
from faithcheck.discretizers import (
    DiscretizerSpec,
    discretize_counterfactual,
    discretize_importance,
    discretize_trace,
)
from faithcheck.estimators import (
    BoundDiagnostics,
    ConfigurationError,
    FaithfulnessReport,
    LocalEstimate,
    Relation,
    bias_bound,
    estimate_global,
    estimate_local,
    expected_estimate,
    mse_bound,
    oracle_bounds,
    sample_size_for_epsilon,
    uniqueness,
)
from faithcheck.oracle import (
    DecoderReport,
    FiniteSystem,
    SystemPoint,
    decoder_report,
    exact_global_consistency,
    exact_global_sufficiency,
    exact_local_consistency,
    exact_local_sufficiency,
    tree_consistency_via_gini,
)
from faithcheck.rules import Bound, Hyperrectangle, OpenBall, ScopedRule, TokenSubset

__version__ = "0.1.0"
