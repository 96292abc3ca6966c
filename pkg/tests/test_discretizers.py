import pytest
from hypothesis import given
from hypothesis import strategies as st

from faithcheck import (
    DiscretizerSpec,
    ExplanationPayload,
    Instance,
    Trace,
    TraceRecord,
    canonical_key,
    discretize_counterfactual,
    discretize_importance,
    discretize_trace,
    uniqueness,
)
from faithcheck.discretizers import transform_counterfactual, transform_importance
from faithcheck.harness import make_rng

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vectors = st.lists(finite, min_size=1, max_size=8)


def imp_key(vec):
    return canonical_key(ExplanationPayload.from_importance(vec))


class TestImportance:
    def test_floor_one_digit(self):
        assert transform_importance((0.447, -0.123), "fp:1") == (0.4, -0.2)
        assert discretize_importance((0.447, -0.123), "fp:1") == imp_key((0.4, -0.2))

    def test_floor_two_digits(self):
        assert transform_importance((0.447, -0.123, 0.29), "fp:2") == (0.44, -0.13, 0.29)

    def test_sign(self):
        assert transform_importance((0.447, -0.123, 0.0), "sign") == (1, -1, 0)

    def test_rank_stable(self):
        assert transform_importance((0.3, -1.0, 0.3, 0.0), "rank") == (1, 3, 0, 2)

    def test_sign_of_top(self):
        phi = (0.9, -0.8, 0.05, -0.04, 0.3, 0.2)
        assert transform_importance(phi, "sign-of-top:5") == (1, -1, 1, 0, 1, 1)
        # ties on |phi| go to the lower index
        assert transform_importance((0.5, -0.5, 0.5), "sign-of-top:2") == (1, -1, 0)

    def test_original_is_canonical_key(self):
        phi = (0.1 + 0.2, -3.0)
        assert discretize_importance(phi, "original") == imp_key(phi)

    def test_non_finite(self):
        with pytest.raises(ValueError):
            discretize_importance((float("inf"),), "sign")

    @given(vectors)
    def test_fp_chain(self, phi):
        two = transform_importance(phi, "fp:2")
        assert transform_importance(two, "fp:1") == transform_importance(phi, "fp:1")
        assert transform_importance(two, "fp:2") == two

    @given(vectors)
    def test_sign_idempotent(self, phi):
        s = transform_importance(phi, "sign")
        assert transform_importance(s, "sign") == s

    def test_grid_values(self):
        # binary floats just below a decimal grid point must not drop a step
        for v in (0.29, 0.57, 1.13, -0.07, 2.68):
            assert transform_importance((v,), "fp:2") == (v,)
        assert transform_importance((2.675,), "fp:2") == (2.67,)


class TestCounterfactual:
    def test_examples(self):
        assert transform_counterfactual((1, 2), (1, 5), "delta") == (0.0, 3.0)
        assert transform_counterfactual((1, 2), (1, 5), "delta-sign") == (0, 1)
        assert transform_counterfactual((1, 2), (1, 5), "is-feature-modified") == (1, 0)

    def test_unchanged(self):
        assert transform_counterfactual((1, 2), (1, 2), "delta") == (0.0, 0.0)
        assert transform_counterfactual((1, 2), (1, 2), "is-feature-modified") == (1, 1)

    def test_negative_move(self):
        assert transform_counterfactual((2,), (0,), "delta-sign") == (-1,)

    def test_keys(self):
        key = discretize_counterfactual((1, 2), (1, 5), "delta")
        assert key == canonical_key(ExplanationPayload.from_counterfactual((0, 3)))

    def test_errors(self):
        with pytest.raises(ValueError):
            transform_counterfactual((1, 2), (1,), "delta")
        with pytest.raises(ValueError):
            transform_counterfactual((1, "a"), (1, "b"), "delta")


class TestParsing:
    @pytest.mark.parametrize("text", ["original", "fp:2", "sign", "rank", "sign-of-top:5",
                                      "delta", "delta-sign", "is-feature-modified"])
    def test_parse_round_trip(self, text):
        assert str(DiscretizerSpec.parse(text)) == text

    @pytest.mark.parametrize("text", ["fp", "fp:0", "sign:2", "sign-of-top", "median"])
    def test_invalid(self, text):
        with pytest.raises(ValueError):
            DiscretizerSpec.parse(text)

    def test_family_mismatch(self):
        with pytest.raises(ValueError):
            DiscretizerSpec("counterfactual", "rank")


def importance_trace(n, seed=0, d=4):
    rng = make_rng(seed)
    schema = tuple(f"f{j}" for j in range(d))
    X = rng.normal(size=(n, d))
    phi = X * rng.normal(size=d)
    return Trace(schema, [TraceRecord(Instance(f"r{i}", tuple(map(float, X[i])), schema),
                                      "1" if X[i, 0] > 0 else "0",
                                      ExplanationPayload.from_importance(phi[i]))
                          for i in range(n)])


class TestTrace:
    def test_original_unique(self):
        t = discretize_trace(importance_trace(300), "original")
        assert uniqueness(t) == 1.0

    def test_fp1_after_fp2(self):
        t = importance_trace(500)
        direct = discretize_trace(t, "fp:1")
        via = [discretize_importance(transform_importance(r.explanation.importance, "fp:2"), "fp:1")
               for r in t]
        assert direct.keys == via

    def test_preserves_everything_but_keys(self):
        t = importance_trace(200)
        for method in ("fp:1", "sign", "rank", "sign-of-top:2"):
            d = discretize_trace(t, method)
            assert len(d) == len(t) and d.labels == t.labels
            assert [r.instance for r in d] == [r.instance for r in t]
            assert [r.explanation.importance for r in d] == [r.explanation.importance for r in t]
            assert d.provenance["discretizer"] == method
        assert t.provenance == {}

    def test_uniqueness_chain(self):
        t = importance_trace(2000, seed=3)
        u = [uniqueness(discretize_trace(t, m)) for m in ("original", "fp:2", "fp:1", "sign")]
        assert u == sorted(u, reverse=True)

    def test_empty(self):
        assert len(discretize_trace(Trace(("a",)), "sign")) == 0

    def test_kind_mismatch(self):
        schema = ("a",)
        t = Trace(schema, [TraceRecord(Instance("x", (1.0,), schema), "1",
                                       ExplanationPayload.opaque("k"))])
        with pytest.raises(ValueError, match="record 0"):
            discretize_trace(t, "sign")

    def test_counterfactual_trace(self):
        schema = ("a", "b")
        t = Trace(schema, [
            TraceRecord(Instance("x", (1.0, 2.0), schema), "1",
                        ExplanationPayload.from_counterfactual((1.0, 3.0))),
            TraceRecord(Instance("y", (5.0, 0.0), schema), "1",
                        ExplanationPayload.from_counterfactual((5.0, 9.0))),
        ])
        d = discretize_trace(t, "delta-sign")
        assert d.keys[0] == d.keys[1]
        assert uniqueness(d) == 0.0


@given(st.lists(st.lists(finite, min_size=3, max_size=3), min_size=1, max_size=30))
def test_coarsening_never_raises_uniqueness(rows):
    schema = ("a", "b", "c")
    t = Trace(schema, [TraceRecord(Instance(f"r{i}", (0.0, 0.0, 0.0), schema), "1",
                                   ExplanationPayload.from_importance(v))
                       for i, v in enumerate(rows)])
    u = [uniqueness(discretize_trace(t, m)) for m in ("original", "fp:2", "fp:1")]
    assert u[0] >= u[1] >= u[2]
    assert uniqueness(discretize_trace(t, "sign")) <= u[0]
    assert uniqueness(discretize_trace(t, "rank")) <= u[0]
