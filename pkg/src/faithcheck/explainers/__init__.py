from faithcheck.explainers.anchors import (
    AnchorResult,
    AnchorStep,
    anchor_path,
    find_anchor,
    find_anchors,
    precision,
)
from faithcheck.explainers.neighbors import PrototypeSet, counterfactual_to_rule, knn_explain
from faithcheck.explainers.tree import Leaf, Split, SurrogateTree, explain_with_tree, fit_surrogate_tree
from faithcheck.rules import Bound, Hyperrectangle, OpenBall, ScopedRule, TokenSubset, rule_from_json


def rule_applies(rule: ScopedRule, x) -> bool:
    return rule.applies(x)


__all__ = [
    "AnchorResult", "AnchorStep", "Bound", "Hyperrectangle", "Leaf", "OpenBall", "PrototypeSet",
    "ScopedRule", "Split", "SurrogateTree", "TokenSubset", "anchor_path", "counterfactual_to_rule",
    "explain_with_tree", "find_anchor", "find_anchors", "fit_surrogate_tree", "knn_explain",
    "precision", "rule_applies", "rule_from_json",
]
