"""Example-based explainers: nearest prototypes and counterfactuals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from faithcheck.core import ExplanationPayload, Instance
from faithcheck.rules import METRICS, OpenBall, mixed_distance

# Inflation that turns the closed ball d(x, p) <= tau into an open-ball rule.
CLOSED_BALL_SLACK = 1e-12


@dataclass(frozen=True)
class PrototypeSet:
    prototypes: tuple[Instance, ...]
    metric: str = "l2"
    tau: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "prototypes", tuple(self.prototypes))
        if not self.prototypes:
            raise ValueError("a prototype set cannot be empty")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")

    def nearest(self, x: Instance) -> int:
        """Index of the closest prototype; the lowest index wins ties."""
        dists = [mixed_distance(x.features, p.features, self.metric) for p in self.prototypes]
        return min(range(len(dists)), key=lambda i: (dists[i], i))


def knn_explain(protos: PrototypeSet, x: Instance, option: str = "nearest") -> ExplanationPayload:
    """Explain ``x`` by its nearest prototype.

    ``option="nearest"`` returns an opaque payload keyed by the prototype id.
    ``option="tau_ball"`` also attaches the ball of radius tau around that
    prototype as the explanation's scope.
    """
    p = protos.prototypes[protos.nearest(x)]
    if option == "nearest":
        return ExplanationPayload.opaque(p.id)
    if option != "tau_ball":
        raise ValueError(f"unknown option {option!r}; use 'nearest' or 'tau_ball'")
    if protos.tau is None:
        raise ValueError("tau_ball needs a prototype set with tau")
    ball = OpenBall(p.features, protos.tau * (1 + CLOSED_BALL_SLACK), protos.metric)
    return ExplanationPayload.from_rule(ball, key=p.id)


def counterfactual_to_rule(x: Instance, x_cf: Instance | Sequence, metric: str = "l2") -> OpenBall:
    """Open ball around ``x`` reaching up to (not including) its counterfactual."""
    cf = x_cf.features if isinstance(x_cf, Instance) else tuple(x_cf)
    if len(cf) != len(x.features):
        raise ValueError("counterfactual does not match the instance's schema")
    radius = mixed_distance(x.features, cf, metric)
    if radius <= 0:
        raise ValueError("counterfactual at zero distance; the ball would be empty")
    return OpenBall(x.features, radius, metric)
