"""Environment-similarity graph built from historical transform agreement."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .errors import InvalidInput, NotFound

if TYPE_CHECKING:
    from .environment import EnvironmentTransform

# Edges below this similarity are pruned. Low enough that noise-level
# discrepancy spreads never isolate a node (exp(-d/median) puts unrelated
# environments far below it, same-environment noise well above it).
DEFAULT_BETA_MIN = 0.05


def _edge_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class SimilarityGraph:
    """Objects as nodes; environment-similarity weights beta in (0, 1] as edges."""

    nodes: tuple[str, ...]
    weights: dict[tuple[str, str], float] = field(default_factory=dict)
    beta_min: float = DEFAULT_BETA_MIN

    def weight(self, a: str, b: str) -> float | None:
        return self.weights.get(_edge_key(a, b))

    def neighbors(self, object_id: str) -> list[tuple[str, float]]:
        """Neighbors of ``object_id`` with beta >= beta_min.

        Sorted by descending beta, then ascending id.
        """
        if object_id not in self.nodes:
            raise NotFound(f"unknown object id {object_id!r}")
        found = []
        for other in self.nodes:
            if other == object_id:
                continue
            beta = self.weight(object_id, other)
            if beta is not None and beta >= self.beta_min:
                found.append((other, beta))
        found.sort(key=lambda item: (-item[1], item[0]))
        return found


def build_graph(
    historical_transforms: Mapping[str, Sequence["EnvironmentTransform"]],
    beta_min: float = DEFAULT_BETA_MIN,
) -> SimilarityGraph:
    """Build the similarity graph from per-object transform histories.

    The discrepancy of a pair is the mean, over aligned windows, of the
    squared translation gap plus the squared Frobenius rotation gap. Weights
    are ``beta = exp(-discrepancy / s)`` with ``s`` the median pair
    discrepancy, so the median pair lands exactly at ``1/e``. Edges with
    beta below ``beta_min`` are dropped.
    """
    ids = sorted(historical_transforms)
    if len(ids) < 2:
        raise InvalidInput("similarity graph needs at least 2 objects")
    if not (0.0 < beta_min <= 1.0):
        raise InvalidInput("beta_min must lie in (0, 1]")
    history_len = len(historical_transforms[ids[0]])
    if history_len < 1:
        raise InvalidInput("transform histories must be non-empty")
    for object_id in ids:
        if len(historical_transforms[object_id]) != history_len:
            raise InvalidInput("transform histories must have aligned lengths")
    discrepancies: dict[tuple[str, str], float] = {}
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            total = 0.0
            for ta, tb in zip(historical_transforms[a], historical_transforms[b]):
                total += float(np.sum((ta.translation - tb.translation) ** 2))
                total += float(np.sum((ta.rotation - tb.rotation) ** 2))
            discrepancies[(a, b)] = total / history_len
    scale = float(np.median(list(discrepancies.values())))
    weights = {}
    for pair, value in discrepancies.items():
        if scale > 0.0:
            beta = float(np.exp(-value / scale))
        else:
            # All-pairs median of zero: identical histories are fully
            # similar, anything else is not.
            beta = 1.0 if value == 0.0 else 0.0
        if beta >= beta_min:
            weights[pair] = beta
    return SimilarityGraph(nodes=tuple(ids), weights=weights, beta_min=beta_min)


def save_graph_csv(graph: SimilarityGraph, path: str | Path) -> None:
    """Persist the edge list as CSV with columns object_a, object_b, beta."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["object_a", "object_b", "beta"])
        for (a, b), beta in sorted(graph.weights.items()):
            writer.writerow([a, b, repr(beta)])


def load_graph_csv(
    path: str | Path,
    nodes: Sequence[str],
    beta_min: float = DEFAULT_BETA_MIN,
) -> SimilarityGraph:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["object_a", "object_b", "beta"]:
        raise InvalidInput(f"{path}: expected header object_a,object_b,beta")
    weights = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise InvalidInput(f"{path}:{lineno}: expected 3 columns")
        try:
            beta = float(row[2])
        except ValueError as exc:
            raise InvalidInput(f"{path}:{lineno}: bad beta {row[2]!r}") from exc
        if not (0.0 <= beta <= 1.0):
            raise InvalidInput(f"{path}:{lineno}: beta outside [0, 1]")
        weights[_edge_key(row[0], row[1])] = beta
    return SimilarityGraph(nodes=tuple(sorted(nodes)), weights=weights, beta_min=beta_min)
