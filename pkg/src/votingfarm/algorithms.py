"""Voting techniques over an opaque metric space.

A ballot is the list of vote objects one voter collected in a session,
in arrival order.  All techniques see the same inputs: the ballot and a
distance function on payloads.  Items marked invalid (timeouts, missing
inputs) count toward the ballot size N but can never win.

Five techniques are provided:

* formalized majority: an equivalence class must exceed N/2,
* generalized median: repeatedly discard the two mutually farthest
  items until one survives,
* formalized plurality: the largest equivalence class wins,
* weighted average: distance-weighted mean of numeric payloads,
* consensus: unanimity over the whole ballot.

Equivalence classes use epsilon linkage: two valid items are related if
their distance is <= epsilon, and classes are the transitive closure of
that relation.  With epsilon = 0 and the default discrete metric the
classes are groups of byte-identical payloads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import MemberId, VoteObject, VotingFarmError

MetricFn = Callable[[bytes, bytes], float]


class NoDecision(VotingFarmError):
    """The ballot does not determine a winner under the chosen rule."""


class LengthMismatch(VotingFarmError):
    """The default metric refuses to compare payloads of unequal size."""


def default_metric(a: bytes, b: bytes) -> float:
    """Discrete metric: 0 for byte-identical payloads, 1 otherwise."""
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)} bytes")
    return 0.0 if a == b else 1.0


def scalar_metric(a: bytes, b: bytes) -> float:
    """Absolute difference of two encoded scalars."""
    return abs(decode_scalar(a) - decode_scalar(b))


def euclidean_metric(a: bytes, b: bytes) -> float:
    """Euclidean distance between two encoded vectors."""
    return float(np.linalg.norm(decode_vector(a) - decode_vector(b)))


METRICS: dict[str, MetricFn] = {
    "default": default_metric,
    "scalar": scalar_metric,
    "euclidean": euclidean_metric,
}


def encode_scalar(x: float) -> bytes:
    return struct.pack("<d", x)


def decode_scalar(data: bytes) -> float:
    if len(data) != 8:
        raise LengthMismatch(f"scalar payload must be 8 bytes, got {len(data)}")
    return struct.unpack("<d", data)[0]


def encode_vector(v: Sequence[float]) -> bytes:
    return np.asarray(v, dtype="<f8").tobytes()


def decode_vector(data: bytes) -> np.ndarray:
    if len(data) == 0 or len(data) % 8:
        raise LengthMismatch(f"vector payload must be a multiple of 8 bytes, got {len(data)}")
    return np.frombuffer(data, dtype="<f8")


@dataclass(frozen=True)
class AlgorithmSelect:
    """Which technique to run and with what knobs.

    epsilon is the linkage radius for class-based techniques and the
    agreement radius for consensus.  scaling_factor is the weighted
    average's s parameter.  tie_break applies to plurality only:
    "none" turns ties into NoDecision, "lowest-member" picks the tied
    class containing the smallest member ident.
    """

    kind: str = "majority"
    epsilon: float = 0.0
    scaling_factor: float = 1.0
    tie_break: str = "none"

    KINDS = ("majority", "median", "plurality", "weighted-average", "consensus")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise VotingFarmError(f"unknown voting technique {self.kind!r}")
        if self.epsilon < 0:
            raise VotingFarmError("epsilon must be >= 0")
        if self.scaling_factor <= 0:
            raise VotingFarmError("scaling factor must be > 0")
        if self.tie_break not in ("none", "lowest-member"):
            raise VotingFarmError(f"unknown tie break {self.tie_break!r}")


Ballot = Sequence[VoteObject]


def _valid_items(ballot: Ballot) -> list[tuple[int, VoteObject]]:
    return [(i, obj) for i, obj in enumerate(ballot) if obj.valid]


def _distance_table(items: list[tuple[int, VoteObject]], metric: MetricFn) -> dict[tuple[int, int], float]:
    table: dict[tuple[int, int], float] = {}
    for a in range(len(items)):
        for b in range(a + 1, len(items)):
            d = metric(items[a][1].payload, items[b][1].payload)
            table[(a, b)] = table[(b, a)] = d
    return table


def equivalence_classes(ballot: Ballot, metric: MetricFn, epsilon: float) -> list[list[int]]:
    """Partition the valid ballot slots into epsilon-linkage classes.

    Returns lists of ballot indices.  Classes come out ordered by their
    smallest slot index, and slots within a class stay in ballot order.
    """
    items = _valid_items(ballot)
    n = len(items)
    if n == 0:
        return []
    table = _distance_table(items, metric)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in range(n):
        for b in range(a + 1, n):
            if table[(a, b)] <= epsilon:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)

    groups: dict[int, list[int]] = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(items[k][0])
    return [groups[root] for root in sorted(groups)]


def _class_representative(ballot: Ballot, cls: list[int]) -> VoteObject:
    # Lowest member ident within the winning class; arrival slot breaks
    # the (unusual) case of duplicate idents in a malformed ballot.
    best = min(cls, key=lambda i: (ballot[i].source, i))
    return ballot[best]


def majority(ballot: Ballot, metric: MetricFn, epsilon: float = 0.0) -> VoteObject:
    """Formalized majority: a class must exceed half the ballot size.

    The threshold counts invalid items: 2 equal values out of N=3 where
    the third timed out still win (2 > 1.5), but 2 out of N=4 do not.
    """
    n = len(ballot)
    if n == 0:
        raise NoDecision("empty ballot")
    for cls in equivalence_classes(ballot, metric, epsilon):
        if len(cls) > n / 2:
            return _class_representative(ballot, cls)
    raise NoDecision("no class exceeds half the ballot")


def plurality(
    ballot: Ballot,
    metric: MetricFn,
    epsilon: float = 0.0,
    tie_break: str = "none",
) -> VoteObject:
    """Formalized plurality: largest class wins, ties per tie_break."""
    classes = equivalence_classes(ballot, metric, epsilon)
    if not classes:
        raise NoDecision("no valid items")
    top = max(len(c) for c in classes)
    tied = [c for c in classes if len(c) == top]
    if len(tied) == 1:
        return _class_representative(ballot, tied[0])
    if tie_break == "lowest-member":
        cls = min(tied, key=lambda c: min(ballot[i].source for i in c))
        return _class_representative(ballot, cls)
    raise NoDecision(f"{len(tied)} classes tied at size {top}")


def median(ballot: Ballot, metric: MetricFn) -> VoteObject:
    """Generalized median: discard farthest pairs until one item is left.

    With an even number of valid items the final two are ranked by total
    distance to every valid item; the smaller sum survives, with the
    lower member ident breaking exact ties.  On scalars with an odd
    count this reproduces the ordinary median.
    """
    items = _valid_items(ballot)
    if not items:
        raise NoDecision("no valid items")
    table = _distance_table(items, metric)
    alive = list(range(len(items)))
    totals = {k: sum(table.get((k, j), 0.0) for j in range(len(items)) if j != k) for k in alive}

    def pair_key(a: int, b: int) -> tuple:
        # Deterministic choice among equally-far pairs: lowest member
        # idents first.  Stable under ballot permutation.
        sa = (items[a][1].source, items[a][0])
        sb = (items[b][1].source, items[b][0])
        return tuple(sorted((sa, sb)))

    while len(alive) > 2:
        worst = max(table[(a, b)] for a in alive for b in alive if a < b)
        a, b = min(
            ((a, b) for a in alive for b in alive if a < b and table[(a, b)] == worst),
            key=lambda p: pair_key(*p),
        )
        alive.remove(a)
        alive.remove(b)
    if len(alive) == 1:
        return items[alive[0]][1]
    a, b = alive
    ka = (totals[a], items[a][1].source, items[a][0])
    kb = (totals[b], items[b][1].source, items[b][0])
    return items[a][1] if ka <= kb else items[b][1]


def weighted_average(
    ballot: Ballot,
    metric: MetricFn,
    scaling_factor: float = 1.0,
) -> VoteObject:
    """Distance-weighted mean of the valid numeric payloads.

    Item i gets weight 1 / (1 + (D_i/s)^2) where D_i is the mean
    distance from item i to the other valid items and s is the scaling
    factor.  Invalid items weigh zero.  Payloads must decode as
    fixed-width float64 vectors; the result is synthesized (source 0).
    """
    items = _valid_items(ballot)
    if not items:
        raise NoDecision("no valid items")
    vectors = [decode_vector(obj.payload) for _, obj in items]
    width = len(vectors[0])
    for v in vectors[1:]:
        if len(v) != width:
            raise LengthMismatch("mixed vector widths in ballot")
    table = _distance_table(items, metric)
    n = len(items)
    weights = np.empty(n)
    for k in range(n):
        if n == 1:
            mean_d = 0.0
        else:
            mean_d = sum(table[(k, j)] for j in range(n) if j != k) / (n - 1)
        weights[k] = 1.0 / (1.0 + (mean_d / scaling_factor) ** 2)
    total = float(weights.sum())
    mixed = np.zeros(width)
    for k, v in enumerate(vectors):
        mixed += weights[k] * v
    mixed /= total
    return VoteObject(payload=encode_vector(mixed), valid=True, source=0)


def consensus(
    ballot: Ballot,
    metric: MetricFn,
    epsilon: float = 0.0,
    require_all_valid: bool = True,
) -> VoteObject:
    """Unanimity: every item agrees within epsilon.

    By default the rule is strict over the whole ballot: any invalid
    item defeats consensus, because a missing input is not an agreeing
    input.  Callers modeling a laxer notion can drop that requirement.
    """
    n = len(ballot)
    if n == 0:
        raise NoDecision("empty ballot")
    items = _valid_items(ballot)
    if not items:
        raise NoDecision("no valid items")
    if require_all_valid and len(items) != n:
        raise NoDecision("invalid items present, unanimity impossible")
    table = _distance_table(items, metric)
    for a in range(len(items)):
        for b in range(a + 1, len(items)):
            if table[(a, b)] > epsilon:
                raise NoDecision("items disagree beyond epsilon")
    best = min(range(len(items)), key=lambda k: (items[k][1].source, items[k][0]))
    return items[best][1]


def vote(ballot: Ballot, metric: MetricFn, select: AlgorithmSelect) -> VoteObject:
    """Run the selected technique on a ballot."""
    if select.kind == "majority":
        return majority(ballot, metric, select.epsilon)
    if select.kind == "plurality":
        return plurality(ballot, metric, select.epsilon, select.tie_break)
    if select.kind == "median":
        return median(ballot, metric)
    if select.kind == "weighted-average":
        return weighted_average(ballot, metric, select.scaling_factor)
    return consensus(ballot, metric, select.epsilon)
