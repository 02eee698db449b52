"""User-user similarity from rating overlap, encounter history, or both.

Small local stores rarely contain enough co-rated items; physical
proximity history supplies a rating-free signal. rating_similarity returns
None (undefined) rather than 0 when there is no usable overlap, so callers
can distinguish "dissimilar" from "unknown" and fall back explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import LocalStore, UserId, ValidationError

METRICS = ("pearson", "cosine")

_SUB_ONE = math.nextafter(1.0, 0.0)


@dataclass(frozen=True, slots=True)
class SimilarityConfig:
    """Similarity parameters.

    significance_threshold shrinks similarities computed from fewer than
    that many co-rated items toward zero. count_scale / duration_scale set
    how many contacts, or how much contact time, saturate the proximity
    signal; duration_weight balances the two. rating_weight blends the
    rating-based and proximity-based terms when both exist.
    """

    metric: str = "pearson"
    min_overlap: int = 3
    significance_threshold: int = 10
    count_scale: float = 5.0
    duration_scale: float = 3600.0
    duration_weight: float = 0.5
    rating_weight: float = 0.7
    fallback_to_proximity: bool = True

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValidationError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.min_overlap < 1:
            raise ValidationError("min_overlap must be >= 1")
        if self.significance_threshold < 1:
            raise ValidationError("significance_threshold must be >= 1")
        if self.count_scale <= 0 or self.duration_scale <= 0:
            raise ValidationError("count_scale and duration_scale must be > 0")
        if not 0.0 <= self.duration_weight <= 1.0:
            raise ValidationError("duration_weight must lie in [0, 1]")
        if not 0.0 <= self.rating_weight <= 1.0:
            raise ValidationError("rating_weight must lie in [0, 1]")


def rating_similarity(u: UserId, v: UserId, store: LocalStore, cfg: SimilarityConfig) -> float | None:
    """Similarity of u and v over their co-rated items, or None if undefined.

    pearson mean-centers each user over the co-rated set; cosine uses raw
    values. The result is shrunk by min(n_co, T) / T where T is the
    significance threshold. Undefined when fewer than min_overlap co-rated
    items exist or the co-rated vectors are degenerate (zero variance for
    pearson, zero norm for cosine).
    """
    ru = store.ratings_of(u)
    rv = store.ratings_of(v)
    if len(rv) < len(ru):
        co = sorted(k for k in rv if k in ru)
    else:
        co = sorted(k for k in ru if k in rv)
    n = len(co)
    if n < cfg.min_overlap:
        return None
    xs = [ru[i].value for i in co]
    ys = [rv[i].value for i in co]

    if cfg.metric == "pearson":
        mx = sum(xs) / n
        my = sum(ys) / n
        num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
        dx = sum((x - mx) ** 2 for x in xs)
        dy = sum((y - my) ** 2 for y in ys)
        if dx == 0.0 or dy == 0.0:
            return None
        core = num / math.sqrt(dx * dy)
    else:
        num = sum(x * y for x, y in zip(xs, ys))
        dx = sum(x * x for x in xs)
        dy = sum(y * y for y in ys)
        if dx == 0.0 or dy == 0.0:
            return None
        core = num / math.sqrt(dx * dy)

    significance = min(n, cfg.significance_threshold) / cfg.significance_threshold
    return core * significance


def proximity_similarity(store: LocalStore, peer: UserId, cfg: SimilarityConfig) -> float:
    """Rating-free similarity from the store owner's contact history with peer.

    1 - exp(-x) with x mixing encounter count and total duration, each
    against its own scale. Strictly increasing in both signals until float
    saturation, 0 exactly when the peer was never encountered, and capped
    just below 1 so the [0, 1) range holds for any history.
    """
    stats = store.encounter_stats(peer)
    x = (1.0 - cfg.duration_weight) * stats.count / cfg.count_scale
    x += cfg.duration_weight * stats.total_duration / cfg.duration_scale
    return min(-math.expm1(-x), _SUB_ONE)


def hybrid_similarity(u: UserId, v: UserId, store: LocalStore, cfg: SimilarityConfig) -> float:
    """Blend of rating and proximity similarity.

    w * s_rating + (1 - w) * s_proximity when the rating term is defined;
    otherwise s_proximity if fallback is enabled, else 0. The proximity
    term always reflects the store owner's own contact log with v, which
    is the only log a device holds.
    """
    s_rating = rating_similarity(u, v, store, cfg)
    if s_rating is None:
        if cfg.fallback_to_proximity:
            return proximity_similarity(store, v, cfg)
        return 0.0
    w = cfg.rating_weight
    return w * s_rating + (1.0 - w) * proximity_similarity(store, v, cfg)


def select_neighbors(
    u: UserId,
    candidates: list[UserId] | tuple[UserId, ...],
    k: int,
    store: LocalStore,
    cfg: SimilarityConfig,
) -> list[tuple[UserId, float]]:
    """Up to k candidates with positive similarity to u, best first.

    Deterministic: descending similarity, ties broken by ascending user id.
    u itself is never returned.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    scored: list[tuple[UserId, float]] = []
    for v in sorted(set(candidates)):
        if v == u:
            continue
        s = hybrid_similarity(u, v, store, cfg)
        if s > 0.0:
            scored.append((v, s))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]
