"""Local rating prediction, top-N ranking, and ad-hoc group recommendation.

Everything here reads a single store snapshot, so any device can answer
from whatever data its exchanges have gathered. Prediction is user-based
collaborative filtering in its canonical mean-centered weighted form, with
a per-user mean fallback when no similar rater of the item is known; a
content-based scorer over catalog attributes covers users the CF path
cannot reach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .core import ColdStartError, ItemId, LocalStore, UnknownMembersError, UserId, ValidationError
from .ingestion import Catalog
from .similarity import SimilarityConfig, select_neighbors


class Basis(Enum):
    CF = "cf"
    CONTENT = "content"
    USER_MEAN_FALLBACK = "user_mean_fallback"


@dataclass(frozen=True, slots=True)
class Prediction:
    item: ItemId
    score: float
    basis: Basis
    n_neighbors_used: int = 0


class GroupStrategy(Enum):
    AVERAGE = "average"
    LEAST_MISERY = "least_misery"
    MOST_PLEASURE = "most_pleasure"


@dataclass(frozen=True, slots=True)
class GroupPrediction:
    item: ItemId
    score: float
    member_scores: tuple[tuple[UserId, float], ...]


def user_mean(store: LocalStore, u: UserId) -> float:
    ratings = store.ratings_of(u)
    if not ratings:
        raise ColdStartError(f"user {u} has no ratings in this store")
    items = sorted(ratings)
    return sum(ratings[i].value for i in items) / len(items)


def predict(u: UserId, item: ItemId, store: LocalStore, cfg: SimilarityConfig, k: int) -> Prediction:
    """Predict u's rating of item from the k most similar raters of item.

    score = mean_u + sum_v s(u,v) * (r_vi - mean_v) / sum_v |s(u,v)|,
    clamped to the rating scale. Neighbors with non-positive similarity are
    excluded; with no usable neighbor the score falls back to u's mean.
    Raises ColdStartError when u has no ratings at all.
    """
    mu = user_mean(store, u)
    raters = [v for v in store.raters_of(item) if v != u]
    neighbors = select_neighbors(u, raters, k, store, cfg)
    if not neighbors:
        return Prediction(item, store.scale.clamp(mu), Basis.USER_MEAN_FALLBACK, 0)
    num = 0.0
    den = 0.0
    ratings_for_item = store.raters_of(item)
    for v, s in neighbors:
        num += s * (ratings_for_item[v].value - user_mean(store, v))
        den += abs(s)
    score = store.scale.clamp(mu + num / den)
    return Prediction(item, score, Basis.CF, len(neighbors))


def top_n(
    u: UserId,
    n: int,
    store: LocalStore,
    cfg: SimilarityConfig,
    k: int,
    candidates: list[ItemId] | None = None,
) -> list[Prediction]:
    """Rank the n best unrated items for u.

    Candidates default to every item in the store; items u already rated
    are always excluded. Descending score, ties by ascending item id.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    user_mean(store, u)  # surface cold users even for empty candidate sets
    rated = set(store.ratings_of(u))
    pool = store.items() if candidates is None else candidates
    preds = [predict(u, item, store, cfg, k) for item in sorted(set(pool) - rated)]
    preds.sort(key=lambda p: (-p.score, p.item))
    return preds[:n]


def content_score(u: UserId, item: ItemId, store: LocalStore, catalog: Catalog) -> Prediction:
    """Score item against u's attribute profile.

    The profile is the mean of the attribute vectors of u's rated cataloged
    items, weighted by (rating - scale midpoint) so disliked items push the
    profile away from their attributes. The profile-item cosine in [-1, 1]
    is mapped affinely onto the rating scale; a zero-norm profile or item
    vector yields the scale midpoint.
    """
    if item not in catalog:
        raise ValidationError(f"item {item} not in catalog")
    ratings = store.ratings_of(u)
    rated = [i for i in sorted(ratings) if i in catalog]
    if not rated:
        raise ColdStartError(f"user {u} has no ratings on cataloged items")

    mid = store.scale.midpoint
    dims = len(catalog.schema)
    profile = [0.0] * dims
    weight_mass = 0.0
    for i in rated:
        w = ratings[i].value - mid
        vec = catalog.vector(i)
        for d in range(dims):
            profile[d] += w * vec[d]
        weight_mass += abs(w)
    if weight_mass > 0.0:
        profile = [p / weight_mass for p in profile]

    target = catalog.vector(item)
    p_norm = math.sqrt(sum(p * p for p in profile))
    t_norm = math.sqrt(sum(t * t for t in target))
    if p_norm == 0.0 or t_norm == 0.0:
        return Prediction(item, mid, Basis.CONTENT, 0)
    cos = sum(p * t for p, t in zip(profile, target)) / (p_norm * t_norm)
    score = mid + cos * (store.scale.r_max - store.scale.r_min) / 2.0
    return Prediction(item, store.scale.clamp(score), Basis.CONTENT, 0)


def group_recommend(
    members: list[UserId],
    n: int,
    store: LocalStore,
    cfg: SimilarityConfig,
    k: int,
    strategy: GroupStrategy,
) -> list[GroupPrediction]:
    """Rank items for an ad-hoc group from one shared store.

    Each member's prediction is computed individually (fallback allowed);
    the group score per item is their mean, minimum, or maximum depending
    on the strategy. Items rated by any member are excluded. Ties rank by
    ascending item id.
    """
    members = sorted(set(members))
    if len(members) < 2:
        raise ValidationError("a group needs at least 2 distinct members")
    if n < 1:
        raise ValidationError("n must be >= 1")
    missing = [m for m in members if not store.ratings_of(m)]
    if missing:
        raise UnknownMembersError(missing)

    rated_by_any: set[ItemId] = set()
    for m in members:
        rated_by_any.update(store.ratings_of(m))
    results: list[GroupPrediction] = []
    for item in sorted(set(store.items()) - rated_by_any):
        scores = tuple((m, predict(m, item, store, cfg, k).score) for m in members)
        values = [s for _, s in scores]
        if strategy is GroupStrategy.AVERAGE:
            group = sum(values) / len(values)
        elif strategy is GroupStrategy.LEAST_MISERY:
            group = min(values)
        else:
            group = max(values)
        results.append(GroupPrediction(item, group, scores))
    results.sort(key=lambda g: (-g.score, g.item))
    return results[:n]
