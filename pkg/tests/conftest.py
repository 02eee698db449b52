from __future__ import annotations

import random
from pathlib import Path

import pytest

from proxrec.core import ItemId, LocalStore, RatingRecord, RatingScale, Source, write_rating_csv
from proxrec.exchange import ExchangePolicy
from proxrec.ingestion import EncounterEvent, save_trace


def item(key, category="movies") -> ItemId:
    return ItemId(category, str(key))


def rec(rater, key, value, ts=0, source=Source.MANUAL, hops=0, category="movies") -> RatingRecord:
    return RatingRecord(rater, item(key, category), float(value), ts, source, hops)


def as_itemids(ratings: dict) -> dict:
    """Convert {user: {key: value}} to {user: {ItemId: value}}."""
    return {u: {item(k): v for k, v in per_user.items()} for u, per_user in ratings.items()}


def make_store(owner, ratings, encounters=None, scale=None) -> LocalStore:
    """Build a store from {user: {item_key: value}}; foreign records arrive at hops 1."""
    store = LocalStore(owner, scale or RatingScale())
    for rater in sorted(ratings):
        for key in sorted(ratings[rater], key=str):
            hops = 0 if rater == owner else 1
            store.merge_record(rec(rater, key, ratings[rater][key], hops=hops))
    for peer, (count, duration) in sorted((encounters or {}).items()):
        for i in range(count):
            store.record_encounter(peer, duration if i == 0 else 0.0)
    return store


def grid_value(rng: random.Random, r_min=1.0, r_max=5.0) -> float:
    """A rating on the half-point grid; exactly representable as float32."""
    steps = int((r_max - r_min) * 2)
    return r_min + rng.randint(0, steps) * 0.5


def write_synthetic_udata(path: Path, n_users: int, n_items: int, seed: int,
                          per_user=(60, 140)) -> int:
    """Write a u.data-shaped synthetic dataset; returns the rating count."""
    rng = random.Random(f"udata/{seed}")
    lines = []
    for user in range(1, n_users + 1):
        n = rng.randint(*per_user)
        items = rng.sample(range(1, n_items + 1), min(n, n_items))
        for movie in items:
            value = rng.randint(1, 5)
            ts = rng.randint(874_000_000, 893_000_000)
            lines.append(f"{user}\t{movie}\t{value}\t{ts}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(lines)


def write_ratings_csv(path: Path, ratings: dict, ts_base=0) -> list[RatingRecord]:
    """Write {user: {key: value}} as an initial-ratings CSV; returns the records."""
    records = []
    for u in sorted(ratings):
        for i, key in enumerate(sorted(ratings[u], key=str)):
            records.append(rec(u, key, ratings[u][key], ts=ts_base + i))
    write_rating_csv(records, path)
    return records


def random_protocol_instance(rng: random.Random, tmp_path: Path, name: str, relay=None):
    """One random small exchange scenario: files on disk plus oracle inputs."""
    n_nodes = rng.randint(2, 8)
    horizon = rng.uniform(200.0, 900.0)
    events = []
    seen = set()
    for _ in range(rng.randint(1, 50)):
        a, b = rng.sample(range(n_nodes), 2)
        t = round(rng.uniform(0.0, horizon), 3)
        ev = EncounterEvent.normalized(t, a, b, round(rng.uniform(0.0, 120.0), 3))
        if ev.sort_key() in seen:
            continue
        seen.add(ev.sort_key())
        events.append(ev)
    events.sort(key=EncounterEvent.sort_key)

    ratings = {}
    for n in range(n_nodes):
        keys = rng.sample(range(12), rng.randint(1, 4))
        ratings[n] = {f"m{k}": grid_value(rng) for k in keys}

    if relay is None:
        relay = rng.random() < 0.75
    policy = ExchangePolicy(
        upload_period=rng.choice([20.0, 60.0, 150.0, 400.0]),
        relay=relay,
        max_hops=rng.choice([1, 2, float("inf")]) if relay else float("inf"),
        fetch_deferral=rng.choice([0.0, 10.0, 40.0]),
    )
    ratings_path = tmp_path / f"{name}_ratings.csv"
    trace_path = tmp_path / f"{name}_trace.csv"
    records = write_ratings_csv(ratings_path, ratings)
    save_trace(events, trace_path)
    own = {}
    for r in records:
        own.setdefault(r.rater, []).append((r.rater, r.item, r.value, r.timestamp, r.source))
    return {
        "n_nodes": n_nodes,
        "horizon": horizon,
        "events": events,
        "ratings": ratings,
        "own": own,
        "policy": policy,
        "ratings_path": ratings_path,
        "trace_path": trace_path,
        "seed": rng.randint(0, 2**32),
    }


def store_state(store) -> dict:
    """Engine store contents as {core: hops} for oracle comparison."""
    return {(r.rater, r.item, r.value, r.timestamp, r.source): r.hops for r in store.records()}


@pytest.fixture
def toy_store() -> LocalStore:
    ratings = {
        1: {"a": 4.0, "b": 2.0, "c": 5.0},
        2: {"a": 5.0, "b": 1.0, "c": 4.0, "d": 3.0},
        3: {"a": 2.0, "b": 4.0, "d": 5.0},
    }
    return make_store(1, ratings, encounters={2: (3, 600.0), 3: (1, 60.0)})
