"""Deterministic discrete-event simulation of the exchange-and-recommend loop.

The engine processes, in time order, four event kinds with a fixed
intra-tick precedence: uploads first (by node id), then encounters (by
node pair), then due fetches (by receiving node, then sender), then metric
snapshots. Every random choice derives from the run seed through named
substreams, so identical configurations reproduce byte-identical metrics.

Upload schedule contract: node n first uploads at
random.Random(f"{seed}/upload-phase/{n}").uniform(0.0, upload_period)
and every upload_period thereafter. Simultaneous t=0 uploads would be an
artificial synchrony; the per-node phase keeps first-exchange dynamics
staggered yet reproducible.

Holdout contract: per rater, ceil(holdout_fraction * n_own) of their own
ratings, chosen by random.Random(f"{seed}/holdout/{rater}").sample over
the item-sorted list, never enter any store and are used only to score
predictions at the rater's node.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .core import (
    DEFAULT_ONTOLOGY,
    ColdStartError,
    LocalStore,
    RatingRecord,
    RatingScale,
    UserId,
    ValidationError,
)
from .exchange import (
    Advertisement,
    CloudStore,
    ExchangePolicy,
    broadcast_on_encounter,
    build_payload,
    encode_payload,
    fetch_and_merge,
    item_wire_size,
)
from .ingestion import TraceGenParams, generate_trace, load_catalog, load_ratings, load_trace
from .recommender import Basis, predict
from .similarity import SimilarityConfig

_UPLOAD, _ENCOUNTER, _FETCH, _METRICS = 0, 1, 2, 3


@dataclass(frozen=True, slots=True)
class CloudParams:
    """Cloud-storage behavior knobs of one experiment."""

    upload_latency: float = 0.0
    fetch_latency: float = 0.0
    availability: float = 1.0

    def __post_init__(self) -> None:
        if self.upload_latency < 0 or self.fetch_latency < 0:
            raise ValidationError("latencies must be >= 0")
        if not 0.0 <= self.availability <= 1.0:
            raise ValidationError("availability must lie in [0, 1]")


@dataclass(frozen=True)
class SimConfig:
    """Full description of one experiment."""

    ratings_path: Path | str
    horizon: float
    metric_period: float
    trace_path: Path | str | None = None
    trace_gen: TraceGenParams | None = None
    catalog_path: Path | str | None = None
    exchange: ExchangePolicy = ExchangePolicy()
    similarity: SimilarityConfig = SimilarityConfig()
    cloud: CloudParams = CloudParams()
    k_neighbors: int = 10
    holdout_fraction: float = 0.0
    seed: int = 0
    scale: RatingScale = RatingScale()
    ontology: tuple[str, ...] = DEFAULT_ONTOLOGY

    def __post_init__(self) -> None:
        if (self.trace_path is None) == (self.trace_gen is None):
            raise ValidationError("exactly one of trace_path and trace_gen must be set")
        if self.horizon < 0:
            raise ValidationError("horizon must be >= 0")
        if self.metric_period <= 0:
            raise ValidationError("metric_period must be > 0")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValidationError("holdout_fraction must lie in [0, 1)")
        if self.k_neighbors < 1:
            raise ValidationError("k_neighbors must be >= 1")


@dataclass(frozen=True, slots=True)
class MetricsRow:
    time: float
    spread: float
    coverage: float
    rmse: float | None
    mae: float | None
    mean_store_bytes: float
    fetches_attempted: int
    fetches_dropped: int


METRICS_CSV_HEADER = [
    "time",
    "spread",
    "coverage",
    "rmse",
    "mae",
    "mean_store_bytes",
    "fetches_attempted",
    "fetches_dropped",
]


@dataclass
class MetricsLog:
    """Time series of per-snapshot metrics."""

    rows: list[MetricsRow] = field(default_factory=list)

    @property
    def final(self) -> MetricsRow:
        return self.rows[-1]

    def to_csv_bytes(self) -> bytes:
        lines = [",".join(METRICS_CSV_HEADER)]
        for r in self.rows:
            lines.append(
                ",".join(
                    [
                        str(r.time),
                        str(r.spread),
                        str(r.coverage),
                        "" if r.rmse is None else str(r.rmse),
                        "" if r.mae is None else str(r.mae),
                        str(r.mean_store_bytes),
                        str(r.fetches_attempted),
                        str(r.fetches_dropped),
                    ]
                )
            )
        return ("\n".join(lines) + "\n").encode("utf-8")

    def write_csv(self, path: Path | str) -> None:
        Path(path).write_bytes(self.to_csv_bytes())


@dataclass
class SimResult:
    """Everything a run produced; metrics plus the final world state."""

    config: SimConfig
    metrics: MetricsLog
    stores: dict[UserId, LocalStore]
    holdout: dict[UserId, list[RatingRecord]]
    nodes: list[UserId]
    total_records: int
    cloud: CloudStore


def upload_phase(seed: int, node: UserId, upload_period: float) -> float:
    """First-upload offset of a node; see the module docstring contract."""
    return random.Random(f"{seed}/upload-phase/{node}").uniform(0.0, upload_period)


def holdout_split(
    records: list[RatingRecord], fraction: float, seed: int
) -> tuple[list[RatingRecord], dict[UserId, list[RatingRecord]]]:
    """Split own ratings into circulating and held-out sets, per rater."""
    by_rater: dict[UserId, dict] = {}
    for rec in records:
        by_rater.setdefault(rec.rater, {})[rec.item] = rec
    kept: list[RatingRecord] = []
    held: dict[UserId, list[RatingRecord]] = {}
    for rater in sorted(by_rater):
        own = [by_rater[rater][item] for item in sorted(by_rater[rater])]
        n_hold = math.ceil(fraction * len(own)) if fraction > 0 else 0
        if n_hold == 0:
            kept.extend(own)
            continue
        rng = random.Random(f"{seed}/holdout/{rater}")
        chosen = rng.sample(own, n_hold)
        held[rater] = sorted(chosen, key=lambda r: r.item)
        held_items = {r.item for r in chosen}
        kept.extend(r for r in own if r.item not in held_items)
    return kept, held


def snapshot_metrics(
    stores: dict[UserId, LocalStore],
    holdout: dict[UserId, list[RatingRecord]],
    now: float,
    similarity_cfg: SimilarityConfig,
    k: int,
    total_records: int,
    fetches_attempted: int,
    fetches_dropped: int,
    item_sizes: dict | None = None,
) -> MetricsRow:
    """One metrics row over the current world state.

    coverage counts held-out pairs predicted with a real neighborhood
    (basis cf) at the rater's own node; fallback or cold predictions count
    against coverage and are excluded from rmse/mae.
    """
    nodes = sorted(stores)
    spread = 0.0
    if total_records > 0 and nodes:
        spread = sum(len(stores[n]) for n in nodes) / (len(nodes) * total_records)

    covered = 0
    total_pairs = 0
    sq_sum = 0.0
    abs_sum = 0.0
    for rater in sorted(holdout):
        store = stores[rater]
        for true_rec in holdout[rater]:
            total_pairs += 1
            try:
                pred = predict(rater, true_rec.item, store, similarity_cfg, k)
            except ColdStartError:
                continue
            if pred.basis is not Basis.CF:
                continue
            covered += 1
            err = pred.score - true_rec.value
            sq_sum += err * err
            abs_sum += abs(err)
    coverage = covered / total_pairs if total_pairs else 0.0
    rmse = math.sqrt(sq_sum / covered) if covered else None
    mae = abs_sum / covered if covered else None

    if item_sizes is None:
        item_sizes = {}
    total_bytes = 0
    for n in nodes:
        store = stores[n]
        for item in store.items():
            size = item_sizes.get(item)
            if size is None:
                size = item_wire_size(item)
                item_sizes[item] = size
            total_bytes += size * len(store.raters_of(item))
    mean_bytes = total_bytes / len(nodes) if nodes else 0.0

    return MetricsRow(
        time=now,
        spread=spread,
        coverage=coverage,
        rmse=rmse,
        mae=mae,
        mean_store_bytes=mean_bytes,
        fetches_attempted=fetches_attempted,
        fetches_dropped=fetches_dropped,
    )


def run(config: SimConfig) -> SimResult:
    """Execute one experiment; identical config yields identical results."""
    scale = config.scale
    ontology = config.ontology
    records = load_ratings(config.ratings_path, scale, ontology)
    seen_keys = set()
    for rec in records:
        if rec.key() in seen_keys:
            raise ValidationError(f"duplicate rating for ({rec.rater}, {rec.item}) in {config.ratings_path}")
        seen_keys.add(rec.key())
    if config.catalog_path is not None:
        load_catalog(config.catalog_path, ontology)  # validate early; content scoring is offline

    if config.trace_path is not None:
        trace = load_trace(config.trace_path)
    else:
        trace = generate_trace(config.trace_gen)
    trace = [ev for ev in trace if ev.time <= config.horizon]

    kept, held = holdout_split(records, config.holdout_fraction, config.seed)
    total_records = len(kept)

    nodes = sorted({r.rater for r in records} | {n for ev in trace for n in (ev.a, ev.b)})
    stores = {n: LocalStore(n, scale) for n in nodes}
    for rec in kept:
        stores[rec.rater].merge_record(rec)

    policy = config.exchange
    cloud = CloudStore(
        upload_latency=config.cloud.upload_latency,
        fetch_latency=config.cloud.fetch_latency,
        availability=config.cloud.availability,
        seed=config.seed,
    )
    advs: dict[UserId, Advertisement] = {}
    payload_cache: dict[bytes, tuple[RatingRecord, ...]] = {}
    item_sizes: dict = {}
    attempted = 0
    dropped = 0
    log = MetricsLog()

    heap: list = []
    seq = 0

    def push(time: float, rank: int, k1: int, k2: int, data) -> None:
        nonlocal seq
        if time <= config.horizon:
            heapq.heappush(heap, (time, rank, k1, k2, seq, data))
            seq += 1

    for n in nodes:
        push(upload_phase(config.seed, n, policy.upload_period), _UPLOAD, n, 0, None)
    for ev in trace:
        push(ev.time, _ENCOUNTER, ev.a, ev.b, ev)
    k_snap = 0
    while k_snap * config.metric_period < config.horizon:
        push(k_snap * config.metric_period, _METRICS, 0, 0, None)
        k_snap += 1
    push(config.horizon, _METRICS, 0, 0, None)

    while heap:
        time, rank, k1, k2, _, data = heapq.heappop(heap)
        if rank == _UPLOAD:
            node = k1
            payload = build_payload(stores[node], policy, time)
            blob = encode_payload(payload, ontology)
            token = cloud.upload(node, blob, time)
            advs[node] = Advertisement(node, token, time)
            push(time + policy.upload_period, _UPLOAD, node, 0, None)
        elif rank == _ENCOUNTER:
            ev = data
            pending = broadcast_on_encounter(
                stores[ev.a], stores[ev.b], advs.get(ev.a), advs.get(ev.b), ev.time, ev.duration, policy
            )
            for pf in pending:
                push(pf.due + config.cloud.fetch_latency, _FETCH, pf.node, pf.sender, pf)
        elif rank == _FETCH:
            pf = data
            stats = fetch_and_merge(stores[pf.node], cloud, pf.token, time, ontology, payload_cache)
            attempted += 1
            if stats.dropped:
                dropped += 1
        else:
            log.rows.append(
                snapshot_metrics(
                    stores,
                    held,
                    time,
                    config.similarity,
                    config.k_neighbors,
                    total_records,
                    attempted,
                    dropped,
                    item_sizes,
                )
            )

    return SimResult(
        config=config,
        metrics=log,
        stores=stores,
        holdout=held,
        nodes=nodes,
        total_records=total_records,
        cloud=cloud,
    )
