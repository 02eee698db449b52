"""Domain types and the per-node rating store.

A node's state is a ``LocalStore``: the merged database of its owner's own
ratings plus everything received from peers, together with an aggregate log
of physical encounters. Stores are single-writer; all read paths iterate in
sorted order so downstream computations are independent of insertion order.

Merge semantics are a deterministic join: one record per (rater, item) key,
conflicts resolved by newer timestamp, then lower hop count, then keep the
existing record. Records authored by the store owner are authoritative and
are never overwritten by received copies.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

UserId = int

DEFAULT_ONTOLOGY: tuple[str, ...] = ("movies", "music", "poi")


class ProxrecError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(ProxrecError):
    """Input data violates a format, range, or consistency constraint."""


class ProtocolError(ProxrecError):
    """An exchange-protocol size limit was violated (configuration bug)."""


class ColdStartError(ProxrecError):
    """The target user has no usable ratings in the store."""


class UnknownMembersError(ProxrecError):
    """A group request named users without any ratings in the store."""

    def __init__(self, members: Iterable[UserId]):
        self.members = tuple(members)
        super().__init__(
            "no ratings in store for members: " + ", ".join(str(m) for m in self.members)
        )


class Source(Enum):
    """How a rating entered the system on the rater's device."""

    TRACKED = "tracked"
    THIRD_PARTY = "third_party"
    MANUAL = "manual"

    @classmethod
    def parse(cls, text: str) -> "Source":
        try:
            return cls(text)
        except ValueError:
            raise ValidationError(f"unknown rating source {text!r}") from None


class ItemId(NamedTuple):
    """Globally valid item identifier: a key within a category namespace."""

    category: str
    key: str

    def __str__(self) -> str:
        return f"{self.category}/{self.key}"


@dataclass(frozen=True, slots=True)
class RatingScale:
    """Configured rating bounds; all sources share one scale."""

    r_min: float = 1.0
    r_max: float = 5.0

    def __post_init__(self) -> None:
        if not self.r_min < self.r_max:
            raise ValidationError(f"rating scale requires r_min < r_max, got [{self.r_min}, {self.r_max}]")

    @property
    def midpoint(self) -> float:
        return (self.r_min + self.r_max) / 2.0

    def contains(self, value: float) -> bool:
        return self.r_min <= value <= self.r_max

    def clamp(self, value: float) -> float:
        return min(max(value, self.r_min), self.r_max)


@dataclass(frozen=True, slots=True)
class RatingRecord:
    """One (rater, item, value) fact; the unit of exchange.

    hops counts device-to-device transfers away from the rater's device:
    0 only on the device that created the record, 1 after a direct
    exchange, and so on along relay chains.
    """

    rater: UserId
    item: ItemId
    value: float
    timestamp: int
    source: Source
    hops: int = 0

    def key(self) -> tuple[UserId, ItemId]:
        return (self.rater, self.item)

    def with_hops(self, hops: int) -> "RatingRecord":
        return replace(self, hops=hops)


@dataclass(frozen=True, slots=True)
class ItemMeta:
    """Catalog entry: item attributes as weights in [0, 1]."""

    item: ItemId
    attributes: dict[str, float]


class MergeOutcome(Enum):
    INSERTED = "inserted"
    REPLACED = "replaced"
    IGNORED = "ignored"


@dataclass(slots=True)
class EncounterStats:
    """Per-peer aggregate of proximity contacts."""

    count: int = 0
    total_duration: float = 0.0


_ZERO_ENCOUNTERS = EncounterStats()


def validate_record(rec: RatingRecord, scale: RatingScale) -> None:
    """Raise ValidationError unless rec satisfies the record invariants."""
    if rec.rater < 0:
        raise ValidationError(f"rater id must be non-negative, got {rec.rater}")
    if not rec.item.key:
        raise ValidationError("item key must be non-empty")
    if not scale.contains(rec.value):
        raise ValidationError(
            f"rating {rec.value} outside scale [{scale.r_min}, {scale.r_max}] for {rec.rater}/{rec.item}"
        )
    if rec.timestamp < 0:
        raise ValidationError(f"timestamp must be non-negative, got {rec.timestamp}")
    if rec.hops < 0:
        raise ValidationError(f"hops must be non-negative, got {rec.hops}")


class LocalStore:
    """A node's merged rating database plus its encounter log.

    Single-writer: only the owning simulation context mutates a store.
    Reads are safe to share.
    """

    def __init__(self, owner: UserId, scale: RatingScale | None = None):
        self.owner = owner
        self.scale = scale if scale is not None else RatingScale()
        self._by_rater: dict[UserId, dict[ItemId, RatingRecord]] = {}
        self._by_item: dict[ItemId, dict[UserId, RatingRecord]] = {}
        self._count = 0
        self.encounters: dict[UserId, EncounterStats] = {}

    def __len__(self) -> int:
        return self._count

    def get(self, rater: UserId, item: ItemId) -> RatingRecord | None:
        return self._by_rater.get(rater, {}).get(item)

    def records(self) -> Iterator[RatingRecord]:
        """All records, sorted by (rater, item)."""
        for rater in sorted(self._by_rater):
            by_item = self._by_rater[rater]
            for item in sorted(by_item):
                yield by_item[item]

    def raters(self) -> list[UserId]:
        return sorted(self._by_rater)

    def items(self) -> list[ItemId]:
        return sorted(self._by_item)

    def ratings_of(self, rater: UserId) -> dict[ItemId, RatingRecord]:
        """Ratings authored by rater that this store holds. Treat as read-only."""
        return self._by_rater.get(rater, {})

    def raters_of(self, item: ItemId) -> dict[UserId, RatingRecord]:
        """Stored ratings for item, keyed by rater. Treat as read-only."""
        return self._by_item.get(item, {})

    def own_records(self) -> list[RatingRecord]:
        own = self._by_rater.get(self.owner, {})
        return [own[item] for item in sorted(own)]

    def merge_record(self, rec: RatingRecord) -> MergeOutcome:
        """Merge one record under the deterministic conflict rule.

        Newer timestamp wins; equal timestamps prefer lower hops; otherwise
        the existing record is kept. Received copies of the owner's own
        records are ignored outright, so own data stays authoritative.
        """
        validate_record(rec, self.scale)
        if rec.rater == self.owner:
            if rec.hops != 0:
                return MergeOutcome.IGNORED
        elif rec.hops == 0:
            raise ValidationError(
                f"record by {rec.rater} with hops=0 cannot enter store of {self.owner}"
            )

        existing = self._by_rater.get(rec.rater, {}).get(rec.item)
        if existing is None:
            self._insert(rec)
            return MergeOutcome.INSERTED
        if rec.timestamp > existing.timestamp or (
            rec.timestamp == existing.timestamp and rec.hops < existing.hops
        ):
            self._by_rater[rec.rater][rec.item] = rec
            self._by_item[rec.item][rec.rater] = rec
            return MergeOutcome.REPLACED
        return MergeOutcome.IGNORED

    def _insert(self, rec: RatingRecord) -> None:
        self._by_rater.setdefault(rec.rater, {})[rec.item] = rec
        self._by_item.setdefault(rec.item, {})[rec.rater] = rec
        self._count += 1

    def record_encounter(self, peer: UserId, duration: float) -> None:
        """Count one proximity contact with peer. Zero-length contacts count."""
        if duration < 0:
            raise ValidationError(f"encounter duration must be non-negative, got {duration}")
        if peer == self.owner:
            raise ValidationError("a node cannot encounter itself")
        stats = self.encounters.get(peer)
        if stats is None:
            stats = EncounterStats()
            self.encounters[peer] = stats
        stats.count += 1
        stats.total_duration += duration

    def encounter_stats(self, peer: UserId) -> EncounterStats:
        return self.encounters.get(peer, _ZERO_ENCOUNTERS)


# ---------------------------------------------------------------------------
# Snapshot export/import: line-delimited CSV, UTF-8, header row.
# ---------------------------------------------------------------------------

RATING_CSV_HEADER = ["rater", "category", "key", "value", "timestamp", "source", "hops"]


def read_rating_csv(
    path: Path | str,
    scale: RatingScale | None = None,
    ontology: tuple[str, ...] = DEFAULT_ONTOLOGY,
) -> list[RatingRecord]:
    """Parse a rating/snapshot CSV. Errors name the offending line."""
    scale = scale if scale is not None else RatingScale()
    path = Path(path)
    records: list[RatingRecord] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: missing header row") from None
        if [h.strip() for h in header] != RATING_CSV_HEADER:
            raise ValidationError(
                f"{path}: expected header {','.join(RATING_CSV_HEADER)}, got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RATING_CSV_HEADER):
                raise ValidationError(f"{path}:{lineno}: expected {len(RATING_CSV_HEADER)} fields, got {len(row)}")
            try:
                rater = int(row[0])
                category = row[1]
                key = row[2]
                value = float(row[3])
                timestamp = int(row[4])
                source = Source.parse(row[5])
                hops = int(row[6]) if row[6] != "" else 0
            except (ValueError, ValidationError) as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            if category not in ontology:
                raise ValidationError(f"{path}:{lineno}: category {category!r} not in ontology {ontology}")
            rec = RatingRecord(rater, ItemId(category, key), value, timestamp, source, hops)
            try:
                validate_record(rec, scale)
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            records.append(rec)
    return records


def write_rating_csv(records: Iterable[RatingRecord], path: Path | str) -> None:
    path = Path(path)
    rows = sorted(records, key=lambda r: (r.rater, r.item))
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RATING_CSV_HEADER)
        for r in rows:
            writer.writerow(
                [r.rater, r.item.category, r.item.key, r.value, r.timestamp, r.source.value, r.hops]
            )


def export_store(store: LocalStore, path: Path | str) -> None:
    """Write a store snapshot (records only; the encounter log is not persisted)."""
    write_rating_csv(store.records(), path)


def import_store(
    path: Path | str,
    scale: RatingScale | None = None,
    ontology: tuple[str, ...] = DEFAULT_ONTOLOGY,
    owner: UserId | None = None,
) -> LocalStore:
    """Rebuild a store from a snapshot.

    The owner is inferred from the unique rater carrying hops=0 records;
    pass owner explicitly for snapshots without any own records.
    """
    records = read_rating_csv(path, scale, ontology)
    if owner is None:
        own_raters = {r.rater for r in records if r.hops == 0}
        if len(own_raters) == 1:
            owner = own_raters.pop()
        elif not own_raters:
            raise ValidationError(f"{path}: no hops=0 records; owner must be given explicitly")
        else:
            raise ValidationError(
                f"{path}: multiple raters with hops=0 ({sorted(own_raters)}); snapshot is corrupt"
            )
    store = LocalStore(owner, scale)
    for rec in records:
        outcome = store.merge_record(rec)
        if outcome is not MergeOutcome.INSERTED:
            raise ValidationError(f"{path}: duplicate record for ({rec.rater}, {rec.item})")
    return store
