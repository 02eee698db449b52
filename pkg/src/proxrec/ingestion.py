"""File ingestion and synthetic contact traces.

Loads initial ratings, contact traces, and item catalogs from CSV, and
synthesizes traces when no real mobility data is available. The synthetic
model is a pairwise Poisson contact process (optionally denser inside
communities) rather than a spatial mobility model: encounters are exactly
what the exchange protocol consumes, and the process stays deterministic
and cheap. Swap in a real trace file to drop the assumption.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from pathlib import Path

from .core import (
    DEFAULT_ONTOLOGY,
    ItemId,
    ItemMeta,
    RatingRecord,
    RatingScale,
    Source,
    UserId,
    ValidationError,
    read_rating_csv,
    write_rating_csv,
)

TRACE_CSV_HEADER = ["time", "a", "b", "duration"]
CATALOG_KEY_COLUMNS = ["category", "key"]


@dataclass(frozen=True, slots=True)
class EncounterEvent:
    """One proximity contact; the atom driving the simulation.

    Always stored with a < b so symmetric duplicates collapse and event
    ordering by (time, a, b) is canonical.
    """

    time: float
    a: UserId
    b: UserId
    duration: float

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValidationError(f"encounter of node {self.a} with itself")
        if self.time < 0 or self.duration < 0:
            raise ValidationError("encounter time and duration must be >= 0")

    @classmethod
    def normalized(cls, time: float, a: UserId, b: UserId, duration: float) -> "EncounterEvent":
        if a > b:
            a, b = b, a
        return cls(time, a, b, duration)

    def sort_key(self) -> tuple[float, UserId, UserId, float]:
        return (self.time, self.a, self.b, self.duration)


@dataclass(frozen=True, slots=True)
class TraceGenParams:
    """Parameters of the synthetic pairwise Poisson contact process."""

    n_nodes: int
    horizon: float
    mean_rate: float  # expected contacts per pair per hour
    rate_heterogeneity: float = 1.0
    n_communities: int = 1
    mean_duration: float = 60.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_nodes < 1 or self.n_communities < 1:
            raise ValidationError("n_nodes and n_communities must be >= 1")
        if self.horizon < 0:
            raise ValidationError("horizon must be >= 0")
        if self.mean_rate <= 0:
            raise ValidationError("mean_rate must be > 0")
        if self.rate_heterogeneity < 1:
            raise ValidationError("rate_heterogeneity must be >= 1")
        if self.mean_duration <= 0:
            raise ValidationError("mean_duration must be > 0")


def load_ratings(
    path: Path | str,
    scale: RatingScale | None = None,
    ontology: tuple[str, ...] = DEFAULT_ONTOLOGY,
) -> list[RatingRecord]:
    """Load a node-authored ratings file (each record hops=0 on its rater)."""
    records = read_rating_csv(path, scale, ontology)
    for rec in records:
        if rec.hops != 0:
            raise ValidationError(
                f"{path}: record ({rec.rater}, {rec.item}) has hops={rec.hops}; "
                "initial ratings must be the raters' own (hops=0)"
            )
    return records


def load_trace(path: Path | str) -> list[EncounterEvent]:
    """Load a contact trace CSV, sorted and with symmetric duplicates collapsed."""
    path = Path(path)
    seen: set[tuple[float, UserId, UserId, float]] = set()
    events: list[EncounterEvent] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: missing header row") from None
        if [h.strip() for h in header] != TRACE_CSV_HEADER:
            raise ValidationError(f"{path}: expected header {','.join(TRACE_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                time = float(row[0])
                a = int(row[1])
                b = int(row[2])
                duration = float(row[3])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            if a < 0 or b < 0:
                raise ValidationError(f"{path}:{lineno}: node ids must be non-negative")
            try:
                ev = EncounterEvent.normalized(time, a, b, duration)
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            key = ev.sort_key()
            if key in seen:
                continue
            seen.add(key)
            events.append(ev)
    events.sort(key=EncounterEvent.sort_key)
    return events


def save_trace(events: list[EncounterEvent], path: Path | str) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_CSV_HEADER)
        for ev in events:
            writer.writerow([ev.time, ev.a, ev.b, ev.duration])


def generate_trace(params: TraceGenParams) -> list[EncounterEvent]:
    """Draw a deterministic synthetic contact trace.

    Per unordered node pair, contact times follow a Poisson process with
    the configured per-hour rate, multiplied by rate_heterogeneity when
    both nodes share a community (node % n_communities). Durations are
    exponential with the configured mean. Identical params produce
    identical traces.
    """
    rng = random.Random(f"trace/{params.seed}")
    rate_per_s = params.mean_rate / 3600.0
    events: list[EncounterEvent] = []
    for a in range(params.n_nodes):
        for b in range(a + 1, params.n_nodes):
            rate = rate_per_s
            if a % params.n_communities == b % params.n_communities:
                rate *= params.rate_heterogeneity
            t = rng.expovariate(rate)
            while t <= params.horizon:
                events.append(EncounterEvent(t, a, b, rng.expovariate(1.0 / params.mean_duration)))
                t += rng.expovariate(rate)
    events.sort(key=EncounterEvent.sort_key)
    return events


@dataclass
class Catalog:
    """Structured item metadata: a shared attribute schema plus per-item weights."""

    schema: tuple[str, ...]
    items: dict[ItemId, ItemMeta]

    def __contains__(self, item: ItemId) -> bool:
        return item in self.items

    def __getitem__(self, item: ItemId) -> ItemMeta:
        return self.items[item]

    def __len__(self) -> int:
        return len(self.items)

    def get(self, item: ItemId) -> ItemMeta | None:
        return self.items.get(item)

    def vector(self, item: ItemId) -> tuple[float, ...]:
        """Attribute weights of item aligned to the schema order."""
        attrs = self.items[item].attributes
        return tuple(attrs.get(name, 0.0) for name in self.schema)


def load_catalog(path: Path | str, ontology: tuple[str, ...] = DEFAULT_ONTOLOGY) -> Catalog:
    """Load an item catalog CSV: category,key,<attr...> with weights in [0, 1].

    Missing trailing attributes default to 0. Duplicate items and weights
    outside [0, 1] are errors.
    """
    path = Path(path)
    items: dict[ItemId, ItemMeta] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: missing header row") from None
        if header[: len(CATALOG_KEY_COLUMNS)] != CATALOG_KEY_COLUMNS:
            raise ValidationError(f"{path}: header must start with {','.join(CATALOG_KEY_COLUMNS)}")
        schema = tuple(header[len(CATALOG_KEY_COLUMNS):])
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < len(CATALOG_KEY_COLUMNS) or len(row) > len(header):
                raise ValidationError(f"{path}:{lineno}: expected at most {len(header)} fields")
            category, key = row[0], row[1]
            if category not in ontology:
                raise ValidationError(f"{path}:{lineno}: category {category!r} not in ontology {ontology}")
            if not key:
                raise ValidationError(f"{path}:{lineno}: empty item key")
            item = ItemId(category, key)
            if item in items:
                raise ValidationError(f"{path}:{lineno}: duplicate catalog entry for {item}")
            attributes: dict[str, float] = {}
            for name, cell in zip(schema, row[2:]):
                try:
                    weight = float(cell) if cell != "" else 0.0
                except ValueError as exc:
                    raise ValidationError(f"{path}:{lineno}: {exc}") from None
                if not 0.0 <= weight <= 1.0:
                    raise ValidationError(f"{path}:{lineno}: weight {weight} for {name!r} outside [0, 1]")
                attributes[name] = weight
            for name in schema[len(row) - 2:]:
                attributes[name] = 0.0
            items[item] = ItemMeta(item, attributes)
    return Catalog(schema=schema, items=items)


def convert_ml100k(src: Path | str, dst: Path | str, scale: RatingScale | None = None) -> int:
    """Convert a MovieLens-100k style u.data file to the ratings CSV format.

    Input lines are user<TAB>item<TAB>rating<TAB>timestamp. Users map to
    rater ids, movies to items in the 'movies' category, and timestamps are
    preserved. Returns the number of converted records.
    """
    src = Path(src)
    dst = Path(dst)
    scale = scale if scale is not None else RatingScale()
    records: list[RatingRecord] = []
    with src.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValidationError(f"{src}:{lineno}: expected 4 tab-separated fields")
            try:
                user = int(parts[0])
                movie = parts[1]
                value = float(parts[2])
                timestamp = int(parts[3])
            except ValueError as exc:
                raise ValidationError(f"{src}:{lineno}: {exc}") from None
            if not scale.contains(value):
                raise ValidationError(f"{src}:{lineno}: rating {value} outside scale")
            records.append(
                RatingRecord(user, ItemId("movies", movie), value, timestamp, Source.MANUAL, 0)
            )
    write_rating_csv(records, dst)
    return len(records)
