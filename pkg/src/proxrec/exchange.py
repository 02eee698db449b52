"""Token-broadcast exchange protocol over a simulated cloud store.

Large rating payloads never cross the proximity channel. Each node
periodically serializes its shareable records, uploads the blob to a cloud
store, and broadcasts only a small fixed-size advertisement carrying the
storage token. Peers that overhear an advertisement fetch the blob later
(deferred, e.g. once on cheap connectivity) and merge it into their store.

Canonical payload wire format (big-endian, byte-exact):

    offset  size  field
    0       4     magic 'PRXR'
    4       1     version, currently 1
    5       8     sender id, u64
    13      4     record count, u32
    17      ...   records, sorted by (rater, item), each:
                    rater      u64
                    category   u8   (index into the configured ontology)
                    key length u16
                    key        UTF-8 bytes
                    value      f32
                    timestamp  u64
                    source     u8   (tracked=0, third_party=1, manual=2)
                    hops       u8

A record therefore occupies 25 + len(key) bytes. Values travel as 32-bit
floats: exact for the usual half-point rating grids.

Canonical advertisement wire format (32 bytes):

    offset  size  field
    0       4     magic 'PRXA'
    4       1     version, currently 1
    5       3     reserved, zero
    8       8     sender id, u64
    16      16    storage token

Payload records carry the hop count they will have at the receiver: the
sender's stored hop count plus one. Own records are therefore emitted at
hops 1 and relayed records at their stored hops + 1; relaying forwards only
records whose stored hops are below the policy's max_hops.
"""

from __future__ import annotations

import logging
import math
import random
import struct
from dataclasses import dataclass, field

from .core import (
    DEFAULT_ONTOLOGY,
    ItemId,
    LocalStore,
    MergeOutcome,
    ProtocolError,
    RatingRecord,
    Source,
    UserId,
    ValidationError,
)

logger = logging.getLogger(__name__)

PAYLOAD_MAGIC = b"PRXR"
ADV_MAGIC = b"PRXA"
WIRE_VERSION = 1

PAYLOAD_HEADER_SIZE = 17
RECORD_FIXED_SIZE = 25  # rater 8 + category 1 + keylen 2 + value 4 + timestamp 8 + source 1 + hops 1
ADV_WIRE_SIZE = 32
TOKEN_SIZE = 16

_HEADER = struct.Struct(">4sBQI")
_REC_HEAD = struct.Struct(">QBH")
_REC_TAIL = struct.Struct(">fQBB")

SOURCE_CODES = {Source.TRACKED: 0, Source.THIRD_PARTY: 1, Source.MANUAL: 2}
_CODE_SOURCES = {code: src for src, code in SOURCE_CODES.items()}


@dataclass(frozen=True, slots=True)
class ExchangePolicy:
    """Knobs of the exchange protocol.

    relay=False shares own records only. With relay=True, records received
    from previous encounters are forwarded as well, up to max_hops transfers
    from their origin (math.inf for unbounded flooding).
    """

    upload_period: float = 600.0
    relay: bool = False
    max_hops: float = math.inf
    fetch_deferral: float = 30.0
    adv_size_cap: int = 512
    payload_size_cap: int = 4 * 1024 * 1024

    def __post_init__(self) -> None:
        if self.upload_period <= 0:
            raise ValidationError("upload_period must be > 0")
        if self.relay and self.max_hops < 1:
            raise ValidationError("max_hops must be >= 1 when relaying")
        if self.fetch_deferral < 0:
            raise ValidationError("fetch_deferral must be >= 0")
        if self.adv_size_cap <= 0 or self.payload_size_cap <= 0:
            raise ValidationError("size caps must be > 0")


@dataclass(frozen=True, slots=True)
class Payload:
    """The large serialized record set fetched out-of-band."""

    sender: UserId
    records: tuple[RatingRecord, ...]
    created_at: float


@dataclass(frozen=True, slots=True)
class Advertisement:
    """The small broadcast message: a storage token, nothing more."""

    sender: UserId
    token: bytes
    issued_at: float


@dataclass(frozen=True, slots=True)
class PendingFetch:
    """A deferred download noted by a node during an encounter."""

    node: UserId
    sender: UserId
    token: bytes
    due: float


@dataclass(slots=True)
class MergeStats:
    inserted: int = 0
    replaced: int = 0
    ignored: int = 0
    dropped: bool = False


def record_wire_size(rec: RatingRecord) -> int:
    return RECORD_FIXED_SIZE + len(rec.item.key.encode("utf-8"))


def item_wire_size(item: ItemId) -> int:
    return RECORD_FIXED_SIZE + len(item.key.encode("utf-8"))


def payload_wire_size(records: list[RatingRecord] | tuple[RatingRecord, ...]) -> int:
    return PAYLOAD_HEADER_SIZE + sum(record_wire_size(r) for r in records)


def encode_payload(payload: Payload, ontology: tuple[str, ...] = DEFAULT_ONTOLOGY) -> bytes:
    """Serialize a payload to the canonical byte layout."""
    out = bytearray(_HEADER.pack(PAYLOAD_MAGIC, WIRE_VERSION, payload.sender, len(payload.records)))
    cat_index = {name: i for i, name in enumerate(ontology)}
    for rec in payload.records:
        try:
            cat = cat_index[rec.item.category]
        except KeyError:
            raise ValidationError(f"category {rec.item.category!r} not in ontology {ontology}") from None
        key = rec.item.key.encode("utf-8")
        if len(key) > 0xFFFF:
            raise ValidationError(f"item key too long to encode ({len(key)} bytes)")
        if rec.hops > 0xFF:
            raise ValidationError(f"hop count {rec.hops} exceeds wire limit 255")
        out += _REC_HEAD.pack(rec.rater, cat, len(key))
        out += key
        out += _REC_TAIL.pack(rec.value, rec.timestamp, SOURCE_CODES[rec.source], rec.hops)
    return bytes(out)


def decode_payload(data: bytes, ontology: tuple[str, ...] = DEFAULT_ONTOLOGY) -> Payload:
    """Parse canonical payload bytes; raises ValidationError on corruption.

    created_at is not on the wire; decoded payloads carry 0.0 there.
    """
    if len(data) < PAYLOAD_HEADER_SIZE:
        raise ValidationError("payload shorter than header")
    magic, version, sender, count = _HEADER.unpack_from(data, 0)
    if magic != PAYLOAD_MAGIC:
        raise ValidationError(f"bad payload magic {magic!r}")
    if version != WIRE_VERSION:
        raise ValidationError(f"unsupported payload version {version}")
    pos = PAYLOAD_HEADER_SIZE
    records: list[RatingRecord] = []
    for _ in range(count):
        if pos + _REC_HEAD.size > len(data):
            raise ValidationError("truncated payload record")
        rater, cat, keylen = _REC_HEAD.unpack_from(data, pos)
        pos += _REC_HEAD.size
        if pos + keylen + _REC_TAIL.size > len(data):
            raise ValidationError("truncated payload record")
        key = data[pos:pos + keylen].decode("utf-8")
        pos += keylen
        value, timestamp, source_code, hops = _REC_TAIL.unpack_from(data, pos)
        pos += _REC_TAIL.size
        if cat >= len(ontology):
            raise ValidationError(f"category code {cat} outside ontology of {len(ontology)}")
        if source_code not in _CODE_SOURCES:
            raise ValidationError(f"unknown source code {source_code}")
        records.append(
            RatingRecord(rater, ItemId(ontology[cat], key), value, timestamp, _CODE_SOURCES[source_code], hops)
        )
    if pos != len(data):
        raise ValidationError(f"{len(data) - pos} trailing bytes after payload records")
    return Payload(sender=sender, records=tuple(records), created_at=0.0)


def encode_advertisement(adv: Advertisement) -> bytes:
    if len(adv.token) != TOKEN_SIZE:
        raise ValidationError(f"token must be {TOKEN_SIZE} bytes, got {len(adv.token)}")
    return ADV_MAGIC + bytes([WIRE_VERSION, 0, 0, 0]) + struct.pack(">Q", adv.sender) + adv.token


def build_payload(store: LocalStore, policy: ExchangePolicy, now: float) -> Payload:
    """Assemble the shareable record set of a store.

    Every emitted record carries hops incremented by one relative to the
    store. If the serialized size exceeds the policy cap, the highest-hop
    records are dropped first (ties broken by (rater, item) order, later
    keys dropped first) until the payload fits. Own records are never
    dropped; if they alone exceed the cap the store has outgrown the
    protocol and an error is raised.
    """
    own = store.own_records()
    candidates = [rec.with_hops(rec.hops + 1) for rec in own]
    if policy.relay:
        for rec in store.records():
            if rec.rater != store.owner and rec.hops < policy.max_hops:
                candidates.append(rec.with_hops(rec.hops + 1))

    size = payload_wire_size(candidates)
    if size > policy.payload_size_cap:
        own_size = payload_wire_size(candidates[: len(own)])
        if own_size > policy.payload_size_cap:
            raise ProtocolError(
                f"own records of node {store.owner} serialize to {own_size} bytes, "
                f"exceeding the payload cap of {policy.payload_size_cap}"
            )
        # Keep the longest low-hop prefix that fits.
        candidates.sort(key=lambda r: (r.hops, r.rater, r.item))
        kept: list[RatingRecord] = []
        size = PAYLOAD_HEADER_SIZE
        for rec in candidates:
            rec_size = record_wire_size(rec)
            if size + rec_size > policy.payload_size_cap:
                break
            kept.append(rec)
            size += rec_size
        candidates = kept

    candidates.sort(key=lambda r: (r.rater, r.item))
    return Payload(sender=store.owner, records=tuple(candidates), created_at=now)


@dataclass
class CloudStore:
    """Simulated third-party cloud storage provider.

    Holds one live object per sender; a new upload replaces the sender's
    previous object, so fetches of stale tokens fail. An object becomes
    visible upload_latency seconds after upload, and each fetch of a live,
    visible object succeeds with probability availability (drawn from the
    store's own seeded RNG, in call order).
    """

    upload_latency: float = 0.0
    fetch_latency: float = 0.0
    availability: float = 1.0
    seed: int | str = 0
    _rng: random.Random = field(init=False, repr=False)
    _objects: dict[bytes, tuple[bytes, float]] = field(init=False, default_factory=dict, repr=False)
    _current: dict[UserId, bytes] = field(init=False, default_factory=dict, repr=False)
    _issued: set[bytes] = field(init=False, default_factory=set, repr=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.availability <= 1.0:
            raise ValidationError("availability must lie in [0, 1]")
        if self.upload_latency < 0 or self.fetch_latency < 0:
            raise ValidationError("latencies must be >= 0")
        self._rng = random.Random(f"cloud/{self.seed}")

    def upload(self, sender: UserId, blob: bytes, now: float) -> bytes:
        """Store blob under a fresh token, replacing the sender's old object."""
        token = self._fresh_token()
        old = self._current.get(sender)
        if old is not None:
            self._objects.pop(old, None)
        self._objects[token] = (blob, now)
        self._current[sender] = token
        return token

    def _fresh_token(self) -> bytes:
        while True:
            token = self._rng.getrandbits(8 * TOKEN_SIZE).to_bytes(TOKEN_SIZE, "big")
            if token not in self._issued:
                self._issued.add(token)
                return token

    def fetch(self, token: bytes, now: float) -> bytes | None:
        """Return the blob, or None when the fetch is dropped.

        Drops happen when the token was replaced (or never existed), when
        the object is not yet visible, or when the availability draw fails.
        """
        entry = self._objects.get(token)
        if entry is None:
            return None
        blob, uploaded_at = entry
        if now < uploaded_at + self.upload_latency:
            return None
        if self.availability < 1.0 and self._rng.random() >= self.availability:
            return None
        return blob


def broadcast_on_encounter(
    a_store: LocalStore,
    b_store: LocalStore,
    a_adv: Advertisement | None,
    b_adv: Advertisement | None,
    time: float,
    duration: float,
    policy: ExchangePolicy,
) -> list[PendingFetch]:
    """Exchange advertisements during one proximity contact.

    Both nodes log the encounter. Each node that overhears a peer
    advertisement schedules a deferred fetch; no payload crosses the
    proximity channel. Nodes without a token yet simply advertise nothing.
    """
    a_store.record_encounter(b_store.owner, duration)
    b_store.record_encounter(a_store.owner, duration)
    due = time + policy.fetch_deferral
    pending: list[PendingFetch] = []
    for adv, receiver in ((a_adv, b_store.owner), (b_adv, a_store.owner)):
        if adv is None:
            continue
        wire = encode_advertisement(adv)
        if len(wire) > policy.adv_size_cap:
            raise ProtocolError(
                f"advertisement is {len(wire)} bytes, exceeding the broadcast cap of {policy.adv_size_cap}"
            )
        pending.append(PendingFetch(node=receiver, sender=adv.sender, token=adv.token, due=due))
    return pending


def fetch_and_merge(
    store: LocalStore,
    cloud: CloudStore,
    token: bytes,
    now: float,
    ontology: tuple[str, ...] = DEFAULT_ONTOLOGY,
    payload_cache: dict[bytes, tuple[RatingRecord, ...]] | None = None,
) -> MergeStats:
    """Download a payload and merge every record into the store.

    Unavailable or stale tokens and malformed payloads are dropped
    silently (stats.dropped set); opportunistic exchange never retries.
    payload_cache, if given, memoizes decoded record tuples per token so
    repeated fetches of one object skip re-decoding.
    """
    blob = cloud.fetch(token, now)
    if blob is None:
        return MergeStats(dropped=True)
    records: tuple[RatingRecord, ...] | None = None
    if payload_cache is not None:
        records = payload_cache.get(token)
    if records is None:
        try:
            records = decode_payload(blob, ontology).records
            for rec in records:
                # Surface corrupt payloads before any record is merged.
                if not store.scale.contains(rec.value):
                    raise ValidationError(f"payload value {rec.value} outside rating scale")
                if rec.hops < 1:
                    raise ValidationError("payload record with hops=0; well-formed payloads carry hops >= 1")
        except ValidationError as exc:
            logger.warning("dropping malformed payload: %s", exc)
            return MergeStats(dropped=True)
        if payload_cache is not None:
            payload_cache[token] = records
    stats = MergeStats()
    for rec in records:
        outcome = store.merge_record(rec)
        if outcome is MergeOutcome.INSERTED:
            stats.inserted += 1
        elif outcome is MergeOutcome.REPLACED:
            stats.replaced += 1
        else:
            stats.ignored += 1
    return stats
