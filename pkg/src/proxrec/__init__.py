"""proxrec: proximity-exchange recommender simulation library."""

from .core import (
    DEFAULT_ONTOLOGY,
    ColdStartError,
    ItemId,
    ItemMeta,
    LocalStore,
    MergeOutcome,
    ProtocolError,
    ProxrecError,
    RatingRecord,
    RatingScale,
    Source,
    UnknownMembersError,
    UserId,
    ValidationError,
    export_store,
    import_store,
)
from .exchange import (
    Advertisement,
    CloudStore,
    ExchangePolicy,
    Payload,
    PendingFetch,
    broadcast_on_encounter,
    build_payload,
    decode_payload,
    encode_advertisement,
    encode_payload,
    fetch_and_merge,
)
from .ingestion import (
    Catalog,
    EncounterEvent,
    TraceGenParams,
    convert_ml100k,
    generate_trace,
    load_catalog,
    load_ratings,
    load_trace,
    save_trace,
)
from .recommender import (
    Basis,
    GroupPrediction,
    GroupStrategy,
    Prediction,
    content_score,
    group_recommend,
    predict,
    top_n,
)
from .similarity import (
    SimilarityConfig,
    hybrid_similarity,
    proximity_similarity,
    rating_similarity,
    select_neighbors,
)
from .simulator import (
    CloudParams,
    MetricsLog,
    MetricsRow,
    SimConfig,
    SimResult,
    holdout_split,
    run,
    snapshot_metrics,
    upload_phase,
)

__version__ = "0.1.0"
