"""Experiment files: strict, reproducible run descriptions.

An experiment file is YAML (JSON parses too) mirroring SimConfig field for
field, plus an output directory. Parsing is strict: unknown keys are
rejected with their dotted path, because a silently ignored typo in an
experiment config destroys reproducibility. All paths are resolved
relative to the file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .core import DEFAULT_ONTOLOGY, RatingScale, ValidationError
from .exchange import ExchangePolicy
from .ingestion import TraceGenParams
from .similarity import SimilarityConfig
from .simulator import CloudParams, SimConfig


@dataclass(frozen=True)
class Experiment:
    config: SimConfig
    output_dir: Path


class _Section:
    """One mapping level of the config, consumed key by key."""

    def __init__(self, data: dict, prefix: str):
        if not isinstance(data, dict):
            raise ValidationError(f"config section {prefix or '<root>'} must be a mapping")
        self._data = dict(data)
        self._prefix = prefix

    def _label(self, key: str) -> str:
        return f"{self._prefix}{key}"

    def take(self, key: str, default=None, required: bool = False):
        if key in self._data:
            return self._data.pop(key)
        if required:
            raise ValidationError(f"missing required config key {self._label(key)!r}")
        return default

    def take_number(self, key: str, default=None, required: bool = False):
        value = self.take(key, default, required)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"config key {self._label(key)!r} must be a number")
        return float(value)

    def take_int(self, key: str, default=None, required: bool = False):
        value = self.take(key, default, required)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"config key {self._label(key)!r} must be an integer")
        return value

    def take_bool(self, key: str, default=None):
        value = self.take(key, default)
        if value is None:
            return None
        if not isinstance(value, bool):
            raise ValidationError(f"config key {self._label(key)!r} must be a boolean")
        return value

    def take_str(self, key: str, default=None, required: bool = False):
        value = self.take(key, default, required)
        if value is None:
            return None
        if not isinstance(value, str):
            raise ValidationError(f"config key {self._label(key)!r} must be a string")
        return value

    def subsection(self, key: str) -> "_Section | None":
        value = self.take(key)
        if value is None:
            return None
        return _Section(value, f"{self._prefix}{key}.")

    def finish(self) -> None:
        if self._data:
            key = sorted(self._data)[0]
            raise ValidationError(f"unknown config key {self._label(key)!r}")


def _parse_exchange(sec: _Section | None) -> ExchangePolicy:
    if sec is None:
        return ExchangePolicy()
    max_hops_raw = sec.take("max_hops")
    if max_hops_raw is None:
        max_hops = math.inf
    elif isinstance(max_hops_raw, str):
        if max_hops_raw != "inf":
            raise ValidationError('config key "exchange.max_hops" must be a number or "inf"')
        max_hops = math.inf
    elif isinstance(max_hops_raw, bool) or not isinstance(max_hops_raw, (int, float)):
        raise ValidationError('config key "exchange.max_hops" must be a number or "inf"')
    else:
        max_hops = float(max_hops_raw)
    policy = ExchangePolicy(
        upload_period=sec.take_number("upload_period", 600.0),
        relay=sec.take_bool("relay", False),
        max_hops=max_hops,
        fetch_deferral=sec.take_number("fetch_deferral", 30.0),
        adv_size_cap=sec.take_int("adv_size_cap", 512),
        payload_size_cap=sec.take_int("payload_size_cap", 4 * 1024 * 1024),
    )
    sec.finish()
    return policy


def _parse_similarity(sec: _Section | None) -> SimilarityConfig:
    if sec is None:
        return SimilarityConfig()
    cfg = SimilarityConfig(
        metric=sec.take_str("metric", "pearson"),
        min_overlap=sec.take_int("min_overlap", 3),
        significance_threshold=sec.take_int("significance_threshold", 10),
        count_scale=sec.take_number("count_scale", 5.0),
        duration_scale=sec.take_number("duration_scale", 3600.0),
        duration_weight=sec.take_number("duration_weight", 0.5),
        rating_weight=sec.take_number("rating_weight", 0.7),
        fallback_to_proximity=sec.take_bool("fallback_to_proximity", True),
    )
    sec.finish()
    return cfg


def _parse_cloud(sec: _Section | None) -> CloudParams:
    if sec is None:
        return CloudParams()
    params = CloudParams(
        upload_latency=sec.take_number("upload_latency", 0.0),
        fetch_latency=sec.take_number("fetch_latency", 0.0),
        availability=sec.take_number("availability", 1.0),
    )
    sec.finish()
    return params


def _parse_trace_gen(sec: _Section | None, horizon: float, default_seed: int) -> TraceGenParams | None:
    if sec is None:
        return None
    params = TraceGenParams(
        n_nodes=sec.take_int("n_nodes", required=True),
        horizon=horizon,
        mean_rate=sec.take_number("mean_rate", required=True),
        rate_heterogeneity=sec.take_number("rate_heterogeneity", 1.0),
        n_communities=sec.take_int("n_communities", 1),
        mean_duration=sec.take_number("mean_duration", 60.0),
        seed=sec.take_int("seed", default_seed),
    )
    sec.finish()
    return params


def _parse_scale(sec: _Section | None) -> RatingScale:
    if sec is None:
        return RatingScale()
    scale = RatingScale(
        r_min=sec.take_number("r_min", 1.0),
        r_max=sec.take_number("r_max", 5.0),
    )
    sec.finish()
    return scale


def load_experiment(path: Path | str, seed_override: int | None = None) -> Experiment:
    """Parse an experiment file into a validated SimConfig plus output dir."""
    path = Path(path)
    base = path.parent
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: not valid YAML: {exc}") from None
    root = _Section(raw if raw is not None else {}, "")

    ratings_path = base / root.take_str("ratings_path", required=True)
    output_dir = base / root.take_str("output_dir", required=True)
    horizon = root.take_number("horizon", required=True)
    metric_period = root.take_number("metric_period", required=True)
    trace_path_raw = root.take_str("trace_path")
    catalog_path_raw = root.take_str("catalog_path")
    seed = root.take_int("seed", 0)
    if seed_override is not None:
        seed = seed_override
    k_neighbors = root.take_int("k_neighbors", 10)
    holdout_fraction = root.take_number("holdout_fraction", 0.0)
    ontology_raw = root.take("ontology")
    if ontology_raw is None:
        ontology = DEFAULT_ONTOLOGY
    elif isinstance(ontology_raw, list) and all(isinstance(c, str) for c in ontology_raw):
        ontology = tuple(ontology_raw)
    else:
        raise ValidationError('config key "ontology" must be a list of strings')

    exchange = _parse_exchange(root.subsection("exchange"))
    similarity = _parse_similarity(root.subsection("similarity"))
    cloud = _parse_cloud(root.subsection("cloud"))
    trace_gen = _parse_trace_gen(root.subsection("trace_gen"), horizon, seed)
    scale = _parse_scale(root.subsection("scale"))
    root.finish()

    config = SimConfig(
        ratings_path=ratings_path,
        horizon=horizon,
        metric_period=metric_period,
        trace_path=(base / trace_path_raw) if trace_path_raw is not None else None,
        trace_gen=trace_gen,
        catalog_path=(base / catalog_path_raw) if catalog_path_raw is not None else None,
        exchange=exchange,
        similarity=similarity,
        cloud=cloud,
        k_neighbors=k_neighbors,
        holdout_fraction=holdout_fraction,
        seed=seed,
        scale=scale,
        ontology=ontology,
    )
    return Experiment(config=config, output_dir=output_dir)
