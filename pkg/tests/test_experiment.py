from __future__ import annotations

import math

import pytest

from proxrec.core import ValidationError
from proxrec.experiment import load_experiment

from conftest import write_ratings_csv


def write_files(tmp_path, body: str):
    write_ratings_csv(tmp_path / "ratings.csv", {0: {"a": 3.0}, 1: {"a": 4.0}})
    (tmp_path / "exp.yaml").write_text(body)
    return tmp_path / "exp.yaml"


BASE = (
    "ratings_path: ratings.csv\n"
    "output_dir: results\n"
    "horizon: 100\n"
    "metric_period: 50\n"
    "trace_gen: {n_nodes: 2, mean_rate: 1.0}\n"
)


def test_paths_resolve_relative_to_file(tmp_path):
    path = write_files(tmp_path, BASE)
    exp = load_experiment(path)
    assert exp.config.ratings_path == tmp_path / "ratings.csv"
    assert exp.output_dir == tmp_path / "results"
    assert exp.config.trace_gen.horizon == 100.0
    assert exp.config.trace_gen.seed == exp.config.seed == 0


def test_unknown_nested_key_named_with_path(tmp_path):
    path = write_files(tmp_path, BASE + "exchange: {upload_periodd: 60}\n")
    with pytest.raises(ValidationError, match="exchange.upload_periodd"):
        load_experiment(path)


def test_max_hops_accepts_inf_spellings(tmp_path):
    for spelling in ('"inf"', ".inf"):
        path = write_files(tmp_path, BASE + f"exchange: {{relay: true, max_hops: {spelling}}}\n")
        assert load_experiment(path).config.exchange.max_hops == math.inf
    path = write_files(tmp_path, BASE + "exchange: {relay: true, max_hops: 3}\n")
    assert load_experiment(path).config.exchange.max_hops == 3.0
    path = write_files(tmp_path, BASE + 'exchange: {relay: true, max_hops: "lots"}\n')
    with pytest.raises(ValidationError):
        load_experiment(path)


def test_both_trace_sources_rejected(tmp_path):
    body = BASE + "trace_path: trace.csv\n"
    path = write_files(tmp_path, body)
    with pytest.raises(ValidationError):
        load_experiment(path)


def test_missing_required_key_is_named(tmp_path):
    path = write_files(tmp_path, "ratings_path: ratings.csv\noutput_dir: o\nhorizon: 10\n")
    with pytest.raises(ValidationError, match="metric_period"):
        load_experiment(path)


def test_wrong_types_rejected(tmp_path):
    path = write_files(tmp_path, BASE + "k_neighbors: 2.5\n")
    with pytest.raises(ValidationError, match="k_neighbors"):
        load_experiment(path)
    path = write_files(tmp_path, BASE + "similarity: {fallback_to_proximity: 3}\n")
    with pytest.raises(ValidationError, match="fallback_to_proximity"):
        load_experiment(path)


def test_seed_override(tmp_path):
    path = write_files(tmp_path, BASE + "seed: 5\n")
    assert load_experiment(path).config.seed == 5
    assert load_experiment(path, seed_override=9).config.seed == 9
