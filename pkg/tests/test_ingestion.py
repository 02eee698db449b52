from __future__ import annotations

import math
import os
import statistics
from pathlib import Path

import pytest

from proxrec.core import ItemId, RatingScale, ValidationError
from proxrec.ingestion import (
    EncounterEvent,
    TraceGenParams,
    convert_ml100k,
    generate_trace,
    load_catalog,
    load_ratings,
    load_trace,
    save_trace,
)

from conftest import write_synthetic_udata


class TestLoadRatings:
    def test_valid_file(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(
            "rater,category,key,value,timestamp,source,hops\n"
            "1,movies,10,4.0,100,manual,0\n"
            "1,music,song,2.5,101,tracked,0\n"
            "2,poi,cafe,5.0,102,third_party,0\n"
        )
        records = load_ratings(path)
        assert len(records) == 3
        assert all(r.hops == 0 for r in records)

    def test_out_of_scale_value_names_line(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(
            "rater,category,key,value,timestamp,source,hops\n"
            "1,movies,10,4.0,100,manual,0\n"
            "1,movies,11,9.0,100,manual,0\n"
        )
        with pytest.raises(ValidationError, match=":3:"):
            load_ratings(path)
        assert len(load_ratings(path, scale=RatingScale(1, 10))) == 2

    def test_nonzero_hops_rejected_as_initial_ratings(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(
            "rater,category,key,value,timestamp,source,hops\n1,movies,10,4.0,100,manual,2\n"
        )
        with pytest.raises(ValidationError, match="hops"):
            load_ratings(path)


class TestLoadTrace:
    def test_sorted_on_load(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("time,a,b,duration\n9.0,1,2,5\n1.0,3,4,5\n1.0,1,2,5\n")
        events = load_trace(path)
        assert [(e.time, e.a, e.b) for e in events] == [(1.0, 1, 2), (1.0, 3, 4), (9.0, 1, 2)]

    def test_symmetric_duplicates_collapse(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("time,a,b,duration\n5,1,2,60\n5,2,1,60\n")
        events = load_trace(path)
        assert len(events) == 1
        assert (events[0].a, events[0].b) == (1, 2)

    def test_empty_file_with_header(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("time,a,b,duration\n")
        assert load_trace(path) == []

    def test_self_encounter_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("time,a,b,duration\n5,3,3,60\n")
        with pytest.raises(ValidationError, match=":2:"):
            load_trace(path)

    def test_negative_fields_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("time,a,b,duration\n-5,1,2,60\n")
        with pytest.raises(ValidationError):
            load_trace(path)
        path.write_text("time,a,b,duration\n5,1,2,-60\n")
        with pytest.raises(ValidationError):
            load_trace(path)

    def test_round_trip(self, tmp_path):
        events = [
            EncounterEvent(1.5, 1, 2, 60.0),
            EncounterEvent(2.25, 0, 3, 0.0),
            EncounterEvent(9.125, 1, 2, 12.5),
        ]
        path = tmp_path / "t.csv"
        save_trace(events, path)
        assert load_trace(path) == events


class TestGenerateTrace:
    def test_zero_rate_rejected(self):
        with pytest.raises(ValidationError):
            TraceGenParams(n_nodes=5, horizon=3600, mean_rate=0.0)

    def test_deterministic_given_seed(self):
        params = TraceGenParams(n_nodes=8, horizon=7200, mean_rate=2.0, seed=99)
        assert generate_trace(params) == generate_trace(params)
        other = TraceGenParams(n_nodes=8, horizon=7200, mean_rate=2.0, seed=100)
        assert generate_trace(other) != generate_trace(params)

    def test_events_satisfy_invariants(self):
        params = TraceGenParams(
            n_nodes=6, horizon=3600, mean_rate=3.0, rate_heterogeneity=4.0,
            n_communities=2, mean_duration=30.0, seed=5,
        )
        events = generate_trace(params)
        assert events == sorted(events, key=EncounterEvent.sort_key)
        for ev in events:
            assert 0 <= ev.time <= params.horizon
            assert ev.duration >= 0
            assert 0 <= ev.a < ev.b < params.n_nodes

    def test_event_count_matches_poisson_expectation(self):
        # 45 pairs * 1 contact/pair/hour * 10 h => mean 450, sd ~21.2.
        params = TraceGenParams(n_nodes=10, horizon=36_000, mean_rate=1.0, seed=2024)
        count = len(generate_trace(params))
        mean, sd = 450.0, math.sqrt(450.0)
        assert abs(count - mean) <= 3 * sd
        # Monte-Carlo check that the generator is calibrated, not just lucky.
        counts = [
            len(generate_trace(TraceGenParams(n_nodes=10, horizon=36_000, mean_rate=1.0, seed=s)))
            for s in range(40)
        ]
        assert abs(statistics.fmean(counts) - mean) <= 4 * sd / math.sqrt(40)

    def test_community_heterogeneity_raises_intra_rates(self):
        base = dict(n_nodes=10, horizon=72_000, mean_rate=1.0, n_communities=2, seed=3)
        events = generate_trace(TraceGenParams(rate_heterogeneity=6.0, **base))
        intra = sum(1 for e in events if e.a % 2 == e.b % 2)
        inter = len(events) - intra
        # 20 intra pairs at 6x rate vs 25 inter pairs at 1x.
        assert intra > 2 * inter


class TestLoadCatalog:
    def test_basic_catalog(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text(
            "category,key,action,comedy,drama\n"
            "movies,1,1.0,0.0,0.5\n"
            "movies,2,0.0,1.0\n"  # trailing attribute omitted -> 0
        )
        catalog = load_catalog(path)
        assert catalog.schema == ("action", "comedy", "drama")
        assert catalog.vector(ItemId("movies", "1")) == (1.0, 0.0, 0.5)
        assert catalog.vector(ItemId("movies", "2")) == (0.0, 1.0, 0.0)

    def test_duplicate_item_rejected(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("category,key,x\nmovies,1,1.0\nmovies,1,0.5\n")
        with pytest.raises(ValidationError, match="duplicate"):
            load_catalog(path)

    def test_weight_out_of_range_rejected(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("category,key,x\nmovies,1,1.5\n")
        with pytest.raises(ValidationError, match=r"\[0, 1\]"):
            load_catalog(path)


ML100K_PATH = os.environ.get("PROXREC_ML100K", "")


class TestConvertMl100k:
    @pytest.mark.skipif(
        not (ML100K_PATH and Path(ML100K_PATH).exists()),
        reason="real MovieLens-100k not available; set PROXREC_ML100K to its u.data",
    )
    def test_full_ml100k_converts_to_100000_records(self, tmp_path):
        assert convert_ml100k(ML100K_PATH, tmp_path / "ml.csv") == 100_000

    def test_converts_tab_separated_ratings(self, tmp_path):
        src = tmp_path / "u.data"
        n = write_synthetic_udata(src, n_users=5, n_items=40, seed=1, per_user=(5, 10))
        dst = tmp_path / "ratings.csv"
        assert convert_ml100k(src, dst) == n
        records = load_ratings(dst)
        assert len(records) == n
        assert {r.item.category for r in records} == {"movies"}
        assert all(r.hops == 0 for r in records)
        assert all(float(r.value).is_integer() for r in records)

    def test_malformed_line_names_lineno(self, tmp_path):
        src = tmp_path / "u.data"
        src.write_text("1\t2\t3\t100\n1\t2\t3\n")
        with pytest.raises(ValidationError, match=":2:"):
            convert_ml100k(src, tmp_path / "out.csv")
