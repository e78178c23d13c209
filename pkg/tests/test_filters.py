import random

import pytest

from udi.filters import (
    FilterError,
    FilterSource,
    FilterState,
    IntervalFilter,
    PointFilter,
    apply_local,
    filter_from_wire,
    full_visibility,
    resolve_visibility,
    validate_filter,
)

from oracles import naive_prune_pass, naive_visibility
from randgen import random_instance

SRC = FilterSource("agent", message=1)


def interval(fid, entity, field, lo, hi):
    return IntervalFilter(fid, entity, field, lo, hi, SRC)


def point(fid, entity, field, *values):
    return PointFilter(fid, entity, field, frozenset(values), SRC)


def state_of(schema, *filters):
    state = FilterState()
    for f in filters:
        state = state.with_added(f, schema)
    return state


def visible(schema, store, *filters):
    vis = resolve_visibility(schema, store, state_of(schema, *filters))
    return {name: set(keys) for name, keys in vis.visible.items()}


def test_apply_local_interval(desk_schema, desk_store):
    f = interval("f1", "donors", "age", 18, 90)
    assert apply_local([f], desk_store) == {"D1", "D3", "D4", "D5"}


def test_apply_local_conjunction(desk_schema, desk_store):
    fs = [interval("f1", "donors", "age", 18, 90), point("f2", "donors", "sex", "F")]
    assert apply_local(fs, desk_store) == {"D3", "D5"}


def test_apply_local_missing_value_fails(desk_schema, desk_store):
    from conftest import fixture_sources
    from udi.store import load_tables

    sources = fixture_sources(desk_schema)
    sources["donors"] = sources["donors"].replace("D1,M,25", "D1,M,")
    store = load_tables(desk_schema, sources)
    f = interval("f1", "donors", "age", 0, 200)
    assert apply_local([f], store) == {"D2", "D3", "D4", "D5"}


def test_empty_state_is_identity(desk_schema, desk_store):
    vis = resolve_visibility(desk_schema, desk_store, FilterState())
    assert vis.visible == full_visibility(desk_schema, desk_store).visible
    assert set(vis.visible["donors"]) == {"D1", "D2", "D3", "D4", "D5"}


def test_downward_propagation(desk_schema, desk_store):
    vis = visible(desk_schema, desk_store, interval("f1", "donors", "age", 18, 90))
    assert vis["donors"] == {"D1", "D3", "D4", "D5"}
    assert vis["samples"] == {"S1", "S2", "S4", "S5", "S6"}
    assert vis["datasets"] == {"X1", "X2", "X3", "X5", "X6", "X7"}


def test_childless_parent_stays_visible(desk_schema, desk_store):
    # D5 has no samples but passes the donor filter; nothing downstream is
    # restricted, so upward pruning must stay off.
    vis = visible(desk_schema, desk_store, interval("f1", "donors", "age", 18, 90))
    assert "D5" in vis["donors"]


def test_middle_filter_propagates_both_ways(desk_schema, desk_store):
    vis = visible(desk_schema, desk_store, point("f1", "samples", "organ", "heart"))
    assert vis["samples"] == {"S1", "S3", "S5"}
    assert vis["donors"] == {"D1", "D2", "D4"}
    assert vis["datasets"] == {"X1", "X2", "X4", "X6"}


def test_upward_propagation(desk_schema, desk_store):
    vis = visible(desk_schema, desk_store, point("f1", "datasets", "assay", "CODEX"))
    assert vis["datasets"] == {"X4"}
    assert vis["samples"] == {"S3"}
    assert vis["donors"] == {"D2"}


def test_death_event_example(desk_schema, desk_store):
    vis = visible(
        desk_schema, desk_store, point("f1", "donors", "death_event", "homicide", "suicide")
    )
    assert vis["donors"] == {"D3", "D4"}
    assert vis["samples"] == {"S4", "S5", "S6"}
    assert vis["datasets"] == {"X5", "X6", "X7"}


def test_two_sided_fixpoint(desk_schema, desk_store):
    # Filters above and below samples open both gates on both edges; the
    # fixpoint needs more than one pass.
    vis = visible(
        desk_schema,
        desk_store,
        interval("f1", "donors", "age", 18, 90),
        point("f2", "datasets", "assay", "ATAC-seq"),
    )
    assert vis["donors"] == {"D1", "D4"}
    assert vis["samples"] == {"S1", "S5"}
    assert vis["datasets"] == {"X2", "X6"}


def test_case_study_final_state(desk_schema, desk_store):
    vis = visible(
        desk_schema,
        desk_store,
        interval("f1", "donors", "age", 21, 67),
        point("f2", "donors", "death_event", "accident", "homicide", "suicide"),
    )
    assert vis["donors"] == {"D3", "D4", "D5"}
    assert vis["samples"] == {"S4", "S5", "S6"}
    assert vis["datasets"] == {"X5", "X6", "X7"}


def test_contradictory_filters_empty_everything(desk_schema, desk_store):
    vis = visible(
        desk_schema,
        desk_store,
        interval("f1", "donors", "age", 18, 90),
        point("f2", "donors", "sex", "nonexistent"),
    )
    assert vis["donors"] == set()
    assert vis["samples"] == set()
    assert vis["datasets"] == set()


def test_version_tracks_state(desk_schema, desk_store):
    state = state_of(desk_schema, interval("f1", "donors", "age", 18, 90))
    vis = resolve_visibility(desk_schema, desk_store, state)
    assert vis.version == state.version == 1


# -- validation and wire format ------------------------------------------


def test_validate_rejects_interval_on_categorical(desk_schema):
    with pytest.raises(FilterError):
        validate_filter(interval("f1", "donors", "sex", 0, 1), desk_schema)


def test_validate_rejects_point_on_quantitative(desk_schema):
    with pytest.raises(FilterError):
        validate_filter(point("f1", "donors", "age", "25"), desk_schema)


def test_validate_allows_point_on_identifier(desk_schema):
    validate_filter(point("f1", "donors", "id", "D1", "D2"), desk_schema)


def test_validate_rejects_bad_bounds(desk_schema):
    with pytest.raises(FilterError):
        validate_filter(interval("f1", "donors", "age", 90, 18), desk_schema)


def test_validate_rejects_empty_values(desk_schema):
    with pytest.raises(FilterError):
        validate_filter(point("f1", "donors", "sex"), desk_schema)


def test_validate_rejects_unknown_names(desk_schema):
    with pytest.raises(FilterError):
        validate_filter(interval("f1", "people", "age", 0, 1), desk_schema)
    with pytest.raises(FilterError):
        validate_filter(interval("f1", "donors", "aged", 0, 1), desk_schema)


def test_wire_round_trip(desk_schema):
    for f in (
        interval("f1", "donors", "age", 18, 90),
        point("f2", "donors", "sex", "F", "M"),
        PointFilter("f3", "samples", "organ", frozenset(["heart"]),
                    FilterSource("view", view="v2"), edited=True),
    ):
        assert filter_from_wire(f.to_wire(), desk_schema) == f


def test_wire_values_sorted(desk_schema):
    wire = point("f1", "donors", "death_event", "suicide", "accident", "homicide").to_wire()
    assert wire["values"] == ["accident", "homicide", "suicide"]


def test_from_wire_rejects_unknown_kind(desk_schema):
    with pytest.raises(FilterError):
        filter_from_wire({"id": "f1", "kind": "range"}, desk_schema)


# -- state operations ------------------------------------------------------


def test_with_added_rejects_duplicate_id(desk_schema):
    state = state_of(desk_schema, interval("f1", "donors", "age", 18, 90))
    with pytest.raises(FilterError):
        state.with_added(interval("f1", "donors", "height", 100, 200), desk_schema)


def test_with_updated_marks_edited(desk_schema):
    state = state_of(desk_schema, interval("f1", "donors", "age", 18, 90))
    state = state.with_updated("f1", {"min": 21, "max": 90}, desk_schema)
    f = state.get("f1")
    assert (f.min, f.max) == (21, 90)
    assert f.edited
    assert f.source == SRC
    assert state.version == 2


def test_with_updated_point_values(desk_schema):
    state = state_of(desk_schema, point("f1", "donors", "death_event", "homicide"))
    state = state.with_updated("f1", {"values": ["homicide", "suicide"]}, desk_schema)
    assert state.get("f1").values == frozenset(["homicide", "suicide"])


def test_with_updated_validates(desk_schema):
    state = state_of(desk_schema, interval("f1", "donors", "age", 18, 90))
    with pytest.raises(FilterError):
        state.with_updated("f1", {"min": 90, "max": 18}, desk_schema)
    # failed update leaves the state alone
    assert state.get("f1").min == 18


def test_with_removed(desk_schema):
    state = state_of(
        desk_schema,
        interval("f1", "donors", "age", 18, 90),
        point("f2", "donors", "sex", "F"),
    )
    state = state.with_removed("f1")
    assert state.get("f1") is None
    assert state.get("f2") is not None
    with pytest.raises(FilterError):
        state.with_removed("f1")


def test_with_removed_many(desk_schema):
    state = state_of(
        desk_schema,
        interval("f1", "donors", "age", 18, 90),
        point("f2", "donors", "sex", "F"),
        point("f3", "samples", "organ", "heart"),
    )
    state = state.with_removed_many({"f1", "f3"})
    assert [f.id for f in state.filters] == ["f2"]


# -- randomized cross-checks ----------------------------------------------


def test_matches_naive_oracle_on_random_instances():
    rng = random.Random(20260825)
    for _ in range(40):
        schema, store, state = random_instance(rng)
        vis = resolve_visibility(schema, store, state)
        expected = naive_visibility(schema, store, state)
        assert {k: set(v) for k, v in vis.visible.items()} == expected


def test_engine_output_is_a_fixpoint():
    rng = random.Random(7)
    for _ in range(20):
        schema, store, state = random_instance(rng)
        vis = resolve_visibility(schema, store, state)
        candidates = {name: set(keys) for name, keys in vis.visible.items()}
        assert not naive_prune_pass(
            schema, store, candidates, state.restricted_entities()
        )


def test_filter_order_is_irrelevant():
    rng = random.Random(11)
    for _ in range(20):
        schema, store, state = random_instance(rng, max_filters=4)
        if len(state.filters) < 2:
            continue
        shuffled = list(state.filters)
        rng.shuffle(shuffled)
        reordered = FilterState(tuple(shuffled), state.version)
        a = resolve_visibility(schema, store, state)
        b = resolve_visibility(schema, store, reordered)
        assert a.visible == b.visible


def test_adding_filters_never_grows_visibility():
    rng = random.Random(13)
    for _ in range(20):
        schema, store, state = random_instance(rng, max_filters=5)
        prev = resolve_visibility(schema, store, FilterState()).visible
        partial = FilterState()
        for f in state.filters:
            partial = partial.with_added(f, schema)
            cur = resolve_visibility(schema, store, partial).visible
            for name in cur:
                assert cur[name] <= prev[name]
            prev = cur
