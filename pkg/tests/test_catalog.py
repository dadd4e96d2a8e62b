import json

import pytest

from aratlab.catalog import (
    Catalog,
    SegmentSlot,
    load_catalog,
    default_catalog_path,
    parse_catalog,
)
from aratlab.errors import NotFound, ValidationFailure


def doc():
    return json.loads(default_catalog_path().read_text())


def test_default_catalog_loads_19_tasks(catalog):
    assert len(catalog.tasks) == 19
    assert [s.display_name for s in catalog.expected_sequence(1)][:2] == ["IP", "T"]


def test_task1_default_sequence(catalog):
    assert [s.display_name for s in catalog.expected_sequence(1)] == ["IP", "T", "MTR", "PR", "MTR2"]


def test_task18_gross_sequence(catalog):
    assert [s.display_name for s in catalog.expected_sequence(18)] == ["GIP", "GT"]


def test_task_out_of_range(catalog):
    with pytest.raises(NotFound) as err:
        catalog.expected_sequence(20)
    assert err.value.machine_code == "task_out_of_range"


def test_recommended_views_for_task1(catalog):
    assert catalog.recommended_view(1, SegmentSlot.parse("IP")) == "Ipsilateral"
    assert catalog.recommended_view(1, SegmentSlot.parse("T")) == "Contralateral"


def test_recommended_view_unknown_slot(catalog):
    with pytest.raises(NotFound) as err:
        catalog.recommended_view(1, SegmentSlot.parse("GT"))
    assert err.value.machine_code == "slot_not_in_task"


def test_definitions_nonempty_for_all_kinds(catalog):
    for kind in ("IP", "T", "MTR", "PR", "GIP", "GT"):
        assert catalog.definition(kind).strip()


def test_missing_task_rejected():
    document = doc()
    document["tasks"] = [t for t in document["tasks"] if t["task_number"] != 19]
    with pytest.raises(ValidationFailure) as err:
        parse_catalog(document)
    assert err.value.machine_code == "incomplete_catalog"


def test_duplicate_task_rejected():
    document = doc()
    document["tasks"].append(dict(document["tasks"][2]))
    with pytest.raises(ValidationFailure) as err:
        parse_catalog(document)
    assert err.value.machine_code == "duplicate_task"


def test_empty_sequence_rejected():
    document = doc()
    document["tasks"][0]["segments"] = []
    with pytest.raises(ValidationFailure) as err:
        parse_catalog(document)
    assert err.value.machine_code == "empty_sequence"


def test_missing_view_rejected():
    document = doc()
    del document["tasks"][0]["segments"][0]["view"]
    with pytest.raises(ValidationFailure) as err:
        parse_catalog(document)
    assert err.value.machine_code == "missing_view"


def test_gross_kind_in_non_gross_task_rejected():
    document = doc()
    document["tasks"][0]["segments"].append({"kind": "GIP", "occurrence": 1, "view": "Ipsilateral"})
    with pytest.raises(ValidationFailure) as err:
        parse_catalog(document)
    assert err.value.machine_code == "subgroup_violation"


def test_empty_definition_rejected():
    document = doc()
    document["definitions"]["IP"] = "  "
    with pytest.raises(ValidationFailure) as err:
        parse_catalog(document)
    assert err.value.machine_code == "missing_definition"


def test_unknown_schema_version_rejected():
    document = doc()
    document["schema_version"] = 99
    with pytest.raises(ValidationFailure) as err:
        parse_catalog(document)
    assert err.value.machine_code == "unsupported_schema_version"


def test_occurrence_order_enforced():
    document = doc()
    segments = document["tasks"][0]["segments"]
    for seg in segments:
        if seg["kind"] == "MTR" and seg["occurrence"] == 2:
            seg["occurrence"] = 3
    with pytest.raises(ValidationFailure) as err:
        parse_catalog(document)
    assert err.value.machine_code == "bad_occurrence_order"


def test_round_trip_serialization(catalog):
    reparsed = parse_catalog(json.loads(json.dumps(catalog.to_document())))
    assert reparsed == catalog


def test_recommended_view_total_over_all_tasks(catalog):
    for n in range(1, 20):
        for slot in catalog.expected_sequence(n):
            assert catalog.recommended_view(n, slot) in (
                "Ipsilateral", "Contralateral", "Transverse", "Back"
            )


def test_expected_sequence_pure(catalog):
    for n in (1, 7, 17):
        assert catalog.expected_sequence(n) == catalog.expected_sequence(n)


def test_required_kinds_per_subgroup(catalog):
    for n in range(1, 17):
        kinds = {s.kind for s in catalog.expected_sequence(n)}
        assert "IP" in kinds and "T" in kinds
        assert not kinds & {"GIP", "GT"}
    for n in range(17, 20):
        kinds = {s.kind for s in catalog.expected_sequence(n)}
        assert kinds == {"GIP", "GT"}


def test_slot_display_names():
    assert SegmentSlot.parse("MTR2") == SegmentSlot("MTR", 2)
    assert SegmentSlot("MTR", 2).display_name == "MTR2"
    assert SegmentSlot("IP", 1).display_name == "IP"
    with pytest.raises(ValidationFailure):
        SegmentSlot.parse("XYZ")
    with pytest.raises(ValidationFailure):
        SegmentSlot("IP", 0)


def test_contralateral_zoom_default(catalog):
    assert catalog.view_zoom["Contralateral"] == 2.5
    assert catalog.view_zoom["Ipsilateral"] == 1.0
