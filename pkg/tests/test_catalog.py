import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from challenge_cascade.catalog import (
    ADMISSIBLE_SUBCATEGORIES,
    DEFAULT_USABILITY_WEIGHTS,
    Category,
    Catalog,
    Channel,
    DuplicateId,
    Equipment,
    InvalidSubcategory,
    Mode,
    PassiveWithoutTrustedDevice,
    PipelineComponent,
    SchemaError,
    TriState,
    UnknownBenefitKey,
    Usability,
    benefit_score,
    load_catalog,
    usability_score,
)

USABILITY_KEYS = [u.value for u in Usability]


def _entry(doc, cid):
    return next(e for e in doc["challenges"] if e["id"] == cid)


class TestEnums:
    def test_tristate_encoding(self):
        assert TriState.OFFERED.numeric == 1.0
        assert TriState.QUASI.numeric == 0.5
        assert TriState.NOT_OFFERED.numeric == 0.0

    def test_pipeline_components_are_the_seven(self):
        assert {c.value for c in PipelineComponent} == {
            "face_detector", "landmark_detection", "face_alignment", "segmentation",
            "face_swapper", "blending", "color_correction",
        }

    def test_five_categories(self):
        assert len(Category) == 5


class TestDefaultCatalog:
    def test_sixteen_challenges_all_categories(self, catalog):
        assert len(catalog) == 16
        assert catalog.categories() == set(Category)

    def test_invariants_hold(self, catalog):
        for ch in catalog.values():
            if ch.mode is Mode.PASSIVE:
                assert Equipment.TRUSTED_DEVICE in ch.required_equipment
                assert ch.benefits.usability[Usability.PHYSICALLY_EFFORTLESS] is TriState.OFFERED
            else:
                assert ch.compliance.channel is not Channel.NONE
            assert TriState.QUASI not in ch.benefits.deployability.values()
            allowed = ADMISSIBLE_SUBCATEGORIES[ch.category]
            assert allowed is None or ch.subcategory in allowed

    def test_round_trip(self, catalog):
        again = load_catalog(catalog.dumps())
        assert again == catalog
        assert again.dumps() == catalog.dumps()

    def test_preserves_document_order(self, catalog, catalog_doc):
        assert list(catalog) == [e["id"] for e in catalog_doc["challenges"]]

    def test_immutable(self, catalog):
        with pytest.raises(TypeError):
            catalog["x"] = None  # type: ignore[index]


class TestLoadCatalogErrors:
    def test_empty_list_is_valid(self):
        assert len(load_catalog({"challenges": []})) == 0

    def test_duplicate_id_named(self, doc):
        dup = dict(_entry(doc, "hand-occlusion"))
        doc["challenges"].append(dup)
        with pytest.raises(DuplicateId, match="hand-occlusion"):
            load_catalog(doc)

    def test_unknown_key_is_schema_error(self, doc):
        doc["challenges"][0]["extra"] = 1
        with pytest.raises(SchemaError, match="head-rotation"):
            load_catalog(doc)

    def test_missing_key(self, doc):
        del doc["challenges"][2]["compliance"]
        with pytest.raises(SchemaError):
            load_catalog(doc)

    def test_invalid_subcategory(self, doc):
        _entry(doc, "expression")["subcategory"] = "geometric-transforms"
        with pytest.raises(InvalidSubcategory, match="expression"):
            load_catalog(doc)

    def test_additional_details_is_open(self, doc):
        _entry(doc, "feed-duplication")["subcategory"] = "steganography"
        assert load_catalog(doc)["feed-duplication"].subcategory == "steganography"

    def test_passive_needs_trusted_device(self, doc):
        _entry(doc, "cutout")["required_equipment"] = ["none"]
        with pytest.raises(PassiveWithoutTrustedDevice, match="cutout"):
            load_catalog(doc)

    def test_passive_must_be_effortless(self, doc):
        _entry(doc, "cutout")["benefits"]["usability"]["physically_effortless"] = "quasi"
        with pytest.raises(SchemaError):
            load_catalog(doc)

    def test_quasi_deployability_rejected(self, doc):
        _entry(doc, "stand-up")["benefits"]["deployability"]["marginal_cost"] = "quasi"
        with pytest.raises(SchemaError, match="stand-up"):
            load_catalog(doc)

    def test_missing_benefit_key(self, doc):
        del _entry(doc, "stand-up")["benefits"]["adversarial"]["blending"]
        with pytest.raises(SchemaError):
            load_catalog(doc)

    def test_none_channel_only_for_passive(self, doc):
        _entry(doc, "expression")["compliance"]["channel"] = "none"
        with pytest.raises(SchemaError):
            load_catalog(doc)

    def test_negative_min_delta(self, doc):
        _entry(doc, "expression")["compliance"]["min_delta"] = -0.1
        with pytest.raises(SchemaError):
            load_catalog(doc)

    def test_bad_enum_value(self, doc):
        doc["challenges"][0]["mode"] = "sometimes"
        with pytest.raises(SchemaError):
            load_catalog(doc)

    def test_not_json(self):
        with pytest.raises(SchemaError):
            load_catalog("{not json")

    def test_top_level_shape(self):
        with pytest.raises(SchemaError):
            load_catalog({"challenges": [], "version": 2})


class TestBenefitScore:
    def test_zero_weights(self, catalog):
        ch = catalog["head-rotation"]
        assert benefit_score(ch, {k: 0.0 for k in USABILITY_KEYS}) == 0.0

    def test_single_offered_weight(self, catalog):
        ch = catalog["head-rotation"]
        assert ch.benefits.usability[Usability.EASY_TO_COMPREHEND] is TriState.OFFERED
        assert benefit_score(ch, {"easy_to_comprehend": 1.0}) == 1.0

    def test_three_offered_two_quasi_two_not(self, doc):
        statuses = ["offered"] * 3 + ["quasi"] * 2 + ["not_offered"] * 2
        _entry(doc, "stand-up")["benefits"]["usability"] = dict(zip(USABILITY_KEYS, statuses))
        ch = load_catalog(doc)["stand-up"]
        assert benefit_score(ch, DEFAULT_USABILITY_WEIGHTS) == 4.0
        assert usability_score(ch) == pytest.approx(4.0 / 7.0, rel=1e-12)

    def test_unknown_key(self, catalog):
        with pytest.raises(UnknownBenefitKey):
            benefit_score(catalog["head-rotation"], {"telepathy": 1.0})

    def test_deployability_keys_allowed(self, catalog):
        assert benefit_score(catalog["head-rotation"], {"marginal_cost": 2.0}) == 2.0

    @given(
        weights=st.lists(st.floats(0, 10, allow_nan=False), min_size=7, max_size=7),
        idx=st.integers(0, 6),
        cid=st.sampled_from(["head-rotation", "face-mask", "cutout", "speaking"]),
    )
    @settings(max_examples=200, deadline=None)
    def test_upgrade_never_decreases(self, catalog_doc, weights, idx, cid):
        entry = json.loads(json.dumps(next(e for e in catalog_doc["challenges"] if e["id"] == cid)))
        key = USABILITY_KEYS[idx]
        w = dict(zip(USABILITY_KEYS, weights))
        ladder = ["not_offered", "quasi", "offered"]
        scores = []
        for status in ladder:
            entry["benefits"]["usability"][key] = status
            if entry["mode"] == "passive" and key == "physically_effortless" and status != "offered":
                continue
            scores.append(benefit_score(load_catalog({"challenges": [entry]})[cid], w))
        assert scores == sorted(scores)
        assert 0.0 <= scores[-1] <= sum(weights) + 1e-9


class TestChallenge:
    def test_selector(self, catalog):
        ch = catalog["expression"]
        assert ch.selector_matches("facial_expression")
        assert ch.selector_matches("facial_expression/human-introduced")
        assert not ch.selector_matches("facial_expression/lip-movement")
        assert not ch.selector_matches("occlusion")

    def test_hash_by_id(self, catalog):
        assert len({catalog["cutout"], catalog["cutout"]}) == 1

    def test_catalog_constructor_rejects_duplicates(self, catalog):
        with pytest.raises(DuplicateId):
            Catalog([catalog["cutout"], catalog["cutout"]])
