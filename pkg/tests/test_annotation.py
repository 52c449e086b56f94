import json

import jsonschema
import pytest
from importlib import resources

from singprep import (
    AnnotationRecord,
    PhonemeEvent,
    ValidationError,
    dumps_annotation,
    read_annotation,
    read_manifest,
    validate_document,
    write_annotation,
    write_manifest,
)
from singprep.annotation import VOICE_PARTS, normalize_voice_part


def sample_record(utt="utt1"):
    events = (
        PhonemeEvent("K", 0.08, 64, 0.4, language_token=0, style_token=1),
        PhonemeEvent("AE", 0.22, 64, 0.4, language_token=0, style_token=1),
        PhonemeEvent("T", 0.10, 64, 0.4, language_token=0, style_token=1),
        PhonemeEvent("AE", 0.15, 66, 0.15, is_slur=True,
                     language_token=0, style_token=1),
    )
    return AnnotationRecord(utt, f"{utt}.wav", events,
                            singer_id="s01", voice_part="Tenor")


class TestPhonemeEvent:
    def test_nonpositive_duration_rejected(self):
        with pytest.raises(ValueError):
            PhonemeEvent("AA", 0.0, 60, 0.2)

    def test_language_token_domain(self):
        with pytest.raises(ValueError):
            PhonemeEvent("AA", 0.1, 60, 0.2, language_token=2)

    def test_style_token_domain(self):
        with pytest.raises(ValueError):
            PhonemeEvent("AA", 0.1, 60, 0.2, style_token=3)

    def test_rest_detection(self):
        assert PhonemeEvent("sp", 0.1, 0, 0.1).is_rest()
        assert PhonemeEvent("AA", 0.1, 0, 0.1).is_rest()
        assert not PhonemeEvent("AA", 0.1, 60, 0.1).is_rest()


class TestRecordValidation:
    def test_empty_utt_id_rejected(self):
        with pytest.raises(ValidationError):
            AnnotationRecord("", "a.wav", (PhonemeEvent("AA", 0.1, 60, 0.1),))

    def test_empty_events_rejected(self):
        with pytest.raises(ValidationError):
            AnnotationRecord("u", "a.wav", ())

    def test_unknown_voice_part_rejected(self):
        with pytest.raises(ValidationError):
            AnnotationRecord("u", "a.wav",
                             (PhonemeEvent("AA", 0.1, 60, 0.1),),
                             voice_part="Contralto")

    def test_none_voice_part_allowed(self):
        rec = AnnotationRecord("u", "a.wav", (PhonemeEvent("AA", 0.1, 60, 0.1),))
        assert rec.voice_part is None

    def test_total_duration(self):
        assert sample_record().total_duration() == pytest.approx(0.55)


class TestVoicePartAliases:
    @pytest.mark.parametrize("alias,part", [
        ("S", "Soprano"), ("A", "Alto"), ("T", "Tenor"),
        ("B1", "Bass"), ("B2", "Baritone"),
        ("tenor", "Tenor"), ("Tenor", "Tenor"),
    ])
    def test_normalization(self, alias, part):
        assert normalize_voice_part(alias) == part

    def test_none_passes_through(self):
        assert normalize_voice_part(None) is None

    def test_unknown_rejected(self):
        with pytest.raises(ValidationError):
            normalize_voice_part("X9")


class TestDocumentRoundTrip:
    def test_to_from_document_identity(self):
        rec = sample_record()
        assert AnnotationRecord.from_document(rec.to_document()) == rec

    def test_dumps_byte_identical_across_calls(self):
        rec = sample_record()
        assert dumps_annotation(rec) == dumps_annotation(rec)

    def test_file_round_trip_byte_identical(self, tmp_path):
        rec = sample_record()
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_annotation(rec, p1)
        write_annotation(read_annotation(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_document_carries_parallel_arrays(self):
        doc = sample_record().to_document()
        n = len(doc["phs"])
        for key in ("is_slur", "ph_dur", "notes", "notes_dur", "lang", "style"):
            assert len(doc[key]) == n


class TestValidateDocument:
    def test_good_document_passes(self):
        validate_document(sample_record().to_document())

    def test_failures_are_collected_not_first_only(self):
        doc = sample_record().to_document()
        doc["utt_id"] = ""
        doc["voice_part"] = "X"
        with pytest.raises(ValidationError) as err:
            validate_document(doc)
        assert len(err.value.failures) >= 2

    def test_length_mismatch_reported(self):
        doc = sample_record().to_document()
        doc["notes"] = doc["notes"][:-1]
        with pytest.raises(ValidationError, match="length"):
            validate_document(doc)

    def test_missing_field_reported(self):
        doc = sample_record().to_document()
        del doc["style"]
        with pytest.raises(ValidationError, match="style"):
            validate_document(doc)

    def test_matches_bundled_json_schema(self):
        schema = json.loads(resources.files("singprep.data")
                            .joinpath("annotation.schema.json").read_text())
        jsonschema.validate(sample_record().to_document(), schema)

    def test_schema_rejects_bad_language_token(self):
        schema = json.loads(resources.files("singprep.data")
                            .joinpath("annotation.schema.json").read_text())
        doc = sample_record().to_document()
        doc["lang"][0] = 7
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate(doc, schema)


class TestManifest:
    def test_json_document_form(self, tmp_path):
        recs = [sample_record("u1"), sample_record("u2")]
        p = tmp_path / "m.json"
        write_manifest(recs, p)
        assert read_manifest(p) == recs

    def test_line_delimited_form(self, tmp_path):
        recs = [sample_record("u1"), sample_record("u2")]
        p = tmp_path / "m.jsonl"
        write_manifest(recs, p, line_delimited=True)
        assert read_manifest(p) == recs
        assert len(p.read_text().strip().splitlines()) == 2

    def test_empty_file_is_empty_manifest(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text("")
        assert read_manifest(p) == []

    def test_duplicate_utt_id_rejected(self, tmp_path):
        recs = [sample_record("u1"), sample_record("u1")]
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"records": [r.to_document() for r in recs]}))
        with pytest.raises(ValidationError, match="duplicate"):
            read_manifest(p)

    def test_bare_list_accepted(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps([sample_record("u1").to_document()]))
        assert len(read_manifest(p)) == 1


def test_voice_parts_are_the_five_registers():
    assert VOICE_PARTS == ("Bass", "Baritone", "Tenor", "Alto", "Soprano")
