import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docmt.core import (JsonlError, SchemaError, Scheme, Segment, SubTask,
                        Track, TrackKind, is_cjk, read_jsonl, tokenize,
                        write_jsonl)


class TestTokenize:
    def test_whitespace_split(self):
        assert tokenize("the cat", Scheme.WHITESPACE).tokens == ("the", "cat")

    def test_mixed_scheme(self):
        assert tokenize("你好ab 你", Scheme.MIXED).tokens == ("你", "好", "ab", "你")

    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_empty_string(self, scheme):
        assert tokenize("", scheme).tokens == ()

    def test_cjk_char_scheme_drops_whitespace(self):
        assert tokenize("你 好a", Scheme.CJK_CHAR).tokens == ("你", "好", "a")

    def test_cjk_detection_ranges(self):
        assert is_cjk("你")
        assert is_cjk("。")  # CJK punctuation
        assert is_cjk("㐀")  # extension A
        assert not is_cjk("a")
        assert not is_cjk("…")

    @given(st.lists(st.text(alphabet="abc你好", min_size=1, max_size=4), max_size=8))
    def test_whitespace_tokenize_idempotent(self, words):
        toks = tokenize(" ".join(words), Scheme.WHITESPACE).tokens
        assert tokenize(" ".join(toks), Scheme.WHITESPACE).tokens == toks


class TestSegment:
    def test_requires_id(self):
        with pytest.raises(SchemaError):
            Segment(id="", source_text="x")

    def test_requires_text_or_image(self):
        with pytest.raises(SchemaError):
            Segment(id="s1")

    def test_from_record_missing_id(self):
        with pytest.raises(SchemaError, match="id"):
            Segment.from_record({"source_text": "x"})

    def test_nfc_normalization_on_ingestion(self):
        # e + combining acute composes to a single code point
        seg = Segment.from_record({"id": "s", "source_text": "é"})
        assert seg.source_text == "é"


class TestTrack:
    def test_track2_rejects_ocr(self):
        with pytest.raises(SchemaError):
            Track(TrackKind.TRACK2_ARXIV, SubTask.OCR)

    def test_track1_allows_both(self):
        Track(TrackKind.TRACK1_WEBDOC, SubTask.OCR)
        Track(TrackKind.TRACK1_WEBDOC, SubTask.MT)


segments_strategy = st.builds(
    Segment,
    id=st.uuids().map(str),
    source_text=st.text(alphabet="abc 你好…", min_size=1, max_size=20),
    reference_translation=st.one_of(
        st.none(), st.text(alphabet="xyz 翻译文…", max_size=20)),
    image_ref=st.one_of(st.none(), st.just("img/p1.png")),
)


class TestJsonl:
    def test_three_valid_lines_in_order(self, tmp_path):
        path = tmp_path / "f.jsonl"
        path.write_text('{"a": 1}\n{"a": 2}\n{"a": 3}\n', encoding="utf-8")
        assert [r["a"] for r in read_jsonl(path)] == [1, 2, 3]

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "f.jsonl"
        path.write_text('{"a": 1}\nnot json{\n{"a": 3}\n', encoding="utf-8")
        it = read_jsonl(path)
        assert next(it)["a"] == 1
        with pytest.raises(JsonlError) as exc_info:
            next(it)
        assert exc_info.value.line_no == 2
        assert "not json{" in str(exc_info.value)

    def test_empty_file_empty_stream(self, tmp_path):
        path = tmp_path / "f.jsonl"
        path.write_text("", encoding="utf-8")
        assert list(read_jsonl(path)) == []

    def test_empty_stream_writes_zero_byte_file(self, tmp_path):
        path = tmp_path / "out.jsonl"
        assert write_jsonl([], path) == 0
        assert path.read_bytes() == b""

    def test_missing_required_field_names_field(self, tmp_path):
        path = tmp_path / "f.jsonl"
        path.write_text('{"source_text": "x"}\n', encoding="utf-8")
        with pytest.raises(SchemaError, match="'id'"):
            list(read_jsonl(path, schema=Segment.from_record))

    def test_utf8_preserved(self, tmp_path):
        path = tmp_path / "f.jsonl"
        record = {"id": "s", "source_text": "… 你好 é"}
        write_jsonl([record], path)
        assert list(read_jsonl(path)) == [record]
        assert not path.read_bytes().startswith(b"\xef\xbb\xbf")

    @settings(max_examples=50)
    @given(st.lists(segments_strategy, max_size=10))
    def test_round_trip_identity(self, tmp_path_factory, segments):
        path = tmp_path_factory.mktemp("rt") / "seg.jsonl"
        write_jsonl(segments, path)
        back = list(read_jsonl(path, schema=Segment.from_record))
        assert [s.to_record() for s in back] == [s.to_record() for s in segments]
