import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiptrack.geometry import BBox
from shiptrack.mot_io import (
    MotParseError, MotRecord, RecordKind, detections_from_records, gt_from_records, parse_file, parse_line,
    results_from_records, write_records, write_results,
)


def test_parse_detection_line():
    r = parse_line("1,-1,10,20,30,40,0.9,-1,-1", RecordKind.DETECTIONS)
    assert (r.frame, r.id, r.bbox, r.conf, r.visibility) == (1, -1, BBox(10, 20, 30, 40), 0.9, 1.0)


def test_parse_gt_defaults():
    r = parse_line("3,7,0,0,5,5", RecordKind.GROUND_TRUTH)
    assert (r.conf, r.class_id, r.visibility) == (1.0, 1, 1.0)
    [g] = gt_from_records([parse_line("3,7,0,0,5,5,0,1,0.5", RecordKind.GROUND_TRUTH)])
    assert not g.considered and g.visibility == 0.5


@pytest.mark.parametrize("line,fragment", [
    ("1,1,0,0,0,5,1", "positive"),
    ("0,1,0,0,5,5,1", "frame"),
    ("x,1,0,0,5,5,1", "bad frame"),
    ("1,1,0,0,5,nan,1", "bad h"),
    ("1,1,0,0,5", "at least"),
    ("1.5,1,0,0,5,5,1", "bad frame"),
    ("1000001,1,0,0,5,5,1", "frame must lie"),
    ("999999999999999999999999999999,1,0,0,5,5,1", "frame must lie"),
])
def test_parse_errors(line, fragment):
    with pytest.raises(MotParseError, match=fragment):
        parse_line(line, RecordKind.DETECTIONS, 4)


def test_error_carries_line_number():
    data = b"1,1,0,0,5,5,0.9\n\n2,1,0,0,5,5,0.9\n2,1,0,0,-5,5,0.9\n"
    with pytest.raises(MotParseError) as info:
        parse_file(data, "detections")
    assert info.value.line_no == 4
    assert "line 4" in str(info.value)


def test_write_results_format():
    buf = io.BytesIO()
    n = write_results([(1, 3, BBox(0, 0, 10, 10), 0.9)], buf)
    assert buf.getvalue() == b"1,3,0.00,0.00,10.00,10.00,0.9000,-1,-1,-1\n"
    assert n == len(buf.getvalue())
    assert write_results([], io.BytesIO()) == 0
    with pytest.raises(ValueError):
        write_results([(1, 1, BBox(0, 0, 0.001, 1), 0.9)], io.BytesIO())


def test_empty_and_blank_files():
    assert parse_file(b"", "results") == []
    assert parse_file(io.StringIO("\n\r\n  \n"), "results") == []


def test_crlf_and_extra_columns():
    recs = parse_file(b"2,1,1,2,3,4,0.5,-1,-1,7,8\r\n1,2,1,2,3,4,0.5\r\n", "results")
    assert [(r.frame, r.id) for r in recs] == [(1, 2), (2, 1)]


def test_results_roundtrip_1000(tmp_path):
    records = []
    for i in range(1000):
        frame, tid = i // 10 + 1, i % 10 + 1
        box = BBox((i * 37 % 1900) + 0.25, (i * 53 % 1000) + 0.5, 10 + i % 90, 5 + i % 40 + 0.75)
        records.append((frame, tid, box, (i % 10000) / 10000))
    path = tmp_path / "res.txt"
    write_results(records, path)
    parsed = parse_file(path, "results")
    assert [(r.frame, r.id, r.bbox, r.conf) for r in parsed] == records
    frames = results_from_records(parsed)
    assert len(frames) == 100 and all(len(fr.outputs) == 10 for fr in frames)


def test_write_records_roundtrip_gt():
    recs = [MotRecord(1, 1, 1.5, 2.25, 3.0, 4.0, 1.0, 3, 0.5), MotRecord(2, 1, 0.0, 0.0, 1.0, 1.0, 0.0, 1, 1.0)]
    buf = io.BytesIO()
    write_records(recs, buf, "ground_truth")
    assert parse_file(buf.getvalue(), "ground_truth") == recs


def test_detections_fill_empty_frames_and_clip_conf():
    recs = parse_file(b"3,-1,0,0,5,5,1.7\n", "detections")
    frames = detections_from_records(recs, num_frames=4)
    assert [f for f, _ in frames] == [1, 2, 3, 4]
    assert frames[2][1][0].confidence == 1.0 and frames[0][1] == []


@settings(max_examples=500, deadline=None)
@given(st.binary(max_size=300))
def test_fuzz_bytes_never_crash(data):
    for kind in RecordKind:
        try:
            parse_file(data, kind)
        except MotParseError:
            pass


mot_like = st.lists(
    st.lists(st.one_of(st.integers(-5, 5).map(str), st.floats(allow_nan=True).map(repr),
                       st.sampled_from(["", " ", "nan", "inf", "-1", "1e309", "0x1"]), st.text(max_size=3)),
             min_size=0, max_size=11).map(",".join),
    max_size=8).map("\n".join)


@settings(max_examples=500, deadline=None)
@given(mot_like)
def test_fuzz_mot_like_never_crash(text):
    for kind in RecordKind:
        try:
            recs = parse_file(text.encode("utf-8", "replace"), kind)
        except MotParseError:
            continue
        for r in recs:
            assert r.frame >= 1 and r.w > 0 and r.h > 0
