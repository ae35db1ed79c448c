"""Reading and writing MOT17-style text files.

Each line is one comma-separated record::

    frame, id, x, y, w, h, conf, class, visibility[, ignored...]

How trailing columns are read depends on the file kind:

``ground_truth``
    ``conf`` is the MOT17 "considered" flag (0 or 1); class and visibility
    default to 1 and 1.0.
``detections`` / ``results``
    class defaults to -1 and visibility to 1.0. A visibility of -1, as found
    in MOT17 ``det.txt`` files, also means "not given".

Columns past the ninth (world coordinates) are ignored. Results are written
as ``frame,id,x,y,w,h,conf,-1,-1,-1`` with two decimals for geometry and four
for confidence.
"""

from __future__ import annotations

import enum
import io
import math
import os
from dataclasses import dataclass
from typing import BinaryIO, Iterable, List, Sequence, TextIO, Tuple, Union

from .evaluation import GtEntry
from .geometry import BBox
from .tracker import Detection, FrameOutput, FrameResult

PathOrStream = Union[str, os.PathLike, BinaryIO, TextIO, bytes]


# frame numbers index dense per-frame lists downstream; anything larger is a corrupt file
MAX_FRAME = 1_000_000


class RecordKind(str, enum.Enum):
    DETECTIONS = "detections"
    GROUND_TRUTH = "ground_truth"
    RESULTS = "results"


_MIN_FIELDS = {
    RecordKind.DETECTIONS: 7,
    RecordKind.GROUND_TRUTH: 6,
    RecordKind.RESULTS: 6,
}


class MotParseError(ValueError):
    def __init__(self, line_no: int, text: str, reason: str):
        self.line_no = line_no
        self.text = text
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}: {text!r}")


@dataclass(frozen=True)
class MotRecord:
    frame: int
    id: int
    x: float
    y: float
    w: float
    h: float
    conf: float
    class_id: int
    visibility: float

    @property
    def bbox(self) -> BBox:
        return BBox(self.x, self.y, self.w, self.h)


def _read_bytes(source: PathOrStream) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read()
    data = source.read()
    return data.encode("utf-8") if isinstance(data, str) else data


def _int_field(tok: str, name: str) -> int:
    try:
        return int(tok)
    except ValueError:
        pass
    value = float(tok)  # raises ValueError on junk
    if not math.isfinite(value) or value != int(value):
        raise ValueError(f"{name} must be an integer")
    return int(value)


def _float_field(tok: str, name: str) -> float:
    value = float(tok)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite")
    return value


def parse_line(line: str, kind: RecordKind, line_no: int = 1) -> MotRecord:
    toks = [t.strip() for t in line.split(",")]
    if len(toks) < _MIN_FIELDS[kind]:
        raise MotParseError(line_no, line, f"expected at least {_MIN_FIELDS[kind]} fields, got {len(toks)}")
    field_name = "frame"
    try:
        frame = _int_field(toks[0], "frame")
        field_name = "id"
        ident = _int_field(toks[1], "id")
        geom = []
        for name, tok in zip(("x", "y", "w", "h"), toks[2:6]):
            field_name = name
            geom.append(_float_field(tok, name))
        field_name = "conf"
        conf = _float_field(toks[6], "conf") if len(toks) > 6 else 1.0
        field_name = "class"
        default_class = 1 if kind == RecordKind.GROUND_TRUTH else -1
        class_id = _int_field(toks[7], "class") if len(toks) > 7 else default_class
        field_name = "visibility"
        visibility = _float_field(toks[8], "visibility") if len(toks) > 8 else 1.0
    except ValueError as exc:
        raise MotParseError(line_no, line, f"bad {field_name} field ({exc})") from None

    if not 1 <= frame <= MAX_FRAME:
        raise MotParseError(line_no, line, f"frame must lie in [1, {MAX_FRAME}], got {frame}")
    x, y, w, h = geom
    if w <= 0 or h <= 0:
        raise MotParseError(line_no, line, f"width and height must be positive, got w={w}, h={h}")
    if visibility == -1 and kind != RecordKind.GROUND_TRUTH:
        visibility = 1.0
    if not 0.0 <= visibility <= 1.0:
        raise MotParseError(line_no, line, f"visibility must lie in [0, 1], got {visibility}")
    return MotRecord(frame, ident, x, y, w, h, conf, class_id, visibility)


def parse_file(source: PathOrStream, kind: Union[RecordKind, str]) -> List[MotRecord]:
    """Parse a whole file (path, bytes or stream) into records sorted by ``(frame, id)``.

    Blank lines are skipped; an empty file gives an empty list.

    Raises:
        MotParseError: on the first malformed line, carrying its 1-based number.
    """
    kind = RecordKind(kind)
    raw = _read_bytes(source)
    records = []
    for line_no, raw_line in enumerate(raw.split(b"\n"), start=1):
        try:
            line = raw_line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MotParseError(line_no, raw_line.decode("utf-8", "replace"), f"not valid UTF-8 ({exc.reason})") from None
        line = line.rstrip("\r")
        if not line.strip():
            continue
        records.append(parse_line(line, kind, line_no))
    records.sort(key=lambda r: (r.frame, r.id))
    return records


def _emit(data: bytes, sink) -> int:
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            fh.write(data)
    elif isinstance(sink, io.TextIOBase):
        sink.write(data.decode("utf-8"))
    else:
        sink.write(data)
    return len(data)


def format_result(frame: int, track_id: int, box: BBox, conf: float) -> str:
    x = f"{box.x:.2f}"
    y = f"{box.y:.2f}"
    w = f"{box.w:.2f}"
    h = f"{box.h:.2f}"
    if float(w) <= 0 or float(h) <= 0:
        raise ValueError(f"box {box} has no extent at two-decimal precision")
    return f"{frame},{track_id},{x},{y},{w},{h},{conf:.4f},-1,-1,-1\n"


def write_results(records: Iterable[Tuple[int, int, BBox, float]], sink: Union[str, os.PathLike, BinaryIO, TextIO]) -> int:
    """Write ``(frame, track_id, bbox, conf)`` records; returns the number of bytes written."""
    lines = []
    for frame, track_id, box, conf in records:
        if frame < 1 or track_id < 1:
            raise ValueError(f"frame and track id must be positive, got {frame}, {track_id}")
        lines.append(format_result(frame, track_id, box, conf))
    return _emit("".join(lines).encode("utf-8"), sink)


def write_records(records: Sequence[MotRecord], sink, kind: Union[RecordKind, str]) -> int:
    """Write generic records in a layout :func:`parse_file` reads back for ``kind``."""
    kind = RecordKind(kind)
    out = []
    for r in records:
        if kind == RecordKind.GROUND_TRUTH:
            conf = f"{int(r.conf)}"
        else:
            conf = f"{r.conf:.4f}"
        out.append(f"{r.frame},{r.id},{r.x:.2f},{r.y:.2f},{r.w:.2f},{r.h:.2f},{conf},{r.class_id},{r.visibility:.4f}\n")
    return _emit("".join(out).encode("utf-8"), sink)


def results_from_records(records: Sequence[MotRecord]) -> List[FrameResult]:
    """Group parsed result records into :class:`~shiptrack.tracker.FrameResult` objects."""
    by_frame = {}
    for r in records:
        by_frame.setdefault(r.frame, []).append(FrameOutput(r.id, r.bbox, r.conf))
    return [FrameResult(f, by_frame[f]) for f in sorted(by_frame)]


def detections_from_records(records: Sequence[MotRecord], num_frames: int | None = None):
    """``(frame, [Detection])`` pairs for every frame from 1 to the last one seen.

    Confidences outside ``[0, 1]`` are clipped.
    """
    by_frame = {}
    for r in records:
        conf = min(max(r.conf, 0.0), 1.0)
        by_frame.setdefault(r.frame, []).append(Detection(r.bbox, conf, r.class_id))
    last = max(by_frame, default=0) if num_frames is None else num_frames
    return [(f, by_frame.get(f, [])) for f in range(1, last + 1)]


def gt_from_records(records: Sequence[MotRecord]) -> List[GtEntry]:
    return [GtEntry(r.frame, r.id, r.bbox, r.visibility, r.class_id, r.conf != 0) for r in records]
