"""Axis-aligned bounding boxes and overlap-based similarity scores.

Boxes are stored as ``(x, y, w, h)`` with ``(x, y)`` the top-left corner, the
same layout MOT17 text files use. Four similarity scores are provided:

* ``iou``  - intersection over union.
* ``giou`` - IoU minus the fraction of the enclosing box not covered by the union.
* ``diou`` - IoU minus squared center distance over squared enclosing diagonal.
* ``tiou`` - the smaller of the two box areas divided by the enclosing box area.

``tiou`` stays positive when the boxes do not overlap and drops when their
shapes differ, which is what makes it usable for matching a predicted box to a
detection that jumped away between frames.

Scalar functions operate on :class:`BBox`; :func:`pairwise` computes the full
score matrix between two ``(n, 4)`` arrays and is what the association code
uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np


@dataclass(frozen=True)
class BBox:
    """Box with top-left corner ``(x, y)`` and size ``(w, h)`` in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or isinstance(value, bool):
                raise TypeError(f"BBox.{name} must be a real number, got {type(value).__name__}")
            if not math.isfinite(value):
                raise ValueError(f"BBox.{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"BBox needs positive width and height, got w={self.w}, h={self.h}")

    @classmethod
    def from_xyxy(cls, x1: float, y1: float, x2: float, y2: float) -> "BBox":
        return cls(x1, y1, x2 - x1, y2 - y1)

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def xyxy(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.x2, self.y2)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    def scaled(self, k: float) -> "BBox":
        return BBox(self.x * k, self.y * k, self.w * k, self.h * k)

    def translated(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x + dx, self.y + dy, self.w, self.h)


@dataclass(frozen=True)
class EnclosureDecomposition:
    """Areas involved in comparing two boxes.

    ``enclosure_area`` is the area of the smallest axis-aligned box covering
    both inputs; ``residual_area`` is the part of it not covered by either box.
    """

    intersection_area: float
    union_area: float
    enclosure_area: float
    residual_area: float


def area(b: BBox) -> float:
    return b.w * b.h


def _intersection(b1: BBox, b2: BBox) -> float:
    iw = min(b1.x2, b2.x2) - max(b1.x, b2.x)
    ih = min(b1.y2, b2.y2) - max(b1.y, b2.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def _enclosure(b1: BBox, b2: BBox) -> tuple[float, float]:
    cw = max(b1.x2, b2.x2) - min(b1.x, b2.x)
    ch = max(b1.y2, b2.y2) - min(b1.y, b2.y)
    return cw, ch


def decompose(b1: BBox, b2: BBox) -> EnclosureDecomposition:
    inter = _intersection(b1, b2)
    union = area(b1) + area(b2) - inter
    cw, ch = _enclosure(b1, b2)
    enclosure = cw * ch
    # the enclosure always covers the union; guard against rounding below it
    residual = max(enclosure - union, 0.0)
    return EnclosureDecomposition(inter, union, enclosure, residual)


def iou(b1: BBox, b2: BBox) -> float:
    """Intersection over union, in ``[0, 1]``."""
    inter = _intersection(b1, b2)
    if inter == 0.0:
        return 0.0
    return min(inter / (area(b1) + area(b2) - inter), 1.0)


def giou(b1: BBox, b2: BBox) -> float:
    """Generalized IoU, in ``(-1, 1]``."""
    d = decompose(b1, b2)
    return d.intersection_area / d.union_area - d.residual_area / d.enclosure_area


def diou(b1: BBox, b2: BBox) -> float:
    """Distance IoU, in ``(-1, 1]``."""
    (c1x, c1y), (c2x, c2y) = b1.center, b2.center
    rho2 = (c1x - c2x) ** 2 + (c1y - c2y) ** 2
    cw, ch = _enclosure(b1, b2)
    return iou(b1, b2) - rho2 / (cw * cw + ch * ch)


def tiou(b1: BBox, b2: BBox) -> float:
    """Smaller box area over enclosing box area, in ``(0, 1]``.

    Equals 1 only when the boxes coincide: both boxes must fill the enclosure.
    """
    cw, ch = _enclosure(b1, b2)
    a1, a2 = area(b1), area(b2)
    # rounding in the corner arithmetic can leave the enclosure a hair below a box area
    return min(a1, a2) / max(cw * ch, a1, a2)


METRICS: Dict[str, Callable[[BBox, BBox], float]] = {
    "iou": iou,
    "giou": giou,
    "diou": diou,
    "tiou": tiou,
}


def boxes_to_array(boxes) -> np.ndarray:
    """Stack ``BBox`` objects into an ``(n, 4)`` float array of ``x, y, w, h``."""
    if len(boxes) == 0:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)


def pairwise(kind: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Score matrix ``S[i, j] = metric(a[i], b[j])`` for ``(n, 4)``/``(m, 4)`` xywh arrays.

    Args:
        kind: one of ``"iou"``, ``"giou"``, ``"diou"``, ``"tiou"``.
        a: first set of boxes, rows ``x, y, w, h``.
        b: second set of boxes.

    Returns:
        ``(n, m)`` float64 array.
    """
    if kind not in METRICS:
        raise ValueError(f"unknown metric {kind!r}; expected one of {sorted(METRICS)}")
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)), dtype=np.float64)

    ax1, ay1 = a[:, 0:1], a[:, 1:2]
    ax2, ay2 = ax1 + a[:, 2:3], ay1 + a[:, 3:4]
    bx1, by1 = b[None, :, 0], b[None, :, 1]
    bx2, by2 = bx1 + b[None, :, 2], by1 + b[None, :, 3]
    area_a = a[:, 2:3] * a[:, 3:4]
    area_b = (b[:, 2] * b[:, 3])[None, :]

    cw = np.maximum(ax2, bx2) - np.minimum(ax1, bx1)
    ch = np.maximum(ay2, by2) - np.minimum(ay1, by1)
    enclosure = cw * ch

    if kind == "tiou":
        # rounding in the corner arithmetic can leave the enclosure a hair below a box area
        return np.minimum(area_a, area_b) / np.maximum(enclosure, np.maximum(area_a, area_b))

    iw = np.minimum(ax2, bx2) - np.maximum(ax1, bx1)
    ih = np.minimum(ay2, by2) - np.maximum(ay1, by1)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = area_a + area_b - inter
    overlap = np.minimum(inter / union, 1.0)
    if kind == "iou":
        return overlap
    if kind == "giou":
        return overlap - np.maximum(enclosure - union, 0.0) / enclosure
    # diou
    rho2 = ((ax1 + ax2) / 2 - (bx1 + bx2) / 2) ** 2 + ((ay1 + ay2) / 2 - (by1 + by2) / 2) ** 2
    return overlap - rho2 / (cw * cw + ch * ch)
