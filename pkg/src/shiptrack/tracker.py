"""Track lifecycle and the two frame-level association pipelines.

``Sort`` associates every detection above ``low_conf_floor`` with every live
track in a single pass. ``Byte`` first matches detections at or above
``high_conf_threshold``, then gives the tracks left over a second chance
against the lower-confidence band. New tracks are only born from unmatched
high-confidence detections in either pipeline.

Typical use::

    tracker = Tracker(TrackerConfig(pipeline="byte", metric="tiou"))
    for frame_index, dets in stream:
        result = tracker.step(frame_index, dets)
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import motion
from .association import DEFAULT_GATE, SimilarityMetricKind, greedy_assignment, solve_assignment
from .geometry import BBox, boxes_to_array, pairwise
from .motion import KalmanError, KalmanTrackState, NoiseConfig

log = logging.getLogger(__name__)

# pushes cross-class pairs far below any gate
_CROSS_CLASS_PENALTY = 1e6


class Pipeline(str, enum.Enum):
    SORT = "sort"
    BYTE = "byte"


class TrackStatus(str, enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"
    REMOVED = "removed"


_ALLOWED = {
    TrackStatus.TENTATIVE: {TrackStatus.CONFIRMED, TrackStatus.REMOVED},
    TrackStatus.CONFIRMED: {TrackStatus.LOST},
    TrackStatus.LOST: {TrackStatus.CONFIRMED, TrackStatus.REMOVED},
    TrackStatus.REMOVED: set(),
}


class TrackerError(RuntimeError):
    pass


@dataclass(frozen=True)
class Detection:
    bbox: BBox
    confidence: float
    class_id: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.bbox, BBox):
            raise TypeError("Detection.bbox must be a BBox")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass
class Track:
    id: int
    state: KalmanTrackState
    status: TrackStatus = TrackStatus.TENTATIVE
    hits: int = 1
    age: int = 0
    time_since_update: int = 0
    class_id: int = 0
    confidence: float = 0.0

    def transition(self, new: TrackStatus) -> None:
        if new == self.status:
            return
        if new not in _ALLOWED[self.status]:
            raise TrackerError(f"track {self.id}: illegal transition {self.status.value} -> {new.value}")
        self.status = new

    @property
    def bbox(self) -> BBox:
        return motion.to_bbox(self.state)


@dataclass(frozen=True)
class TrackerConfig:
    """Tracker settings.

    ``gate_stage2`` overrides ``gate`` for the low-confidence pass of the
    byte pipeline. ``coast_output_frames`` controls how long an unmatched
    confirmed track keeps reporting its predicted box.
    """

    pipeline: Pipeline = Pipeline.SORT
    metric: SimilarityMetricKind = SimilarityMetricKind.IOU
    gate: float = DEFAULT_GATE
    gate_stage2: Optional[float] = None
    high_conf_threshold: float = 0.6
    low_conf_floor: float = 0.1
    max_age: int = 30
    min_hits: int = 3
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    solver: str = "hungarian"
    mask_before_solve: bool = False
    per_class: bool = False
    coast_output_frames: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "pipeline", Pipeline(str(getattr(self.pipeline, "value", self.pipeline)).lower()))
        object.__setattr__(self, "metric", SimilarityMetricKind.parse(self.metric))
        if self.low_conf_floor > self.high_conf_threshold:
            raise ValueError("low_conf_floor must not exceed high_conf_threshold")
        if self.max_age < 1:
            raise ValueError("max_age must be >= 1")
        if self.min_hits < 1:
            raise ValueError("min_hits must be >= 1")
        if self.solver not in ("hungarian", "greedy"):
            raise ValueError(f"solver must be 'hungarian' or 'greedy', got {self.solver!r}")
        if self.coast_output_frames < 0:
            raise ValueError("coast_output_frames must be >= 0")

    def to_dict(self) -> dict:
        return {
            "pipeline": self.pipeline.value,
            "metric": self.metric.value,
            "gate": self.gate,
            "gate_stage2": self.gate_stage2,
            "high_conf_threshold": self.high_conf_threshold,
            "low_conf_floor": self.low_conf_floor,
            "max_age": self.max_age,
            "min_hits": self.min_hits,
            "noise": {
                "std_weight_position": self.noise.std_weight_position,
                "std_weight_velocity": self.noise.std_weight_velocity,
                "std_weight_measurement": self.noise.std_weight_measurement,
            },
            "solver": self.solver,
            "mask_before_solve": self.mask_before_solve,
            "per_class": self.per_class,
            "coast_output_frames": self.coast_output_frames,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrackerConfig":
        d = dict(d)
        if isinstance(d.get("noise"), dict):
            d["noise"] = NoiseConfig(**d["noise"])
        return cls(**d)


@dataclass(frozen=True)
class FrameOutput:
    track_id: int
    bbox: BBox
    confidence: float


@dataclass
class FrameResult:
    frame_index: int
    outputs: List[FrameOutput] = field(default_factory=list)


# Optional appearance hook: called with (tracks, detections), returns a cost
# matrix of the same shape that is subtracted from the similarity scores.
AppearanceCost = Callable[[Sequence[Track], Sequence[Detection]], np.ndarray]


class Tracker:
    """Single-sequence tracking state machine. Not safe for concurrent use."""

    def __init__(self, config: TrackerConfig = TrackerConfig(), appearance_cost: Optional[AppearanceCost] = None):
        self.config = config
        self.appearance_cost = appearance_cost
        self._tracks: List[Track] = []
        self._graveyard: List[Track] = []
        self._next_id = 1
        self._last_frame: Optional[int] = None
        self._flushed = False

    @property
    def tracks(self) -> List[Track]:
        """Live (not removed) tracks."""
        return list(self._tracks)

    # ------------------------------------------------------------------
    def _similarity(self, tracks: Sequence[Track], dets: Sequence[Detection]) -> np.ndarray:
        preds = boxes_to_array([t.bbox for t in tracks])
        boxes = boxes_to_array([d.bbox for d in dets])
        sim = pairwise(self.config.metric.value, preds, boxes)
        if self.appearance_cost is not None and sim.size:
            extra = np.asarray(self.appearance_cost(tracks, dets), dtype=np.float64)
            if extra.shape != sim.shape:
                raise ValueError(f"appearance cost has shape {extra.shape}, expected {sim.shape}")
            sim = sim - extra
        if self.config.per_class and sim.size:
            t_cls = np.array([t.class_id for t in tracks])[:, None]
            d_cls = np.array([d.class_id for d in dets])[None, :]
            sim = np.where(t_cls == d_cls, sim, sim - _CROSS_CLASS_PENALTY)
        return sim

    def _associate(self, tracks: Sequence[Track], dets: Sequence[Detection], gate: float):
        sim = self._similarity(tracks, dets)
        if self.config.solver == "greedy":
            return greedy_assignment(sim, gate)
        return solve_assignment(sim, gate, mask_before_solve=self.config.mask_before_solve)

    def _new_track(self, det: Detection) -> Track:
        track = Track(
            id=self._next_id,
            state=motion.initiate(det.bbox, self.config.noise),
            class_id=det.class_id,
            confidence=det.confidence,
        )
        self._next_id += 1
        if self.config.min_hits <= 1:
            track.transition(TrackStatus.CONFIRMED)
        return track

    def _apply_match(self, track: Track, det: Detection) -> bool:
        try:
            track.state = motion.update(track.state, det.bbox, self.config.noise)
        except KalmanError as exc:
            log.debug("dropping track %d: %s", track.id, exc)
            return False
        track.hits += 1
        track.time_since_update = 0
        track.confidence = det.confidence
        if track.status == TrackStatus.TENTATIVE and track.hits >= self.config.min_hits:
            track.transition(TrackStatus.CONFIRMED)
        elif track.status == TrackStatus.LOST:
            track.transition(TrackStatus.CONFIRMED)
        return True

    def _remove(self, track: Track) -> None:
        if track.status == TrackStatus.CONFIRMED:
            track.transition(TrackStatus.LOST)
        track.transition(TrackStatus.REMOVED)
        self._graveyard.append(track)

    # ------------------------------------------------------------------
    def step(self, frame_index: int, dets: Sequence[Detection]) -> FrameResult:
        """Process one frame of detections and report confirmed tracks."""
        if self._flushed:
            raise TrackerError("tracker was flushed")
        if self._last_frame is not None and frame_index <= self._last_frame:
            raise TrackerError(f"frame index {frame_index} does not follow {self._last_frame}")
        if frame_index < 1:
            raise TrackerError(f"frame index must be positive, got {frame_index}")
        self._last_frame = frame_index
        cfg = self.config

        # 1. predict
        live: List[Track] = []
        for track in self._tracks:
            state = track.state
            if track.time_since_update > 0:
                # coasting: keep the height from drifting on a stale velocity
                state = motion.freeze_height_velocity(state)
            track.state = motion.predict(state, cfg.noise)
            track.age += 1
            track.time_since_update += 1
            try:
                track.bbox
            except KalmanError as exc:
                log.debug("dropping track %d: %s", track.id, exc)
                self._remove(track)
                continue
            live.append(track)
        self._tracks = live

        # 2. associate
        dets = [d for d in dets if d.confidence >= cfg.low_conf_floor]
        matched: List[Tuple[Track, Detection]] = []
        if cfg.pipeline == Pipeline.SORT:
            res = self._associate(self._tracks, dets, cfg.gate)
            matched += [(self._tracks[i], dets[j]) for i, j in res.matches]
            leftover_dets = [dets[j] for j in res.unmatched_detections]
        else:
            high = [d for d in dets if d.confidence >= cfg.high_conf_threshold]
            low = [d for d in dets if d.confidence < cfg.high_conf_threshold]
            res1 = self._associate(self._tracks, high, cfg.gate)
            matched += [(self._tracks[i], high[j]) for i, j in res1.matches]
            remaining = [self._tracks[i] for i in res1.unmatched_tracks]
            gate2 = cfg.gate if cfg.gate_stage2 is None else cfg.gate_stage2
            res2 = self._associate(remaining, low, gate2)
            matched += [(remaining[i], low[j]) for i, j in res2.matches]
            leftover_dets = [high[j] for j in res1.unmatched_detections]

        # 3. update matched
        updated_ids = set()
        for track, det in matched:
            if self._apply_match(track, det):
                updated_ids.add(track.id)
            else:
                self._remove(track)
        self._tracks = [t for t in self._tracks if t.status != TrackStatus.REMOVED]

        # 4. age unmatched, retire stale
        survivors = []
        for track in self._tracks:
            if track.id not in updated_ids:
                if track.status == TrackStatus.CONFIRMED:
                    track.transition(TrackStatus.LOST)
                if track.status == TrackStatus.TENTATIVE or track.time_since_update > cfg.max_age:
                    self._remove(track)
                    continue
            survivors.append(track)
        self._tracks = survivors

        # 5. births
        for det in leftover_dets:
            if det.confidence >= cfg.high_conf_threshold:
                track = self._new_track(det)
                self._tracks.append(track)
                updated_ids.add(track.id)

        # 6. report
        outputs = []
        for track in self._tracks:
            if track.status == TrackStatus.CONFIRMED and track.id in updated_ids:
                outputs.append(FrameOutput(track.id, track.bbox, track.confidence))
            elif track.status == TrackStatus.LOST and 1 <= track.time_since_update <= cfg.coast_output_frames:
                outputs.append(FrameOutput(track.id, track.bbox, track.confidence))
        outputs.sort(key=lambda o: o.track_id)
        return FrameResult(frame_index, outputs)

    def flush(self) -> List[Track]:
        """All tracks ever created, removed ones included, ordered by id."""
        self._flushed = True
        return sorted(self._graveyard + self._tracks, key=lambda t: t.id)


def run(config: TrackerConfig, frames: Sequence[Tuple[int, Sequence[Detection]]],
        appearance_cost: Optional[AppearanceCost] = None) -> List[FrameResult]:
    """Run a fresh tracker over ``(frame_index, detections)`` pairs."""
    tracker = Tracker(config, appearance_cost)
    return [tracker.step(idx, dets) for idx, dets in frames]
