"""Seeded synthetic ship scenarios with camera shake and low frame rate.

Ships sail at constant speed with a slowly wandering heading. The simulation
runs at the native frame rate, then only every ``fps_subsample``-th frame is
kept. Each kept frame gets one camera offset shared by all boxes (wave shake),
and detections add independent per-box noise, misses and clutter on top.

Random draws come from four independent PCG64 streams spawned from the seed
(trajectories, camera jitter, detection noise, clutter), so changing a noise
knob leaves the ship paths untouched.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import asdict, dataclass, field, fields
from typing import Iterator, List, Tuple

import numpy as np

from .evaluation import GtEntry
from .geometry import BBox, iou, tiou
from .tracker import Detection

RNG_ALGORITHM = "numpy-PCG64/SeedSequence-spawn4/v1"
MIN_EXTENT = 2.0
N_CLASSES = 7


@dataclass(frozen=True)
class ConfidenceModel:
    """Maps detection quality to a confidence score.

    True detections score ``mean - noise_penalty * err + N(0, std)``, where
    ``err`` is the center error relative to the box size (capped at 1).
    Clutter scores ``N(clutter_mean, clutter_std)``. Everything is clipped
    to ``[floor, 1]``.
    """

    mean: float = 0.85
    std: float = 0.08
    noise_penalty: float = 0.5
    clutter_mean: float = 0.4
    clutter_std: float = 0.15
    floor: float = 0.01


@dataclass(frozen=True)
class ScenarioConfig:
    n_ships: int = 10
    n_frames: int = 200
    image_size: Tuple[float, float] = (1920.0, 1080.0)
    fps_subsample: int = 1
    jitter_std: float = 0.0
    detection_noise_std: float = 0.0
    miss_prob: float = 0.0
    clutter_rate: float = 0.0
    confidence_model: ConfidenceModel = field(default_factory=ConfidenceModel)
    size_range: Tuple[float, float] = (40.0, 120.0)
    speed_range: Tuple[float, float] = (0.5, 2.0)
    aspect_range: Tuple[float, float] = (0.3, 0.6)
    heading_noise_std: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "image_size", tuple(float(v) for v in self.image_size))
        object.__setattr__(self, "size_range", tuple(float(v) for v in self.size_range))
        object.__setattr__(self, "speed_range", tuple(float(v) for v in self.speed_range))
        object.__setattr__(self, "aspect_range", tuple(float(v) for v in self.aspect_range))
        if isinstance(self.confidence_model, dict):
            object.__setattr__(self, "confidence_model", ConfidenceModel(**self.confidence_model))
        problems = []
        if self.n_ships < 0:
            problems.append("n_ships must be >= 0")
        if self.fps_subsample < 1:
            problems.append("fps_subsample must be >= 1")
        elif self.kept_frames < 2:
            problems.append("fewer than 2 frames remain after subsampling")
        if not all(v > 0 for v in self.image_size):
            problems.append("image_size must be positive")
        if self.jitter_std < 0 or self.detection_noise_std < 0 or self.heading_noise_std < 0:
            problems.append("noise standard deviations must be >= 0")
        if not 0.0 <= self.miss_prob < 1.0:
            problems.append("miss_prob must lie in [0, 1)")
        if self.clutter_rate < 0:
            problems.append("clutter_rate must be >= 0")
        for name in ("size_range", "speed_range", "aspect_range"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi or (name != "speed_range" and lo <= 0):
                problems.append(f"{name} must satisfy 0 < min <= max")
        if self.size_range[1] * 1.0 >= min(self.image_size):
            problems.append("size_range must fit inside the image")
        if not 0 <= self.seed < 2 ** 64:
            problems.append("seed must be a 64-bit unsigned integer")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def kept_frames(self) -> int:
        return len(range(0, self.n_frames, self.fps_subsample))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Scenario:
    gt: List[GtEntry]
    detections: List[List[Detection]]  # index 0 holds frame 1
    config_echo: ScenarioConfig

    @property
    def num_frames(self) -> int:
        return len(self.detections)

    def frames(self) -> Iterator[Tuple[int, List[Detection]]]:
        for i, dets in enumerate(self.detections):
            yield i + 1, dets


@dataclass(frozen=True)
class RegimeStats:
    median_iou: float
    zero_iou_fraction: float
    mean_tiou: float
    n_pairs: int


def _clamp(x1: float, y1: float, x2: float, y2: float, width: float, height: float) -> BBox:
    cx1 = min(max(x1, 0.0), width - MIN_EXTENT)
    cy1 = min(max(y1, 0.0), height - MIN_EXTENT)
    cx2 = min(max(x2, cx1 + MIN_EXTENT), width)
    cy2 = min(max(y2, cy1 + MIN_EXTENT), height)
    return BBox(cx1, cy1, cx2 - cx1, cy2 - cy1)


def _simulate_ships(cfg: ScenarioConfig, ss: np.random.SeedSequence):
    """Per ship: (class id, width, height, raw-frame centers up to exit)."""
    width, height = cfg.image_size
    ships = []
    for child in ss.spawn(cfg.n_ships):
        rng = np.random.Generator(np.random.PCG64(child))
        w = rng.uniform(*cfg.size_range)
        h = w * rng.uniform(*cfg.aspect_range)
        cls = int(rng.integers(1, N_CLASSES + 1))
        cx = rng.uniform(w / 2, width - w / 2)
        cy = rng.uniform(h / 2, height - h / 2)
        heading = rng.uniform(0.0, 2 * math.pi)
        speed = rng.uniform(*cfg.speed_range)
        turns = rng.normal(0.0, 1.0, size=cfg.n_frames) * cfg.heading_noise_std
        centers = []
        for t in range(cfg.n_frames):
            if t > 0:
                heading += turns[t]
                cx += speed * math.cos(heading)
                cy += speed * math.sin(heading)
            if cx + w / 2 <= 0 or cx - w / 2 >= width or cy + h / 2 <= 0 or cy - h / 2 >= height:
                break
            centers.append((cx, cy))
        ships.append((cls, w, h, centers))
    return ships


def _confidence(cm: ConfidenceModel, err: float, z: float) -> float:
    return float(min(max(cm.mean - cm.noise_penalty * min(err, 1.0) + cm.std * z, cm.floor), 1.0))


def generate(cfg: ScenarioConfig) -> Scenario:
    """Build ground truth and noisy detections for ``cfg``; deterministic in ``cfg``."""
    traj_ss, jitter_ss, noise_ss, clutter_ss = np.random.SeedSequence(cfg.seed).spawn(4)
    jitter_rng = np.random.Generator(np.random.PCG64(jitter_ss))
    noise_rng = np.random.Generator(np.random.PCG64(noise_ss))
    clutter_rng = np.random.Generator(np.random.PCG64(clutter_ss))
    width, height = cfg.image_size
    cm = cfg.confidence_model
    sigma = cfg.detection_noise_std

    ships = _simulate_ships(cfg, traj_ss)
    raw_frames = list(range(0, cfg.n_frames, cfg.fps_subsample))
    shake = jitter_rng.normal(0.0, 1.0, size=(len(raw_frames), 2)) * cfg.jitter_std

    gt: List[GtEntry] = []
    detections: List[List[Detection]] = []
    for k, t in enumerate(raw_frames):
        frame = k + 1
        dx, dy = shake[k]
        dets: List[Detection] = []
        for ship_idx, (cls, w, h, centers) in enumerate(ships):
            # fixed draw count per ship-frame keeps the noise stream aligned
            u_miss, ex, ey, ew, eh, zc = noise_rng.random(), *noise_rng.normal(0.0, 1.0, size=5)
            if t >= len(centers):
                continue
            cx, cy = centers[t][0] + dx, centers[t][1] + dy
            box = _clamp(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2, width, height)
            gt.append(GtEntry(frame, ship_idx + 1, box, 1.0, cls, True))
            if u_miss < cfg.miss_prob:
                continue
            ncx, ncy = cx + sigma * ex, cy + sigma * ey
            nw = w * math.exp(sigma / w * ew)
            nh = h * math.exp(sigma / h * eh)
            det_box = _clamp(ncx - nw / 2, ncy - nh / 2, ncx + nw / 2, ncy + nh / 2, width, height)
            err = (abs(ncx - cx) + abs(ncy - cy)) / (w + h)
            dets.append(Detection(det_box, _confidence(cm, err, zc), cls))

        n_clutter = int(clutter_rng.poisson(cfg.clutter_rate))
        for _ in range(n_clutter):
            w = clutter_rng.uniform(*cfg.size_range)
            h = w * clutter_rng.uniform(*cfg.aspect_range)
            x = clutter_rng.uniform(0.0, width - w)
            y = clutter_rng.uniform(0.0, height - h)
            conf = cm.clutter_mean + cm.clutter_std * clutter_rng.normal()
            conf = float(min(max(conf, cm.floor), 1.0))
            cls = int(clutter_rng.integers(1, N_CLASSES + 1))
            dets.append(Detection(_clamp(x, y, x + w, y + h, width, height), conf, cls))
        detections.append(dets)

    gt.sort(key=lambda g: (g.frame, g.object_id))
    return Scenario(gt, detections, cfg)


def high_jitter_config(seed: int = 0) -> ScenarioConfig:
    """Low frame rate plus heavy shake: most consecutive gt boxes do not overlap.

    Ten long, low ships on a 4K frame, every fourth frame kept (200 frames),
    a 40 px camera shake per axis. With box heights around 20 to 40 px the
    shared shake alone separates most consecutive boxes vertically.
    """
    return ScenarioConfig(
        n_ships=10,
        n_frames=800,
        image_size=(3840.0, 2160.0),
        fps_subsample=4,
        jitter_std=40.0,
        detection_noise_std=2.0,
        miss_prob=0.05,
        clutter_rate=0.5,
        size_range=(80.0, 120.0),
        aspect_range=(0.2, 0.35),
        seed=seed,
    )


def consecutive_pairs(gt: List[GtEntry]) -> List[Tuple[BBox, BBox]]:
    """Each object's box in frame ``f`` paired with its box in frame ``f + 1``."""
    by_obj = {}
    for g in gt:
        by_obj.setdefault(g.object_id, {})[g.frame] = g.bbox
    pairs = []
    for oid in sorted(by_obj):
        boxes = by_obj[oid]
        for f in sorted(boxes):
            if f + 1 in boxes:
                pairs.append((boxes[f], boxes[f + 1]))
    return pairs


def regime_stats(s: Scenario) -> RegimeStats:
    """Overlap statistics between consecutive frames of each ground-truth object."""
    pairs = consecutive_pairs(s.gt)
    if not pairs:
        raise ValueError("scenario has no consecutive-frame ground-truth pairs")
    ious = [iou(a, b) for a, b in pairs]
    tious = [tiou(a, b) for a, b in pairs]
    return RegimeStats(
        median_iou=statistics.median(ious),
        zero_iou_fraction=sum(1 for v in ious if v == 0.0) / len(ious),
        mean_tiou=math.fsum(tious) / len(tious),
        n_pairs=len(pairs),
    )
