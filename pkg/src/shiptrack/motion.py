"""Constant-velocity Kalman filter over ``(cx, cy, aspect, height)``.

The state is eight-dimensional: box center, aspect ratio ``w / h`` and height,
followed by their per-frame velocities. One ``predict`` advances exactly one
frame. Noise magnitudes scale with the box height, so the filter behaves the
same for a 20 px skiff and a 400 px freighter.

All functions are pure: they take a :class:`KalmanTrackState` and return a new
one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .geometry import BBox

_NDIM = 4

_MOTION = np.eye(2 * _NDIM)
for _i in range(_NDIM):
    _MOTION[_i, _NDIM + _i] = 1.0
_MOTION.setflags(write=False)

_OBSERVE = np.eye(_NDIM, 2 * _NDIM)
_OBSERVE.setflags(write=False)


class KalmanError(RuntimeError):
    """Raised when a track's state can no longer be used (singular innovation, non-positive size)."""


@dataclass(frozen=True)
class NoiseConfig:
    """Noise standard deviations as fractions of the box height.

    ``std_weight_measurement`` sets the detection noise; when left as ``None``
    it equals ``std_weight_position``. Lowering it makes the filter follow
    detections more closely without letting the velocity chase per-frame shake.
    """

    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160
    std_weight_measurement: Optional[float] = None

    def __post_init__(self) -> None:
        weights = (self.std_weight_position, self.std_weight_velocity, self.measurement_weight)
        if not all(w > 0 and math.isfinite(w) for w in weights):
            raise ValueError("noise weights must be finite and strictly positive")

    @property
    def measurement_weight(self) -> float:
        if self.std_weight_measurement is None:
            return self.std_weight_position
        return self.std_weight_measurement


# Trusts detections four times more than the default; suited to footage where
# the whole image jumps between frames and the posterior would otherwise lag.
SHAKE_NOISE = NoiseConfig(std_weight_measurement=1.0 / 80)


@dataclass(frozen=True)
class KalmanTrackState:
    mean: np.ndarray = field(repr=False)
    covariance: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=np.float64).reshape(2 * _NDIM)
        cov = np.array(self.covariance, dtype=np.float64).reshape(2 * _NDIM, 2 * _NDIM)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    def __repr__(self) -> str:
        cx, cy, a, h = self.mean[:4]
        return f"KalmanTrackState(cx={cx:.2f}, cy={cy:.2f}, a={a:.3f}, h={h:.2f})"


def to_measurement(b: BBox) -> np.ndarray:
    cx, cy = b.center
    return np.array([cx, cy, b.w / b.h, b.h], dtype=np.float64)


def initiate(det: BBox, cfg: NoiseConfig = NoiseConfig()) -> KalmanTrackState:
    """Start a track at ``det`` with zero velocity."""
    z = to_measurement(det)
    mean = np.concatenate([z, np.zeros(_NDIM)])
    h = z[3]
    sp, sv = cfg.std_weight_position, cfg.std_weight_velocity
    std = np.array([
        2 * sp * h, 2 * sp * h, 1e-2, 2 * sp * h,
        10 * sv * h, 10 * sv * h, 1e-5, 10 * sv * h,
    ])
    return KalmanTrackState(mean, np.diag(std * std))


def _process_noise(h: float, cfg: NoiseConfig) -> np.ndarray:
    sp, sv = cfg.std_weight_position, cfg.std_weight_velocity
    std = np.array([sp * h, sp * h, 1e-2, sp * h, sv * h, sv * h, 1e-5, sv * h])
    return np.diag(std * std)


def _measurement_noise(h: float, cfg: NoiseConfig) -> np.ndarray:
    sm = cfg.measurement_weight
    std = np.array([sm * h, sm * h, 1e-1, sm * h])
    return np.diag(std * std)


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def predict(s: KalmanTrackState, cfg: NoiseConfig = NoiseConfig()) -> KalmanTrackState:
    """Advance the state one frame and inflate its covariance by process noise."""
    mean = _MOTION @ s.mean
    cov = _MOTION @ s.covariance @ _MOTION.T + _process_noise(abs(s.mean[3]), cfg)
    return KalmanTrackState(mean, _symmetrize(cov))


def project(s: KalmanTrackState, cfg: NoiseConfig = NoiseConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Predicted measurement mean and innovation covariance."""
    mean = _OBSERVE @ s.mean
    cov = _OBSERVE @ s.covariance @ _OBSERVE.T + _measurement_noise(abs(s.mean[3]), cfg)
    return mean, _symmetrize(cov)


def update(s: KalmanTrackState, det: BBox, cfg: NoiseConfig = NoiseConfig()) -> KalmanTrackState:
    """Correct the state with a detection.

    Uses a Cholesky solve for the gain and the Joseph form for the covariance
    so it stays symmetric positive semidefinite.

    Raises:
        KalmanError: the innovation covariance is not positive definite, or the
            corrected state has a non-positive aspect ratio or height.
    """
    z = to_measurement(det)
    z_pred, innov_cov = project(s, cfg)
    try:
        factor = scipy.linalg.cho_factor(innov_cov, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise KalmanError(f"innovation covariance is not positive definite: {exc}") from exc
    # K = P H^T S^-1, solved as S K^T = H P
    gain = scipy.linalg.cho_solve(factor, _OBSERVE @ s.covariance, check_finite=False).T
    mean = s.mean + gain @ (z - z_pred)

    ikh = np.eye(2 * _NDIM) - gain @ _OBSERVE
    r = _measurement_noise(abs(s.mean[3]), cfg)
    cov = ikh @ s.covariance @ ikh.T + gain @ r @ gain.T
    if not (mean[2] > 0 and mean[3] > 0):
        raise KalmanError(f"update produced non-positive aspect/height: a={mean[2]}, h={mean[3]}")
    return KalmanTrackState(mean, _symmetrize(cov))


def freeze_height_velocity(s: KalmanTrackState) -> KalmanTrackState:
    """Copy of ``s`` with the height velocity zeroed."""
    mean = s.mean.copy()
    mean[2 * _NDIM - 1] = 0.0
    return KalmanTrackState(mean, s.covariance)


def to_bbox(s: KalmanTrackState) -> BBox:
    cx, cy, a, h = s.mean[:4]
    if not (a > 0 and h > 0):
        raise KalmanError(f"state has non-positive aspect/height: a={a}, h={h}")
    w = a * h
    return BBox(cx - w / 2.0, cy - h / 2.0, w, h)
