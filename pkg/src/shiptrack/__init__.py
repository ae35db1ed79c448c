"""Multi-ship tracking by detection with TIoU association."""

__version__ = "0.1.0"

from .geometry import BBox, decompose, diou, giou, iou, tiou  # noqa: E402
from .evaluation import MetricsReport, evaluate  # noqa: E402
from .synth import ScenarioConfig, generate, high_jitter_config  # noqa: E402
from .tracker import Detection, Tracker, TrackerConfig, run  # noqa: E402

__all__ = [
    "BBox", "decompose", "iou", "giou", "diou", "tiou",
    "Detection", "Tracker", "TrackerConfig", "run",
    "MetricsReport", "evaluate",
    "ScenarioConfig", "generate", "high_jitter_config",
    "__version__",
]
