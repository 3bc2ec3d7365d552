"""Video object segmentation from detector tubes and a superpixel Potts energy."""

from .config import PipelineConfig, load_config
from .core import BoundingBox, Detection, FlowField, Image, InputError
from .pipeline import PipelineResult, VideoInputs, run_pipeline, track

__all__ = [
    "BoundingBox",
    "Detection",
    "FlowField",
    "Image",
    "InputError",
    "PipelineConfig",
    "PipelineResult",
    "VideoInputs",
    "load_config",
    "run_pipeline",
    "track",
]

__version__ = "0.1.0"
