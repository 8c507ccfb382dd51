"""Crowdsensed bicycle surface quality.

Smartphone ride recordings in, a quality-scored geographic grid out:
parsing, on-phone-style downsampling, stop removal, per-ride percentile
normalization, grid aggregation, GeoJSON export, quality-aware routing and
an HTTP service for map clients.
"""

__version__ = "0.1.0"

from .errors import VeloqualError
from .params import PipelineParams
from .ride_io import GpsFix, MotionSample, Ride, crop_ride, parse_ride, write_ride

__all__ = [
    "__version__",
    "VeloqualError",
    "PipelineParams",
    "GpsFix",
    "MotionSample",
    "Ride",
    "parse_ride",
    "write_ride",
    "crop_ride",
]
