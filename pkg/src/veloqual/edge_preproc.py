"""On-phone downsampling, reproduced bit-for-bit for raw recordings.

The recording app thins the 50 Hz accelerometer stream with a trailing
moving average of length 30 followed by keeping every fifth value.  This
module applies the same reduction to raw rides so the rest of the pipeline
only ever sees the uploaded representation.

Window alignment is trailing (causal): the phone averages online during the
ride, so each output carries the timestamp of the newest raw sample in its
window, and the first ``window - 1`` samples produce no output.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import List, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import AlreadyDownsampled, InvariantViolation
from .params import PipelineParams
from .ride_io import MotionSample, Ride, motion_arrays

logger = logging.getLogger(__name__)


def moving_average_array(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average along the last axis; output is n-window+1 long."""
    if window < 1:
        raise InvariantViolation("window must be >= 1")
    if values.shape[-1] < window:
        logger.warning(
            "moving_average: window %d larger than series of %d, returning empty",
            window,
            values.shape[-1],
        )
        return values[..., :0].astype(np.float64)
    return sliding_window_view(values, window, axis=-1).mean(axis=-1)


def moving_average(series: Sequence[float], window: int) -> List[float]:
    """Trailing windowed mean: out[i] = mean(in[i-window+1 .. i])."""
    return moving_average_array(np.asarray(series, dtype=np.float64), window).tolist()


def decimate(series: Sequence, keep_every: int) -> List:
    """Keep elements 0, keep_every, 2*keep_every, ...  of the input."""
    if keep_every < 1:
        raise InvariantViolation("keep_every must be >= 1")
    return list(series[::keep_every])


def downsample_ride(ride: Ride, params: PipelineParams) -> Ride:
    """Apply the on-phone reduction to a raw ride.

    Averaging runs per axis over a shared timestamp vector, then every
    ``keep_every``-th averaged sample is retained.  The result is flagged
    downsampled with rate ``raw_rate_hz / keep_every``.
    """
    if ride.downsampled:
        raise AlreadyDownsampled(f"ride {ride.ride_id} is already downsampled")
    if ride.sample_rate_hz != params.raw_rate_hz:
        raise InvariantViolation(
            f"ride declares {ride.sample_rate_hz} Hz, params expect raw {params.raw_rate_hz} Hz"
        )
    new_rate = params.raw_rate_hz // params.keep_every
    if new_rate * params.keep_every != params.raw_rate_hz:
        raise InvariantViolation("keep_every must divide raw_rate_hz")

    ts, values = motion_arrays(ride.motion)
    if len(ts) >= params.ma_window:
        averaged = moving_average_array(values.T, params.ma_window)  # (3, n-w+1)
        kept_ts = ts[params.ma_window - 1 :][:: params.keep_every]
        kept = averaged[:, :: params.keep_every]
        motion = [
            MotionSample(int(t), float(x), float(y), float(z))
            for t, x, y, z in zip(kept_ts, kept[0], kept[1], kept[2])
        ]
    else:
        logger.warning("ride %s shorter than averaging window, motion dropped", ride.ride_id)
        motion = []
    return replace(ride, motion=motion, sample_rate_hz=new_rate, downsampled=True)
