"""
Pure-inertial 2D positioning for wheeled robots in serpentine motion.

Baselines (strapdown INS, Weinberg peak-to-peak dead reckoning) and a learned
window-distance regressor fused with Madgwick heading, plus a synthetic data
generator, dataset ingestion and evaluation metrics.
"""

from .core import (GRAVITY, DataError, ImuData, ImuSample, LocalFrameConfig, MorpinetError,
                   NumericError, Pose2D, Trajectory2D, quat_conjugate, quat_multiply,
                   quat_normalize, quat_to_yaw, wrap_angle)

__all__ = ["GRAVITY", "DataError", "ImuData", "ImuSample", "LocalFrameConfig", "MorpinetError",
           "NumericError", "Pose2D", "Trajectory2D", "quat_conjugate", "quat_multiply",
           "quat_normalize", "quat_to_yaw", "wrap_angle"]
