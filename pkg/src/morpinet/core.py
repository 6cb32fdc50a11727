"""
Shared math and domain types.

Quaternions are plain length-4 numpy arrays in scalar-first order
``[q1, q2, q3, q4] = [w, x, y, z]`` and represent the body-to-local rotation.
The local frame is NED: x north, y east, z down. Headings are measured from
north toward east.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.80665


class MorpinetError(Exception):
    """Base class for errors raised by this package."""


class DataError(MorpinetError, ValueError):
    """Malformed, missing or inconsistent input data."""


class NumericError(MorpinetError, ArithmeticError):
    """Non-finite values or a computation that cannot proceed."""


@dataclass(frozen=True)
class LocalFrameConfig:
    gravity_magnitude: float = GRAVITY

    def __post_init__(self):
        if not self.gravity_magnitude > 0:
            raise ValueError("gravity_magnitude must be positive")

    @property
    def gravity(self) -> np.ndarray:
        """Gravity vector in the local NED frame."""
        return np.array([0.0, 0.0, self.gravity_magnitude])


@dataclass(frozen=True)
class ImuSample:
    t: float
    f_b: np.ndarray
    w_b: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f_b, dtype=float)
        w = np.asarray(self.w_b, dtype=float)
        if f.shape != (3,) or w.shape != (3,):
            raise DataError("specific force and angular rate must be 3-vectors")
        if not (np.isfinite(self.t) and np.all(np.isfinite(f)) and np.all(np.isfinite(w))):
            raise NumericError(f"non-finite IMU sample at t={self.t}")
        object.__setattr__(self, "f_b", f)
        object.__setattr__(self, "w_b", w)


@dataclass
class ImuData:
    """A 6-axis IMU stream stored column-wise.

    Parameters
    ----------
    t : (N,) array
        Timestamps in seconds, strictly increasing.
    f : (N, 3) array
        Specific force in the body frame, m/s^2.
    w : (N, 3) array
        Angular rate in the body frame, rad/s.
    """

    t: np.ndarray
    f: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.f = np.asarray(self.f, dtype=float).reshape(-1, 3)
        self.w = np.asarray(self.w, dtype=float).reshape(-1, 3)
        n = len(self.t)
        if self.f.shape[0] != n or self.w.shape[0] != n:
            raise DataError("IMU columns have different lengths")
        if not (np.all(np.isfinite(self.t)) and np.all(np.isfinite(self.f))
                and np.all(np.isfinite(self.w))):
            raise NumericError("IMU stream contains non-finite values")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise DataError("IMU timestamps must be strictly increasing")

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> ImuSample:
        return ImuSample(float(self.t[i]), self.f[i], self.w[i])

    def slice(self, start, stop) -> "ImuData":
        return ImuData(self.t[start:stop], self.f[start:stop], self.w[start:stop])

    @property
    def fs(self) -> float:
        """Nominal sampling rate from the median sample spacing."""
        if len(self.t) < 2:
            raise DataError("need at least two samples to infer a sampling rate")
        return 1.0 / float(np.median(np.diff(self.t)))

    def as_matrix(self) -> np.ndarray:
        """(N, 6) array ``[fx, fy, fz, wx, wy, wz]``."""
        return np.hstack([self.f, self.w])

    @classmethod
    def from_samples(cls, samples) -> "ImuData":
        samples = list(samples)
        return cls(np.array([s.t for s in samples]),
                   np.array([s.f_b for s in samples]).reshape(-1, 3),
                   np.array([s.w_b for s in samples]).reshape(-1, 3))


@dataclass(frozen=True)
class Pose2D:
    x: float = 0.0
    y: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "psi", wrap_angle(self.psi))


@dataclass
class Trajectory2D:
    """Timestamped planar poses (x north, y east, heading psi)."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.x = np.asarray(self.x, dtype=float).reshape(-1)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.psi = wrap_angle(np.asarray(self.psi, dtype=float).reshape(-1))
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.psi) == n):
            raise DataError("trajectory columns have different lengths")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise DataError("trajectory timestamps must be strictly increasing")

    def __len__(self):
        return len(self.t)

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def pose(self, i) -> Pose2D:
        return Pose2D(float(self.x[i]), float(self.y[i]), float(self.psi[i]))

    def path_length(self) -> float:
        return float(np.sum(np.hypot(np.diff(self.x), np.diff(self.y))))


def wrap_angle(a):
    """Wrap angle(s) to the half-open interval (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.pi - np.mod(np.pi - a, 2.0 * np.pi)
    # in-range angles pass through untouched so repeated wrapping is exact
    w = np.where((a > -np.pi) & (a <= np.pi), a, w)
    if np.ndim(w) == 0:
        return float(w)
    return w


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product ``a * b`` of scalar-first quaternions."""
    a1, a2, a3, a4 = a
    b1, b2, b3, b4 = b
    return np.array([
        a1 * b1 - a2 * b2 - a3 * b3 - a4 * b4,
        a1 * b2 + a2 * b1 + a3 * b4 - a4 * b3,
        a1 * b3 - a2 * b4 + a3 * b1 + a4 * b2,
        a1 * b4 + a2 * b3 - a3 * b2 + a4 * b1,
    ])


def quat_conjugate(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n == 0.0 or not math.isfinite(n):
        raise NumericError("cannot normalize a zero or non-finite quaternion")
    return q / n


def quat_to_yaw(q, tol=1e-9) -> float:
    """Heading angle of a unit quaternion, in (-pi, pi]."""
    q1, q2, q3, q4 = q
    if abs(q1 * q1 + q2 * q2 + q3 * q3 + q4 * q4 - 1.0) > tol:
        raise NumericError("quat_to_yaw requires a unit quaternion")
    return wrap_angle(math.atan2(2.0 * (q2 * q3 + q1 * q4),
                                 q1 * q1 + q2 * q2 - q3 * q3 - q4 * q4))


def quat_to_rotmat(q) -> np.ndarray:
    """Body-to-local rotation matrix of a unit quaternion."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_axis_angle(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    half = 0.5 * angle
    return np.concatenate([[math.cos(half)], math.sin(half) * axis / n])


def quat_from_euler(roll, pitch, yaw) -> np.ndarray:
    """Quaternion for the ZYX sequence ``Rz(yaw) Ry(pitch) Rx(roll)``."""
    qz = quat_from_axis_angle([0, 0, 1], yaw)
    qy = quat_from_axis_angle([0, 1, 0], pitch)
    qx = quat_from_axis_angle([1, 0, 0], roll)
    return quat_multiply(quat_multiply(qz, qy), qx)


def roll_pitch_from_accel(f) -> tuple[float, float]:
    """Leveling from a static specific-force reading in NED (``f ~ (0, 0, -g)``)."""
    fx, fy, fz = f
    roll = math.atan2(-fy, -fz)
    pitch = math.atan2(fx, math.hypot(fy, fz))
    return roll, pitch


def rot_z(psi) -> np.ndarray:
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def yaw_from_rotmat(R) -> float:
    return wrap_angle(math.atan2(R[1, 0], R[0, 0]))
