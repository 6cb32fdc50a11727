"""
Madgwick orientation filter (IMU-only, gamma-fusion form) and heading tools.

Each update blends a gyro-integrated quaternion with one normalized
gradient-descent step that pulls the predicted gravity direction toward the
measured one. Yaw is unobservable from gravity, so heading comes from the
initial condition plus integrated rate.

The accelerometer measures specific force, which in NED reads ``(0, 0, -g)``
at rest, so the observed "down" direction in the body frame is the negated,
normalized specific force.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (DataError, ImuData, ImuSample, NumericError, quat_from_euler, quat_multiply,
                   quat_normalize, quat_to_yaw, roll_pitch_from_accel, wrap_angle)


@dataclass(frozen=True)
class MadgwickConfig:
    gamma: float = 0.01
    mu: float = 0.01
    dt: float = 1.0 / 120.0
    accel_norm: str = "l2"

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.accel_norm.lower() not in ("l1", "l2"):
            raise ValueError("accel_norm must be 'l1' or 'l2'")


@dataclass
class AhrsRun:
    q0: np.ndarray
    quats: np.ndarray    # (N, 4)
    yaw: np.ndarray      # (N,)


def gyro_quat_step(q_prev, w, dt) -> np.ndarray:
    """First-order quaternion integration of one gyro sample."""
    wq = np.array([0.0, w[0], w[1], w[2]])
    q = np.asarray(q_prev, dtype=float) + 0.5 * quat_multiply(q_prev, wq) * dt
    return quat_normalize(q)


def _down_direction(f_b, norm="l2") -> np.ndarray:
    f = np.asarray(f_b, dtype=float)
    n = float(np.sum(np.abs(f))) if norm.lower() == "l1" else math.sqrt(float(f @ f))
    if n == 0.0 or not math.isfinite(n):
        raise NumericError("accelerometer reading has zero or non-finite norm")
    return -f / n


def gravity_objective(q, f_b_norm) -> np.ndarray:
    """Residual ``q* (0,0,0,1) q - f`` as a 3-vector.

    ``f_b_norm`` is the normalized down direction observed in the body frame.
    """
    w, x, y, z = q
    fx, fy, fz = f_b_norm
    return np.array([
        2.0 * (x * z - w * y) - fx,
        2.0 * (w * x + y * z) - fy,
        1.0 - 2.0 * (x * x + y * y) - fz,
    ])


def gravity_jacobian(q) -> np.ndarray:
    """d(objective)/dq, shape (3, 4)."""
    w, x, y, z = q
    return np.array([
        [-2.0 * y, 2.0 * z, -2.0 * w, 2.0 * x],
        [2.0 * x, 2.0 * w, 2.0 * z, 2.0 * y],
        [0.0, -4.0 * x, -4.0 * y, 0.0],
    ])


def objective_gradient(q, f_b_norm) -> np.ndarray:
    """Gradient of ``0.5 * |objective|^2`` with respect to q."""
    return gravity_jacobian(q).T @ gravity_objective(q, f_b_norm)


def gradient_correction_step(q_prev, f_b, cfg: MadgwickConfig) -> np.ndarray:
    """One normalized gradient step of size ``mu`` against the gravity residual.

    Returns ``q_prev`` unchanged when the gradient vanishes. The result is not
    renormalized; ``madgwick_update`` normalizes after fusion.
    """
    d = _down_direction(f_b, cfg.accel_norm)
    grad = objective_gradient(q_prev, d)
    gn = math.sqrt(float(grad @ grad))
    q_prev = np.asarray(q_prev, dtype=float)
    if gn == 0.0:
        return q_prev.copy()
    return q_prev - cfg.mu * grad / gn


def madgwick_update(q_prev, m: ImuSample, cfg: MadgwickConfig, dt=None) -> np.ndarray:
    """Fuse gyro integration and gravity correction: ``gamma*q_grad + (1-gamma)*q_gyro``."""
    return _fuse(q_prev, m.f_b, m.w_b, cfg, cfg.dt if dt is None else dt)


def _fuse(q_prev, f_b, w_b, cfg, dt):
    # the gradient branch starts from q_prev, so gamma also damps the gyro increment
    q_w = gyro_quat_step(q_prev, w_b, dt)
    if cfg.gamma == 0.0:
        return q_w
    q_g = gradient_correction_step(q_prev, f_b, cfg)
    return quat_normalize(cfg.gamma * q_g + (1.0 - cfg.gamma) * q_w)


def run_filter(samples: ImuData, q0, cfg: MadgwickConfig) -> AhrsRun:
    """Filter a whole stream.

    Entry ``k`` is the estimate at ``samples.t[k]``: entry 0 is ``q0`` and
    sample ``k`` advances the state over ``t[k] - t[k-1]``.
    """
    n = len(samples)
    if n == 0:
        raise DataError("AHRS needs a nonempty IMU stream")
    q = quat_normalize(q0)
    quats = np.empty((n, 4))
    yaw = np.empty(n)
    quats[0] = q
    yaw[0] = quat_to_yaw(q)
    t = samples.t
    for k in range(1, n):
        q = _fuse(q, samples.f[k], samples.w[k], cfg, t[k] - t[k - 1])
        quats[k] = q
        yaw[k] = quat_to_yaw(q)
    return AhrsRun(np.asarray(q0, float), quats, yaw)


def heading_series(samples: ImuData, q0, cfg: MadgwickConfig) -> np.ndarray:
    """Yaw after every sample of the stream."""
    return run_filter(samples, q0, cfg).yaw


def mean_heading(yaws) -> float:
    """Circular mean of a window of headings."""
    yaws = np.asarray(yaws, dtype=float)
    if yaws.size == 0:
        raise DataError("cannot average an empty heading window")
    return wrap_angle(math.atan2(float(np.mean(np.sin(yaws))), float(np.mean(np.cos(yaws)))))


def initial_quaternion(psi0, accel_mean=None) -> np.ndarray:
    """Leveling from a static accelerometer mean plus a known heading."""
    if accel_mean is None:
        return quat_from_euler(0.0, 0.0, psi0)
    roll, pitch = roll_pitch_from_accel(accel_mean)
    return quat_from_euler(roll, pitch, psi0)


def tune_gamma(streams, q0s, truth_headings, grid=(0.001, 0.005, 0.01, 0.05),
               base=MadgwickConfig()):
    """Pick the fusion weight with the lowest RMS heading error.

    ``truth_headings[i]`` holds reference yaw at every sample of
    ``streams[i]``; NaN entries are ignored.

    Returns
    -------
    best : float
    scores : dict
        RMS heading error (rad) per candidate.
    """
    scores = {}
    for gamma in grid:
        cfg = MadgwickConfig(gamma, base.mu, base.dt, base.accel_norm)
        sq, count = 0.0, 0
        for imu, q0, ref in zip(streams, q0s, truth_headings):
            err = wrap_angle(heading_series(imu, q0, cfg) - np.asarray(ref))
            ok = np.isfinite(err)
            sq += float(np.sum(err[ok] ** 2))
            count += int(ok.sum())
        scores[gamma] = math.sqrt(sq / max(count, 1))
    best = min(scores, key=scores.get)
    return best, scores
