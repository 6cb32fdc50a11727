"""
Strapdown inertial mechanization in the local NED frame, 3D and planar.

Both steppers use the trapezoidal rule on the rates between the previous and
the current IMU sample; attitude is advanced with the exact exponential of the
averaged rotation increment. The previous sample is carried in the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (DataError, ImuData, ImuSample, LocalFrameConfig, NumericError,
                   Trajectory2D, quat_from_euler, quat_to_rotmat, roll_pitch_from_accel,
                   rot_z, skew, wrap_angle, yaw_from_rotmat)


@dataclass(frozen=True)
class InsState:
    p_l: np.ndarray
    v_l: np.ndarray
    R_bl: np.ndarray
    last_f: np.ndarray | None = None
    last_w: np.ndarray | None = None

    @classmethod
    def at_rest(cls, R_bl=None, p_l=None) -> "InsState":
        return cls(np.zeros(3) if p_l is None else np.asarray(p_l, float),
                   np.zeros(3),
                   np.eye(3) if R_bl is None else np.asarray(R_bl, float))


@dataclass(frozen=True)
class Ins2DState:
    x: float = 0.0
    y: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    psi: float = 0.0
    last_f: tuple | None = None
    last_wz: float | None = None


def rodrigues(phi) -> np.ndarray:
    """Rotation matrix ``expm(skew(phi))``."""
    phi = np.asarray(phi, dtype=float)
    with np.errstate(over="ignore"):
        theta = float(np.linalg.norm(phi))
    if not math.isfinite(theta):
        raise NumericError("rotation increment is not finite")
    K = skew(phi)
    if theta < 1e-8:
        return np.eye(3) + K + 0.5 * K @ K
    return (np.eye(3) + math.sin(theta) / theta * K
            + (1.0 - math.cos(theta)) / theta ** 2 * K @ K)


def orthonormalize(R) -> np.ndarray:
    """Gram-Schmidt on the columns; keeps a right-handed frame."""
    c0 = R[:, 0] / np.linalg.norm(R[:, 0])
    c1 = R[:, 1] - (c0 @ R[:, 1]) * c0
    c1 /= np.linalg.norm(c1)
    c2 = np.cross(c0, c1)
    return np.column_stack([c0, c1, c2])


def _check_step(m: ImuSample, dt):
    if not (dt > 0 and math.isfinite(dt)):
        raise NumericError(f"time step must be positive and finite, got {dt}")
    if not (np.all(np.isfinite(m.f_b)) and np.all(np.isfinite(m.w_b))):
        raise NumericError(f"non-finite IMU sample at t={m.t}")


def ins_step_3d(s: InsState, m: ImuSample, dt, cfg: LocalFrameConfig = LocalFrameConfig()) -> InsState:
    _check_step(m, dt)
    f1, w1 = m.f_b, m.w_b
    f0 = f1 if s.last_f is None else s.last_f
    w0 = w1 if s.last_w is None else s.last_w
    R1 = orthonormalize(s.R_bl @ rodrigues(0.5 * (w0 + w1) * dt))
    g = cfg.gravity
    a0 = s.R_bl @ f0 + g
    a1 = R1 @ f1 + g
    v1 = s.v_l + 0.5 * (a0 + a1) * dt
    p1 = s.p_l + 0.5 * (s.v_l + v1) * dt
    if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(v1))):
        raise NumericError("3D mechanization diverged to non-finite values")
    return InsState(p1, v1, R1, f1, w1)


def ins_step_2d(s: Ins2DState, m: ImuSample, dt) -> Ins2DState:
    """Planar step: gravity and the vertical channel are dropped."""
    _check_step(m, dt)
    fx1, fy1 = float(m.f_b[0]), float(m.f_b[1])
    wz1 = float(m.w_b[2])
    fx0, fy0 = (fx1, fy1) if s.last_f is None else s.last_f
    wz0 = wz1 if s.last_wz is None else s.last_wz
    psi1 = s.psi + 0.5 * (wz0 + wz1) * dt
    c0, s0 = math.cos(s.psi), math.sin(s.psi)
    c1, s1 = math.cos(psi1), math.sin(psi1)
    ax0, ay0 = c0 * fx0 - s0 * fy0, s0 * fx0 + c0 * fy0
    ax1, ay1 = c1 * fx1 - s1 * fy1, s1 * fx1 + c1 * fy1
    vx1 = s.vx + 0.5 * (ax0 + ax1) * dt
    vy1 = s.vy + 0.5 * (ay0 + ay1) * dt
    x1 = s.x + 0.5 * (s.vx + vx1) * dt
    y1 = s.y + 0.5 * (s.vy + vy1) * dt
    return Ins2DState(x1, y1, vx1, vy1, wrap_angle(psi1), (fx1, fy1), wz1)


def apply_calibration(imu: ImuData, calib) -> ImuData:
    """Subtract accelerometer and gyro biases of a calibration record."""
    if calib is None:
        return imu
    return ImuData(imu.t, imu.f - np.asarray(calib.accel_bias),
                   imu.w - np.asarray(calib.gyro_bias))


def ins_propagate(samples: ImuData, init, mode="2d", cfg=LocalFrameConfig(), calib=None):
    """Run a mechanization over a whole stream.

    Parameters
    ----------
    samples : ImuData
        At least two samples.
    init : InsState or Ins2DState
        State at ``samples.t[0]``.
    mode : {"2d", "3d"}
    calib : CalibrationRecord, optional
        Biases subtracted before integration.

    Returns
    -------
    Trajectory2D
        One pose per sample; 3D runs carry altitude (``-p_down``) in
        ``meta["altitude"]``.
    """
    if len(samples) < 2:
        raise DataError("strapdown propagation needs at least two samples")
    imu = apply_calibration(samples, calib)
    n = len(imu)
    x = np.empty(n)
    y = np.empty(n)
    psi = np.empty(n)
    mode = mode.lower()
    if mode == "3d":
        if not isinstance(init, InsState):
            raise DataError("3D mechanization needs an InsState")
        alt = np.empty(n)
        s = replace(init, last_f=imu.f[0], last_w=imu.w[0])
        x[0], y[0], alt[0] = s.p_l[0], s.p_l[1], -s.p_l[2]
        psi[0] = yaw_from_rotmat(s.R_bl)
        for k in range(1, n):
            s = ins_step_3d(s, ImuSample(imu.t[k], imu.f[k], imu.w[k]),
                            imu.t[k] - imu.t[k - 1], cfg)
            x[k], y[k], alt[k] = s.p_l[0], s.p_l[1], -s.p_l[2]
            psi[k] = yaw_from_rotmat(s.R_bl)
        return Trajectory2D(imu.t, x, y, psi,
                            meta={"method": "ins3d", "altitude": alt, "final_state": s})
    if mode == "2d":
        if isinstance(init, InsState):
            init = Ins2DState(init.p_l[0], init.p_l[1], init.v_l[0], init.v_l[1],
                              yaw_from_rotmat(init.R_bl))
        s = replace(init, last_f=(imu.f[0, 0], imu.f[0, 1]), last_wz=imu.w[0, 2])
        x[0], y[0], psi[0] = s.x, s.y, s.psi
        for k in range(1, n):
            s = ins_step_2d(s, ImuSample(imu.t[k], imu.f[k], imu.w[k]), imu.t[k] - imu.t[k - 1])
            x[k], y[k], psi[k] = s.x, s.y, s.psi
        return Trajectory2D(imu.t, x, y, psi, meta={"method": "ins2d", "final_state": s})
    raise ValueError(f"unknown mechanization mode {mode!r}")


def initial_state_3d(psi0, accel_mean=None, p0=(0.0, 0.0, 0.0), v0=(0.0, 0.0, 0.0)) -> InsState:
    """Initial attitude from leveling (optional) and a known heading."""
    if accel_mean is None:
        R = rot_z(psi0)
    else:
        roll, pitch = roll_pitch_from_accel(accel_mean)
        R = quat_to_rotmat(quat_from_euler(roll, pitch, psi0))
    return InsState(np.asarray(p0, float), np.asarray(v0, float), R)
