"""
MoRPINet reconstruction and uniform method dispatch.

The IMU stream is cut into non-overlapping windows; D-Net regresses the
distance travelled in each window and the Madgwick yaw, averaged over the same
window, gives the direction. Positions are advanced by dead reckoning,

    x_{k+1} = x_k + s_k cos(psi_k),    y_{k+1} = y_k + s_k sin(psi_k).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .ahrs import MadgwickConfig, heading_series, initial_quaternion, mean_heading
from .core import DataError, ImuData, Pose2D, Trajectory2D, wrap_angle
from .dnet import DnetWeights, predict
from .morpi import WeinbergGain, morpi_reconstruct
from .strapdown import Ins2DState, initial_state_3d, ins_propagate

METHODS = ("ins2d", "ins3d", "morpi-a", "morpi-g", "morpinet")


@dataclass(frozen=True)
class PipelineConfig:
    """Windowing and heading settings for MoRPINet inference.

    ``level_samples`` leading samples are averaged to level the initial
    attitude; 0 starts the filter level. ``morpi_heading`` selects the MoRPI
    heading source: the Madgwick filter ("ahrs") or the integrated z-rate
    ("gyro").
    """

    window: int = 24
    hop: int = 24
    ahrs: MadgwickConfig = field(default_factory=MadgwickConfig)
    level_samples: int = 0
    morpi_heading: str = "ahrs"

    def __post_init__(self):
        if self.window < 1 or self.hop < 1:
            raise ValueError("window and hop must be at least 1")
        if self.level_samples < 0:
            raise ValueError("level_samples must be nonnegative")
        if self.morpi_heading not in ("ahrs", "gyro"):
            raise ValueError("morpi_heading must be 'ahrs' or 'gyro'")


def window_starts(n, window, hop) -> np.ndarray:
    if n < window:
        raise DataError(f"stream of {n} samples is shorter than one window ({window})")
    return np.arange(0, n - window + 1, hop)


def dead_reckon(distances, headings, init: Pose2D):
    """Cumulative positions, init first. Returns (x, y) of length K+1."""
    s = np.asarray(distances, dtype=float)
    psi = np.asarray(headings, dtype=float)
    x = init.x + np.concatenate([[0.0], np.cumsum(s * np.cos(psi))])
    y = init.y + np.concatenate([[0.0], np.cumsum(s * np.sin(psi))])
    return x, y


def ahrs_headings(samples: ImuData, psi0, cfg: PipelineConfig) -> np.ndarray:
    accel_mean = None
    if cfg.level_samples > 0:
        accel_mean = samples.f[:cfg.level_samples].mean(axis=0)
    return heading_series(samples, initial_quaternion(psi0, accel_mean), cfg.ahrs)


def gyro_headings(samples: ImuData, psi0) -> np.ndarray:
    """Heading from trapezoidal integration of the z-axis rate."""
    wz = samples.w[:, 2]
    inc = 0.5 * (wz[1:] + wz[:-1]) * np.diff(samples.t)
    return wrap_angle(psi0 + np.concatenate([[0.0], np.cumsum(inc)]))


def morpinet_reconstruct(samples: ImuData, w: DnetWeights, init: Pose2D,
                         cfg: PipelineConfig = PipelineConfig(), heading=None) -> Trajectory2D:
    """Windowed D-Net distances fused with window-averaged AHRS heading.

    Parameters
    ----------
    samples : ImuData
        Raw IMU stream, at least one window long.
    w : DnetWeights
    init : Pose2D
        Start position and heading at ``samples.t[0]``.
    heading : array_like, optional
        Precomputed yaw per sample; by default the Madgwick filter runs from
        ``init.psi``.

    Returns
    -------
    Trajectory2D
        ``init`` followed by one pose per window, stamped at the window end.
        Negative network outputs are clamped to 0; ``meta["clamped"]`` counts
        them.
    """
    if w.cfg.window != cfg.window:
        raise DataError(f"weights expect windows of {w.cfg.window} samples, pipeline uses {cfg.window}")
    n = len(samples)
    starts = window_starts(n, cfg.window, cfg.hop)
    if heading is None:
        heading = ahrs_headings(samples, init.psi, cfg)
    heading = np.asarray(heading, dtype=float)
    if len(heading) != n:
        raise DataError("heading series must have one entry per IMU sample")
    M = samples.as_matrix().T
    X = np.stack([M[:, a:a + cfg.window] for a in starts])
    raw = predict(w, X)
    clamped = int(np.sum(raw < 0))
    s = np.maximum(raw, 0.0)
    psi = np.array([mean_heading(heading[a:a + cfg.window]) for a in starts])
    x, y = dead_reckon(s, psi, init)
    dt = 1.0 / samples.fs
    t = np.concatenate([[samples.t[0]], samples.t[starts] + cfg.window * dt])
    return Trajectory2D(t, x, y, np.concatenate([[init.psi], psi]),
                        meta={"method": "morpinet", "distances": s, "raw_distances": raw,
                              "clamped": clamped, "update_rate_hz": samples.fs / cfg.hop})


def run_method(method, samples: ImuData, init: Pose2D, *, gain: WeinbergGain | None = None,
               weights: DnetWeights | None = None, calib=None, init_velocity=(0.0, 0.0),
               pipeline_cfg: PipelineConfig = PipelineConfig(), accel_mean=None,
               anchor=None) -> Trajectory2D:
    """Run one positioning method and return its trajectory.

    ``calib`` (a calibration record) is subtracted for the INS methods only;
    MoRPI and MoRPINet consume raw data. ``accel_mean`` levels the initial
    attitude of the 3D mechanization. MoRPI trajectories start at the first
    detected peak, which is assigned the ``init`` position, or the
    ``anchor(t)`` reference position when an anchor is given.
    """
    method = method.lower()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    vx, vy = init_velocity
    if method == "ins2d":
        return ins_propagate(samples, Ins2DState(init.x, init.y, vx, vy, init.psi), "2d", calib=calib)
    if method == "ins3d":
        s0 = initial_state_3d(init.psi, accel_mean, (init.x, init.y, 0.0), (vx, vy, 0.0))
        return ins_propagate(samples, s0, "3d", calib=calib)
    if method in ("morpi-a", "morpi-g"):
        if gain is None:
            raise DataError(f"gain record required for {method}")
        want = method[-1].upper()
        if gain.mode != want:
            raise DataError(f"{method} needs a mode-{want} gain record, got mode {gain.mode}")
        if pipeline_cfg.morpi_heading == "gyro":
            heading = gyro_headings(samples, init.psi)
        else:
            heading = ahrs_headings(samples, init.psi, pipeline_cfg)
        return morpi_reconstruct(samples, gain, heading, init, anchor=anchor)
    if weights is None:
        raise DataError("weights file required for morpinet")
    return morpinet_reconstruct(samples, weights, init, pipeline_cfg)


# ------------------------------------------------------------------ file i/o

TRAJ_HEADER = ("t", "x_north_m", "y_east_m", "psi_rad")


def write_trajectory_csv(path, traj: Trajectory2D):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(TRAJ_HEADER)
        for row in zip(traj.t, traj.x, traj.y, traj.psi):
            wr.writerow([repr(float(v)) for v in row])


def track_anchor(ref: Trajectory2D):
    """Position lookup ``t -> (x, y)`` by linear interpolation of ``ref``."""
    return lambda t: (np.interp(t, ref.t, ref.x), np.interp(t, ref.t, ref.y))


def read_trajectory_csv(path) -> Trajectory2D:
    rows = []
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header is None or tuple(h.strip() for h in header) != TRAJ_HEADER:
            raise DataError(f"{path}: expected header {','.join(TRAJ_HEADER)}")
        for lineno, row in enumerate(rd, start=2):
            if not row:
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if len(vals) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no trajectory rows")
    a = np.array(rows)
    try:
        return Trajectory2D(a[:, 0], a[:, 1], a[:, 2], a[:, 3])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def write_geojson(path, traj: Trajectory2D, properties=None):
    """LineString in local metres; coordinates are (east, north) so that
    plotting tools draw north up."""
    props = {"method": traj.meta.get("method", "unknown"), "frame": "local NED, metres"}
    props.update(properties or {})
    feature = {
        "type": "Feature",
        "properties": props,
        "geometry": {"type": "LineString",
                     "coordinates": [[float(e), float(n)] for n, e in zip(traj.x, traj.y)]},
    }
    with open(path, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": [feature]}, fh, indent=1)
