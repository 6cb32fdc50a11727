"""
Field-data ingestion: canonical CSV readers and writers, IMU/RTK time
synchronization, static bias calibration, ground-truth distance and heading,
and construction of fixed-length training windows.

Canonical formats
-----------------
IMU CSV: ``t,fx,fy,fz,wx,wy,wz`` (s, m/s^2, rad/s), body frame x forward,
y right, z down. RTK CSV: ``t,E,N`` (s, m east, m north).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import GRAVITY, DataError, ImuData, Pose2D, Trajectory2D

IMU_HEADER = ("t", "fx", "fy", "fz", "wx", "wy", "wz")
RTK_HEADER = ("t", "E", "N")
ROLES = ("train", "test", "straight")

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ types

@dataclass(frozen=True)
class RtkFix:
    t: float
    E: float
    N: float


@dataclass
class RtkData:
    """A stream of RTK fixes stored column-wise."""

    t: np.ndarray
    E: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.E = np.asarray(self.E, dtype=float).reshape(-1)
        self.N = np.asarray(self.N, dtype=float).reshape(-1)
        if not (len(self.t) == len(self.E) == len(self.N)):
            raise DataError("RTK columns have different lengths")
        if not (np.all(np.isfinite(self.t)) and np.all(np.isfinite(self.E))
                and np.all(np.isfinite(self.N))):
            raise DataError("RTK data contains non-finite values")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise DataError("RTK timestamps must be strictly increasing")

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> RtkFix:
        return RtkFix(float(self.t[i]), float(self.E[i]), float(self.N[i]))

    def shifted(self, dt) -> "RtkData":
        return RtkData(self.t + dt, self.E.copy(), self.N.copy())

    def cumulative_distance(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(self.E), np.diff(self.N)))])


@dataclass
class CalibrationRecord:
    accel_bias: np.ndarray
    gyro_bias: np.ndarray
    t_start: float
    t_end: float

    def to_json(self) -> str:
        return json.dumps({"accel_bias": [float(v) for v in self.accel_bias],
                           "gyro_bias": [float(v) for v in self.gyro_bias],
                           "window": [self.t_start, self.t_end]}, indent=2)

    @classmethod
    def from_json(cls, text) -> "CalibrationRecord":
        try:
            d = json.loads(text)
            return cls(np.array(d["accel_bias"], float), np.array(d["gyro_bias"], float),
                       float(d["window"][0]), float(d["window"][1]))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise DataError(f"invalid calibration record: {exc}") from exc

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "CalibrationRecord":
        return cls.from_json(Path(path).read_text())


@dataclass
class WindowedDataset:
    X: np.ndarray            # (n, 6, W)
    y: np.ndarray            # (n,)
    traj_id: np.ndarray      # (n,) str
    t_start: np.ndarray      # (n,)
    skipped: int = 0
    flagged: int = 0         # targets above the v_max sanity bound

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.traj_id = np.asarray(self.traj_id, dtype=str).reshape(-1)
        self.t_start = np.asarray(self.t_start, dtype=float).reshape(-1)
        n = len(self.y)
        if self.X.shape[0] != n or len(self.traj_id) != n or len(self.t_start) != n:
            raise DataError("windowed dataset columns have different lengths")
        if np.any(self.y < 0):
            raise DataError("window targets must be nonnegative")

    def __len__(self):
        return len(self.y)

    @classmethod
    def concat(cls, parts) -> "WindowedDataset":
        parts = list(parts)
        if not parts:
            raise DataError("nothing to concatenate")
        W = parts[0].X.shape[2] if parts[0].X.ndim == 3 else 0
        return cls(np.concatenate([p.X.reshape(-1, 6, W) for p in parts]),
                   np.concatenate([p.y for p in parts]),
                   np.concatenate([p.traj_id for p in parts]),
                   np.concatenate([p.t_start for p in parts]),
                   sum(p.skipped for p in parts), sum(p.flagged for p in parts))

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in self._arrays().values():
            a = np.ascontiguousarray(arr)
            h.update(str(a.dtype).encode() + str(a.shape).encode())
            h.update(a.tobytes())
        return h.hexdigest()

    def _arrays(self) -> dict:
        ids = np.array([s.encode() for s in self.traj_id], dtype="S") if len(self.traj_id) else np.zeros(0, "S1")
        return {"X": self.X.astype("<f8"), "y": self.y.astype("<f8"), "traj_id": ids,
                "t_start": self.t_start.astype("<f8"),
                "skipped": np.array([self.skipped], dtype="<i8"),
                "flagged": np.array([self.flagged], dtype="<i8")}

    def save(self, path):
        """Write an ``.npz`` archive with fixed member timestamps so that
        identical datasets produce identical bytes."""
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
            for name, arr in self._arrays().items():
                buf = io.BytesIO()
                np.lib.format.write_array(buf, arr, allow_pickle=False)
                info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
                zf.writestr(info, buf.getvalue())

    @classmethod
    def load(cls, path) -> "WindowedDataset":
        with np.load(path, allow_pickle=False) as z:
            try:
                flagged = int(z["flagged"][0]) if "flagged" in z.files else 0
                return cls(z["X"], z["y"], np.char.decode(z["traj_id"]), z["t_start"],
                           int(z["skipped"][0]), flagged)
            except KeyError as exc:
                raise DataError(f"{path}: missing array {exc}") from exc


# ------------------------------------------------------------------ csv i/o

def _read_table(path, header):
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        head = next(rd, None)
        if head is None or tuple(h.strip() for h in head) != header:
            raise DataError(f"{path}:1: expected header {','.join(header)}")
        for lineno, row in enumerate(rd, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed value ({exc})") from exc
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if rows and vals[0] <= rows[-1][0]:
                raise DataError(f"{path}:{lineno}: timestamp {vals[0]} does not increase")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows)


def load_imu(path) -> ImuData:
    a = _read_table(path, IMU_HEADER)
    return ImuData(a[:, 0], a[:, 1:4], a[:, 4:7])


def load_rtk(path) -> RtkData:
    a = _read_table(path, RTK_HEADER)
    return RtkData(a[:, 0], a[:, 1], a[:, 2])


def _write_table(path, header, cols):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in zip(*cols):
            wr.writerow([repr(float(v)) for v in row])


def write_imu(path, imu: ImuData):
    _write_table(path, IMU_HEADER, [imu.t, *imu.f.T, *imu.w.T])


def write_rtk(path, rtk: RtkData):
    _write_table(path, RTK_HEADER, [rtk.t, rtk.E, rtk.N])


def convert_movella_csv(path, time_scale=1e-6) -> ImuData:
    """Read a Movella DOT export into the canonical body frame.

    Expects ``SampleTimeFine`` (microseconds), ``Acc_X/Y/Z`` (m/s^2) and
    ``Gyr_X/Y/Z`` (deg/s) columns; other columns and preamble lines before the
    header are ignored. The sensor axes are x forward, y left, z up, so y and
    z are negated to obtain forward-right-down. The 32-bit sample clock is
    unwrapped.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    lines = path.read_text().splitlines()
    need = ("SampleTimeFine", "Acc_X", "Acc_Y", "Acc_Z", "Gyr_X", "Gyr_Y", "Gyr_Z")
    start = next((i for i, ln in enumerate(lines) if all(c in ln for c in need)), None)
    if start is None:
        raise DataError(f"{path}: no header with columns {', '.join(need)}")
    rd = csv.DictReader(lines[start:])
    ticks, vals = [], []
    for lineno, row in enumerate(rd, start=start + 2):
        try:
            ticks.append(int(float(row["SampleTimeFine"])))
            vals.append([float(row[c]) for c in need[1:]])
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: malformed row ({exc})") from exc
    if not ticks:
        raise DataError(f"{path}: no data rows")
    ticks = np.array(ticks, dtype=np.int64)
    d = np.diff(ticks)
    d[d < 0] += 2 ** 32
    t = np.concatenate([[0], np.cumsum(d)]) * time_scale
    a = np.array(vals)
    flip = np.array([1.0, -1.0, -1.0])
    try:
        return ImuData(t, a[:, 0:3] * flip, np.deg2rad(a[:, 3:6]) * flip)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


# ------------------------------------------------------------------ ground truth

def gt_distance(a: RtkFix, b: RtkFix) -> float:
    return math.hypot(b.E - a.E, b.N - a.N)


def gt_heading(a: RtkFix, b: RtkFix, min_distance=0.01) -> float:
    """Heading from north toward east of the displacement ``a -> b``."""
    if gt_distance(a, b) <= min_distance:
        raise DataError("fixes are coincident; heading is undefined")
    return math.atan2(b.E - a.E, b.N - a.N)


def init_from_rtk(rtk: RtkData, t0, min_distance=0.3) -> Pose2D:
    """Start pose at ``t0``: position interpolated from RTK, heading toward
    the first later fix at least ``min_distance`` away."""
    if not rtk.t[0] <= t0 <= rtk.t[-1]:
        raise DataError(f"start time {t0} lies outside the RTK record")
    E0 = float(np.interp(t0, rtk.t, rtk.E))
    N0 = float(np.interp(t0, rtk.t, rtk.N))
    start = RtkFix(t0, E0, N0)
    for i in np.nonzero(rtk.t > t0)[0]:
        if gt_distance(start, rtk[i]) >= min_distance:
            return Pose2D(N0, E0, gt_heading(start, rtk[i]))
    raise DataError("RTK never moves far enough from the start to fix a heading")


def rtk_trajectory(rtk: RtkData) -> Trajectory2D:
    psi = np.zeros(len(rtk))
    if len(rtk) > 1:
        psi[:-1] = np.arctan2(np.diff(rtk.E), np.diff(rtk.N))
        psi[-1] = psi[-2]
    return Trajectory2D(rtk.t, rtk.N, rtk.E, psi, meta={"method": "rtk"})


# ------------------------------------------------------------------ calibration

def static_calibrate(imu: ImuData, span, gravity=GRAVITY, gyro_std_max=0.01,
                     accel_std_max=0.2) -> CalibrationRecord:
    """Average a stationary span of at least 3 s.

    Assumes a leveled sensor, so the accelerometer should read ``(0, 0, -g)``.
    Refuses to calibrate when the per-axis gyro or accelerometer standard
    deviation exceeds the given limits (rad/s, m/s^2).
    """
    t0, t1 = float(span[0]), float(span[1])
    if t1 - t0 < 3.0 - 1e-9:
        raise DataError(f"static span of {t1 - t0:.3f} s is shorter than 3 s")
    sel = (imu.t >= t0) & (imu.t <= t1)
    if sel.sum() < 2:
        raise DataError("static span contains fewer than two samples")
    f, w = imu.f[sel], imu.w[sel]
    if np.any(w.std(axis=0) > gyro_std_max) or np.any(f.std(axis=0) > accel_std_max):
        raise DataError(f"motion detected in static span [{t0}, {t1}]; refusing to calibrate")
    return CalibrationRecord(f.mean(axis=0) - np.array([0.0, 0.0, -gravity]),
                             w.mean(axis=0), t0, t1)


# ------------------------------------------------------------------ synchronization

def _sustained(mask, run):
    """First index from which ``mask`` stays true for ``run`` entries."""
    if run <= 1:
        idx = np.nonzero(mask)[0]
        return int(idx[0]) if idx.size else None
    c = np.convolve(mask.astype(int), np.ones(run, dtype=int), mode="valid")
    idx = np.nonzero(c == run)[0]
    return int(idx[0]) if idx.size else None


def imu_motion_onset(imu: ImuData, static_time=1.0, hold=0.5, gyro_thresh=0.02,
                     accel_thresh=0.1, k_sigma=6.0) -> float:
    """Time of the first sustained departure from the leading static span.

    The inertial energy is the deviation of the gyro (rad/s) and
    accelerometer (m/s^2) readings from their mean over the first
    ``static_time`` seconds, smoothed over 0.1 s.
    """
    fs = imu.fs
    n0 = int(round(static_time * fs))
    if n0 < 2 or n0 >= len(imu):
        raise DataError("IMU stream is too short to contain a static lead-in")
    dw = np.linalg.norm(imu.w - imu.w[:n0].mean(axis=0), axis=1)
    df = np.linalg.norm(imu.f - imu.f[:n0].mean(axis=0), axis=1)
    k = max(1, int(round(0.1 * fs)))
    ker = np.ones(k) / k
    dw = np.convolve(dw, ker, mode="same")
    df = np.convolve(df, ker, mode="same")
    tw = max(gyro_thresh, k_sigma * dw[:n0].std() + dw[:n0].mean())
    tf = max(accel_thresh, k_sigma * df[:n0].std() + df[:n0].mean())
    i = _sustained((dw[n0:] > tw) | (df[n0:] > tf), max(1, int(round(hold * fs))))
    if i is None:
        raise DataError("no motion onset detected in the IMU stream")
    return float(imu.t[n0 + i])


def rtk_motion_onset(rtk: RtkData, static_time=1.0, dist_thresh=0.1, hold=0.5) -> float:
    """Time the RTK position first leaves, for good, a ``dist_thresh`` circle
    around the median static position (linearly interpolated between fixes)."""
    fs = 1.0 / np.median(np.diff(rtk.t)) if len(rtk) > 1 else 0.0
    n0 = int(round(static_time * fs))
    if n0 < 1 or n0 >= len(rtk):
        raise DataError("RTK stream is too short to contain a static lead-in")
    d = np.hypot(rtk.E - np.median(rtk.E[:n0]), rtk.N - np.median(rtk.N[:n0]))
    i = _sustained(d > dist_thresh, max(1, int(round(hold * fs))))
    if i is None or i == 0:
        raise DataError("no motion onset detected in the RTK stream")
    return float(np.interp(dist_thresh, d[i - 1:i + 1], rtk.t[i - 1:i + 1]))


def _imu_speed(imu: ImuData, static_time, t_from):
    """Along-track speed from the body-x specific force, integrated from
    ``t_from`` with the static mean removed."""
    n0 = max(2, int(round(static_time * imu.fs)))
    ax = imu.f[:, 0] - imu.f[:n0, 0].mean()
    ax[imu.t < t_from] = 0.0
    dt = np.diff(imu.t)
    return np.concatenate([[0.0], np.cumsum(0.5 * (ax[1:] + ax[:-1]) * dt)])


def _crossing(t, x, level):
    i = np.nonzero(x > level)[0]
    if i.size == 0 or i[0] == 0:
        return None
    i = int(i[0])
    return float(np.interp(level, x[i - 1:i + 1], t[i - 1:i + 1]))


@dataclass
class SyncResult:
    imu: ImuData
    rtk: RtkData
    offset: float           # rtk clock minus imu clock
    imu_onset: float        # first sustained inertial energy
    residual: float = math.nan  # onset mismatch after correction, s


def synchronize(imu: ImuData, rtk: RtkData, static_time=1.0, search=2.0, fit_span=4.0,
                resolution=1e-3, dist_thresh=0.1) -> SyncResult:
    """Estimate the constant clock offset between the RTK and IMU streams.

    The IMU motion onset (sustained inertial energy) anchors an integration
    of the body-x specific force into along-track speed and distance. A
    coarse offset aligns the instants at which the IMU distance and the RTK
    displacement pass ``dist_thresh``. It is refined by matching RTK speed
    with IMU speed over ``fit_span`` seconds after the onset, scanning
    ``search`` seconds around the coarse value.

    Returns the pair with RTK timestamps moved onto the IMU clock and the
    residual mismatch of the two displacement onsets.
    """
    if len(rtk) < 3:
        raise DataError("synchronization needs at least three RTK fixes")
    t_imu_on = imu_motion_onset(imu, static_time)
    t_rtk_cross = rtk_motion_onset(rtk, static_time, dist_thresh)
    v_imu = _imu_speed(imu, static_time, t_imu_on - 0.5)
    dist = np.concatenate([[0.0], np.cumsum(0.5 * (v_imu[1:] + v_imu[:-1]) * np.diff(imu.t))])
    t_imu_cross = _crossing(imu.t, dist, dist_thresh)
    if t_imu_cross is None:
        raise DataError("IMU-integrated distance never leaves the start")
    coarse = t_rtk_cross - t_imu_cross

    tm = 0.5 * (rtk.t[1:] + rtk.t[:-1])
    v_rtk = np.hypot(np.diff(rtk.E), np.diff(rtk.N)) / np.diff(rtk.t)
    sel = (tm >= t_rtk_cross - 1.0) & (tm <= t_rtk_cross + fit_span)
    if sel.sum() < 5:
        raise DataError("too few RTK fixes around the motion onset to refine the offset")
    tm, v_rtk = tm[sel], v_rtk[sel]

    def cost(tau):
        tq = tm - tau
        ok = (tq >= imu.t[0]) & (tq <= imu.t[-1])
        if ok.sum() < 5:
            return math.inf
        return float(np.mean((np.interp(tq[ok], imu.t, v_imu) - v_rtk[ok]) ** 2))

    grid = coarse + np.arange(-search, search + resolution / 2, resolution)
    costs = np.array([cost(tau) for tau in grid])
    if not np.any(np.isfinite(costs)):
        raise DataError("IMU and RTK streams do not overlap around the motion onset")
    i = int(np.argmin(costs))
    offset = float(grid[i])
    if 0 < i < len(grid) - 1 and np.all(np.isfinite(costs[i - 1:i + 2])):
        c0, c1, c2 = costs[i - 1:i + 2]
        den = c0 - 2 * c1 + c2
        if den > 0:
            offset += 0.5 * resolution * (c0 - c2) / den
    residual = abs(t_imu_cross - (t_rtk_cross - offset))
    return SyncResult(imu, rtk.shifted(-offset), offset, t_imu_on, residual)


# ------------------------------------------------------------------ windows

def make_windows(imu: ImuData, rtk: RtkData, W=24, hop=12, traj_id="", tol=None,
                 v_max=None) -> WindowedDataset:
    """Cut aligned streams into ``W``-sample windows with RTK distance targets.

    The window grid starts at the IMU sample nearest the first RTK fix and
    advances ``hop`` samples. A window spanning ``[t_s, t_s + W/fs]`` needs
    RTK fixes at its start, midpoint and end (within ``tol``, default a
    quarter of the RTK interval); otherwise it is skipped and counted. The
    target is the planar distance between the start and end fixes.

    With ``v_max`` (m/s), targets above ``v_max * W / fs`` are kept but
    logged and counted in ``flagged``.
    """
    fs = imu.fs
    M = imu.as_matrix().T
    n = len(imu)
    if len(rtk) < 2:
        raise DataError("windowing needs at least two RTK fixes")
    rtk_dt = float(np.median(np.diff(rtk.t)))
    tol = 0.25 * rtk_dt if tol is None else tol
    first = int(np.argmin(np.abs(imu.t - rtk.t[0])))
    starts = np.arange(first, n - W + 1, hop)
    span = W / fs

    def fix_near(tq):
        j = int(np.searchsorted(rtk.t, tq))
        best = None
        for c in (j - 1, j):
            if 0 <= c < len(rtk) and abs(rtk.t[c] - tq) <= tol:
                if best is None or abs(rtk.t[c] - tq) < abs(rtk.t[best] - tq):
                    best = c
        return best

    X, y, ts = [], [], []
    skipped = flagged = 0
    for a in starts:
        t_s = imu.t[a]
        i0, im, i1 = fix_near(t_s), fix_near(t_s + 0.5 * span), fix_near(t_s + span)
        if i0 is None or im is None or i1 is None or i1 - i0 != 2:
            skipped += 1
            continue
        d = gt_distance(rtk[i0], rtk[i1])
        if v_max is not None and d > v_max * span:
            flagged += 1
            log.warning("%s: target %.3f m at t=%.3f exceeds the v_max bound %.3f m",
                        traj_id or "stream", d, t_s, v_max * span)
        X.append(M[:, a:a + W])
        y.append(d)
        ts.append(t_s)
    Xa = np.array(X) if X else np.zeros((0, 6, W))
    return WindowedDataset(Xa, np.array(y), np.full(len(y), traj_id), np.array(ts), skipped,
                           flagged)


# ------------------------------------------------------------------ manifest

@dataclass
class TrajectoryEntry:
    id: str
    role: str
    imu_files: list
    rtk_file: str
    static_span: tuple = (0.0, 3.0)

    def __post_init__(self):
        if self.role not in ROLES:
            raise DataError(f"trajectory {self.id}: role must be one of {ROLES}")
        if not self.imu_files:
            raise DataError(f"trajectory {self.id}: no IMU files listed")


@dataclass
class Manifest:
    trajectories: list = field(default_factory=list)
    root: Path = Path(".")

    def by_role(self, *roles):
        return [tr for tr in self.trajectories if tr.role in roles]

    def path(self, rel) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def to_dict(self) -> dict:
        return {"trajectories": [{"id": tr.id, "role": tr.role, "imu_files": list(tr.imu_files),
                                  "rtk_file": tr.rtk_file, "static_span": list(tr.static_span)}
                                 for tr in self.trajectories]}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        if not path.exists():
            raise DataError(f"manifest not found: {path}")
        try:
            d = json.loads(path.read_text())
            trajs = [TrajectoryEntry(str(e["id"]), e["role"], list(e["imu_files"]),
                                     e["rtk_file"], tuple(e.get("static_span", (0.0, 3.0))))
                     for e in d["trajectories"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: invalid manifest ({exc})") from exc
        return cls(trajs, path.parent)


def load_stream(manifest: Manifest, entry: TrajectoryEntry, k, sync=True):
    """Load IMU stream ``k`` of a trajectory with its RTK, synchronized."""
    imu = load_imu(manifest.path(entry.imu_files[k]))
    rtk = load_rtk(manifest.path(entry.rtk_file))
    if not sync:
        return SyncResult(imu, rtk, 0.0, math.nan)
    return synchronize(imu, rtk, static_time=min(1.0, entry.static_span[1] - entry.static_span[0]))


def build_dataset(manifest: Manifest, roles=("train",), W=24, hop=12, sync=True,
                  v_max=None) -> WindowedDataset:
    """Windows from every IMU stream of the selected trajectories."""
    parts = []
    for entry in manifest.by_role(*roles):
        for k in range(len(entry.imu_files)):
            s = load_stream(manifest, entry, k, sync)
            parts.append(make_windows(s.imu, s.rtk, W, hop, traj_id=f"{entry.id}/{k}", v_max=v_max))
    if not parts:
        raise DataError(f"manifest has no trajectories with role in {roles}")
    return WindowedDataset.concat(parts)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def cache_dir() -> Path:
    return Path(os.environ.get("MORPINET_CACHE_DIR", "cache"))
