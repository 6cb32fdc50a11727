"""
Peak-to-peak dead reckoning with the Weinberg distance model.

MoRPI-A measures steps on the lateral specific force ``f_y``; MoRPI-G on the
yaw rate ``w_z``. Peaks are detected on a zero-phase low-passed copy of the
signal, and the Weinberg amplitude ``max - min`` is taken on that same
smoothed copy between successive peaks, both at calibration and at inference.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal as sps

from .core import DataError, ImuData, Pose2D, Trajectory2D

MODES = ("A", "G")


@dataclass(frozen=True)
class PeakDetectConfig:
    """Peak detector settings.

    ``min_prominence=None`` means half the standard deviation of the
    detrended smoothed signal. ``refine_halfwidth`` (s) is the half-width of
    the parabola fitted around each peak to locate it; 0 keeps the raw
    local-maximum index.
    """

    min_separation: float = 1.0
    min_prominence: float | None = None
    smoothing_cutoff: float = 5.0
    filter_order: int = 4
    refine_halfwidth: float = 0.3

    def __post_init__(self):
        if not self.min_separation > 0:
            raise ValueError("min_separation must be positive")
        if not self.smoothing_cutoff > 0:
            raise ValueError("smoothing_cutoff must be positive")
        if not self.refine_halfwidth >= 0:
            raise ValueError("refine_halfwidth must be nonnegative")


@dataclass
class WeinbergGain:
    G: float
    mode: str
    segments_used: int = 0
    peak_config: PeakDetectConfig = field(default_factory=PeakDetectConfig)

    def __post_init__(self):
        self.mode = self.mode.upper()
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.G > 0:
            raise ValueError("gain must be positive")

    def to_json(self) -> str:
        return json.dumps({"mode": self.mode, "G": self.G,
                           "segments_used": self.segments_used,
                           "signal": "smoothed",
                           "peak_config": asdict(self.peak_config)}, indent=2)

    @classmethod
    def from_json(cls, text) -> "WeinbergGain":
        d = json.loads(text)
        try:
            return cls(float(d["G"]), d["mode"], int(d.get("segments_used", 0)),
                       PeakDetectConfig(**d.get("peak_config", {})))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"invalid gain record: {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "WeinbergGain":
        with open(path) as fh:
            return cls.from_json(fh.read())


def extract_signal(imu: ImuData, mode) -> np.ndarray:
    mode = mode.upper()
    if mode == "A":
        return imu.f[:, 1].copy()
    if mode == "G":
        return imu.w[:, 2].copy()
    raise ValueError(f"mode must be one of {MODES}")


def smooth(x, fs, cfg: PeakDetectConfig = PeakDetectConfig()) -> np.ndarray:
    """Zero-phase Butterworth low-pass."""
    x = np.asarray(x, dtype=float)
    nyq = 0.5 * fs
    if cfg.smoothing_cutoff >= nyq:
        raise ValueError("smoothing cutoff must be below the Nyquist frequency")
    sos = sps.butter(cfg.filter_order, cfg.smoothing_cutoff / nyq, output="sos")
    # sosfiltfilt default padding needs this many samples
    padlen = 3 * (2 * len(sos) + 1 - min((sos[:, 2] == 0).sum(), (sos[:, 5] == 0).sum()))
    if len(x) <= padlen:
        raise DataError(f"series of {len(x)} samples is shorter than the filter warm-up ({padlen + 1})")
    return sps.sosfiltfilt(sos, x)


def detect_peaks(x, fs, cfg: PeakDetectConfig = PeakDetectConfig()) -> np.ndarray:
    """Indices of local maxima of the smoothed signal.

    Peaks closer than ``min_separation`` seconds are thinned (largest kept)
    and peaks below the prominence threshold are dropped.
    """
    x = np.asarray(x, dtype=float)
    if len(x) < 3:
        raise DataError("peak detection needs at least 3 samples")
    y = smooth(x, fs, cfg)
    prom = cfg.min_prominence
    if prom is None:
        prom = 0.5 * float(np.std(sps.detrend(y)))
    if prom <= 0:
        return np.array([], dtype=int)
    distance = max(1, int(math.ceil(cfg.min_separation * fs)))
    peaks, _ = sps.find_peaks(y, distance=distance, prominence=prom)
    half = int(round(cfg.refine_halfwidth * fs))
    if half > 0 and len(peaks):
        peaks = _refine_peaks(y, peaks, half, distance)
    return peaks.astype(int)


def _refine_peaks(y, peaks, half, distance):
    # a least-squares parabola averages out noise that moves the raw maximum
    out = peaks.copy()
    for k, i in enumerate(peaks):
        a, b = max(0, i - half), min(len(y), i + half + 1)
        if b - a < 5:
            continue
        c2, c1, _ = np.polyfit(np.arange(a, b) - i, y[a:b], 2)
        if c2 < 0:
            out[k] = i + int(round(np.clip(-c1 / (2 * c2), a - i, b - 1 - i)))
    # fall back to the raw index wherever refinement would break the spacing
    while True:
        gaps = np.diff(out) < distance
        if not gaps.any():
            return out
        bad = np.zeros(len(out), bool)
        bad[:-1] |= gaps
        bad[1:] |= gaps
        out[bad] = peaks[bad]


def weinberg_distance(segment, G) -> float:
    """``G * (max - min) ** 0.25`` over one peak-to-peak segment."""
    segment = np.asarray(segment, dtype=float)
    if segment.size == 0:
        raise DataError("empty segment")
    return float(G * (segment.max() - segment.min()) ** 0.25)


def step_amplitudes(smoothed, peaks) -> np.ndarray:
    """Fourth root of the range between each pair of successive peaks."""
    return np.array([(smoothed[a:b + 1].max() - smoothed[a:b + 1].min()) ** 0.25
                     for a, b in zip(peaks[:-1], peaks[1:])])


def calibrate_gain(segments, fs, mode="A", cfg: PeakDetectConfig = PeakDetectConfig()) -> WeinbergGain:
    """Fit the Weinberg gain by ratio of sums over known-distance segments.

    Parameters
    ----------
    segments : list of (signal, distance)
        Raw MoRPI signal (``f_y`` or ``w_z``) and the known distance driven
        during that recording.
    fs : float
        Sampling rate, Hz.
    """
    total_d = 0.0
    total_r = 0.0
    used = 0
    for x, dist in segments:
        y = smooth(x, fs, cfg)
        peaks = detect_peaks(x, fs, cfg)
        if len(peaks) < 2:
            continue
        total_r += float(np.sum(step_amplitudes(y, peaks)))
        total_d += float(dist)
        used += 1
    if used == 0:
        raise DataError("no calibration segment has two or more peaks")
    if total_r <= 0:
        raise DataError("calibration signal has zero range between peaks")
    return WeinbergGain(total_d / total_r, mode, used, cfg)


def peak_chord_distance(t_peaks, t_ref, north, east) -> float:
    """Sum of straight-line displacements between successive peak instants.

    Positions are interpolated from a reference track. Each MoRPI step
    advances along the heading at its first peak, so this, rather than the
    weaving path length, is the distance the steps should add up to.
    """
    t_peaks = np.asarray(t_peaks, dtype=float)
    if t_peaks[0] < t_ref[0] or t_peaks[-1] > t_ref[-1]:
        raise DataError("peak instants fall outside the reference track")
    n = np.interp(t_peaks, t_ref, north)
    e = np.interp(t_peaks, t_ref, east)
    return float(np.sum(np.hypot(np.diff(n), np.diff(e))))


def morpi_reconstruct(samples: ImuData, gain: WeinbergGain, heading, init: Pose2D,
                      cfg: PeakDetectConfig | None = None, anchor=None) -> Trajectory2D:
    """Dead reckoning with one pose per detected peak.

    The first pose (at the first peak) is ``init``; segment ``k`` between
    peaks ``k`` and ``k+1`` advances the position by ``s_k`` along the
    heading sampled at peak ``k``.

    ``anchor``, if given, maps a time to a reference ``(x, y)``; the first
    pose is then placed at the reference position at the first peak instead
    of at ``init``, which may lie well before it.
    """
    cfg = gain.peak_config if cfg is None else cfg
    heading = np.asarray(heading, dtype=float)
    if len(heading) != len(samples):
        raise DataError("heading series must have one entry per IMU sample")
    fs = samples.fs
    x = extract_signal(samples, gain.mode)
    y = smooth(x, fs, cfg)
    peaks = detect_peaks(x, fs, cfg)
    if len(peaks) < 2:
        raise DataError(f"MoRPI needs at least 2 peaks, found {len(peaks)}")
    steps = gain.G * step_amplitudes(y, peaks)
    psi = heading[peaks]
    t = samples.t[peaks]
    x0, y0 = (init.x, init.y) if anchor is None else map(float, anchor(t[0]))
    px = x0 + np.concatenate([[0.0], np.cumsum(steps * np.cos(psi[:-1]))])
    py = y0 + np.concatenate([[0.0], np.cumsum(steps * np.sin(psi[:-1]))])
    rate = (len(peaks) - 1) / (t[-1] - t[0])
    return Trajectory2D(t, px, py, psi,
                        meta={"method": f"morpi-{gain.mode.lower()}", "steps": steps,
                              "peaks": peaks, "update_rate_hz": rate})
