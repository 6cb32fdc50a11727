"""
Synthetic serpentine trajectories and IMU streams.

The path is a sinusoid laid along a straight course,

    p(s) = s * u + A sin(2 pi s / L) * n,

where ``s`` is the along-course distance, ``u`` the course direction, ``n`` its
right-hand normal in the horizontal plane and ``L = v / f`` the weave
wavelength at cruise speed. The vehicle is nonholonomic (body x along the
velocity), flat (roll = pitch = 0) and moves along the course with a speed
profile ``s(t)`` that may include a static lead-in and a smooth ramp. All
derivatives are closed form, so the generated IMU data is exact up to
floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy import integrate

from .core import GRAVITY, ImuData, LocalFrameConfig, Trajectory2D

DEG = math.pi / 180.0


@dataclass(frozen=True)
class SerpentineSpec:
    """Motion parameters of one synthetic run.

    ``static_duration`` seconds of standstill are followed by a speed ramp of
    ``ramp_duration`` seconds (smoothstep), then cruise at ``speed``. The
    weave is spatial, so the vehicle stays on the same geometric path at any
    speed. ``rtk_time_offset`` is added to every RTK timestamp to emulate an
    unsynchronized receiver clock.
    """

    heading: float = 0.0
    speed: float = 0.6
    amplitude: float = 0.3
    frequency: float = 0.25
    duration: float = 40.0
    fs_imu: float = 120.0
    fs_rtk: float = 10.0
    static_duration: float = 0.0
    ramp_duration: float = 0.0
    rtk_time_offset: float = 0.0

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError("speed must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.amplitude > 0 and not 0 < self.frequency < self.fs_rtk / 4:
            raise ValueError("weave frequency must lie in (0, fs_rtk/4)")
        if self.static_duration < 0 or self.ramp_duration < 0:
            raise ValueError("static and ramp durations must be nonnegative")
        if self.static_duration > 0 and self.ramp_duration == 0:
            raise ValueError("a static lead-in needs a ramp_duration > 0")

    @property
    def wavelength(self) -> float:
        return self.speed / self.frequency if self.frequency > 0 else math.inf

    @classmethod
    def from_dict(cls, d) -> "SerpentineSpec":
        names = cls.__dataclass_fields__.keys()
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class SensorErrorSpec:
    """Constant bias plus white noise, in datasheet units.

    Defaults are the Movella DOT figures: gyro bias 10 deg/h, gyro noise
    0.007 deg/s/sqrt(Hz), accel bias 0.03 mg, accel noise 120 ug/sqrt(Hz).
    """

    gyro_bias_dph: float = 10.0
    gyro_noise_dps_rthz: float = 0.007
    accel_bias_mg: float = 0.03
    accel_noise_ug_rthz: float = 120.0
    seed: int = 0

    def __post_init__(self):
        for name in ("gyro_bias_dph", "gyro_noise_dps_rthz", "accel_bias_mg",
                     "accel_noise_ug_rthz"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @classmethod
    def zero(cls, seed=0) -> "SensorErrorSpec":
        return cls(0.0, 0.0, 0.0, 0.0, seed)

    @classmethod
    def from_dict(cls, d) -> "SensorErrorSpec":
        names = cls.__dataclass_fields__.keys()
        return cls(**{k: v for k, v in d.items() if k in names})

    # SI conversions
    @property
    def gyro_bias(self) -> float:
        return self.gyro_bias_dph * DEG / 3600.0

    @property
    def gyro_density(self) -> float:
        return self.gyro_noise_dps_rthz * DEG

    @property
    def accel_bias(self) -> float:
        return self.accel_bias_mg * 1e-3 * GRAVITY

    @property
    def accel_density(self) -> float:
        return self.accel_noise_ug_rthz * 1e-6 * GRAVITY


@dataclass
class DenseTruth:
    """Analytic state sampled at the IMU instants."""

    t: np.ndarray
    pos: np.ndarray      # (N, 2) north, east
    vel: np.ndarray      # (N, 2)
    acc: np.ndarray      # (N, 2)
    psi: np.ndarray      # heading, unwrapped
    psi_rate: np.ndarray
    spec: SerpentineSpec

    def trajectory(self) -> Trajectory2D:
        return Trajectory2D(self.t, self.pos[:, 0], self.pos[:, 1], self.psi,
                            meta={"method": "truth"})


@dataclass
class RtkStream:
    t: np.ndarray
    E: np.ndarray
    N: np.ndarray

    def __len__(self):
        return len(self.t)


# Along-course progress s(t) and its derivatives.
def _progress(spec: SerpentineSpec, t):
    t = np.asarray(t, dtype=float)
    v, t0, tr = spec.speed, spec.static_duration, spec.ramp_duration
    s = np.zeros_like(t)
    sd = np.zeros_like(t)
    sdd = np.zeros_like(t)
    if tr > 0:
        x = np.clip((t - t0) / tr, 0.0, 1.0)
        ramp = (t > t0) & (t < t0 + tr)
        s = np.where(t <= t0, 0.0, v * tr * (x ** 3 - 0.5 * x ** 4))
        sd = np.where(t <= t0, 0.0, v * (3 * x ** 2 - 2 * x ** 3))
        sdd = np.where(ramp, v / tr * (6 * x - 6 * x ** 2), 0.0)
        cruise = t >= t0 + tr
        s = np.where(cruise, 0.5 * v * tr + v * (t - t0 - tr), s)
        sd = np.where(cruise, v, sd)
    else:
        s = v * t
        sd = np.full_like(t, v)
    return s, sd, sdd


def _offset(spec: SerpentineSpec, s):
    """Cross-course offset c(s) and its first two derivatives."""
    if spec.amplitude == 0:
        z = np.zeros_like(s)
        return z, z, z
    k = 2 * math.pi / spec.wavelength
    a = spec.amplitude
    return a * np.sin(k * s), a * k * np.cos(k * s), -a * k * k * np.sin(k * s)


def truth_at(spec: SerpentineSpec, t) -> DenseTruth:
    """Evaluate the analytic path at arbitrary times."""
    t = np.asarray(t, dtype=float)
    s, sd, sdd = _progress(spec, t)
    c, c1, c2 = _offset(spec, s)
    u = np.array([math.cos(spec.heading), math.sin(spec.heading)])
    n = np.array([-math.sin(spec.heading), math.cos(spec.heading)])
    pos = np.outer(s, u) + np.outer(c, n)
    vel = np.outer(sd, u) + np.outer(sd * c1, n)
    acc = np.outer(sdd, u) + np.outer(sdd * c1 + sd * sd * c2, n)
    psi = spec.heading + np.arctan(c1)
    psi_rate = sd * c2 / (1.0 + c1 * c1)
    return DenseTruth(t, pos, vel, acc, psi, psi_rate, spec)


def gen_path(spec: SerpentineSpec):
    """Generate the RTK stream and the dense truth at the IMU rate.

    Returns
    -------
    rtk : RtkStream
        Fixes at ``fs_rtk`` over ``[0, duration]`` inclusive, timestamps
        shifted by ``rtk_time_offset``.
    dense : DenseTruth
        Truth at ``round(duration * fs_imu)`` IMU instants ``k / fs_imu``.
    """
    n_imu = int(round(spec.duration * spec.fs_imu))
    t_imu = np.arange(n_imu) / spec.fs_imu
    n_rtk = int(math.floor(spec.duration * spec.fs_rtk + 1e-9)) + 1
    t_rtk = np.arange(n_rtk) / spec.fs_rtk
    at_fix = truth_at(spec, t_rtk)
    rtk = RtkStream(t_rtk + spec.rtk_time_offset, at_fix.pos[:, 1].copy(),
                    at_fix.pos[:, 0].copy())
    return rtk, truth_at(spec, t_imu)


def arc_length(spec: SerpentineSpec, t_end=None) -> float:
    """Length of the travelled curve up to ``t_end`` (default: duration)."""
    t_end = spec.duration if t_end is None else t_end
    s_end = float(_progress(spec, np.array([t_end]))[0][0])
    if spec.amplitude == 0:
        return s_end
    k = 2 * math.pi / spec.wavelength
    ak = spec.amplitude * k

    def speed(s):
        return math.sqrt(1.0 + (ak * math.cos(k * s)) ** 2)

    n_periods = int(s_end // spec.wavelength) + 1
    pts = [min(i * spec.wavelength / 4, s_end) for i in range(4 * n_periods + 1)]
    val, _ = integrate.quad(speed, 0.0, s_end, points=pts[1:-1], limit=8 * n_periods + 50,
                            epsabs=1e-12, epsrel=1e-13)
    return float(val)


def path_to_imu(dense: DenseTruth, cfg: LocalFrameConfig = LocalFrameConfig()) -> ImuData:
    """Invert the mechanization: ``f_b = R^T (a - g)``, ``w_b = (0, 0, psi_dot)``."""
    n = len(dense.t)
    c, s = np.cos(dense.psi), np.sin(dense.psi)
    ax, ay = dense.acc[:, 0], dense.acc[:, 1]
    f = np.empty((n, 3))
    f[:, 0] = c * ax + s * ay
    f[:, 1] = -s * ax + c * ay
    f[:, 2] = -cfg.gravity_magnitude
    w = np.zeros((n, 3))
    w[:, 2] = dense.psi_rate
    return ImuData(dense.t.copy(), f, w)


def corrupt(clean: ImuData, err: SensorErrorSpec, fs=None) -> ImuData:
    """Add a constant bias and white noise (sigma = density * sqrt(fs)) per axis.

    The bias sign per axis is drawn from the seeded generator, so the result
    is a pure function of ``(clean, err)``.
    """
    fs = clean.fs if fs is None else fs
    rng = np.random.default_rng(err.seed)
    n = len(clean)
    sign_a = rng.choice([-1.0, 1.0], size=3)
    sign_g = rng.choice([-1.0, 1.0], size=3)
    noise_a = rng.standard_normal((n, 3)) * err.accel_density * math.sqrt(fs)
    noise_g = rng.standard_normal((n, 3)) * err.gyro_density * math.sqrt(fs)
    f = clean.f + sign_a * err.accel_bias + noise_a
    w = clean.w + sign_g * err.gyro_bias + noise_g
    return ImuData(clean.t.copy(), f, w)


def bias_vectors(err: SensorErrorSpec):
    """The (accel, gyro) bias vectors ``corrupt`` applies for this spec."""
    rng = np.random.default_rng(err.seed)
    sign_a = rng.choice([-1.0, 1.0], size=3)
    sign_g = rng.choice([-1.0, 1.0], size=3)
    return sign_a * err.accel_bias, sign_g * err.gyro_bias


def spec_to_dict(spec) -> dict:
    return asdict(spec)
