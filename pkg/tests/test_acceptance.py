"""Acceptance criteria, one test per criterion.

Each test prints ``criterion N: PASS|FAIL ...`` (also collected into the
terminal summary). Criteria 1 to 7 run offline on simulated data. Criteria
8 to 11 need the recorded dataset and are skipped unless these variables
are set:

MORPINET_DATASET   manifest with "train" and "test" trajectories
MORPINET_WEIGHTS   trained weights file (criteria 8 and 9)
MORPINET_GAIN_A    mode-A gain record (optional; calibrated on "train" otherwise)
MORPINET_GAIN_G    mode-G gain record (optional; calibrated on "train" otherwise)
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE
from morpinet.ahrs import gravity_objective, objective_gradient
from morpinet.core import Trajectory2D
from morpinet.dnet import (DnetConfig, DnetWeights, dnet_backward, dnet_forward, dnet_train,
                           dropout_mask, mae_grad, mae_loss, predict)
from morpinet.evaluation import benchmark, dmae, drmse, improvement, pmae, prmse
from morpinet.morpi import (PeakDetectConfig, WeinbergGain, calibrate_gain, detect_peaks,
                            extract_signal, morpi_reconstruct, peak_chord_distance)
from morpinet.pipeline import METHODS, morpinet_reconstruct
from morpinet.simgen import SensorErrorSpec, SerpentineSpec, corrupt
from morpinet.strapdown import ins_propagate
from simtools import clean_run, exact_init_3d, start_pose


def check(num, desc, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} {desc} ({detail})"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def skip(num, desc, reason):
    line = f"criterion {num}: SKIP {desc} ({reason})"
    ACCEPTANCE.append(line)
    print(line)
    pytest.skip(reason)


# ---------------------------------------------------------------- offline criteria

def test_criterion_1_simulator_round_trip():
    t0 = time.perf_counter()
    err = {}
    for fs in (120.0, 240.0):
        _, dense, imu = clean_run(SerpentineSpec(duration=10.0, fs_imu=fs))
        tr = ins_propagate(imu, exact_init_3d(dense), "3d")
        err[fs] = math.hypot(tr.x[-1] - dense.pos[-1, 0], tr.y[-1] - dense.pos[-1, 1])
    runtime = time.perf_counter() - t0
    ratio = err[120.0] / err[240.0]
    check(1, "3D strapdown round trip", err[120.0] <= 1e-3 and ratio >= 3.0 and runtime < 1.0,
          f"endpoint {err[120.0]:.2e} m at 120 Hz, shrink {ratio:.2f}x at 240 Hz, "
          f"{runtime:.2f} s")


def test_criterion_2_madgwick_gradient():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    h = 1e-5
    worst = 0.0
    for _ in range(100):
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        f = rng.normal(size=3)
        f /= np.linalg.norm(f)
        cost = lambda p: 0.5 * float(np.sum(gravity_objective(p, f) ** 2))
        fd = np.array([(cost(q + h * e) - cost(q - h * e)) / (2 * h) for e in np.eye(4)])
        an = objective_gradient(q, f)
        worst = max(worst, float(np.linalg.norm(an - fd) / np.linalg.norm(an)))
    runtime = time.perf_counter() - t0
    check(2, "Madgwick objective gradient vs central differences",
          worst <= 1e-6 and runtime < 1.0, f"worst relative error {worst:.1e}, {runtime:.2f} s")


def _fd_relative_errors(seed, per_tensor=25):
    cfg = DnetConfig()
    rng = np.random.default_rng(seed)
    w = DnetWeights.init(cfg, rng)
    for k in ("ln1_g", "ln1_b", "ln2_g", "ln2_b"):
        w.params[k] = w.params[k] + rng.normal(scale=0.3, size=w.params[k].shape)
    B = 4
    x = rng.normal(size=(B, cfg.in_channels, cfg.window))
    masks = (dropout_mask((B, cfg.conv_filters * cfg.conv_len), cfg.dropout_flat, rng),
             dropout_mask((B, cfg.fc1), cfg.dropout_fc, rng),
             dropout_mask((B, cfg.fc2), cfg.dropout_fc, rng))
    yhat, cache = dnet_forward(x, w, "train", masks=masks)
    y = yhat + 5.0 * np.where(np.arange(B) % 2, -1.0, 1.0)
    grads = dnet_backward(cache, mae_grad(yhat, y))
    h = 1e-6
    worst = {}
    for name, arr in w.params.items():
        flat = arr.reshape(-1)
        g = grads[name].reshape(-1)
        idx = np.arange(flat.size)
        if flat.size > per_tensor:
            # the largest-gradient entries plus a random sample
            top = np.argsort(-np.abs(g))[:per_tensor // 2]
            idx = np.unique(np.r_[top, rng.choice(flat.size, per_tensor // 2, replace=False)])
        rel = 0.0
        for i in idx:
            old = flat[i]
            flat[i] = old + h
            lp = mae_loss(dnet_forward(x, w, "train", masks=masks)[0], y)
            flat[i] = old - h
            lm = mae_loss(dnet_forward(x, w, "train", masks=masks)[0], y)
            flat[i] = old
            fd = (lp - lm) / (2 * h)
            scale = max(abs(g[i]), abs(fd))
            if scale > 1e-7:   # entries with no gradient (dropped units) are compared absolutely
                rel = max(rel, abs(g[i] - fd) / scale)
            else:
                rel = max(rel, abs(g[i] - fd) / 1e-7)
        worst[name] = rel
    return worst


def test_criterion_3_dnet_backprop():
    t0 = time.perf_counter()
    count = DnetWeights.init(DnetConfig()).n_params
    worst = {}
    for seed in range(5):
        for name, rel in _fd_relative_errors(seed).items():
            worst[name] = max(worst.get(name, 0.0), rel)
    runtime = time.perf_counter() - t0
    top = max(worst, key=worst.get)
    check(3, "D-Net gradients vs finite differences, parameter count",
          count == 174300 and worst[top] <= 1e-4 and runtime < 30.0,
          f"{count} parameters, {len(worst)} tensors, worst relative error {worst[top]:.1e} "
          f"({top}), {runtime:.1f} s")


def test_criterion_4_metric_identities():
    rng = np.random.default_rng(4)
    ordered = True
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        t = np.arange(n, dtype=float)
        gt = Trajectory2D(t, rng.normal(size=n) * 10, rng.normal(size=n) * 10, np.zeros(n))
        est = Trajectory2D(t, gt.x + rng.standard_cauchy(n), gt.y + rng.normal(size=n),
                           np.zeros(n))
        ordered &= prmse(est, gt) >= pmae(est, gt) * (1 - 1e-12)
    t = np.arange(20.0)
    gt = Trajectory2D(t, np.sin(t), np.cos(t), np.zeros(20))
    shifted = Trajectory2D(t, gt.x + 1.0, gt.y, np.zeros(20))
    exact = (prmse(gt, gt) == 0.0 and pmae(gt, gt) == 0.0
             and prmse(shifted, gt) == pytest.approx(1.0, abs=1e-12)
             and pmae(shifted, gt) == pytest.approx(1.0, abs=1e-12))
    a, b = improvement(2.75, 1.92), improvement(2.36, 1.59)
    check(4, "metric identities", ordered and exact and round(a) == 30 and round(b) == 33,
          f"PRMSE >= PMAE on 1000 pairs: {ordered}, offsets exact: {exact}, "
          f"improvements {a:.1f}% and {b:.1f}%")


def test_criterion_5_weinberg_gain():
    spec = SerpentineSpec(heading=0.3, speed=0.625, duration=45.0)
    _, dense, imu = clean_run(spec)
    imu = corrupt(imu, SensorErrorSpec(seed=50))
    x = extract_signal(imu, "A")
    peaks = detect_peaks(x, imu.fs)
    known = peak_chord_distance(imu.t[peaks], dense.t, dense.pos[:, 0], dense.pos[:, 1])
    gain = calibrate_gain([(x, known)], imu.fs, "A")
    # a second noise realization of the same 25 m run
    _, dense, imu2 = clean_run(spec)
    imu2 = corrupt(imu2, SensorErrorSpec(seed=51))
    a = morpi_reconstruct(imu2, gain, dense.psi, start_pose(dense))
    b = morpi_reconstruct(imu2, WeinbergGain(2 * gain.G, "A", peak_config=gain.peak_config),
                          dense.psi, start_pose(dense))
    rel = abs(a.path_length() - 25.0) / 25.0
    linear = (np.array_equal(b.x - a.x[0], 2 * (a.x - a.x[0]))
              and np.array_equal(b.y - a.y[0], 2 * (a.y - a.y[0])))
    check(5, "calibrated MoRPI-A distance and linearity in G",
          rel <= 0.10 and linear,
          f"known 25 m (calibration chord {known:.3f} m), reconstructed {a.path_length():.3f} m ({100 * rel:.1f}%), "
          f"exactly linear: {linear}")


def test_criterion_6_overfit_sanity():
    t0 = time.perf_counter()
    x = np.random.default_rng(6).normal(size=(6, 24))
    X, y = np.repeat(x[None], 16, axis=0), np.full(16, 0.2)
    cfg = DnetConfig(epochs=50, dropout_flat=0.0, dropout_fc=0.0, seed=6)
    w, log = dnet_train(X, y, cfg)
    mae = mae_loss(predict(w, X), y)
    runtime = time.perf_counter() - t0
    check(6, "D-Net memorizes one window", mae < 0.01 and len(log.epochs) <= 50 and runtime < 60,
          f"MAE {mae:.2e} m after {len(log.epochs)} epochs, {runtime:.1f} s")


def test_criterion_7_update_rates():
    _, dense, imu = clean_run(SerpentineSpec(duration=30.0))
    imu = corrupt(imu, SensorErrorSpec(seed=7))
    w = DnetWeights.init(DnetConfig(seed=7))
    tr = morpinet_reconstruct(imu, w, start_pose(dense))
    steps = np.diff(tr.t)
    rate = tr.meta["update_rate_hz"]
    rate_ok = (np.allclose(steps, 24 / imu.fs, rtol=0, atol=1e-9) and rate == imu.fs / 24
               and abs(rate - 5.0) < 1e-9)
    gain = WeinbergGain(1.0, "A")
    m = morpi_reconstruct(imu, gain, dense.psi, start_pose(dense))
    peaks = detect_peaks(extract_signal(imu, "A"), imu.fs, gain.peak_config)
    per_peak = len(m) == len(peaks) and np.array_equal(m.t, imu.t[peaks])
    check(7, "update rates", rate_ok and per_peak,
          f"MoRPINet every {steps.mean():.4f} s ({rate:.6f} Hz), "
          f"MoRPI {len(m)} poses for {len(peaks)} peaks")


# ---------------------------------------------------------------- dataset criteria

def _env_path(name):
    v = os.environ.get(name)
    return Path(v) if v else None


@pytest.fixture(scope="module")
def recorded():
    from morpinet.dataset import Manifest

    path = _env_path("MORPINET_DATASET")
    if path is None:
        return None
    return Manifest.load(path)


@pytest.fixture(scope="module")
def recorded_runs(recorded):
    """Every method on the recorded test trajectories."""
    from morpinet.cli import gain_segments, run_manifest_methods
    from morpinet.dataset import load_imu
    from morpinet.dnet import load_weights

    if recorded is None:
        return None
    gains = {}
    cfg = PeakDetectConfig()
    for mode in ("A", "G"):
        p = _env_path(f"MORPINET_GAIN_{mode}")
        if p is not None:
            gains[f"morpi-{mode.lower()}"] = WeinbergGain.load(p)
        else:
            segs = gain_segments(recorded, ("train",), mode, cfg)
            fs = load_imu(recorded.path(recorded.by_role("train")[0].imu_files[0])).fs
            gains[f"morpi-{mode.lower()}"] = calibrate_gain(segs, fs, mode, cfg)
    wpath = _env_path("MORPINET_WEIGHTS")
    weights = load_weights(wpath) if wpath else None
    methods = [m for m in METHODS if m != "morpinet" or weights is not None]
    reports, _, expected = run_manifest_methods(recorded, ("test",), methods, gains, weights)
    return benchmark(reports, expected=expected)


NO_DATA = "recorded dataset not available (set MORPINET_DATASET)"
NO_WEIGHTS = "trained weights not available (set MORPINET_WEIGHTS)"


def test_criterion_8_dnet_distance_errors(recorded):
    desc = "D-Net DMAE <= 0.030 m and DRMSE <= 0.035 m on the test trajectories"
    if recorded is None:
        skip(8, desc, NO_DATA)
    wpath = _env_path("MORPINET_WEIGHTS")
    if wpath is None:
        skip(8, desc, NO_WEIGHTS)
    from morpinet.dataset import build_dataset
    from morpinet.dnet import load_weights

    w = load_weights(wpath)
    ds = build_dataset(recorded, ("test",), w.cfg.window, w.cfg.window)
    d = predict(w, ds.X)
    e_mae, e_rmse = dmae(d, ds.y), drmse(d, ds.y)
    check(8, desc, e_mae <= 0.030 and e_rmse <= 0.035,
          f"DMAE {e_mae:.4f} m, DRMSE {e_rmse:.4f} m over {len(d)} windows")


def test_criterion_9_morpinet_position_errors(recorded_runs):
    desc = "MoRPINet average PRMSE <= 2.5 m and PMAE <= 2.1 m"
    if recorded_runs is None:
        skip(9, desc, NO_DATA)
    if _env_path("MORPINET_WEIGHTS") is None:
        skip(9, desc, NO_WEIGHTS)
    r = recorded_runs.row("morpinet")
    check(9, desc, r["prmse"] <= 2.5 and r["pmae"] <= 2.1,
          f"PRMSE {r['prmse']:.2f} m, PMAE {r['pmae']:.2f} m")


def test_criterion_10_method_ordering(recorded_runs):
    desc = "ordering INS2D > 100 m > MoRPI-G > MoRPI-A > MoRPINet, INS3D > 1000 m"
    if recorded_runs is None:
        skip(10, desc, NO_DATA)
    if _env_path("MORPINET_WEIGHTS") is None:
        skip(10, desc, NO_WEIGHTS)
    p = {m: recorded_runs.row(m)["prmse"] for m in METHODS}
    ok = (p["ins2d"] > 100.0 and p["ins2d"] > p["morpi-g"] > p["morpi-a"] > p["morpinet"]
          and p["ins3d"] > 1000.0)
    check(10, desc, ok, ", ".join(f"{m} {v:.2f} m" for m, v in p.items()))


def test_criterion_11_morpi_a_band(recorded_runs):
    desc = "MoRPI-A average PRMSE within [1.8, 4.0] m"
    if recorded_runs is None:
        skip(11, desc, NO_DATA)
    v = recorded_runs.row("morpi-a")["prmse"]
    check(11, desc, 1.8 <= v <= 4.0, f"PRMSE {v:.2f} m")
