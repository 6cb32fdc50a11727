"""
Command-line entry point.

Exit status: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Every command writes ``run_manifest.json`` next to its outputs with the
resolved configuration and SHA-256 digests of all inputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict
from importlib import metadata
from pathlib import Path

import numpy as np

from .ahrs import MadgwickConfig
from .core import DataError, NumericError, Pose2D, Trajectory2D
from .dataset import (CalibrationRecord, Manifest, TrajectoryEntry, RtkData, WindowedDataset,
                      build_dataset, cache_dir, file_digest, init_from_rtk, load_imu, load_rtk,
                      load_stream, rtk_trajectory, static_calibrate, synchronize, write_imu,
                      write_rtk)
from .dnet import DnetConfig, dnet_train, load_weights, predict, save_weights
from .evaluation import (benchmark, dmae, dmae_signed, drmse, evaluate_run, render_table,
                         write_report_csv)
from .morpi import (PeakDetectConfig, WeinbergGain, calibrate_gain, detect_peaks, extract_signal,
                    peak_chord_distance)
from .pipeline import (METHODS, PipelineConfig, read_trajectory_csv, run_method, track_anchor,
                       window_starts, write_geojson, write_trajectory_csv)
from .simgen import (SensorErrorSpec, SerpentineSpec, corrupt, gen_path, path_to_imu,
                     spec_to_dict)

log = logging.getLogger("morpinet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def _jsonable(x):
    if isinstance(x, Path):
        return str(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x


def _write_run_manifest(out: Path, command, args, config, inputs, outputs):
    digests = {}
    for p in inputs:
        if p is not None and Path(p).is_file():
            digests[str(p)] = file_digest(p)
    doc = {"command": command, "package_version": _version(),
           "args": _jsonable({k: v for k, v in vars(args).items() if k != "func"}),
           "config": _jsonable(config), "inputs": digests,
           "outputs": sorted(str(o) for o in outputs),
           "created_unix": time.time()}
    (out / "run_manifest.json").write_text(json.dumps(doc, indent=2))


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------------ simulate

def cmd_simulate(args):
    spec = SerpentineSpec.from_dict(_read_json(args.spec)) if args.spec else SerpentineSpec()
    err_d = _read_json(args.errors) if args.errors else {}
    out = _out_dir(args.out)
    rtk, dense = gen_path(spec)
    clean = path_to_imu(dense)
    imu_files = []
    for k in range(args.streams):
        err = SensorErrorSpec.from_dict({**err_d, "seed": args.seed + k})
        imu = clean if args.clean else corrupt(clean, err)
        name = f"imu_{k}.csv"
        write_imu(out / name, imu)
        imu_files.append(name)
    write_rtk(out / "rtk.csv", RtkData(rtk.t, rtk.E, rtk.N))
    write_trajectory_csv(out / "truth.csv", dense.trajectory())
    v0 = dense.vel[0]
    init = {"t": float(dense.t[0]), "x": float(dense.pos[0, 0]), "y": float(dense.pos[0, 1]),
            "psi": float(dense.psi[0]), "vx": float(v0[0]), "vy": float(v0[1])}
    (out / "init.json").write_text(json.dumps(init, indent=2))
    static = (0.0, max(spec.static_duration, 3.0))
    Manifest([TrajectoryEntry(args.id, args.role, imu_files, "rtk.csv", static)]).save(
        out / "manifest.json")
    outputs = imu_files + ["rtk.csv", "truth.csv", "init.json", "manifest.json"]
    _write_run_manifest(out, "simulate", args,
                        {"spec": spec_to_dict(spec), "errors": None if args.clean else err_d},
                        [args.spec, args.errors], outputs)
    log.info("wrote %d IMU stream(s) and %d RTK fixes to %s", args.streams, len(rtk), out)
    return 0


# ------------------------------------------------------------------ ingest

def cmd_ingest(args):
    man = Manifest.load(args.manifest)
    out = _out_dir(args.out or cache_dir())
    ds = build_dataset(man, tuple(args.roles), args.window, args.hop, sync=not args.no_sync,
                       v_max=args.v_max)
    ds.save(out / "windows.npz")
    digest = ds.digest()
    (out / "windows.sha256").write_text(digest + "\n")
    inputs = [args.manifest] + [man.path(f) for e in man.by_role(*args.roles)
                                for f in list(e.imu_files) + [e.rtk_file]]
    _write_run_manifest(out, "ingest", args, {"windows": len(ds), "skipped": ds.skipped,
                                              "flagged": ds.flagged,
                                              "digest": digest}, inputs,
                        ["windows.npz", "windows.sha256"])
    print(f"{len(ds)} windows ({ds.skipped} skipped, {ds.flagged} above v_max), digest {digest}")
    return 0


# ------------------------------------------------------------------ calibrate-gain

def _peak_cfg(args) -> PeakDetectConfig:
    return PeakDetectConfig(args.min_separation, args.prominence, args.cutoff,
                            refine_halfwidth=args.refine)


def gain_segments(manifest: Manifest, roles, mode, cfg: PeakDetectConfig, sync=True):
    """(signal, distance) pairs: the distance is the sum of RTK peak-to-peak
    displacements of each stream."""
    segs = []
    for entry in manifest.by_role(*roles):
        for k in range(len(entry.imu_files)):
            s = load_stream(manifest, entry, k, sync)
            x = extract_signal(s.imu, mode)
            peaks = detect_peaks(x, s.imu.fs, cfg)
            if len(peaks) < 2:
                log.warning("%s/%d: fewer than two peaks, skipped", entry.id, k)
                continue
            try:
                d = peak_chord_distance(s.imu.t[peaks], s.rtk.t, s.rtk.N, s.rtk.E)
            except DataError:
                log.warning("%s/%d: peaks outside the RTK record, skipped", entry.id, k)
                continue
            segs.append((x, d))
    return segs


def cmd_calibrate_gain(args):
    man = Manifest.load(args.manifest)
    cfg = _peak_cfg(args)
    segs = gain_segments(man, tuple(args.roles), args.mode, cfg, sync=not args.no_sync)
    if not segs:
        raise DataError("no usable calibration streams in the manifest")
    fs = load_imu(man.path(man.by_role(*args.roles)[0].imu_files[0])).fs
    gain = calibrate_gain(segs, fs, args.mode, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    gain.save(out)
    inputs = [args.manifest] + [man.path(f) for e in man.by_role(*args.roles)
                                for f in list(e.imu_files) + [e.rtk_file]]
    _write_run_manifest(out.parent, "calibrate-gain", args, json.loads(gain.to_json()), inputs,
                        [out.name])
    print(f"mode {gain.mode}: G = {gain.G:.6g} from {gain.segments_used} stream(s)")
    return 0


# ------------------------------------------------------------------ train

_TRAIN_FLAGS = ("epochs", "batch", "lr0", "plateau_patience", "plateau_factor", "dropout_flat",
                "dropout_fc", "val_fraction")


def cmd_train(args):
    base = _read_json(args.config) if args.config else {}
    for name in _TRAIN_FLAGS:
        v = getattr(args, name)
        if v is not None:
            base[name] = v
    if args.standardize:
        base["standardize"] = True
    base["seed"] = args.seed
    cfg = DnetConfig.from_dict(base)
    ds = WindowedDataset.load(args.dataset) if Path(args.dataset).exists() else None
    if ds is None:
        raise DataError(f"dataset not found: {args.dataset}")
    out = _out_dir(args.out)

    def progress(e):
        log.info("epoch %d train %.5f val %.5f lr %.2e", e["epoch"], e["train_mae"], e["val_mae"], e["lr"])

    w, tlog = dnet_train(ds.X, ds.y, cfg, progress=progress)
    save_weights(out / "weights.bin", w, tlog)
    with open(out / "train_log.csv", "w") as fh:
        fh.write("epoch,train_mae,val_mae,lr\n")
        for e in tlog.epochs:
            fh.write(f"{e['epoch']},{e['train_mae']!r},{e['val_mae']!r},{e['lr']!r}\n")
    _write_run_manifest(out, "train", args, asdict(cfg), [args.dataset, args.config],
                        ["weights.bin", "train_log.csv"])
    print(f"best epoch {tlog.best_epoch}: validation MAE {tlog.best_val:.5f} m")
    return 0


# ------------------------------------------------------------------ predict

def cmd_predict(args):
    w = _load_weights(args.weights)
    out = _out_dir(args.out)
    if (args.imu is None) == (args.dataset is None):
        raise UsageError("predict needs exactly one of --imu or --dataset")
    if args.dataset:
        if not Path(args.dataset).exists():
            raise DataError(f"dataset not found: {args.dataset}")
        ds = WindowedDataset.load(args.dataset)
        if ds.X.shape[2] != w.cfg.window:
            raise DataError(f"weights expect windows of {w.cfg.window} samples, "
                            f"dataset has {ds.X.shape[2]}")
        d = predict(w, ds.X)
        with open(out / "distances.csv", "w") as fh:
            fh.write("index,distance_m,target_m\n")
            for i, (a, b) in enumerate(zip(d, ds.y)):
                fh.write(f"{i},{float(a)!r},{float(b)!r}\n")
        scores = {"drmse": drmse(d, ds.y), "dmae": dmae(d, ds.y),
                  "dmae_signed": dmae_signed(d, ds.y), "windows": len(d)}
        (out / "scores.json").write_text(json.dumps(scores, indent=2))
        files = ["distances.csv", "scores.json"]
        print(f"{len(d)} windows: DRMSE {scores['drmse']:.4f} m, DMAE {scores['dmae']:.4f} m")
    else:
        imu = load_imu(args.imu)
        W = w.cfg.window
        starts = window_starts(len(imu), W, args.hop)
        M = imu.as_matrix().T
        d = predict(w, np.stack([M[:, a:a + W] for a in starts]))
        with open(out / "distances.csv", "w") as fh:
            fh.write("t_start,t_end,distance_m\n")
            for a, v in zip(starts, d):
                fh.write(f"{float(imu.t[a])!r},{float(imu.t[a] + W / imu.fs)!r},{float(v)!r}\n")
        files = ["distances.csv"]
        print(f"{len(d)} windows, total distance {float(np.sum(np.maximum(d, 0))):.3f} m")
    _write_run_manifest(out, "predict", args, asdict(w.cfg), [args.weights, args.imu, args.dataset],
                        files)
    return 0


# ------------------------------------------------------------------ reconstruct

def _pipeline_cfg(args) -> PipelineConfig:
    return PipelineConfig(ahrs=MadgwickConfig(gamma=args.gamma, mu=args.mu,
                                              accel_norm=args.accel_norm),
                          level_samples=args.level_samples, morpi_heading=args.morpi_heading)


def _load_gain(path):
    if path is None:
        return None
    if not Path(path).exists():
        raise DataError(f"gain record not found: {path}")
    return WeinbergGain.load(path)


def _load_weights(path):
    if path is None:
        return None
    if not Path(path).exists():
        raise DataError(f"weights file not found: {path}")
    return load_weights(path)


def cmd_reconstruct(args):
    imu = load_imu(args.imu)
    v0 = (0.0, 0.0)
    anchor = None
    if args.init:
        d = _read_json(args.init)
        init = Pose2D(float(d.get("x", 0.0)), float(d.get("y", 0.0)), float(d.get("psi", 0.0)))
        v0 = (float(d.get("vx", 0.0)), float(d.get("vy", 0.0)))
    elif args.rtk:
        rtk = load_rtk(args.rtk)
        if not args.no_sync:
            rtk = synchronize(imu, rtk).rtk
        init = init_from_rtk(rtk, imu.t[0])
        anchor = track_anchor(rtk_trajectory(rtk))
    else:
        init = Pose2D()
    calib = None
    if args.calib:
        calib = CalibrationRecord.load(args.calib)
    elif args.static_span:
        calib = static_calibrate(imu, args.static_span)
    accel_mean = None
    if args.static_span:
        sel = (imu.t >= args.static_span[0]) & (imu.t <= args.static_span[1])
        accel_mean = imu.f[sel].mean(axis=0)
    traj = run_method(args.method, imu, init, gain=_load_gain(args.gain),
                      weights=_load_weights(args.weights), calib=calib, init_velocity=v0,
                      pipeline_cfg=_pipeline_cfg(args), accel_mean=accel_mean, anchor=anchor)
    out = _out_dir(args.out)
    stem = args.method
    write_trajectory_csv(out / f"{stem}.csv", traj)
    write_geojson(out / f"{stem}.geojson", traj)
    _write_run_manifest(out, "reconstruct", args,
                        {"init": asdict(init), "init_velocity": v0,
                         "clamped": traj.meta.get("clamped")},
                        [args.imu, args.rtk, args.init, args.gain, args.weights, args.calib],
                        [f"{stem}.csv", f"{stem}.geojson"])
    print(f"{args.method}: {len(traj)} poses, end ({traj.x[-1]:.3f}, {traj.y[-1]:.3f}) m")
    return 0


# ------------------------------------------------------------------ evaluate

def _read_gt(path) -> Trajectory2D:
    with open(path) as fh:
        head = fh.readline().strip()
    if head.replace(" ", "") == "t,E,N":
        return rtk_trajectory(load_rtk(path))
    return read_trajectory_csv(path)


def _render(out: Path, bench, overlays):
    from .plotting import plot_errors_over_time, plot_metrics, plot_overlay

    write_report_csv(out / "report.csv", bench)
    table = render_table(bench)
    (out / "report.txt").write_text(table)
    files = ["report.csv", "report.txt"]
    if bench.summary:
        plot_metrics(out / "metrics.png", bench.summary)
        files.append("metrics.png")
    for tid, (gt, trajs) in overlays.items():
        safe = tid.replace("/", "_") or "run"
        plot_overlay(out / f"overlay_{safe}.png", trajs, gt, title=tid)
        plot_errors_over_time(out / f"errors_{safe}.png", trajs, gt)
        files += [f"overlay_{safe}.png", f"errors_{safe}.png"]
    print(table, end="")
    return files


def _step_distances(traj: Trajectory2D):
    return np.hypot(np.diff(traj.x), np.diff(traj.y))


def cmd_evaluate(args):
    out = _out_dir(args.out)
    if args.manifest:
        return _evaluate_manifest(args, out)
    if not args.run or not args.gt:
        raise UsageError("evaluate needs --gt with one or more --run METHOD=PATH, or --manifest")
    for spec in args.run:
        if "=" not in spec:
            raise UsageError(f"--run expects METHOD=PATH, got {spec!r}")
    if not Path(args.gt).exists():
        raise DataError(f"ground truth not found: {args.gt}")
    gt = _read_gt(args.gt)
    reports, trajs = [], {}
    for spec in args.run:
        method, path = spec.split("=", 1)
        if not Path(path).exists():
            raise DataError(f"trajectory not found: {path}")
        est = read_trajectory_csv(path)
        dist = _step_distances(est) if method == "morpinet" else None
        reports.append(evaluate_run(est, gt, method, args.traj_id, "0", distances=dist))
        trajs[method] = est
    bench = benchmark(reports, reference=args.reference)
    files = _render(out, bench, {args.traj_id: (gt, trajs)})
    _write_run_manifest(out, "evaluate", args, {"reference": args.reference},
                        [args.gt] + [s.split("=", 1)[1] for s in args.run], files)
    return 0


def run_manifest_methods(man: Manifest, roles, methods, gains=None, weights=None,
                         pcfg: PipelineConfig = PipelineConfig(), sync=True, out: Path | None = None):
    """Run positioning methods on every stream of the selected trajectories.

    Each stream starts from the RTK pose at its first covered IMU sample;
    the INS methods are calibrated on the entry's static span. Methods that
    fail on a stream are logged and left out, so they show up as missing.

    Returns
    -------
    reports : list of RunReport
    overlays : dict
        ``traj_id -> (ground truth, {method: trajectory of stream 0})``.
    expected : list of (method, traj_id)
    """
    gains = gains or {}
    reports, overlays, expected = [], {}, []
    for entry in man.by_role(*roles):
        for method in methods:
            expected.append((method, entry.id))
        for k in range(len(entry.imu_files)):
            s = load_stream(man, entry, k, sync=sync)
            gt = rtk_trajectory(s.rtk)
            init = init_from_rtk(s.rtk, max(s.imu.t[0], s.rtk.t[0]))
            imu = s.imu if s.imu.t[0] >= s.rtk.t[0] else s.imu.slice(
                int(np.searchsorted(s.imu.t, s.rtk.t[0])), len(s.imu))
            calib = None
            span = entry.static_span
            try:
                calib = static_calibrate(imu, span)
            except DataError as exc:
                log.warning("%s/%d: no calibration (%s)", entry.id, k, exc)
            sel = (imu.t >= span[0]) & (imu.t <= span[1])
            accel_mean = imu.f[sel].mean(axis=0) if sel.any() else None
            for method in methods:
                try:
                    tr = run_method(method, imu, init, gain=gains.get(method), weights=weights,
                                    calib=calib, pipeline_cfg=pcfg, accel_mean=accel_mean,
                                    anchor=track_anchor(gt))
                except (DataError, NumericError) as exc:
                    log.warning("%s on %s/%d failed: %s", method, entry.id, k, exc)
                    continue
                if out is not None:
                    write_trajectory_csv(out / f"{entry.id}_{k}_{method}.csv", tr)
                reports.append(evaluate_run(tr, gt, method, entry.id, str(k)))
                if k == 0:
                    overlays.setdefault(entry.id, (gt, {}))[1][method] = tr
    return reports, overlays, expected


def _evaluate_manifest(args, out: Path):
    man = Manifest.load(args.manifest)
    gains = {"morpi-a": _load_gain(args.gain_a), "morpi-g": _load_gain(args.gain_g)}
    weights = _load_weights(args.weights)
    methods = args.methods or [m for m in METHODS
                               if (m not in gains or gains[m] is not None)
                               and (m != "morpinet" or weights is not None)]
    pcfg = _pipeline_cfg(args)
    inputs = [args.manifest, args.gain_a, args.gain_g, args.weights]
    for entry in man.by_role(*args.roles):
        inputs += [man.path(f) for f in list(entry.imu_files) + [entry.rtk_file]]
    reports, overlays, expected = run_manifest_methods(man, args.roles, methods, gains, weights,
                                                       pcfg, sync=not args.no_sync, out=out)
    bench = benchmark(reports, reference=args.reference, expected=expected)
    files = _render(out, bench, overlays)
    _write_run_manifest(out, "evaluate", args, {"methods": methods, "pipeline": asdict(pcfg)},
                        inputs, files)
    return 0


# ------------------------------------------------------------------ parser

def _add_ahrs(p):
    p.add_argument("--gamma", type=float, default=0.01, help="Madgwick fusion weight")
    p.add_argument("--mu", type=float, default=0.01, help="Madgwick gradient step")
    p.add_argument("--accel-norm", choices=("l1", "l2"), default="l2")
    p.add_argument("--level-samples", type=int, default=0,
                   help="leading samples averaged to level the initial attitude")
    p.add_argument("--morpi-heading", choices=("ahrs", "gyro"), default="ahrs",
                   help="heading source for the MoRPI methods")


def _add_peaks(p):
    p.add_argument("--min-separation", type=float, default=1.0, help="seconds between peaks")
    p.add_argument("--prominence", type=float, default=None,
                   help="minimum peak prominence (default: half the signal std)")
    p.add_argument("--cutoff", type=float, default=5.0, help="low-pass cutoff, Hz")
    p.add_argument("--refine", type=float, default=0.3,
                   help="half-width of the peak-fitting parabola, s (0 disables)")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="morpinet", description="Inertial positioning for serpentine wheeled robots.")
    p.add_argument("--log-level", default="WARNING",
                   choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="write synthetic IMU/RTK streams")
    s.add_argument("--spec", help="JSON with SerpentineSpec fields")
    s.add_argument("--errors", help="JSON with SensorErrorSpec fields")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--streams", type=int, default=1, help="IMU streams sharing one path")
    s.add_argument("--clean", action="store_true", help="skip bias and noise")
    s.add_argument("--id", default="sim")
    s.add_argument("--role", default="test", choices=("train", "test", "straight"))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("ingest", help="build the windowed training cache")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", help="output directory (default $MORPINET_CACHE_DIR or ./cache)")
    s.add_argument("--roles", nargs="+", default=["train"])
    s.add_argument("--window", type=int, default=24)
    s.add_argument("--hop", type=int, default=12)
    s.add_argument("--v-max", type=float, default=None, help="sanity bound on speed, m/s")
    s.add_argument("--no-sync", action="store_true", help="streams are already aligned")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("calibrate-gain", help="fit the Weinberg gain")
    s.add_argument("--manifest", required=True)
    s.add_argument("--mode", choices=("A", "G"), required=True)
    s.add_argument("--roles", nargs="+", default=["train"])
    s.add_argument("--no-sync", action="store_true")
    _add_peaks(s)
    s.add_argument("--out", required=True, help="gain record path (JSON)")
    s.set_defaults(func=cmd_calibrate_gain)

    s = sub.add_parser("train", help="train D-Net")
    s.add_argument("--dataset", required=True, help="windows.npz from ingest")
    s.add_argument("--config", help="JSON with DnetConfig fields")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch", type=int)
    s.add_argument("--lr0", type=float)
    s.add_argument("--plateau-patience", type=int)
    s.add_argument("--plateau-factor", type=float)
    s.add_argument("--dropout-flat", type=float)
    s.add_argument("--dropout-fc", type=float)
    s.add_argument("--val-fraction", type=float)
    s.add_argument("--standardize", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="per-window D-Net distances")
    s.add_argument("--weights", required=True)
    s.add_argument("--imu", help="IMU CSV, windowed with --hop")
    s.add_argument("--dataset", help="windows.npz from ingest; also scores against its targets")
    s.add_argument("--hop", type=int, default=24)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("reconstruct", help="estimate a trajectory")
    s.add_argument("--method", choices=METHODS, required=True)
    s.add_argument("--imu", required=True)
    s.add_argument("--rtk", help="RTK CSV used for the start pose")
    s.add_argument("--init", help="JSON with x, y, psi (and optional vx, vy)")
    s.add_argument("--no-sync", action="store_true")
    s.add_argument("--gain", help="gain record for morpi-a / morpi-g")
    s.add_argument("--weights", help="weights file for morpinet")
    s.add_argument("--calib", help="calibration record for the INS methods")
    s.add_argument("--static-span", type=float, nargs=2, metavar=("T0", "T1"),
                   help="stationary span used for INS calibration and leveling")
    _add_ahrs(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("evaluate", help="metrics, report table and figures")
    s.add_argument("--run", action="append", metavar="METHOD=PATH",
                   help="trajectory CSV to score (repeatable)")
    s.add_argument("--gt", help="ground truth: trajectory CSV or RTK CSV")
    s.add_argument("--traj-id", default="run")
    s.add_argument("--manifest", help="run every method on the manifest's trajectories")
    s.add_argument("--roles", nargs="+", default=["test"])
    s.add_argument("--methods", nargs="+", choices=METHODS)
    s.add_argument("--gain-a")
    s.add_argument("--gain-g")
    s.add_argument("--weights")
    s.add_argument("--no-sync", action="store_true")
    s.add_argument("--reference", default="morpinet")
    _add_ahrs(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"morpinet: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"morpinet: data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"morpinet: numeric failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"morpinet: invalid configuration: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
