"""
Position and distance error metrics and benchmark tables.

Position metrics compare every estimated pose with the ground truth linearly
interpolated to the estimate's timestamp; estimates are never interpolated.
Estimates outside the ground-truth time span are left out.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import DataError, Trajectory2D


def aligned_errors(est: Trajectory2D, gt: Trajectory2D) -> np.ndarray:
    """Planar error norm at each estimate time covered by the ground truth."""
    ok = (est.t >= gt.t[0]) & (est.t <= gt.t[-1])
    if not np.any(ok):
        raise DataError("estimate and ground truth do not overlap in time")
    gx = np.interp(est.t[ok], gt.t, gt.x)
    gy = np.interp(est.t[ok], gt.t, gt.y)
    return np.hypot(est.x[ok] - gx, est.y[ok] - gy)


def _rms(e) -> float:
    # scaled so tiny or huge errors neither underflow nor overflow when squared
    m = float(np.max(np.abs(e)))
    if m == 0.0 or not math.isfinite(m):
        return m
    return m * math.sqrt(float(np.mean((e / m) ** 2)))


def prmse(est: Trajectory2D, gt: Trajectory2D) -> float:
    return _rms(aligned_errors(est, gt))


def pmae(est: Trajectory2D, gt: Trajectory2D) -> float:
    return float(np.mean(aligned_errors(est, gt)))


def _pair(d_est, d_gt):
    a = np.asarray(d_est, dtype=float).reshape(-1)
    b = np.asarray(d_gt, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise DataError(f"distance lists differ in length ({a.size} vs {b.size})")
    if a.size == 0:
        raise DataError("empty distance lists")
    return a, b


def drmse(d_est, d_gt) -> float:
    a, b = _pair(d_est, d_gt)
    return _rms(a - b)


def dmae(d_est, d_gt) -> float:
    a, b = _pair(d_est, d_gt)
    return float(np.mean(np.abs(a - b)))


def dmae_signed(d_est, d_gt) -> float:
    """Mean of ``d_est - d_gt``; positive when distances are overestimated."""
    a, b = _pair(d_est, d_gt)
    return float(np.mean(a - b))


def improvement(baseline, ours) -> float:
    """Percentage reduction of an error relative to a baseline."""
    if baseline == 0:
        return 0.0 if ours == 0 else -math.inf
    return 100.0 * (baseline - ours) / baseline


def step_truth(est: Trajectory2D, gt: Trajectory2D):
    """Ground-truth distance between consecutive estimate timestamps.

    Returns
    -------
    d : ndarray
        Distances for the step pairs lying inside the ground-truth span.
    inside : ndarray of bool
        Which of the ``len(est) - 1`` steps were kept.
    """
    ok = (est.t >= gt.t[0]) & (est.t <= gt.t[-1])
    inside = ok[:-1] & ok[1:]
    if not np.any(inside):
        raise DataError("no estimate step lies inside the ground-truth time span")
    gx = np.interp(est.t, gt.t, gt.x)
    gy = np.interp(est.t, gt.t, gt.y)
    return np.hypot(np.diff(gx), np.diff(gy))[inside], inside


# ------------------------------------------------------------------ reports

@dataclass
class RunReport:
    method: str
    traj_id: str
    stream: str
    prmse: float
    pmae: float
    drmse: float = math.nan
    dmae: float = math.nan
    dmae_signed: float = math.nan
    update_rate_hz: float = math.nan
    path_length_m: float = math.nan
    duration_s: float = math.nan

    def __post_init__(self):
        for name in ("prmse", "pmae", "drmse", "dmae"):
            v = getattr(self, name)
            if not (math.isnan(v) or v >= 0):
                raise ValueError(f"{name} must be nonnegative")


def evaluate_run(est: Trajectory2D, gt: Trajectory2D, method=None, traj_id="", stream="",
                 distances=None) -> RunReport:
    """All metrics of one estimated trajectory.

    ``distances`` are per-step distance estimates (one per consecutive pose
    pair); by default ``est.meta["distances"]`` is used when present. Their
    reference is ``step_truth``; steps outside the ground truth are ignored.
    """
    method = method or est.meta.get("method", "unknown")
    if distances is None:
        distances = est.meta.get("distances")
    dr = dm = ds = math.nan
    if distances is not None:
        d_gt, inside = step_truth(est, gt)
        d = np.asarray(distances, dtype=float)
        if d.shape != inside.shape:
            raise DataError(f"{d.size} distances for {inside.size} trajectory steps")
        d = d[inside]
        dr, dm, ds = drmse(d, d_gt), dmae(d, d_gt), dmae_signed(d, d_gt)
    rate = est.meta.get("update_rate_hz")
    if rate is None:
        rate = (len(est) - 1) / (est.t[-1] - est.t[0]) if len(est) > 1 else math.nan
    return RunReport(method, traj_id, stream, prmse(est, gt), pmae(est, gt), dr, dm, ds,
                     float(rate), gt.path_length(), float(gt.t[-1] - gt.t[0]))


def _nanmean(vals):
    a = np.array(vals, dtype=float)
    return float(np.mean(a[~np.isnan(a)])) if np.any(~np.isnan(a)) else math.nan


METRICS = ("prmse", "pmae", "drmse", "dmae", "dmae_signed", "update_rate_hz",
           "path_length_m", "duration_s")


@dataclass
class Benchmark:
    per_trajectory: list = field(default_factory=list)   # dicts
    summary: list = field(default_factory=list)          # dicts, one per method
    missing: list = field(default_factory=list)          # (method, traj_id)
    reference: str = "morpinet"

    def row(self, method) -> dict:
        for r in self.summary:
            if r["method"] == method:
                return r
        raise KeyError(method)


def benchmark(reports, reference="morpinet", expected=None) -> Benchmark:
    """Average run reports over streams, then over trajectories.

    Each trajectory's metrics are the mean over its IMU streams; each
    method's summary is the mean over trajectories. ``improvement_*`` columns
    give the reduction achieved by ``reference`` relative to that method.
    ``expected`` (method, traj_id) pairs without reports are listed in
    ``missing``; the table is still produced from what is available.
    """
    reports = list(reports)
    groups = {}
    for r in reports:
        groups.setdefault((r.method, r.traj_id), []).append(r)
    missing = sorted(set(expected or ()) - set(groups))
    per_traj = []
    for (method, tid), rs in sorted(groups.items()):
        row = {"method": method, "traj_id": tid, "streams": len(rs)}
        for m in METRICS:
            row[m] = _nanmean([getattr(r, m) for r in rs])
        per_traj.append(row)
    methods = sorted({r["method"] for r in per_traj}, key=lambda m: (m != reference, m))
    summary = []
    for method in methods:
        rows = [r for r in per_traj if r["method"] == method]
        row = {"method": method, "traj_id": "average", "streams": sum(r["streams"] for r in rows)}
        for m in METRICS:
            row[m] = _nanmean([r[m] for r in rows])
        summary.append(row)
    ref = next((r for r in summary if r["method"] == reference), None)
    for row in summary + per_traj:
        for m in ("prmse", "pmae"):
            if ref is None:
                row[f"improvement_{m}"] = math.nan
                continue
            if row["traj_id"] == "average":
                ours = ref[m]
            else:
                match = [r for r in per_traj if r["method"] == reference and r["traj_id"] == row["traj_id"]]
                ours = match[0][m] if match else math.nan
            row[f"improvement_{m}"] = improvement(row[m], ours) if not math.isnan(ours) else math.nan
    return Benchmark(per_traj, summary, missing, reference)


COLUMNS = ("method", "traj_id", "streams") + METRICS + ("improvement_prmse", "improvement_pmae")


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_report_csv(path, bench: Benchmark):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(COLUMNS)
        for row in bench.per_trajectory + bench.summary:
            wr.writerow([_fmt(row[c]) for c in COLUMNS])


def render_table(bench: Benchmark) -> str:
    """Plain-text summary: one line per method with rate, errors and the
    reference method's improvement over it."""
    head = ("Method", "Rate [Hz]", "PRMSE [m]", "PMAE [m]", "DRMSE [m]", "DMAE [m]",
            f"{bench.reference} PRMSE impr. [%]", f"{bench.reference} PMAE impr. [%]")

    def num(v, nd=2):
        return "-" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.{nd}f}"

    rows = [(r["method"], num(r["update_rate_hz"], 1), num(r["prmse"]), num(r["pmae"]),
             num(r["drmse"], 3), num(r["dmae"], 3),
             "-" if r["method"] == bench.reference else num(r["improvement_prmse"], 0),
             "-" if r["method"] == bench.reference else num(r["improvement_pmae"], 0))
            for r in bench.summary]
    widths = [max(len(str(x)) for x in col) for col in zip(head, *rows)]
    line = "  ".join("-" * w for w in widths)
    out = ["  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip(), line]
    out += ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    if bench.missing:
        out.append("")
        out.append("missing runs: " + ", ".join(f"{m}/{t}" for m, t in bench.missing))
    return "\n".join(out) + "\n"


def report_dicts(reports) -> list:
    return [asdict(r) for r in reports]
