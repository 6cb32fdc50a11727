import functools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morpinet.core import GRAVITY, DataError, ImuData, Pose2D, wrap_angle
from morpinet.dnet import DnetConfig, DnetWeights
from morpinet.morpi import WeinbergGain
from morpinet.pipeline import (METHODS, PipelineConfig, ahrs_headings, dead_reckon, gyro_headings,
                               morpinet_reconstruct, read_trajectory_csv, run_method,
                               window_starts, write_geojson, write_trajectory_csv)
from morpinet.simgen import SensorErrorSpec, SerpentineSpec, corrupt
from morpinet.strapdown import Ins2DState, ins_propagate
from simtools import clean_run, start_pose


def constant_net(s):
    w = DnetWeights.zeros()
    w.params["head_b"][0] = s
    return w


def still(n, fs=120.0):
    f = np.tile([0.0, 0.0, -GRAVITY], (n, 1))
    return ImuData(np.arange(n) / fs, f, np.zeros((n, 3)))


@pytest.fixture(scope="module")
def sim():
    rtk, dense, imu = clean_run(SerpentineSpec(duration=20.0))
    return dense, corrupt(imu, SensorErrorSpec(seed=3))


# ---------------------------------------------------------------- MoRPINet

def test_zero_distances_stay_at_init():
    tr = morpinet_reconstruct(still(240), constant_net(0.0), Pose2D(2.0, -1.0, 0.4))
    np.testing.assert_array_equal(tr.x, 2.0)
    np.testing.assert_array_equal(tr.y, -1.0)


def test_unit_steps_due_north():
    tr = morpinet_reconstruct(still(240), constant_net(1.0), Pose2D(0.0, 0.0, 0.0))
    assert len(tr) == 11
    assert tr.x[-1] == pytest.approx(10.0, abs=1e-12)
    assert tr.y[-1] == pytest.approx(0.0, abs=1e-12)
    assert tr.meta["update_rate_hz"] == pytest.approx(5.0)
    np.testing.assert_allclose(np.diff(tr.t), 0.2, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(24, 2000), st.integers(1, 48))
def test_pose_count(n, hop):
    cfg = PipelineConfig(hop=hop)
    tr = morpinet_reconstruct(still(n), constant_net(0.1), Pose2D(0, 0, 0), cfg,
                              heading=np.zeros(n))
    assert len(tr) == (n - 24) // hop + 2


def test_short_stream_is_rejected():
    with pytest.raises(DataError):
        morpinet_reconstruct(still(23), constant_net(1.0), Pose2D(0, 0, 0))
    with pytest.raises(DataError):
        window_starts(10, 24, 24)


def test_path_length_is_sum_of_distances(sim):
    dense, imu = sim
    w = DnetWeights.init(DnetConfig(seed=4))
    w.params["head_b"][0] = 0.3
    tr = morpinet_reconstruct(imu, w, start_pose(dense))
    assert tr.path_length() == pytest.approx(float(np.sum(tr.meta["distances"])), rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(-math.pi, math.pi))
def test_heading_equivariance(delta):
    dense, imu = _equivariance_data()
    w = DnetWeights.init(DnetConfig(seed=4))
    w.params["head_b"][0] = 0.3
    p0 = start_pose(dense)
    a = morpinet_reconstruct(imu, w, p0)
    b = morpinet_reconstruct(imu, w, Pose2D(p0.x, p0.y, p0.psi + delta))
    c, s = math.cos(delta), math.sin(delta)
    dx, dy = a.x - p0.x, a.y - p0.y
    np.testing.assert_allclose(b.x - p0.x, c * dx - s * dy, atol=1e-9)
    np.testing.assert_allclose(b.y - p0.y, s * dx + c * dy, atol=1e-9)


@functools.lru_cache(maxsize=1)
def _equivariance_data():
    _, dense, imu = clean_run(SerpentineSpec(duration=8.0))
    return dense, corrupt(imu, SensorErrorSpec(seed=5))


def test_negative_outputs_are_clamped():
    tr = morpinet_reconstruct(still(240), constant_net(-0.5), Pose2D(0, 0, 0))
    assert tr.meta["clamped"] == 10
    np.testing.assert_array_equal(tr.meta["distances"], 0.0)
    np.testing.assert_array_equal(tr.meta["raw_distances"], -0.5)
    np.testing.assert_array_equal(tr.x, 0.0)


def test_window_mismatch_and_heading_length():
    w = DnetWeights.zeros(DnetConfig(window=12))
    with pytest.raises(DataError):
        morpinet_reconstruct(still(240), w, Pose2D(0, 0, 0))
    with pytest.raises(DataError):
        morpinet_reconstruct(still(240), constant_net(1.0), Pose2D(0, 0, 0), heading=np.zeros(5))


def test_window_heading_is_circular_mean():
    n = 48
    heading = np.r_[np.full(24, math.pi - 0.01), np.full(24, -math.pi + 0.01)]
    heading[12:24] = -math.pi + 0.01
    tr = morpinet_reconstruct(still(n), constant_net(1.0), Pose2D(0, 0, 0), heading=heading)
    assert abs(wrap_angle(tr.psi[1] - math.pi)) < 1e-9
    assert tr.x[1] == pytest.approx(-1.0, abs=1e-9)


def test_dead_reckon_composition():
    x, y = dead_reckon([1.0, 1.0, 2.0], [0.0, math.pi / 2, math.pi], Pose2D(1.0, 1.0, 0.0))
    np.testing.assert_allclose(x, [1.0, 2.0, 2.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(y, [1.0, 1.0, 2.0, 2.0], atol=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(hop=0)
    with pytest.raises(ValueError):
        PipelineConfig(morpi_heading="compass")
    with pytest.raises(ValueError):
        PipelineConfig(level_samples=-1)


# ---------------------------------------------------------------- headings

def test_gyro_heading_integrates_rate():
    n = 121
    w = np.zeros((n, 3))
    w[:, 2] = math.pi / 2
    imu = ImuData(np.arange(n) / 120.0, np.tile([0, 0, -GRAVITY], (n, 1)), w)
    psi = gyro_headings(imu, 0.2)
    assert psi[0] == 0.2
    assert psi[-1] == pytest.approx(0.2 + math.pi / 2, abs=1e-12)


def test_ahrs_and_gyro_heading_agree_on_clean_planar_data():
    _, dense, imu = clean_run(SerpentineSpec(duration=10.0))
    a = ahrs_headings(imu, dense.psi[0], PipelineConfig())
    g = gyro_headings(imu, dense.psi[0])
    assert np.max(np.abs(wrap_angle(a - g))) < math.radians(2.0)


# ---------------------------------------------------------------- dispatch

def test_ins2d_dispatch_matches_strapdown(sim):
    dense, imu = sim
    p0 = start_pose(dense)
    v0 = tuple(dense.vel[0])
    a = run_method("ins2d", imu, p0, init_velocity=v0)
    b = ins_propagate(imu, Ins2DState(p0.x, p0.y, v0[0], v0[1], p0.psi), "2d")
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)


def test_missing_artifacts_are_named(sim):
    dense, imu = sim
    with pytest.raises(DataError, match="gain record required"):
        run_method("morpi-a", imu, start_pose(dense))
    with pytest.raises(DataError, match="weights file required"):
        run_method("morpinet", imu, start_pose(dense))
    with pytest.raises(DataError, match="mode-G"):
        run_method("morpi-g", imu, start_pose(dense), gain=WeinbergGain(1.0, "A"))
    with pytest.raises(ValueError):
        run_method("ekf", imu, start_pose(dense))


def test_all_methods_on_one_run(sim):
    dense, imu = sim
    p0 = start_pose(dense)
    net = constant_net(0.12)
    out = {}
    for m in METHODS:
        gain = WeinbergGain(1.0, m[-1].upper()) if m.startswith("morpi-") else None
        out[m] = run_method(m, imu, p0, gain=gain, weights=net,
                            init_velocity=tuple(dense.vel[0]))
        assert out[m].meta["method"] == m
    np.testing.assert_array_equal(out["ins2d"].t, imu.t)
    np.testing.assert_array_equal(out["ins3d"].t, imu.t)
    np.testing.assert_allclose(np.diff(out["morpinet"].t), 0.2, atol=1e-9)
    np.testing.assert_array_equal(out["morpi-a"].t, imu.t[out["morpi-a"].meta["peaks"]])
    # at constant speed f_y and w_z peak together
    assert len(out["morpi-a"]) == len(out["morpi-g"])
    np.testing.assert_allclose(out["morpi-a"].t, out["morpi-g"].t, atol=5 / 120)


def test_gyro_heading_switch_changes_morpi_heading(sim):
    dense, imu = sim
    p0 = start_pose(dense)
    g = WeinbergGain(1.0, "A")
    a = run_method("morpi-a", imu, p0, gain=g)
    b = run_method("morpi-a", imu, p0, gain=g, pipeline_cfg=PipelineConfig(morpi_heading="gyro"))
    peaks = a.meta["peaks"]
    np.testing.assert_allclose(b.psi, gyro_headings(imu, p0.psi)[peaks], atol=1e-12)
    assert not np.array_equal(a.psi, b.psi)


# ---------------------------------------------------------------- files

def test_csv_roundtrip(tmp_path, sim):
    dense, imu = sim
    tr = run_method("morpinet", imu, start_pose(dense), weights=constant_net(0.12))
    write_trajectory_csv(tmp_path / "t.csv", tr)
    back = read_trajectory_csv(tmp_path / "t.csv")
    for k in ("t", "x", "y", "psi"):
        np.testing.assert_array_equal(getattr(back, k), getattr(tr, k))
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "t,x_north_m,y_east_m,psi_rad"


def test_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,x_north_m,y_east_m,psi_rad\n0,0,0,0\n1,2,x,0\n")
    with pytest.raises(DataError, match=":3:"):
        read_trajectory_csv(p)
    p.write_text("time,x,y\n")
    with pytest.raises(DataError):
        read_trajectory_csv(p)


def test_geojson_is_east_north(tmp_path):
    tr = morpinet_reconstruct(still(48), constant_net(1.0), Pose2D(5.0, 7.0, math.pi / 2))
    write_geojson(tmp_path / "t.geojson", tr)
    g = json.loads((tmp_path / "t.geojson").read_text())
    coords = g["features"][0]["geometry"]["coordinates"]
    assert g["features"][0]["geometry"]["type"] == "LineString"
    np.testing.assert_allclose(coords, [[7.0, 5.0], [8.0, 5.0], [9.0, 5.0]], atol=1e-12)
