import os
import subprocess

import numpy as np
import pytest

import mvsde


def test_simulate_shapes_and_determinism():
    a = mvsde.simulate("three_halves", steps=16, particles=20, seed=3)
    b = mvsde.simulate("three_halves", steps=16, particles=20, seed=3)
    assert a.shape == (20, 2)
    assert np.array_equal(a, b)
    assert np.all(np.isfinite(a))


def test_simulate_with_initial_states():
    x0 = np.array([[0.5], [-0.5], [1.5]])
    out = mvsde.simulate("double_well", {"sigma": [0.3]}, scheme="tamed_milstein", steps=8, initial=x0)
    assert out.shape == (3, 1)


def test_blow_up_raises():
    with pytest.raises(mvsde.BlowUpError):
        mvsde.simulate("double_well", {"x0": [10.0]}, scheme="untamed_euler", steps=8, particles=10)


def test_unknown_model():
    with pytest.raises(ValueError):
        mvsde.simulate("nope")


def test_convergence_study_report():
    r = mvsde.convergence_study("double_well", scheme="tamed_milstein", level_min=3, level_max=6,
                                particles=50, p_values=[2])
    assert r["levels"] == [3, 4, 5, 6]
    rmse = [row[0] for row in r["rmse"]]
    assert all(b < a for a, b in zip(rmse, rmse[1:]))
    assert 0.5 < r["slope"][0] < 1.5


def test_w2_and_taming():
    assert mvsde.w2_1d(np.array([0.0, 2.0]), np.array([1.0, 3.0])) == pytest.approx(1.0)
    assert mvsde.w2_1d(np.array([0.0, 2.0]), np.array([1.0])) == pytest.approx(1.0)
    assert mvsde.taming_denominator([2.0], 2.0, 4, "euler") == pytest.approx(2.0)
    assert mvsde.taming_denominator([10.0], 4.0, 100, "milstein") == pytest.approx(101.0)


def test_moment_trace_and_chaos():
    t = mvsde.moment_trace("double_well", steps=8, particles=10, p_values=[2])
    assert len(t["moments"]) == 9
    assert t["blow_up"] is None
    pts = mvsde.chaos_trend("double_well", steps=8, sizes=[8, 16], reference=16, repeats=2)
    assert pts[-1] == (16, 0.0)


def test_run_config():
    status, csv, summary = mvsde.run_config(
        "[model]\nmodel = double_well\n[study]\nlevel_min = 2\nlevel_max = 3\nparticles = 5\n")
    assert status == 0
    assert csv.splitlines()[0] == "level,n,p,rmse"
    assert len(csv.splitlines()) == 1 + 2 * 3
    assert summary.startswith("slope p=2")
    with pytest.raises(mvsde.ConfigError):
        mvsde.run_config("[scheme]\nn = -1\n")


@pytest.mark.skipif("MVSDE_CLI" not in os.environ, reason="command-line tool path not provided")
def test_cli_exit_codes(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[model]\nmodel = double_well\n[scheme]\nn = -1\n")
    assert subprocess.run([os.environ["MVSDE_CLI"], "--config", str(cfg)], capture_output=True).returncode == 1
