import json
import os
import pathlib

import numpy as np
import pytest

import pypgee

ROOT = pathlib.Path(os.environ.get("PGEE_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
GOLDEN = ROOT / "tests" / "golden"


def strip(report):
    report = dict(report)
    report.pop("timestamp", None)
    report.pop("exit_status", None)
    return report


def test_fit_matches_least_squares_golden():
    config = json.loads((GOLDEN / "ls_config.json").read_text())
    expected = json.loads((GOLDEN / "ls_expected.json").read_text())
    report = pypgee.fit(config, (GOLDEN / "ls_data.csv").read_text())
    assert report["exit_status"] == 0
    np.testing.assert_allclose(report["fit"]["coefficients"], expected["coefficients"], atol=1e-6)


def test_crossfit_reproduces_golden_report():
    report = pypgee.crossfit(
        (GOLDEN / "crossfit_config.json").read_text(), (GOLDEN / "crossfit_data.csv").read_text()
    )
    expected = json.loads((GOLDEN / "crossfit_expected.json").read_text())
    assert strip(report) == strip(expected)


def test_generate_then_fit():
    scenario = {"experiment": "support", "p": 10, "m": 1, "s": 2, "seed": 5}
    sim = pypgee.generate(scenario, 200, 9)
    assert sim["beta0"].shape == (10,)
    assert sim["data_csv"].startswith("unit_id,k,y,")
    report = pypgee.fit({"link": "identity", "penalty": "scad", "m_set": [1]}, sim["data_csv"])
    assert report["exit_status"] == 0
    assert len(report["fit"]["coefficients"]) == 10


def test_simulate_is_seed_deterministic():
    scenario = {"experiment": "rate", "p": 10, "n_values": [100, 200], "seed": 3}
    a, summary = pypgee.simulate(scenario, reps=4)
    b, _ = pypgee.simulate(scenario, reps=4)
    assert a == b
    assert a.count("\n") == 5
    assert "median_error_ratio" in summary["summary"]


def test_wald_and_chi2():
    w = pypgee.wald(np.array([0.3, -0.1]), np.eye(2), np.zeros(2), np.eye(2), 100)
    assert w["df"] == 2
    assert w["statistic"] == pytest.approx(100 * (0.09 + 0.01))
    assert w["p_value"] == pytest.approx(pypgee.chi2_sf(w["statistic"], 2))
    assert pypgee.chi2_quantile(0.95, 1) == pytest.approx(3.841458820694124, rel=1e-9)


def test_input_errors_raise():
    with pytest.raises(pypgee.InputError):
        pypgee.fit({"link": "identity", "m_set": [1]}, (GOLDEN / "ls_data.csv").read_text())
    with pytest.raises(pypgee.InputError, match="line 2"):
        pypgee.fit({"link": "identity", "penalty": "scad", "m_set": [1]}, "unit_id,k,y,x1\n1,1,a,2\n")
