"""Cross-fitted penalized estimating equations with covariate-dependent covariance."""

import json

from . import _core
from ._core import InputError, NumericalError, chi2_quantile, chi2_sf, wald

__all__ = [
    "InputError",
    "NumericalError",
    "chi2_quantile",
    "chi2_sf",
    "crossfit",
    "fit",
    "generate",
    "screen",
    "simulate",
    "test",
    "wald",
]


def _as_text(config):
    return config if isinstance(config, str) else json.dumps(config)


def _report(builder, config, data_csv):
    text, status = builder(_as_text(config), data_csv)
    report = json.loads(text)
    report["exit_status"] = status
    return report


def fit(config, data_csv):
    return _report(_core.fit, config, data_csv)


def screen(config, data_csv):
    return _report(_core.screen, config, data_csv)


def crossfit(config, data_csv):
    return _report(_core.crossfit, config, data_csv)


def test(config, data_csv):
    return _report(_core.test, config, data_csv)


test.__test__ = False


def simulate(scenario, reps=0, threads=0):
    """Returns (metrics_csv, summary dict)."""
    metrics, summary = _core.simulate(_as_text(scenario), reps, threads)
    return metrics, json.loads(summary)


def generate(scenario, n, seed):
    return _core.generate(_as_text(scenario), n, seed)
