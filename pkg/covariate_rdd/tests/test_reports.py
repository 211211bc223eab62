import csv
import json
import tempfile
from pathlib import Path
from unittest import TestCase

import numpy as np
import pytest

from covariate_rdd.dgp import dgp1
from covariate_rdd.kernels import TRIANGULAR
from covariate_rdd.monte_carlo import replicate
from covariate_rdd.reports import SCHEMA_VERSION, emit_report, plain, write_per_rep_csv
from covariate_rdd.sensitivity import SensitivityCurveRow

RESULT = {
    "command": "estimate",
    "kernel": "triangular",
    "order": 1,
    "h": 0.1234567890123456,
    "n_left": 40,
    "n_right": 42,
    "tau_hat": np.float64(1.0 / 3.0),
    "gamma": np.array([0.1, -2.0 / 7.0]),
    "curve": [SensitivityCurveRow(tau_bar=0.5, delta_hat=0.25, no_rejection=np.bool_(False))],
}


class TestEmitReport(TestCase):
    def test_json_keeps_full_precision(self):
        data = json.loads(emit_report(RESULT, "json"))
        assert data["schema_version"] == SCHEMA_VERSION
        assert data["h"] == RESULT["h"]
        assert data["tau_hat"] == 1.0 / 3.0
        assert data["gamma"] == [0.1, -2.0 / 7.0]
        assert data["curve"] == [{"tau_bar": 0.5, "delta_hat": 0.25, "no_rejection": False}]

    def test_text_lists_fit_details(self):
        text = emit_report(RESULT, "text").decode("utf-8")
        assert "schema_version: 1.0" in text
        assert "kernel: triangular" in text
        assert "h: 0.1234567890123456" in text
        assert "order: 1" in text
        assert "n_left: 40" in text and "n_right: 42" in text
        assert "  - tau_bar=0.5, delta_hat=0.25, no_rejection=False" in text

    def test_output_is_stable(self):
        assert emit_report(RESULT, "json") == emit_report(dict(RESULT), "json")

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit_report(RESULT, "xml")

    def test_plain_converts_numpy(self):
        assert plain({"a": np.int64(3), "b": (np.float32(0.5),)}) == {"a": 3, "b": [0.5]}


class TestPerRepCsv(TestCase):
    def test_rows(self):
        report = replicate(dgp1(), 300, 0.4, TRIANGULAR, reps=4, master_seed=2)
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "reps.csv"
            write_per_rep_csv(report, path)
            with open(path, encoding="utf-8", newline="") as file:
                rows = list(csv.DictReader(file))
        assert [int(r["index"]) for r in rows] == [0, 1, 2, 3]
        assert float(rows[0]["tau_hat"]) == report.per_rep[0].tau_hat
