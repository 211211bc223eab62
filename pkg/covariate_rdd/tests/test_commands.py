import csv
import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import TestCase
from unittest.mock import patch

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from covariate_rdd import cli
from covariate_rdd.dgp import dgp1
from covariate_rdd.inference import normal_quantile
from covariate_rdd.management.commands import estimate, kernel_info, sensitivity, simulate, validate
from covariate_rdd.monte_carlo import sample
from covariate_rdd.runner import AUTO_BANDWIDTH_LABEL, RunConfig, auto_bandwidth, run
from covariate_rdd.tests.factories import DatasetFactory


def write_csv(path, data):
    with open(path, mode="w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file)
        writer.writerow(["y", "x"] + [f"z{k + 1}" for k in range(data.p)])
        for i in range(data.n):
            writer.writerow([repr(float(data.y[i])), repr(float(data.x[i]))] + [repr(float(v)) for v in data.z[i]])
    return path


def run_json(command, **options):
    out = StringIO()
    call_command(command, format="json", stdout=out, **options)
    return json.loads(out.getvalue())


class CommandTestCase(TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name)
        self.exact_csv = write_csv(self.path / "exact.csv", DatasetFactory(n=300, p=2, jump=3.0, seed=1))
        self.dgp1_csv = write_csv(self.path / "dgp1.csv", sample(dgp1(), 4000, 7))

    def tearDown(self):
        self.directory.cleanup()


class TestEstimateCommand(CommandTestCase):
    def test_noiseless_jump(self):
        report = run_json(estimate.Command(), input_file=str(self.exact_csv), bandwidth="0.5")
        assert report["schema_version"] == "1.0"
        assert report["tau_hat"] == pytest.approx(3.0, abs=1e-10)
        assert report["p"] == 2
        assert report["bandwidth_rule"] == "user"
        assert "n*h^5" in report["note"]
        assert report["variance_method"] == "sample"

    def test_text_report(self):
        out = StringIO()
        call_command(estimate.Command(), input_file=str(self.exact_csv), bandwidth="0.5", stdout=out)
        text = out.getvalue()
        for line in ("kernel: triangular", "h: 0.5", "order: 1", "n_left: ", "n_right: "):
            assert line in text

    def test_auto_bandwidth_is_labelled(self):
        report = run_json(estimate.Command(), input_file=str(self.dgp1_csv), bandwidth="auto")
        assert report["bandwidth_rule"] == AUTO_BANDWIDTH_LABEL
        assert report["h"] == pytest.approx(auto_bandwidth(sample(dgp1(), 4000, 7).x))

    def test_output_file(self):
        target = self.path / "report.json"
        call_command(
            estimate.Command(), input_file=str(self.exact_csv), bandwidth="0.5", format="json", output_file=str(target)
        )
        assert json.loads(target.read_text(encoding="utf-8"))["command"] == "estimate"

    def test_ingestion_error(self):
        bad = self.path / "bad.csv"
        bad.write_text("y,x\n1,abc\n", encoding="utf-8")
        with pytest.raises(CommandError, match="ingestion: Row 2") as info:
            call_command(estimate.Command(), input_file=str(bad), bandwidth="0.5")
        assert info.value.returncode == 3

    def test_insufficient_support(self):
        with pytest.raises(CommandError) as info:
            call_command(estimate.Command(), input_file=str(self.exact_csv), bandwidth="0.001")
        assert info.value.returncode == 5

    def test_singular_design(self):
        data = DatasetFactory(n=100, p=1, seed=3)
        path = self.path / "singular.csv"
        with open(path, mode="w", encoding="utf-8", newline="") as file:
            writer = csv.writer(file)
            writer.writerow(["y", "x", "z1", "z2"])
            for i in range(data.n):
                writer.writerow([data.y[i], data.x[i], data.z[i, 0], 2 * data.z[i, 0]])
        with pytest.raises(CommandError) as info:
            call_command(estimate.Command(), input_file=str(path), bandwidth="0.8")
        assert info.value.returncode == 4

    def test_bad_bandwidth(self):
        with pytest.raises(CommandError) as info:
            call_command(estimate.Command(), input_file=str(self.exact_csv), bandwidth="-1")
        assert info.value.returncode == 2


class TestSensitivityCommand(CommandTestCase):
    def test_delta_hat_from_reported_fields(self):
        report = run_json(
            sensitivity.Command(), input_file=str(self.dgp1_csv), bandwidth="0.12", tau_bar=0.5, tau_bar_grid="0.5,1,2"
        )
        expected = report["tau_hat"] - 0.5 - normal_quantile(0.95) * report["se_tau"]
        assert abs(report["delta_hat"] - expected) <= 1e-12
        assert [row["tau_bar"] for row in report["curve"]] == [0.5, 1.0, 2.0]
        assert report["curve"][0]["delta_hat"] == report["delta_hat"]

    def test_reuses_estimate(self):
        fit = run_json(estimate.Command(), input_file=str(self.dgp1_csv), bandwidth="0.12")
        report = run_json(sensitivity.Command(), input_file=str(self.dgp1_csv), bandwidth="0.12", tau_bar=0.5)
        assert report["tau_hat"] == fit["tau_hat"]
        assert report["s2_hat"] == fit["s2_hat"]

    def test_needs_threshold(self):
        with pytest.raises(CommandError) as info:
            call_command(sensitivity.Command(), input_file=str(self.dgp1_csv), bandwidth="0.12")
        assert info.value.returncode == 2


class TestSimulateCommand(CommandTestCase):
    def test_identical_json_across_runs(self):
        outputs = []
        for _ in range(2):
            out = StringIO()
            call_command(simulate.Command(), dgp="dgp1", n=2000, reps=200, seed=42, format="json", stdout=out)
            outputs.append(out.getvalue())
        assert outputs[0] == outputs[1]
        report = json.loads(outputs[0])
        assert report["seed"] == 42
        assert report["seed_generated"] is False
        assert report["h"] == pytest.approx(2000 ** (-1.0 / 3.0))
        assert "normality" in report

    def test_generated_seed_is_recorded(self):
        report = run_json(simulate.Command(), dgp="dgp1", n=300, reps=3, bandwidth=0.4)
        assert report["seed_generated"] is True
        assert isinstance(report["seed"], int)

    def test_per_rep_csv(self):
        target = self.path / "reps.csv"
        run_json(simulate.Command(), dgp="dgp2", n=300, reps=5, seed=1, bandwidth=0.4, per_rep_csv=str(target))
        with open(target, encoding="utf-8", newline="") as file:
            assert len(list(csv.DictReader(file))) == 5

    def test_dgp_file(self):
        from covariate_rdd.dgp import dump_dgp

        path = self.path / "dgp1.env"
        path.write_text(dump_dgp(dgp1()), encoding="utf-8")
        from_file = run_json(simulate.Command(), dgp=str(path), n=300, reps=3, seed=5, bandwidth=0.4)
        builtin = run_json(simulate.Command(), dgp="dgp1", n=300, reps=3, seed=5, bandwidth=0.4)
        assert from_file["mean_tau"] == builtin["mean_tau"]


class TestKernelInfoAndValidate(TestCase):
    def test_kernel_info(self):
        report = run_json(kernel_info.Command(), kernel="uniform")
        assert report["constants"]["c_b"] == pytest.approx(-1 / 6)
        assert report["constants"]["c_s"] == pytest.approx(4.0)
        assert len(report["kappa_order2"]) == 6

    def test_kernel_info_plug_in(self):
        report = run_json(kernel_info.Command(), kernel="custom", kernel_path="covariate_rdd/tests/helpers.py")
        assert report["kernel"] == "BiweightKernel"

    def test_unknown_kernel(self):
        with pytest.raises(CommandError) as info:
            call_command(kernel_info.Command(), kernel="gaussian")
        assert info.value.returncode == 2

    def test_validate(self):
        report = run_json(validate.Command(), dgp="dgp1")
        assert report["passed"] is True
        assert report["variance_comparison"]["gap"] == pytest.approx(5.625)
        assert report["bias_leading"] == pytest.approx(-0.2)


class TestRun(TestCase):
    def test_error_report_has_category(self):
        outcome = run(RunConfig(command="simulate", dgp="dgp1", n=0, reps=1))
        assert outcome.exit_code == 2
        assert outcome.report["error"]["category"] == "usage"

    def test_missing_dgp_file(self):
        outcome = run(RunConfig(command="validate", dgp="/nonexistent/dgp.env"))
        assert outcome.exit_code == 3

    def test_plug_in_without_kernel_class(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "nokernel.py"
            path.write_text("VALUE = 1\n", encoding="utf-8")
            outcome = run(RunConfig(command="kernel-info", kernel="custom", kernel_path=str(path)))
        assert outcome.exit_code == 2
        assert "found 0" in outcome.report["error"]["message"]

    def test_undecodable_input(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "bad.csv"
            path.write_bytes(b"y,x\n\xff\xfe,0.1\n")
            outcome = run(RunConfig(command="estimate", input_path=str(path), bandwidth=0.5))
        assert outcome.exit_code == 3
        assert outcome.report["error"]["category"] == "ingestion"

    def test_unknown_variance_method(self):
        outcome = run(RunConfig(command="kernel-info", variance_method="jackknife"))
        assert outcome.exit_code == 2


class TestMain(CommandTestCase):
    def test_unknown_command(self):
        with patch("sys.stderr", new_callable=StringIO) as err:
            assert cli.main(["fit"]) == 2
        assert "Unknown command 'fit'" in err.getvalue()

    def test_no_command(self):
        with patch("sys.stdout", new_callable=StringIO):
            assert cli.main([]) == 2

    def test_kernel_info_dispatch(self):
        with patch("sys.stdout", new_callable=StringIO) as out:
            assert cli.main(["kernel-info", "--kernel", "triangular", "--format", "json"]) == 0
        assert json.loads(out.getvalue())["constants"]["c_s"] == pytest.approx(4.8)

    def test_exit_code_on_failure(self):
        with patch("sys.stderr", new_callable=StringIO):
            with pytest.raises(SystemExit) as info:
                cli.main(["estimate", "-i", str(self.exact_csv), "-b", "0.001"])
        assert info.value.code == 5

    def test_usage_error_exit_code(self):
        with patch("sys.stderr", new_callable=StringIO):
            with pytest.raises(SystemExit) as info:
                cli.main(["estimate", "--bandwidth", "0.5"])
        assert info.value.code == 2

    @patch("covariate_rdd.settings.RDD_DEFAULT_ORDER", 5)
    def test_bad_settings(self):
        with patch("sys.stderr", new_callable=StringIO) as err:
            assert cli.main(["kernel-info"]) == 2
        assert "RDD_DEFAULT_ORDER" in err.getvalue()
