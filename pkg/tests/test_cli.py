import contextlib
import io
import json
import tempfile
from pathlib import Path
from unittest import TestCase

import pandas as pd

from projgp.cli import ExperimentReport, build_parser, main


class TestProjGPCommandLine(TestCase):
    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def run_main(self, *argv: str) -> tuple[int, str]:
        stderr = io.StringIO()
        with contextlib.redirect_stderr(stderr), contextlib.redirect_stdout(io.StringIO()):
            code = main(list(argv))
        return code, stderr.getvalue()

    def gen_data(self, name: str, synth: str) -> Path:
        path = self.dir / name
        code, _ = self.run_main("gen-data", "--synth", synth, "--seed", "0", "--out", str(path))
        self.assertEqual(code, 0)
        return path

    def test_parser(self) -> None:
        parser = build_parser()
        args = parser.parse_args(["cv", "--synth", "xor", "--model", "gam", "--seed", "3"])
        self.assertEqual((args.command, args.seed, args.model), ("cv", 3, "gam"))
        with contextlib.redirect_stderr(io.StringIO()), self.assertRaises(SystemExit) as ctx:
            parser.parse_args(["cv", "--model", "gam"])
        self.assertEqual(ctx.exception.code, 2)

    def test_report_printed_without_out(self) -> None:
        rows = pd.DataFrame({"fold": [0, 1], "rmse": [0.25, 0.5]})
        report = ExperimentReport("cv", {"model": "mean"}, 0, rows, {"rmse_mean": 0.375})
        stdout = io.StringIO()
        with contextlib.redirect_stdout(stdout):
            report.write(None)
        lines = stdout.getvalue().splitlines()
        self.assertEqual(lines[0].split(), ["fold", "rmse"])
        values = [[float(cell) for cell in line.split()] for line in lines[1:3]]
        self.assertEqual(values, [[0.0, 0.25], [1.0, 0.5]])
        printed = json.loads("\n".join(lines[3:]))
        self.assertEqual(printed["summary"], {"rmse_mean": 0.375})

    def test_gen_data(self) -> None:
        path = self.gen_data("sin.csv", "additive-sin:n=25,d=4")
        frame = pd.read_csv(path)
        self.assertEqual(frame.shape, (25, 5))
        self.assertEqual(list(frame.columns), ["x1", "x2", "x3", "x4", "y"])

        code, _ = self.run_main("gen-data", "--synth", "additive-sin:n=5")
        self.assertEqual(code, 2)

    def test_unknown_model(self) -> None:
        code, stderr = self.run_main("cv", "--synth", "xor:n=20", "--model", "no-such-model")
        self.assertEqual(code, 2)
        self.assertEqual(json.loads(stderr.strip().splitlines()[-1])["error"], "UsageError")

    def test_parse_error(self) -> None:
        path = self.dir / "broken.csv"
        path.write_text("a,b\n1,2\nx,3\n", encoding="utf-8")
        code, stderr = self.run_main("cv", "--dataset", str(path), "--model", "mean")
        self.assertEqual(code, 2)
        record = json.loads(stderr.strip().splitlines()[-1])
        self.assertEqual((record["error"], record["row"], record["column"]), ("ParseError", 2, 1))

    def test_empty_dataset(self) -> None:
        path = self.dir / "empty.csv"
        path.write_text("", encoding="utf-8")
        code, stderr = self.run_main("cv", "--dataset", str(path), "--model", "mean")
        self.assertEqual(code, 2)
        self.assertEqual(json.loads(stderr.strip().splitlines()[-1])["error"], "TooFewPoints")

    def test_cv(self) -> None:
        out = self.dir / "cv" / "mean"
        code, _ = self.run_main(
            "cv", "--synth", "additive-sin:n=40,d=2", "--model", "mean", "--folds", "4", "--repeats", "2", "--out", str(out)
        )
        self.assertEqual(code, 0)
        rows = pd.read_csv(out.with_suffix(".csv"))
        self.assertEqual(len(rows), 8)
        summary = json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))
        self.assertEqual(summary["seed"], 0)
        self.assertEqual(len(summary["run_id"]), 12)
        self.assertIn("rmse_mean", summary["summary"])

    def test_ablate_j(self) -> None:
        out = self.dir / "ablate"
        code, _ = self.run_main(
            "ablate-j", "--synth", "additive-sin:n=30,d=2", "--model", "rpa-gp-1", "--J-list", "1,2,2",
            "--folds", "2", "--repeats", "1", "--max-iterations", "3", "--out", str(out),
        )  # fmt: skip
        self.assertEqual(code, 0)
        summary = json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))["summary"]
        self.assertEqual(summary["J"], [1, 2])
        self.assertIn("spearman_rho", summary)

    def test_kernel_convergence(self) -> None:
        out = self.dir / "convergence.csv"
        code, _ = self.run_main(
            "kernel-convergence", "--J-list", "10,100", "--d", "3", "--bernstein-trials", "5", "--out", str(out)
        )
        self.assertEqual(code, 0)
        rows = pd.read_csv(out)
        self.assertEqual(set(rows["J"]), {10, 100})
        summary = json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))["summary"]
        self.assertEqual(len(summary["bernstein"]), 2)

    def test_bench_runtime(self) -> None:
        out = self.dir / "bench"
        code, _ = self.run_main(
            "bench-runtime", "--n-list", "20,40", "--d", "3", "--iterations", "2",
            "--models", "rbf-ard,dpa-gp-ard-ski", "--J", "3", "--m", "32", "--out", str(out),
        )  # fmt: skip
        self.assertEqual(code, 0)
        rows = pd.read_csv(out.with_suffix(".csv"))
        self.assertEqual(len(rows), 4)
        self.assertTrue((rows["iterations"] == 2).all())

    def test_fit_and_predict(self) -> None:
        train = self.gen_data("train.csv", "additive-sin:n=30,d=2")
        model_file = self.dir / "models" / "gam.projgp"
        code, _ = self.run_main(
            "fit", "--dataset", str(train), "--model", "gam", "--max-iterations", "5",
            "--save", str(model_file), "--out", str(self.dir / "fit"),
        )  # fmt: skip
        self.assertEqual(code, 0)
        self.assertTrue(model_file.exists())

        out = self.dir / "predictions"
        code, _ = self.run_main(
            "predict", "--model-file", str(model_file), "--dataset", str(train), "--target-col", "y",
            "--variance", "--out", str(out),
        )  # fmt: skip
        self.assertEqual(code, 0)
        predictions = pd.read_csv(out.with_suffix(".csv"))
        self.assertEqual(list(predictions.columns), ["prediction", "variance", "target"])
        self.assertEqual(len(predictions), 30)

        wrong = self.gen_data("wrong.csv", "additive-sin:n=5,d=3")
        code, stderr = self.run_main("predict", "--model-file", str(model_file), "--dataset", str(wrong), "--target-col", "y")
        self.assertEqual(code, 2)
        self.assertEqual(json.loads(stderr.strip().splitlines()[-1])["error"], "DimensionMismatch")
