import contextlib
import io
import math
import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from cli.commands import parse_floats, parse_g_spec, read_points, resolve_run_config
from cli.config_file import layered_run_config, parse_config_text, read_config_file
from hjb.errors import ConfigError
from hjb.workspace import RunWorkspace, read_comment_lines, read_csv
from main import build_parser, main


class TestConfigFile(unittest.TestCase):

    def test_parse_values_and_comments(self):
        text = "\n".join([
            "# vehicle run",
            'problem = "vehicle2d"   # trailing comment',
            "",
            "scheme.h = 0.1",
            "scheme.M = 2",
            "network.branch_hidden = [4, 4]",
            "diagnostics.include_m1 = true",
            'output_dir = "runs/#1"',
        ])

        data = parse_config_text(text)

        self.assertEqual(data["problem"], "vehicle2d")
        self.assertEqual(data["scheme"], {"h": 0.1, "M": 2})
        self.assertEqual(data["network"]["branch_hidden"], [4, 4])
        self.assertIs(data["diagnostics"]["include_m1"], True)
        self.assertEqual(data["output_dir"], "runs/#1")

    def test_malformed_lines(self):
        for text in ("just words", "a..b = 1", "scheme.h = abc", "scheme = 1\nscheme.h = 0.1"):
            with self.assertRaises(ConfigError):
                parse_config_text(text)

    def test_error_names_the_line(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("scheme.h = 0.1\n\nnot a pair")

        self.assertEqual(ctx.exception.context["line"], 3)

    def test_out_of_range_value_names_the_field(self):
        with self.assertRaises(ConfigError) as ctx:
            layered_run_config({"problem": "vehicle2d", "scheme": {"h": 1.5, "M": 1}})

        self.assertEqual(ctx.exception.context["field"], "scheme.h")
        self.assertEqual(ctx.exception.exit_code, 2)

    def test_unknown_key_is_rejected(self):
        with self.assertRaises(ConfigError) as ctx:
            layered_run_config({"problem": "vehicle2d", "scheme": {"h": 0.1, "M": 1}}, {"scheme": {"bogus": 1}})

        self.assertEqual(ctx.exception.context["field"], "scheme.bogus")

    def test_later_layers_win(self):
        defaults = {"problem": "vehicle2d", "scheme": {"h": 0.1, "M": 2}, "training": {"epochs": 5}}

        cfg = layered_run_config(defaults, {"scheme": {"M": 3}}, None, {"scheme": {"M": 4}})

        self.assertEqual(cfg.scheme.M, 4)
        self.assertEqual(cfg.scheme.h, 0.1)
        self.assertEqual(cfg.training.epochs, 5)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            read_config_file("/nonexistent/run.cfg")

    def test_flags_override_the_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "run.cfg")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("scheme.M = 1\nnetwork.seed = 3\ntraining.epochs = 7\n")
            args = build_parser().parse_args(["train", "--problem", "vehicle", "--config", path, "--seed", "9"])

            cfg = resolve_run_config(args)

        self.assertEqual(cfg.problem, "vehicle2d")
        self.assertEqual(cfg.scheme.M, 1)
        self.assertEqual(cfg.training.epochs, 7)
        self.assertEqual(cfg.network.seed, 9)


class TestTerminalSpecs(unittest.TestCase):

    def setUp(self):
        self.sensors = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, -2.0]])
        self.x = np.array([[3.0, 4.0], [0.5, -0.5]])

    def test_norm_forms(self):
        np.testing.assert_allclose(parse_g_spec("|x|", self.sensors)(self.x), [5.0, math.sqrt(0.5)])
        np.testing.assert_allclose(parse_g_spec(" |x|^2 ", self.sensors)(self.x), [25.0, 0.5])

    def test_quadratic_forms(self):
        g = parse_g_spec("0.3 + 0.5*|x|^2", self.sensors)
        neg = parse_g_spec("1 - 2*|x|^2", self.sensors)
        bare = parse_g_spec("2.5*|x|^2", self.sensors)

        self.assertEqual((g.params["a"], g.params["b"]), (0.3, 0.5))
        self.assertEqual((neg.params["a"], neg.params["b"]), (1.0, -2.0))
        self.assertEqual((bare.params["a"], bare.params["b"]), (0.0, 2.5))
        np.testing.assert_allclose(g(self.x), [0.3 + 12.5, 0.3 + 0.25])

    def test_sensor_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "g.txt")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("# one value per sensor\n1.0\n2.0\n3.0\n")

            g = parse_g_spec(path, self.sensors)

        np.testing.assert_array_equal(g.sensor_values, [1.0, 2.0, 3.0])
        # off-sensor queries take the nearest sensor value
        np.testing.assert_array_equal(g(np.array([[0.9, 0.1], [0.1, -1.8]])), [2.0, 3.0])

    def test_malformed_spec(self):
        for spec in ("sin(x)", "|x|^3", "0.3 +", ""):
            with self.assertRaises(ConfigError):
                parse_g_spec(spec, self.sensors)

    def test_parse_floats(self):
        self.assertEqual(parse_floats("-1.5, -0.5"), [-1.5, -0.5])
        with self.assertRaises(ConfigError):
            parse_floats("1,a")


class TestPointsFiles(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, name, text):
        path = os.path.join(self.tmp.name, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        return path

    def test_empty_file_gives_no_points(self):
        t, x = read_points(self.write("empty.csv", ""), 2)

        self.assertEqual(t.shape, (0,))
        self.assertEqual(x.shape, (0, 2))

    def test_header_only(self):
        t, x = read_points(self.write("header.csv", "t,x0,x1\n"), 2)

        self.assertEqual(x.shape, (0, 2))

    def test_missing_time_column_defaults_to_zero(self):
        t, x = read_points(self.write("pts.csv", "x0,x1\n0.5,-0.5\n1.0,0.25\n"), 2)

        np.testing.assert_array_equal(t, [0.0, 0.0])
        np.testing.assert_array_equal(x, [[0.5, -0.5], [1.0, 0.25]])

    def test_missing_state_column(self):
        with self.assertRaises(ConfigError):
            read_points(self.write("bad.csv", "t,x0\n0.0,1.0\n"), 2)

    def test_non_numeric_values(self):
        with self.assertRaises(ConfigError):
            read_points(self.write("text.csv", "x0,x1\n0.5,left\n"), 2)


class TestWorkspace(unittest.TestCase):

    def test_write_once(self):
        with tempfile.TemporaryDirectory() as tmp:
            workspace = RunWorkspace(tmp, {"problem": "vehicle2d"})
            path = workspace.write_csv("a.csv", pd.DataFrame({"v": [0.1, 1.0 / 3.0]}), warnings=["late"])

            with self.assertRaises(ConfigError):
                workspace.write_csv("a.csv", pd.DataFrame({"v": [0.0]}))

            frame = read_csv(path)
            comments = read_comment_lines(path)
            workspace.write_manifest()
            with self.assertRaises(ConfigError):
                RunWorkspace(tmp, {"problem": "vehicle2d"})

        self.assertEqual(frame["v"].tolist(), [0.1, 1.0 / 3.0])
        self.assertEqual(comments["manifest"], [f"config_sha256={workspace.config_sha256}"])
        self.assertEqual(comments["warning"], ["late"])

    def test_hash_is_stable(self):
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            first = RunWorkspace(a, {"x": 1, "y": [1, 2]})
            second = RunWorkspace(b, {"y": [1, 2], "x": 1})

        self.assertEqual(first.config_sha256, second.config_sha256)


class TestMain(unittest.TestCase):

    def run_main(self, argv):
        err = io.StringIO()
        with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(err):
            code = main(argv)
        return code, err.getvalue()

    def test_catalog(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = os.path.join(tmp, "catalog")

            code, _ = self.run_main(["catalog", "--out", out, "--log-level", "WARNING"])
            listing = read_csv(os.path.join(out, "catalog.csv"))

        self.assertEqual(code, 0)
        self.assertEqual(list(listing["id"]), ["vehicle2d", "lqr5x3", "lqr10x5"])

    def test_unknown_problem_exits_with_config_code(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, err = self.run_main(["train", "--problem", "pendulum", "--out", tmp, "--log-level", "CRITICAL"])

        self.assertEqual(code, 2)
        self.assertIn("UnknownProblem", err)

    def test_inapplicable_oracle(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, err = self.run_main(["oracle", "--problem", "lqr5x3", "--oracle", "hopflax", "--out", tmp,
                                       "--log-level", "CRITICAL"])

        self.assertEqual(code, 4)
        self.assertIn("OracleInapplicable", err)

    def test_grid_spacing_that_does_not_tile_the_box(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, err = self.run_main(["oracle", "--problem", "vehicle2d", "--oracle", "grid", "--grid-h", "0.3",
                                       "--out", tmp, "--log-level", "CRITICAL"])

        self.assertEqual(code, 2)
        self.assertIn("ConfigError", err)
        self.assertIn("grid_h", err)

    def test_hopf_lax_oracle_on_the_probe_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = os.path.join(tmp, "oracle")

            code, _ = self.run_main(["oracle", "--problem", "vehicle2d", "--oracle", "hopflax", "--probe-line",
                                     "--out", out, "--log-level", "WARNING"])
            values = read_csv(os.path.join(out, "oracle.csv"))

        self.assertEqual(code, 0)
        self.assertEqual(len(values), 50)
        self.assertAlmostEqual(values["value"].iloc[0], math.sqrt(2.5) - 1.0, places=12)
        self.assertTrue(np.all(values["x1"] == -0.5))


class TestRunCommands(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.cfg = os.path.join(cls.tmp.name, "tiny.cfg")
        with open(cls.cfg, "w", encoding="utf-8") as fh:
            fh.write("\n".join([
                "scheme.h = 0.1",
                "scheme.M = 1",
                "network.branch_hidden = [8]",
                "network.trunk_hidden = [8]",
                "network.latent_width = 4",
                "network.sensors = 8",
                "training.epochs = 2",
                "training.n_interior = 16",
                "training.n_terminal = 8",
                "training.probe_points = 16",
            ]) + "\n")
        cls.run_dir = os.path.join(cls.tmp.name, "run")
        with contextlib.redirect_stdout(io.StringIO()):
            cls.train_code = main(["train", "--problem", "vehicle2d", "--config", cls.cfg, "--out", cls.run_dir,
                                   "--log-level", "WARNING"])

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def out(self, name):
        return os.path.join(self.tmp.name, name)

    def run_main(self, argv):
        with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
            return main(argv + ["--log-level", "CRITICAL"])

    def test_train_writes_the_ledger(self):
        eps = read_csv(os.path.join(self.run_dir, "eps.csv"))

        self.assertEqual(self.train_code, 0)
        self.assertTrue(os.path.exists(os.path.join(self.run_dir, "manifest.json")))
        self.assertEqual(list(eps["n"]), [0])

    def test_train_refuses_a_finished_directory(self):
        code = self.run_main(["train", "--problem", "vehicle2d", "--config", self.cfg, "--out", self.run_dir])

        self.assertEqual(code, 2)

    def test_infer(self):
        points = self.out("points.csv")
        with open(points, "w", encoding="utf-8") as fh:
            fh.write("t,x0,x1\n0.0,0.5,-0.5\n0.5,1.0,0.0\n")

        code = self.run_main(["infer", self.run_dir, "|x|^2", points, "--out", self.out("infer")])
        values = read_csv(os.path.join(self.out("infer"), "values.csv"))

        self.assertEqual(code, 0)
        self.assertEqual(list(values.columns), ["t", "x0", "x1", "value"])
        self.assertEqual(len(values), 2)
        self.assertTrue(np.all(np.isfinite(values["value"])))

    def test_infer_on_an_empty_points_file(self):
        points = self.out("empty.csv")
        open(points, "w", encoding="utf-8").close()

        code = self.run_main(["infer", self.run_dir, "|x|", points, "--out", self.out("infer-empty")])
        values = read_csv(os.path.join(self.out("infer-empty"), "values.csv"))

        self.assertEqual(code, 0)
        self.assertEqual(len(values), 0)

    def test_synthesize(self):
        out = self.out("synth")

        code = self.run_main(["synthesize", self.run_dir, "--x0=-1.5,-0.5", "--dt", "0.1", "--out", out])
        trajectory = read_csv(os.path.join(out, "trajectory.csv"))

        self.assertEqual(code, 0)
        self.assertEqual(len(trajectory), 11)
        self.assertTrue(os.path.exists(os.path.join(out, "value.csv")))

    def test_synthesize_rejects_a_wrong_dimension(self):
        code = self.run_main(["synthesize", self.run_dir, "--x0=1,2,3", "--out", self.out("synth-bad")])

        self.assertEqual(code, 2)

    def test_compare_against_hopf_lax(self):
        out = self.out("compare")

        code = self.run_main(["compare", self.run_dir, "--oracle", "hopflax", "--probe-line", "--out", out])
        report = read_csv(os.path.join(out, "compare.csv"))

        self.assertEqual(code, 0)
        self.assertEqual(list(report["kind"].iloc[-2:]), ["max", "mean"])
        probes = report[report["kind"] == "probe"]
        self.assertEqual(len(probes), 50)
        np.testing.assert_allclose(probes["abs_error"], np.abs(probes["v_hat"] - probes["v_oracle"]), atol=1e-12)


if __name__ == '__main__':
    unittest.main()
