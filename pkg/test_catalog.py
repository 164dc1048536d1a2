import unittest

import numpy as np

from hjb import catalog
from hjb.errors import UnknownProblem
from hjb.models import TerminalFamilyConfig, validate_run_config
from hjb.problem import sobol_points


class TestBuiltInProblems(unittest.TestCase):

    def test_lqr5x3_data(self):
        lqr = catalog.build_lqr("lqr5x3")
        A, B = lqr.metadata["A"], lqr.metadata["B"]

        self.assertEqual((lqr.d, lqr.m), (5, 3))
        self.assertEqual(A[0][3], 0.15)
        # entry sums guard against transcription slips in the literal tables
        self.assertAlmostEqual(A.sum(), 2.79, places=12)
        self.assertAlmostEqual(B.sum(), 0.73, places=12)
        self.assertAlmostEqual(np.sum(A * A), 0.3751, places=12)

    def test_lqr10x5_data(self):
        lqr = catalog.build_lqr("lqr10x5")
        A, B = lqr.metadata["A"], lqr.metadata["B"]

        self.assertEqual((lqr.d, lqr.m), (10, 5))
        self.assertEqual(B[7][0], 0.10)
        self.assertAlmostEqual(A.sum(), 9.54, places=12)
        self.assertAlmostEqual(B.sum(), 2.40, places=12)
        self.assertAlmostEqual(np.sum(B * B), 0.1554, places=12)

    def test_lqr_dynamics_and_cost(self):
        lqr = catalog.build_lqr("lqr5x3")
        x = np.array([0.1, -0.2, 0.3, 0.0, 0.5])
        u = np.array([0.2, -0.1, 0.4])

        f = lqr.dynamics(0.0, x, u)
        L = lqr.running_cost(0.0, x, u)

        np.testing.assert_allclose(f, lqr.metadata["A"] @ x + lqr.metadata["B"] @ u, atol=1e-15)
        self.assertAlmostEqual(float(L), np.sum(x * x) + np.sum(u * u), places=15)
        np.testing.assert_array_equal(lqr.control_set.bounds()[0], np.full(3, -1.0 / 3.0))

    def test_lqr_speed_bound_dominates_samples(self):
        lqr = catalog.build_lqr("lqr5x3")
        rng = np.random.default_rng(0)
        x = lqr.sample_states(rng, 2000)
        u = lqr.control_set.sample(rng, 2000)

        speeds = np.linalg.norm(lqr.dynamics(0.0, x, u), axis=-1)

        self.assertLessEqual(speeds.max(), lqr.f_sup_norm)

    def test_vehicle(self):
        vehicle = catalog.build_vehicle()

        np.testing.assert_allclose(vehicle.dynamics(0.0, np.zeros(2), np.zeros(1)), [1.0, 0.0])
        self.assertEqual(float(vehicle.running_cost(0.0, np.zeros(2), np.zeros(1))), 0.0)
        self.assertEqual(vehicle.f_sup_norm, 1.0)
        self.assertTrue(vehicle.control_set.periodic)

    def test_with_horizon_keeps_the_problem(self):
        vehicle = catalog.build_vehicle().with_horizon(0.4)

        self.assertEqual(vehicle.T, 0.4)
        self.assertEqual(vehicle.f_sup_norm, 1.0)


class TestCatalogDefaults(unittest.TestCase):

    def test_paper_defaults(self):
        scheme = catalog.paper_defaults("vehicle2d")

        self.assertEqual((scheme.h, scheme.M, scheme.N, scheme.T), (0.005, 5, 1.0, 1.0))
        self.assertEqual(catalog.paper_defaults("lqr10x5").M, 3)
        self.assertEqual(catalog.desk_defaults("lqr5x3").h, 0.05)

    def test_name_resolution(self):
        self.assertEqual(catalog.resolve_problem_id("vehicle"), "vehicle2d")
        self.assertEqual(catalog.resolve_problem_id("  LQR10 "), "lqr10x5")
        self.assertEqual(catalog.resolve_problem_id("vehicle2"), "vehicle2d")

    def test_unknown_problem(self):
        with self.assertRaises(UnknownProblem) as ctx:
            catalog.resolve_problem_id("pendulum")

        self.assertEqual(ctx.exception.exit_code, 2)

    def test_entry_and_listing(self):
        entry = catalog.catalog_entry("lqr5x3")
        listing = catalog.catalog_listing()

        self.assertEqual(entry.inference_targets, [(0.0, 0.57), (0.0, 0.45)])
        self.assertEqual(list(listing["id"]), catalog.PROBLEM_IDS)
        self.assertEqual(list(listing["control_set"]), ["angle", "box", "box"])

    def test_run_config_defaults_validate(self):
        for problem_id in catalog.PROBLEM_IDS:
            for desk in (False, True):
                cfg = validate_run_config(catalog.run_config_defaults(problem_id, desk_scale=desk))
                self.assertEqual(cfg.problem, problem_id)
                self.assertEqual(cfg.network.branch_hidden, [64, 64])

    def test_terminal_families(self):
        lqr = catalog.build_lqr("lqr5x3")
        sensors = sobol_points(lqr.box_lo, lqr.box_hi, 16)

        benchmark = catalog.terminal_family(lqr, sensors, TerminalFamilyConfig())
        random = catalog.terminal_family(lqr, sensors, TerminalFamilyConfig(kind="random_quadratic", count=4))

        np.testing.assert_allclose([g.params["b"] for g in benchmark], [0.1, 0.2, 0.3])
        self.assertEqual(len(random), 4)
        for g in random:
            self.assertTrue(0.0 <= g.params["a"] <= 0.6 and 0.1 <= g.params["b"] <= 0.7)
            np.testing.assert_array_equal(g.sensor_points, sensors)


if __name__ == '__main__':
    unittest.main()
