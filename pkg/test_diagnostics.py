import unittest

import numpy as np

from hjb.catalog import build_vehicle
from hjb.errors import ConfigError, EmptySequence
from hjb.problem import TerminalCondition
from policy_iteration import (
    AnalyticValueHandle, InitialPolicy, IterationLedger, PolicyIterate, epsilon_bound, epsilon_report,
    monotonicity_check, residual_trend_check,
)


def constant_ledger(levels, eps1, eps2):
    vehicle = build_vehicle()
    ledger = IterationLedger(vehicle, [TerminalCondition.norm(np.zeros((1, 2)))], InitialPolicy(vehicle))
    for n, (c, e1, e2) in enumerate(zip(levels, eps1, eps2)):
        handle = AnalyticValueHandle(lambda t, x, c=c: np.full(np.shape(x)[:-1], c))
        ledger.append(PolicyIterate(n, handle, e1, e2))
    return ledger


class TestEpsilonBound(unittest.TestCase):

    def test_all_zero(self):
        self.assertEqual(epsilon_bound([0.0] * 4, [0.0] * 4, 0.2, 1.0), 0.0)

    def test_geometric_sequence(self):
        eps1 = [2.0 ** -n for n in range(11)]

        bound = epsilon_bound(eps1, [0.0] * 11, 0.0, 1.0)

        # 1 + 2 * sum_{m=2}^{9} 2^-m + 2^-10
        self.assertAlmostEqual(bound, 1.9970703125, places=12)

    def test_geometric_sequence_with_m1(self):
        eps1 = [2.0 ** -n for n in range(11)]

        bound = epsilon_bound(eps1, [0.0] * 11, 0.0, 1.0, include_m1=True)

        self.assertAlmostEqual(bound, 2.9970703125, places=12)

    def test_single_iterate(self):
        self.assertAlmostEqual(epsilon_bound([0.3], [0.2], 0.25, 1.0), 0.75 * 0.3 + 0.2, places=15)

    def test_two_iterates_have_no_inner_sum(self):
        self.assertAlmostEqual(epsilon_bound([1.0, 2.0], [0.5, 0.5], 0.0, 2.0), 2.0 * 3.0 + 1.0, places=15)

    def test_monotone_and_affine(self):
        rng = np.random.default_rng(0)
        e1 = rng.uniform(0.0, 1.0, size=6)
        e2 = rng.uniform(0.0, 1.0, size=6)
        base = epsilon_bound(e1, e2, 0.0, 1.0)

        for i in range(6):
            bumped = e1.copy()
            bumped[i] += 0.1
            self.assertGreaterEqual(epsilon_bound(bumped, e2, 0.0, 1.0), base)

        mid = epsilon_bound(e1, e2, 0.5, 1.0)
        end = epsilon_bound(e1, e2, 1.0, 1.0)
        self.assertAlmostEqual(mid, 0.5 * (base + end), places=12)

    def test_invalid_input(self):
        with self.assertRaises(EmptySequence):
            epsilon_bound([], [], 0.0, 1.0)
        with self.assertRaises(ConfigError):
            epsilon_bound([0.1, 0.2], [0.1], 0.0, 1.0)
        with self.assertRaises(ConfigError):
            epsilon_bound([0.1], [-0.1], 0.0, 1.0)
        with self.assertRaises(ConfigError):
            epsilon_bound([0.1], [0.1], 1.5, 1.0)


class TestLedgerDiagnostics(unittest.TestCase):

    def setUp(self):
        self.probes = np.random.default_rng(1).uniform(-1.0, 1.0, size=(50, 2))

    def test_epsilon_report(self):
        ledger = constant_ledger([3.0, 2.0, 1.0], [0.4, 0.2, 0.1], [0.05, 0.02, 0.01])

        report = epsilon_report(ledger)

        self.assertEqual(list(report.columns), ["n", "eps1_hat", "eps2_hat", "epsilon_t0"])
        self.assertEqual(list(report["n"]), [0, 1, 2])
        self.assertAlmostEqual(report["epsilon_t0"].iloc[0], 0.4 + 0.05, places=15)
        self.assertAlmostEqual(report["epsilon_t0"].iloc[2], (0.4 + 0.1) + (0.05 + 0.01), places=12)

    def test_decreasing_iterates_pass(self):
        ledger = constant_ledger([3.0, 2.0, 1.0], [0.0] * 3, [0.0] * 3)

        report = monotonicity_check(ledger, self.probes)

        self.assertEqual(list(report["violation_fraction"]), [0.0, 0.0])
        self.assertEqual(list(report["max_increase"]), [-1.0, -1.0])
        self.assertEqual(list(report["probes"]), [50, 50])

    def test_increase_within_slack_passes(self):
        # tau = 2 (0.1 + 0.1) + 2 T (0 + 0) = 0.4
        ledger = constant_ledger([1.0, 1.3], [0.0, 0.0], [0.1, 0.1])

        report = monotonicity_check(ledger, self.probes)

        self.assertAlmostEqual(report["slack"].iloc[0], 0.4, places=15)
        self.assertEqual(report["violation_fraction"].iloc[0], 0.0)

    def test_increase_beyond_slack_is_reported(self):
        ledger = constant_ledger([1.0, 2.0], [0.0, 0.0], [0.1, 0.1])

        with self.assertLogs("policy_iteration.diagnostics", level="WARNING"):
            report = monotonicity_check(ledger, self.probes)

        self.assertEqual(report["violation_fraction"].iloc[0], 1.0)

    def test_residual_trend(self):
        falling = constant_ledger([3.0, 2.0, 1.0, 0.5], [0.4, 0.3, 0.2, 0.1], [0.1, 0.1, 0.1, 0.1])
        rising = constant_ledger([3.0, 2.0, 1.0, 0.5], [0.1, 0.2, 0.3, 0.4], [0.1, 0.1, 0.1, 0.1])

        self.assertTrue(residual_trend_check(falling))
        self.assertTrue(residual_trend_check(constant_ledger([1.0], [0.3], [0.1])))
        with self.assertWarns(RuntimeWarning):
            self.assertFalse(residual_trend_check(rising))


if __name__ == '__main__':
    unittest.main()
