import math
import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

import numpy.testing as npt

from riemannflow.errors import ConfigError, DomainError
from riemannflow.io import sweep_to_dict, write_json
from riemannflow.sweep import (CriticalCurveSample, GapEntry, GapTable, find_s0_minimum, gap_table, sweep_s0,
                               sweep_x0, worker_count)

SLOW = os.environ.get("RIEMANN_FLOW_SLOW") == "1"
EPS_PI = 1 / math.pi
EPS_GAP = 1 + math.sqrt(2)

# Terminating crossings s_n = -iy at eps = 1 + sqrt(2)
TABLE = {0: 1.05872, 4: 0.191947, 1: 0.0958837, 7: 0.0469295, 5: 0.0312037, 3: 0.0167618, 6: 0.00378715}


class Test_Workers(unittest.TestCase):
    def test_env_cap(self):
        with mock.patch.dict(os.environ, {"RIEMANN_FLOW_THREADS": "2"}):
            self.assertEqual(worker_count(8), 2)
            self.assertEqual(worker_count(1), 1)

    def test_no_cap(self):
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(worker_count(3), 3)
            self.assertGreaterEqual(worker_count(), 1)

    def test_bad_env(self):
        with mock.patch.dict(os.environ, {"RIEMANN_FLOW_THREADS": "many"}):
            with self.assertRaises(ConfigError):
                worker_count()
        with mock.patch.dict(os.environ, {"RIEMANN_FLOW_THREADS": "0"}):
            with self.assertRaises(ConfigError):
                worker_count()


class Test_GapTable(unittest.TestCase):
    def table(self, edge):
        entries = [GapEntry(n, TABLE.get(n), None if n in TABLE else "spiral") for n in range(9)]
        return GapTable(EPS_GAP, entries, edge)

    def test_order_bottom_to_top(self):
        table = self.table(0.22)
        self.assertEqual(table.in_gap_order(), [4, 1, 7, 5, 3, 6])
        self.assertEqual(table.failures(), [2, 8])

    def test_order_without_edge(self):
        self.assertEqual(self.table(None).in_gap_order(), [4, 1, 7, 5, 3, 6])

    def test_sample_validation(self):
        with self.assertRaises(ValueError):
            CriticalCurveSample(1.0, -2.0, "x0", 1e-6)


class Test_Sweeps(unittest.TestCase):
    def test_x0_domain(self):
        with self.assertRaises(DomainError):
            sweep_x0([0.5, 2.5])

    def test_s0_domain(self):
        with self.assertRaises(DomainError):
            sweep_s0([0.0])

    def test_minimum_domain(self):
        with self.assertRaises(DomainError):
            find_s0_minimum(5.0, 3.0)

    def test_gap_domain(self):
        with self.assertRaises(DomainError):
            gap_table(1.5, 8)

    def test_s0_sweep_serial(self):
        result = sweep_s0([2.0, EPS_PI, 2.0], workers=1)
        self.assertEqual([s.epsilon for s in result.samples], [EPS_PI, 2.0])
        npt.assert_allclose([s.value_y for s in result.samples], [0.325235, 1.0], atol=1e-4)
        self.assertEqual(result.failures, [])
        self.assertTrue(all(s.kind == "s0" for s in result.samples))

    def test_s0_sweep_parallel_matches_serial(self):
        serial = sweep_s0([EPS_PI, 2.0], workers=1)
        parallel = sweep_s0([EPS_PI, 2.0], workers=2)
        self.assertEqual(parallel.samples, serial.samples)
        with tempfile.TemporaryDirectory() as tmp:
            first, second = Path(tmp) / "a.json", Path(tmp) / "b.json"
            write_json(sweep_to_dict(serial), first)
            write_json(sweep_to_dict(sweep_s0([2.0, EPS_PI], workers=2)), second)
            self.assertEqual(first.read_bytes(), second.read_bytes())


@unittest.skipUnless(SLOW, "set RIEMANN_FLOW_SLOW=1 for the long sweeps")
class Test_Acceptance(unittest.TestCase):
    def test_x0_curve_decreases_towards_one(self):
        result = sweep_x0([0.5, 1.0], tol=1e-4)
        values = dict(result.values())
        npt.assert_allclose(values[1.0], 2.0, atol=1e-3)
        self.assertLess(values[0.5], values[1.0])

    def test_x0_grows_near_two(self):
        result = sweep_x0([1.9])
        self.assertEqual(result.failures, [])
        self.assertGreater(result.samples[0].value_y, 10.0)

    def test_s0_returns_to_one_from_above(self):
        result = sweep_s0([30.0], workers=1)
        self.assertEqual(result.failures, [])
        y = result.samples[0].value_y
        self.assertGreater(y, 1.0)
        self.assertLess(y, 1.21188)

    def test_s0_minimum(self):
        eps_star, y_star = find_s0_minimum(3.0, 12.0)
        npt.assert_allclose(eps_star, 7.62547, atol=0.05)
        npt.assert_allclose(y_star, 1.21188, atol=1e-3)

    def test_table(self):
        table = gap_table(EPS_GAP, 8)
        for entry in table.entries:
            if entry.n in TABLE:
                expected = TABLE[entry.n]
                npt.assert_allclose(entry.y, expected, atol=max(1e-3, 0.01 * expected))
        self.assertEqual(table.failures(), [2, 8])
        self.assertEqual(table.in_gap_order(), [4, 1, 7, 5, 3, 6])
        self.assertIsNotNone(table.edge)
        self.assertTrue(0.2 < table.edge < 0.25)
        for entry in table.entries:
            if entry.n in (2, 8):
                self.assertIn(entry.verdict, ("spiraling", "escaping"))


if __name__ == "__main__":
    unittest.main()
