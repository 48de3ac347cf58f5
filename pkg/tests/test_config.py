import json
import math
import tempfile
import unittest
from pathlib import Path

import numpy.testing as npt

from riemannflow.config import RunConfig, load_config, parse_epsilon, parse_grid
from riemannflow.errors import ConfigError


class Test_Epsilon(unittest.TestCase):
    def test_tokens(self):
        npt.assert_allclose(parse_epsilon("1/pi"), 1 / math.pi)
        npt.assert_allclose(parse_epsilon(" 1+SQRT2 "), 1 + math.sqrt(2))

    def test_decimals(self):
        self.assertEqual(parse_epsilon("0.3183098862"), 0.3183098862)
        self.assertEqual(parse_epsilon(2), 2.0)

    def test_rejected(self):
        for value in ("pi", "1/e", "nan", "inf", True):
            with self.assertRaises(ConfigError):
                parse_epsilon(value)


class Test_Grid(unittest.TestCase):
    def test_range(self):
        npt.assert_allclose(parse_grid("0.5:1.5:5"), [0.5, 0.75, 1.0, 1.25, 1.5])
        self.assertEqual(parse_grid("3:12:1"), (3.0,))

    def test_list(self):
        npt.assert_allclose(parse_grid("0.5, 1/pi,2"), [0.5, 1 / math.pi, 2.0])
        npt.assert_allclose(parse_grid(["1+sqrt2", 3]), [1 + math.sqrt(2), 3.0])

    def test_rejected(self):
        for text in ("1:2", "1:2:x", "1:2:0"):
            with self.assertRaises(ConfigError):
                parse_grid(text)


class Test_RunConfig(unittest.TestCase):
    def test_defaults(self):
        config = RunConfig()
        npt.assert_allclose(config.initial_point().x, -1j, atol=1e-15)
        self.assertEqual(config.integrator_config().max_time, 100.0)

    def test_overrides(self):
        config = RunConfig.from_mapping({"epsilon": "1/pi", "y0": 0.68, "max_time": 60, "closure_tol": 1e-7})
        npt.assert_allclose(config.epsilon, 1 / math.pi)
        integrator = config.integrator_config()
        self.assertEqual(integrator.max_time, 60)
        self.assertEqual(integrator.closure_tol, 1e-7)
        self.assertEqual(integrator.rel_tol, 1e-10)

    def test_cartesian_launch(self):
        point = RunConfig(re=0.5, im=-0.5).initial_point()
        npt.assert_allclose(point.x, 0.5 - 0.5j, atol=1e-15)
        self.assertEqual(point.sheet, 0)

    def test_validation(self):
        bad = ({"re": 1.0}, {"y0": 1.0, "re": 1.0, "im": 0.0}, {"y0": -1.0}, {"side": "up"},
               {"n": -1}, {"tol": 0.0}, {"rel_tol": -1.0}, {"colour": "red"})
        for values in bad:
            with self.assertRaises(ConfigError):
                RunConfig.from_mapping(values)

    def test_merged(self):
        base = RunConfig.from_mapping({"epsilon": 2.0, "y0": 1.0})
        merged = base.merged({"epsilon": "1+sqrt2", "y0": None, "eps_grid": "3:4:2"})
        npt.assert_allclose(merged.epsilon, 1 + math.sqrt(2))
        self.assertEqual(merged.y0, 1.0)
        self.assertEqual(merged.eps_grid, (3.0, 4.0))


class Test_ConfigFile(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_load(self):
        path = self.dir / "run.json"
        path.write_text(json.dumps({"epsilon": "1/pi", "y0": 0.68}), encoding="utf-8")
        self.assertEqual(load_config(path), {"epsilon": "1/pi", "y0": 0.68})

    def test_unknown_key(self):
        path = self.dir / "run.json"
        path.write_text(json.dumps({"epsilon": 1.0, "speed": 3}), encoding="utf-8")
        with self.assertRaises(ConfigError):
            load_config(path)

    def test_not_json(self):
        path = self.dir / "run.json"
        path.write_text("epsilon = 1", encoding="utf-8")
        with self.assertRaises(ConfigError):
            load_config(path)
        with self.assertRaises(ConfigError):
            load_config(self.dir / "missing.json")


if __name__ == "__main__":
    unittest.main()
