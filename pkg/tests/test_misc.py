import contextlib
import io
import unittest

import numpy.testing as npt

from riemannflow.integrator import integrate, launch_on_axis
from riemannflow.misc import bisect_predicate, get_info


class Test_BisectPredicate(unittest.TestCase):
    def test_transition(self):
        npt.assert_allclose(bisect_predicate(lambda x: x > 0.3, 0.0, 1.0, xtol=1e-10), 0.3, atol=1e-9)
        npt.assert_allclose(bisect_predicate(lambda x: x < 0.3, 1.0, 0.0, xtol=1e-10), 0.3, atol=1e-9)

    def test_stops_at_width(self):
        calls = []

        def pred(x):
            calls.append(x)
            return x > 0.5

        bisect_predicate(pred, 0.0, 1.0, xtol=0.1)
        # one call for lo, then four halvings down to width 1/16
        self.assertEqual(len(calls), 5)


class Test_Info(unittest.TestCase):
    def test_banner(self):
        traj = integrate(launch_on_axis(1.0, 0.0), 0.0)
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            get_info(traj)
        text = out.getvalue()
        self.assertTrue(text.startswith("*" * 29))
        self.assertIn("* epsilon 0", text)
        self.assertIn("closure at t=", text)


if __name__ == "__main__":
    unittest.main()
