import math
import unittest

import numpy as np
import numpy.testing as npt
from scipy import special

from riemannflow.errors import DomainError
from riemannflow.special import gamma


class Test_Gamma(unittest.TestCase):
    def test_factorials(self):
        for n in range(1, 15):
            npt.assert_allclose(gamma(float(n)), math.factorial(n - 1), rtol=1e-13)

    def test_half(self):
        npt.assert_allclose(gamma(0.5), math.sqrt(math.pi), rtol=1e-14)

    def test_against_scipy(self):
        xs = np.concatenate([np.linspace(0.05, 10.0, 200), np.linspace(-3.95, -0.05, 40)])
        for x in xs:
            npt.assert_allclose(gamma(float(x)), special.gamma(x), rtol=1e-12)

    def test_period_arguments(self):
        # Arguments reached by the closed-form period for eps in [0, 20]
        for eps in np.linspace(0.0, 20.0, 41):
            for x in ((3 + eps) / (2 + eps), (4 + eps) / (4 + 2 * eps)):
                npt.assert_allclose(gamma(float(x)), special.gamma(x), rtol=1e-13)

    def test_poles(self):
        for x in (0.0, -1.0, -7.0):
            with self.assertRaises(DomainError):
                gamma(x)
        with self.assertRaises(DomainError):
            gamma(float("nan"))


if __name__ == "__main__":
    unittest.main()
