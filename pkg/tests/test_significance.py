"""
Unit Tests for Significance Testing
Mann-Whitney U statistics, exact and approximate p-values and verdicts
"""

import itertools
import unittest
import sys
from pathlib import Path

import numpy as np
from scipy import stats

sys.path.insert(0, str(Path(__file__).parent.parent))

from core.exceptions import ContractViolation
from systems.significance_tests import Alternative, Verdict, mann_whitney_u


def enumerated_p(a, b, alternative="two-sided"):
    """p-value by enumerating every relabelling of the pooled sample"""
    pooled = np.concatenate([a, b])
    ranks = stats.rankdata(pooled)
    n_a, n_b = len(a), len(b)
    mean = n_a * n_b / 2.0
    offset = n_a * (n_a + 1) / 2.0
    observed = ranks[:n_a].sum() - offset
    hits, total = 0, 0
    for chosen in itertools.combinations(range(n_a + n_b), n_a):
        u = ranks[list(chosen)].sum() - offset
        total += 1
        if alternative == "two-sided":
            hits += abs(u - mean) >= abs(observed - mean) - 1e-9
        elif alternative == "greater":
            hits += u >= observed - 1e-9
        else:
            hits += u <= observed + 1e-9
    return hits / total


class TestStatistic(unittest.TestCase):
    """Test U values and verdicts"""

    def test_separated_samples(self):
        """Test a = (1, 2, 3), b = (4, 5, 6): U = 0 and p = 0.1"""
        result = mann_whitney_u([1, 2, 3], [4, 5, 6])
        self.assertEqual(result.u, 0.0)
        self.assertEqual(result.u_b, 9.0)
        self.assertAlmostEqual(result.p_value, 0.1, places=12)
        self.assertTrue(result.exact)
        self.assertEqual(result.verdict, Verdict.TIE)
        self.assertEqual(mann_whitney_u([1, 2, 3], [4, 5, 6], alpha=0.2).verdict, Verdict.B_WINS)

    def test_u_values_sum(self):
        """Test U_a + U_b = n_a * n_b with ties"""
        result = mann_whitney_u([1, 2, 2, 5], [2, 3, 3])
        self.assertEqual(result.u + result.u_b, 12.0)
        # a: 1 beats nothing, each 2 ties one 2 (0.5), 5 beats all three
        self.assertEqual(result.u, 0.0 + 0.5 + 0.5 + 3.0)

    def test_swap_identity(self):
        """Test swapping samples swaps U and mirrors the verdict"""
        rng = np.random.default_rng(0)
        a, b = rng.normal(1.0, 1.0, 12), rng.normal(0.0, 1.0, 15)
        forward, backward = mann_whitney_u(a, b), mann_whitney_u(b, a)
        self.assertEqual(forward.u, backward.u_b)
        self.assertAlmostEqual(forward.p_value, backward.p_value, places=12)
        mirror = {Verdict.A_WINS: Verdict.B_WINS, Verdict.B_WINS: Verdict.A_WINS,
                  Verdict.TIE: Verdict.TIE}
        self.assertEqual(mirror[forward.verdict], backward.verdict)

    def test_identical_samples_tie(self):
        """Test equal U values always tie"""
        result = mann_whitney_u([0.5] * 10, [0.5] * 10)
        self.assertEqual(result.u, result.u_b)
        self.assertEqual(result.verdict, Verdict.TIE)
        self.assertEqual(result.p_value, 1.0)

    def test_clear_winner(self):
        """Test a sample that is clearly larger wins"""
        result = mann_whitney_u(np.arange(10, 20), np.arange(0, 10))
        self.assertFalse(result.exact)
        self.assertEqual(result.verdict, Verdict.A_WINS)
        self.assertLess(result.p_value, 0.001)

    def test_input_validation(self):
        """Test empty samples, non-finite values and bad alpha"""
        with self.assertRaises(ContractViolation):
            mann_whitney_u([], [1.0])
        with self.assertRaises(ContractViolation):
            mann_whitney_u([np.nan], [1.0])
        with self.assertRaises(ContractViolation):
            mann_whitney_u([1.0], [2.0], alpha=1.0)
        with self.assertRaises(ValueError):
            mann_whitney_u([1.0], [2.0], alternative="sideways")


class TestExactDistribution(unittest.TestCase):
    """Test exact p-values against full enumeration"""

    def test_matches_enumeration(self):
        """Test random samples with ties, total size up to 10"""
        rng = np.random.default_rng(42)
        for n_a, n_b in [(1, 4), (2, 3), (3, 4), (4, 4), (2, 8), (5, 5), (6, 3)]:
            for _ in range(4):
                a = np.round(rng.normal(size=n_a), 0)
                b = np.round(rng.normal(0.5, 1.0, size=n_b), 0)
                for alternative in ("two-sided", "greater", "less"):
                    result = mann_whitney_u(a, b, alternative=alternative)
                    self.assertTrue(result.exact)
                    self.assertAlmostEqual(result.p_value, enumerated_p(a, b, alternative),
                                           places=10, msg=f"{a} {b} {alternative}")

    def test_one_sided_direction(self):
        """Test greater is small when a tends larger"""
        a, b = [5.0, 6.0, 7.0, 8.0], [1.0, 2.0, 3.0]
        self.assertAlmostEqual(mann_whitney_u(a, b, alternative="greater").p_value, 1 / 35)
        self.assertAlmostEqual(mann_whitney_u(a, b, alternative="less").p_value, 1.0, places=12)
        self.assertEqual(mann_whitney_u(a, b, alternative="less").alternative, Alternative.LESS)


class TestNormalApproximation(unittest.TestCase):
    """Test the large-sample branch against scipy's asymptotic test"""

    def test_matches_scipy(self):
        """Test tie-corrected, continuity-corrected p-values"""
        rng = np.random.default_rng(7)
        for alternative in ("two-sided", "greater", "less"):
            a = np.round(rng.normal(0.3, 1.0, 25), 1)
            b = np.round(rng.normal(0.0, 1.0, 30), 1)
            ours = mann_whitney_u(a, b, alternative=alternative)
            reference = stats.mannwhitneyu(a, b, alternative=alternative, use_continuity=True,
                                           method="asymptotic")
            self.assertFalse(ours.exact)
            self.assertAlmostEqual(ours.u, float(reference.statistic), places=9)
            self.assertAlmostEqual(ours.p_value, reference.pvalue, places=10)


def run_tests():
    """Run all tests and return results"""
    suite = unittest.TestSuite()
    for test_class in [TestStatistic, TestExactDistribution, TestNormalApproximation]:
        suite.addTests(unittest.TestLoader().loadTestsFromTestCase(test_class))
    return unittest.TextTestRunner(verbosity=2).run(suite)


if __name__ == "__main__":
    result = run_tests()
    sys.exit(0 if result.wasSuccessful() else 1)
