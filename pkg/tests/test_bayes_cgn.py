"""
Unit Tests for the Bayesian CGN
Suggested prior, conjugate posterior updates and the averaged predictive density
"""

import math
import unittest
import sys
from pathlib import Path

import numpy as np
from scipy import stats

sys.path.insert(0, str(Path(__file__).parent.parent))

from core.exceptions import ContractViolation, DegeneratePriorError
from data.cgn_structure import CgnStructure
from data.dataset import Dataset, VariableKind, VariableMeta
from data.parameters import DirichletParams, NigParams
from systems.bayes_cgn import (
    DhdnigParams, DirichletTable, NigTable, PriorConfig, fit_ba, init_prior, posterior,
    predictive_logdensities, predictive_logdensity, table_cells,
)
from systems.cgn_core import fit_ml, joint_logdensities
from systems.distributions import sample_nig
from tests.fixtures import class_meta, continuous_meta, mixed_data, mixed_structure


def single_continuous(params: NigParams) -> DhdnigParams:
    structure = CgnStructure((continuous_meta(0),), {0: ()})
    return DhdnigParams(structure, {}, {0: NigTable(0, (), (), (), params)})


class TestPriorConfig(unittest.TestCase):
    """Test prior settings validation"""

    def test_defaults(self):
        """Test default pseudocount and rho base"""
        cfg = PriorConfig()
        self.assertEqual(cfg.dirichlet_pseudocount, 0.01)
        self.assertEqual(cfg.rho_base, 1.1)

    def test_rejects_nonpositive(self):
        """Test nonpositive settings are contract violations"""
        with self.assertRaises(ContractViolation):
            PriorConfig(dirichlet_pseudocount=0.0)
        with self.assertRaises(ContractViolation):
            PriorConfig(rho_base=-1.0)


class TestSuggestedPrior(unittest.TestCase):
    """Test construction of the suggested DHDNIG prior"""

    def setUp(self):
        """Build the prior of the mixed structure"""
        self.structure = mixed_structure()
        self.data = mixed_data(90, seed=2)
        self.prior = init_prior(self.structure, self.data)

    def test_dirichlet_pseudocounts(self):
        """Test every discrete hyperparameter equals the pseudocount"""
        np.testing.assert_allclose(self.prior.discrete[1].lookup((1,)).psi, [0.01] * 3)
        np.testing.assert_allclose(self.prior.discrete[0].lookup(()).psi, [0.01, 0.01])

    def test_parentless_node(self):
        """Test mu is the pooled mean, V = 1 and phi half the variance"""
        column = self.data.values[:, 4]
        nig = self.prior.continuous[4].lookup(())
        np.testing.assert_allclose(nig.mu, [column.mean()])
        np.testing.assert_allclose(nig.V, [[1.0]])
        self.assertAlmostEqual(nig.rho, 1.1)
        self.assertAlmostEqual(nig.phi, column.var() / 2.0)

    def test_continuous_parent_cell_means(self):
        """Test V uses the parent mean of the discrete-parent cell"""
        y2 = self.data.values[:, 2]
        y3 = self.data.values[:, 3]
        var2 = y2.var()
        for c in range(2):
            m = y2[self.data.labels == c].mean()
            nig = self.prior.continuous[3].lookup((c,))
            expected_V = [[1.0 + m * m / var2, -m / var2], [-m / var2, 1.0 / var2]]
            np.testing.assert_allclose(nig.V, expected_V, rtol=1e-12)
            np.testing.assert_allclose(nig.mu, [y3.mean(), 0.0])
            self.assertAlmostEqual(nig.rho, 1.1 + 0.5)
            self.assertAlmostEqual(nig.phi, y3.var() / 2.0)

    def test_unseen_cell_uses_pooled_default(self):
        """Test cells absent from the data fall back to pooled parent means"""
        class_zero = self.data.take(np.flatnonzero(self.data.labels == 0))
        prior = init_prior(self.structure, class_zero)
        self.assertNotIn((1,), prior.continuous[3].cells)
        default = prior.continuous[3].lookup((1,))
        m = class_zero.values[:, 2].mean()
        var2 = class_zero.values[:, 2].var()
        self.assertAlmostEqual(default.V[0, 0], 1.0 + m * m / var2)

    def test_constant_column_is_degenerate(self):
        """Test a zero-variance variable makes the prior undefined"""
        values = np.array(self.data.values)
        values[:, 4] = 3.0
        data = Dataset(self.data.meta, values, class_index=0)
        with self.assertRaises(DegeneratePriorError) as context:
            init_prior(self.structure, data)
        self.assertEqual(context.exception.variable, "x4")

    def test_custom_settings(self):
        """Test pseudocount and rho base are honoured"""
        prior = init_prior(self.structure, self.data, PriorConfig(0.5, 2.0))
        np.testing.assert_allclose(prior.discrete[1].default.psi, [0.5] * 3)
        self.assertAlmostEqual(prior.continuous[3].lookup((0,)).rho, 2.5)

    def test_mismatched_dataset(self):
        """Test the dataset must carry the structure's variables"""
        meta = (class_meta(), VariableMeta("d", VariableKind.CONTINUOUS, 1),
                continuous_meta(2), continuous_meta(3), continuous_meta(4))
        data = Dataset(meta, self.data.values, class_index=0)
        with self.assertRaises(ContractViolation):
            init_prior(self.structure, data)


class TestPosterior(unittest.TestCase):
    """Test the conjugate update of whole hyperparameter sets"""

    def setUp(self):
        """Build a prior and a sample"""
        self.structure = mixed_structure()
        self.data = mixed_data(90, seed=3)
        self.prior = init_prior(self.structure, self.data)

    def test_empty_update_returns_prior(self):
        """Test observing no rows leaves the hyperparameters unchanged"""
        self.assertIs(posterior(self.prior, self.data.take([])), self.prior)

    def test_counts_added(self):
        """Test Dirichlet hyperparameters grow by the cell counts"""
        post = posterior(self.prior, self.data)
        labels = self.data.labels
        d = self.data.values[:, 1].astype(int)
        for c in range(2):
            counts = np.bincount(d[labels == c], minlength=3)
            np.testing.assert_allclose(post.discrete[1].lookup((c,)).psi, counts + 0.01)

    def test_rho_bookkeeping(self):
        """Test rho grows by half the rows of each cell"""
        post = posterior(self.prior, self.data)
        total = sum(post.continuous[2].lookup(cell).rho - self.prior.continuous[2].lookup(cell).rho
                    for cell in post.continuous[2].cells)
        self.assertAlmostEqual(total, self.data.n / 2.0)

    def test_sequential_equals_batch(self):
        """Test updating on two halves equals updating on the union"""
        first, second = self.data.take(np.arange(40)), self.data.take(np.arange(40, 90))
        batch = posterior(self.prior, self.data)
        sequential = posterior(posterior(self.prior, first), second)
        self.assertEqual(table_cells(batch), table_cells(sequential))
        for kind, node, cell in table_cells(batch):
            if kind == "dirichlet":
                np.testing.assert_allclose(sequential.discrete[node].lookup(cell).psi,
                                           batch.discrete[node].lookup(cell).psi)
            else:
                a, b = sequential.continuous[node].lookup(cell), batch.continuous[node].lookup(cell)
                np.testing.assert_allclose(a.mu, b.mu, rtol=1e-8, atol=1e-10)
                np.testing.assert_allclose(a.V, b.V, rtol=1e-8, atol=1e-12)
                self.assertAlmostEqual(a.phi, b.phi, delta=1e-8 * abs(b.phi))
                self.assertAlmostEqual(a.rho, b.rho, places=12)

    def test_fit_ba_is_prior_then_update(self):
        """Test fit_ba equals init_prior followed by posterior"""
        direct = fit_ba(self.structure, self.data)
        composed = posterior(self.prior, self.data)
        np.testing.assert_allclose(predictive_logdensities(direct, self.data.values),
                                   predictive_logdensities(composed, self.data.values))


class TestPredictive(unittest.TestCase):
    """Test the Bayesian-averaged predictive density"""

    def test_single_continuous_worked_example(self):
        """Test NIG(0, 1, 1, 1) predicts St(2, 0, 2), density 1/4 at 0"""
        psi = single_continuous(NigParams([0.0], [[1.0]], 1.0, 1.0))
        self.assertAlmostEqual(predictive_logdensity(psi, [0.0]), math.log(0.25), places=10)

    def test_single_discrete_worked_example(self):
        """Test psi = (1, 1) gives probability 1/2"""
        structure = CgnStructure((class_meta(),), {0: ()}, class_index=0)
        table = DirichletTable(0, (), (), DirichletParams([1.0, 1.0]))
        psi = DhdnigParams(structure, {0: table}, {})
        self.assertAlmostEqual(predictive_logdensity(psi, [1]), math.log(0.5), places=12)

    def test_predictive_is_parameter_average(self):
        """Test the predictive equals the Monte Carlo average of Gaussian densities"""
        params = NigParams([1.0], [[0.5]], 3.0, 2.0)
        beta, sigma2 = sample_nig(params, 200000, np.random.default_rng(11))
        y = 1.7
        average = np.mean(stats.norm.pdf(y, loc=beta[:, 0], scale=np.sqrt(sigma2)))
        exact = math.exp(predictive_logdensity(single_continuous(params), [y]))
        self.assertAlmostEqual(average / exact, 1.0, delta=0.02)

    def test_large_sample_approaches_ml(self):
        """Test BA and ML joint densities agree on a large sample"""
        structure = mixed_structure()
        data = mixed_data(3000, seed=8)
        ba = predictive_logdensities(fit_ba(structure, data), data.values[:20])
        ml = joint_logdensities(fit_ml(structure, data), data.values[:20])
        np.testing.assert_allclose(ba, ml, atol=0.1)

    def test_unseen_parent_cell_uses_default(self):
        """Test predictive evaluation in a cell the training data never reached"""
        structure = CgnStructure((class_meta(), continuous_meta(1)), {1: (0,)}, class_index=0)
        data = Dataset(structure.variables, [[0, 1.0], [0, 2.5], [0, 0.5]], class_index=0)
        psi = fit_ba(structure, data)
        self.assertNotIn((1,), psi.continuous[1].cells)
        self.assertTrue(np.isfinite(predictive_logdensity(psi, [1, 1.2])))


def run_tests():
    """Run all tests and return results"""
    suite = unittest.TestSuite()
    for test_class in [TestPriorConfig, TestSuggestedPrior, TestPosterior, TestPredictive]:
        suite.addTests(unittest.TestLoader().loadTestsFromTestCase(test_class))
    return unittest.TextTestRunner(verbosity=2).run(suite)


if __name__ == "__main__":
    result = run_tests()
    sys.exit(0 if result.wasSuccessful() else 1)
