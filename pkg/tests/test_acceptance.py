"""
Acceptance Tests
End-to-end checks of conjugacy, exact averaging, ML optimality, normalization,
the BA versus ML comparisons on Iris and synthetic spectra, and the
structure-search generators
"""

import dataclasses
import math
import tempfile
import time
import unittest
import sys
from pathlib import Path

import numpy as np
from scipy import integrate, stats
from sklearn.datasets import load_iris

sys.path.insert(0, str(Path(__file__).parent.parent))

from core.config import ExperimentConfig
from core.exceptions import DegeneratePriorError
from core.experiment_engine import k_sweep, run_experiment
from data.cgn_structure import CgnStructure
from data.experiment_report import ML_WINS
from data.parameters import GaussLinRegParams, MultinomialParams, NigParams
from systems.bayes_cgn import fit_ba, init_prior, posterior, predictive_logdensity, table_cells
from systems.cgn_core import cell_space, fit_ml, is_acceptable, log_likelihood
from systems.classifier import class_posteriors_ba, class_posteriors_ml
from systems.distributions import log_mv_student, nig_predictive, sample_nig
from systems.significance_tests import mann_whitney_u
from systems.spectra_generator import SyntheticSpectraSpec
from systems.structure_search import JanPartition, bw_candidates, fw_candidates, wc_candidates
from tests.fixtures import class_meta, continuous_meta, gaussian_classes, random_instance
from tests.test_bayes_cgn import single_continuous
from tests.test_significance import enumerated_p
from tests.test_structure_search import _drop_new, _restrict, all_jan_partitions, refines


def acceptable_instances(count: int, seed: int):
    """First `count` random instances whose sample supports ML"""
    rng = np.random.default_rng(seed)
    found = []
    for _ in range(5000):
        structure, data = random_instance(rng)
        if is_acceptable(structure, data).acceptable:
            found.append((structure, data))
            if len(found) == count:
                return found
    raise AssertionError(f"only {len(found)} acceptable instances generated")


class TestConjugacy(unittest.TestCase):
    """Batch and sequential posteriors agree on random instances"""

    def test_batch_equals_sequential(self):
        """Test 100 random instances, every hyperparameter within 1e-9"""
        rng = np.random.default_rng(2024)
        start = time.perf_counter()
        checked = 0
        while checked < 100:
            structure, data = random_instance(rng)
            try:
                prior = init_prior(structure, data)
            except DegeneratePriorError:
                continue
            half = data.n // 2
            batch = posterior(prior, data)
            sequential = posterior(posterior(prior, data.take(np.arange(half))),
                                   data.take(np.arange(half, data.n)))
            self.assertEqual(table_cells(batch), table_cells(sequential))
            for kind, node, cell in table_cells(batch):
                if kind == "dirichlet":
                    np.testing.assert_allclose(sequential.discrete[node].lookup(cell).psi,
                                               batch.discrete[node].lookup(cell).psi,
                                               rtol=1e-9, atol=1e-9)
                    continue
                a, b = sequential.continuous[node].lookup(cell), batch.continuous[node].lookup(cell)
                np.testing.assert_allclose(a.mu, b.mu, rtol=1e-9, atol=1e-9)
                np.testing.assert_allclose(a.V, b.V, rtol=1e-9, atol=1e-9)
                np.testing.assert_allclose([a.rho, a.phi], [b.rho, b.phi], rtol=1e-9, atol=1e-9)
            checked += 1
        self.assertLess(time.perf_counter() - start, 10.0)


class TestExactAveraging(unittest.TestCase):
    """The closed-form predictive equals integration over the parameter posterior"""

    def test_monte_carlo_oracle(self):
        """Test 20 random one-node models against 100000 parameter draws"""
        rng = np.random.default_rng(99)
        for model in range(20):
            p = int(rng.integers(1, 4))
            A = rng.normal(size=(p, p))
            params = NigParams(rng.normal(size=p), 0.5 * A @ A.T / p + 0.5 * np.eye(p),
                               rng.uniform(2.0, 5.0), rng.uniform(0.5, 3.0))
            z = np.concatenate([[1.0], rng.normal(size=p - 1)])
            student = nig_predictive(params, z)
            y = student.location + rng.uniform(-1.0, 1.0) * math.sqrt(student.scale)

            beta, sigma2 = sample_nig(params, 100000, rng)
            average = np.mean(stats.norm.pdf(y, loc=beta @ z, scale=np.sqrt(sigma2)))
            exact = math.exp(log_mv_student(y, student))
            self.assertAlmostEqual(average / exact, 1.0, delta=0.02, msg=f"model {model}")
            if p == 1:
                self.assertAlmostEqual(predictive_logdensity(single_continuous(params), [y]),
                                       math.log(exact), places=10)


class TestStudentClosedForm(unittest.TestCase):
    """Worked predictive point and normalization"""

    def test_worked_point(self):
        """Test NIG(0, 1, 1, 1) at z = 1, y = 0 has density 1/4 and integrates to 1"""
        student = nig_predictive(NigParams([0.0], [[1.0]], 1.0, 1.0), [1.0])
        self.assertEqual((student.nu, student.location, student.scale), (2.0, 0.0, 2.0))
        self.assertAlmostEqual(math.exp(log_mv_student(0.0, student)), 0.25, delta=1e-9)
        total, _ = integrate.quad(lambda y: math.exp(log_mv_student(y, student)),
                                  -np.inf, np.inf)
        self.assertAlmostEqual(total, 1.0, delta=1e-4)


class TestMaximumLikelihoodOptimality(unittest.TestCase):
    """ML estimates are local maxima and match least squares"""

    @classmethod
    def setUpClass(cls):
        cls.instances = acceptable_instances(50, seed=7)

    @staticmethod
    def _replace_discrete(model, node, cell, params):
        cpt = model.discrete[node]
        table = dict(cpt.table)
        table[cell] = params
        discrete = dict(model.discrete)
        discrete[node] = dataclasses.replace(cpt, table=table)
        return dataclasses.replace(model, discrete=discrete)

    @staticmethod
    def _replace_continuous(model, node, cell, params):
        cpd = model.continuous[node]
        table = dict(cpd.table)
        table[cell] = params
        continuous = dict(model.continuous)
        continuous[node] = dataclasses.replace(cpd, table=table)
        return dataclasses.replace(model, continuous=continuous)

    def test_no_perturbation_improves(self):
        """Test 20 random 1e-3 directions per parameter block"""
        rng = np.random.default_rng(3)
        for structure, data in self.instances:
            model = fit_ml(structure, data)
            best = log_likelihood(model, data)
            for node, cpt in model.discrete.items():
                for cell in cpt.table:
                    theta = cpt.row(cell).theta
                    for _ in range(20):
                        direction = rng.normal(size=theta.size)
                        direction -= direction.mean()
                        direction /= np.linalg.norm(direction)
                        moved = theta + 1e-3 * direction
                        trial = self._replace_discrete(model, node, cell,
                                                       MultinomialParams(moved / moved.sum()))
                        self.assertLessEqual(log_likelihood(trial, data), best + 1e-9)
            for node, cpd in model.continuous.items():
                for cell in cpd.table:
                    fitted = cpd.regression(cell)
                    for _ in range(20):
                        direction = rng.normal(size=fitted.dimension + 1)
                        direction /= np.linalg.norm(direction)
                        params = GaussLinRegParams(fitted.beta + 1e-3 * direction[:-1],
                                                   fitted.sigma2 * math.exp(1e-3 * direction[-1]))
                        trial = self._replace_continuous(model, node, cell, params)
                        self.assertLessEqual(log_likelihood(trial, data), best + 1e-9)

    def test_least_squares_oracle(self):
        """Test each cell's regression against numpy least squares"""
        for structure, data in self.instances:
            model = fit_ml(structure, data)
            for node, cpd in model.continuous.items():
                X = data.values
                for cell in cell_space(cpd.parent_cardinalities):
                    rows = np.all(X[:, list(cpd.discrete_parents)] == np.array(cell), axis=1) \
                        if cpd.discrete_parents else np.ones(data.n, dtype=bool)
                    Z = np.column_stack([np.ones(rows.sum())] +
                                        [X[rows, p] for p in cpd.continuous_parents])
                    y = X[rows, node]
                    beta = np.linalg.lstsq(Z, y, rcond=None)[0]
                    rss = float(np.sum((y - Z @ beta) ** 2))
                    fitted = cpd.regression(cell)
                    np.testing.assert_allclose(fitted.beta, beta, rtol=1e-7, atol=1e-9)
                    self.assertAlmostEqual(fitted.sigma2, rss / rows.sum(),
                                           delta=1e-9 * max(1.0, fitted.sigma2))


class TestNormalization(unittest.TestCase):
    """Class posteriors are distributions"""

    def test_posteriors_sum_to_one(self):
        """Test ML and BA posteriors on random acceptable instances"""
        for structure, data in acceptable_instances(30, seed=11):
            posteriors = class_posteriors_ml(fit_ml(structure, data), data.values)
            posteriors += class_posteriors_ba(fit_ba(structure, data), data.values)
            for p in posteriors:
                self.assertAlmostEqual(float(np.sum(p.probs)), 1.0, delta=1e-12)
                self.assertTrue(np.all(np.isfinite(p.log_probs)))


class TestIrisComparison(unittest.TestCase):
    """BA against ML on Iris with 20% training subsamples and the bw wrapper"""

    @classmethod
    def setUpClass(cls):
        iris = load_iris(as_frame=True)
        frame = iris.data.copy()
        frame.columns = ["sepal_length", "sepal_width", "petal_length", "petal_width"]
        frame["class"] = [iris.target_names[t] for t in iris.target]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "iris.csv"
            frame.to_csv(path, index=False)
            cfg = ExperimentConfig(dataset_path=str(path), class_variable="class", structure="bw",
                                   repetitions=10, folds=10, train_fraction=0.2, seed=1)
            start = time.perf_counter()
            cls.report = run_experiment(cfg)
            cls.elapsed = time.perf_counter() - start

    def fold_clls(self, learner):
        return [f.cll for f in self.report.folds_of(learner) if f.defined]

    def test_runtime_and_coverage(self):
        """Test the run finishes in time with BA defined on every fold"""
        self.assertLess(self.elapsed, 300.0)
        self.assertEqual(self.report.summaries["BA"].n_defined, 100)

    def test_ba_mean_cll_higher(self):
        """Test BA has the higher mean CLL and accuracy on par"""
        ml, ba = self.report.summaries["ML"], self.report.summaries["BA"]
        self.assertGreater(ba.mean_cll, ml.mean_cll)
        self.assertLessEqual(abs(ba.mean_accuracy - ml.mean_accuracy), 0.03)

    def test_rank_test_follows_typical_fold(self):
        """Test the pooled-variance prior leaves BA behind on the typical fold

        ML loses heavily on a few folds, which lifts the BA mean, but BA's wider
        predictive costs it on most folds, so the rank test goes to ML.
        """
        self.assertLess(np.median(self.fold_clls("BA")), np.median(self.fold_clls("ML")))
        self.assertEqual(self.report.test("cll").verdict, ML_WINS)


class TestSpectraSweep(unittest.TestCase):
    """BA keeps its edge as k-BAND structures grow"""

    @classmethod
    def setUpClass(cls):
        spec = SyntheticSpectraSpec(n_vars=40, n_per_class=30, band_width=3, seed=0)
        cfg = ExperimentConfig(repetitions=5, folds=10, seed=0)
        cls.k_values = [1, 2, 3, 5, 8, 12]
        # box widths whose parameter counts sit closest to the band counts above
        cls.box_k_values = [1, 3, 5, 9, 14, 20]
        cls.band = k_sweep(spec, "kband", cls.k_values, cfg)
        cls.box = k_sweep(spec, "kbox", cls.box_k_values, cfg)

    def matched_box_row(self, band_row):
        return min(self.box.rows, key=lambda row: (abs(row.n_params - band_row.n_params), row.k))

    def test_ba_beats_ml_for_large_k(self):
        """Test BA CLL above ML CLL wherever both are defined and k >= 5"""
        for row in self.band.rows:
            ml, ba = row.summaries["ML"], row.summaries["BA"]
            self.assertGreater(ba.n_defined, 0)
            if row.k >= 5 and ml.n_defined > 0:
                self.assertGreater(ba.mean_cll, ml.mean_cll, f"k={row.k}")

    def test_box_grid_matches_band_counts(self):
        """Test every band row has a box row within 5% of its parameter count"""
        pairs = {row.k: self.matched_box_row(row).k for row in self.band.rows}
        self.assertEqual(pairs, {1: 1, 2: 3, 3: 5, 5: 9, 8: 14, 12: 20})
        for row in self.band.rows:
            box = self.matched_box_row(row)
            self.assertLessEqual(abs(box.n_params - row.n_params), 0.05 * row.n_params, f"k={row.k}")

    def test_band_not_worse_than_box(self):
        """Test one-sided Mann-Whitney finds no matched pair where k-BAND CLL falls below k-BOX"""
        for row in self.band.rows:
            box_row = self.matched_box_row(row)
            band = [f.cll for f in self.band.reports[row.k].folds_of("BA") if f.defined]
            box = [f.cll for f in self.box.reports[box_row.k].folds_of("BA") if f.defined]
            result = mann_whitney_u(band, box, alpha=0.05, alternative="less")
            self.assertGreaterEqual(result.p_value, 0.05,
                                    f"band k={row.k} ({row.n_params} params) vs "
                                    f"box k={box_row.k} ({box_row.n_params} params)")

    def test_parameter_counts_grow(self):
        """Test both families add parameters as k grows"""
        for sweep in (self.band, self.box):
            counts = [row.n_params for row in sweep.rows]
            self.assertEqual(counts, sorted(counts))
        self.assertEqual(self.band.rows[0].n_params, self.box.rows[0].n_params)
        self.assertEqual([row.n_params for row in self.band.rows], [161, 239, 315, 461, 665, 909])


class TestMannWhitneyExactness(unittest.TestCase):
    """Exact p-values against enumeration for every size split up to 10"""

    def test_all_small_splits(self):
        """Test every (n_a, n_b) with n_a + n_b <= 10, with and without ties"""
        rng = np.random.default_rng(5)
        for n_a in range(1, 10):
            for n_b in range(1, 11 - n_a):
                for rounding in (None, 0):
                    a = rng.normal(size=n_a)
                    b = rng.normal(0.7, 1.0, size=n_b)
                    if rounding is not None:
                        a, b = np.round(a, rounding), np.round(b, rounding)
                    result = mann_whitney_u(a, b)
                    self.assertTrue(result.exact)
                    self.assertAlmostEqual(result.p_value, enumerated_p(a, b), places=10)

    def test_worked_example(self):
        """Test a = (1, 2, 3), b = (4, 5, 6)"""
        result = mann_whitney_u([1, 2, 3], [4, 5, 6])
        self.assertEqual(result.u, 0.0)
        self.assertAlmostEqual(result.p_value, enumerated_p(np.array([1, 2, 3]),
                                                            np.array([4, 5, 6])), places=12)


class TestBayesToMlConvergence(unittest.TestCase):
    """The BA predictive approaches the ML plug-in Gaussian"""

    @staticmethod
    def _distance(n_per_class: int, seed: int) -> float:
        data = gaussian_classes([[1.0], [1.0]], n_per_class, seed=seed, sd=2.0)
        structure = CgnStructure((class_meta(), continuous_meta(1)), {0: (), 1: ()}, class_index=0)
        student = nig_predictive(fit_ba(structure, data).continuous[1].lookup(()), [1.0])
        fitted = fit_ml(structure, data).continuous[1].regression(())
        mean, sd = fitted.beta[0], math.sqrt(fitted.sigma2)
        grid = np.linspace(mean - 12 * sd, mean + 12 * sd, 24001)
        ba = stats.t.pdf(grid, df=student.nu, loc=student.location, scale=math.sqrt(student.scale))
        ml = stats.norm.pdf(grid, loc=mean, scale=sd)
        return 0.5 * integrate.trapezoid(np.abs(ba - ml), grid)

    def test_total_variation(self):
        """Test grid total variation below 0.02 at n = 1000"""
        self.assertLess(self._distance(500, seed=17), 0.02)

    def test_distance_shrinks_with_n(self):
        """Test the average distance over seeds falls through n = 10, 100, 1000"""
        averages = [np.mean([self._distance(n // 2, seed) for seed in range(5)])
                    for n in (10, 100, 1000)]
        self.assertGreater(averages[0], averages[1])
        self.assertGreater(averages[1], averages[2])


class TestGeneratorCounts(unittest.TestCase):
    """Candidate generators against brute force on every partition of four attributes"""

    def test_every_partition(self):
        """Test fw, bw and wc neighbourhoods of all 52 partitions"""
        attrs = (1, 2, 3, 4)
        universe = all_jan_partitions(list(attrs))
        self.assertEqual(len(universe), 52)
        for p in universe:
            fw = {q for q in universe
                  if len(q.attributes) == len(p.attributes) + 1
                  and set(p.attributes) <= set(q.attributes) and _drop_new(q, p) == p}
            removals = {q for q in universe
                        if len(q.attributes) == len(p.attributes) - 1
                        and set(q.attributes) <= set(p.attributes) and _restrict(p, q.attributes) == q}
            merges = {q for q in universe
                      if q.attributes == p.attributes and len(q.groups) == len(p.groups) - 1
                      and refines(p, q)}
            produced_fw, produced_bw = fw_candidates(p, attrs), bw_candidates(p)
            self.assertEqual(len(produced_fw), len(set(produced_fw)))
            self.assertEqual(set(produced_fw), fw, str(p))
            self.assertEqual(set(produced_bw), removals | merges, str(p))
            self.assertEqual(set(wc_candidates(p)), removals, str(p))
        self.assertEqual(fw_candidates(JanPartition(()), attrs)[0], JanPartition(((1,),)))


def run_tests():
    """Run all tests and return results"""
    suite = unittest.TestSuite()
    for test_class in [TestConjugacy, TestExactAveraging, TestStudentClosedForm,
                       TestMaximumLikelihoodOptimality, TestNormalization, TestIrisComparison,
                       TestSpectraSweep, TestMannWhitneyExactness, TestBayesToMlConvergence,
                       TestGeneratorCounts]:
        suite.addTests(unittest.TestLoader().loadTestsFromTestCase(test_class))
    return unittest.TextTestRunner(verbosity=2).run(suite)


if __name__ == "__main__":
    result = run_tests()
    sys.exit(0 if result.wasSuccessful() else 1)
