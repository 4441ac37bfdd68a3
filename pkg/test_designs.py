import unittest

import numpy as np
import pytest

from distnorm.config import Settings, get_settings, set_settings
from distnorm.designs import (
    WeightedDesign,
    berger_bound,
    design_defect,
    design_moments,
    design_povm,
    four_design_bias_bound,
    frame_residual,
    haar_moments,
    mub_basis_povms,
    mub_design,
    mub_vectors,
    pair_distance,
    pairwise_overlaps,
    refine_weighted_design,
    refined_two_design_bound,
    second_moment_audit,
    sic_design,
    sic_lambda_report,
    sic_qubit_tetrahedron,
    sic_validate,
    two_design_bound_check,
    weighted_design_audit,
)
from distnorm.errors import DimensionError, UnsupportedDimensionError, ValidationError
from distnorm.operators import HermitianOp, PureState, diagonal, identity, trace_norm
from distnorm.sampling import RandomStream


def mixed_design(weight=0.3):
    """SIC and MUB qubit designs mixed with unequal weights: a weighted, improper 2-design."""
    sic = np.array([s.amplitudes for s in sic_qubit_tetrahedron()])
    mub = mub_vectors(2)
    weights = np.concatenate([np.full(4, weight / 4), np.full(6, (1 - weight) / 6)])
    return WeightedDesign(weights, np.concatenate([sic, mub]), t=2, label="sic+mub")


class TestWeightedDesign(unittest.TestCase):
    def test_weight_sum(self):
        with self.assertRaises(ValidationError):
            WeightedDesign([0.5, 0.4], [[1, 0], [0, 1]])

    def test_unit_vectors(self):
        with self.assertRaises(ValidationError):
            WeightedDesign([0.5, 0.5], [[2, 0], [0, 1]])

    def test_frame_condition(self):
        with self.assertRaises(ValidationError) as ctx:
            WeightedDesign([0.7, 0.3], [[1, 0], [0, 1]])
        self.assertEqual(ctx.exception.invariant, "one_design")
        loose = WeightedDesign([0.7, 0.3], [[1, 0], [0, 1]], strict=False)
        self.assertGreater(frame_residual(loose), 0.1)

    def test_proper(self):
        self.assertTrue(mub_design(2).proper)
        self.assertFalse(mixed_design().proper)


class TestDesignTolerance(unittest.TestCase):
    def setUp(self):
        self.settings = get_settings()
        self.weights = [0.5 + 5e-7, 0.5 - 5e-7]

    def tearDown(self):
        set_settings(self.settings)

    def test_default_rejects_small_residual(self):
        with self.assertRaises(ValidationError) as ctx:
            WeightedDesign(self.weights, [[1, 0], [0, 1]])
        self.assertEqual(ctx.exception.invariant, "one_design")

    def test_looser_tolerance_accepts(self):
        set_settings(self.settings.replace(design_tol=1e-5))
        design = WeightedDesign(self.weights, [[1, 0], [0, 1]])
        self.assertAlmostEqual(frame_residual(design), np.sqrt(2) * 5e-7, places=12)

    def test_sic_tolerance_follows_settings(self):
        gen = np.random.default_rng(0)
        noisy = [PureState.normalised(s.amplitudes + 1e-3 * gen.standard_normal(2))
                 for s in sic_qubit_tetrahedron()]
        self.assertFalse(sic_validate(noisy).ok)
        set_settings(self.settings.replace(design_tol=0.05))
        report = sic_validate(noisy)
        self.assertEqual(report.data["tol"], 0.05)
        self.assertTrue(report.ok, report.violations)


class TestMub(unittest.TestCase):
    def test_qubit(self):
        design = mub_design(2)
        self.assertEqual(design.n, 6)
        overlaps = pairwise_overlaps(design)
        self.assertAlmostEqual(overlaps[0, 2], 0.5)
        self.assertAlmostEqual(overlaps[2, 4], 0.5)
        self.assertLessEqual(design_defect(design, 2), 1e-12)
        self.assertGreater(design_defect(design, 4), 0.01)

    def test_qutrit_overlaps(self):
        design = mub_design(3)
        self.assertEqual(design.n, 12)
        overlaps = pairwise_overlaps(design)
        for i in range(12):
            for j in range(12):
                if i // 3 != j // 3:
                    self.assertAlmostEqual(overlaps[i, j], 1 / 3, places=12)
        self.assertLessEqual(design_defect(design, 2), 1e-9)

    def test_primes(self):
        for d in (5, 7):
            self.assertLessEqual(design_defect(mub_design(d), 2), 1e-9)

    def test_composite(self):
        with self.assertRaises(UnsupportedDimensionError):
            mub_design(4)

    def test_basis_povms(self):
        povms = mub_basis_povms(3)
        self.assertEqual(len(povms), 4)
        self.assertTrue(all(p.outcomes == 3 for p in povms))

    def test_design_povm(self):
        povm = design_povm(mub_design(2))
        self.assertTrue(povm.effects[0].allclose(PureState([1, 0]).projector() * (1 / 3)))
        total = sum(m.entries for m in povm.effects)
        self.assertLess(np.linalg.norm(total - np.eye(2)), 1e-10)

    def test_defect_cap(self):
        with self.assertRaises(DimensionError):
            design_defect(mub_design(3), 4, Settings(dim_cap=50))

    def test_not_a_one_design(self):
        single = WeightedDesign([1.0], [[1, 0]], t=1, strict=False)
        self.assertAlmostEqual(design_defect(single, 1), np.sqrt(0.5))


class TestSic(unittest.TestCase):
    def setUp(self):
        self.tetra = sic_qubit_tetrahedron()

    def test_tetrahedron(self):
        report = sic_validate(self.tetra)
        self.assertTrue(report.ok)
        self.assertLessEqual(report.data["max_overlap_deviation"], 1e-12)

    def test_repeated_basis_fails(self):
        basis = [PureState([1, 0]), PureState([0, 1])] * 2
        self.assertFalse(sic_validate(basis).ok)

    def test_perturbed(self):
        gen = np.random.default_rng(0)
        noisy = [PureState.normalised(s.amplitudes + 1e-3 * gen.standard_normal(2)) for s in self.tetra]
        report = sic_validate(noisy)
        self.assertFalse(report.ok)
        self.assertGreater(report.data["max_overlap_deviation"], 1e-6)
        self.assertLess(report.data["max_overlap_deviation"], 1e-2)

    def test_wrong_count(self):
        with self.assertRaises(ValidationError):
            sic_validate(self.tetra[:3])
        with self.assertRaises(ValidationError) as ctx:
            sic_validate([])
        self.assertEqual(ctx.exception.invariant, "count")

    def test_povm_and_distance(self):
        design = sic_design(self.tetra)
        povm = design_povm(design)
        self.assertTrue(povm.effects[1].allclose(design.projector(1) * 0.5))
        self.assertAlmostEqual(pair_distance(design, 0, 1), 2 / 3)

    def test_lambda_discrepancy(self):
        report = sic_lambda_report(self.tetra)
        self.assertAlmostEqual(report.data["measured_distance"], 2 / 3)
        self.assertAlmostEqual(report.data["trace_distance"], 2 * np.sqrt(2 / 3))
        self.assertAlmostEqual(report.data["lambda_upper"], 1 / np.sqrt(6))
        self.assertAlmostEqual(report.data["lambda_upper_quoted"], 0.5)
        self.assertTrue(report.data["quoted_value_disagrees"])


class TestTwoDesignBound(unittest.TestCase):
    def setUp(self):
        self.rng = RandomStream(31)

    def test_same_basis_pair(self):
        for d in (2, 3, 5):
            self.assertAlmostEqual(pair_distance(mub_design(d), 0, 1), 2 / (d + 1))

    def test_random_pairs(self):
        for d in (2, 3, 5):
            report = two_design_bound_check(mub_design(d), 200, self.rng)
            self.assertTrue(report.ok)
            self.assertGreaterEqual(report.data["min_distance"], 1 / (d + 1) - 1e-9)

    def test_rejects_non_design(self):
        single = WeightedDesign([1.0], [[1, 0]], t=1, strict=False)
        with self.assertRaises(ValidationError):
            two_design_bound_check(single, 5, self.rng)

    def test_second_moment_identity(self):
        for design in (mub_design(3), mixed_design(), sic_design(sic_qubit_tetrahedron())):
            self.assertTrue(second_moment_audit(design, 100, self.rng).ok)

    @pytest.mark.slow
    def test_random_pairs_large(self):
        report = two_design_bound_check(mub_design(3), 10000, 32)
        self.assertGreaterEqual(report.data["min_distance"], 0.25 - 1e-9)
        for d in (7, 11):
            self.assertTrue(two_design_bound_check(mub_design(d), 500, d).ok)


class TestRefinement(unittest.TestCase):
    def test_exact_division(self):
        design = WeightedDesign([0.7, 0.3], [[1, 0], [0, 1]], strict=False)
        refined = refine_weighted_design(design, 10)
        self.assertEqual(refined.n, 10)
        np.testing.assert_allclose(refined.weights, np.full(10, 0.1))

    def test_remainders(self):
        design = WeightedDesign([2 / 3, 1 / 3], [[1, 0], [0, 1]], strict=False)
        refined = refine_weighted_design(design, 4)
        np.testing.assert_allclose(sorted(refined.weights), sorted([1 / 6, 0.25, 0.25, 1 / 12, 0.25]))
        self.assertAlmostEqual(float(refined.weights.sum()), 1.0, places=14)
        self.assertTrue(np.all(refined.weights <= 0.25 + 1e-15))

    def test_defect_unchanged(self):
        design = mixed_design()
        refined = refine_weighted_design(design, 40)
        self.assertAlmostEqual(design_defect(refined, 2), design_defect(design, 2), places=12)
        self.assertLessEqual(refined.n, 40 + design.n)

    def test_too_few_pieces(self):
        with self.assertRaises(ValidationError):
            refine_weighted_design(mub_design(2), 3)

    def test_weight_drift_is_reported(self):
        design = WeightedDesign([0.5 - 4e-10, 0.5 + 4e-10], [[1, 0], [0, 1]], strict=False)
        with self.assertRaises(ValidationError) as ctx:
            refine_weighted_design(design, 2)
        self.assertEqual(ctx.exception.invariant, "weight_sum")

    def test_bound_formula(self):
        self.assertAlmostEqual(refined_two_design_bound(2, 10, 10 ** 9), 1 / 3, places=7)
        self.assertAlmostEqual(refined_two_design_bound(3, 4, 4), 1 - 0.75 * 2)

    def test_weighted_audit(self):
        report = weighted_design_audit(mixed_design(), 200, 100, 41)
        self.assertTrue(report.ok, report.violations)
        self.assertGreaterEqual(report.data["min_distance"], report.data["refined_bound"] - 1e-9)


class TestMoments(unittest.TestCase):
    def setUp(self):
        self.xi = diagonal([0.5, -0.5])

    def test_mub_second_moment(self):
        moments = design_moments(mub_design(2), self.xi)
        self.assertAlmostEqual(moments.second_moment, 1 / 3)
        self.assertAlmostEqual(moments.closed_form_second, 1 / 3)
        self.assertAlmostEqual(moments.closed_form_fourth, 0.2)

    def test_zero(self):
        moments = design_moments(mub_design(2), HermitianOp(np.zeros((2, 2))))
        self.assertEqual(moments.second_moment, 0.0)
        self.assertEqual(moments.fourth_moment, 0.0)
        self.assertEqual(moments.berger_bound, 0.0)

    def test_traceless_required(self):
        with self.assertRaises(ValidationError):
            design_moments(mub_design(2), identity(2))

    def test_berger(self):
        self.assertAlmostEqual(berger_bound(1 / 3, 0.2), 0.4303314829, places=9)
        self.assertEqual(berger_bound(1.0, 0.0), 0.0)

    def test_haar_moments(self):
        moments = haar_moments(self.xi, 100000, 51)
        errors = moments.std_errors
        self.assertLessEqual(abs(moments.second_moment - 1 / 3), 5 * errors["second_moment"])
        self.assertLessEqual(abs(moments.fourth_moment - 0.2), 5 * errors["fourth_moment"])
        self.assertLessEqual(abs(moments.mean_abs - 0.5), 5 * errors["mean_abs"])
        self.assertLessEqual(moments.berger_bound, moments.mean_abs + 3 * errors["mean_abs"])
        self.assertEqual(moments.samples, 100000)
        self.assertEqual(moments.seed, 51)

    def test_four_design_bound(self):
        l2, l1 = four_design_bias_bound(self.xi, 2)
        self.assertAlmostEqual(l2, 1 / (3 * np.sqrt(2)))
        self.assertLessEqual(l2, 0.5)
        unit = diagonal([1 / np.sqrt(2), -1 / np.sqrt(2)])
        self.assertAlmostEqual(four_design_bias_bound(unit, 2)[0], 1 / 3)
        self.assertEqual(four_design_bias_bound(HermitianOp(np.zeros((2, 2))), 2), (0.0, 0.0))
        self.assertAlmostEqual(l1, trace_norm(self.xi) / (3 * np.sqrt(2)))
