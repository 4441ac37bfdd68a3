import unittest

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from distnorm.designs import design_povm, mub_design, refine_weighted_design, sic_design, sic_qubit_tetrahedron
from distnorm.errors import DimensionError, ValidationError
from distnorm.operators import (HADAMARD, HermitianOp, PureState, diagonal, helstrom_bias, identity,
                                trace_norm)
from distnorm.povm import (
    DominationEstimate,
    MeasurementFamily,
    TwoOutcomeTest,
    apply_povm,
    basis_povm,
    bias,
    computational_basis,
    conjugate_povm,
    convex_combine,
    estimate_domination,
    estimate_lambda_one,
    family_norm,
    family_norm_argmax,
    haar_povm,
    is_separating,
    l1_value,
    pauli_basis_family,
    same_basis_witness,
    symmetrised_family,
    two_outcome_reduce,
    validate_povm,
)
from distnorm.sampling import RandomStream, haar_unitary, random_density, random_hermitian


class TestValidatePovm(unittest.TestCase):
    def setUp(self):
        self.zero = PureState([1, 0]).projector()
        self.one = PureState([0, 1]).projector()

    def test_valid(self):
        povm = validate_povm([self.zero, self.one])
        self.assertEqual(povm.outcomes, 2)
        self.assertEqual(validate_povm([identity(2)]).outcomes, 1)

    def test_completeness(self):
        with self.assertRaises(ValidationError) as ctx:
            validate_povm([self.zero * 1.1, self.one])
        self.assertEqual(ctx.exception.invariant, "completeness")
        self.assertAlmostEqual(ctx.exception.magnitude, 0.1)

    def test_positivity(self):
        with self.assertRaises(ValidationError) as ctx:
            validate_povm([diagonal([1, -0.5]), diagonal([0, 1.5])])
        self.assertEqual(ctx.exception.invariant, "positive")

    def test_tiny_negative_eigenvalue_accepted(self):
        validate_povm([diagonal([1 + 5e-10, 0]), diagonal([-5e-10, 1])])

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionError):
            validate_povm([identity(2), identity(3)])
        with self.assertRaises(ValidationError):
            validate_povm([])


class TestPovmMaps(unittest.TestCase):
    def setUp(self):
        self.z = computational_basis(2)
        self.mub = design_povm(mub_design(2))
        self.zero = PureState([1, 0]).projector()
        self.one = PureState([0, 1]).projector()
        self.xi = diagonal([0.5, -0.5])
        self.rng = RandomStream(3)

    def test_apply(self):
        np.testing.assert_allclose(apply_povm(self.z, self.zero), [1, 0])
        np.testing.assert_allclose(apply_povm(self.mub, self.zero),
                                   [1 / 3, 0, 1 / 6, 1 / 6, 1 / 6, 1 / 6], atol=1e-12)
        self.assertAlmostEqual(float(apply_povm(self.mub, identity(2) * 0.5).sum()), 1.0)
        with self.assertRaises(DimensionError):
            apply_povm(self.z, identity(3))

    def test_bias(self):
        self.assertAlmostEqual(bias(self.z, self.zero, self.one), 1.0)
        self.assertAlmostEqual(bias(self.mub, self.zero, self.one), 1 / 3)

    def test_bias_below_helstrom(self):
        for child in self.rng.split(50):
            povm = haar_povm(3, 6, child)
            rho, sigma = random_density(3, child), random_density(3, child)
            self.assertLessEqual(bias(povm, rho, sigma), helstrom_bias(rho, sigma).bias + 1e-12)

    def test_contraction(self):
        pool = [haar_povm(d, n, child) for (d, n), child in
                zip([(2, 3), (3, 5), (4, 9)], self.rng.split(3))]
        pool += [design_povm(mub_design(d)) for d in (2, 3, 5)]
        pool.append(design_povm(sic_design(sic_qubit_tetrahedron())))
        pool.append(design_povm(refine_weighted_design(mub_design(3), 20)))
        pool += [basis_povm(haar_unitary(d, child)) for d, child in zip((2, 3, 4), self.rng.split(3))]
        pool += list(symmetrised_family(pauli_basis_family("ZXY"), 3, 19).povms)
        pool.append(convex_combine([(0.25, self.z), (0.75, self.mub)]))
        for i, child in enumerate(self.rng.split(1000)):
            povm = pool[i % len(pool)]
            x = random_hermitian(povm.dim, child)
            self.assertLessEqual(l1_value(povm, x), trace_norm(x) + 1e-9, povm.label)

    def test_two_outcome_reduce(self):
        test = two_outcome_reduce(self.z, self.xi)
        self.assertTrue(test.effect.allclose(self.zero))
        full = two_outcome_reduce(self.mub, HermitianOp(np.zeros((2, 2))))
        self.assertTrue(full.effect.allclose(identity(2)))
        grouped = two_outcome_reduce(self.mub, self.xi)
        self.assertAlmostEqual(grouped.value(self.xi), 1 / 3)
        self.assertAlmostEqual(grouped.value(self.xi * 2), 2 / 3)

    def test_reduction_is_exact(self):
        for child in self.rng.split(30):
            povm = haar_povm(4, 7, child)
            x = random_hermitian(4, child)
            self.assertAlmostEqual(two_outcome_reduce(povm, x).value(x), l1_value(povm, x), places=10)

    def test_two_outcome_range(self):
        with self.assertRaises(ValidationError):
            TwoOutcomeTest(diagonal([1.5, 0]))
        povm = TwoOutcomeTest(diagonal([0.3, 0.9])).as_povm()
        self.assertEqual(povm.outcomes, 2)


class TestFamilies(unittest.TestCase):
    def setUp(self):
        self.z = basis_povm(np.eye(2), "Z")
        self.x = basis_povm(HADAMARD, "X")
        self.xi = diagonal([0.5, -0.5])
        self.rng = RandomStream(17)

    def test_family_norm(self):
        self.assertAlmostEqual(family_norm(MeasurementFamily([self.z, self.x]), self.xi), 1.0)
        self.assertAlmostEqual(family_norm(MeasurementFamily([self.x]), self.xi), 0.0)
        value, index = family_norm_argmax(MeasurementFamily([self.x, self.z]), self.xi)
        self.assertEqual(index, 1)
        mub = MeasurementFamily([design_povm(mub_design(2))])
        self.assertAlmostEqual(family_norm(mub, same_basis_witness(2)), 1 / 3)

    def test_family_invariants(self):
        with self.assertRaises(ValidationError):
            MeasurementFamily([])
        with self.assertRaises(DimensionError):
            MeasurementFamily([self.z, computational_basis(3)])

    def test_convex_combine(self):
        mixed = convex_combine([(0.5, self.z), (0.5, self.x)])
        self.assertAlmostEqual(l1_value(mixed, self.xi), 0.5)
        same = convex_combine([(1.0, self.z), (0.0, self.x)])
        self.assertAlmostEqual(l1_value(same, self.xi), l1_value(self.z, self.xi))
        with self.assertRaises(ValidationError):
            convex_combine([(0.6, self.z), (0.6, self.x)])

    def test_convex_additivity(self):
        for child in self.rng.split(20):
            p, q = haar_povm(3, 4, child), haar_povm(3, 6, child)
            w = float(child.generator.uniform())
            x = random_hermitian(3, child)
            combined = convex_combine([(w, p), (1 - w, q)])
            expected = w * l1_value(p, x) + (1 - w) * l1_value(q, x)
            self.assertAlmostEqual(l1_value(combined, x), expected, places=10)

    def test_conjugate(self):
        self.assertTrue(all(a.allclose(b) for a, b in
                            zip(conjugate_povm(self.z, np.eye(2)).effects, self.z.effects)))
        rotated = conjugate_povm(self.z, HADAMARD)
        self.assertTrue(all(a.allclose(b) for a, b in zip(rotated.effects, self.x.effects)))
        with self.assertRaises(ValidationError):
            conjugate_povm(self.z, np.array([[1, 1], [0, 1]]))

    def test_conjugate_covariance(self):
        povm = haar_povm(3, 5, 1)
        for child in self.rng.split(100):
            u = haar_unitary(3, child)
            x = random_hermitian(3, child)
            back = HermitianOp(u.conj().T @ x.entries @ u)
            self.assertAlmostEqual(l1_value(conjugate_povm(povm, u), x), l1_value(povm, back), places=9)

    def test_is_separating(self):
        self.assertTrue(is_separating(MeasurementFamily([design_povm(mub_design(2))])))
        self.assertFalse(is_separating(MeasurementFamily([self.z])))
        self.assertTrue(is_separating(pauli_basis_family("ZXY")))
        self.assertFalse(is_separating(pauli_basis_family("ZX")))

    def test_haar_povm_complete(self):
        povm = haar_povm(3, 10, 4)
        total = sum(m.entries for m in povm.effects)
        np.testing.assert_allclose(total, np.eye(3), atol=1e-9)
        with self.assertRaises(ValidationError):
            haar_povm(3, 2, 4)


class TestDomination(unittest.TestCase):
    def setUp(self):
        self.pauli = pauli_basis_family("ZXY")
        self.mub = MeasurementFamily([design_povm(mub_design(2))], "mub-2")

    def test_pauli_mu(self):
        estimate = estimate_domination(self.pauli, samples=40, restarts=2, rng=5)
        self.assertAlmostEqual(estimate.mu_lower, 1.0, places=9)
        witness = estimate.witnesses["mu"]
        self.assertAlmostEqual(family_norm(self.pauli, witness) / trace_norm(witness),
                               estimate.mu_lower, places=12)

    def test_mub_lambda(self):
        estimate = estimate_domination(self.mub, samples=40, restarts=2, rng=6,
                                       lambda_lower=1 / 3, lambda_lower_source="2-design bound")
        self.assertLessEqual(estimate.lambda_upper, 1 / 3 + 1e-12)
        self.assertGreaterEqual(estimate.lambda_upper, 1 / 3 - 1e-9)
        self.assertEqual(estimate.provenance["lambda_lower"], "2-design bound")
        witness = estimate.witnesses["lambda"]
        self.assertAlmostEqual(family_norm(self.mub, witness) / trace_norm(witness),
                               estimate.lambda_upper, places=12)

    def test_many_outcomes(self):
        family = MeasurementFamily([haar_povm(2, 100, 21)])
        estimate = estimate_domination(family, samples=10, restarts=1, rng=22)
        self.assertLessEqual(estimate.lambda_upper, estimate.mu_lower + 1e-12)
        self.assertLessEqual(estimate.mu_lower, 1.0)

    def test_not_separating(self):
        with self.assertRaises(ValidationError) as ctx:
            estimate_domination(MeasurementFamily([computational_basis(2)]), 10, 1, 0)
        self.assertEqual(ctx.exception.invariant, "separating")

    def test_bracket_invariant(self):
        with self.assertRaises(ValidationError):
            DominationEstimate(lambda_upper=0.2, mu_lower=0.5, lambda_lower=0.4)
        with self.assertRaises(ValidationError):
            DominationEstimate(lambda_upper=1.2, mu_lower=0.5)

    def test_lambda_one_at_least_half(self):
        result = estimate_lambda_one(self.pauli, 200, 8)
        self.assertGreaterEqual(result.worst_ratio, 0.5 - 1e-12)
        self.assertGreaterEqual(result.lambda_one_upper, result.lambda_traceless_upper / 2 - 1e-12)

    @pytest.mark.slow
    def test_uniform_discretisation_lambda(self):
        family = MeasurementFamily([haar_povm(2, 4000, 10)])
        estimate = estimate_domination(family, samples=200, restarts=4, rng=11)
        self.assertAlmostEqual(estimate.lambda_upper, 0.5, delta=0.05)

    @pytest.mark.slow
    def test_symmetrisation_monotone(self):
        base = estimate_domination(self.pauli, samples=100, restarts=3, rng=12)
        averaged = symmetrised_family(self.pauli, 8, 13)
        estimate = estimate_domination(averaged, samples=100, restarts=3, rng=14)
        self.assertGreaterEqual(estimate.lambda_upper, base.lambda_upper - 0.02)


@hsettings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1), n=st.integers(min_value=2, max_value=6))
def test_reduction_matches_l1(seed, n):
    stream = RandomStream(seed)
    povm = haar_povm(2, n, stream)
    x = random_hermitian(2, stream)
    assert abs(two_outcome_reduce(povm, x).value(x) - l1_value(povm, x)) <= 1e-10
