import os
import unittest
from unittest import mock

import numpy as np
from hypothesis import given, settings as hsettings, strategies as st
from hypothesis.extra.numpy import arrays

from distnorm.config import DEFAULT_SETTINGS, Settings, get_settings, resolve, set_settings
from distnorm.errors import (ConfigError, DimensionError, SampleSizeError, ValidationError)
from distnorm.operators import (
    HermitianOp,
    PureState,
    diagonal,
    helstrom_bias,
    hs_inner,
    hs_norm,
    identity,
    maximally_entangled,
    partial_trace,
    partial_transpose,
    spectrum,
    swap_operator,
    tensor_product,
    trace_norm,
)
from distnorm.sampling import (
    McEstimate,
    RandomStream,
    haar_state,
    haar_vectors,
    monte_carlo,
    random_density,
    random_hermitian,
    random_traceless,
    random_traceless_direction,
    require_samples,
)


class TestHermitianOp(unittest.TestCase):
    def setUp(self):
        self.z = diagonal([1.0, -1.0])
        self.rng = RandomStream(11)

    def test_rejects_non_hermitian(self):
        with self.assertRaises(ValidationError) as ctx:
            HermitianOp([[0, 1], [0, 0]])
        self.assertEqual(ctx.exception.invariant, "hermitian")

    def test_hermitian_tolerance_is_relative(self):
        with self.assertRaises(ValidationError) as ctx:
            HermitianOp([[1e-8, 1e-8], [1e-8 + 1e-12, 0]])
        self.assertAlmostEqual(ctx.exception.magnitude, 1e-4, delta=1e-6)
        large = HermitianOp([[1e6, 1e6], [1e6 + 1e-5, 0]])
        self.assertEqual(large.dim, 2)
        self.assertEqual(HermitianOp(np.zeros((2, 2))).trace, 0.0)

    def test_rejects_non_finite_and_bad_shape(self):
        with self.assertRaises(ValidationError):
            HermitianOp([[np.nan, 0], [0, 1]])
        with self.assertRaises(DimensionError):
            HermitianOp(np.eye(4), (3, 2))
        with self.assertRaises(DimensionError):
            HermitianOp(np.ones((2, 3)))

    def test_symmetrises_small_drift(self):
        m = np.array([[1.0, 0.5 + 1e-13], [0.5, 2.0]])
        h = HermitianOp(m)
        np.testing.assert_allclose(h.entries, h.entries.conj().T, atol=0)

    def test_entries_are_read_only(self):
        with self.assertRaises(ValueError):
            self.z.entries[0, 0] = 5

    def test_trace_norm_examples(self):
        self.assertAlmostEqual(trace_norm(self.z), 2.0)
        rho = random_density(4, self.rng)
        self.assertAlmostEqual(trace_norm(rho), 1.0, places=10)

    def test_hs_examples(self):
        self.assertAlmostEqual(hs_inner(identity(2), identity(2)), 2.0)
        self.assertAlmostEqual(hs_norm(self.z), np.sqrt(2))
        flip = swap_operator(2)
        sym = (identity(4, (2, 2)) + flip) * 0.5
        self.assertAlmostEqual(hs_inner(sym, flip), 3.0)

    def test_partial_trace(self):
        phi = maximally_entangled(2)
        self.assertTrue(partial_trace(phi, "B").allclose(identity(2) * 0.5))
        x = random_hermitian(2, self.rng)
        y = random_hermitian(3, self.rng)
        product = tensor_product(x, y)
        self.assertTrue(partial_trace(product, "B").allclose(x * y.trace))
        a = random_traceless(2, self.rng)
        b = random_traceless(3, self.rng)
        reduced = partial_trace(tensor_product(a, b), "A")
        self.assertTrue(reduced.allclose(HermitianOp(np.zeros((3, 3)))))

    def test_partial_trace_needs_shape(self):
        with self.assertRaises(DimensionError):
            partial_trace(identity(4), "A")

    def test_partial_transpose_of_swap(self):
        flip = swap_operator(2)
        transposed = partial_transpose(flip)
        self.assertTrue(transposed.allclose(maximally_entangled(2) * 2.0))
        np.testing.assert_allclose(spectrum(transposed).eigenvalues, [2, 0, 0, 0], atol=1e-12)

    def test_partial_transpose_isometry(self):
        for _ in range(100):
            xi = random_traceless(6, self.rng, (2, 3))
            pt = partial_transpose(xi)
            self.assertAlmostEqual(hs_norm(pt), hs_norm(xi), places=10)
            self.assertTrue(partial_transpose(pt).allclose(xi))
            self.assertAlmostEqual(pt.trace, xi.trace, places=12)

    def test_tensor_product(self):
        self.assertTrue(tensor_product(identity(2), identity(2)).allclose(identity(4)))
        zz = tensor_product(self.z, self.z)
        self.assertTrue(zz.allclose(diagonal([1, -1, -1, 1])))
        self.assertEqual(zz.shape, (2, 2))

    def test_tensor_product_cap(self):
        previous = set_settings(get_settings().replace(dim_cap=8))
        try:
            with self.assertRaises(DimensionError):
                tensor_product(identity(3), identity(3))
        finally:
            set_settings(previous)

    def test_spectrum_reconstructs(self):
        h = random_hermitian(5, self.rng)
        spec = spectrum(h)
        self.assertTrue(np.all(np.diff(spec.eigenvalues) <= 0))
        self.assertLess(np.linalg.norm(spec.reconstruct() - h.entries), 1e-9)
        self.assertAlmostEqual(float(spec.eigenvalues.sum()), h.trace, places=9)


class TestHelstrom(unittest.TestCase):
    def setUp(self):
        self.zero = PureState([1, 0]).projector()
        self.one = PureState([0, 1]).projector()

    def test_orthogonal(self):
        result = helstrom_bias(self.zero, self.one)
        self.assertAlmostEqual(result.bias, 1.0)
        self.assertTrue(result.projector.allclose(self.zero))

    def test_equal(self):
        self.assertAlmostEqual(helstrom_bias(self.zero, self.zero).bias, 0.0)

    def test_overlap_one_third(self):
        phi = PureState([np.sqrt(1 / 3), np.sqrt(2 / 3)]).projector()
        self.assertAlmostEqual(helstrom_bias(self.zero, phi).bias, np.sqrt(2 / 3), places=12)

    def test_rejects_non_density(self):
        with self.assertRaises(ValidationError):
            helstrom_bias(diagonal([1, -1]), self.zero)


class TestSampling(unittest.TestCase):
    def setUp(self):
        self.rng = RandomStream(2024)

    def test_haar_state_unit_norm(self):
        for child in self.rng.split(50):
            state = haar_state(3, child)
            self.assertAlmostEqual(np.linalg.norm(state.amplitudes), 1.0, places=12)
        with self.assertRaises(ValidationError):
            haar_state(0, 1)

    def test_haar_mean_projector(self):
        v = haar_vectors(self.rng.generator, 2, 100000)
        projectors = np.einsum("ni,nj->nij", v, v.conj())
        mean = projectors.mean(axis=0)
        err = projectors.std(axis=0) / np.sqrt(len(v))
        self.assertTrue(np.all(np.abs(mean - np.eye(2) / 2) <= 5 * err + 1e-12))

    def test_haar_fourth_moment(self):
        v = haar_vectors(self.rng.generator, 2, 100000)
        estimate = McEstimate.from_values(np.abs(v[:, 0]) ** 4, 2024)
        self.assertTrue(estimate.within(1 / 3))

    def test_traceless_direction(self):
        for child in self.rng.split(20):
            xi = random_traceless_direction(5, child)
            self.assertAlmostEqual(xi.trace, 0.0, places=12)
            self.assertAlmostEqual(trace_norm(xi), 1.0, places=10)

    def test_traceless_direction_split(self):
        xi = random_traceless_direction(4, self.rng, split=(1, 3), flat=True)
        values = np.sort(np.linalg.eigvalsh(xi.entries))
        np.testing.assert_allclose(values, [-1 / 6, -1 / 6, -1 / 6, 0.5], atol=1e-12)
        with self.assertRaises(ValidationError):
            random_traceless_direction(1, self.rng)
        with self.assertRaises(ValidationError):
            random_traceless_direction(4, self.rng, split=(3, 3))

    def test_streams_are_reproducible(self):
        a = RandomStream(5).split(3)[2].generator.random(4)
        b = RandomStream(5).split(3)[2].generator.random(4)
        np.testing.assert_array_equal(a, b)

    def test_monte_carlo_independent_of_threads(self):
        def draw(gen, n):
            return gen.standard_normal(n)

        serial = monte_carlo(draw, 1050, 9, Settings(threads=1, chunk_size=100))
        parallel = monte_carlo(draw, 1050, 9, Settings(threads=4, chunk_size=100))
        self.assertEqual(serial.shape, (1050,))
        np.testing.assert_array_equal(serial, parallel)

    def test_require_samples(self):
        with self.assertRaises(SampleSizeError):
            require_samples(10)
        self.assertEqual(require_samples(100), 100)


class TestSettings(unittest.TestCase):
    def setUp(self):
        self.previous = get_settings()

    def tearDown(self):
        set_settings(self.previous)

    def test_defaults(self):
        settings = Settings.from_mapping()
        self.assertEqual(settings.dim_cap, DEFAULT_SETTINGS["dim_cap"])
        self.assertEqual(settings.chunk_size, 8192)

    def test_unknown_key(self):
        with self.assertRaises(ConfigError):
            Settings.from_mapping({"colour": "blue"})

    def test_tolerance_floor(self):
        with self.assertRaises(ConfigError):
            Settings.from_mapping({"povm_tol": 1e-15})

    def test_environment(self):
        with mock.patch.dict(os.environ, {"DISTNORM_THREADS": "0", "DISTNORM_DIM_CAP": "128"}):
            settings = Settings.from_env()
        self.assertEqual(settings.threads, 1)
        self.assertEqual(settings.dim_cap, 128)
        with mock.patch.dict(os.environ, {"DISTNORM_THREADS": "many"}):
            with self.assertRaises(ConfigError):
                Settings.from_env()

    def test_resolve_overlays(self):
        self.assertIs(resolve(None), get_settings())
        self.assertEqual(resolve({"chunk_size": 10}).chunk_size, 10)


finite = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)


@hsettings(max_examples=50, deadline=None)
@given(real=arrays(np.float64, (4, 4), elements=finite), imag=arrays(np.float64, (4, 4), elements=finite))
def test_norm_sandwich(real, imag):
    z = real + 1j * imag
    h = HermitianOp(0.5 * (z + z.conj().T))
    one, two = trace_norm(h), hs_norm(h)
    assert one >= two - 1e-9
    assert two >= one / 2 - 1e-9


@hsettings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_partial_trace_of_product(seed):
    stream = RandomStream(seed)
    a = random_hermitian(2, stream)
    rho_b = random_density(3, stream)
    assert partial_trace(tensor_product(a, rho_b), "B").allclose(a, atol=1e-9)
