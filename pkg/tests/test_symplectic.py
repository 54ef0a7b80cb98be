import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from jumpmoments import (
    CapacityError,
    ConditioningError,
    DimensionError,
    IndexScheme,
    InvalidInputError,
    SymmetryViolationError,
    TildeViolationError,
    apply_kron,
    build_struct_matrices,
    kron_power,
    mat_exp,
    tilde_mat,
    tilde_vec,
    validate_generator,
)
from helpers import random_valid_h, rotation_h, squeeze_h, taylor_expm

finite_complex = st.complex_numbers(
    max_magnitude=10.0, allow_nan=False, allow_infinity=False
)


class TestStructMatrices:
    def test_n1_exact(self):
        sm = build_struct_matrices(1)
        np.testing.assert_array_equal(sm.J, np.array([[0, -1], [1, 0]]))
        np.testing.assert_array_equal(sm.E, np.array([[0, 1], [1, 0]]))

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_identities(self, n):
        sm = build_struct_matrices(n)
        eye = np.eye(2 * n)
        np.testing.assert_array_equal(sm.J @ sm.J, -eye)
        np.testing.assert_array_equal(sm.E @ sm.E, eye)
        np.testing.assert_array_equal(sm.E @ sm.J @ sm.E, -sm.J)

    def test_invalid_mode_count(self):
        with pytest.raises(DimensionError):
            build_struct_matrices(0)


class TestTilde:
    def test_real_basis_swap(self):
        np.testing.assert_array_equal(tilde_vec([1.0, 0.0]), [0.0, 1.0])

    def test_conjugate_then_swap(self):
        np.testing.assert_array_equal(tilde_vec([1j, 0.0]), [0.0, -1j])

    def test_vector_involution(self):
        g = np.array([2 + 1j, 3 - 4j])
        np.testing.assert_array_equal(tilde_vec(tilde_vec(g)), g)

    def test_wrong_length(self):
        with pytest.raises(DimensionError):
            tilde_vec([1.0, 2.0, 3.0])

    def test_matrix_fixed_point(self):
        K = np.diag([1j, -1j])
        np.testing.assert_array_equal(tilde_mat(K), K)

    def test_matrix_violation_witness(self):
        K = np.diag([1j, 1j])
        np.testing.assert_array_equal(tilde_mat(K), np.diag([-1j, -1j]))

    def test_tilde_of_j(self):
        J = build_struct_matrices(1).J
        np.testing.assert_array_equal(tilde_mat(J), -J)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.complex128, (4,), elements=finite_complex))
    def test_involution_property(self, g):
        np.testing.assert_allclose(tilde_vec(tilde_vec(g)), g, atol=0)

    @settings(max_examples=50, deadline=None)
    @given(
        arrays(np.complex128, (4, 4), elements=finite_complex),
        arrays(np.complex128, (4, 4), elements=finite_complex),
    )
    def test_homomorphism(self, A, B):
        scale = max(1.0, np.abs(A).max() * np.abs(B).max())
        dev = np.abs(tilde_mat(A @ B) - tilde_mat(A) @ tilde_mat(B)).max()
        assert dev <= 1e-12 * scale

    def test_matrix_involution(self, rng):
        K = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        np.testing.assert_array_equal(tilde_mat(tilde_mat(K)), K)


class TestMatExp:
    def test_zero_is_identity(self):
        np.testing.assert_array_equal(mat_exp(np.zeros((2, 2))), np.eye(2))

    def test_closed_form_hyperbolic(self):
        A = np.array([[0.0, -0.5], [-0.5, 0.0]])
        expected = np.array(
            [[math.cosh(0.5), -math.sinh(0.5)], [-math.sinh(0.5), math.cosh(0.5)]]
        )
        np.testing.assert_allclose(mat_exp(A), expected, atol=1e-14)
        np.testing.assert_allclose(mat_exp(A) @ mat_exp(-A), np.eye(2), atol=1e-14)

    def test_against_series(self, rng):
        A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        A *= 2.0 / np.abs(np.linalg.eigvals(A)).max()
        np.testing.assert_allclose(mat_exp(A), taylor_expm(A, 40), atol=1e-10)

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidInputError):
            mat_exp([[np.inf, 0.0], [0.0, 0.0]])

    def test_nonsquare_rejected(self):
        with pytest.raises(DimensionError):
            mat_exp(np.zeros((2, 3)))


class TestKronPower:
    def test_diagonal_square(self):
        A = np.diag([-1j, 1j])
        np.testing.assert_allclose(kron_power(A, 2), np.diag([-1, 1, 1, -1]), atol=0)

    def test_identity(self):
        np.testing.assert_array_equal(kron_power(np.eye(2), 3), np.eye(8))

    def test_power_one(self, rng):
        A = rng.normal(size=(3, 3)) + 0j
        np.testing.assert_array_equal(kron_power(A, 1), A)

    def test_mixed_product(self, rng):
        A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        B = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        lhs = kron_power(A, 2) @ kron_power(B, 2)
        rhs = kron_power(A @ B, 2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_budget(self):
        with pytest.raises(CapacityError, match="matrix-free"):
            kron_power(np.eye(4), 3, max_dim=32)

    def test_apply_kron_matches_dense(self, rng):
        A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        np.testing.assert_allclose(apply_kron(A, v, 3), kron_power(A, 3) @ v, atol=1e-12)


class TestIndexScheme:
    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=1, max_value=3), st.integers(min_value=1, max_value=4), st.data())
    def test_flat_multi_bijection(self, n, M, data):
        scheme = IndexScheme(n, M)
        flat = data.draw(st.integers(min_value=0, max_value=scheme.size - 1))
        assert scheme.flat(scheme.multi(flat)) == flat

    def test_leftmost_most_significant(self):
        scheme = IndexScheme(1, 2)
        assert scheme.flat((1, 0)) == 2
        assert scheme.multi(1) == (0, 1)

    def test_labels(self):
        scheme = IndexScheme(1, 2)
        assert scheme.labels() == ["a1.a1", "a1.a1+", "a1+.a1", "a1+.a1+"]
        assert IndexScheme(2, 1).labels() == ["a1", "a2", "a1+", "a2+"]

    def test_conjugation_reversal_is_involution(self):
        scheme = IndexScheme(2, 3)
        perm = scheme.conjugation_reversal_permutation()
        np.testing.assert_array_equal(perm[perm], np.arange(scheme.size))

    def test_out_of_range(self):
        scheme = IndexScheme(1, 2)
        with pytest.raises(DimensionError):
            scheme.flat((0, 2))
        with pytest.raises(DimensionError):
            scheme.multi(4)


class TestValidateGenerator:
    def test_squeeze_closed_form(self):
        gen = validate_generator(1, squeeze_h(0.5))
        c, s = math.cosh(0.5), math.sinh(0.5)
        np.testing.assert_allclose(gen.S, [[c, -s], [-s, c]], atol=1e-14)

    def test_squeeze_against_series(self):
        H = squeeze_h(0.5)
        J = build_struct_matrices(1).J
        gen = validate_generator(1, H)
        np.testing.assert_allclose(gen.S, taylor_expm(1j * J @ H, 30), atol=1e-13)

    def test_rotation_diagonal(self):
        gen = validate_generator(1, rotation_h(math.pi / 2))
        np.testing.assert_allclose(gen.S, np.diag([-1j, 1j]), atol=1e-14)

    def test_zero_generator(self):
        gen = validate_generator(1, np.zeros((2, 2)))
        np.testing.assert_array_equal(gen.S, np.eye(2))

    def test_tilde_violation(self):
        with pytest.raises(TildeViolationError):
            validate_generator(1, np.diag([1j, 1j]))

    def test_symmetry_violation_names_entry(self):
        H = np.array([[0.0, 1.0], [2.0, 0.0]], dtype=complex)
        with pytest.raises(SymmetryViolationError, match=r"H\[[01],[01]\]"):
            validate_generator(1, H)

    def test_wrong_shape(self):
        with pytest.raises(DimensionError):
            validate_generator(2, np.zeros((2, 2)))

    def test_nonfinite(self):
        with pytest.raises(InvalidInputError):
            validate_generator(1, [[np.nan, 0.0], [0.0, 0.0]])

    def test_conditioning_error_for_huge_generator(self):
        # exp(iJH) for a very large squeeze loses symplecticity to rounding
        with pytest.raises(ConditioningError):
            validate_generator(1, squeeze_h(14.0))

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_structure_of_random_generators(self, n, rng):
        sm = build_struct_matrices(n)
        for _ in range(20):
            H = random_valid_h(rng, n, scale=2.0)
            gen = validate_generator(n, H)
            assert np.abs(gen.S.T @ sm.J @ gen.S - sm.J).max() <= 1e-10
            assert np.abs(tilde_mat(gen.S) - gen.S).max() <= 1e-10
