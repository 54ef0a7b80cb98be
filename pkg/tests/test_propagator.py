import itertools
import math

import numpy as np
import pytest

from jumpmoments import (
    AccuracyError,
    ChannelSet,
    ConfigurationError,
    InvalidInputError,
    MomentTensor,
    RangeOverflowError,
    build_generator,
    first_second_moments,
    propagate,
    propagate_series,
    validate_generator,
)
from helpers import random_valid_h, rotation_h, squeeze_h


def single_channel(H, rate=1.0, n=1):
    return ChannelSet([(rate, validate_generator(n, H))])


@pytest.fixture
def squeeze_channel():
    return single_channel(squeeze_h(0.5))


class TestChannelSet:
    def test_requires_channels(self):
        with pytest.raises(ConfigurationError):
            ChannelSet([])

    def test_rejects_nonpositive_rate(self):
        gen = validate_generator(1, squeeze_h(0.1))
        with pytest.raises(ConfigurationError):
            ChannelSet([(0.0, gen)])

    def test_rejects_inconsistent_modes(self, rng):
        g1 = validate_generator(1, random_valid_h(rng, 1))
        g2 = validate_generator(2, random_valid_h(rng, 2))
        with pytest.raises(ConfigurationError):
            ChannelSet([(1.0, g1), (1.0, g2)])


class TestBuildGenerator:
    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_zero_generator_any_order(self, M):
        cs = single_channel(np.zeros((2, 2)))
        gen = build_generator(cs, M)
        np.testing.assert_array_equal(gen.dense, np.zeros((2**M, 2**M)))

    def test_rotation_first_order(self):
        cs = single_channel(rotation_h(math.pi / 2))
        gen = build_generator(cs, 1)
        np.testing.assert_allclose(gen.dense, np.diag([-1j - 1, 1j - 1]), atol=1e-14)

    def test_dense_matches_matrix_free(self, squeeze_channel, rng):
        dense = build_generator(squeeze_channel, 2)
        free = build_generator(squeeze_channel, 2, max_dense_dim=1)
        assert dense.is_dense and not free.is_dense
        for _ in range(20):
            v = rng.normal(size=4) + 1j * rng.normal(size=4)
            np.testing.assert_allclose(free.apply(v), dense.apply(v), atol=1e-10)

    def test_commutes_with_slot_permutations(self, rng):
        cs = ChannelSet(
            [
                (1.0, validate_generator(1, squeeze_h(0.3))),
                (0.5, validate_generator(1, rotation_h(0.7))),
            ]
        )
        M = 3
        gen = build_generator(cs, M)
        v = rng.normal(size=2**M) + 1j * rng.normal(size=2**M)
        for sigma in itertools.permutations(range(M)):
            permuted = MomentTensor.from_array(1, M, v).permute_slots(sigma).data
            lhs = gen.apply(permuted)
            rhs = MomentTensor.from_array(1, M, gen.apply(v)).permute_slots(sigma).data
            np.testing.assert_allclose(lhs, rhs, atol=1e-10)


class TestPropagate:
    def test_time_zero_is_identity(self, squeeze_channel):
        gen = build_generator(squeeze_channel, 1)
        mu0 = MomentTensor.from_array(1, 1, [1.0, 1.0])
        assert propagate(gen, mu0, 0.0) is mu0

    def test_rotation_dephasing_closed_form(self):
        cs = single_channel(rotation_h(math.pi))
        gen = build_generator(cs, 1)
        mu0 = MomentTensor.from_array(1, 1, [1.0, 1.0])
        for t in (0.25, 1.0, 2.0):
            expected = np.exp(t * (np.exp(-1j * math.pi) - 1.0))
            out = propagate(gen, mu0, t)
            np.testing.assert_allclose(out.data, [expected, np.conj(expected)], atol=1e-12)
        np.testing.assert_allclose(
            propagate(gen, mu0, 1.0).data[0], math.exp(-2.0), atol=1e-12
        )

    def test_squeeze_eigenvector_closed_form(self, squeeze_channel):
        # (1, 1) is an eigenvector of S with eigenvalue e^{-r}
        gen = build_generator(squeeze_channel, 1)
        mu0 = MomentTensor.from_array(1, 1, [1.0, 1.0])
        expected = math.exp(math.exp(-0.5) - 1.0)
        np.testing.assert_allclose(
            propagate(gen, mu0, 1.0).data, [expected, expected], atol=1e-12
        )

    def test_matrix_free_matches_dense(self, squeeze_channel, rng):
        dense = build_generator(squeeze_channel, 2)
        free = build_generator(squeeze_channel, 2, max_dense_dim=1)
        mu0 = MomentTensor.from_array(1, 2, rng.normal(size=4) + 1j * rng.normal(size=4))
        for t in (0.1, 0.7, 1.9):
            a = propagate(dense, mu0, t).data
            b = propagate(free, mu0, t).data
            np.testing.assert_allclose(b, a, rtol=1e-10, atol=1e-12)

    def test_rejects_nonfinite_moments(self, squeeze_channel):
        gen = build_generator(squeeze_channel, 1)
        with pytest.raises(InvalidInputError):
            propagate(gen, MomentTensor.from_array(1, 1, [np.inf, 0.0]), 1.0)

    def test_rejects_negative_time(self, squeeze_channel):
        gen = build_generator(squeeze_channel, 1)
        mu0 = MomentTensor.from_array(1, 1, [1.0, 1.0])
        with pytest.raises(InvalidInputError):
            propagate(gen, mu0, -0.5)

    def test_overflow_names_time(self):
        cs = single_channel(squeeze_h(5.0))
        gen = build_generator(cs, 1)
        mu0 = MomentTensor.from_array(1, 1, [1.0, 0.0])
        with pytest.raises(RangeOverflowError) as exc:
            propagate(gen, mu0, 6.0)
        assert exc.value.t == 6.0

    def test_zero_generator_fixed_point_exact(self):
        cs = single_channel(np.zeros((2, 2)))
        gen = build_generator(cs, 2)
        mu0 = MomentTensor.from_array(1, 2, [0.3, 1.1, 0.1, 0.25])
        np.testing.assert_array_equal(propagate(gen, mu0, 3.7).data, mu0.data)


class TestPropagateSeries:
    def test_singleton_grid(self, squeeze_channel):
        gen = build_generator(squeeze_channel, 1)
        mu0 = MomentTensor.from_array(1, 1, [1.0, 1.0])
        out = propagate_series(gen, mu0, [0.0])
        assert len(out) == 1
        np.testing.assert_array_equal(out[0].data, mu0.data)

    def test_matches_direct(self, squeeze_channel):
        gen = build_generator(squeeze_channel, 2)
        mu0 = MomentTensor.from_array(1, 2, [0.25, 1.25, 0.25, 0.25])
        series = propagate_series(gen, mu0, [0.0, 0.5, 1.0])
        for t, mu in zip([0.0, 0.5, 1.0], series):
            direct = propagate(gen, mu0, t)
            np.testing.assert_allclose(mu.data, direct.data, rtol=1e-9, atol=1e-12)

    def test_semigroup(self, squeeze_channel, rng):
        gen = build_generator(squeeze_channel, 2)
        mu0 = MomentTensor.from_array(1, 2, rng.normal(size=4) + 1j * rng.normal(size=4))
        for t1, t2 in [(0.3, 0.4), (1.0, 1.0), (0.1, 1.9)]:
            two_step = propagate(gen, propagate(gen, mu0, t1), t2)
            one_step = propagate(gen, mu0, t1 + t2)
            np.testing.assert_allclose(
                two_step.data, one_step.data, rtol=1e-10, atol=1e-12
            )

    def test_rejects_nonincreasing_grid(self, squeeze_channel):
        gen = build_generator(squeeze_channel, 1)
        mu0 = MomentTensor.from_array(1, 1, [1.0, 1.0])
        with pytest.raises(ConfigurationError):
            propagate_series(gen, mu0, [0.0, 1.0, 1.0])

    def test_overflow_reports_earliest_time(self):
        cs = single_channel(squeeze_h(5.0))
        gen = build_generator(cs, 1)
        mu0 = MomentTensor.from_array(1, 1, [1.0, 0.0])
        with pytest.raises(RangeOverflowError) as exc:
            propagate_series(gen, mu0, [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        assert exc.value.t == 5.0


class TestFirstSecondMoments:
    def test_time_zero(self, squeeze_channel):
        mu1 = MomentTensor.from_array(1, 1, [0.5, 0.5])
        mu2 = MomentTensor.from_array(1, 2, [0.25, 1.25, 0.25, 0.25])
        out1, out2 = first_second_moments(squeeze_channel, mu1, mu2, 0.0)
        np.testing.assert_array_equal(out1.data, mu1.data)
        np.testing.assert_array_equal(out2.data, mu2.data)

    def test_coherent_rotation_closed_form(self):
        cs = single_channel(rotation_h(math.pi / 2))
        mu1 = MomentTensor.from_array(1, 1, [0.5, 0.5])
        mu2 = MomentTensor.from_array(1, 2, [0.25, 1.25, 0.25, 0.25])
        out1, _ = first_second_moments(cs, mu1, mu2, 1.0)
        expected = 0.5 * np.exp(np.exp(-1j * math.pi / 2) - 1.0)
        np.testing.assert_allclose(out1.data[0], expected, atol=1e-12)

    def test_agrees_with_generic_propagate(self, rng):
        cs = ChannelSet(
            [
                (0.8, validate_generator(1, random_valid_h(rng, 1))),
                (1.3, validate_generator(1, random_valid_h(rng, 1))),
            ]
        )
        mu1 = MomentTensor.from_array(1, 1, rng.normal(size=2) + 1j * rng.normal(size=2))
        mu2 = MomentTensor.from_array(1, 2, rng.normal(size=4) + 1j * rng.normal(size=4))
        out1, out2 = first_second_moments(cs, mu1, mu2, 0.8)
        gen1 = build_generator(cs, 1)
        gen2 = build_generator(cs, 2)
        np.testing.assert_allclose(
            out1.data, propagate(gen1, mu1, 0.8).data, rtol=1e-12, atol=1e-14
        )
        np.testing.assert_allclose(
            out2.data, propagate(gen2, mu2, 0.8).data, rtol=1e-12, atol=1e-14
        )


class TestStructurePreservation:
    def test_permutation_equivariance(self, rng):
        cs = ChannelSet(
            [
                (1.0, validate_generator(1, squeeze_h(0.3))),
                (1.0, validate_generator(1, rotation_h(0.7))),
            ]
        )
        M = 3
        gen = build_generator(cs, M)
        mu0 = MomentTensor.from_array(
            1, M, rng.normal(size=2**M) + 1j * rng.normal(size=2**M)
        )
        for sigma in itertools.permutations(range(M)):
            lhs = propagate(gen, mu0.permute_slots(sigma), 0.9)
            rhs = propagate(gen, mu0, 0.9).permute_slots(sigma)
            np.testing.assert_allclose(lhs.data, rhs.data, atol=1e-10)

    def test_ccr_and_reality_preserved(self):
        from jumpmoments import coherent_state, first_two_moments as state_moments

        cs = ChannelSet(
            [
                (1.0, validate_generator(1, squeeze_h(0.3))),
                (1.0, validate_generator(1, rotation_h(0.7))),
            ]
        )
        _, mu2 = state_moments(coherent_state([0.4 + 0.2j]))
        assert mu2.ccr_antisymmetry_residual() <= 1e-12
        gen = build_generator(cs, 2)
        for mu in propagate_series(gen, mu2, [0.0, 0.5, 1.0, 2.0]):
            assert mu.ccr_antisymmetry_residual() <= 1e-8
            assert mu.conjugation_reversal_residual() <= 1e-8


class TestSeriesAction:
    def test_accuracy_error_when_terms_capped(self, squeeze_channel):
        gen = build_generator(squeeze_channel, 2, max_dense_dim=1)
        v = np.ones(4, dtype=complex)
        with pytest.raises(AccuracyError, match="achieved"):
            gen.expm_action(v, 0.9, max_terms=2)
