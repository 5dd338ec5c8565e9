import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weaknoise import linalg
from weaknoise.channels import (
    ChannelSpec,
    amplitude_damping_generator,
    analytic_generator,
    apply_channel,
    build_channel,
    channel_derivative_at_zero,
    channel_generator,
    check_trace_preserving,
    check_unital,
    compose_channels,
    kraus_channel,
)
from weaknoise.errors import DimMismatch, GammaOutOfRange, InvalidSpec, StepTooLarge

import oracles

AD = ChannelSpec.amplitude_damping()
PD = ChannelSpec.phase_damping()

ALL_SPECS = [
    ChannelSpec.pauli(z=1),
    ChannelSpec.pauli(0.2, 0.3, 0.5),
    AD,
    PD,
    ChannelSpec.prob_unitary(linalg.HADAMARD),
    ChannelSpec.mixed_unitary(linalg.haar_unitaries(2, 3, 1), [0.2, 0.3, 0.5]),
    ChannelSpec.adpd(),
]

gammas = st.floats(0.0, 1.0)


class TestChannelSpec:
    def test_pauli_weights_must_sum_to_one(self):
        with pytest.raises(InvalidSpec):
            ChannelSpec.pauli(0.5, 0.4, 0.0)

    def test_pauli_weights_nonnegative(self):
        with pytest.raises(InvalidSpec):
            ChannelSpec.pauli(1.5, -0.5, 0.0)

    def test_prob_unitary_requires_unitary(self):
        with pytest.raises(InvalidSpec):
            ChannelSpec.prob_unitary(np.diag([1.0, 0.5]))

    def test_composed_negative_weight(self):
        with pytest.raises(InvalidSpec):
            ChannelSpec.composed([(AD, -0.1)])

    def test_unknown_kind(self):
        with pytest.raises(InvalidSpec):
            ChannelSpec("depolarizing_plus")

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind)
    def test_dict_roundtrip(self, spec, rng):
        again = ChannelSpec.from_dict(spec.to_dict())
        rho = oracles.random_density(rng)
        assert np.allclose(build_channel(spec, 0.3)(rho), build_channel(again, 0.3)(rho), atol=1e-14)


class TestBuildChannel:
    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind)
    def test_gamma_zero_is_identity(self, spec, rng):
        rho = oracles.random_density(rng)
        assert np.abs(build_channel(spec, 0.0)(rho) - rho).max() <= 1e-12

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind)
    @given(g=gammas)
    def test_trace_preserving(self, spec, g):
        assert check_trace_preserving(build_channel(spec, g))

    @pytest.mark.parametrize("g", [-0.1, 1.1, float("nan")])
    def test_gamma_out_of_range(self, g):
        with pytest.raises(GammaOutOfRange):
            build_channel(AD, g)

    def test_pauli_kraus_set(self):
        c = build_channel(ChannelSpec.pauli(0.25, 0.0, 0.75), 0.4)
        assert len(c.kraus_ops) == 3
        assert np.allclose(c.kraus_ops[0], np.sqrt(0.6) * np.eye(2))
        assert np.allclose(c.kraus_ops[1], np.sqrt(0.1) * linalg.X)
        assert np.allclose(c.kraus_ops[2], np.sqrt(0.3) * linalg.Z)

    @given(g=gammas, seed=st.integers(0, 10_000))
    def test_amplitude_damping_matrix(self, g, seed):
        rho = oracles.random_density(np.random.default_rng(seed))
        assert np.allclose(build_channel(AD, g)(rho), oracles.amplitude_damping_explicit(rho, g), atol=1e-14)

    @given(g=gammas, seed=st.integers(0, 10_000))
    def test_phase_damping_matrix(self, g, seed):
        rho = oracles.random_density(np.random.default_rng(seed))
        assert np.allclose(build_channel(PD, g)(rho), oracles.phase_damping_explicit(rho, g), atol=1e-14)

    def test_full_damping_resets(self, rng):
        rho = oracles.random_density(rng)
        assert np.allclose(build_channel(AD, 1.0)(rho), np.diag([1, 0]), atol=1e-15)

    def test_composed_uses_scaled_parameters(self, rng):
        rho = oracles.random_density(rng)
        spec = ChannelSpec.composed([(AD, 0.3), (PD, 0.8)])
        expected = oracles.phase_damping_explicit(oracles.amplitude_damping_explicit(rho, 0.3 * 0.5), 0.8 * 0.5)
        assert np.allclose(build_channel(spec, 0.5)(rho), expected, atol=1e-14)

    def test_mixed_unitary_action(self, rng):
        us = linalg.haar_unitaries(2, 2, 9)
        rho = oracles.random_density(rng)
        out = build_channel(ChannelSpec.mixed_unitary(us, [0.25, 0.75]), 0.4)(rho)
        expected = 0.6 * rho + 0.4 * (0.25 * us[0] @ rho @ us[0].conj().T + 0.75 * us[1] @ rho @ us[1].conj().T)
        assert np.allclose(out, expected, atol=1e-14)


class TestApplyChannel:
    def test_identity(self, rng):
        rho = oracles.random_density(rng)
        assert np.allclose(apply_channel(build_channel(AD, 0.0), rho), rho)

    def test_bit_flip_half(self):
        out = apply_channel(build_channel(ChannelSpec.pauli(x=1), 0.5), np.diag([1.0, 0.0]))
        assert np.allclose(out, np.eye(2) / 2, atol=1e-15)

    @given(g=gammas, r=st.floats(0, 1))
    def test_dephasing_fixes_diagonal(self, g, r):
        rho = np.diag([r, 1 - r])
        assert np.allclose(apply_channel(build_channel(PD, g), rho), rho, atol=1e-15)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            apply_channel(build_channel(AD, 0.1), np.eye(3) / 3)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind)
    def test_outputs_are_states(self, spec):
        for seed in range(30):
            rng = np.random.default_rng(seed)
            apply_channel(build_channel(spec, rng.random()), linalg.random_state(2, "mixed", seed))


class TestCompose:
    def test_identity_composition(self):
        c = compose_channels(build_channel(AD, 0), build_channel(PD, 0))
        assert check_trace_preserving(c)
        assert np.allclose(c(np.diag([0.3, 0.7])), np.diag([0.3, 0.7]))

    def test_matches_sequential(self, rng):
        rho = oracles.random_density(rng)
        inner, outer = build_channel(AD, 0.2), build_channel(PD, 0.35)
        assert np.abs(compose_channels(inner, outer)(rho) - outer(inner(rho))).max() <= 1e-12
        assert check_trace_preserving(compose_channels(inner, outer), 1e-10)

    def test_damping_channels_commute(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            rho = oracles.random_density(rng)
            g1, g2 = rng.random(2)
            ad, pd = build_channel(AD, g1), build_channel(PD, g2)
            diff = compose_channels(ad, pd)(rho) - compose_channels(pd, ad)(rho)
            assert np.abs(diff).max() <= 1e-10

    def test_dim_mismatch(self):
        c3 = kraus_channel([np.eye(3)])
        with pytest.raises(DimMismatch):
            compose_channels(build_channel(AD, 0.1), c3)


class TestChecks:
    @given(seed=st.integers(0, 10_000), g=gammas)
    def test_pauli_unital(self, seed, g):
        w = oracles.pauli_weights(np.random.default_rng(seed))
        assert check_unital(build_channel(ChannelSpec.pauli(**w), g))

    def test_amplitude_damping_not_unital(self):
        c = build_channel(AD, 0.3)
        assert np.allclose(c(np.eye(2) / 2), np.diag([0.65, 0.35]))
        assert not check_unital(c)

    def test_prob_unitary_unital(self):
        assert check_unital(build_channel(ChannelSpec.prob_unitary(linalg.haar_unitary(2, 1)), 0.7))

    def test_scaled_identity_not_trace_preserving(self):
        assert not check_trace_preserving(kraus_channel([0.5 * np.eye(2)]))

    def test_truncated_damping_not_trace_preserving(self):
        assert not check_trace_preserving(kraus_channel(build_channel(AD, 0.4).kraus_ops[:1]))


class TestDerivative:
    def test_amplitude_damping_closed_form(self):
        for seed in range(100):
            rho = linalg.random_state(2, "mixed", seed)
            got = channel_derivative_at_zero(AD, rho)
            r = rho
            expected = np.array([[r[1, 1], -r[0, 1] / 2], [-r[1, 0] / 2, -r[1, 1]]])
            assert np.abs(got - expected).max() <= 1e-8

    def test_pauli_is_exact(self, rng):
        rho = oracles.random_density(rng)
        got = channel_derivative_at_zero(ChannelSpec.pauli(z=1), rho)
        assert np.array_equal(got, linalg.Z @ rho @ linalg.Z - rho)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind)
    def test_traceless_and_hermitian(self, spec, rng):
        rho = oracles.random_density(rng)
        m = channel_derivative_at_zero(spec, rho)
        assert abs(np.trace(m)) <= 1e-8
        assert np.abs(m - m.conj().T).max() <= 1e-8

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind)
    def test_numeric_matches_closed_form(self, spec, rng):
        rho = oracles.random_density(rng)
        assert np.abs(channel_derivative_at_zero(spec, rho) - analytic_generator(spec, rho)).max() <= 1e-8

    @pytest.mark.parametrize("h", [0.0, -1e-4, 0.02])
    def test_step_bounds(self, h):
        with pytest.raises(StepTooLarge):
            channel_derivative_at_zero(AD, np.eye(2) / 2, h)

    def test_generator_vanishes_only_at_ground_state(self):
        ground = np.diag([1.0, 0.0])
        assert np.linalg.norm(amplitude_damping_generator(ground)) <= 1e-10
        assert np.linalg.norm(channel_derivative_at_zero(AD, ground)) <= 1e-10

    def test_generator_superoperator(self, rng):
        gen = channel_generator(ChannelSpec.adpd())
        rho = oracles.random_density(rng)
        assert np.allclose(gen(rho), analytic_generator(ChannelSpec.adpd(), rho), atol=1e-8)
        assert gen.dim == 2
