import numpy as np
import pytest
import scipy.linalg

from weaknoise import linalg
from weaknoise.channels import ChannelSpec, build_channel
from weaknoise.errors import DimMismatch, RateOutOfRange
from weaknoise.lindblad import (
    DiscretizedProbe,
    build_liouvillian,
    commutator_norm,
    dissipator,
    error_sweep,
    factorization_error,
    joint_state,
    postselected_probe_mean,
    propagate,
    sweep_to_csv,
    unvec,
    validity_margins,
    vec,
)

import oracles

LOWER = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|, decays towards |0>
SMALL = DiscretizedProbe(points=8, half_width=6.0)
GRID32 = DiscretizedProbe(points=32, half_width=10.0)


def random_joint_state(dim, rng):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


class TestProbe:
    @pytest.mark.parametrize("n", [3, 12, 1])
    def test_power_of_two(self, n):
        with pytest.raises(ValueError):
            DiscretizedProbe(points=n)

    def test_grid(self):
        p = DiscretizedProbe(points=16, half_width=4.0)
        assert p.positions[0] == -4.0
        assert p.spacing == pytest.approx(0.5)
        assert p.positions.size == 16

    def test_momentum_hermitian_and_unitary_fourier(self):
        p = GRID32
        w = p.fourier
        assert np.allclose(w @ w.conj().T, np.eye(32), atol=1e-12)
        assert np.allclose(p.momentum, p.momentum.conj().T, atol=1e-12)

    def test_momentum_generates_translation(self):
        # exp(-i s P) shifts a band-limited pointer by s on the periodic grid
        p = DiscretizedProbe(points=64, half_width=12.0)
        s = 3 * p.spacing
        shifted = scipy.linalg.expm(-1j * s * p.momentum) @ p.gaussian()
        assert np.allclose(shifted, np.roll(p.gaussian(), 3), atol=1e-8)

    def test_gaussian_normalized(self):
        assert np.linalg.norm(GRID32.gaussian()) == pytest.approx(1.0)


class TestBuild:
    def test_rate_out_of_range(self):
        with pytest.raises(RateOutOfRange):
            build_liouvillian(linalg.X, SMALL, [(LOWER, 1.5)], 0.1, 0.1)
        with pytest.raises(RateOutOfRange):
            build_liouvillian(linalg.X, SMALL, [(LOWER, 0.0)], 0.1, 0.1)
        with pytest.raises(RateOutOfRange):
            build_liouvillian(linalg.X, SMALL, [(LOWER, 0.5)], 0.1, 0.1)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            build_liouvillian(linalg.X, SMALL, [(np.eye(3), 1)], 0.1, 0.1)

    def test_negative_strength(self):
        with pytest.raises(ValueError):
            build_liouvillian(linalg.X, SMALL, [(LOWER, 1)], -0.1, 0.1)

    def test_system_dissipator_matches_channel_action(self, rng):
        rho = oracles.random_density(rng)
        d = dissipator([(LOWER, 1.0)])
        expected = LOWER @ rho @ LOWER.conj().T - 0.5 * (LOWER.conj().T @ LOWER @ rho + rho @ LOWER.conj().T @ LOWER)
        assert np.allclose(unvec(d @ vec(rho)), expected)

    def test_identity_is_left_null_vector(self):
        lv = build_liouvillian(linalg.X, SMALL, [(LOWER, 1.0), (linalg.Z, 0.5)], 0.3, 0.2)
        ident = vec(np.eye(lv.joint_dim))
        assert np.abs(ident.conj() @ lv.hamiltonian_part).max() <= 1e-12
        assert np.abs(ident.conj() @ lv.dissipator_part).max() <= 1e-12

    def test_block_basis_round_trip(self, rng):
        lv = build_liouvillian(linalg.X, SMALL, [(LOWER, 1)], 0.1, 0.1)
        rho = random_joint_state(lv.joint_dim, rng)
        assert np.allclose(lv.from_blocks(lv.to_blocks(rho)), rho, atol=1e-13)


class TestPropagate:
    def test_blocks_match_dense(self, rng):
        lv = build_liouvillian(linalg.X, SMALL, [(LOWER, 1.0), (linalg.Z, 0.3)], 0.7, 0.4)
        v = vec(random_joint_state(lv.joint_dim, rng))
        assert np.allclose(propagate(lv, v, 1.3), propagate(lv, v, 1.3, method="dense"), atol=1e-12)

    def test_blocks_match_krylov(self):
        lv = build_liouvillian(linalg.X, GRID32, [(LOWER, 1.0)], 0.5, 0.5)
        v = vec(joint_state(linalg.projector(linalg.NAMED_KETS["plus"]), GRID32))
        assert np.allclose(propagate(lv, v, 1.0), propagate(lv, v, 1.0, method="krylov"), atol=1e-10)

    def test_noiseless_is_unitary_coupling(self, rng):
        a = oracles.random_hermitian(rng)
        lv = build_liouvillian(a, SMALL, [(LOWER, 1.0)], 0.8, 0.0)
        rho = random_joint_state(lv.joint_dim, rng)
        u = scipy.linalg.expm(-1j * 0.8 * 1.5 * np.kron(a, SMALL.momentum))
        assert np.allclose(unvec(propagate(lv, vec(rho), 1.5)), u @ rho @ u.conj().T, atol=1e-11)

    def test_z_dephasing_decay(self):
        lv = build_liouvillian(linalg.Z, SMALL, [(linalg.Z, 1.0)], 0.0, 0.3)
        rho = joint_state(linalg.projector(linalg.NAMED_KETS["plus"]), SMALL)
        out = unvec(propagate(lv, vec(rho), 2.0)).reshape(2, 8, 2, 8)
        coherence = np.trace(out[0, :, 1, :])
        assert coherence == pytest.approx(0.5 * np.exp(-2 * 0.3 * 2.0), abs=1e-12)

    def test_trace_preserved(self, rng):
        lv = build_liouvillian(linalg.Y, SMALL, [(LOWER, 1.0)], 0.4, 0.6)
        v = vec(random_joint_state(lv.joint_dim, rng))
        for _ in range(10):
            v = propagate(lv, v, 0.1)
            assert np.trace(unvec(v)) == pytest.approx(1.0, abs=1e-12)

    def test_zero_time_is_identity(self, rng):
        lv = build_liouvillian(linalg.X, SMALL, [(LOWER, 1)], 0.3, 0.2)
        v = vec(random_joint_state(lv.joint_dim, rng))
        assert np.allclose(propagate(lv, v, 0.0), v, atol=1e-14)

    def test_negative_time(self):
        lv = build_liouvillian(linalg.X, SMALL, [(LOWER, 1)], 0.1, 0.1)
        with pytest.raises(ValueError):
            propagate(lv, vec(np.eye(lv.joint_dim) / lv.joint_dim), -1.0)


class TestFactorization:
    def test_blocks_match_dense(self):
        lv = build_liouvillian(linalg.X, SMALL, [(LOWER, 1.0)], 0.2, 0.15)
        err_b, pred_b = factorization_error(lv, method="blocks")
        err_d, pred_d = factorization_error(lv, method="dense")
        assert err_b == pytest.approx(err_d, rel=1e-8)
        assert pred_b == pred_d

    def test_commuting_case(self):
        lv = build_liouvillian(linalg.Z, GRID32, [(linalg.Z, 1.0)], 0.2, 0.2)
        err, _ = factorization_error(lv)
        assert err <= 1e-8
        assert commutator_norm(lv) <= 1e-12
        assert validity_margins(lv) == (float("inf"), float("inf"))

    def test_noiseless_split_is_exact(self):
        lv = build_liouvillian(linalg.X, GRID32, [(LOWER, 1.0)], 0.2, 0.0)
        assert factorization_error(lv)[0] <= 1e-13

    def test_second_order_scaling(self):
        big = build_liouvillian(linalg.X, GRID32, [(LOWER, 1.0)], 0.02, 0.02)
        small = build_liouvillian(linalg.X, GRID32, [(LOWER, 1.0)], 0.01, 0.01)
        ratio = factorization_error(small)[0] / factorization_error(big)[0]
        assert ratio == pytest.approx(0.25, rel=0.02)

    def test_prediction_leading_term(self):
        lv = build_liouvillian(linalg.X, GRID32, [(LOWER, 1.0)], 0.01, 0.01)
        err, pred = factorization_error(lv)
        assert err == pytest.approx(pred, rel=0.05)

    def test_parameter_limit(self):
        lv = build_liouvillian(linalg.X, SMALL, [(LOWER, 1.0)], 0.5, 0.1)
        with pytest.raises(ValueError):
            factorization_error(lv)

    def test_margin_scaling(self):
        # doubling the dissipator (L -> sqrt(2) L) leaves the coupling bound
        # and halves the noise bound, since the commutator doubles as well
        one = build_liouvillian(linalg.X, SMALL, [(LOWER, 1.0)], 0.1, 0.1)
        two = build_liouvillian(linalg.X, SMALL, [(np.sqrt(2) * LOWER, 1.0)], 0.1, 0.1)
        g1, c1 = validity_margins(one)
        g2, c2 = validity_margins(two)
        assert g2 == pytest.approx(g1, rel=1e-10)
        assert c2 == pytest.approx(c1 / 2, rel=1e-10)

    def test_margins_finite_for_generic_input(self, rng):
        lv = build_liouvillian(oracles.random_hermitian(rng), SMALL, [(LOWER, 1.0), (linalg.Z, 0.4)], 0.1, 0.1)
        g, c = validity_margins(lv)
        assert 0 < g < np.inf and 0 < c < np.inf

    def test_margins_from_sparse_norms(self):
        lv = build_liouvillian(linalg.X, SMALL, [(LOWER, 1.0)], 0.1, 0.1)
        lh, ll = lv.hamiltonian_part.toarray(), lv.dissipator_part.toarray()
        c = np.linalg.norm(ll @ lh - lh @ ll, 2)
        g, gam = validity_margins(lv)
        assert g == pytest.approx(2 * np.linalg.norm(ll, 2) / c, rel=1e-8)
        assert gam == pytest.approx(2 * np.linalg.norm(lh, 2) / c, rel=1e-8)


class TestProbeMean:
    def test_factorized_matches_channel_then_coupling(self, rng):
        a = oracles.random_hermitian(rng)
        g, c, t = 0.2, 0.3, 1.0
        lv = build_liouvillian(a, GRID32, [(LOWER, 1.0)], g, c)
        pre, post = linalg.projector(linalg.ket(0.6, 0.8j)), linalg.NAMED_KETS["plus"]
        mean, prob = postselected_probe_mean(lv, pre, post, t, factorized=True)

        # independent route: amplitude damping with gamma = 1 - exp(-c t), then the unitary coupling
        noisy = build_channel(ChannelSpec.amplitude_damping(), 1 - np.exp(-c * t))(pre)
        u = scipy.linalg.expm(-1j * g * t * np.kron(a, GRID32.momentum))
        rho = u @ joint_state(noisy, GRID32) @ u.conj().T
        proj = np.kron(post.conj()[None, :], np.eye(32))
        probe = proj @ rho @ proj.conj().T
        assert prob == pytest.approx(np.trace(probe).real, abs=1e-12)
        assert mean == pytest.approx(np.real(GRID32.positions @ np.diag(probe)) / prob, abs=1e-10)

    def test_gap_is_bilinear(self):
        # (full - factorized) / (g gamma t^2) settles to a constant
        pre, post = linalg.projector(linalg.NAMED_KETS["plus"]), linalg.ket(1, 0.3)
        consts = []
        for p in (0.02, 0.01, 0.005):
            lv = build_liouvillian(linalg.X, GRID32, [(LOWER, 1.0)], p, p)
            full, _ = postselected_probe_mean(lv, pre, post)
            split, _ = postselected_probe_mean(lv, pre, post, factorized=True)
            consts.append((full - split) / p**2)
        assert consts[1] == pytest.approx(consts[0], rel=0.02)
        assert consts[2] == pytest.approx(consts[1], rel=0.02)

    def test_full_vs_factorized_close_for_small_noise(self):
        lv = build_liouvillian(linalg.X, GRID32, [(LOWER, 1.0)], 0.05, 0.01)
        pre, post = linalg.projector(linalg.NAMED_KETS["plus"]), linalg.ket(1, 0.3)
        full, _ = postselected_probe_mean(lv, pre, post)
        split, _ = postselected_probe_mean(lv, pre, post, factorized=True)
        assert abs(full - split) <= 1e-3


class TestSweep:
    def test_csv(self, tmp_path):
        rows = error_sweep(linalg.X, SMALL, [(LOWER, 1.0)], [(0.01, 0.01), (0.02, 0.02)])
        text = sweep_to_csv(rows, tmp_path / "s.csv")
        lines = text.splitlines()
        assert lines[0] == "g_t,gamma_t,error,predicted"
        assert len(lines) == 3
        assert (tmp_path / "s.csv").read_text() == text
