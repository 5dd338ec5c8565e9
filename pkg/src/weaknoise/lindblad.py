"""Coupled system + probe master equation on a discretized probe.

The joint generator is ``g H_part + gamma D_part`` acting on column-stacked
density matrices of the ``d * N`` dimensional joint space, with
``H = A (x) P`` and a dissipator acting on the system factor only.

Because ``P`` is diagonal in the discrete Fourier basis and the dissipator
does not touch the probe, the joint superoperator is block diagonal in that
basis: the block for probe momenta ``(k, k')`` is the ``d**2 x d**2`` matrix

    S_kk' = -i g (k I (x) A - k' A^T (x) I) + gamma D_sys

Exponentials, products and spectral norms are therefore computed block by
block, which is exact (the change of basis is unitary).  The full sparse
superoperators are still available for small grids and for cross-checks.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from . import linalg
from .errors import DimMismatch, RateOutOfRange

MAX_FACTORIZATION_PARAM = 0.3
DENSE_LIMIT = 1024  # largest superoperator side for the dense route


@dataclass(frozen=True)
class DiscretizedProbe:
    """Periodic position grid ``q_j = -L + j 2L/N`` for the probe.

    ``spread`` is the width ``Delta`` of the initial Gaussian pointer.
    """

    points: int = 32
    half_width: float = 10.0
    spread: float = 1.0

    def __post_init__(self):
        n = self.points
        if n < 2 or n & (n - 1):
            raise ValueError(f"points must be a power of two >= 2, got {n}")
        if not self.half_width > 0 or not self.spread > 0:
            raise ValueError("half_width and spread must be positive")

    @property
    def spacing(self) -> float:
        return 2 * self.half_width / self.points

    @property
    def positions(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.points)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    @property
    def fourier(self) -> np.ndarray:
        """Unitary DFT matrix mapping position amplitudes to momentum amplitudes."""
        return np.fft.fft(np.eye(self.points), norm="ortho")

    @property
    def momentum(self) -> np.ndarray:
        w = self.fourier
        return w.conj().T @ (self.wavenumbers[:, None] * w)

    def gaussian(self) -> np.ndarray:
        """Initial pointer amplitudes, centred at zero, unit-normalized on the grid."""
        q = self.positions
        psi = np.exp(-(q**2) / (4 * self.spread**2)).astype(complex)
        return psi / np.linalg.norm(psi)


def dissipator(ops_with_rates) -> np.ndarray:
    """Column-stacking dissipator ``sum_k r_k D[L_k]`` on the system alone."""
    out = None
    for op, rate in ops_with_rates:
        op = np.asarray(op, dtype=complex)
        d = op.shape[0]
        eye = np.eye(d)
        ldl = op.conj().T @ op
        term = rate * (np.kron(op.conj(), op) - 0.5 * np.kron(eye, ldl) - 0.5 * np.kron(ldl.T, eye))
        out = term if out is None else out + term
    return out


def hamiltonian_superoperator(h) -> sp.csr_matrix:
    """``-i (I (x) H - H^T (x) I)`` as a sparse matrix."""
    h = sp.csr_matrix(h)
    eye = sp.identity(h.shape[0], format="csr")
    return (-1j * (sp.kron(eye, h) - sp.kron(h.T, eye))).tocsr()


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Joint generator ``g_tilde * L_H + gamma_tilde * L_L``.

    ``L_H`` and ``L_L`` are the unit-strength parts.  The ``*_blocks``
    attributes hold their momentum-basis blocks with shape
    ``(N, N, d**2, d**2)``; ``hamiltonian_part``, ``dissipator_part`` and
    ``matrix`` build the full sparse superoperators on demand.
    """

    a: np.ndarray
    probe: DiscretizedProbe
    lindblad_ops: tuple
    g_tilde: float
    gamma_tilde: float
    system_dissipator: np.ndarray

    @property
    def system_dim(self) -> int:
        return self.a.shape[0]

    @property
    def joint_dim(self) -> int:
        return self.system_dim * self.probe.points

    @property
    def dim(self) -> int:
        return self.joint_dim**2

    # -- block form --------------------------------------------------------
    @cached_property
    def hamiltonian_blocks(self) -> np.ndarray:
        d = self.system_dim
        k = self.probe.wavenumbers
        left = np.kron(np.eye(d), self.a)
        right = np.kron(self.a.T, np.eye(d))
        return -1j * (k[:, None, None, None] * left - k[None, :, None, None] * right)

    @cached_property
    def dissipator_blocks(self) -> np.ndarray:
        n = self.probe.points
        return np.broadcast_to(self.system_dissipator, (n, n) + self.system_dissipator.shape)

    def blocks(self, g_tilde: float | None = None, gamma_tilde: float | None = None) -> np.ndarray:
        g = self.g_tilde if g_tilde is None else g_tilde
        c = self.gamma_tilde if gamma_tilde is None else gamma_tilde
        return g * self.hamiltonian_blocks + c * self.dissipator_blocks

    @cached_property
    def commutator_blocks(self) -> np.ndarray:
        """Blocks of ``[L_L, L_H]``."""
        h, l = self.hamiltonian_blocks, self.dissipator_blocks
        return l @ h - h @ l

    # -- full sparse form ----------------------------------------------------
    @cached_property
    def hamiltonian_part(self) -> sp.csr_matrix:
        return hamiltonian_superoperator(np.kron(self.a, self.probe.momentum))

    @cached_property
    def dissipator_part(self) -> sp.csr_matrix:
        n = self.probe.points
        total = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        eye = sp.identity(self.joint_dim, format="csr")
        for op, rate in self.lindblad_ops:
            full = sp.kron(sp.csr_matrix(op), sp.identity(n), format="csr")
            ldl = (full.conj().T @ full).tocsr()
            total = total + rate * (
                sp.kron(full.conj(), full) - 0.5 * sp.kron(eye, ldl) - 0.5 * sp.kron(ldl.T, eye)
            )
        return total.tocsr()

    @property
    def matrix(self) -> sp.csr_matrix:
        return (self.g_tilde * self.hamiltonian_part + self.gamma_tilde * self.dissipator_part).tocsr()

    # -- basis changes ---------------------------------------------------------
    def to_blocks(self, rho: np.ndarray) -> np.ndarray:
        """Joint density matrix -> array ``(N, N, d**2)`` of vectorized blocks."""
        d, n = self.system_dim, self.probe.points
        w = self.probe.fourier
        r = rho.reshape(d, n, d, n)
        r = np.einsum("ka,satb,lb->klts", w, r, w.conj())  # t-major = column stacking
        return r.reshape(n, n, d * d)

    def from_blocks(self, blocks: np.ndarray) -> np.ndarray:
        d, n = self.system_dim, self.probe.points
        w = self.probe.fourier
        r = blocks.reshape(n, n, d, d)  # [k, l, t, s] with t the column index
        r = np.einsum("ka,klts,lb->satb", w.conj(), r, w)
        return r.reshape(d * n, d * n)


def build_liouvillian(a, probe: DiscretizedProbe, lindblad_ops, g_tilde: float, gamma_tilde: float) -> Liouvillian:
    """Assemble the joint generator.

    Parameters
    ----------
    a : array_like
        Hermitian system observable; the interaction is ``A (x) P``.
    probe : DiscretizedProbe
    lindblad_ops : sequence of (matrix, rate)
        System jump operators with relative rates in ``(0, 1]``, the largest
        equal to 1, so ``gamma_tilde`` is the largest absolute rate.
    g_tilde, gamma_tilde : float
        Coupling strength and noise strength, both nonnegative.

    Raises
    ------
    DimMismatch
        A jump operator does not match the system dimension.
    RateOutOfRange
        A relative rate is outside ``(0, 1]`` or none equals 1.
    """
    a = linalg.validate_hermitian(a)
    d = a.shape[0]
    ops = []
    for op, rate in lindblad_ops:
        op = linalg.as_square(op)
        if op.shape != (d, d):
            raise DimMismatch(f"jump operator has shape {op.shape}, system is {d}-dimensional")
        rate = float(rate)
        if not 0 < rate <= 1:
            raise RateOutOfRange(f"relative rate {rate!r} outside (0, 1]")
        op.flags.writeable = False
        ops.append((op, rate))
    if ops and max(r for _, r in ops) != 1.0:
        raise RateOutOfRange("the largest relative rate must equal 1")
    if g_tilde < 0 or gamma_tilde < 0:
        raise ValueError("strengths must be nonnegative")
    sys_diss = dissipator(ops) if ops else np.zeros((d * d, d * d), dtype=complex)
    sys_diss.flags.writeable = False
    return Liouvillian(a, probe, tuple(ops), float(g_tilde), float(gamma_tilde), sys_diss)


def joint_state(rho_sys, probe: DiscretizedProbe) -> np.ndarray:
    """``rho_sys (x) |phi><phi|`` with the probe's Gaussian pointer."""
    phi = probe.gaussian()
    return np.kron(linalg.as_density(rho_sys), np.outer(phi, phi.conj()))


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    n = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape(n, n, order="F")


def _expm_blocks(blocks, t):
    return scipy.linalg.expm(t * blocks)


def propagate(liouv: Liouvillian, rho0, t: float, method: str = "blocks") -> np.ndarray:
    """``exp(t L) vec(rho0)`` for a column-stacked joint state.

    ``method`` is ``"blocks"`` (momentum-basis blocks), ``"dense"`` (full
    matrix exponential, small grids only) or ``"krylov"`` (sparse action).
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    v = np.asarray(rho0, dtype=complex).ravel()
    if v.size != liouv.dim:
        raise DimMismatch(f"state vector has {v.size} entries, expected {liouv.dim}")
    if method == "blocks":
        b = liouv.to_blocks(unvec(v))
        out = np.einsum("klij,klj->kli", _expm_blocks(liouv.blocks(), t), b)
        return vec(liouv.from_blocks(out))
    if method == "dense":
        if liouv.joint_dim**2 > DENSE_LIMIT**2:
            raise ValueError("dense propagation is limited to small probe grids")
        return scipy.linalg.expm(t * liouv.matrix.toarray()) @ v
    if method == "krylov":
        return expm_multiply(t * liouv.matrix.tocsc(), v)
    raise ValueError(f"unknown method {method!r}")


def _max_block_norm(blocks):
    return float(np.max(np.linalg.norm(blocks, ord=2, axis=(-2, -1))))


def factorization_error(liouv: Liouvillian, t: float = 1.0, method: str = "blocks"):
    """Error of splitting the evolution into noise first, then interaction.

    Returns
    -------
    error_norm : float
        ``|| exp(t(g L_H + c L_L)) - exp(t g L_H) exp(t c L_L) ||`` (spectral).
    predicted : float
        Leading commutator term ``g t c t ||[L_L, L_H]|| / 2``.
    """
    gt, ct = liouv.g_tilde * t, liouv.gamma_tilde * t
    if gt > MAX_FACTORIZATION_PARAM or ct > MAX_FACTORIZATION_PARAM:
        raise ValueError(f"g t and gamma t must be <= {MAX_FACTORIZATION_PARAM}, got {gt}, {ct}")
    predicted = 0.5 * gt * ct * _max_block_norm(liouv.commutator_blocks)
    if method == "blocks":
        full = _expm_blocks(liouv.blocks(), t)
        split = _expm_blocks(liouv.blocks(gamma_tilde=0.0), t) @ _expm_blocks(liouv.blocks(g_tilde=0.0), t)
        return _max_block_norm(full - split), predicted
    if method == "dense":
        lh, ll = liouv.hamiltonian_part.toarray(), liouv.dissipator_part.toarray()
        diff = scipy.linalg.expm(gt * lh + ct * ll) - scipy.linalg.expm(gt * lh) @ scipy.linalg.expm(ct * ll)
        return float(np.linalg.norm(diff, 2)), predicted
    raise ValueError(f"unknown method {method!r}")


def commutator_norm(liouv: Liouvillian) -> float:
    return _max_block_norm(liouv.commutator_blocks)


def validity_margins(liouv: Liouvillian, tol: float = 1e-12):
    """Upper bounds on ``g t`` and ``gamma t`` for the split to be accurate.

    ``g_bound = 2 ||L_L|| / ||C||`` and ``gamma_bound = 2 ||L_H|| / ||C||``
    with ``C = [L_L, L_H]``; both are ``inf`` when the parts commute.
    """
    c = commutator_norm(liouv)
    nl = float(np.linalg.norm(liouv.system_dissipator, 2))
    nh = _max_block_norm(liouv.hamiltonian_blocks)
    if c <= tol * max(1.0, nl * nh):
        return float("inf"), float("inf")
    return 2 * nl / c, 2 * nh / c


def postselected_probe_mean(
    liouv: Liouvillian, rho_sys, post, t: float = 1.0, factorized: bool = False
) -> tuple[float, float]:
    """Probe position mean after evolution and postselection on ``post``.

    With ``factorized=True`` the noise acts first for the whole time and the
    noiseless interaction second.  Returns ``(mean, postselection probability)``.
    """
    rho0 = joint_state(rho_sys, liouv.probe)
    b = liouv.to_blocks(rho0)
    if factorized:
        noise = _expm_blocks(liouv.blocks(g_tilde=0.0), t)
        coupling = _expm_blocks(liouv.blocks(gamma_tilde=0.0), t)
        b = np.einsum("klij,klj->kli", coupling, np.einsum("klij,klj->kli", noise, b))
    else:
        b = np.einsum("klij,klj->kli", _expm_blocks(liouv.blocks(), t), b)
    rho = liouv.from_blocks(b)
    d, n = liouv.system_dim, liouv.probe.points
    f = np.asarray(post, dtype=complex)
    probe_state = np.einsum("s,satb,t->ab", f.conj(), rho.reshape(d, n, d, n), f)
    prob = float(np.real(np.trace(probe_state)))
    mean = float(np.real(np.sum(liouv.probe.positions * np.diag(probe_state)))) / prob
    return mean, prob


@dataclass(frozen=True)
class SweepRow:
    g_t: float
    gamma_t: float
    error: float
    predicted: float


def error_sweep(a, probe: DiscretizedProbe, lindblad_ops, params, t: float = 1.0) -> list:
    """Factorization error for each ``(g t, gamma t)`` in ``params``."""
    rows = []
    for gt, ct in params:
        liouv = build_liouvillian(a, probe, lindblad_ops, gt / t, ct / t)
        err, pred = factorization_error(liouv, t)
        rows.append(SweepRow(float(gt), float(ct), err, pred))
    return rows


def sweep_to_csv(rows, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["g_t", "gamma_t", "error", "predicted"])
    for r in rows:
        w.writerow([repr(r.g_t), repr(r.gamma_t), repr(r.error), repr(r.predicted)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
