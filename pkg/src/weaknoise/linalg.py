"""Dense complex linear algebra for qubit-scale states and operators.

States and operators are plain ``numpy`` arrays.  The ``validate_*`` helpers
check the physical invariants, return a read-only ``complex128`` copy, and
raise a specific :mod:`weaknoise.errors` exception naming the violated
invariant and the measured deviation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, NotHermitian, NotNormalized, NotPositive, TraceNotOne

HERMITIAN_TOL = 1e-12
DENSITY_TOL = 1e-10
EIGEN_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = {"X": X, "Y": Y, "Z": Z}


def _frozen(m):
    m = np.array(m, dtype=complex, copy=True)
    m.flags.writeable = False
    return m


def as_square(m) -> np.ndarray:
    """Return ``m`` as a complex square matrix, checking shape and finiteness."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimMismatch(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def hermitian_deviation(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T)))


def validate_hermitian(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Check that ``a`` is Hermitian within ``tol`` (max-abs entry deviation)."""
    a = as_square(a)
    dev = hermitian_deviation(a)
    if dev > tol:
        raise NotHermitian(f"operator is not Hermitian: max |A - A^dagger| = {dev:.3e} > {tol:.1e}")
    return _frozen((a + a.conj().T) / 2)


def validate_density(m, tol: float = DENSITY_TOL) -> np.ndarray:
    """Validate a density matrix.

    The Hermitian part is symmetrized before the eigenvalue check.  Eigenvalues
    in ``[-tol, 0)`` are treated as round-off and clipped to zero.

    Parameters
    ----------
    m : array_like
        Candidate square matrix.
    tol : float
        Tolerance for the Hermitian, trace and positivity checks.

    Returns
    -------
    numpy.ndarray
        Read-only complex density matrix.

    Raises
    ------
    NotHermitian, TraceNotOne, NotPositive
    """
    m = as_square(m)
    dev = hermitian_deviation(m)
    if dev > tol:
        raise NotHermitian(f"density matrix is not Hermitian: max |rho - rho^dagger| = {dev:.3e} > {tol:.1e}")
    h = (m + m.conj().T) / 2
    tr = float(np.real(np.trace(h)))
    if abs(tr - 1.0) > tol:
        raise TraceNotOne(f"trace is {tr:.12g}, deviation {abs(tr - 1.0):.3e} > {tol:.1e}")
    w, v = np.linalg.eigh(h)
    if w[0] < -tol:
        raise NotPositive(f"minimum eigenvalue {w[0]:.6g} < -{tol:.1e}")
    if w[0] < 0:
        h = (v * np.clip(w, 0.0, None)) @ v.conj().T
    return _frozen(h)


def validate_pure(psi, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Check that ``psi`` is a unit-norm state vector."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.size == 0:
        raise DimMismatch(f"expected a non-empty state vector, got shape {psi.shape}")
    n2 = float(np.vdot(psi, psi).real)
    if abs(n2 - 1.0) > tol:
        raise NotNormalized(f"squared norm is {n2:.15g}, deviation {abs(n2 - 1.0):.3e} > {tol:.1e}")
    return _frozen(psi)


def ket(*amplitudes) -> np.ndarray:
    """Normalized state vector from (possibly unnormalized) amplitudes."""
    psi = np.asarray(amplitudes, dtype=complex).ravel()
    return _frozen(psi / np.linalg.norm(psi))


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return _frozen(np.outer(psi, psi.conj()))


def as_density(state, tol: float = DENSITY_TOL) -> np.ndarray:
    """Accept a state vector or a density matrix and return a density matrix."""
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return projector(validate_pure(state, tol=max(tol, HERMITIAN_TOL)))
    return validate_density(state, tol=tol)


def maximally_mixed(dim: int = 2) -> np.ndarray:
    return _frozen(np.eye(dim) / dim)


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.trace(rho @ rho)))


def is_unitary(u, tol: float = HERMITIAN_TOL) -> bool:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), 2)) <= tol


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen-decomposition ``A = V diag(eigenvalues) V^dagger``.

    Eigenvalues ascend.  Each eigenvector has its first non-negligible
    component real and positive; degenerate eigenspaces carry the basis
    obtained by Gram-Schmidt on the projected standard basis vectors.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def projectors(self, tol: float = EIGEN_TOL):
        """Yield ``(eigenvalue, projector)`` per distinct eigenvalue."""
        for idx in _clusters(self.eigenvalues, tol):
            v = self.eigenvectors[:, idx]
            yield float(np.mean(self.eigenvalues[idx])), v @ v.conj().T


def _clusters(w, tol):
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    groups, cur = [], [0]
    for i in range(1, len(w)):
        if w[i] - w[cur[-1]] <= tol * scale:
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    groups.append(cur)
    return groups


def _fix_phase(v, tol=1e-12):
    out = v.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size:
            c = col[nz[0]]
            out[:, j] = col * (abs(c) / c)
    return out


def spectral_decompose(a, tol: float = EIGEN_TOL) -> SpectralDecomposition:
    a = validate_hermitian(a)
    w, v = np.linalg.eigh(a)
    v = v.copy()
    dim = a.shape[0]
    for idx in _clusters(w, tol):
        if len(idx) < 2:
            continue
        proj = v[:, idx] @ v[:, idx].conj().T
        basis = []
        for e in np.eye(dim, dtype=complex):
            u = proj @ e
            for b in basis:
                u = u - np.vdot(b, u) * b
            n = np.linalg.norm(u)
            if n > 1e-8:
                basis.append(u / n)
            if len(basis) == len(idx):
                break
        v[:, idx] = np.column_stack(basis)
    v = _fix_phase(v)
    w = np.array(w, dtype=float)
    w.flags.writeable = False
    return SpectralDecomposition(w, _frozen(v))


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_unitaries(dim: int, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` Haar-random ``dim x dim`` unitaries, shape ``(n, dim, dim)``.

    QR of a complex Ginibre matrix, with the phases of ``diag(R)`` moved into
    ``Q`` so the distribution is exactly Haar.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = _rng(seed)
    g = (rng.standard_normal((n, dim, dim)) + 1j * rng.standard_normal((n, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=1, axis2=2)
    ph = d / np.abs(d)
    return q * ph[:, None, :]


def haar_unitary(dim: int, seed=None) -> np.ndarray:
    return _frozen(haar_unitaries(dim, 1, seed)[0])


def random_state(dim: int, kind: str = "pure", seed=None) -> np.ndarray:
    """Random density matrix.

    ``kind="pure"`` gives the projector onto a Haar-random vector;
    ``kind="mixed"`` traces out a ``dim``-dimensional environment from a
    Haar-random bipartite pure state.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = _rng(seed)
    if kind == "pure":
        psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        psi /= np.linalg.norm(psi)
        return projector(psi)
    if kind == "mixed":
        m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        m /= np.linalg.norm(m)
        # rows index the system, columns the environment
        return validate_density(m @ m.conj().T)
    raise ValueError(f"kind must be 'pure' or 'mixed', got {kind!r}")


def random_pure(dim: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return _frozen(psi / np.linalg.norm(psi))


def random_hermitian(dim: int, seed=None, scale: float = 1.0) -> np.ndarray:
    rng = _rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return _frozen(scale * (g + g.conj().T) / 2)


# Named single-qubit states used by the catalogs and the CLI.
NAMED_KETS = {
    "zero": ket(1, 0),
    "one": ket(0, 1),
    "plus": ket(1, 1),
    "minus": ket(1, -1),
    "plus_i": ket(1, 1j),
    "minus_i": ket(1, -1j),
}
