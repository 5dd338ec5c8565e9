"""Weak values, noisy weak values and their first-order noise bias.

For a noise family ``E_gamma`` the noisy weak value expands as
``A_w(gamma) = A_w + gamma * delta + O(gamma**2)``.  ``delta`` is computed
either from the closed-form channel generator or by finite differences of
``gamma -> A_w(gamma)``; the two routes are independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .channels import (
    DEFAULT_STEP,
    MAX_STEP,
    ChannelSpec,
    KrausChannel,
    analytic_generator,
    build_channel,
)
from .errors import DimMismatch, OrthogonalStates, OrthogonalStatesAfterNoise, StepTooLarge

OVERLAP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WeakValue:
    """Weak value ``Tr(post A pre) / Tr(post pre)`` with its denominator."""

    value: complex
    preselect: np.ndarray
    postselect: np.ndarray
    overlap: float

    @property
    def real(self) -> float:
        return float(np.real(self.value))


@dataclass(frozen=True)
class BiasValue:
    """First-order coefficient ``delta`` of the noise-induced weak-value shift.

    ``overlap`` is the noiseless postselection overlap when known.
    """

    delta: complex
    overlap: float | None = None

    def __abs__(self):
        return abs(self.delta)

    @property
    def numerator(self) -> complex:
        """``delta * overlap**2``: the bias with denominators cleared."""
        if self.overlap is None:
            raise ValueError("overlap unknown for this bias value")
        return self.delta * self.overlap**2


def as_post_density(post) -> np.ndarray:
    """Postselection given as a state vector or a density matrix."""
    return linalg.as_density(post)


def as_post_vector(post, tol: float = 1e-10) -> np.ndarray:
    """Return the unit vector of a pure postselection (vector or rank-1 matrix)."""
    post = np.asarray(post, dtype=complex)
    if post.ndim == 1:
        return linalg.validate_pure(post, tol=max(tol, linalg.HERMITIAN_TOL))
    rho = linalg.validate_density(post, tol=tol)
    w, v = np.linalg.eigh(rho)
    if abs(w[-1] - 1.0) > tol:
        raise ValueError(f"postselection must be pure; largest eigenvalue is {w[-1]:.6g}")
    return linalg._fix_phase(v[:, -1:])[:, 0]


def _prepare(a, pre, post):
    a = linalg.validate_hermitian(a)
    pre = linalg.as_density(pre)
    post = as_post_density(post)
    if not a.shape == pre.shape == post.shape:
        raise DimMismatch(f"shapes differ: A {a.shape}, pre {pre.shape}, post {post.shape}")
    return a, pre, post


def _ratio(a, rho, post, err=OrthogonalStates):
    overlap = float(np.real(np.trace(post @ rho)))
    if overlap <= OVERLAP_TOL:
        raise err(f"postselection overlap {overlap:.3e} <= {OVERLAP_TOL:.0e}")
    return complex(np.trace(post @ a @ rho)) / overlap, overlap


def weak_value(a, pre, post) -> WeakValue:
    """Weak value of ``a`` for preselection ``pre`` and postselection ``post``.

    Parameters
    ----------
    a : array_like
        Hermitian observable.
    pre, post : array_like
        State vectors or density matrices.  A mixed ``post`` uses the trace
        form ``Tr(post A pre) / Tr(post pre)``.

    Raises
    ------
    OrthogonalStates
        If ``Tr(post pre) <= 1e-12``.

    Notes
    -----
    When both states are vectors the amplitude ratio ``<f|A|s> / <f|s>`` is
    used, which avoids squaring a small overlap.
    """
    if np.ndim(pre) == 1 and np.ndim(post) == 1:
        return _pure_weak_value(a, pre, post)
    a, pre, post = _prepare(a, pre, post)
    value, overlap = _ratio(a, pre, post)
    return WeakValue(value, pre, post, overlap)


def _pure_weak_value(a, pre, post) -> WeakValue:
    # amplitude form keeps full precision when the overlap is tiny
    a = linalg.validate_hermitian(a)
    s, f = linalg.validate_pure(pre), linalg.validate_pure(post)
    if not a.shape[0] == s.size == f.size:
        raise DimMismatch(f"shapes differ: A {a.shape}, pre {s.shape}, post {f.shape}")
    amp = complex(np.vdot(f, s))
    overlap = abs(amp) ** 2
    if overlap <= OVERLAP_TOL:
        raise OrthogonalStates(f"postselection overlap {overlap:.3e} <= {OVERLAP_TOL:.0e}")
    return WeakValue(complex(np.vdot(f, a @ s)) / amp, linalg.projector(s), linalg.projector(f), overlap)


def noisy_weak_value(a, pre, post, c: KrausChannel) -> WeakValue:
    """Weak value with the preselected state sent through ``c`` first."""
    a, pre, post = _prepare(a, pre, post)
    if c.dim != pre.shape[0]:
        raise DimMismatch(f"channel acts on dimension {c.dim}, state has {pre.shape[0]}")
    noisy = linalg.validate_density(c(pre))
    value, overlap = _ratio(a, noisy, post, OrthogonalStatesAfterNoise)
    return WeakValue(value, noisy, post, overlap)


def _bias_from_generator(a, rho, post, m):
    aw, overlap = _ratio(a, rho, post)
    num = complex(np.trace(post @ a @ m)) - aw * complex(np.trace(post @ m))
    return num / overlap, overlap


def bias_first_order_analytic(a, pre, post, spec: ChannelSpec) -> BiasValue:
    """Closed-form first-order bias of the weak value under ``spec``.

    ``delta = [<f|A M(rho)|f> - A_w <f|M(rho)|f>] / <f|rho|f>`` where ``M``
    is the family's generator.  For Pauli noise this is the weighted sum of
    the per-Pauli biases, and for a composed family the weighted sum of the
    component biases.
    """
    a, pre, post = _prepare(a, pre, post)
    if spec.dim != pre.shape[0]:
        raise DimMismatch(f"channel acts on dimension {spec.dim}, state has {pre.shape[0]}")
    delta, overlap = _bias_from_generator(a, pre, post, analytic_generator(spec, pre))
    return BiasValue(delta, overlap)


def _aw_at(a, pre, post, spec, g):
    return _ratio(a, build_channel(spec, g)(pre), post, OrthogonalStatesAfterNoise)[0]


def bias_first_order_numeric(a, pre, post, spec: ChannelSpec, h: float = DEFAULT_STEP) -> BiasValue:
    """Finite-difference first-order bias.

    One-sided second-order stencil on ``gamma -> A_w(gamma)`` at steps ``h``
    and ``h/2``, combined by one Richardson step.
    """
    if not 0 < h <= MAX_STEP:
        raise StepTooLarge(f"step h must lie in (0, {MAX_STEP}], got {h!r}")
    a, pre, post = _prepare(a, pre, post)
    if spec.dim != pre.shape[0]:
        raise DimMismatch(f"channel acts on dimension {spec.dim}, state has {pre.shape[0]}")
    f0, overlap = _ratio(a, pre, post)

    def stencil(step):
        return (-3 * f0 + 4 * _aw_at(a, pre, post, spec, step) - _aw_at(a, pre, post, spec, 2 * step)) / (2 * step)

    delta = (4 * stencil(h / 2) - stencil(h)) / 3
    return BiasValue(complex(delta), overlap)
