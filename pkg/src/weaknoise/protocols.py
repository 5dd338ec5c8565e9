"""Probe-level models of weak, strong and postselected strong measurement.

The probe is a Gaussian position pointer with spread ``Delta`` coupled to the
system through ``g A (x) P``.  After the coupling, the probe wavefunction
conditioned on postselecting ``|f>`` is

    phi_f(q) = sum_i <f|P_i|psi> phi(q - g a_i)

summed over the spectral projectors ``P_i`` of ``A``; for a mixed
preselection the density is the corresponding mixture, interference terms
included.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from . import linalg
from .errors import DimMismatch, GridTooCoarse, ZeroPostselectProbability
from .weakvalue import as_post_vector, weak_value

WEAK_RATIO_LIMIT = 0.1
MIN_GRID_POINTS = 128
DEFAULT_GRID_POINTS = 2048
MAX_SPACING_FRACTION = 1 / 8
MIN_HALF_WIDTH_FACTOR = 5.0
DEFAULT_HALF_WIDTH_FACTOR = 8.0
SAMPLE_CHUNK = 1 << 20


class WeakRegimeWarning(UserWarning):
    """Coupling is too strong for the first-order weak-value readout."""


@dataclass(frozen=True)
class GaussianProbe:
    """Gaussian pointer of position spread ``spread`` and coupling ``coupling``."""

    spread: float
    coupling: float

    def __post_init__(self):
        if not self.spread > 0:
            raise ValueError(f"probe spread must be positive, got {self.spread!r}")
        if not np.isfinite(self.coupling):
            raise ValueError("probe coupling must be finite")

    @property
    def ratio(self) -> float:
        """Regime parameter ``|g| / Delta``."""
        return abs(self.coupling) / self.spread


@dataclass(frozen=True, eq=False)
class ProbeDistribution:
    """Normalized probe position density on a uniform grid."""

    grid: np.ndarray
    density: np.ndarray
    postselect_prob: float
    mean: float
    variance: float

    def cdf(self) -> np.ndarray:
        c = cumulative_trapezoid(self.density, self.grid, initial=0.0)
        return c / c[-1]

    def mass_within(self, lo: float, hi: float) -> float:
        """Probability of a position in ``[lo, hi]``."""
        c = cumulative_trapezoid(self.density, self.grid, initial=0.0)
        return float(np.interp(hi, self.grid, c) - np.interp(lo, self.grid, c))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["position", "density"])
        for q, p in zip(self.grid, self.density):
            w.writerow([repr(float(q)), repr(float(p))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def _check_dims(a, rho):
    if a.shape != rho.shape:
        raise DimMismatch(f"operator is {a.shape}, state is {rho.shape}")


def wvmp_expectation(a, pre, post, probe: GaussianProbe) -> float:
    """First-order probe shift ``g Re(A_w)`` of the weak-value protocol.

    Warns with :class:`WeakRegimeWarning` when ``g / Delta`` exceeds 0.1.
    """
    if probe.ratio > WEAK_RATIO_LIMIT:
        warnings.warn(
            f"g/Delta = {probe.ratio:.3g} exceeds {WEAK_RATIO_LIMIT}; first-order readout may be inaccurate",
            WeakRegimeWarning,
            stacklevel=2,
        )
    return probe.coupling * weak_value(a, pre, post).real


def wvmp_variance(probe: GaussianProbe) -> float:
    """First-order probe variance of the weak-value protocol (``Delta**2``)."""
    return probe.spread**2


def _spectral_blocks(a):
    dec = linalg.spectral_decompose(a)
    vals, projs = zip(*dec.projectors())
    return np.array(vals), np.array(projs)


def _amplitude_matrix(vals, projs, rho, post_vec):
    """``c_ij = <f|P_i rho P_j|f>``, or ``Tr(P_i rho) delta_ij`` without postselection."""
    if post_vec is None:
        return np.diag([np.real(np.trace(p @ rho)) for p in projs]).astype(complex)
    left = np.array([post_vec.conj() @ p for p in projs])  # <f|P_i
    return left @ rho @ left.conj().T


def _grid_defaults(vals, probe, grid_points, half_width):
    reach = probe.spread + abs(probe.coupling) * float(np.max(np.abs(vals)))
    if half_width is None:
        half_width = DEFAULT_HALF_WIDTH_FACTOR * reach
    elif half_width < MIN_HALF_WIDTH_FACTOR * reach - 1e-12 * reach:
        raise GridTooCoarse(
            f"half_width {half_width:.6g} < {MIN_HALF_WIDTH_FACTOR} * (Delta + g max|a|) = {MIN_HALF_WIDTH_FACTOR * reach:.6g}"
        )
    max_step = MAX_SPACING_FRACTION * probe.spread
    if grid_points is None:
        needed = int(np.ceil(2 * half_width / max_step)) + 1
        grid_points = max(DEFAULT_GRID_POINTS, needed)
    if grid_points < MIN_GRID_POINTS:
        raise GridTooCoarse(f"grid_points must be >= {MIN_GRID_POINTS}, got {grid_points}")
    step = 2 * half_width / (grid_points - 1)
    if step > max_step * (1 + 1e-12):
        raise GridTooCoarse(f"grid spacing {step:.4g} exceeds Delta/8 = {max_step:.4g}")
    return int(grid_points), float(half_width)


def postselected_probe_distribution(
    a, pre, post, probe: GaussianProbe, grid_points: int | None = None, half_width: float | None = None
) -> ProbeDistribution:
    """Exact probe density after coupling and (optional) postselection.

    Parameters
    ----------
    a : array_like
        Hermitian observable coupled to the probe momentum.
    pre : array_like
        Preselected state (vector or density matrix).
    post : array_like or None
        Pure postselection, or ``None`` for no postselection.
    probe : GaussianProbe
    grid_points : int, optional
        Number of grid points; by default the larger of 2048 and the count
        needed for a spacing of ``Delta/8``.
    half_width : float, optional
        Grid extends over ``[-half_width, half_width]``; default
        ``8 (Delta + g max|a_i|)``.

    Returns
    -------
    ProbeDistribution
        Density normalized by the analytic postselection probability; mean
        and variance are trapezoid integrals on the grid.

    Raises
    ------
    GridTooCoarse
        Spacing above ``Delta/8``, fewer than 128 points or a window narrower
        than ``5 (Delta + g max|a_i|)``.
    ZeroPostselectProbability
        Postselection probability at or below 1e-12.
    """
    a = linalg.validate_hermitian(a)
    rho = linalg.as_density(pre)
    _check_dims(a, rho)
    post_vec = None if post is None else as_post_vector(post)
    vals, projs = _spectral_blocks(a)
    grid_points, half_width = _grid_defaults(vals, probe, grid_points, half_width)

    c = _amplitude_matrix(vals, projs, rho, post_vec)
    g, s = probe.coupling, probe.spread
    diff = vals[:, None] - vals[None, :]
    prob = float(np.real(np.sum(c * np.exp(-(g**2) * diff**2 / (8 * s**2)))))
    if prob <= 1e-12:
        raise ZeroPostselectProbability(f"postselection probability {prob:.3e} <= 1e-12")

    q = np.linspace(-half_width, half_width, grid_points)
    amp = (2 * np.pi * s**2) ** -0.25 * np.exp(-((q[None, :] - g * vals[:, None]) ** 2) / (4 * s**2))
    dens = np.real(np.einsum("ij,iq,jq->q", c, amp, amp)) / prob
    dens = np.clip(dens, 0.0, None)
    mean = float(trapezoid(q * dens, q))
    var = float(trapezoid((q - mean) ** 2 * dens, q))
    for arr in (q, dens):
        arr.flags.writeable = False
    return ProbeDistribution(q, dens, min(prob, 1.0), mean, max(var, 0.0))


def sample_probe(dist: ProbeDistribution, n: int, seed: int, chunk_size: int = SAMPLE_CHUNK) -> np.ndarray:
    """Draw ``n`` positions by inverse-CDF sampling with linear interpolation.

    Draws are produced in chunks of ``chunk_size``; chunk ``k`` uses seed
    ``seed + k`` so chunks can be generated independently.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cdf = dist.cdf()
    # drop flat stretches so the inverse is single-valued
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    cdf, grid = cdf[keep], dist.grid[keep]
    out = np.empty(n)
    for k, start in enumerate(range(0, n, chunk_size)):
        stop = min(n, start + chunk_size)
        u = np.random.default_rng(seed + k).random(stop - start)
        out[start:stop] = np.interp(u, cdf, grid)
    return out


def strong_expectation(a, pre, probe: GaussianProbe) -> float:
    """Probe mean ``g Tr(A rho)`` of a projective (strong) measurement."""
    a = linalg.validate_hermitian(a)
    rho = linalg.as_density(pre)
    _check_dims(a, rho)
    return probe.coupling * float(np.real(np.trace(a @ rho)))


def strong_variance(a, pre, probe: GaussianProbe) -> float:
    """Probe variance ``g**2 Var(A) + Delta**2`` of a strong measurement."""
    a = linalg.validate_hermitian(a)
    rho = linalg.as_density(pre)
    _check_dims(a, rho)
    m1 = float(np.real(np.trace(a @ rho)))
    m2 = float(np.real(np.trace(a @ a @ rho)))
    return probe.coupling**2 * (m2 - m1**2) + probe.spread**2


def _outcome_weights(a, pre, post):
    a = linalg.validate_hermitian(a)
    rho = linalg.as_density(pre)
    _check_dims(a, rho)
    f = as_post_vector(post)
    vals, projs = _spectral_blocks(a)
    weights = np.array([np.real(f.conj() @ p @ rho @ p @ f) for p in projs])
    return vals, weights


def strong_postselect_probability(a, pre, post) -> float:
    """Joint probability of any outcome followed by a successful postselection."""
    return float(np.sum(_outcome_weights(a, pre, post)[1]))


def strong_postselect_expectation(a, pre, post, coupling: float = 1.0) -> float:
    """Conditional probe mean of a strong measurement followed by postselection.

    Returns ``g sum_i a_i w_i / sum_i w_i`` with ``w_i = <f|P_i rho P_i|f>``;
    the unconditioned sum is :func:`strong_postselect_probability`.
    """
    vals, w = _outcome_weights(a, pre, post)
    total = float(np.sum(w))
    if total <= 1e-12:
        raise ZeroPostselectProbability(f"postselection probability {total:.3e} <= 1e-12")
    return coupling * float(np.dot(vals, w)) / total
