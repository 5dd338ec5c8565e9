"""Operator reconstruction from noisy measurements and bias-order certification.

Three protocols estimate a qubit observable ``A`` when the preselected state
passes through a noise channel first:

* weak-value measurement on catalogs of noise-safe state pairs,
* strong (projective) measurement on a set of preparations,
* strong measurement followed by postselection.

Each estimator assumes the ideal (noiseless) model when inverting the data,
so any noise-induced shift appears as reconstruction error.
:func:`bias_order_fit` then measures how fast that error grows with the
noise parameter.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg
from .channels import ChannelSpec, KrausChannel, build_channel, check_trace_preserving, check_unital
from .errors import ChannelClassMismatch, DegenerateFit, ExcludedParameter, InvalidSweep
from .protocols import strong_postselect_expectation, strong_postselect_probability
from .weakvalue import noisy_weak_value

ERROR_FLOOR = 1e-12
SECOND_ORDER_SLOPE = 1.9
FIRST_ORDER_SLOPE = 1.2
MIN_SWEEP_POINTS = 4
MIN_SWEEP_DECADES = 1.5
MAX_SWEEP_GAMMA = 0.1
CLASS_TOL = 1e-10

_THEOREM_ALIASES = {
    "pauli": "pauli", "t1": "pauli", "t1_pauli": "pauli",
    "unital": "unital", "t2": "unital", "t2_unital": "unital",
    "adpd": "adpd", "t3": "adpd", "t3_adpd": "adpd",
}


def _channel_class(name: str) -> str:
    try:
        return _THEOREM_ALIASES[str(name).lower()]
    except KeyError:
        raise ValueError(f"unknown channel class / theorem {name!r}") from None


# -- catalogs -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CatalogEntry:
    pre: np.ndarray
    post: np.ndarray
    label: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class StatePairCatalog:
    channel_class: str
    entries: tuple

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, key):
        if isinstance(key, str):
            for e in self.entries:
                if e.label == key:
                    return e
            raise KeyError(key)
        return self.entries[key]


def symmetric_state(r: float) -> np.ndarray:
    """``[[1/2, r], [r, 1/2]]``; ``|+>`` is an eigenvector for every ``r``."""
    return linalg.validate_density([[0.5, r], [r, 0.5]])


def diagonal_state(p: float) -> np.ndarray:
    return linalg.validate_density(np.diag([p, 1 - p]))


def catalog_safe_pairs(
    channel_class: str,
    r: float = 0.25,
    lam2: float = 1.0,
    lam3: float = 0.0,
    rho11: float = 0.7,
) -> StatePairCatalog:
    """Pre/postselection pairs whose weak values carry no first-order bias.

    Parameters
    ----------
    channel_class : {"pauli", "unital", "adpd"}
        Theorem aliases ``"T1"``, ``"T2"``, ``"T3"`` are accepted.
    r : float
        Off-diagonal of the symmetric Pauli-family state; ``r != -1/2``.
    lam2, lam3 : float
        Populations ``diag(lam, 1 - lam)`` postselected on ``|0>`` (needs
        ``lam2 != 0``) and on ``|1>`` (needs ``lam3 != 1``).
    rho11 : float
        Ground population of the diagonal damping-family state, in ``(0, 1)``.

    Raises
    ------
    ExcludedParameter
        A parameter sits where the postselection overlap vanishes.
    """
    cls = _channel_class(channel_class)
    k = linalg.NAMED_KETS
    mm = linalg.maximally_mixed(2)
    if cls == "pauli":
        if r == -0.5:
            raise ExcludedParameter("r = -1/2 makes the state orthogonal to |+>")
        if lam2 == 0:
            raise ExcludedParameter("lam2 = 0 makes the state orthogonal to |0>")
        if lam3 == 1:
            raise ExcludedParameter("lam3 = 1 makes the state orthogonal to |1>")
        entries = (
            CatalogEntry(symmetric_state(r), k["plus"], "symmetric_plus", {"r": r}),
            CatalogEntry(diagonal_state(lam2), k["zero"], "diagonal_zero", {"lam": lam2}),
            CatalogEntry(diagonal_state(lam3), k["one"], "diagonal_one", {"lam": lam3}),
            CatalogEntry(mm, k["minus"], "mixed_minus"),
            CatalogEntry(mm, k["plus_i"], "mixed_plus_i"),
        )
    elif cls == "unital":
        entries = tuple(CatalogEntry(mm, k[n], f"mixed_{n}") for n in ("zero", "one", "plus", "plus_i"))
    else:
        if not 0 < rho11 < 1:
            raise ExcludedParameter(f"rho11 must lie in (0, 1), got {rho11!r}")
        ground = linalg.projector(k["zero"])
        entries = (
            CatalogEntry(diagonal_state(rho11), k["zero"], "diagonal_zero", {"rho11": rho11}),
            CatalogEntry(diagonal_state(rho11), k["one"], "diagonal_one", {"rho11": rho11}),
            CatalogEntry(ground, k["plus"], "ground_plus"),
            CatalogEntry(ground, k["plus_i"], "ground_plus_i"),
        )
    return StatePairCatalog(cls, entries)


# -- channel-class checks -----------------------------------------------------

_PAULI_BASIS = (linalg.I2, linalg.X, linalg.Y, linalg.Z)


def pauli_transfer_matrix(c: KrausChannel) -> np.ndarray:
    """Real matrix ``R_ij = Tr(s_i E(s_j)) / 2`` over ``(I, X, Y, Z)``."""
    if c.dim != 2:
        raise ChannelClassMismatch("Pauli transfer matrix is defined here for qubits only")
    return np.array([[np.real(np.trace(si @ c(sj))) / 2 for sj in _PAULI_BASIS] for si in _PAULI_BASIS])


def channel_matches(c: KrausChannel, channel_class: str, tol: float = CLASS_TOL) -> bool:
    """Structural membership test for the three noise classes.

    ``pauli``: diagonal transfer matrix.  ``unital``: fixes ``I/d``.
    ``adpd``: fixes ``|0><0|``, keeps populations and coherences separate and
    shrinks both coherence components equally (the form shared by all
    compositions of amplitude and phase damping).
    """
    cls = _channel_class(channel_class)
    if not check_trace_preserving(c, tol):
        return False
    if cls == "unital":
        return check_unital(c, tol)
    if c.dim != 2:
        return False
    r = pauli_transfer_matrix(c)
    if cls == "pauli":
        return bool(np.all(np.abs(r - np.diag(np.diag(r))) <= tol))
    mask = np.ones((4, 4), dtype=bool)
    mask[0, 0] = mask[1, 1] = mask[2, 2] = mask[3, 3] = mask[3, 0] = False
    return bool(
        np.all(np.abs(r[mask]) <= tol)
        and abs(r[1, 1] - r[2, 2]) <= tol
        and abs(r[3, 0] + r[3, 3] - 1) <= tol
    )


# -- results ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    """Estimated observable and its per-element absolute error.

    ``per_element_error`` is NaN where the data do not determine the element
    (``identifiable`` is False there and ``a_hat`` holds the minimum-norm
    fill-in).  ``observations`` are the raw protocol outputs in input order.
    """

    a_hat: np.ndarray
    per_element_error: np.ndarray
    gamma: float | None
    protocol: str
    identifiable: np.ndarray
    observations: np.ndarray

    @property
    def max_error(self) -> float:
        errs = self.per_element_error[self.identifiable]
        return float(np.max(errs)) if errs.size else float("nan")


def _hermitize(m):
    return (m + m.conj().T) / 2


def _result(a_hat, a_true, gamma, protocol, identifiable, obs):
    a_hat = linalg._frozen(_hermitize(a_hat))
    err = np.abs(a_hat - a_true)
    err = np.where(identifiable, err, np.nan)
    for arr in (err, identifiable, obs):
        arr.flags.writeable = False
    return ReconstructionResult(a_hat, err, gamma, protocol, identifiable, obs)


# -- weak-value reconstruction ----------------------------------------------------

def reconstruct_via_wvmp(
    theorem: str,
    a_true,
    c: KrausChannel,
    readout: str = "complex",
    catalog: StatePairCatalog | None = None,
) -> ReconstructionResult:
    """Rebuild a qubit observable from noisy weak values of a safe catalog.

    Parameters
    ----------
    theorem : {"T1_Pauli", "T2_Unital", "T3_ADPD"}
        Selects the catalog and the linear recipe (short aliases accepted).
    a_true : array_like
        Hermitian 2x2 observable whose weak values are simulated.
    c : KrausChannel
        Noise acting on every preselected state.
    readout : {"complex", "real"}
        ``"real"`` uses only ``Re(A_w)``, i.e. what the probe position shows.
    catalog : StatePairCatalog, optional
        Defaults to ``catalog_safe_pairs(theorem)``.

    Raises
    ------
    ChannelClassMismatch
        ``c`` is not in the class the recipe is built for.
    """
    cls = _channel_class(theorem)
    if readout not in ("complex", "real"):
        raise ValueError(f"readout must be 'complex' or 'real', got {readout!r}")
    a_true = linalg.validate_hermitian(a_true)
    if a_true.shape != (2, 2):
        raise ValueError("weak-value recipes are defined for qubit observables")
    if not channel_matches(c, cls):
        raise ChannelClassMismatch(f"channel is not in the {cls} class")
    catalog = catalog if catalog is not None else catalog_safe_pairs(cls)
    if catalog.channel_class != cls:
        raise ChannelClassMismatch(f"catalog is for {catalog.channel_class}, recipe for {cls}")

    w = {}
    for e in catalog:
        v = noisy_weak_value(a_true, e.pre, e.post, c).value
        w[e.label] = v.real if readout == "real" else v
    a_hat = np.zeros((2, 2), dtype=complex)
    if cls == "pauli":
        a11, a22 = w["diagonal_zero"], w["diagonal_one"]
        s = w["symmetric_plus"] - w["mixed_minus"]  # a12 + a21
        d = s - 2 * (w["symmetric_plus"] - w["mixed_plus_i"])  # i (a12 - a21)
        a12 = (s - 1j * d) / 2
    elif cls == "unital":
        a11, a22 = w["mixed_zero"], w["mixed_one"]
        centre = (a11 + a22) / 2
        a12 = (np.real(w["mixed_plus"]) - np.real(centre)) + 1j * (np.real(centre) - np.real(w["mixed_plus_i"]))
    else:
        a11, a22 = w["diagonal_zero"], w["diagonal_one"]
        if readout == "real":
            a12 = (np.real(w["ground_plus"]) - a11) + 1j * (a11 - np.real(w["ground_plus_i"]))
        else:
            a12 = np.conj(w["ground_plus"] - a11)
    a_hat[0, 0], a_hat[1, 1] = a11, a22
    a_hat[0, 1], a_hat[1, 0] = a12, np.conj(a12)
    obs = np.array([w[e.label] for e in catalog])
    return _result(a_hat, a_true, c.gamma, "wvmp", np.ones((2, 2), dtype=bool), obs)


# -- linear (tomographic) reconstruction ------------------------------------------

def hermitian_basis(dim: int) -> np.ndarray:
    """Hilbert-Schmidt orthonormal basis of Hermitian ``dim x dim`` matrices."""
    out = []
    for i in range(dim):
        m = np.zeros((dim, dim), dtype=complex)
        m[i, i] = 1
        out.append(m)
    for i in range(dim):
        for j in range(i + 1, dim):
            m = np.zeros((dim, dim), dtype=complex)
            m[i, j] = m[j, i] = 1 / np.sqrt(2)
            out.append(m)
            m = np.zeros((dim, dim), dtype=complex)
            m[i, j], m[j, i] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            out.append(m)
    return np.array(out)


def _coords(basis, f):
    """Real coordinates of the functional ``A -> Re Tr(f A)``."""
    return np.real(np.einsum("mij,ji->m", basis, f))


def _linear_reconstruction(a_true, functionals, values, gamma, protocol, obs, tol=1e-9):
    """Minimum-norm least-squares solve of ``Tr(F_k A) = y_k``."""
    dim = a_true.shape[0]
    basis = hermitian_basis(dim)
    design = np.array([_coords(basis, f) for f in functionals])
    pinv = np.linalg.pinv(design, rcond=1e-10)
    theta = pinv @ np.asarray(values, dtype=float)
    a_hat = np.einsum("m,mij->ij", theta, basis)
    row_space = pinv @ design

    identifiable = np.zeros((dim, dim), dtype=bool)
    for i in range(dim):
        for j in range(dim):
            unit = np.zeros((dim, dim), dtype=complex)
            unit[j, i] = 1  # Tr(unit A) = a_ij
            probes = [_coords(basis, (unit + unit.conj().T) / 2 if i != j else unit)]
            if i != j:
                probes.append(_coords(basis, (unit - unit.conj().T) / 2j))
            identifiable[i, j] = all(np.linalg.norm(v - row_space.T @ v) <= tol * max(1, np.linalg.norm(v)) for v in probes)
    return _result(a_hat, a_true, gamma, protocol, identifiable, np.asarray(obs, dtype=float))


def reconstruct_via_strong(a_true, c: KrausChannel, pre_states) -> ReconstructionResult:
    """Least-squares estimate from noisy projective means ``Tr(A E(rho_k))``.

    The data are inverted with the ideal preparations ``rho_k``; elements not
    fixed by the span of the preparations are reported as unidentifiable.
    """
    a_true = linalg.validate_hermitian(a_true)
    pres = [linalg.as_density(p) for p in pre_states]
    if not pres:
        raise ValueError("need at least one preparation")
    values = [float(np.real(np.trace(a_true @ c(p)))) for p in pres]
    return _linear_reconstruction(a_true, pres, values, c.gamma, "strong", values)


def _orthonormal_completion(f):
    """Orthonormal basis whose first vector is ``f``."""
    m = np.column_stack([f, np.eye(len(f), dtype=complex)])
    q, _ = np.linalg.qr(m)
    q[:, 0] = f
    return [q[:, k] for k in range(len(f))]


def _is_maximally_mixed(rho, tol=1e-12):
    return float(np.max(np.abs(rho - np.eye(rho.shape[0]) / rho.shape[0]))) <= tol


def reconstruct_via_strong_postselect(a_true, c: KrausChannel, pairs) -> ReconstructionResult:
    """Estimate from strong measurements followed by postselection.

    For a maximally mixed preparation the conditional mean at post ``|f>``
    equals ``<f|A|f>``, a linear functional of ``A``.  For any other
    preparation the conditional mean is not linear in ``A``; the outcomes of
    the full postselection basis containing ``|f>`` are then combined,
    ``sum_b P(b) <Q>_b``, which equals ``Tr(A rho)`` in the ideal model.
    """
    a_true = linalg.validate_hermitian(a_true)
    if not pairs:
        raise ValueError("need at least one (pre, post) pair")
    functionals, values = [], []
    for pre, post in pairs:
        rho = linalg.as_density(pre)
        noisy = linalg.validate_density(c(rho))
        f = np.asarray(post, dtype=complex)
        if _is_maximally_mixed(rho):
            functionals.append(linalg.projector(f))
            values.append(strong_postselect_expectation(a_true, noisy, f))
        else:
            total = 0.0
            for b in _orthonormal_completion(f):
                p = strong_postselect_probability(a_true, noisy, b)
                if p > 1e-12:
                    total += p * strong_postselect_expectation(a_true, noisy, b)
            functionals.append(rho)
            values.append(total)
    return _linear_reconstruction(a_true, functionals, values, c.gamma, "strong_postselect", values)


# -- bias-order fit ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BiasReport:
    """Reconstruction error across a noise sweep and its log-log slope.

    ``fitted_slope`` is ``inf`` when every error is below the floor, i.e. the
    protocol is exact at all tested noise levels.
    """

    gammas: np.ndarray
    errors: np.ndarray
    fitted_slope: float
    fit_r2: float
    verdict: str
    used: np.ndarray

    @property
    def exact(self) -> bool:
        return np.isinf(self.fitted_slope)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gamma", "error"])
        for g, e in zip(self.gammas, self.errors):
            w.writerow([repr(float(g)), repr(float(e))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> dict:
        def num(x):
            return x if np.isfinite(x) else str(x)

        return {
            "fitted_slope": num(float(self.fitted_slope)),
            "fit_r2": num(float(self.fit_r2)),
            "verdict": self.verdict,
            "points_used": int(np.sum(self.used)),
            "max_error": float(np.max(self.errors)),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.summary(), sort_keys=True, indent=2) + "\n"
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def max_element_error(result: ReconstructionResult) -> float:
    return result.max_error


def _validate_sweep(gammas):
    g = np.asarray(gammas, dtype=float)
    if g.ndim != 1 or g.size < MIN_SWEEP_POINTS:
        raise InvalidSweep(f"need at least {MIN_SWEEP_POINTS} noise levels, got {g.size}")
    if np.any(g <= 0) or np.any(np.diff(g) <= 0):
        raise InvalidSweep("noise levels must be positive and strictly increasing")
    if g[-1] > MAX_SWEEP_GAMMA:
        raise InvalidSweep(f"noise levels must not exceed {MAX_SWEEP_GAMMA}, got {g[-1]}")
    if np.log10(g[-1] / g[0]) < MIN_SWEEP_DECADES - 1e-12:
        raise InvalidSweep(f"noise levels must span at least {MIN_SWEEP_DECADES} decades")
    return g


def fit_log_slope(gammas, errors, floor: float = ERROR_FLOOR):
    """Least-squares slope of ``log(error)`` against ``log(gamma)``.

    Returns ``(slope, r2, used)``.  Points below ``floor`` are dropped; if
    all are dropped the slope is ``inf``.

    Raises
    ------
    DegenerateFit
        Fewer than three points remain above the floor (but not zero).
    """
    gammas = np.asarray(gammas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    used = errors >= floor
    n = int(np.sum(used))
    if n == 0:
        return float("inf"), float("nan"), used
    if n < 3:
        raise DegenerateFit(f"only {n} of {errors.size} errors exceed the floor {floor:.0e}")
    x, y = np.log(gammas[used]), np.log(errors[used])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2, used


def verdict_for(slope: float) -> str:
    if np.isinf(slope):
        return "exact"
    if slope >= SECOND_ORDER_SLOPE:
        return "second_order"
    if slope <= FIRST_ORDER_SLOPE:
        return "first_order"
    return "inconclusive"


def bias_order_fit(
    protocol_runner: Callable[[np.ndarray, KrausChannel], ReconstructionResult],
    a_true,
    c_spec: ChannelSpec,
    gammas,
    error_metric: Callable[[ReconstructionResult], float] = max_element_error,
) -> BiasReport:
    """Sweep the noise level and fit the order of the reconstruction error.

    Parameters
    ----------
    protocol_runner : callable
        ``runner(a_true, channel) -> ReconstructionResult``.
    a_true : array_like
    c_spec : ChannelSpec
        Family instantiated at each ``gamma``.
    gammas : array_like
        At least four strictly increasing values in ``(0, 0.1]`` spanning at
        least 1.5 decades.
    error_metric : callable
        Scalar error of a result; default is the largest identifiable
        per-element error.

    Returns
    -------
    BiasReport
    """
    g = _validate_sweep(gammas)
    a_true = linalg.validate_hermitian(a_true)
    errors = np.array([float(error_metric(protocol_runner(a_true, build_channel(c_spec, x)))) for x in g])
    if not np.all(np.isfinite(errors)):
        raise DegenerateFit("error metric returned non-finite values")
    slope, r2, used = fit_log_slope(g, errors)
    for arr in (g, errors, used):
        arr.flags.writeable = False
    return BiasReport(g, errors, slope, r2, verdict_for(slope), used)


def wvmp_runner(theorem: str, readout: str = "complex"):
    """Runner for :func:`bias_order_fit` using the weak-value recipe."""

    def run(a, c):
        return reconstruct_via_wvmp(theorem, a, c, readout=readout)

    return run


def strong_runner(pre_states):
    def run(a, c):
        return reconstruct_via_strong(a, c, pre_states)

    return run


def strong_postselect_runner(pairs):
    def run(a, c):
        return reconstruct_via_strong_postselect(a, c, pairs)

    return run


def informationally_complete_states() -> list:
    """Projectors onto ``|0>, |1>, |+>, |+i>``."""
    k = linalg.NAMED_KETS
    return [linalg.projector(k[n]) for n in ("zero", "one", "plus", "plus_i")]
