"""Statistics of the weak-value bias under random unitary noise.

For the channel ``(1 - p) rho + p U rho U^dagger`` the weak value is exactly
linear in ``p`` with slope

    delta(U) = [<f|A U rho U^dagger|f> - A_w <f|U rho U^dagger|f>] / <f|rho|f>.

With ``U`` Haar-distributed on a qubit and pure ``rho``, ``f``, the first two
moments of ``delta`` have closed forms in ``<A>_f``, ``Var(A)_f``, ``A_w``
and the overlap; this module estimates them by Monte Carlo and compares.

The module also provides the Hadamard channel examples showing that the
Pauli-safe state pairs are not safe against every unitary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import linalg
from .channels import ChannelSpec
from .errors import ExcludedParameter, MeanZero
from .weakvalue import BiasValue, as_post_vector, bias_first_order_analytic, weak_value

MIN_SAMPLES = 10_000
CHUNK = 50_000
JACKKNIFE_GROUPS = 200
DEFAULT_EPSILON = 0.05


def theory_moments(a, pre, post) -> dict:
    """Closed-form Haar mean, second moment and variance of ``delta``.

    ``pre`` and ``post`` must be pure qubit states.
    """
    a = linalg.validate_hermitian(a)
    s, f = as_post_vector(pre), as_post_vector(post)
    aw = weak_value(a, s, f)
    p = aw.overlap
    exp_f = float(np.real(f.conj() @ a @ f))
    sq_f = float(np.real(f.conj() @ a @ a @ f))
    var_f = sq_f - exp_f**2
    gap = exp_f - aw.value
    mean = gap / (2 * p)
    second = (exp_f**2 + sq_f + 2 * abs(aw.value) ** 2 - 4 * exp_f * aw.value.real) / (6 * p**2)
    var = (2 * var_f + abs(gap) ** 2) / (12 * p**2)
    return {"mean": complex(mean), "second_moment": float(second), "variance": float(var),
            "gap": complex(gap), "variance_f": var_f, "overlap": p}


def delta_samples(a, pre, post, unitaries) -> np.ndarray:
    """``delta(U)`` for a batch of unitaries of shape ``(n, d, d)``."""
    a = linalg.validate_hermitian(a)
    s, f = as_post_vector(pre), as_post_vector(post)
    aw = weak_value(a, s, f)
    us = unitaries @ s  # (n, d)
    amp = us @ f.conj()  # <f|U|s>
    a_amp = us @ (a @ f).conj()  # <f|A U|s>
    return (a_amp * amp.conj() - aw.value * np.abs(amp) ** 2) / aw.overlap


def jackknife_se(samples: np.ndarray, stat, groups: int = JACKKNIFE_GROUPS) -> float:
    """Delete-a-group jackknife standard error of ``stat(samples)``."""
    n = samples.shape[0]
    groups = min(groups, n)
    idx = np.array_split(np.arange(n), groups)
    full = stat(samples)
    mask = np.ones(n, dtype=bool)
    reps = []
    for g in idx:
        mask[g] = False
        reps.append(stat(samples[mask]))
        mask[g] = True
    reps = np.asarray(reps)
    sizes = np.array([len(g) for g in idx])
    # weighted jackknife for unequal group sizes
    h = n / sizes
    pseudo = h * full - (h - 1) * reps
    est = np.mean(pseudo)
    var = np.sum((pseudo - est) * np.conj(pseudo - est)).real / (groups * (groups - 1)) if groups > 1 else np.nan
    return float(np.sqrt(var))


@dataclass(frozen=True, eq=False)
class HaarDeltaStats:
    """Monte-Carlo estimates of the bias moments with their theory values.

    ``mean_se`` is the standard error of the complex mean,
    ``sqrt(E|delta - mean|^2 / n)`` as estimated by the jackknife.
    """

    n_samples: int
    mean_est: complex
    mean_se: float
    second_moment_est: float
    second_moment_se: float
    theory_mean: complex
    theory_second_moment: float
    theory_var: float
    prob_small_est: float
    samples: np.ndarray
    theory: dict

    @property
    def var_est(self) -> float:
        return float(np.var(self.samples))

    def mean_z(self) -> float:
        return abs(self.mean_est - self.theory_mean) / self.mean_se if self.mean_se > 0 else 0.0

    def second_moment_z(self) -> float:
        diff = abs(self.second_moment_est - self.theory_second_moment)
        return diff / self.second_moment_se if self.second_moment_se > 0 else 0.0

    def summary(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "mean_est": [self.mean_est.real, self.mean_est.imag],
            "mean_se": self.mean_se,
            "second_moment_est": self.second_moment_est,
            "second_moment_se": self.second_moment_se,
            "theory_mean": [self.theory_mean.real, self.theory_mean.imag],
            "theory_second_moment": self.theory_second_moment,
            "theory_var": self.theory_var,
            "var_est": self.var_est,
            "prob_small_est": self.prob_small_est if np.isfinite(self.prob_small_est) else None,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.summary(), sort_keys=True, indent=2) + "\n"
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def mc_delta_stats(a, pre_pure, post, n: int = 200_000, seed: int = 0, epsilon: float = DEFAULT_EPSILON) -> HaarDeltaStats:
    """Sample ``delta(U)`` over Haar-random ``U`` and summarize.

    Parameters
    ----------
    a : array_like
        Hermitian observable.
    pre_pure, post : array_like
        Pure states (vectors or rank-1 density matrices).
    n : int
        Number of samples, at least 10 000.
    seed : int
        Chunk ``k`` of 50 000 unitaries is drawn with seed ``seed + k``.
    epsilon : float
        ``prob_small_est`` is the fraction with ``|delta| <= epsilon |mean|``.

    Raises
    ------
    OrthogonalStates
        Pre and post have zero overlap.
    """
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    a = linalg.validate_hermitian(a)
    theory = theory_moments(a, pre_pure, post)
    dim = a.shape[0]
    parts = []
    for k, start in enumerate(range(0, n, CHUNK)):
        m = min(CHUNK, n - start)
        parts.append(delta_samples(a, pre_pure, post, linalg.haar_unitaries(dim, m, seed + k)))
    x = np.concatenate(parts)
    x.flags.writeable = False
    sq = np.abs(x) ** 2
    mean_se = jackknife_se(x, np.mean)
    second_se = jackknife_se(sq, np.mean)
    scale = abs(theory["mean"])
    small = float(np.mean(np.abs(x) <= epsilon * scale)) if scale > 1e-12 else float("nan")
    return HaarDeltaStats(
        n_samples=int(n),
        mean_est=complex(np.mean(x)),
        mean_se=mean_se,
        second_moment_est=float(np.mean(sq)),
        second_moment_se=second_se,
        theory_mean=theory["mean"],
        theory_second_moment=theory["second_moment"],
        theory_var=theory["variance"],
        prob_small_est=small,
        samples=x,
        theory=theory,
    )


@dataclass(frozen=True)
class ChebyshevResult:
    bound: float
    empirical: float
    satisfied: bool
    standard_error: float


def chebyshev_check(stats: HaarDeltaStats, epsilon: float = DEFAULT_EPSILON, tol: float = 1e-12) -> ChebyshevResult:
    """Compare the near-zero frequency of ``delta`` with the Chebyshev bound.

    ``bound = Var / |mean|**2`` evaluated from the closed forms;
    ``empirical`` is the fraction of samples with ``|delta| <= epsilon |mean|``.
    ``satisfied`` allows three binomial standard errors of slack.

    Raises
    ------
    MeanZero
        The theoretical mean vanishes, so the bound is undefined.
    """
    mu = abs(stats.theory_mean)
    if mu <= tol:
        raise MeanZero(f"theoretical mean {mu:.3e} is zero; the bound is undefined")
    gap2 = abs(stats.theory["gap"]) ** 2
    bound = (2 * stats.theory["variance_f"] + gap2) / (3 * gap2)
    empirical = float(np.mean(np.abs(stats.samples) <= epsilon * mu))
    se = float(np.sqrt(empirical * (1 - empirical) / stats.n_samples))
    return ChebyshevResult(float(bound), empirical, bool(empirical <= bound + 3 * se), se)


# -- Hadamard counterexamples ----------------------------------------------------

def hadamard_family_pair(family: int, r: float):
    """Pauli-safe pair of the given family at parameter ``r``.

    1: ``([[1/2, r], [r, 1/2]], |+>)``; 2: ``(diag(r, 1 - r), |0>)``;
    3: ``(diag(r, 1 - r), |1>)``.
    """
    k = linalg.NAMED_KETS
    if family == 1:
        if r == -0.5:
            raise ExcludedParameter("r = -1/2 makes the pair orthogonal")
        return linalg.validate_density([[0.5, r], [r, 0.5]]), k["plus"]
    if family == 2:
        if r == 0:
            raise ExcludedParameter("r = 0 makes the pair orthogonal")
        return linalg.validate_density(np.diag([r, 1 - r])), k["zero"]
    if family == 3:
        if r == 1:
            raise ExcludedParameter("r = 1 makes the pair orthogonal")
        return linalg.validate_density(np.diag([r, 1 - r])), k["one"]
    raise ValueError(f"family must be 1, 2 or 3, got {family!r}")


HADAMARD_SPEC = ChannelSpec.prob_unitary(linalg.HADAMARD)

MAXIMALLY_MIXED_PARAMETER = {1: 0.0, 2: 0.5, 3: 0.5}


def counterexample_hadamard(a, family: int, r: float) -> BiasValue:
    """First-order bias of a Pauli-safe pair under the Hadamard channel."""
    pre, post = hadamard_family_pair(family, r)
    return bias_first_order_analytic(a, pre, post, HADAMARD_SPEC)


def hadamard_bias_numerator(a, family: int, r: float) -> complex:
    """Closed form of ``delta * overlap**2`` for the Hadamard channel."""
    a = np.asarray(a, dtype=complex)
    a11, a12, a21, a22 = a[0, 0], a[0, 1], a[1, 0], a[1, 1]
    if family == 1:
        return complex(r * (1 + 2 * r) * (a11 - a12 + a21 - a22) / 4)
    if family == 2:
        return complex(a12 * r * (2 * r - 1) / 2)
    if family == 3:
        return complex(a21 * (2 * r - 1) * (1 - r) / 2)
    raise ValueError(f"family must be 1, 2 or 3, got {family!r}")
