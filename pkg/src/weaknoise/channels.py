"""Noise-parameterized Kraus channel families.

A family is described by a :class:`ChannelSpec` and instantiated at a noise
parameter ``gamma`` in ``[0, 1]`` by :func:`build_channel`; ``gamma = 0`` is
always the identity channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DimMismatch, GammaOutOfRange, InvalidSpec, StepTooLarge

KINDS = ("pauli", "amplitude_damping", "phase_damping", "prob_unitary", "mixed_unitary", "composed")

# Families whose Kraus action is affine in gamma; their generator is exact.
LINEAR_KINDS = ("pauli", "prob_unitary", "mixed_unitary")

DEFAULT_STEP = 1e-4
MAX_STEP = 1e-2


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """Description of a channel family.

    Use the classmethod constructors rather than the raw initializer.

    ``pauli``
        ``(1 - gamma) rho + gamma * sum_s weights[s] s rho s`` over X, Y, Z.
    ``amplitude_damping`` / ``phase_damping``
        Single-qubit damping channels.
    ``prob_unitary``
        ``(1 - gamma) rho + gamma U rho U^dagger``.
    ``mixed_unitary``
        ``(1 - gamma) rho + gamma * sum_i w_i U_i rho U_i^dagger``.
    ``composed``
        Sequential composition; component ``i`` runs at ``weights[i] * gamma``
        and the first listed component acts first.
    """

    kind: str
    weights: dict = field(default_factory=dict)
    unitaries: tuple = ()
    components: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown channel kind {self.kind!r}; expected one of {KINDS}")

    @classmethod
    def pauli(cls, x: float = 0.0, y: float = 0.0, z: float = 0.0, tol: float = 1e-12):
        w = {"X": float(x), "Y": float(y), "Z": float(z)}
        if any(v < 0 for v in w.values()):
            raise InvalidSpec(f"Pauli weights must be nonnegative, got {w}")
        total = sum(w.values())
        if abs(total - 1.0) > tol:
            raise InvalidSpec(f"Pauli weights must sum to 1, got {total!r}")
        return cls("pauli", weights=w)

    @classmethod
    def amplitude_damping(cls):
        return cls("amplitude_damping")

    @classmethod
    def phase_damping(cls):
        return cls("phase_damping")

    @classmethod
    def prob_unitary(cls, u):
        u = linalg.as_square(u)
        if not linalg.is_unitary(u):
            raise InvalidSpec("ProbUnitary requires a unitary matrix (tolerance 1e-12)")
        u.flags.writeable = False
        return cls("prob_unitary", unitaries=(u,))

    @classmethod
    def mixed_unitary(cls, unitaries, weights, tol: float = 1e-12):
        us = tuple(linalg.as_square(u) for u in unitaries)
        w = [float(v) for v in weights]
        if not us or len(us) != len(w):
            raise InvalidSpec("mixed_unitary needs one weight per unitary")
        if any(not linalg.is_unitary(u) for u in us):
            raise InvalidSpec("mixed_unitary requires unitary matrices (tolerance 1e-12)")
        if any(v < 0 for v in w) or abs(sum(w) - 1.0) > tol:
            raise InvalidSpec(f"mixed_unitary weights must be nonnegative and sum to 1, got {w}")
        if len({u.shape for u in us}) != 1:
            raise InvalidSpec("mixed_unitary unitaries must share a dimension")
        return cls("mixed_unitary", weights={i: v for i, v in enumerate(w)}, unitaries=us)

    @classmethod
    def composed(cls, components):
        """``components`` is a sequence of ``(ChannelSpec, weight)`` pairs."""
        comps = tuple((s, float(w)) for s, w in components)
        if not comps:
            raise InvalidSpec("composed channel needs at least one component")
        for s, w in comps:
            if not isinstance(s, ChannelSpec):
                raise InvalidSpec("composed components must be ChannelSpec instances")
            if w < 0 or w > 1:
                raise InvalidSpec(f"composed weights must lie in [0, 1], got {w}")
        return cls("composed", components=comps)

    @classmethod
    def adpd(cls, lam_ad: float = 0.5, lam_pd: float = 0.5):
        """Amplitude damping followed by phase damping."""
        return cls.composed([(cls.amplitude_damping(), lam_ad), (cls.phase_damping(), lam_pd)])

    @property
    def dim(self):
        if self.kind in ("prob_unitary", "mixed_unitary"):
            return self.unitaries[0].shape[0]
        if self.kind == "composed":
            return self.components[0][0].dim
        return 2

    @property
    def unital(self) -> bool:
        """True when every member of the family is unital by construction."""
        if self.kind in LINEAR_KINDS or self.kind == "phase_damping":
            return True
        if self.kind == "composed":
            return all(s.unital or w == 0 for s, w in self.components)
        return False

    def leaf_kinds(self) -> set:
        if self.kind == "composed":
            out = set()
            for s, w in self.components:
                if w > 0:
                    out |= s.leaf_kinds()
            return out
        return {self.kind}

    def to_dict(self) -> dict:
        """Plain-JSON form (complex entries as ``[re, im]`` pairs)."""
        d = {"kind": self.kind}
        if self.kind == "pauli":
            d["weights"] = dict(self.weights)
        elif self.kind == "prob_unitary":
            d["unitary"] = _matrix_to_pairs(self.unitaries[0])
        elif self.kind == "mixed_unitary":
            d["unitaries"] = [_matrix_to_pairs(u) for u in self.unitaries]
            d["weights"] = [self.weights[i] for i in range(len(self.unitaries))]
        elif self.kind == "composed":
            d["components"] = [{"channel": s.to_dict(), "weight": w} for s, w in self.components]
        return d

    @classmethod
    def from_dict(cls, d: dict):
        try:
            kind = d["kind"]
        except (KeyError, TypeError):
            raise InvalidSpec("channel spec needs a 'kind' field") from None
        if kind == "pauli":
            w = d.get("weights", {})
            return cls.pauli(x=w.get("X", 0.0), y=w.get("Y", 0.0), z=w.get("Z", 0.0))
        if kind == "amplitude_damping":
            return cls.amplitude_damping()
        if kind == "phase_damping":
            return cls.phase_damping()
        if kind == "prob_unitary":
            return cls.prob_unitary(_pairs_to_matrix(d["unitary"]))
        if kind == "mixed_unitary":
            return cls.mixed_unitary([_pairs_to_matrix(u) for u in d["unitaries"]], d["weights"])
        if kind == "composed":
            return cls.composed([(cls.from_dict(c["channel"]), c["weight"]) for c in d["components"]])
        raise InvalidSpec(f"unknown channel kind {kind!r}")


def _matrix_to_pairs(m):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _pairs_to_matrix(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """A concrete channel ``rho -> sum_k E_k rho E_k^dagger``.

    ``gamma`` and ``spec`` are ``None`` for channels that are not a member of
    a built-in family (e.g. hand-built Kraus sets).
    """

    kraus_ops: tuple
    gamma: float | None = None
    spec: ChannelSpec | None = None

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    def __call__(self, rho) -> np.ndarray:
        return _kraus_sum(self.kraus_ops, np.asarray(rho, dtype=complex))

    def superoperator(self) -> np.ndarray:
        """Column-stacking superoperator ``sum_k conj(E_k) (x) E_k``."""
        return sum(np.kron(e.conj(), e) for e in self.kraus_ops)


def kraus_channel(ops, gamma=None, spec=None) -> KrausChannel:
    ops = tuple(linalg.as_square(e) for e in ops)
    if not ops:
        raise InvalidSpec("a Kraus channel needs at least one operator")
    if len({e.shape for e in ops}) != 1:
        raise DimMismatch("Kraus operators must share a shape")
    for e in ops:
        e.flags.writeable = False
    return KrausChannel(ops, gamma, spec)


def _kraus_sum(ops, rho):
    out = np.zeros_like(rho)
    for e in ops:
        out += e @ rho @ e.conj().T
    return out


def _check_gamma(gamma):
    g = float(gamma)
    if not 0.0 <= g <= 1.0 or not np.isfinite(g):
        raise GammaOutOfRange(f"gamma must lie in [0, 1], got {gamma!r}")
    return g


def _kraus_ops(spec: ChannelSpec, g: float):
    if spec.kind == "pauli":
        ops = [np.sqrt(1 - g) * linalg.I2]
        ops += [np.sqrt(g * w) * linalg.PAULIS[s] for s, w in spec.weights.items() if w > 0]
        return ops
    if spec.kind == "amplitude_damping":
        e0 = np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex)
        e1 = np.array([[0, np.sqrt(g)], [0, 0]], dtype=complex)
        return [e0, e1]
    if spec.kind == "phase_damping":
        e0 = np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex)
        e1 = np.array([[0, 0], [0, np.sqrt(g)]], dtype=complex)
        return [e0, e1]
    if spec.kind == "prob_unitary":
        u = spec.unitaries[0]
        return [np.sqrt(1 - g) * np.eye(u.shape[0]), np.sqrt(g) * u]
    if spec.kind == "mixed_unitary":
        d = spec.dim
        ops = [np.sqrt(1 - g) * np.eye(d, dtype=complex)]
        ops += [np.sqrt(g * spec.weights[i]) * u for i, u in enumerate(spec.unitaries) if spec.weights[i] > 0]
        return ops
    # composed: later components act after earlier ones
    ops = [np.eye(spec.dim, dtype=complex)]
    for sub, w in spec.components:
        ops = [outer @ inner for inner in ops for outer in _kraus_ops(sub, w * g)]
    return ops


def build_channel(spec: ChannelSpec, gamma: float) -> KrausChannel:
    """Instantiate ``spec`` at noise parameter ``gamma``."""
    g = _check_gamma(gamma)
    return kraus_channel(_kraus_ops(spec, g), gamma=g, spec=spec)


def apply_channel(c: KrausChannel, rho) -> np.ndarray:
    rho = linalg.validate_density(rho)
    if rho.shape[0] != c.dim:
        raise DimMismatch(f"state has dimension {rho.shape[0]}, channel acts on {c.dim}")
    return linalg.validate_density(c(rho))


def compose_channels(inner: KrausChannel, outer: KrausChannel) -> KrausChannel:
    """``outer`` after ``inner``: Kraus set of all products ``F_j E_i``."""
    if inner.dim != outer.dim:
        raise DimMismatch(f"cannot compose channels on dimensions {inner.dim} and {outer.dim}")
    ops = [f @ e for e in inner.kraus_ops for f in outer.kraus_ops]
    gamma = inner.gamma if inner.gamma == outer.gamma else None
    return kraus_channel(ops, gamma=gamma)


def completeness_deviation(c: KrausChannel) -> float:
    s = sum(e.conj().T @ e for e in c.kraus_ops)
    return float(np.linalg.norm(s - np.eye(c.dim), 2))


def check_trace_preserving(c: KrausChannel, tol: float = 1e-10) -> bool:
    return completeness_deviation(c) <= tol


def check_unital(c: KrausChannel, tol: float = 1e-10) -> bool:
    mm = np.eye(c.dim) / c.dim
    return float(np.linalg.norm(c(mm) - mm, 2)) <= tol


# -- first-order generators --------------------------------------------------

def _exact_generator(spec: ChannelSpec, rho):
    if spec.kind == "pauli":
        return sum(w * (linalg.PAULIS[s] @ rho @ linalg.PAULIS[s]) for s, w in spec.weights.items()) - rho
    if spec.kind == "prob_unitary":
        u = spec.unitaries[0]
        return u @ rho @ u.conj().T - rho
    return sum(spec.weights[i] * (u @ rho @ u.conj().T) for i, u in enumerate(spec.unitaries)) - rho


def _one_sided(spec, rho, h):
    f0 = _kraus_sum(_kraus_ops(spec, 0.0), rho)
    f1 = _kraus_sum(_kraus_ops(spec, h), rho)
    f2 = _kraus_sum(_kraus_ops(spec, 2 * h), rho)
    return (-3 * f0 + 4 * f1 - f2) / (2 * h)


def channel_derivative_at_zero(spec: ChannelSpec, rho, h: float = DEFAULT_STEP) -> np.ndarray:
    """``d/dgamma E_gamma(rho)`` at ``gamma = 0``.

    Families affine in gamma return the exact generator.  The others use the
    one-sided second-order difference ``(-3 E_0 + 4 E_h - E_2h) / (2h)``
    with one Richardson step, since they are only defined for gamma >= 0.
    ``rho`` may be any square matrix (the map is linear).
    """
    if not 0 < h <= MAX_STEP:
        raise StepTooLarge(f"step h must lie in (0, {MAX_STEP}], got {h!r}")
    rho = linalg.as_square(rho)
    if rho.shape[0] != spec.dim:
        raise DimMismatch(f"state has dimension {rho.shape[0]}, channel acts on {spec.dim}")
    if spec.kind in LINEAR_KINDS:
        return _exact_generator(spec, rho)
    coarse = _one_sided(spec, rho, h)
    fine = _one_sided(spec, rho, h / 2)
    return (4 * fine - coarse) / 3


@dataclass(frozen=True, eq=False)
class ChannelGenerator:
    """Linear map ``M`` with ``E_gamma(rho) = rho + gamma M(rho) + O(gamma^2)``.

    Stored as its column-stacking superoperator, i.e. its action on the
    matrix-unit basis.
    """

    superoperator: np.ndarray
    spec: ChannelSpec

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.superoperator.shape[0])))

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        d = self.dim
        return (self.superoperator @ rho.reshape(-1, order="F")).reshape(d, d, order="F")


def channel_generator(spec: ChannelSpec, h: float = DEFAULT_STEP) -> ChannelGenerator:
    d = spec.dim
    cols = []
    for j in range(d):
        for i in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[i, j] = 1.0
            cols.append(channel_derivative_at_zero(spec, unit, h).reshape(-1, order="F"))
    return ChannelGenerator(np.column_stack(cols), spec)


# -- closed-form generators ---------------------------------------------------

def amplitude_damping_generator(rho) -> np.ndarray:
    """``[[r22, -r12/2], [-r21/2, -r22]]``: first-order amplitude-damping term."""
    r = np.asarray(rho, dtype=complex)
    return np.array([[r[1, 1], -r[0, 1] / 2], [-r[1, 0] / 2, -r[1, 1]]], dtype=complex)


def phase_damping_generator(rho) -> np.ndarray:
    """``[[0, -r12/2], [-r21/2, 0]]``: first-order phase-damping term."""
    r = np.asarray(rho, dtype=complex)
    return np.array([[0, -r[0, 1] / 2], [-r[1, 0] / 2, 0]], dtype=complex)


def analytic_generator(spec: ChannelSpec, rho) -> np.ndarray:
    """Closed-form ``d/dgamma E_gamma(rho)`` at zero, no finite differences.

    A composed family contributes ``sum_i w_i M_i(rho)`` because every
    component is the identity at ``gamma = 0``.
    """
    rho = np.asarray(rho, dtype=complex)
    if spec.kind in LINEAR_KINDS:
        return _exact_generator(spec, rho)
    if spec.kind == "amplitude_damping":
        return amplitude_damping_generator(rho)
    if spec.kind == "phase_damping":
        return phase_damping_generator(rho)
    return sum(w * analytic_generator(s, rho) for s, w in spec.components)
