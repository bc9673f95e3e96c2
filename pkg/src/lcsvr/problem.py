"""Problem model: training data, linear constraints on the coefficients and
solver hyperparameters.

All containers are frozen dataclasses holding read-only float arrays. Shape
coercion happens at construction; the mathematical invariants (no duplicate
rows, no zero constraint rows, admissible hyperparameters) are checked by
:func:`validate_problem`, which reports every violation instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TrainingSet:
    """Design matrix ``X`` (samples are rows) and response ``y``."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", _frozen(self.X, 2, "X"))
        object.__setattr__(self, "y", _frozen(self.y, 1, "y"))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class LinearConstraints:
    """The polyhedron ``{beta : A beta <= b, Gamma beta = d}``.

    Either block may be empty (zero rows). Use :meth:`empty` for the
    unconstrained problem.
    """

    A: np.ndarray
    b: np.ndarray
    Gamma: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        G = np.array(self.Gamma, dtype=float)
        # a (0,) array is accepted as "no rows"; width is fixed by the other block
        if A.size == 0 and A.ndim < 2:
            A = A.reshape(0, G.shape[1] if G.ndim == 2 else 0)
        if G.size == 0 and G.ndim < 2:
            G = G.reshape(0, A.shape[1] if A.ndim == 2 else 0)
        object.__setattr__(self, "A", _frozen(A, 2, "A"))
        object.__setattr__(self, "Gamma", _frozen(G, 2, "Gamma"))
        object.__setattr__(self, "b", _frozen(np.reshape(self.b, -1), 1, "b"))
        object.__setattr__(self, "d", _frozen(np.reshape(self.d, -1), 1, "d"))

    @classmethod
    def empty(cls, p: int) -> "LinearConstraints":
        return cls(np.zeros((0, p)), np.zeros(0), np.zeros((0, p)), np.zeros(0))

    @property
    def k1(self) -> int:
        return self.A.shape[0]

    @property
    def k2(self) -> int:
        return self.Gamma.shape[0]

    def residuals(self, beta) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(A beta - b, Gamma beta - d)``."""
        beta = np.asarray(beta, dtype=float)
        return self.A @ beta - self.b, self.Gamma @ beta - self.d


@dataclass(frozen=True)
class Hyperparameters:
    """``C`` weights the tube loss, ``nu`` controls the support-vector fraction,
    ``tau`` is the KKT violation tolerance. ``max_iter=None`` means
    ``100 * (2n + k1 + k2)``, resolved by the solver."""

    C: float = 1.0
    nu: float = 0.5
    tau: float = 1e-3
    max_iter: int | None = None


@dataclass(frozen=True)
class PrimalSolution:
    beta: np.ndarray
    beta0: float
    epsilon: float
    support_flags: np.ndarray
    degenerate_intercept: bool = False

    def __post_init__(self):
        object.__setattr__(self, "beta", _frozen(self.beta, 1, "beta"))
        flags = np.array(self.support_flags, dtype=bool)
        flags.setflags(write=False)
        object.__setattr__(self, "support_flags", flags)


@dataclass
class ValidationResult:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "OK" if self.ok else "; ".join(self.violations)


class ProblemValidationError(ValueError):
    def __init__(self, result: ValidationResult):
        super().__init__(str(result))
        self.result = result


def duplicate_rows(X) -> list[tuple[int, int]]:
    """Pairs ``(i, j)``, ``i < j``, of exactly equal rows of ``X``."""
    X = np.asarray(X, dtype=float) + 0.0  # folds -0.0 into 0.0
    seen: dict[bytes, int] = {}
    pairs = []
    for j, row in enumerate(X):
        key = row.tobytes()
        if key in seen:
            pairs.append((seen[key], j))
        else:
            seen[key] = j
    return pairs


def validate_problem(ts: TrainingSet, lc: LinearConstraints, hp: Hyperparameters) -> ValidationResult:
    """Collect every invariant violation of a (data, constraints, hyperparameters) triple."""
    v: list[str] = []
    n, p = ts.X.shape
    if n < 2:
        v.append(f"need at least 2 samples, got {n}")
    if p < 1:
        v.append("need at least 1 feature")
    if ts.y.shape[0] != n:
        v.append(f"dimension mismatch: X has {n} rows but y has length {ts.y.shape[0]}")
    if not (np.all(np.isfinite(ts.X)) and np.all(np.isfinite(ts.y))):
        v.append("non-finite entries in X or y")
    else:
        for i, j in duplicate_rows(ts.X):
            v.append(f"duplicate rows ({i},{j})")

    for name, M, rhs in (("A", lc.A, lc.b), ("Gamma", lc.Gamma, lc.d)):
        if M.shape[0] and M.shape[1] != p:
            v.append(f"dimension mismatch: {name} has {M.shape[1]} columns, expected {p}")
        if rhs.shape[0] != M.shape[0]:
            rname = "b" if name == "A" else "d"
            v.append(f"dimension mismatch: {name} has {M.shape[0]} rows but {rname} has length {rhs.shape[0]}")
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(rhs))):
            v.append(f"non-finite entries in {name} constraints")
        for i in np.flatnonzero(~np.any(M != 0, axis=1)):
            v.append(f"zero row in {name} at index {i}")

    v.extend(hyperparameter_violations(hp))
    return ValidationResult(v)


def hyperparameter_violations(hp: Hyperparameters) -> list[str]:
    v = []
    if not (hp.C > 0 and np.isfinite(hp.C)):
        v.append(f"C must be positive, got {hp.C}")
    if not (0 < hp.nu <= 1):
        v.append(f"nu must lie in (0, 1], got {hp.nu}")
    if not (hp.tau > 0 and np.isfinite(hp.tau)):
        v.append(f"tau must be positive, got {hp.tau}")
    if hp.max_iter is not None and not (int(hp.max_iter) == hp.max_iter and hp.max_iter >= 1):
        v.append(f"max_iter must be a positive integer, got {hp.max_iter}")
    return v
