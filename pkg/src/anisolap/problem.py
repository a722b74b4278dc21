"""Problem data: grids, variable exponents, nonlinearities and instances.

A grid function lives on Z[0, T+1] and is stored with its two Dirichlet
boundary zeros, so ``u.values`` has length ``T + 2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

Scalar = Callable[[float], float]


def _is_object(a) -> bool:
    return isinstance(a, np.ndarray) and a.dtype == object


@dataclass(frozen=True)
class ExponentMap:
    """Variable exponent p(k) for k in Z[0, T+1]."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def constant(cls, p: float, T: int) -> "ExponentMap":
        return cls((float(p),) * (T + 2))

    @classmethod
    def alternating(cls, high: float, low: float, T: int) -> "ExponentMap":
        # p(0) = high, then low, high, ...
        return cls(tuple(high if k % 2 == 0 else low for k in range(T + 2)))

    @property
    def T(self) -> int:
        return len(self.values) - 2

    @property
    def p_minus(self) -> float:
        return min(self.values)

    @property
    def p_plus(self) -> float:
        return max(self.values)

    @property
    def is_constant(self) -> bool:
        return all(v == self.values[0] for v in self.values)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class StateVector:
    """Grid function u on Z[0, T+1] with u(0) = u(T+1) = 0."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if not isinstance(v, np.ndarray):
            v = np.asarray(v, dtype=object if _has_mpf(v) else float)
        if v.ndim != 1 or v.size < 3:
            raise ValueError("a state needs at least one interior node")
        if v[0] != 0 or v[-1] != 0:
            raise ValueError("Dirichlet boundary values must be exactly zero")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_interior(cls, interior) -> "StateVector":
        interior = np.asarray(interior, dtype=object if _has_mpf(interior) else float)
        zero = interior.dtype.type(0) if interior.dtype != object else 0
        return cls(np.concatenate(([zero], interior, [zero])))

    @classmethod
    def zeros(cls, T: int) -> "StateVector":
        return cls(np.zeros(T + 2))

    @property
    def T(self) -> int:
        return self.values.size - 2

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    def __len__(self) -> int:
        return self.values.size


def _has_mpf(v) -> bool:
    import mpmath

    return any(isinstance(x, mpmath.mpf) for x in np.ravel(np.asarray(v, dtype=object)))


def forward_difference(u: StateVector) -> np.ndarray:
    """Return Δu(k-1) = u(k) - u(k-1) for k in Z[1, T+1]."""
    v = u.values
    return v[1:] - v[:-1]


def norms(u: StateVector) -> tuple:
    """(H-norm, sup-norm) of u."""
    d = forward_difference(u)
    if _is_object(d):
        import mpmath

        h = mpmath.sqrt(mpmath.fsum(x * x for x in d))
        sup = max(abs(x) for x in u.interior)
        return h, sup
    return float(np.sqrt(np.dot(d, d))), float(np.max(np.abs(u.interior)))


class NonlinearityFamily:
    """The functions f_k and their antiderivatives F_k, k in Z[1, T].

    ``F`` may be omitted, in which case antiderivatives are computed by
    adaptive quadrature. ``df`` (optional) supplies exact derivatives f'_k.
    ``nonnegative`` declares f_k >= 0, which makes every F_k nondecreasing.
    """

    def __init__(
        self,
        T: int,
        f: Sequence[Scalar] | Scalar,
        F: Sequence[Scalar] | Scalar | None = None,
        df: Sequence[Scalar] | Scalar | None = None,
        *,
        nonnegative: bool = False,
        quad_rtol: float = 1e-12,
        quad_atol: float = 1e-14,
        name: str = "custom",
    ):
        self.T = T
        self.f = _expand(f, T)
        self.df = _expand(df, T) if df is not None else None
        if F is None:
            self.antiderivative_mode = "adaptive_quadrature"
            self.F = [self._quad_antiderivative(fk) for fk in self.f]
        else:
            self.antiderivative_mode = "closed_form"
            self.F = _expand(F, T)
        self.nonnegative = nonnegative
        self.quad_rtol = quad_rtol
        self.quad_atol = quad_atol
        self.name = name

    def _quad_antiderivative(self, fk: Scalar) -> Scalar:
        def Fk(t):
            t = float(t)
            if t == 0.0:
                return 0.0
            val, _ = integrate.quad(fk, 0.0, t, epsabs=self.quad_atol, epsrel=self.quad_rtol, limit=200)
            return val

        return Fk

    @property
    def identical(self) -> bool:
        """True when every k shares the same callables (lets callers cache)."""
        return all(fk is self.f[0] for fk in self.f) and all(Fk is self.F[0] for Fk in self.F)

    def f_values(self, x: np.ndarray) -> np.ndarray:
        out = [fk(xk) for fk, xk in zip(self.f, x)]
        return np.array(out, dtype=object if _is_object(x) else float)

    def F_values(self, x: np.ndarray) -> np.ndarray:
        out = [Fk(xk) for Fk, xk in zip(self.F, x)]
        return np.array(out, dtype=object if _is_object(x) else float)

    def df_values(self, x: np.ndarray) -> np.ndarray:
        if self.df is not None:
            out = [d(xk) for d, xk in zip(self.df, x)]
        else:
            out = [_central_derivative(fk, xk) for fk, xk in zip(self.f, x)]
        return np.array(out, dtype=object if _is_object(x) else float)


def _expand(obj, T):
    if callable(obj):
        return [obj] * T
    obj = list(obj)
    if len(obj) != T:
        raise ValueError(f"expected {T} functions, got {len(obj)}")
    return obj


def _central_derivative(fk, t):
    h = 1e-7 * max(1.0, abs(float(t)))
    return (fk(t + h) - fk(t - h)) / (2 * h)


@dataclass(frozen=True)
class ProblemInstance:
    """The Dirichlet problem with data (T, p(.), {f_k}, lambda)."""

    T: int
    exponents: ExponentMap
    nonlinearity: NonlinearityFamily
    lam: float
    meta: dict = field(default_factory=dict, compare=False)

    def with_lambda(self, lam: float) -> "ProblemInstance":
        return ProblemInstance(self.T, self.exponents, self.nonlinearity, lam, dict(self.meta))


@dataclass
class ValidationReport:
    violations: list
    notes: list

    @property
    def valid(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        return "valid" if self.valid else "; ".join(self.violations)


def validate(instance: ProblemInstance) -> ValidationReport:
    """Collect every violated invariant; never raises."""
    violations, notes = [], []
    T = instance.T
    if not isinstance(T, (int, np.integer)) or T < 1:
        violations.append(f"T must be a positive integer, got {T!r}")
    elif T < 2:
        notes.append("T = 1 is outside the scope of the multiplicity results (they assume T >= 2)")
    p = instance.exponents.values
    if len(p) != T + 2:
        violations.append(f"exponent map has {len(p)} values, expected T+2 = {T + 2}")
    for k, pk in enumerate(p):
        if not pk > 1:
            violations.append(f"exponent not > 1 at k={k}")
    if not instance.lam > 0:
        violations.append("lambda must be positive")
    nl = instance.nonlinearity
    if nl.T != T:
        violations.append(f"nonlinearity defined for T={nl.T}, instance has T={T}")
    for k, Fk in enumerate(nl.F, start=1):
        try:
            v = Fk(0.0)
        except Exception as exc:  # diagnostic path
            violations.append(f"F_{k}(0) raised {exc!r}")
            continue
        if v != 0:
            violations.append(f"F_{k}(0) = {v} != 0")
    return ValidationReport(violations, notes)
