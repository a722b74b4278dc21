"""Energy functional J = Phi - lambda * Psi, its derivatives and the strong residual.

Every routine accepts float64 states and object arrays of ``mpmath.mpf``;
the latter keep very small solutions (2^-5040 and below) representable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import ProblemInstance, StateVector, forward_difference, norms


class SingularHessian(ArithmeticError):
    """|Δu| vanishes where p < 2, so the second derivative is unbounded."""


@dataclass(frozen=True)
class EnergyBreakdown:
    phi: float
    psi: float
    j_lambda: float


@dataclass(frozen=True)
class CoercivityReport:
    growth_confirmed: bool
    radius: float
    samples: int
    phi_at_one: float
    min_phi_at_radius: float
    monotone_failures: int
    ts: list


def _is_object(a) -> bool:
    return a.dtype == object


def abs_pow(x: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Elementwise |x|^e with |0|^0 = 1 and |0|^e = 0 for e > 0."""
    out = np.empty_like(x)
    for i, (xi, ei) in enumerate(zip(x, e)):
        if ei == 0:
            out[i] = 1
        elif xi == 0:
            if ei < 0:
                raise SingularHessian(f"0 raised to negative power {ei}")
            out[i] = 0 * xi
        else:
            out[i] = abs(xi) ** ei
    return out


def _abs_pow_float(x: np.ndarray, e: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    with np.errstate(divide="ignore"):
        out = np.where(e == 0, 1.0, np.where(ax == 0, 0.0, ax ** np.where(ax == 0, 1.0, e)))
    return out


def _pow(x, e):
    if _is_object(x):
        return abs_pow(x, e)
    return _abs_pow_float(x, e)


def phi_p(s: np.ndarray, p: np.ndarray) -> np.ndarray:
    """φ_p(s) = |s|^{p-2} s, with φ_p(0) = 0 for every p > 1."""
    s = np.asarray(s)
    p = np.asarray(p, dtype=float)
    if _is_object(s):
        out = np.empty_like(s)
        for i, (si, pi) in enumerate(zip(s, p)):
            out[i] = 0 * si if si == 0 else si * abs(si) ** (pi - 2)
        return out
    a = np.abs(s)
    safe = np.where(a == 0, 1.0, a)
    return np.where(a == 0, 0.0, s * safe ** (p - 2))


def _mpf_sum(x):
    if _is_object(x):
        import mpmath

        return mpmath.fsum(x)
    return float(np.sum(x))


def phi_psi(instance: ProblemInstance, u: StateVector) -> EnergyBreakdown:
    p = instance.exponents.array()[:-1]
    d = forward_difference(u)
    phi = _mpf_sum(_pow(d, p) / p)
    psi = _mpf_sum(instance.nonlinearity.F_values(u.interior))
    return EnergyBreakdown(phi, psi, phi - instance.lam * psi)


def phi_only(instance: ProblemInstance, u: StateVector):
    p = instance.exponents.array()[:-1]
    return _mpf_sum(_pow(forward_difference(u), p) / p)


def j_lambda(instance: ProblemInstance, u: StateVector):
    return phi_psi(instance, u).j_lambda


def difference_matrix(T: int) -> np.ndarray:
    """(T+1) x T matrix D with (D x)[k-1] = Δu(k-1) for interior vector x."""
    D = np.zeros((T + 1, T))
    idx = np.arange(T)
    D[idx, idx] = 1.0
    D[idx + 1, idx] = -1.0
    return D


def weak_gradient(instance: ProblemInstance, u: StateVector) -> np.ndarray:
    """Components <J'(u), e_k>, k = 1..T, assembled as D^T φ(D u) - λ f(u)."""
    T = instance.T
    D = difference_matrix(T)
    x = u.interior
    if _is_object(x):
        D = D.astype(object)
    flux = phi_p(D @ x, instance.exponents.array()[:-1])
    return D.T @ flux - instance.lam * instance.nonlinearity.f_values(x)


def strong_residual(instance: ProblemInstance, u: StateVector) -> np.ndarray:
    """Pointwise defect -Δ(φ_{p(k-1)}(Δu(k-1))) - λ f_k(u(k)), k = 1..T."""
    v = u.values
    p = instance.exponents.values
    T = instance.T
    fk = instance.nonlinearity.f
    r = []
    for k in range(1, T + 1):
        left = _phi_scalar(v[k] - v[k - 1], p[k - 1])
        right = _phi_scalar(v[k + 1] - v[k], p[k])
        r.append(-(right - left) - instance.lam * fk[k - 1](v[k]))
    return np.array(r, dtype=object if _is_object(v) else float)


def _phi_scalar(s, p):
    if s == 0:
        return 0 * s
    return s * abs(s) ** (p - 2)


def hessian(
    instance: ProblemInstance,
    u: StateVector,
    regularize: bool = False,
    eps_h: float = 1e-10,
    floor=None,
) -> np.ndarray:
    """Dense symmetric tridiagonal second derivative of J at u.

    Where p < 2 and |Δu| < eps_h the curvature blows up; with ``regularize``
    those |Δu| are replaced by ``floor`` (default eps_h).
    """
    T = instance.T
    p = instance.exponents.array()[:-1]
    d = forward_difference(u)
    obj = _is_object(d)
    ad = np.array([abs(x) for x in d], dtype=object) if obj else np.abs(d)
    small = (p < 2) & np.array([x < eps_h for x in ad])
    if small.any():
        if not regularize:
            k = int(np.flatnonzero(small)[0])
            raise SingularHessian(f"|Δu({k})| < {eps_h} with p({k}) = {p[k]} < 2")
        ad = ad.copy()
        ad[small] = eps_h if floor is None else floor
    # c[j] = φ'_{p(j)}(Δu(j)) = (p(j) - 1) |Δu(j)|^{p(j)-2}
    c = (p - 1) * _pow(ad, p - 2)
    fp = instance.nonlinearity.df_values(u.interior)
    H = np.zeros((T, T), dtype=object if obj else float)
    for k in range(T):
        H[k, k] = c[k] + c[k + 1] - instance.lam * fp[k]
        if k + 1 < T:
            H[k, k + 1] = -c[k + 1]
            H[k + 1, k] = -c[k + 1]
    return H


def verify_coercivity(
    instance: ProblemInstance,
    radius: float = 1e3,
    samples: int = 64,
    n_t: int = 40,
    seed: int = 0,
) -> CoercivityReport:
    """Empirical growth check of Phi along random unit directions.

    The growth constants of the coercivity estimate are not explicit, so
    this only checks that Phi(t d) increases for t >= 1 and that the
    smallest value at the outer radius exceeds Phi(d).
    """
    if radius <= 1:
        raise ValueError("radius must exceed 1")
    rng = np.random.default_rng(seed)
    ts = np.geomspace(1.0, radius, n_t)
    T = instance.T
    phi_one = []
    phi_far = []
    failures = 0
    for _ in range(samples):
        x = rng.standard_normal(T)
        d = StateVector.from_interior(x)
        x = x / norms(d)[0]
        vals = [phi_only(instance, StateVector.from_interior(t * x)) for t in ts]
        failures += int(np.sum(np.diff(vals) <= 0))
        phi_one.append(vals[0])
        phi_far.append(vals[-1])
    ok = failures == 0 and min(phi_far) > max(phi_one)
    return CoercivityReport(ok, radius, samples, max(phi_one), min(phi_far), failures, ts.tolist())
