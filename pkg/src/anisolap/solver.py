"""Critical points of J: deflated damped Newton, multistart and the shrinking cascade.

The cascade follows the sublevel argument: for each radius c it works in
{Phi < r(c)}, whose points all satisfy |u|_inf <= c, certifies that a
constant probe there has J < 0 = J(0), and descends from the probe without
leaving the sublevel. The local minimum it reaches is therefore nonzero
and smaller than c in sup-norm.
"""
from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
from mpmath import mpf
from scipy.linalg import LinAlgError, solve_banded

from .energy import SingularHessian, hessian, phi_only, phi_p, phi_psi, strong_residual, weak_gradient
from .problem import ProblemInstance, StateVector, forward_difference
from .theory import CNotSmallEnough, phi_r_upper_bound


class NoConvergence(RuntimeError):
    def __init__(self, max_iter, last):
        super().__init__(f"no convergence in {max_iter} iterations")
        self.last = last


class DeflationSingular(ZeroDivisionError):
    pass


class ProbeTooLarge(ValueError):
    pass


@dataclass
class SolverConfig:
    tol: float = 1e-10
    rel_tol: float | None = None
    max_iter: int = 100
    deflation_power: float = 2.0
    deflation_shift: float = 1.0
    distinct_tol: float = 1e-8
    singular_tol: float = 1e-14
    eps_h: float = 1e-10
    armijo: float = 1e-4


@dataclass
class SolutionRecord:
    u: StateVector
    phi: object
    j_lambda: object
    grad_norm: object
    residual_norm: object
    scaled_residual: float
    sup_norm: object
    newton_iterations: int
    level: int | None = None

    def as_dict(self) -> dict:
        return {
            "u": [num(x) for x in self.u.values],
            "phi": num(self.phi),
            "j_lambda": num(self.j_lambda),
            "grad_norm": num(self.grad_norm),
            "residual_norm": num(self.residual_norm),
            "scaled_residual": num(self.scaled_residual),
            "sup_norm": num(self.sup_norm),
            "log2_sup_norm": _log2(self.sup_norm),
            "newton_iterations": self.newton_iterations,
            "level": self.level,
        }


def num(x):
    """JSON-friendly number: floats when representable, 17-digit strings otherwise."""
    if isinstance(x, mpf):
        if x == 0 or (mpmath.isfinite(x) and 1e-300 < abs(x) < 1e300):
            return float(x)
        return mpmath.nstr(x, 17)
    return float(x)


def _log2(x) -> float:
    x = abs(mpf(x))
    return float(mpmath.log(x, 2)) if x > 0 else -math.inf


def _supabs(a) -> object:
    return max(abs(x) for x in a) if len(a) else 0


def _dot(a, b):
    if a.dtype == object or b.dtype == object:
        return mpmath.fsum(x * y for x, y in zip(a, b))
    return float(np.dot(a, b))


def _node_scales(instance: ProblemInstance, u: StateVector) -> list:
    d = forward_difference(u)
    flux = phi_p(d, instance.exponents.array()[:-1])
    fv = instance.nonlinearity.f_values(u.interior)
    return [abs(flux[k]) + abs(flux[k + 1]) + abs(instance.lam * fv[k]) for k in range(instance.T)]


def residual_scale(instance: ProblemInstance, u: StateVector) -> object:
    """Size of the individual terms in the strong equation (denominator of the scaled residual)."""
    return max(_node_scales(instance, u))


def make_record(instance: ProblemInstance, u: StateVector, iterations: int = 0, level=None) -> SolutionRecord:
    e = phi_psi(instance, u)
    g = weak_gradient(instance, u)
    r = strong_residual(instance, u)
    rn = _supabs(r)
    sc = residual_scale(instance, u)
    scaled = float(rn / sc) if sc != 0 else (0.0 if rn == 0 else math.inf)
    return SolutionRecord(u, e.phi, e.j_lambda, _supabs(g), rn, scaled, _supabs(u.interior), iterations, level)


def is_certified(rec: SolutionRecord, tol: float, rel_tol: float | None) -> bool:
    if not rec.residual_norm <= tol:
        return False
    return rel_tol is None or rec.scaled_residual <= rel_tol


# deflation -------------------------------------------------------------------


def _dist(u: StateVector, v: StateVector):
    d = u.interior - v.interior
    if d.dtype == object:
        return mpmath.sqrt(mpmath.fsum(x * x for x in d))
    return float(np.sqrt(np.dot(d, d)))


def deflate(records: Sequence, u: StateVector, q: float = 2.0, sigma: float = 1.0, singular_tol: float = 1e-14):
    """Deflation factor prod_i (1/||u - u_i||^q + sigma).

    Coincidence is judged relative to the size of the stored root, so roots
    at scale 2^-700 are not all treated as the same point.
    """
    val = 1
    for rec in records:
        ui = rec.u if isinstance(rec, SolutionRecord) else rec
        dist = _dist(u, ui)
        ref = max(_supabs(ui.interior), _supabs(u.interior))
        if dist <= singular_tol * ref or dist == 0:
            raise DeflationSingular("state coincides with a stored root")
        val = val * (1 / dist**q + sigma)
    return val


def _deflation_log_gradient(records, u: StateVector, q, sigma):
    """Gradient of log M(u) with respect to the interior values."""
    out = np.zeros(u.T, dtype=u.interior.dtype) if u.interior.dtype != object else np.array([mpf(0)] * u.T, dtype=object)
    for rec in records:
        ui = rec.u if isinstance(rec, SolutionRecord) else rec
        diff = u.interior - ui.interior
        dist = _dist(u, ui)
        m = 1 / dist**q + sigma
        out = out + (-q * dist ** (-q - 2) / m) * diff
    return out


# linear algebra ----------------------------------------------------------------


def _solve(H: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if H.dtype == object or rhs.dtype == object:
        x = mpmath.lu_solve(mpmath.matrix(H.tolist()), mpmath.matrix(list(rhs)))
        return np.array([x[i] for i in range(len(rhs))], dtype=object)
    n = H.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = np.diag(H, 1)
    ab[1] = np.diag(H)
    ab[2, :-1] = np.diag(H, -1)
    return solve_banded((1, 1), ab, rhs)


def _finite_vec(x) -> bool:
    if x.dtype == object:
        return all(mpmath.isfinite(v) for v in x)
    return bool(np.all(np.isfinite(x)))


def _newton_direction(instance, u, g, eps_h):
    try:
        H = hessian(instance, u, regularize=False, eps_h=eps_h)
    except SingularHessian:
        H = hessian(instance, u, regularize=True, eps_h=eps_h)
    try:
        d = _solve(H, -g)
    except (LinAlgError, ZeroDivisionError, ValueError):
        return None
    return d if _finite_vec(d) else None


def _cap_step(instance, u, d):
    # non-Lipschitz gradient for p- < 2: do not jump across the origin
    if instance.exponents.p_minus >= 2:
        return d
    su = _supabs(u.interior)
    sd = _supabs(d)
    if 0 < su < 1 and sd > 0.5 * su:
        return d * (0.5 * su / sd)
    return d


# newton --------------------------------------------------------------------------


def newton_solve(
    instance: ProblemInstance,
    u0: StateVector,
    tol: float = 1e-10,
    max_iter: int = 100,
    rel_tol: float | None = None,
    deflation: Sequence = (),
    config: SolverConfig | None = None,
) -> SolutionRecord:
    """Damped Newton on the weak gradient with Armijo backtracking on the squared residual.

    With ``deflation`` the system is premultiplied by the deflation factor of
    the given roots. Falls back to Barzilai-Borwein gradient steps on J when
    the Newton step is unavailable or rejected.
    """
    cfg = config or SolverConfig()
    q, sigma = cfg.deflation_power, cfg.deflation_shift
    u = u0
    bb = None
    prev = None
    for it in range(max_iter + 1):
        g = weak_gradient(instance, u)
        rec = None
        if _supabs(g) <= tol:
            rec = make_record(instance, u, it)
            if is_certified(rec, tol, rel_tol):
                if deflation:
                    _assert_new(rec, deflation, cfg.distinct_tol)
                return rec
        if it == max_iter:
            break
        M = deflate(deflation, u, q, sigma, cfg.singular_tol) if deflation else 1
        merit = M * M * _dot(g, g)
        d = _newton_direction(instance, u, g, cfg.eps_h)
        step = None
        if d is not None:
            if deflation:
                w = _deflation_log_gradient(deflation, u, q, sigma)
                denom = 1 - _dot(w, d)
                if denom != 0:
                    d = d / denom
            d = _cap_step(instance, u, d)
            step = _backtrack_merit(instance, u, d, merit, deflation, cfg)
        if step is None:
            step = _bb_step(instance, u, g, bb, cfg)
            if step is None:
                break
        s = step.interior - u.interior
        if prev is not None:
            y = g - prev
            sy = _dot(s, y)
            bb = _dot(s, s) / sy if sy > 0 else None
        prev = g
        u = step
    last = make_record(instance, u, max_iter)
    raise NoConvergence(max_iter, last)


class DuplicateRoot(RuntimeError):
    pass


def same_root(u: StateVector, v: StateVector, distinct_tol: float) -> bool:
    d = _supabs(u.interior - v.interior)
    return d <= distinct_tol * max(_supabs(u.interior), _supabs(v.interior))


def _assert_new(rec, roots, distinct_tol):
    for r in roots:
        ur = r.u if isinstance(r, SolutionRecord) else r
        if same_root(rec.u, ur, distinct_tol):
            raise DuplicateRoot("deflated iteration returned a stored root")


def _merit(instance, u, deflation, cfg):
    g = weak_gradient(instance, u)
    M = deflate(deflation, u, cfg.deflation_power, cfg.deflation_shift, cfg.singular_tol) if deflation else 1
    return M * M * _dot(g, g)


def _backtrack_merit(instance, u, d, merit, deflation, cfg):
    alpha = 1.0
    for _ in range(40):
        trial = StateVector.from_interior(u.interior + alpha * d)
        try:
            m = _merit(instance, trial, deflation, cfg)
        except DeflationSingular:
            m = None
        if m is not None and _finite_scalar(m) and m <= (1 - 2 * cfg.armijo * alpha) * merit:
            return trial
        alpha *= 0.5
    return None


def _finite_scalar(x) -> bool:
    return mpmath.isfinite(x) if isinstance(x, mpf) else math.isfinite(x)


def _bb_step(instance, u, g, bb, cfg):
    J0 = phi_psi(instance, u).j_lambda
    gg = _dot(g, g)
    if gg == 0:
        return None
    alpha = bb if bb is not None else float(1 / max(1.0, math.sqrt(float(gg))))
    for _ in range(60):
        trial = StateVector.from_interior(u.interior - alpha * g)
        J1 = phi_psi(instance, trial).j_lambda
        if J1 <= J0 - cfg.armijo * alpha * gg:
            return trial
        alpha *= 0.5
    return None


# multistart ------------------------------------------------------------------------


@dataclass
class MultistartResult:
    records: list
    dropped: int
    seed: int


def multistart(
    instance: ProblemInstance,
    n_starts: int = 16,
    radius: float = 1.0,
    tol: float = 1e-10,
    seed: int = 20240601,
    max_iter: int = 100,
    config: SolverConfig | None = None,
) -> MultistartResult:
    """Deflated Newton from random starts in the sup-norm ball; certified, deduplicated, sorted by J."""
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    cfg = config or SolverConfig()
    rng = np.random.default_rng(seed)
    starts = rng.uniform(-radius, radius, size=(n_starts, instance.T))
    found: list = []
    dropped = 0
    for x in starts:
        try:
            rec = newton_solve(instance, StateVector.from_interior(x), tol, max_iter, cfg.rel_tol, found, cfg)
        except (NoConvergence, DeflationSingular, DuplicateRoot):
            dropped += 1
            continue
        if any(same_root(rec.u, r.u, cfg.distinct_tol) for r in found):
            dropped += 1
            continue
        found.append(rec)
    found.sort(key=lambda r: float(r.j_lambda))
    return MultistartResult(found, dropped, seed)


# probes and the cascade ----------------------------------------------------------------


@dataclass
class ProbeResult:
    b: object
    j_value: object
    bound: object
    negative: bool
    bound_holds: bool
    phi: object = None


def constant_probe(T: int, b) -> StateVector:
    return StateVector.from_interior(np.array([b] * T, dtype=object if isinstance(b, mpf) else float))


def probe_negativity(instance: ProblemInstance, b) -> ProbeResult:
    """J at the constant probe s(k) = b next to the bound 2 b^{p-}/p- - lambda sum F_k(b)."""
    if not 0 < b < 1:
        raise ProbeTooLarge(f"probe height {b} must lie in (0, 1)")
    pm = instance.exponents.p_minus
    s = constant_probe(instance.T, b)
    e = phi_psi(instance, s)
    bound = 2 * b**pm / pm - instance.lam * e.psi
    return ProbeResult(b, e.j_lambda, bound, bool(e.j_lambda < 0), bool(e.j_lambda <= bound), e.phi)


def probe_depth(instance: ProblemInstance, c) -> float:
    """How far below log2(c) the probe scan reaches."""
    L = abs(float(mpmath.log(mpf(c), 2)))
    return instance.exponents.p_plus * max(L, 1.0) + 64


def level_precision(instance: ProblemInstance, c, depth: float | None = None) -> int:
    """Working bits for one cascade level.

    Curvatures (p-1)|Δu|^{p-2} of different exponents differ by about
    2^{(p+ - p-) log2|u|}; Newton has to resolve the smaller next to the larger.
    """
    L = abs(float(mpmath.log(mpf(c), 2)))
    spread = max(1.0, instance.exponents.p_plus - instance.exponents.p_minus)
    depth = probe_depth(instance, c) if depth is None else depth
    return max(mpmath.mp.prec, 128 + math.ceil(spread * (L + depth)))


def find_probe(
    instance: ProblemInstance, c, r, n_grid: int = 257, refine: int = 60, depth: float | None = None
) -> ProbeResult | None:
    """Most negative constant probe with Phi < r, searched over b = c 2^{-x} in log scale.

    The negativity set in b is not an interval ending at c, so plain
    bisection from c downward does not apply; we scan x and refine the best
    bracket by golden section.
    """
    c = mpf(c)
    X = probe_depth(instance, c) if depth is None else depth

    def score(x):
        b = c * mpmath.power(2, -x)
        if not b < 1:
            return None
        pr = probe_negativity(instance, b)
        if not (pr.phi < r and pr.negative):
            return None
        return pr

    xs = [X * i / (n_grid - 1) for i in range(n_grid)]
    results = [score(x) for x in xs]
    admissible = [i for i, pr in enumerate(results) if pr is not None]
    if not admissible:
        return None
    i = min(admissible, key=lambda k: results[k].j_value)
    best = results[i]
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, n_grid - 1)]
    invphi = (math.sqrt(5) - 1) / 2

    def val(x):
        pr = score(x)
        return (mpmath.inf, None) if pr is None else (pr.j_value, pr)

    x1, x2 = b - invphi * (b - a), a + invphi * (b - a)
    (f1, p1), (f2, p2) = val(x1), val(x2)
    for _ in range(refine):
        if f1 < f2:
            b, x2, f2, p2 = x2, x1, f1, p1
            x1 = b - invphi * (b - a)
            f1, p1 = val(x1)
        else:
            a, x1, f1, p1 = x1, x2, f2, p2
            x2 = a + invphi * (b - a)
            f2, p2 = val(x2)
    for cand in (p1, p2):
        if cand is not None and cand.j_value < best.j_value:
            best = cand
    return best


def sublevel_descent(
    instance: ProblemInstance,
    u0: StateVector,
    r,
    tol: float,
    rel_tol: float | None,
    deflation: Sequence = (),
    max_iter: int = 200,
    config: SolverConfig | None = None,
) -> SolutionRecord | None:
    """Minimise J inside {Phi < r} from u0; steps leaving the sublevel are shrunk until they return.

    A first phase works in log-coordinates u_k = sign_k exp(y_k), where a
    change of scale by 2^-100 is an additive step, and lets the line search
    expand as well as contract. A second phase polishes with plain
    (deflated) Newton in u.
    """
    cfg = config or SolverConfig()
    u = u0
    iters = 0
    for log_phase in (True, False):
        if log_phase and any(x == 0 for x in u.interior):
            continue
        u, rec, n = _descend(instance, u, r, tol, rel_tol, deflation, max_iter, cfg, log_phase)
        iters += n
        if rec is not None:
            rec.newton_iterations = iters
            return rec
    return None


def _descend(instance, u, r, tol, rel_tol, deflation, max_iter, cfg, log_phase):
    q, sigma = cfg.deflation_power, cfg.deflation_shift
    J = phi_psi(instance, u).j_lambda
    bb = None
    for it in range(max_iter):
        g = weak_gradient(instance, u)
        rec = make_record(instance, u, it)
        if is_certified(rec, tol, rel_tol):
            return u, rec, it
        if log_phase:
            move, gd = _log_direction(instance, u, g, cfg)
        else:
            d = _newton_direction(instance, u, g, _eps_h(u, cfg))
            gd = _dot(g, d) if d is not None else 0
            if d is None or not gd < 0:
                scale = bb if bb is not None else _supabs(u.interior) / _supabs(g)
                d = -scale * g
                gd = _dot(g, d)
            if deflation:
                w = _deflation_log_gradient(deflation, u, q, sigma)
                denom = 1 - _dot(w, d)
                if denom > 0:
                    d = d / denom
                    gd = _dot(g, d)
            d = _cap_step(instance, u, d)
            move = _linear_move(u, d)
        nxt, J = _sublevel_line_search(instance, u, move, J, gd, g, r, cfg)
        if nxt is None and log_phase:
            # an ill-conditioned Newton solve can point uphill in practice
            move, gd = _log_direction(instance, u, g, cfg, newton=False)
            nxt, J = _sublevel_line_search(instance, u, move, J, gd, g, r, cfg)
        if nxt is None:
            return u, None, it
        if log_phase:
            nxt, J = _coordinate_sweep(instance, nxt, J, r)
        else:
            s = nxt.interior - u.interior
            y = weak_gradient(instance, nxt) - g
            sy = _dot(s, y)
            bb = _dot(s, s) / sy if sy > 0 else None
        u = nxt
    rec = make_record(instance, u, max_iter)
    return u, (rec if is_certified(rec, tol, rel_tol) else None), max_iter


def _eps_h(u, cfg):
    """Regularisation floor for |Δu| on p < 2 edges, relative to the size of u.

    With mpf states the floor sits near the working precision: p < 2 edges
    whose difference is 2^-200 of the state must keep their true, huge curvature.
    """
    x = u.interior
    scale = _supabs(x)
    if x.dtype == object:
        return scale * mpmath.ldexp(1, 16 - mpmath.mp.prec) if scale > 0 else cfg.eps_h
    return cfg.eps_h * (scale if scale > 0 else 1.0)


def _coordinate_sweep(instance, u, J, r, max_doublings=40, min_bits=40):
    """One pass of 1-D descents on each y_k = log|u_k|.

    A node far from its own balance (one-sided edge, much smaller than its
    neighbours) barely moves in the joint step, whose length is set by the
    stiff coupled modes; a scalar search moves it by orders of magnitude.
    """
    x = np.array(u.interior)
    obj = x.dtype == object
    exp = mpmath.exp if obj else math.exp
    g = weak_gradient(instance, u)
    terms = _node_scales(instance, u)
    for k in range(len(x)):
        # only nodes whose own equation is badly out of balance
        if x[k] == 0 or not abs(g[k]) > 0.5 * terms[k]:
            continue
        # dJ/dy_k = g_k u_k; move y_k against it
        sgn = -1 if g[k] * x[k] > 0 else 1
        base = x[k]

        def value(step):
            y = x.copy()
            y[k] = base * exp(sgn * step)
            trial = StateVector.from_interior(y)
            if not phi_only(instance, trial) < r:
                return None, None
            return trial, phi_psi(instance, trial).j_lambda

        step, best, best_J = 1.0, None, J
        trial, Jt = value(step)
        if Jt is not None and Jt < J:
            best, best_J = trial, Jt
            for _ in range(max_doublings):
                t2, J2 = value(2 * step)
                if J2 is None or not J2 < best_J:
                    break
                step, best, best_J = 2 * step, t2, J2
        else:
            for _ in range(min_bits):
                step /= 2
                trial, Jt = value(step)
                if Jt is not None and Jt < J:
                    best, best_J = trial, Jt
                    break
        if best is not None:
            x, J = np.array(best.interior), best_J
            u = best
            g = weak_gradient(instance, u)
            terms = _node_scales(instance, u)
    return u, J


def _linear_move(u, d):
    return lambda alpha: StateVector.from_interior(u.interior + alpha * d)


def _log_direction(instance, u, g, cfg, newton=True):
    """Newton step for J(sign * exp(y)) and a mover along it; gd is the slope at alpha = 0."""
    x = u.interior
    obj = x.dtype == object
    gy = g * x  # dJ/dy
    dy = None
    if newton:
        # the Newton system is badly conditioned near flat pieces; solve it with guard bits
        with mpmath.workprec(2 * mpmath.mp.prec) if obj else contextlib.nullcontext():
            dy = _log_newton(instance, u, cfg)
        if dy is not None:
            dy = dy * 1
            if not _dot(gy, dy) < 0:
                dy = None
    if dy is None:
        dy = -gy / _supabs(gy)
    # near-singular Hessians give huge steps; the expanding line search recovers long ones
    big = _supabs(dy)
    if big > 1:
        dy = dy / big
    gd = _dot(gy, dy)
    exp = mpmath.exp if obj else math.exp

    def move(alpha):
        return StateVector.from_interior(np.array([xi * exp(alpha * di) for xi, di in zip(x, dy)], dtype=x.dtype))

    return move, gd


def _log_newton(instance, u, cfg):
    """Saddle-free Newton step in log-coordinates: eigenvalues of H_y replaced by their moduli.

    H_y = U H U + diag(g u) is often indefinite on flat pieces of f, where a
    plain Newton step heads for a maximum along the negative modes.
    """
    x = u.interior
    gy = weak_gradient(instance, u) * x
    try:
        H = hessian(instance, u, regularize=True, eps_h=_eps_h(u, cfg), floor=cfg.eps_h * _supabs(x))
    except SingularHessian:
        return None
    Hy = H * np.outer(x, x) + np.diag(gy)
    if Hy.dtype == object:
        E, Q = mpmath.eigsy(mpmath.matrix(Hy.tolist()))
        lam = [abs(E[i]) for i in range(len(x))]
        Q = np.array(Q.tolist(), dtype=object)
        floor = max(lam) * mpmath.ldexp(1, -mpmath.mp.prec // 2)
    else:
        E, Q = np.linalg.eigh(Hy)
        lam = list(np.abs(E))
        floor = max(lam) * 1e-8
    if not max(lam) > 0:
        return None
    coef = Q.T @ gy
    d = -(Q @ np.array([cj / max(lj, floor) for cj, lj in zip(coef, lam)], dtype=Q.dtype))
    return d if _finite_vec(d) else None


def _solve_dense(A, b):
    if A.dtype == object or b.dtype == object:
        x = mpmath.lu_solve(mpmath.matrix(A.tolist()), mpmath.matrix(list(b)))
        return np.array([x[i] for i in range(len(b))], dtype=object)
    return np.linalg.solve(A, b)


def _sublevel_line_search(instance, u, move, J, gd, g, r, cfg, max_expand=40):
    """Armijo on J inside the sublevel; expands by doubling while J keeps dropping."""

    def value(alpha):
        trial = move(alpha)
        if not phi_only(instance, trial) < r:
            return trial, None
        return trial, phi_psi(instance, trial).j_lambda

    alpha = 1.0
    trial, Jt = value(alpha)
    if Jt is not None and Jt <= J + cfg.armijo * alpha * gd:
        for _ in range(max_expand):
            t2, J2 = value(2 * alpha)
            if J2 is None or not J2 < Jt:
                break
            alpha, trial, Jt = 2 * alpha, t2, J2
        return trial, Jt
    gn = _supabs(g)
    # splits across a p > 2 edge cost |Δ|^p, so useful steps can sit far below 2^-60;
    # halve 20 times, then contract by 2^-8 down to the working precision
    depth = mpmath.mp.prec if g.dtype == object else 1000
    n = 0
    while n < depth:
        shrink = 1 if n < 20 else 8
        alpha = math.ldexp(alpha, -shrink) if isinstance(alpha, float) and alpha > 1e-290 else mpmath.ldexp(alpha, -shrink)
        n += shrink
        trial, Jt = value(alpha)
        if Jt is None:
            continue
        if Jt <= J + cfg.armijo * alpha * gd:
            return trial, Jt
        # at the rounding floor of J, accept steps that still shrink the gradient
        if Jt <= J + abs(J) * 1e-12 and _supabs(weak_gradient(instance, trial)) < 0.5 * gn:
            return trial, Jt
    return None, J


@dataclass
class LevelReport:
    level: int
    c: object
    r: object
    phi_bound: object
    probe: ProbeResult | None
    status: str  # accepted | stalled | duplicate | left_sublevel | no_convergence | c_too_large


@dataclass
class CascadeReport:
    solutions: list
    levels: list
    converged: bool
    stalled: list = field(default_factory=list)

    @property
    def probes(self) -> list:
        return [(lv.probe.b, lv.probe.j_value) for lv in self.levels if lv.probe is not None]

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "n_solutions": len(self.solutions),
            "stalled_levels": self.stalled,
            "solutions": [s.as_dict() for s in self.solutions],
            "levels": [
                {
                    "level": lv.level,
                    "c": num(lv.c),
                    "log2_c": _log2(lv.c),
                    "r": num(lv.r) if lv.r is not None else None,
                    "phi_bound": num(lv.phi_bound) if lv.phi_bound is not None else None,
                    "status": lv.status,
                    "probe": None
                    if lv.probe is None
                    else {
                        "b": num(lv.probe.b),
                        "log2_b": _log2(lv.probe.b),
                        "j_value": num(lv.probe.j_value),
                        "bound": num(lv.probe.bound),
                        "negative": lv.probe.negative,
                        "bound_holds": lv.probe.bound_holds,
                    },
                }
                for lv in self.levels
            ],
        }


def cascade(
    instance: ProblemInstance,
    c_seq: Sequence,
    tol: float = 1e-9,
    rel_tol: float | None = 1e-10,
    config: SolverConfig | None = None,
    max_iter: int = 200,
    max_prec: int = 1 << 16,
) -> CascadeReport:
    """One certified nonzero critical point per radius c_j, each inside its own sublevel."""
    cfg = config or SolverConfig()
    cs = [mpf(c) for c in c_seq]
    if any(not (a > b > 0) for a, b in zip(cs, cs[1:])) or not cs[-1] > 0:
        raise ValueError("c_seq must be positive and strictly decreasing")
    found: list = []
    levels: list = []
    stalled: list = []
    for j, c in enumerate(cs):
        try:
            r, bound = phi_r_upper_bound(instance, c)
        except CNotSmallEnough:
            levels.append(LevelReport(j, c, None, None, None, "c_too_large"))
            stalled.append(j)
            continue
        # negative constant probes may only exist on much deeper plateaus than c itself
        probe = None
        depth = probe_depth(instance, c)
        while probe is None:
            prec = level_precision(instance, c, depth)
            if prec > max_prec:
                break
            with mpmath.workprec(prec):
                probe = find_probe(instance, c, r, depth=depth)
            depth *= 4
        if probe is None:
            levels.append(LevelReport(j, c, r, bound, None, "stalled"))
            stalled.append(j)
            continue
        with mpmath.workprec(prec):
            u0 = constant_probe(instance.T, probe.b)
            rec = sublevel_descent(instance, u0, r, tol, rel_tol, found, max_iter, cfg)
        status = "accepted"
        if rec is None:
            status = "no_convergence"
        elif not rec.phi < r:
            status = "left_sublevel"
        elif not rec.j_lambda < 0 or rec.sup_norm == 0:
            status = "no_convergence"
        elif any(same_root(rec.u, s.u, cfg.distinct_tol) for s in found):
            status = "duplicate"
        if status == "accepted":
            rec.level = j
            found.append(rec)
        else:
            stalled.append(j)
        levels.append(LevelReport(j, c, r, bound, probe, status))
    converged = (
        len(found) >= 2
        and all(b.phi < a.phi for a, b in zip(found, found[1:]))
        and found[-1].sup_norm < found[0].sup_norm / 10
    )
    solutions = sorted(found, key=lambda s: s.phi, reverse=True)
    return CascadeReport(solutions, levels, converged, stalled)
