"""Constants, limit estimates and admissible lambda-intervals.

Limits at 0+ are estimated along user-chosen vanishing sequences. An
estimate always keeps its quotient table, so a finite-sample min/max is
never mistaken for a proved liminf/limsup.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np
from mpmath import mpf

from .energy import phi_only
from .problem import ExponentMap, ProblemInstance, StateVector, norms

INF = math.inf
OVERFLOW = 1e15
GEOMETRIC_RATIO = 1.5


class EnvelopeFailure(ArithmeticError):
    pass


class EstimateUnavailable(ValueError):
    pass


class NotEven(ValueError):
    pass


class CNotSmallEnough(ValueError):
    pass


class K1Violated(ValueError):
    def __init__(self, indices):
        super().__init__(f"(k1) fails at m = {indices}")
        self.indices = list(indices)


class DegenerateDenominator(ArithmeticError):
    pass


@dataclass
class LimitEstimate:
    value: float
    kind: str  # "liminf" | "limsup"
    trend: str  # "decreasing" | "increasing" | "oscillating"
    ts: list
    quotients: list
    log2_quotients: list
    tail_start: int
    tail_value: float
    infinite: bool = False

    @property
    def tail_length(self) -> int:
        return len(self.quotients) - self.tail_start

    def as_dict(self) -> dict:
        return {
            "value": "inf" if self.infinite else self.value,
            "kind": self.kind,
            "trend": self.trend,
            "tail_value": self.tail_value,
            "tail_start": self.tail_start,
            "infinite": self.infinite,
            "table": [
                {"t_log2": _log2f(t), "q": q, "q_log2": lq} for t, q, lq in zip(self.ts, self.quotients, self.log2_quotients)
            ],
        }


@dataclass
class ParameterInterval:
    lower: float
    upper: float
    source: str  # thm_main | cor_const_p | thm_technical | cor_even_T
    notes: dict = field(default_factory=dict)

    @property
    def nonempty(self) -> bool:
        return self.lower < self.upper

    def contains(self, lam: float) -> bool:
        return self.lower < lam < self.upper

    def as_dict(self) -> dict:
        return {
            "lower": _jsonable(self.lower),
            "upper": _jsonable(self.upper),
            "nonempty": self.nonempty,
            "source": self.source,
            "notes": {k: _jsonable(v) for k, v in self.notes.items()},
        }


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _log2f(x) -> float:
    x = mpf(x)
    if x <= 0:
        return -INF if x == 0 else math.nan
    return float(mpmath.log(x, 2))


# constants -----------------------------------------------------------------


def kappa(exponents: ExponentMap, T: int) -> float:
    pp, pm = exponents.p_plus, exponents.p_minus
    return 2 ** (pp - 1) * pm / (pp * (T + 1) ** (pp - 1))


def embedding_bound_jz(T: int, p: float) -> float:
    """Factor in ||u||_inf <= factor * (sum |Δu|^p)^{1/p} (Hölder on both halves)."""
    return (T + 1) ** ((p - 1) / p) / 2


def cit_constant(T: int, p: float) -> float:
    if T % 2 == 0:
        return ((2 / T) ** (p - 1) + (2 / (T + 2)) ** (p - 1)) ** (1 / p)
    return 2 / (T + 1) ** ((p - 1) / p)


def embedding_bound_cit(T: int, p: float) -> float:
    """Sharper embedding factor 1/c_1 (even T improves on embedding_bound_jz)."""
    return 1 / cit_constant(T, p)


def theta(s: float, T: int, p: float) -> float:
    if not 0 < s < T + 1:
        raise ValueError(f"theta needs 0 < s < T+1, got s={s}")
    return 1 / (T - s + 1) ** (p - 1) + 1 / s ** (p - 1)


def theta_min(T: int, p: float) -> float:
    return 2**p / (T + 1) ** (p - 1)


# envelope and limit estimates ------------------------------------------------


def envelope_max(Fk: Callable, t, n_grid: int = 2049, nondecreasing: bool = False):
    """max of Fk over [-t, t]: grid scan, then golden-section on the best bracket."""
    if not t > 0:
        raise ValueError("t must be positive")
    if nondecreasing:
        return Fk(t)
    use_mp = isinstance(t, mpf)
    xs = [t * (2 * i - (n_grid - 1)) / (n_grid - 1) for i in range(n_grid)] if use_mp else np.linspace(-t, t, n_grid)
    vals = [Fk(x) for x in xs]
    if any(not _finite(v) for v in vals):
        raise EnvelopeFailure("non-finite antiderivative value on the scan grid")
    i = max(range(n_grid), key=lambda k: vals[k])
    best = vals[i]
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, n_grid - 1)]
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = Fk(c), Fk(d)
    for _ in range(60):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = Fk(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = Fk(d)
    return max(best, fc, fd)


def _finite(v) -> bool:
    if isinstance(v, mpf):
        return mpmath.isfinite(v)
    return math.isfinite(v)


def default_probes(t0: float = 1.0, n_terms: int = 40) -> list:
    return [t0 * 2.0**-j for j in range(n_terms)]


def _check_probes(ts):
    if len(ts) < 2:
        raise ValueError("need at least two probe points")
    for a, b in zip(ts, ts[1:]):
        if not (a > b > 0):
            raise ValueError("probe points must be positive and strictly decreasing")


def _trend(seq, rel=1e-12) -> str:
    d = np.diff(np.asarray(seq, dtype=float))
    scale = max(float(np.max(np.abs(seq))), 1e-300) if len(seq) else 1.0
    tol = rel * scale
    if np.all(d <= tol):
        return "decreasing"
    if np.all(d >= -tol):
        return "increasing"
    return "oscillating"


def _estimate(ts, qs, kind: str, tail: int | None) -> LimitEstimate:
    n = len(qs)
    tail = tail if tail is not None else max(n // 2, 1)
    start = max(n - tail, 0)
    tail_q = qs[start:]
    log2q = [_log2f(q) for q in qs]
    positive = all(q > 0 for q in tail_q)
    basis = log2q[start:] if positive else [float(q) for q in tail_q]
    trend = _trend(basis)
    raw = min(tail_q) if kind == "liminf" else max(tail_q)
    value = float(raw)
    infinite = False
    if positive and len(tail_q) >= 2:
        steps = np.diff(log2q[start:])
        lr = math.log2(GEOMETRIC_RATIO)
        if trend == "increasing" and (np.all(steps >= lr) or value > OVERFLOW):
            infinite, value = True, INF
        elif trend == "decreasing" and np.all(steps <= -lr):
            value = 0.0
    elif value > OVERFLOW and trend == "increasing":
        infinite, value = True, INF
    return LimitEstimate(value, kind, trend, list(ts), [float(q) for q in qs], log2q, start, float(raw), infinite)


def _sum_envelopes(instance: ProblemInstance, t) -> float:
    nl = instance.nonlinearity
    if nl.identical:
        return instance.T * envelope_max(nl.F[0], t, nondecreasing=nl.nonnegative)
    return sum(envelope_max(Fk, t, nondecreasing=nl.nonnegative) for Fk in nl.F)


def _sum_F(instance: ProblemInstance, t):
    nl = instance.nonlinearity
    if nl.identical:
        return instance.T * nl.F[0](t)
    return sum(Fk(t) for Fk in nl.F)


def _mp_pow(t, e):
    return mpf(t) ** e


def estimate_A0(
    instance: ProblemInstance, probe_ts: Sequence | None = None, tail: int | None = None, exponent: float | None = None
) -> LimitEstimate:
    """liminf of sum_k max_{|xi|<=t} F_k(xi) / t^{p+} along probe_ts."""
    ts = list(probe_ts) if probe_ts is not None else default_probes()
    _check_probes(ts)
    e = instance.exponents.p_plus if exponent is None else exponent
    qs = [mpf(_sum_envelopes(instance, t)) / _mp_pow(t, e) for t in ts]
    return _estimate(ts, qs, "liminf", tail)


def estimate_B0(
    instance: ProblemInstance, probe_ts: Sequence | None = None, tail: int | None = None, exponent: float | None = None
) -> LimitEstimate:
    """limsup of sum_k F_k(t) / t^{p-} along probe_ts."""
    ts = list(probe_ts) if probe_ts is not None else default_probes()
    _check_probes(ts)
    e = instance.exponents.p_minus if exponent is None else exponent
    qs = [mpf(_sum_F(instance, t)) / _mp_pow(t, e) for t in ts]
    return _estimate(ts, qs, "limsup", tail)


def _value(est) -> float:
    if isinstance(est, LimitEstimate):
        if est.trend == "oscillating" and est.tail_length < 4:
            raise EstimateUnavailable(f"{est.kind} estimate oscillates over only {est.tail_length} tail points")
        return est.value
    return float(est)


def _lower_end(B, pm) -> float:
    if B == INF:
        return 0.0
    if B <= 0:
        return INF
    return 2 / (pm * B)


def _ratio_upper(num, A) -> float:
    if A == INF:
        return 0.0
    if A <= 0:
        return INF
    return num / A


def h0_holds(A0: float, B0: float, k: float) -> bool:
    """A0 < kappa B0 with A0=0 < anything positive and inf vs inf undecided (False)."""
    if A0 == INF:
        return False
    if B0 == INF:
        return True
    return A0 < k * B0


def interval_thm_main(A0, B0, exponents: ExponentMap, T: int) -> ParameterInterval:
    A, B = _value(A0), _value(B0)
    pp, pm = exponents.p_plus, exponents.p_minus
    lower = _lower_end(B, pm)
    upper = _ratio_upper(2**pp / (pp * (T + 1) ** (pp - 1)), A)
    k = kappa(exponents, T)
    # bound on delta from the sublevel estimate; the interval sits in ]0, 1/delta_hat[
    delta_hat = pp * (T + 1) ** (pp - 1) * A / 2**pp if A != INF else INF
    inv_delta = INF if delta_hat == 0 else (0.0 if delta_hat == INF else 1 / delta_hat)
    iv = ParameterInterval(lower, upper, "thm_main")
    iv.notes = {
        "kappa": k,
        "h0": h0_holds(A, B, k),
        "delta_hat": delta_hat,
        "inv_delta_hat": inv_delta,
        "inclusion_in_0_inv_delta": (not iv.nonempty) or upper <= inv_delta * (1 + 4e-16),
    }
    return iv


def interval_const_p(A0_hat, B0_hat, p: float, T: int) -> ParameterInterval:
    A, B = _value(A0_hat), _value(B0_hat)
    lower = _lower_end(B, p)
    upper = _ratio_upper(2**p / (p * (T + 1) ** (p - 1)), A)
    k = 2 ** (p - 1) / (T + 1) ** (p - 1)
    return ParameterInterval(lower, upper, "cor_const_p", {"kappa": k, "h0": h0_holds(A, B, k)})


def interval_even_T(A0_hat, B0_hat, p: float, T: int) -> ParameterInterval:
    if T % 2:
        raise NotEven(f"T = {T} is odd")
    A, B = _value(A0_hat), _value(B0_hat)
    factor = (2 / T) ** (p - 1) + (2 / (T + 2)) ** (p - 1)
    lower = _lower_end(B, p)
    upper = _ratio_upper(factor / p, A)
    k = 2 ** (p - 2) * (1 / T ** (p - 1) + 1 / (T + 2) ** (p - 1))
    ref = interval_const_p(A, B, p, T)
    contains = ref.lower >= lower and ref.upper <= upper
    strict = ref.upper < upper
    return ParameterInterval(
        lower,
        upper,
        "cor_even_T",
        {"kappa": k, "h0": h0_holds(A, B, k), "contains_const_p": contains, "strict": strict, "const_p_upper": ref.upper},
    )


@dataclass
class TechnicalResult:
    G0: LimitEstimate
    interval: ParameterInterval
    k1_holds: bool
    k1_margins: list


def interval_technical(
    a_seq: Sequence, b_seq: Sequence, instance: ProblemInstance, B0=None, tail: int | None = None
) -> TechnicalResult:
    """G0 quotients along (a_m, b_m), the (k1) check and the resulting interval.

    G0 is a plain limit; we take the max over the tail (limsup), which can
    only shrink the reported interval.
    """
    if len(a_seq) != len(b_seq) or len(b_seq) < 4:
        raise ValueError("a_seq and b_seq need equal length >= 4")
    _check_probes(list(b_seq))
    T = instance.T
    pp, pm = instance.exponents.p_plus, instance.exponents.p_minus
    scale = pp * (T + 1) ** (pp - 1)
    kap = kappa(instance.exponents, T)
    bad, margins, qs = [], [], []
    for m, (a, b) in enumerate(zip(a_seq, b_seq)):
        a, b = mpf(a), mpf(b)
        lhs = a**pm
        rhs = kap * b**pp
        margins.append(float((rhs - lhs) / rhs))
        if not lhs < rhs:
            bad.append(m)
            continue
        den = 2 ** (pp - 1) * pm * b**pp - scale * a**pm
        if abs(den) <= 1e-14 * (2 ** (pp - 1) * pm * b**pp):
            raise DegenerateDenominator(f"(k1) margin below 1e-14 at m = {m}")
        num = mpf(_sum_envelopes(instance, b)) - (mpf(_sum_F(instance, a)) if a != 0 else 0)
        qs.append(num / den)
    if bad:
        raise K1Violated(bad)
    G0 = _estimate(list(b_seq), qs, "limsup", tail)
    if B0 is None:
        B0 = estimate_B0(instance, b_seq, tail)
    Bv = _value(B0)
    lower = _lower_end(Bv, pm)
    G = G0.value
    upper = INF if G <= 0 else (0.0 if G == INF else 2 / (pm * scale * G))
    iv = ParameterInterval(lower, upper, "thm_technical", {"k2": G < Bv / scale if G != INF else False})
    return TechnicalResult(G0, iv, True, margins)


# proof machinery -------------------------------------------------------------


def sublevel_radius(instance: ProblemInstance, c):
    """r(c) = 2^{p+} c^{p+} / (p+ (T+1)^{p+-1})."""
    pp = instance.exponents.p_plus
    T = instance.T
    return 2**pp / (pp * (T + 1) ** (pp - 1)) * c**pp


def phi_r_upper_bound(instance: ProblemInstance, c) -> tuple:
    """(r, bound) with bound >= phi(r) from the sublevel inclusion."""
    if not c > 0:
        raise ValueError("c must be positive")
    pp = instance.exponents.p_plus
    T = instance.T
    r = sublevel_radius(instance, c)
    if not r < 1 / pp:
        raise CNotSmallEnough(f"r = {float(r)} >= 1/p+ = {1 / pp}")
    bound = pp * (T + 1) ** (pp - 1) / 2**pp * _sum_envelopes(instance, c) / c**pp
    return r, bound


@dataclass
class InclusionReport:
    ok: bool
    checked: int
    rejected: int
    witness: object = None
    max_ratio: float = 0.0
    skipped: str | None = None


def check_sublevel_inclusion(
    instance: ProblemInstance, c: float, samples: int = 1000, seed: int = 0
) -> InclusionReport:
    """Sample v with Phi(v) < r(c), mostly close to the sublevel boundary, and check |v|_inf <= c."""
    try:
        r, _ = phi_r_upper_bound(instance, c)
    except CNotSmallEnough as exc:
        return InclusionReport(False, 0, 0, skipped=str(exc))
    rng = np.random.default_rng(seed)
    T = instance.T
    checked = rejected = 0
    worst = 0.0
    while checked < samples:
        x = _direction(rng, T, checked)
        level = r * rng.uniform(0.9, 1.0)
        t = _scale_to_level(instance, x, level)
        v = StateVector.from_interior(t * x)
        if not phi_only(instance, v) < r:
            rejected += 1
            continue
        checked += 1
        sup = norms(v)[1]
        worst = max(worst, sup / c)
        if sup > c:
            return InclusionReport(False, checked, rejected, v.values.tolist(), worst)
    if phi_only(instance, StateVector.zeros(T)) >= r:
        return InclusionReport(False, checked, rejected, [0.0] * (T + 2), worst)
    return InclusionReport(True, checked, rejected, None, worst)


def _direction(rng, T, i):
    # every fourth sample is a tent, which comes close to the embedding bound
    if i % 4 == 3:
        peak = rng.integers(1, T + 1)
        k = np.arange(1, T + 1)
        x = np.where(k <= peak, k / peak, (T + 1 - k) / (T + 1 - peak))
        return x * rng.choice([-1.0, 1.0])
    return rng.standard_normal(T)


def _scale_to_level(instance, x, level) -> float:
    def f(t):
        return phi_only(instance, StateVector.from_interior(t * x)) - level

    hi = 1.0
    while f(hi) < 0:
        hi *= 2
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo
