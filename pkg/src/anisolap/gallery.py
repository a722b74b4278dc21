"""The oscillating nonlinearity g built on factorial scales, plus baseline families.

Scales are s_m = 2^{-m!/2}, t_m = 2^{-2 m!}, delta_m = 2^{-(m!)^2}. Already
t_7 = 2^{-10080}, far below the float64 range, so all arithmetic here runs
on ``mpmath.mpf``, whose binary exponent is an unbounded integer. That
makes an mpf a (sign, log2-magnitude) pair with a finite mantissa, which
is the log-domain encoding we need.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable

import mpmath
from mpmath import mpf

from .problem import ExponentMap, NonlinearityFamily, ProblemInstance


class NoValidNu(ValueError):
    pass


class PrecisionExhausted(ValueError):
    pass


class UnknownFamily(KeyError):
    pass


# exponents above this many bits are refused by quotient_tables
MAX_PREC_BITS = 2_000_000


@lru_cache(maxsize=None)
def fact(m: int) -> int:
    return math.factorial(m)


@dataclass(frozen=True)
class FactorialSequences:
    """Exact base-2 exponents of s_m, t_m and delta_m."""

    m: int
    log2_s: Fraction
    log2_t: Fraction
    log2_delta: Fraction
    nu: int


def factorial_sequences(m: int, nu: int | None = None) -> FactorialSequences:
    f = fact(m)
    return FactorialSequences(
        m, Fraction(-f, 2), Fraction(-2 * f), Fraction(-(f * f)), nu if nu is not None else minimal_nu(max(m, 8))
    )


def _ordering_holds(m: int) -> bool:
    """s_{m+1} < t_m < s_m - delta_m, decided exactly."""
    # s_{m+1} < t_m  <=>  (m+1)!/2 > 2 m!
    if not Fraction(fact(m + 1), 2) > 2 * fact(m):
        return False
    # t_m < s_m - delta_m  <=>  t_m + delta_m < s_m
    f = fact(m)
    gap = -(f * f) + Fraction(f, 2)  # log2(delta_m / s_m)
    if gap <= -1:
        # delta_m / s_m = x <= 1/2, and -log2(1 - x) <= 2x/ln 2 < 3x, so
        # log2(s_m - delta_m) > -m!/2 - 3x; enough that this beats -2 m!.
        x_bound = Fraction(1, 2 ** min(math.floor(-gap), 64))
        return Fraction(-f, 2) - 3 * x_bound > -2 * f
    # small m: square both sides (s_m^2 = 2^{-m!} is dyadic)
    lhs = (Fraction(1, 2 ** (2 * f)) + Fraction(1, 2 ** (f * f))) ** 2
    return lhs < Fraction(1, 2**f)


def minimal_nu(max_m: int = 12) -> int:
    """Smallest nu with the scale ordering holding for every nu <= m <= max_m."""
    if max_m < 2:
        raise ValueError("max_m must be at least 2")
    nu = None
    for m in range(max_m, 0, -1):
        if _ordering_holds(m):
            nu = m
        else:
            break
    if nu is None:
        raise NoValidNu(f"ordering fails at m = {max_m}")
    return nu


def _pow2(e) -> mpf:
    """2^e for an exact exponent; dyadic when e is an integer."""
    e = Fraction(e)
    if e.denominator == 1:
        return _dyadic(int(e))
    return mpmath.power(2, mpf(e.numerator) / e.denominator)


@lru_cache(maxsize=4096)
def _dyadic(e: int) -> mpf:
    # exact at any precision, so safe to share between workprec blocks
    return mpf((0, 1, e, 1))


def _floor_log2(x: mpf) -> int:
    sign, man, exp, bc = x._mpf_
    return exp + bc - 1


class ExampleG:
    """Nonnegative continuous g: flat plateaus joined by steep affine ramps.

    Plateau m is [s_{m+1}, s_m - delta_m] with value 2^{-(gamma-1) m!}; the
    ramp on ]s_{m+1} - delta_{m+1}, s_{m+1}[ climbs from the (m+1)-plateau
    to the m-plateau; g is constant for s > s_nu - delta_nu and zero for s <= 0.
    """

    def __init__(self, gamma=3, nu: int | None = None):
        gamma = Fraction(gamma) if not isinstance(gamma, float) else Fraction(gamma).limit_denominator(10**9)
        if not gamma > 2:
            raise ValueError("gamma must exceed 2")
        self.gamma = gamma
        least = minimal_nu(12)
        self.nu = least if nu is None else int(nu)
        if self.nu < least:
            raise NoValidNu(f"nu = {self.nu} violates the scale ordering (need nu >= {least})")
        self._P_cache: dict = {}
        self._plateau_cache: dict = {}

    def __repr__(self) -> str:
        return f"ExampleG(gamma={self.gamma}, nu={self.nu})"

    # scales ---------------------------------------------------------------
    def log2_plateau(self, m: int) -> Fraction:
        return -(self.gamma - 1) * fact(m)

    def s(self, m: int) -> mpf:
        return _pow2(Fraction(-fact(m), 2))

    def t(self, m: int) -> mpf:
        return _pow2(-2 * fact(m))

    def delta(self, m: int) -> mpf:
        return _pow2(-(fact(m) ** 2))

    def plateau(self, m: int) -> mpf:
        e = self.log2_plateau(m)
        if e.denominator == 1:
            return _dyadic(int(e))
        key = (m, mpmath.mp.prec)
        v = self._plateau_cache.get(key)
        if v is None:
            v = self._plateau_cache[key] = _pow2(e)
        return v

    # exact dispatch -------------------------------------------------------
    def _below_s_minus_delta(self, x: mpf, j: int) -> bool:
        """x <= s_j - delta_j, exactly."""
        sj = self.s(j)
        if x >= sj:
            return False
        if x < sj / 2:
            return True
        return mpmath.fsub(sj, x, exact=True) >= self.delta(j)

    def piece(self, x) -> tuple:
        """('zero',), ('top',), ('plateau', m) or ('ramp', m) containing x."""
        x = mpf(x)
        if x <= 0:
            return ("zero",)
        if not self._below_s_minus_delta(x, self.nu):
            return ("top",)
        j = self.nu
        while True:
            # here x <= s_j - delta_j
            if x >= self.s(j + 1):
                return ("plateau", j)
            if not self._below_s_minus_delta(x, j + 1):
                return ("ramp", j)
            j += 1

    # g, g', G ---------------------------------------------------------------
    def g(self, x) -> mpf:
        pc = self.piece(x)
        if pc[0] == "zero":
            return mpf(0)
        if pc[0] == "top":
            return self.plateau(self.nu)
        m = pc[1]
        if pc[0] == "plateau":
            return self.plateau(m)
        return self._ramp(mpf(x), m)

    def _ramp(self, x: mpf, m: int) -> mpf:
        lo, hi = self.plateau(m + 1), self.plateau(m)
        d = self.delta(m + 1)
        w = mpmath.fadd(mpmath.fsub(x, self.s(m + 1), exact=True), d, exact=True)
        return (hi - lo) * (w / d) + lo

    def dg(self, x) -> mpf:
        pc = self.piece(x)
        if pc[0] != "ramp":
            return mpf(0)
        m = pc[1]
        return (self.plateau(m) - self.plateau(m + 1)) / self.delta(m + 1)

    def _plateau_integral(self, i: int) -> mpf:
        return self.plateau(i) * (self.s(i) - self.delta(i) - self.s(i + 1))

    def _ramp_integral(self, i: int) -> mpf:
        # ramp i-1 lives on ]s_i - delta_i, s_i[
        return (self.plateau(i) + self.plateau(i - 1)) / 2 * self.delta(i)

    def P(self, m: int) -> mpf:
        """G(s_{m+1}): everything below plateau m."""
        key = (m, mpmath.mp.prec)
        if key in self._P_cache:
            return self._P_cache[key]
        terms = []
        i = m + 1
        cutoff = None
        while True:
            term = self._ramp_integral(i) + self._plateau_integral(i)
            terms.append(term)
            if cutoff is None:
                cutoff = _floor_log2(term) - mpmath.mp.prec - 32
            elif _floor_log2(term) < cutoff:
                break
            i += 1
        val = mpmath.fsum(sorted(terms))
        self._P_cache[key] = val
        return val

    def _Q(self, j: int) -> mpf:
        """G(s_j - delta_j): P(j) plus the full plateau j."""
        return self.P(j) + self._plateau_integral(j)

    def G(self, x) -> mpf:
        """Exact piecewise integral of g from 0 to x (x may be negative)."""
        x = mpf(x)
        pc = self.piece(x)
        if pc[0] == "zero":
            return mpf(0)
        if pc[0] == "top":
            left = self.s(self.nu) - self.delta(self.nu)
            return self._Q(self.nu) + self.plateau(self.nu) * (x - left)
        m = pc[1]
        if pc[0] == "plateau":
            return self.P(m) + self.plateau(m) * (x - self.s(m + 1))
        # ramp m: trapezoid from L = s_{m+1} - delta_{m+1}
        w = mpmath.fadd(mpmath.fsub(x, self.s(m + 1), exact=True), self.delta(m + 1), exact=True)
        return self._Q(m + 1) + w * (self.plateau(m + 1) + self._ramp(x, m)) / 2

    # probe points for the limit estimates ----------------------------------------------
    def a0_probes(self, ms: Iterable[int]) -> list:
        return [self.s(m) for m in ms]

    def b0_probes(self, ms: Iterable[int]) -> list:
        """Maximisers of G(t)/t^{gamma-1} on plateau m: t = e/(e-1) s_{m+1}, e = gamma-1."""
        e = mpf(self.gamma.numerator) / self.gamma.denominator - 1
        return [e / (e - 1) * self.s(m + 1) for m in ms]

    def nonlinearity(self, T: int) -> NonlinearityFamily:
        return NonlinearityFamily(T, self.g, self.G, self.dg, nonnegative=True, name=f"example_esempio({self.gamma})")

    def default_exponents(self, T: int) -> ExponentMap:
        g = float(self.gamma)
        return ExponentMap.alternating(g, g - 1, T)


def eval_g(example: ExampleG, s) -> mpf:
    """g at s; s may be a float, an mpf, or a (sign, log2|s|) pair."""
    return example.g(_decode(s))


def eval_G(example: ExampleG, t) -> mpf:
    return example.G(_decode(t))


def from_log2(sign: int, log2_mag) -> mpf:
    if sign == 0:
        return mpf(0)
    return sign * _pow2(Fraction(log2_mag)) if isinstance(log2_mag, (int, Fraction)) else sign * mpmath.power(2, log2_mag)


def to_log2(x) -> tuple:
    x = mpf(x)
    if x == 0:
        return (0, mpmath.ninf)
    return (1 if x > 0 else -1, mpmath.log(abs(x), 2))


def _decode(x):
    if isinstance(x, tuple):
        return from_log2(*x)
    return mpf(x)


def _required_prec(ex: ExampleG, ms) -> int:
    """Bits needed to resolve the margins of both displayed bounds."""
    need = 0
    gm1 = ex.gamma - 1
    for m in ms:
        f, f1 = fact(m), fact(m + 1)
        upper_gap = Fraction(f1 - f, 2)  # s_{m+1}/s_m
        lower_gap = gm1 * f1 + Fraction(f1, 2) - gm1 * f - 2 * f  # P(m) vs c_m t_m
        need = max(need, math.ceil(upper_gap), math.ceil(lower_gap))
    return need + 128


@dataclass
class QuotientTables:
    ms: list
    upper_log2: list  # log2 G(s_m)/s_m^gamma
    lower_log2: list  # log2 G(t_m)/t_m^{gamma-1}
    upper_bound_ok: list
    lower_bound_ok: list
    prec: int

    @property
    def upper_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.upper_log2, self.upper_log2[1:]))

    @property
    def lower_increasing(self) -> bool:
        return all(b > a for a, b in zip(self.lower_log2, self.lower_log2[1:]))

    def as_dict(self) -> dict:
        return {
            "ms": list(self.ms),
            "upper_log2": [float(x) for x in self.upper_log2],
            "lower_log2": [float(x) for x in self.lower_log2],
            # for gamma = 3 the lower quotients creep up to 1 from below; floats round the gap away
            "lower_log2_gap_log2": [float(mpmath.log(-x, 2)) if x < 0 else None for x in self.lower_log2],
            "upper_decreasing": self.upper_decreasing,
            "lower_increasing": self.lower_increasing,
            "upper_bound_holds": [bool(x) for x in self.upper_bound_ok],
            "lower_bound_holds": [bool(x) for x in self.lower_bound_ok],
            "prec_bits": self.prec,
        }


def quotient_tables(example: ExampleG, m_range: Iterable[int] | None = None) -> QuotientTables:
    ms = list(m_range) if m_range is not None else list(range(example.nu, example.nu + 4))
    if min(ms) < example.nu:
        raise ValueError("m_range must start at or after nu")
    prec = _required_prec(example, ms)
    if prec > MAX_PREC_BITS:
        raise PrecisionExhausted(f"{prec} bits needed for m up to {max(ms)}")
    gamma = mpf(example.gamma.numerator) / example.gamma.denominator
    up, lo, up_ok, lo_ok = [], [], [], []
    with mpmath.workprec(prec):
        for m in ms:
            sm, tm, dm, s1 = example.s(m), example.t(m), example.delta(m), example.s(m + 1)
            Gs, Gt = example.G(sm), example.G(tm)
            up.append(mpmath.log(Gs, 2) - gamma * mpmath.log(sm, 2))
            lo.append(mpmath.log(Gt, 2) - (gamma - 1) * mpmath.log(tm, 2))
            up_ok.append(Gs <= example.g(s1) * sm + example.g(sm) * dm)
            lo_ok.append(Gt >= example.g(s1) * (tm - s1))
    example._P_cache.clear()
    return QuotientTables(ms, up, lo, up_ok, lo_ok, prec)


# baseline families ---------------------------------------------------------


@dataclass(frozen=True)
class FamilySpec:
    name: str
    description: str
    build: Callable


def _linear(T, lam=1.0, value=1.0, p=2.0, exponents=None):
    value = float(value)
    nl = NonlinearityFamily(
        T,
        lambda t: value + 0 * t,
        lambda t: value * t,
        lambda t: 0 * t,
        nonnegative=value >= 0,
        name=f"linear({value})",
    )
    return ProblemInstance(T, exponents or ExponentMap.constant(p, T), nl, lam, {"family": "linear", "value": value})


def _power(T, lam=1.0, q=3.0, p=2.0, exponents=None):
    q = float(q)
    nl = NonlinearityFamily(
        T,
        lambda t: abs(t) ** (q - 2) * t if t != 0 else 0 * t,
        lambda t: abs(t) ** q / q,
        lambda t: (q - 1) * abs(t) ** (q - 2) if t != 0 or q >= 2 else mpmath.inf,
        name=f"power({q})",
    )
    return ProblemInstance(T, exponents or ExponentMap.constant(p, T), nl, lam, {"family": "power", "q": q})


def _polynomial(T, lam=1.0, coefficients=(0.0, 1.0), p=2.0, exponents=None):
    a = [float(c) for c in coefficients]

    def f(t):
        acc = 0 * t
        for c in reversed(a):
            acc = acc * t + c
        return acc

    def F(t):
        acc = 0 * t
        for i in reversed(range(len(a))):
            acc = acc * t + a[i] / (i + 1)
        return acc * t

    def df(t):
        acc = 0 * t
        for i in reversed(range(1, len(a))):
            acc = acc * t + i * a[i]
        return acc

    nl = NonlinearityFamily(T, f, F, df, name=f"polynomial({a})")
    return ProblemInstance(T, exponents or ExponentMap.constant(p, T), nl, lam, {"family": "polynomial", "coefficients": a})


def _esempio(T, lam=1.0, gamma=3, nu=None, exponents=None):
    ex = ExampleG(gamma, nu)
    return ProblemInstance(
        T,
        exponents or ex.default_exponents(T),
        ex.nonlinearity(T),
        lam,
        {"family": "example_esempio", "gamma": str(ex.gamma), "nu": ex.nu, "example": ex},
    )


def _theorem_intro(T, g, lam=1.0, exponents=None, p=2.0):
    """Any nonnegative continuous g, same on every node; F by quadrature."""
    nl = NonlinearityFamily(T, g, nonnegative=True, name="theorem_intro")
    return ProblemInstance(T, exponents or ExponentMap.constant(p, T), nl, lam, {"family": "theorem_intro"})


_CATALOG = {
    "linear": FamilySpec("linear", "f_k = const, p = 2: exactly solvable", _linear),
    "power": FamilySpec("power", "f_k(t) = |t|^{q-2} t", _power),
    "polynomial": FamilySpec("polynomial", "f_k(t) = sum a_i t^i", _polynomial),
    "example_esempio": FamilySpec("example_esempio", "oscillating factorial-scale g", _esempio),
    "theorem_intro": FamilySpec("theorem_intro", "user-supplied nonnegative g", _theorem_intro),
}


def builtin_families() -> dict:
    return dict(_CATALOG)


def make_instance(name: str, T: int, **params) -> ProblemInstance:
    """Build a catalogue instance; ``example_esempio(3)`` style names are accepted."""
    base, arg = name, None
    if "(" in name and name.endswith(")"):
        base, arg = name[:-1].split("(", 1)
    try:
        spec = _CATALOG[base]
    except KeyError:
        raise UnknownFamily(name) from None
    if arg:
        key = {"example_esempio": "gamma", "power": "q", "linear": "value"}.get(base)
        if key is None:
            raise UnknownFamily(name)
        params.setdefault(key, Fraction(arg) if base == "example_esempio" else float(arg))
    return spec.build(T, **params)
