"""Truncated multivariate formal power series with exact rational coefficients.

A series is stored as a finite map from exponent vectors to nonzero rational
coefficients, truncated (inclusively) at a total-degree bound.  Coefficients
are exact: ``fractions.Fraction``, normalized to plain ``int`` whenever the
denominator is 1 so that integer-only computations never pay rational
overhead.  Floating point enters only through :meth:`MultiSeries.eval`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

Coef = Union[int, Fraction]

#: Relative size of a final degree-block increment below which evaluation is
#: reported as converged.
CONVERGED_REL = 1e-12
#: Relative size above which a run of nondecreasing block increments is
#: reported as diverging.
DIVERGING_REL = 1e-3


class SeriesError(ValueError):
    """Raised on contract violations (variable mismatch, bad constant term...)."""


def _q(value) -> Coef:
    """Coerce to an exact coefficient, collapsing integral fractions to int."""
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else value
    if isinstance(value, str):
        return _q(Fraction(value))
    raise TypeError(f"not an exact coefficient: {value!r}")


@dataclass(frozen=True)
class ExtendedValue:
    """Result of evaluating a nonnegative series at a nonnegative point.

    ``value`` is the truncated partial sum (``math.inf`` on overflow), and
    ``flag`` is one of ``"converged"``, ``"diverging"``, ``"inconclusive"``.
    ``tail`` is the relative size of the final degree-block increment.
    """

    value: float
    flag: str
    tail: float = 0.0

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value) and self.flag != "diverging"

    def __float__(self) -> float:
        return self.value


class MultiSeries:
    """Formal power series in ``nvars`` variables, truncated at total degree ``order``."""

    __slots__ = ("nvars", "order", "coeffs")

    def __init__(self, nvars: int, order: int, coeffs: Mapping[tuple, Coef] | None = None):
        if nvars < 1:
            raise SeriesError("nvars must be >= 1")
        if order < 0:
            raise SeriesError("order must be >= 0")
        clean: dict[tuple, Coef] = {}
        if coeffs:
            for expt, c in coeffs.items():
                expt = tuple(int(e) for e in expt)
                if len(expt) != nvars:
                    raise SeriesError(f"exponent {expt} has wrong arity (nvars={nvars})")
                if any(e < 0 for e in expt):
                    raise SeriesError(f"negative exponent in {expt}")
                if sum(expt) > order:
                    continue
                c = _q(c)
                if c:
                    clean[expt] = c
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "coeffs", clean)

    def __setattr__(self, *args):
        raise AttributeError("MultiSeries is immutable")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(value, nvars: int = 1, order: int = 0) -> "MultiSeries":
        zero = (0,) * nvars
        return MultiSeries(nvars, order, {zero: _q(value)})

    @staticmethod
    def variable(j: int, nvars: int, order: int) -> "MultiSeries":
        """The monomial x_j (1-based index)."""
        if not 1 <= j <= nvars:
            raise SeriesError(f"variable index {j} out of range 1..{nvars}")
        expt = tuple(1 if i == j - 1 else 0 for i in range(nvars))
        return MultiSeries(nvars, order, {expt: 1})

    @staticmethod
    def from_univariate(coefs: Sequence[Coef], order: int | None = None) -> "MultiSeries":
        if order is None:
            order = len(coefs) - 1
        return MultiSeries(1, order, {(n,): c for n, c in enumerate(coefs) if c})

    # -- inspection ---------------------------------------------------------

    def coefficient(self, expt) -> Coef:
        return self.coeffs.get(tuple(expt), 0)

    def constant_term(self) -> Coef:
        return self.coeffs.get((0,) * self.nvars, 0)

    @property
    def nonneg(self) -> bool:
        """True when every stored coefficient is >= 0.

        Nonnegativity is closed under add/mul/compose/exp/partial, so the flag
        needs no explicit propagation.
        """
        return all(c >= 0 for c in self.coeffs.values())

    def is_zero(self) -> bool:
        return not self.coeffs

    def univariate_coefficients(self) -> list[Coef]:
        """Dense coefficient list [c_0 .. c_order]; nvars must be 1."""
        if self.nvars != 1:
            raise SeriesError("not a univariate series")
        out: list[Coef] = [0] * (self.order + 1)
        for (n,), c in self.coeffs.items():
            out[n] = c
        return out

    def truncate(self, order: int) -> "MultiSeries":
        if order >= self.order:
            return self
        return MultiSeries(self.nvars, order, self.coeffs)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MultiSeries)
            and self.nvars == other.nvars
            and self.order == other.order
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.nvars, self.order, frozenset(self.coeffs.items())))

    def __repr__(self) -> str:
        if not self.coeffs:
            body = "0"
        else:
            parts = []
            for expt in sorted(self.coeffs, key=lambda e: (sum(e), e)):
                c = self.coeffs[expt]
                mono = "*".join(
                    f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}"
                    for i, e in enumerate(expt)
                    if e
                )
                parts.append(f"{c}" + (f"*{mono}" if mono else ""))
            body = " + ".join(parts[:8]) + (" + ..." if len(parts) > 8 else "")
        return f"<MultiSeries nvars={self.nvars} order={self.order}: {body}>"

    # -- ring operations ----------------------------------------------------

    def _check_compatible(self, other: "MultiSeries"):
        if self.nvars != other.nvars:
            raise SeriesError(
                f"variable-count mismatch: {self.nvars} vs {other.nvars}"
            )

    def __add__(self, other) -> "MultiSeries":
        if isinstance(other, (int, Fraction)):
            other = MultiSeries.constant(other, self.nvars, self.order)
        self._check_compatible(other)
        order = min(self.order, other.order)
        out = dict(self.truncate(order).coeffs)
        for expt, c in other.coeffs.items():
            if sum(expt) > order:
                continue
            s = out.get(expt, 0) + c
            if s:
                out[expt] = s
            else:
                out.pop(expt, None)
        return MultiSeries(self.nvars, order, out)

    __radd__ = __add__

    def __mul__(self, other) -> "MultiSeries":
        if isinstance(other, (int, Fraction)):
            if not other:
                return MultiSeries(self.nvars, self.order)
            return MultiSeries(
                self.nvars, self.order, {e: c * other for e, c in self.coeffs.items()}
            )
        self._check_compatible(other)
        order = min(self.order, other.order)
        out: dict[tuple, Coef] = {}
        for ea, ca in self.coeffs.items():
            da = sum(ea)
            if da > order:
                continue
            for eb, cb in other.coeffs.items():
                if da + sum(eb) > order:
                    continue
                expt = tuple(i + j for i, j in zip(ea, eb))
                s = out.get(expt, 0) + ca * cb
                if s:
                    out[expt] = s
                else:
                    out.pop(expt, None)
        return MultiSeries(self.nvars, order, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "MultiSeries":
        if k < 0:
            raise SeriesError("negative powers not supported")
        result = MultiSeries.constant(1, self.nvars, self.order)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def partial(self, j: int) -> "MultiSeries":
        """Formal partial derivative with respect to variable ``j`` (1-based)."""
        if not 1 <= j < self.nvars + 1:
            raise SeriesError(f"variable index {j} out of range 1..{self.nvars}")
        i = j - 1
        out: dict[tuple, Coef] = {}
        for expt, c in self.coeffs.items():
            e = expt[i]
            if e == 0:
                continue
            lowered = expt[:i] + (e - 1,) + expt[i + 1:]
            out[lowered] = c * e
        return MultiSeries(self.nvars, max(self.order - 1, 0), out)

    def compose(self, args: Sequence["MultiSeries"]) -> "MultiSeries":
        """Substitute args[l] for variable l+1; every arg needs zero constant term."""
        if len(args) != self.nvars:
            raise SeriesError(
                f"compose needs {self.nvars} argument series, got {len(args)}"
            )
        if not args:
            raise SeriesError("compose needs at least one argument")
        nvars = args[0].nvars
        order = min(b.order for b in args)
        for b in args:
            if b.nvars != nvars:
                raise SeriesError("argument series disagree on variable count")
            if b.constant_term():
                raise SeriesError("composition argument has nonzero constant term")
        # Each arg has valuation >= 1, so exponent vectors of total degree
        # beyond the truncation order contribute nothing.
        powers: list[dict[int, MultiSeries]] = [
            {0: MultiSeries.constant(1, nvars, order)} for _ in args
        ]

        def power(l: int, k: int) -> MultiSeries:
            cache = powers[l]
            if k not in cache:
                cache[k] = power(l, k - 1) * args[l]
            return cache[k]

        acc = MultiSeries(nvars, order)
        for expt in sorted(self.coeffs, key=sum):
            if sum(expt) > order:
                continue
            term = MultiSeries.constant(self.coeffs[expt], nvars, order)
            for l, e in enumerate(expt):
                if e:
                    term = term * power(l, e)
            acc = acc + term
        return acc

    def exp(self) -> "MultiSeries":
        """exp of a series with zero constant term: sum a^k / k! truncated."""
        if self.constant_term():
            raise SeriesError("exp requires zero constant term")
        acc = MultiSeries.constant(1, self.nvars, self.order)
        term = MultiSeries.constant(1, self.nvars, self.order)
        for k in range(1, self.order + 1):
            term = term * self * Fraction(1, k)
            if term.is_zero():
                break
            acc = acc + term
        return acc

    # -- evaluation ---------------------------------------------------------

    def eval(self, point: Sequence[float]) -> ExtendedValue:
        """Evaluate at a nonnegative point by diagonal partial sums.

        Summation runs in nondecreasing total-degree order, which for a
        nonnegative series at a nonnegative point is monotone, so the partial
        sum is always a lower bound.  The returned flag reports the spec'd
        trichotomy computed from the degree-block increments.
        """
        point = [float(p) for p in point]
        if len(point) != self.nvars:
            raise SeriesError(f"point has arity {len(point)}, series {self.nvars}")
        if any(p < 0 for p in point):
            raise SeriesError("evaluation point must be nonnegative")
        blocks = [0.0] * (self.order + 1)
        for expt, c in self.coeffs.items():
            term = float(c)
            for p, e in zip(point, expt):
                if e:
                    term *= p ** e
            blocks[sum(expt)] += term
        return summation_diagnostic(blocks)


def summation_diagnostic(blocks: Sequence[float]) -> ExtendedValue:
    """Fold degree-block increments into a value and a convergence verdict.

    The diverging test looks at the last three *nonzero* increments (strided
    supports interleave structurally-zero degree blocks which would otherwise
    mask growth); the converged test uses the raw final increment, so trailing
    zero blocks of a finished polynomial still read as converged.
    """
    total = 0.0
    for b in blocks:
        total += b
    if not math.isfinite(total):
        return ExtendedValue(math.inf, "diverging", math.inf)
    scale = max(abs(total), 1e-300)
    tail = blocks[-1] / scale if blocks else 0.0
    nz = [b for b in blocks if b != 0.0]
    if len(nz) >= 3:
        b1, b2, b3 = nz[-3], nz[-2], nz[-1]
        if b1 <= b2 <= b3 and b3 > DIVERGING_REL * scale:
            return ExtendedValue(total, "diverging", nz[-1] / scale)
    if abs(tail) < CONVERGED_REL:
        return ExtendedValue(total, "converged", tail)
    return ExtendedValue(total, "inconclusive", tail)


# -- module-level operation aliases (the functional spelling) ----------------

def add(a: MultiSeries, b: MultiSeries) -> MultiSeries:
    return a + b


def mul(a: MultiSeries, b: MultiSeries) -> MultiSeries:
    return a * b


def compose(a: MultiSeries, args: Sequence[MultiSeries]) -> MultiSeries:
    return a.compose(args)


def partial(a: MultiSeries, j: int) -> MultiSeries:
    return a.partial(j)


def exp_series(a: MultiSeries) -> MultiSeries:
    return a.exp()


def eval_series(a: MultiSeries, point: Sequence[float]) -> ExtendedValue:
    return a.eval(point)


def polylog_coefficient(weight: int, n: int) -> Coef:
    """Coefficient of w^n in polylog(weight, w) = sum_{n>=1} w^n / n^weight."""
    if n < 1:
        return 0
    return _q(Fraction(1, n ** weight))


def polylog_series(weight: int, order: int) -> MultiSeries:
    """Univariate polylog series truncated at ``order``; weight must be >= 1."""
    if weight < 1:
        raise SeriesError("polylog weight must be a positive integer")
    return MultiSeries(
        1, order, {(n,): polylog_coefficient(weight, n) for n in range(1, order + 1)}
    )
