"""Standard solutions: exact coefficient recursion and numeric evaluation.

``solve_coefficients`` computes the unique nonnegative power-series solution
T with T(0) = 0 of y = G(x, y) by order-by-order extraction: once T is known
through order n-1, the order-n coefficient of G(x, T(x)) is fully determined
(every monomial of a solvable system carries a positive power of x or of an
origin-vanishing auxiliary series), and equals t_n.  All arithmetic is exact.

Numeric evaluation comes in two flavors:

* truncated: partial sums of the solved series in nondecreasing degree order,
  with the converged/diverging/inconclusive trichotomy (`SeriesEvaluator`);
* pointwise: solving the defining equation y = G(x0, y) at a fixed abscissa by
  damped Newton from 0, which converges to the standard solution from below
  (`AuxEvaluator`).  This is how tau = A(1)e^tau is handled at the boundary,
  where truncated sums converge like N^(-1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from charpoint import sysdef
from charpoint.series import (
    Coef,
    ExtendedValue,
    MultiSeries,
    _q,
    summation_diagnostic,
)
from charpoint.sysdef import (
    Add,
    AuxDeriv,
    AuxSeries,
    Const,
    Exp,
    Expr,
    Mul,
    Polylog,
    PolylogD,
    Pow,
    SystemSpec,
    VarX,
    VarY,
)

_FLAG_RANK = {"converged": 0, "inconclusive": 1, "diverging": 2}


class SolveError(RuntimeError):
    """Coefficient recursion failed (usually a violated well-conditioning hypothesis)."""


def _worst(*flags: str) -> str:
    return max(flags, key=_FLAG_RANK.__getitem__)


# ---------------------------------------------------------------------------
# Coefficient caches: one per distinct subexpression, all exact
# ---------------------------------------------------------------------------

class _Cache:
    __slots__ = ("c",)

    def __init__(self):
        self.c: list = []

    def grow(self, n: int):  # index n becomes final; children already grown
        raise NotImplementedError

    def top(self, n: int):  # tentative value at n; None if it needs t_n
        raise NotImplementedError


class _ConstC(_Cache):
    def __init__(self, v):
        super().__init__()
        self.v = v

    def grow(self, n):
        self.c.append(self.v if n == 0 else 0)

    def top(self, n):
        return self.v if n == 0 else 0


class _VarXC(_Cache):
    def grow(self, n):
        self.c.append(1 if n == 1 else 0)

    def top(self, n):
        return 1 if n == 1 else 0


class _VarYC(_Cache):
    def __init__(self, j, t_lists):
        super().__init__()
        self.j = j - 1
        self.t = t_lists

    def grow(self, n):
        self.c.append(self.t[self.j][n])

    def top(self, n):
        tj = self.t[self.j]
        return tj[n] if n < len(tj) else None


class _StaticC(_Cache):
    """A fully known univariate series (aux solution, aux derivative, polylog(x))."""

    def __init__(self, coefs: Sequence[Coef]):
        super().__init__()
        self.full = list(coefs)

    def grow(self, n):
        self.c.append(self.full[n] if n < len(self.full) else 0)

    def top(self, n):
        return self.full[n] if n < len(self.full) else 0


class _AddC(_Cache):
    def __init__(self, children):
        super().__init__()
        self.children = children

    def grow(self, n):
        self.c.append(sum(ch.c[n] for ch in self.children))

    def top(self, n):
        acc = 0
        for ch in self.children:
            v = ch.top(n)
            if v is None:
                return None
            acc = acc + v
        return acc


class _MulC(_Cache):
    def __init__(self, u, v):
        super().__init__()
        self.u = u
        self.v = v

    def grow(self, n):
        uc, vc = self.u.c, self.v.c
        acc = 0
        for k in range(n + 1):
            a = uc[k]
            if a:
                b = vc[n - k]
                if b:
                    acc = acc + a * b
        self.c.append(acc)

    def top(self, n):
        # only called with n >= 1 (index 0 is seeded by grow)
        uc, vc = self.u.c, self.v.c
        acc = 0
        for k in range(1, n):
            a = uc[k]
            if a:
                b = vc[n - k]
                if b:
                    acc = acc + a * b
        if uc[0]:
            vn = self.v.top(n)
            if vn is None:
                return None
            acc = acc + uc[0] * vn
        if vc[0]:
            un = self.u.top(n)
            if un is None:
                return None
            acc = acc + un * vc[0]
        return acc


class _ExpC(_Cache):
    """exp(u) for u with zero constant term, via e' = u' e."""

    def __init__(self, u):
        super().__init__()
        self.u = u

    def grow(self, n):
        if n == 0:
            self.c.append(1)
            return
        acc = 0
        uc, ec = self.u.c, self.c
        for k in range(1, n + 1):
            a = uc[k]
            if a:
                b = ec[n - k]
                if b:
                    acc = acc + k * a * b
        self.c.append(_q(Fraction(acc, n)) if acc else 0)

    def top(self, n):
        if n == 0:
            return 1
        acc = 0
        uc, ec = self.u.c, self.c
        for k in range(1, n):
            a = uc[k]
            if a:
                b = ec[n - k]
                if b:
                    acc = acc + k * a * b
        un = self.u.top(n)
        if un is None:
            return None
        acc = acc + n * un  # e_0 = 1
        return _q(Fraction(acc, n)) if acc else 0


class _PolylogGenC(_Cache):
    """polylog-family series composed with a general argument.

    Expensive (keeps one power cache per exponent); the common polylog(s, x)
    case is routed to _StaticC instead.
    """

    def __init__(self, weight, shift, arg):
        super().__init__()
        self.weight = weight
        self.shift = shift
        self.arg = arg
        self.powers: list[_Cache] = [arg]  # powers[p] = arg^(p+1)

    def _coef(self, m: int) -> Coef:
        return _q(Fraction(math.perm(m, self.shift), m ** self.weight))

    def _ensure_powers(self, count: int, upto: int):
        """Have arg^1..arg^count cached, private chains grown through index upto."""
        while len(self.powers) < count:
            nxt = _MulC(self.powers[-1], self.arg)
            self.powers.append(nxt)
        for p in self.powers[1:]:
            while len(p.c) <= upto:
                p.grow(len(p.c))

    def grow(self, n):
        self._ensure_powers(max(n, 1), n)
        acc = self._coef(self.shift) if (n == 0 and self.shift >= 1) else 0
        for p, cache in enumerate(self.powers, start=1):
            if p <= n or (p == 1 and n >= 1):
                v = cache.c[n]
                if v:
                    acc = acc + self._coef(p + self.shift) * v
        self.c.append(acc)

    def top(self, n):
        if n == 0:
            return self._coef(self.shift) if self.shift >= 1 else 0
        self._ensure_powers(max(n, 1), n - 1)
        # the p = 1 term may touch the unknown top coefficient of the argument
        a1 = self.arg.top(n)
        if a1 is None:
            return None
        acc = self._coef(1 + self.shift) * a1 if a1 else 0
        for p in range(2, n + 1):
            v = self.powers[p - 1].top(n)
            if v is None:
                return None
            if v:
                acc = acc + self._coef(p + self.shift) * v
        return acc


class _Builder:
    def __init__(self, t_lists, aux_lists, order):
        self.t = t_lists
        self.aux = aux_lists
        self.order = order
        self.table: dict = {}
        self.topo: list[_Cache] = []
        self._registered: set = set()

    def _register(self, cache: _Cache) -> _Cache:
        if id(cache) not in self._registered:
            self._registered.add(id(cache))
            self.topo.append(cache)
        return cache

    def build(self, e: Expr) -> _Cache:
        if e in self.table:
            return self.table[e]
        cache = self._register(self._make(e))
        self.table[e] = cache
        return cache

    def _make(self, e: Expr) -> _Cache:
        if isinstance(e, Const):
            return _ConstC(e.value)
        if isinstance(e, VarX):
            return _VarXC()
        if isinstance(e, VarY):
            return _VarYC(e.index, self.t)
        if isinstance(e, Add):
            return _AddC([self.build(t) for t in e.terms])
        if isinstance(e, Mul):
            # chain n-ary products; every intermediate joins the topo list
            acc = self.build(e.factors[0])
            for f in e.factors[1:]:
                acc = self._register(_MulC(acc, self.build(f)))
            return acc
        if isinstance(e, Pow):
            return self.build(Mul((e.base,) * e.exponent))
        if isinstance(e, Exp):
            return _ExpC(self.build(e.arg))
        if isinstance(e, (Polylog, PolylogD)):
            shift = e.shift if isinstance(e, PolylogD) else 0
            if isinstance(e.arg, VarX):
                coefs = [0] * (self.order + 1)
                for n in range(0 if shift else 1, self.order + 1):
                    m = n + shift
                    if m >= 1:
                        coefs[n] = _q(Fraction(math.perm(m, shift), m ** e.weight))
                return _StaticC(coefs)
            return _PolylogGenC(e.weight, shift, self.build(e.arg))
        if isinstance(e, AuxSeries):
            return _StaticC(self.aux[e.name])
        if isinstance(e, AuxDeriv):
            base = list(self.aux[e.name])
            for _ in range(e.order):
                base = [base[k + 1] * (k + 1) for k in range(len(base) - 1)]
            return _StaticC(base)
        raise TypeError(f"cannot build cache for {e!r}")


# ---------------------------------------------------------------------------
# StandardSolution
# ---------------------------------------------------------------------------

@dataclass
class StandardSolution:
    """Truncated standard solution of a system, plus convergence metadata."""

    system: SystemSpec
    series: tuple  # m univariate MultiSeries
    order: int
    support_stride: tuple
    aux_env: dict  # name -> univariate MultiSeries

    def coefficients(self, i: int = 0) -> list:
        """Dense exact coefficient list of component i (0-based)."""
        return self.series[i].univariate_coefficients()

    @property
    def arity(self) -> int:
        return self.system.arity


def _detect_stride(coefs: Sequence[Coef]) -> int:
    support = [n for n, c in enumerate(coefs) if c]
    if len(support) < 2:
        return 1
    stride = 0
    for a, b in zip(support, support[1:]):
        stride = math.gcd(stride, b - a)
    return max(stride, 1)


def solve_coefficients(spec: SystemSpec, order: int, aux_env: dict | None = None) -> StandardSolution:
    """Solve y = G(x, y) for the standard solution through ``order``.

    ``aux_env`` may carry already-solved auxiliary series (name -> univariate
    MultiSeries of order >= ``order``); missing ones are solved recursively.
    The caller is expected to have validated the system; a violated
    G(0, y) = 0 or det(I - J(0,0)) != 0 hypothesis surfaces as SolveError.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    env = sysdef.aux_environment(spec, order, aux_env)
    used: set = set()
    for g in spec.equations:
        sysdef.aux_names_used(g, used)
    for name in sorted(used):
        if name not in env:
            raise SolveError(f"unresolved auxiliary series {name!r}")
        if env[name].order < order:
            raise SolveError(
                f"aux series {name!r} solved only to order {env[name].order} < {order}"
            )

    m = spec.arity
    t: list[list] = [[0] for _ in range(m)]
    aux_lists = {name: env[name].univariate_coefficients() for name in used}
    builder = _Builder(t, aux_lists, order)
    roots = [builder.build(g) for g in spec.equations]
    for cache in builder.topo:
        cache.grow(0)
    for i, root in enumerate(roots):
        if root.c[0]:
            raise SolveError(
                f"G_{i + 1}(0, 0) = {root.c[0]} != 0: no solution through the origin"
            )
    for n in range(1, order + 1):
        new = []
        for i, root in enumerate(roots):
            v = root.top(n)
            if v is None:
                raise SolveError(
                    f"coefficient recursion stalled at order {n} for component {i + 1} "
                    "(order-n coefficient depends on itself; check G(0,y)=0 and det(I-J(0,0)))"
                )
            new.append(v)
        for i in range(m):
            t[i].append(new[i])
        for cache in builder.topo:
            cache.grow(n)

    series = tuple(MultiSeries.from_univariate(t[i], order) for i in range(m))
    strides = tuple(_detect_stride(t[i]) for i in range(m))
    return StandardSolution(
        system=spec, series=series, order=order, support_stride=strides, aux_env=env
    )


# ---------------------------------------------------------------------------
# Truncated evaluation of a solved univariate series
# ---------------------------------------------------------------------------

class SeriesEvaluator:
    """Evaluate a univariate exact series at nonnegative floats, stably.

    Terms are chained by consecutive coefficient ratios so that coefficients
    far beyond float range (they grow like rho^-n) never overflow before the
    x^n damping is applied.  The diagnostic trichotomy runs over the nonzero
    support; all-zero degree blocks from a strided support are skipped.
    """

    def __init__(self, coefs: Sequence[Coef]):
        self.support = [n for n, c in enumerate(coefs) if c]
        self.first = float(coefs[self.support[0]]) if self.support else 0.0
        self.ratios = []
        self.gaps = []
        for a, b in zip(self.support, self.support[1:]):
            ca, cb = coefs[a], coefs[b]
            self.ratios.append(float(Fraction(cb) / Fraction(ca)))
            self.gaps.append(b - a)
        self.constant = float(coefs[0]) if coefs else 0.0

    def __call__(self, x: float) -> ExtendedValue:
        if x < 0:
            raise ValueError("evaluation point must be nonnegative")
        if not self.support:
            return ExtendedValue(0.0, "converged", 0.0)
        if x == 0.0:
            return ExtendedValue(self.constant, "converged", 0.0)
        term = self.first * x ** self.support[0]
        blocks = [term]
        for r, g in zip(self.ratios, self.gaps):
            term *= r * x ** g
            blocks.append(term)
            if not math.isfinite(term):
                return ExtendedValue(math.inf, "diverging", math.inf)
        return summation_diagnostic(blocks)


# ---------------------------------------------------------------------------
# Pointwise (equation-solving) evaluation of auxiliary series
# ---------------------------------------------------------------------------

class AuxEvaluator:
    """Evaluate a solved arity-1 system pointwise from its defining equation.

    For x inside the domain, damped Newton from 0 on y - G(x, y) converges to
    the standard solution (iterates stay below it while I - J_G stays an
    M-matrix); at the domain edge the root is a double root and convergence
    degrades to linear, which the iteration cap absorbs.  Outside the domain
    there is no finite nonnegative solution and None is returned.
    """

    def __init__(self, spec: SystemSpec, numeric: "NumericSystem"):
        if spec.arity != 1:
            raise ValueError("auxiliary systems must have arity 1")
        self.spec = spec
        self.numeric = numeric
        self._cache: dict = {}
        self._last: tuple | None = None
        self._edge: float | None = None

    def __call__(self, x: float) -> Optional[float]:
        if x in self._cache:
            return self._cache[x]
        val = self._solve_guarded(x)
        if len(self._cache) > 100_000:
            self._cache.clear()
        self._cache[x] = val
        return val

    def _solve_guarded(self, x: float) -> Optional[float]:
        warm = self._last
        if warm is not None and abs(x - warm[0]) <= 0.02 * max(abs(warm[0]), 1e-12):
            y = self._solve(x, y0=warm[1])
            if y is not None and self._on_lower_branch(x, y):
                self._last = (x, y)
                return y
        y = self._solve(x)
        if y is not None:
            self._last = (x, y)
        return y

    def _on_lower_branch(self, x: float, y: float) -> bool:
        gy, _ = self.numeric.gy_scalar(x, y)
        return gy is not None and gy <= 1.0 + 1e-6

    def _solve(self, x: float, y0: float = 0.0) -> Optional[float]:
        if x < 0:
            return None
        if x == 0.0:
            return 0.0
        y = y0
        for _ in range(300):
            g, flag = self.numeric.g_scalar(x, y)
            if g is None or flag == "diverging" or not math.isfinite(g):
                return None
            h = y - g
            gy, fy = self.numeric.gy_scalar(x, y)
            if gy is None or not math.isfinite(gy):
                return None
            denom = 1.0 - gy
            if abs(h) < 1e-14 * max(1.0, abs(y)):
                return y
            if denom <= 1e-300:
                # at/beyond the fold: fall back to the monotone map
                y_next = g
                if y_next > 1e12:
                    return None
                if y_next <= y * (1 + 1e-15):
                    return y
                y = y_next
                continue
            step = -h / denom
            y_new = y + step
            if y_new < 0:
                y_new = g  # monotone fallback keeps the iterate in [0, T(x)]
            if y_new > 1e12 or not math.isfinite(y_new):
                return None
            if abs(y_new - y) < 1e-16 * max(1.0, abs(y)):
                return y_new
            y = y_new
        g, flag = self.numeric.g_scalar(x, y)
        if g is not None and flag != "diverging" and abs(y - g) < 1e-7 * max(1.0, abs(y)):
            return y
        return None

    def derivative(self, x: float) -> Optional[float]:
        """A'(x) by implicit differentiation; inf at the domain edge."""
        y = self(x)
        if y is None:
            return None
        gx, fx = self.numeric.gx_scalar(x, y)
        gy, fy = self.numeric.gy_scalar(x, y)
        if gx is None or gy is None:
            return None
        denom = 1.0 - gy
        if denom <= 0:
            return math.inf
        return gx / denom

    def _solves_strictly(self, x: float) -> bool:
        """Pointwise solve succeeds with a tight residual (no stall acceptance)."""
        y = self(x)
        if y is None:
            return False
        g, flag = self.numeric.g_scalar(x, y)
        if g is None or flag == "diverging":
            return False
        return abs(y - g) <= 1e-12 * max(1.0, abs(y))

    def domain_edge(self, hint: float = 1.0) -> float:
        """Largest float abscissa where the pointwise solve converges tightly.

        Bisected once and cached; sits within a few ulps below the fold of
        the defining equation, so solving at the edge itself is safe.
        """
        if self._edge is not None:
            return self._edge
        lo = 0.0
        hi = max(hint, 1e-6)
        grow = 0
        while self._solves_strictly(hi):
            lo, hi = hi, hi * 2
            grow += 1
            if grow > 60:
                self._edge = math.inf
                return self._edge
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if self._solves_strictly(mid):
                lo = mid
            else:
                hi = mid
        self._edge = lo
        return lo


# ---------------------------------------------------------------------------
# Numeric evaluation of expressions and systems
# ---------------------------------------------------------------------------

class NumericSystem:
    """Float evaluation of G, its Jacobian, and the characteristic residual.

    ``refined`` selects pointwise aux evaluation (exact up to float precision
    inside the aux domain, None outside); otherwise aux series are summed as
    truncated polynomials with the convergence trichotomy.  Primitive series
    (polylog and its derivatives) are always truncated sums at ``prim_order``
    terms, carrying their own diagnostics.
    """

    def __init__(
        self,
        spec: SystemSpec,
        sol: StandardSolution | None = None,
        refined: bool = True,
        prim_order: int = 512,
        _aux_numerics: dict | None = None,
    ):
        self.spec = spec
        self.m = spec.arity
        self.refined = refined
        self.prim_order = prim_order
        self.jac_exprs = sysdef.jacobian(spec)
        self.gx_exprs = sysdef.gradient_x(spec)
        self.aux_pointwise: dict[str, AuxEvaluator] = dict(_aux_numerics or {})
        self.aux_truncated: dict[str, SeriesEvaluator] = {}
        self.aux_coefs: dict[str, list] = {}
        self.aux_trunc_deriv: dict[tuple, SeriesEvaluator] = {}
        env = sol.aux_env if sol is not None else None
        self._install_aux(spec, env)

    def _install_aux(self, spec: SystemSpec, env: dict | None):
        for name, sub in spec.aux:
            if name not in self.aux_pointwise:
                sub_numeric = NumericSystem(
                    sub,
                    refined=self.refined,
                    prim_order=self.prim_order,
                    _aux_numerics=self.aux_pointwise,
                )
                self.aux_pointwise[name] = AuxEvaluator(sub, sub_numeric)
        if env:
            for name, ser in env.items():
                if name not in self.aux_coefs:
                    self.aux_coefs[name] = ser.univariate_coefficients()
                    self.aux_truncated[name] = SeriesEvaluator(self.aux_coefs[name])

    # -- scalar helpers for arity-1 systems ---------------------------------

    def g_scalar(self, x: float, y: float):
        v, flag = self._eval(self.spec.equations[0], x, (y,))
        return v, flag

    def gy_scalar(self, x: float, y: float):
        v, flag = self._eval(self.jac_exprs[0][0], x, (y,))
        return v, flag

    def gx_scalar(self, x: float, y: float):
        v, flag = self._eval(self.gx_exprs[0], x, (y,))
        return v, flag

    # -- vector interface ----------------------------------------------------

    def g_values(self, x: float, y: Sequence[float]):
        vals = np.empty(self.m)
        flag = "converged"
        for i, g in enumerate(self.spec.equations):
            v, f = self._eval(g, x, y)
            if v is None:
                return None, "diverging"
            vals[i] = v
            flag = _worst(flag, f)
        return vals, flag

    def jac_values(self, x: float, y: Sequence[float]):
        mat = np.empty((self.m, self.m))
        flag = "converged"
        for i in range(self.m):
            for j in range(self.m):
                v, f = self._eval(self.jac_exprs[i][j], x, y)
                if v is None:
                    return None, "diverging"
                mat[i, j] = v
                flag = _worst(flag, f)
        return mat, flag

    def gx_values(self, x: float, y: Sequence[float]):
        vals = np.empty(self.m)
        flag = "converged"
        for i in range(self.m):
            v, f = self._eval(self.gx_exprs[i], x, y)
            if v is None:
                return None, "diverging"
            vals[i] = v
            flag = _worst(flag, f)
        return vals, flag

    def char_residual(self, x: float, y: Sequence[float]):
        """[G_i(x,y) - y_i]_i ++ [det(I - J_G(x,y))], or (None, 'diverging')."""
        g, f1 = self.g_values(x, y)
        if g is None or not np.all(np.isfinite(g)):
            return None, "diverging"
        jac, f2 = self.jac_values(x, y)
        if jac is None or not np.all(np.isfinite(jac)):
            return None, "diverging"
        res = np.empty(self.m + 1)
        res[: self.m] = g - np.asarray(y, dtype=float)
        res[self.m] = float(np.linalg.det(np.eye(self.m) - jac))
        return res, _worst(f1, f2)

    # -- expression evaluation ----------------------------------------------

    def _eval(self, e: Expr, x: float, y: Sequence[float]):
        if isinstance(e, Const):
            return float(e.value), "converged"
        if isinstance(e, VarX):
            return x, "converged"
        if isinstance(e, VarY):
            return float(y[e.index - 1]), "converged"
        if isinstance(e, Add):
            acc = 0.0
            flag = "converged"
            for t in e.terms:
                v, f = self._eval(t, x, y)
                if v is None:
                    return None, f
                acc += v
                flag = _worst(flag, f)
            return acc, flag
        if isinstance(e, Mul):
            acc = 1.0
            flag = "converged"
            zero = False
            for fct in e.factors:
                v, f = self._eval(fct, x, y)
                if v is None:
                    return None, f
                flag = _worst(flag, f)
                if v == 0.0:
                    zero = True
                elif not zero:
                    acc *= v
            return (0.0 if zero else acc), flag
        if isinstance(e, Pow):
            v, f = self._eval(e.base, x, y)
            if v is None:
                return None, f
            try:
                return v ** e.exponent, f
            except OverflowError:
                return math.inf, "diverging"
        if isinstance(e, Exp):
            v, f = self._eval(e.arg, x, y)
            if v is None:
                return None, f
            if v > 700:
                return math.inf, "diverging"
            return math.exp(v), f
        if isinstance(e, (Polylog, PolylogD)):
            shift = e.shift if isinstance(e, PolylogD) else 0
            v, f = self._eval(e.arg, x, y)
            if v is None:
                return None, f
            val, g = self._eval_prim(e.weight, shift, v)
            return val, _worst(f, g)
        if isinstance(e, AuxSeries):
            return self._eval_aux(e.name, x)
        if isinstance(e, AuxDeriv):
            return self._eval_aux_deriv(e.name, e.order, x)
        raise TypeError(f"cannot evaluate {e!r}")

    def _eval_prim(self, weight: int, shift: int, w: float):
        """Truncated sum of the polylog-family series at w >= 0."""
        if w < 0:
            raise ValueError("primitive series argument must be nonnegative")
        if w == 0.0:
            v0 = float(math.perm(shift, shift)) / shift ** weight if shift >= 1 else 0.0
            return v0, "converged"
        blocks = []
        n0 = max(1, shift)
        term = (math.perm(n0, shift) / n0 ** weight) * w ** (n0 - shift)
        blocks.append(term)
        acc = term
        n = n0
        while n < n0 + self.prim_order:
            n += 1
            # term ratio: falling-factorial part n/(n-shift), weight part ((n-1)/n)^weight
            term *= (n / (n - shift)) * ((n - 1) / n) ** weight * w
            blocks.append(term)
            acc += term
            if not math.isfinite(acc):
                return math.inf, "diverging"
            if term < 1e-18 * acc and n - n0 > 32:
                return acc, "converged"
        diag = summation_diagnostic(blocks)
        return diag.value, diag.flag

    def _eval_aux(self, name: str, x: float):
        if self.refined:
            v = self.aux_pointwise[name](x)
            if v is None:
                return None, "diverging"
            return v, "converged"
        ev = self.aux_truncated.get(name)
        if ev is None:
            raise SolveError(f"no truncated evaluator for aux {name!r} (solution not supplied)")
        res = ev(x)
        return res.value, res.flag

    def _eval_aux_deriv(self, name: str, k: int, x: float):
        if self.refined:
            if k != 1:
                raise NotImplementedError("pointwise aux derivatives beyond first order")
            v = self.aux_pointwise[name].derivative(x)
            if v is None:
                return None, "diverging"
            return v, "converged" if math.isfinite(v) else "diverging"
        key = (name, k)
        if key not in self.aux_trunc_deriv:
            coefs = self.aux_coefs.get(name)
            if coefs is None:
                raise SolveError(
                    f"no truncated evaluator for aux {name!r} (solution not supplied)"
                )
            for _ in range(k):
                coefs = [coefs[j + 1] * (j + 1) for j in range(len(coefs) - 1)]
            self.aux_trunc_deriv[key] = SeriesEvaluator(coefs)
        res = self.aux_trunc_deriv[key](x)
        return res.value, res.flag


def solve_pointwise(numeric: "NumericSystem", x: float, y0=None, max_iter: int = 300):
    """Solve y = G(x, y) at fixed x by Newton from below; None when no solution.

    Starting at 0 (or a supplied nonnegative y0 below the solution), iterates
    increase toward the standard solution while I - J_G stays invertible; at
    the domain edge the root is degenerate and convergence drops to linear.
    """
    m = numeric.m
    y = np.zeros(m) if y0 is None else np.array(y0, dtype=float)
    eye = np.eye(m)
    for _ in range(max_iter):
        g, flag = numeric.g_values(x, y)
        if g is None or flag == "diverging" or not np.all(np.isfinite(g)):
            return None
        h = g - y
        hnorm = float(np.max(np.abs(h)))
        scale = max(1.0, float(np.max(np.abs(y))))
        if hnorm < 1e-14 * scale:
            return y
        jac, jflag = numeric.jac_values(x, y)
        if jac is None or not np.all(np.isfinite(jac)):
            return None
        try:
            step = np.linalg.solve(eye - jac, h)
        except np.linalg.LinAlgError:
            step = None
        if step is None or not np.all(np.isfinite(step)):
            # fold reached: fall back to the monotone map y <- G(x, y)
            if np.max(g) > 1e12:
                return None
            if np.all(g <= y * (1 + 1e-15)):
                return y
            y = g
            continue
        y_new = y + step
        if np.any(y_new < 0):
            y_new = g
        if np.max(y_new) > 1e12 or not np.all(np.isfinite(y_new)):
            return None
        if np.max(np.abs(y_new - y)) < 1e-16 * scale:
            return y_new
        y = y_new
    g, flag = numeric.g_values(x, y)
    if g is not None and flag != "diverging" and np.max(np.abs(g - y)) < 1e-7 * max(1.0, float(np.max(np.abs(y)))):
        return y
    return None


# ---------------------------------------------------------------------------
# PointEval and the Jacobian Perron root along the solution
# ---------------------------------------------------------------------------

@dataclass
class PointEval:
    """System data at a single abscissa: T(x), J_G(x,T(x)), G_x(x,T(x))."""

    x: float
    T_values: tuple  # ExtendedValue per component
    J_values: object  # m x m float array (entries inf when diverged)
    Gx_values: object
    flag: str


def eval_point(sol: StandardSolution, x: float, refined: bool = False) -> PointEval:
    """Evaluate the truncated solution and the system Jacobian at x >= 0."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    evals = [SeriesEvaluator(sol.coefficients(i)) for i in range(sol.arity)]
    t_vals = tuple(ev(x) for ev in evals)
    flag = "converged"
    for tv in t_vals:
        flag = _worst(flag, tv.flag)
    numeric = NumericSystem(sol.system, sol, refined=refined, prim_order=max(sol.order, 64))
    yvec = [tv.value for tv in t_vals]
    jac, f2 = numeric.jac_values(x, yvec)
    gx, f3 = numeric.gx_values(x, yvec)
    if jac is None:
        jac = np.full((sol.arity, sol.arity), math.inf)
        f2 = "diverging"
    if gx is None:
        gx = np.full(sol.arity, math.inf)
        f3 = "diverging"
    return PointEval(
        x=x,
        T_values=t_vals,
        J_values=jac,
        Gx_values=gx,
        flag=_worst(flag, f2, f3),
    )


def lambda_along_solution(sol: StandardSolution, x: float) -> float:
    """Perron root of J_G(x, T(x)); lies in (0, 1) strictly inside the radius."""
    from charpoint.perron import lambda_max

    pe = eval_point(sol, x)
    if pe.flag == "diverging" or not np.all(np.isfinite(pe.J_values)):
        raise SolveError(f"Jacobian evaluation diverged at x={x}")
    return lambda_max(np.asarray(pe.J_values)).lam
