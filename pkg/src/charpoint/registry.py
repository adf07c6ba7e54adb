"""Built-in example systems with independently known expected values.

Each entry carries the system text, per-entry solver defaults, and the
expected characteristic points / extreme point.  Expected coordinates come
from closed forms (quadratic-formula radicals, the explicit parameterized
family below) or, for the two-equation cubic system, from printed 7-digit
reference values; ``tol`` on each expectation reflects that precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class ExpectedPoint:
    coords: tuple  # (a, b1..bm)
    tol: float
    eigenpoint: bool
    note: str = ""


@dataclass(frozen=True)
class RegistryEntry:
    key: str
    title: str
    text: str
    solve_order: int = 512
    asympt_order: int = 2000
    n_starts: int = 64
    char_points: tuple = ()  # ExpectedPoint, sorted by a descending
    count_known: bool = True  # the listed points are believed exhaustive
    extreme: tuple | None = None  # (rho, tau-tuple)
    extreme_tol: float = 1e-6
    method: str | None = None  # expected classify method
    rho_ratio_tol: float = 5e-3  # |rho_hat/rho - 1| bound for the radius estimate
    exponent: float | None = None  # expected alpha-hat for component 1
    exponent_tol: float = 0.05
    notes: str = ""


def _quad_extreme(a, b):
    """Extreme point of y = x(1 + a*y + b*y^2): (1/(a+2*sqrt(b)), 1/sqrt(b))."""
    return 1.0 / (a + 2.0 * math.sqrt(b)), 1.0 / math.sqrt(b)


def symmetric_pair_system_text(a, b, c1, c2, d) -> str:
    """Two coupled quadratic equations driven by the solution A of a quadratic.

    Built under the critical-composition constraint sqrt(b) = c1 + c2 +
    2*sqrt(d); the symmetric characteristic points have the closed form in
    :func:`symmetric_pair_char_point`.
    """
    def coef(q, term):
        q = Fraction(q)
        if q == 1:
            return term
        s = str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
        return f"{s}*{term}"

    a, b, c1, c2, d = (Fraction(v) for v in (a, b, c1, c2, d))
    lines = []
    a_terms = "1" + (f" + {coef(a, 'y')}" if a else "") + f" + {coef(b, 'y^2')}"
    lines.append(f"let A = solve {{ y = x*({a_terms}); }};")
    if c1:
        c = c1 + c2
        t_terms = "1" + (f" + {coef(c, 'y')}" if c else "") + f" + {coef(d, 'y^2')}"
        lines.append(f"let T = solve {{ y = A*({t_terms}); }};")
        t1 = f" + {coef(c1, 'T')}"
    else:
        t1 = ""
    for i, j in ((1, 2), (2, 1)):
        lines.append(f"y{i} = A*(1{t1} + {coef(c2, f'y{j}')} + {coef(d, f'y{i}^2')});")
    return "\n".join(lines) + "\n"


def symmetric_pair_char_point(a, b, c1, c2, d):
    """Closed form for the symmetric characteristic point (x, y, y).

    Valid for 0 < c1 <= 2*c2 (the unique point) and c1 = 0 (the interior one
    of the two); uses the discriminant combination f = -6*c1*c2 + 3*c2^2 + 4*d.
    """
    a, b, c1, c2, d = (float(v) for v in (a, b, c1, c2, d))
    c = c1 + c2
    f = -6.0 * c1 * c2 + 3.0 * c2 ** 2 + 4.0 * d
    root = math.sqrt(c * c + f)
    x = (c + root) / (a * c + 2 * c * c + f + b + (a + 2 * c) * root)
    y = (c + c2 + root) / (2.0 * d)
    return x, y


def _entries() -> list:
    out = []

    out.append(RegistryEntry(
        key="ex-3.1",
        title="1-equation quadratic, interior extreme point",
        text="y = x*(1 + y^2);\n",
        char_points=(
            ExpectedPoint((0.5, 1.0), 1e-9, True, "closed form (1/2, 1)"),
        ),
        extreme=(0.5, (1.0,)),
        extreme_tol=1e-9,
        method="eigenpoint",
        exponent=1.5,
        notes="odd-index Catalan coefficients; support stride 2",
    ))

    out.append(RegistryEntry(
        key="ex-3.1-mod",
        title="1-equation quadratic restated over its own solution (boundary extreme point)",
        text="let S = solve { y = x*(1 + y^2); };\ny = 1/2*S*(1 + y^2);\n",
        asympt_order=1024,
        char_points=(
            ExpectedPoint((0.5, 1.0), 1e-6, True, "same point, now on the domain boundary"),
        ),
        extreme=(0.5, (1.0,)),
        extreme_tol=1e-6,
        method="eigenpoint",
        exponent=1.25,
        notes="solution S(S(x)/2) has a fourth-root singularity",
    ))

    rho32, tau32 = _quad_extreme(2.0, 2.0)
    out.append(RegistryEntry(
        key="ex-3.2",
        title="1-equation quadratic with linear term",
        text="y = x*(1 + 2*y + 2*y^2);\n",
        char_points=(
            ExpectedPoint((rho32, tau32), 1e-9, True, "((sqrt(2)-1)/2, sqrt(2)/2)"),
        ),
        extreme=(rho32, (tau32,)),
        extreme_tol=1e-9,
        method="eigenpoint",
        exponent=1.5,
    ))

    out.append(RegistryEntry(
        key="ex-3.2-mod",
        title="same solution fed back as a known series: characteristic point disappears",
        text=(
            "let S = solve { y = x*(1 + 2*y + 2*y^2); };\n"
            "y = x*(1 + S + y + 2*y^2);\n"
        ),
        char_points=(),
        extreme=(rho32, (tau32,)),
        extreme_tol=5e-4,
        method="boundary-estimated",
        notes="standard solution is S itself; no positive characteristic point exists",
    ))

    out.append(RegistryEntry(
        key="meir-moon",
        title="transcendental 1-equation system without characteristic points",
        text="y = 1/6*polylog(2, x)*exp(y);\n",
        solve_order=384,
        asympt_order=384,
        char_points=(),
        extreme=(1.0, (0.41529,)),
        extreme_tol=5e-4,
        method="boundary-estimated",
        rho_ratio_tol=1e-2,
        notes="tau solves tau = (pi^2/36) e^tau at the boundary x = 1",
    ))

    x36, y36 = symmetric_pair_char_point(0, 9, 0, 1, 1)
    out.append(RegistryEntry(
        key="ex-3.6",
        title="coupled symmetric pair, c1 = 0: boundary eigenpoint plus interior point",
        text=symmetric_pair_system_text(0, 9, 0, 1, 1),
        solve_order=1024,
        char_points=(
            ExpectedPoint((1.0 / 6.0, 1.0, 1.0), 2e-6, True,
                          "boundary point = extreme point"),
            ExpectedPoint((x36, y36, y36), 1e-6, False,
                          "interior, Lambda = 1 + 2/(1+2*sqrt(2))"),
        ),
        extreme=(1.0 / 6.0, (1.0, 1.0)),
        extreme_tol=2e-6,
        method="eigenpoint",
        exponent=1.25,
    ))

    x37, y37 = symmetric_pair_char_point(0, 16, 1, 1, 1)
    out.append(RegistryEntry(
        key="ex-3.7",
        title="coupled symmetric pair, 0 < c1 < 2 c2: extreme point is not characteristic",
        text=symmetric_pair_system_text(0, 16, 1, 1, 1),
        char_points=(
            ExpectedPoint((x37, y37, y37), 1e-6, False,
                          "unique interior point, Lambda = 2*sqrt(5)-3 > 1"),
        ),
        extreme=(0.125, (1.0, 1.0)),
        extreme_tol=1e-3,
        method="boundary-estimated",
        rho_ratio_tol=1e-2,
        notes="Lambda at (1/8, 1, 1) is exactly 3/4",
    ))

    x41a, y41a = (2 * SQRT2 - 1) / 7, 1 / SQRT2
    x41b, y41b = (2 * SQRT3 - 1) / 11, (1 + SQRT3) / 2
    out.append(RegistryEntry(
        key="ex-4.1",
        title="coupled symmetric pair with two interior characteristic points",
        text="y1 = x*(1 + y2 + 2*y1^2);\ny2 = x*(1 + y1 + 2*y2^2);\n",
        char_points=(
            ExpectedPoint((x41a, y41a, y41a), 1e-6, True, "((2*sqrt(2)-1)/7, 1/sqrt(2), 1/sqrt(2))"),
            ExpectedPoint((x41b, y41b, y41b), 1e-6, False,
                          "((2*sqrt(3)-1)/11, (1+sqrt(3))/2, (1+sqrt(3))/2)"),
        ),
        extreme=(x41a, (y41a, y41a)),
        extreme_tol=1e-6,
        method="eigenpoint",
        exponent=1.5,
    ))

    out.append(RegistryEntry(
        key="ex-5.4",
        title="two-equation cubic system with four characteristic points",
        text=(
            "y1 = x*(1 + 2*y1^3 + 2*x^3*y1^3*y2);\n"
            "y2 = x*(1 + x^3*y2 + 2*y1^3*y2^2);\n"
        ),
        char_points=(
            ExpectedPoint((0.4153198, 0.6217456, 0.4743552), 1e-5, True, "7-digit reference"),
            ExpectedPoint((0.3867644, 0.6661246, 3.834789), 1e-5, False, "7-digit reference"),
            ExpectedPoint((0.2640956, 1.210710, 0.5353688), 1e-5, False, "7-digit reference"),
            ExpectedPoint((0.1818598, 1.556545, 0.3647603), 1e-5, False, "7-digit reference"),
        ),
        extreme=(0.4153198, (0.6217456, 0.4743552)),
        extreme_tol=1e-5,
        method="eigenpoint",
        exponent=1.5,
    ))

    out.append(RegistryEntry(
        key="sec-4.1",
        title="4-equation periodic system whose iterated Jacobians keep structural zeros",
        text=(
            "y1 = x*(1 + y2^2 + y4^2);\n"
            "y2 = x*(1 + y1^2 + y3^2);\n"
            "y3 = x*(1 + y4^2);\n"
            "y4 = x*(1 + y1^2);\n"
        ),
        n_starts=128,
        char_points=(),
        count_known=False,
        method="eigenpoint",
        exponent=1.5,
        notes="saturation target; the extreme point is an interior characteristic point",
    ))

    return out


ENTRIES = {e.key: e for e in _entries()}


def get(key: str) -> RegistryEntry:
    if key not in ENTRIES:
        known = ", ".join(sorted(ENTRIES))
        raise KeyError(f"unknown registry key {key!r}; known keys: {known}")
    return ENTRIES[key]


def keys() -> list:
    return list(ENTRIES)
