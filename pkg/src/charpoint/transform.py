"""Self-substitution transforms: replacing y_j occurrences by alpha*G_j + (1-alpha)*y_j.

A minimal substitution rewrites a single occurrence of y_j inside G_i and
leaves every other equation untouched.  These transforms preserve the
positive solutions, the characteristic points, and whether the Perron root
equals 1 there; chaining them can saturate the Jacobian so that no entry is
identically zero, which periodic systems need before the uniform-iteration
tricks of the aperiodic literature apply.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from charpoint import sysdef
from charpoint.series import _q
from charpoint.solve import NumericSystem
from charpoint.sysdef import (
    Add,
    Const,
    Exp,
    Expr,
    Mul,
    Polylog,
    Pow,
    SystemSpec,
    VarY,
    add_expr,
    mul_expr,
    pow_expr,
)


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class SubstitutionStep:
    """Replace the occurrence-th y_j (left-to-right, powers unrolled) in G_i."""

    i: int
    j: int
    occurrence: int = 1
    alpha: object = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "alpha", _q(Fraction(self.alpha)))
        if not 0 <= self.alpha <= 1:
            raise TransformError("alpha must lie in [0, 1]")
        if self.occurrence < 1:
            raise TransformError("occurrence is 1-based")


def count_occurrences(e: Expr, j: int) -> int:
    """Occurrences of y_j with Pow(base, k) counting as k copies of its base."""
    if isinstance(e, VarY):
        return 1 if e.index == j else 0
    if isinstance(e, Add):
        return sum(count_occurrences(t, j) for t in e.terms)
    if isinstance(e, Mul):
        return sum(count_occurrences(f, j) for f in e.factors)
    if isinstance(e, Pow):
        return e.exponent * count_occurrences(e.base, j)
    if isinstance(e, (Exp, Polylog)):
        return count_occurrences(e.arg, j)
    return 0


def _rewrite(e: Expr, j: int, target: int, counter: list, replacement: Expr) -> Expr:
    """Replace the target-th occurrence of y_j; counter[0] tracks progress."""
    if counter[0] >= target:
        return e
    if isinstance(e, VarY):
        if e.index == j:
            counter[0] += 1
            if counter[0] == target:
                return replacement
        return e
    if isinstance(e, Add):
        return add_expr([_rewrite(t, j, target, counter, replacement) for t in e.terms])
    if isinstance(e, Mul):
        return mul_expr([_rewrite(f, j, target, counter, replacement) for f in e.factors])
    if isinstance(e, Pow):
        per = count_occurrences(e.base, j)
        if per == 0:
            return e
        total = e.exponent * per
        if counter[0] + total < target:
            counter[0] += total
            return e
        copy = (target - counter[0] - 1) // per  # 0-based copy holding the target
        counter[0] += copy * per
        replaced = _rewrite(e.base, j, target, counter, replacement)
        rest = e.exponent - 1
        counter[0] += (e.exponent - copy - 1) * per
        return mul_expr([pow_expr(e.base, rest), replaced] if rest else [replaced])
    if isinstance(e, Exp):
        return Exp(_rewrite(e.arg, j, target, counter, replacement))
    if isinstance(e, Polylog):
        return Polylog(e.weight, _rewrite(e.arg, j, target, counter, replacement))
    return e


def minimal_substitute(spec: SystemSpec, step: SubstitutionStep) -> SystemSpec:
    """Apply one substitution y_j <- alpha*G_j + (1-alpha)*y_j inside G_i.

    With alpha = 0 the smart constructors fold the replacement back to y_j,
    so the output equals the input equation for equation i as well.
    """
    if not 1 <= step.i <= spec.arity or not 1 <= step.j <= spec.arity:
        raise TransformError(f"indices out of range for arity {spec.arity}")
    g_i = spec.equations[step.i - 1]
    g_j = spec.equations[step.j - 1]
    avail = count_occurrences(g_i, step.j)
    if avail == 0:
        raise TransformError(f"G_{step.i} does not depend on y{step.j} syntactically")
    if step.occurrence > avail:
        raise TransformError(
            f"occurrence {step.occurrence} out of range: G_{step.i} has {avail} "
            f"occurrences of y{step.j}"
        )
    alpha = step.alpha
    replacement = add_expr(
        [mul_expr([Const(alpha), g_j]), mul_expr([Const(1 - alpha), VarY(step.j)])]
    )
    counter = [0]
    new_rhs = _rewrite(g_i, step.j, step.occurrence, counter, replacement)
    return spec.with_equation(step.i, new_rhs)


# ---------------------------------------------------------------------------
# Jacobian saturation
# ---------------------------------------------------------------------------

def _structural_profile(spec: SystemSpec, probe_order: int, env: dict):
    """(zero-entries, dependency-edge set) of the Jacobian up to probe_order."""
    m = spec.arity
    jac = sysdef.jacobian(spec)
    zeros = set()
    edges = set()
    for i in range(m):
        for j in range(m):
            ser = sysdef.expand(jac[i][j], m + 1, probe_order, env)
            if ser.is_zero():
                zeros.add((i + 1, j + 1))
            else:
                edges.add((i + 1, j + 1))
    return zeros, edges


def _path_to(edges: set, sources: set, goal: int, m: int):
    """Shortest digraph path from any source to goal along dependency edges."""
    from collections import deque

    prev: dict[int, int | None] = {s: None for s in sources}
    queue = deque(sources)
    while queue:
        u = queue.popleft()
        if u == goal:
            path = [u]
            while prev[u] is not None:
                u = prev[u]
                path.append(u)
            return list(reversed(path))
        for v in range(1, m + 1):
            if (u, v) in edges and v not in prev:
                prev[v] = u
                queue.append(v)
    return None


def saturate_jacobian(
    spec: SystemSpec,
    probe_order: int = 24,
    alpha=Fraction(1, 2),
    max_steps: int = 100,
):
    """Substitute until no Jacobian entry is identically zero up to probe_order.

    Every step uses alpha in (0, 1), which keeps each intermediate system
    irreducible and hence well-conditioned.  Returns (transformed, steps).
    Raises with the surviving zero entries when the step cap is hit.
    """
    alpha = _q(Fraction(alpha))
    if not 0 < alpha < 1:
        raise TransformError("saturation requires alpha strictly inside (0, 1)")
    env = sysdef.aux_environment(spec, probe_order)
    current = spec
    steps: list[SubstitutionStep] = []
    for _ in range(max_steps):
        zeros, edges = _structural_profile(current, probe_order, env)
        if not zeros:
            return current, steps
        i, j = sorted(zeros)[0]
        sources = {v for (u, v) in edges if u == i}
        path = _path_to(edges, sources, j, spec.arity)
        if path is None:
            raise TransformError(
                f"no dependency path makes G_{i} depend on y{j}; system not irreducible?"
            )
        # substitute along the path until y_j occurs in G_i (for nonnegative
        # systems, syntactic occurrence and a nonzero partial coincide)
        for v in path:
            g_i = current.equations[i - 1]
            if count_occurrences(g_i, j) > 0:
                break
            if count_occurrences(g_i, v) == 0:
                raise TransformError(f"dependency path broke at y{v} while fixing ({i},{j})")
            step = SubstitutionStep(i=i, j=v, occurrence=1, alpha=alpha)
            current = minimal_substitute(current, step)
            steps.append(step)
    zeros, _ = _structural_profile(current, probe_order, env)
    if zeros:
        raise TransformError(
            f"saturation cap {max_steps} reached; still-zero entries: {sorted(zeros)}"
        )
    return current, steps


# ---------------------------------------------------------------------------
# Invariance verification
# ---------------------------------------------------------------------------

@dataclass
class InvarianceEntry:
    point: tuple
    residual_transformed: float
    lambda_original: float
    lambda_transformed: float
    eigen_flags_agree: bool
    residual_ok: bool


@dataclass
class InvarianceReport:
    entries: list

    @property
    def ok(self) -> bool:
        return all(e.residual_ok and e.eigen_flags_agree for e in self.entries)

    def __str__(self) -> str:
        lines = []
        for e in self.entries:
            status = "ok" if (e.residual_ok and e.eigen_flags_agree) else "MISMATCH"
            lines.append(
                f"  point a={e.point[0]:.6f}: residual {e.residual_transformed:.2e}, "
                f"Lambda {e.lambda_original:.6f} -> {e.lambda_transformed:.6f} [{status}]"
            )
        return "invariance report:\n" + "\n".join(lines)


def verify_invariance(
    spec: SystemSpec,
    transformed: SystemSpec,
    test_points,
    residual_tol: float = 1e-6,
    eigentol: float = 1e-6,
) -> InvarianceReport:
    """Check carried-over characteristic points and Lambda = 1 flags.

    ``test_points`` are CharPoints of ``spec`` (or (a, b...) coordinate
    tuples); at each, the transformed characteristic system must vanish to
    ``residual_tol`` and the eigenpoint verdicts must agree.
    """
    from charpoint import perron

    num_orig = NumericSystem(spec, refined=True)
    num_trans = NumericSystem(transformed, refined=True)
    entries = []
    for p in test_points:
        coords = p.coords() if hasattr(p, "coords") else np.asarray(p, dtype=float)
        x, y = float(coords[0]), coords[1:]
        res_t, _ = num_trans.char_residual(x, y)
        resid = float(np.max(np.abs(res_t))) if res_t is not None else float("inf")
        jac_o, _ = num_orig.jac_values(x, y)
        jac_t, _ = num_trans.jac_values(x, y)
        lam_o = perron.lambda_max(jac_o).lam if jac_o is not None else float("nan")
        lam_t = perron.lambda_max(jac_t).lam if jac_t is not None else float("nan")
        entries.append(
            InvarianceEntry(
                point=tuple(float(v) for v in coords),
                residual_transformed=resid,
                lambda_original=lam_o,
                lambda_transformed=lam_t,
                eigen_flags_agree=(abs(lam_o - 1) <= eigentol) == (abs(lam_t - 1) <= eigentol),
                residual_ok=resid <= residual_tol,
            )
        )
    return InvarianceReport(entries)
