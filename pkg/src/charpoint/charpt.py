"""Characteristic points, eigenpoint classification, extreme-point location.

The characteristic system of y = G(x, y) is the m system equations together
with det(I - J_G(x, y)) = 0; its positive solutions are found by damped
multistart Newton over a scrambled low-discrepancy grid.  Each converged
point is annotated with the Perron root of the Jacobian: a point with
Lambda = 1 is the eigenpoint, and when one exists it is the extreme point
(rho, tau) of the standard solution.  With no eigenpoint, rho is estimated
from coefficient asymptotics and tau by solving the system pointwise at the
boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from charpoint import asympt, perron, solve as solve_mod, sysdef
from charpoint.solve import NumericSystem, SeriesEvaluator, StandardSolution, solve_pointwise
from charpoint.sysdef import SystemSpec

DEFAULT_EIGENTOL = 1e-6
DEDUP_TOL = 1e-7
RESIDUAL_TOL = 1e-7
LAMBDA_FLOOR = 1e-6  # returned points must have Lambda >= 1 - this


class CharPointError(RuntimeError):
    pass


class MultipleEigenpointsError(CharPointError):
    """More than one numeric eigenpoint: the tolerance setup or the system is broken."""


class EvaluationDiverged(CharPointError):
    """A series entering the characteristic system diverges at the requested point."""


@dataclass
class CharPoint:
    """A positive solution of the characteristic system."""

    a: float
    b: tuple
    residual: float
    lam: float
    location: str = "unknown"  # interior | boundary | unknown
    is_eigenpoint: bool = False

    def coords(self) -> np.ndarray:
        return np.array([self.a, *self.b])

    def __str__(self) -> str:
        bs = ", ".join(f"{v:.7f}" for v in self.b)
        mark = "  <- eigenpoint" if self.is_eigenpoint else ""
        return (
            f"(a, b) = ({self.a:.7f}, {bs})  residual={self.residual:.2e}  "
            f"Lambda={self.lam:.9f}  [{self.location}]{mark}"
        )


@dataclass
class ExtremeReport:
    """The located extreme point (rho, tau) and how it was obtained."""

    rho: float
    tau: tuple
    method: str  # "eigenpoint" | "boundary-estimated"
    lambda_at_extreme: float
    cross_check: dict = field(default_factory=dict)

    def __str__(self) -> str:
        taus = ", ".join(f"{v:.6f}" for v in self.tau)
        gap = self.cross_check.get("rel_gap")
        extra = f", radius-estimate gap {gap:.2e}" if gap is not None else ""
        return (
            f"(rho, tau) = ({self.rho:.7f}, ({taus})) via {self.method}; "
            f"Lambda = {self.lambda_at_extreme:.6f}{extra}"
        )


# ---------------------------------------------------------------------------
# Residual evaluation
# ---------------------------------------------------------------------------

def characteristic_residual(
    spec: SystemSpec,
    point,
    numeric: NumericSystem | None = None,
    prim_order: int = 512,
) -> np.ndarray:
    """Residual vector [G_i(x,y) - y_i]_i ++ [det(I - J_G)] at a positive point.

    Auxiliary series are evaluated pointwise from their defining equations;
    divergence of any entry raises EvaluationDiverged.
    """
    point = np.asarray(point, dtype=float)
    if point.shape != (spec.arity + 1,):
        raise CharPointError(f"point must have {spec.arity + 1} coordinates")
    if np.any(point <= 0):
        raise CharPointError("point must be positive")
    if numeric is None:
        numeric = NumericSystem(spec, refined=True, prim_order=prim_order)
    res, flag = numeric.char_residual(point[0], point[1:])
    if res is None or flag == "diverging":
        raise EvaluationDiverged(
            f"characteristic system not evaluable at {tuple(point)} (flag={flag})"
        )
    return res


# ---------------------------------------------------------------------------
# Multistart damped Newton
# ---------------------------------------------------------------------------

def _fd_jacobian(F, z, x_hi):
    """Central finite-difference Jacobian, one-sided at domain edges."""
    d = len(z)
    J = np.empty((d, d))
    for k in range(d):
        h = max(1e-6, 1e-6 * abs(z[k]))
        zp, zm = z.copy(), z.copy()
        zp[k] += h
        zm[k] -= h
        if k == 0 and zp[0] > x_hi:
            zp[0] = x_hi
        if zm[k] <= 0:
            zm[k] = z[k]
        fp = F(zp) if zp[k] != z[k] else None
        fm = F(zm) if zm[k] != z[k] else None
        if fp is not None and fm is not None:
            J[:, k] = (fp - fm) / (zp[k] - zm[k])
        elif fp is not None:
            f0 = F(z)
            if f0 is None:
                return None
            J[:, k] = (fp - f0) / (zp[k] - z[k])
        elif fm is not None:
            f0 = F(z)
            if f0 is None:
                return None
            J[:, k] = (f0 - fm) / (z[k] - zm[k])
        else:
            return None
    return J


def _damped_newton(F, z0, x_hi, tol=1e-11, max_iter=80):
    """Damped Newton with positivity and x-domain clamping; returns best iterate."""
    z = np.asarray(z0, dtype=float)
    f = F(z)
    if f is None:
        return None
    fnorm = float(np.max(np.abs(f)))
    for _ in range(max_iter):
        if fnorm < tol:
            break
        J = _fd_jacobian(F, z, x_hi)
        if J is None:
            return None
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        lam = 1.0
        moved = False
        for _ in range(45):
            znew = z + lam * step
            znew[0] = min(znew[0], x_hi)
            if np.all(znew > 0):
                fnew = F(znew)
                if fnew is not None:
                    fnew_norm = float(np.max(np.abs(fnew)))
                    if fnew_norm < fnorm:
                        z, f, fnorm = znew, fnew, fnew_norm
                        moved = True
                        break
            lam *= 0.5
        if not moved:
            break
    return z, fnorm


def _perm_orbits(perm) -> list:
    m = len(perm)
    seen: set = set()
    orbits = []
    for i in range(1, m + 1):
        if i in seen:
            continue
        orb = [i]
        seen.add(i)
        j = perm[i - 1]
        while j != i:
            orb.append(j)
            seen.add(j)
            j = perm[j - 1]
        orbits.append(orb)
    return orbits


def _fd_jac_cols(F, z, cols):
    J = np.empty((len(z), len(cols)))
    for c, vec in enumerate(cols):
        h = 1e-7 * max(1.0, float(np.max(np.abs(z))))
        fp, fm = F(z + h * vec), F(z - h * vec)
        if fp is None or fm is None:
            return None
        J[:, c] = (fp - fm) / (2 * h)
    return J


def _symmetric_polish(F, z, perm):
    """Gauss-Newton restricted to the fixed subspace of an automorphism.

    Roots on the degenerate determinant branch of a permutation-symmetric
    system are flat to fourth order along the antisymmetric directions, so
    float Newton leaves a ~1e-5 pseudo-root valley; inside the fixed subspace
    the same root is regular and converges to machine precision.
    """
    m = len(z) - 1
    orbits = _perm_orbits(perm)
    basis = [np.eye(m + 1)[0]]
    for orb in orbits:
        v = np.zeros(m + 1)
        for i in orb:
            v[i] = 1.0
        basis.append(v / math.sqrt(len(orb)))
    zs = z.copy()
    for orb in orbits:
        mean = float(np.mean([z[i] for i in orb]))
        for i in orb:
            zs[i] = mean
    f = F(zs)
    if f is None:
        return None
    best = (float(np.max(np.abs(f))), zs.copy())
    for _ in range(30):
        J = _fd_jac_cols(F, zs, basis)
        if J is None:
            break
        step, *_ = np.linalg.lstsq(J, -f, rcond=None)
        znew = zs + sum(s * b for s, b in zip(step, basis))
        if np.any(znew <= 0):
            break
        fnew = F(znew)
        if fnew is None:
            break
        zs, f = znew, fnew
        r = float(np.max(np.abs(f)))
        if r < best[0]:
            best = (r, zs.copy())
        if float(np.max(np.abs(step))) < 1e-15 * max(1.0, float(np.max(np.abs(zs)))):
            break
    return best


def _polish_root(F, z, rnorm, x_hi, autos, residual_tol):
    """Tighten an accepted root: plain Newton, then symmetry reduction if degenerate."""
    z = np.asarray(z, dtype=float)
    for _ in range(8):
        f = F(z)
        if f is None:
            break
        J = _fd_jacobian(F, z, x_hi)
        if J is None:
            break
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -f, rcond=None)
        znew = z + step
        znew[0] = min(znew[0], x_hi)
        if np.any(znew <= 0):
            break
        fnew = F(znew)
        if fnew is None or float(np.max(np.abs(fnew))) >= rnorm:
            break
        z, rnorm = znew, float(np.max(np.abs(fnew)))
        if float(np.max(np.abs(step))) < 1e-14:
            break
    J = _fd_jacobian(F, z, x_hi)
    degenerate = False
    if J is not None:
        sigma = np.linalg.svd(J, compute_uv=False)
        degenerate = sigma[-1] < 1e-6 * max(sigma[0], 1e-12)
    if degenerate:
        for perm in autos:
            pz = z.copy()
            for i, img in enumerate(perm, start=1):
                pz[img] = z[i]
            if float(np.max(np.abs(pz - z))) > 1e-3:
                continue
            out = _symmetric_polish(F, z, perm)
            if out is not None and out[0] <= max(residual_tol, rnorm):
                return out[1], out[0], True
    return z, rnorm, degenerate


def _pinned_boundary_polish(numeric, x_pin, y_start=None, tol=1e-6):
    """Solve the m system equations in y at fixed x, then check the det residual.

    At a boundary characteristic point the full Newton Jacobian degenerates
    (the aux derivative blows up); pinning x at the aux domain edge and
    solving y = G(x, y) alone converges even through the double root.  The
    determinant residual then decides whether the edge point is
    characteristic at all (for fold-free extreme points it stays O(1)).
    """
    y = None
    if y_start is not None:
        y = solve_pointwise(numeric, x_pin, y0=np.asarray(y_start, dtype=float))
    if y is None:
        y = solve_pointwise(numeric, x_pin)
    if y is None:
        return None
    res, flag = numeric.char_residual(x_pin, y)
    if res is None or flag == "diverging":
        return None
    rnorm = float(np.max(np.abs(res)))
    if rnorm <= tol:
        return np.array([x_pin, *y]), rnorm
    return None


def default_search_box(
    spec: SystemSpec,
    sol: StandardSolution | None = None,
    order: int = 512,
) -> list:
    """Box (0, x_max] x prod (0, y_max_i]: x_max = 1.2 rho-hat, y_max = 10 tau-hat."""
    if sol is None:
        sol = solve_mod.solve_coefficients(spec, order)
    rho_hat = asympt.estimate_radius(sol, 0)
    numeric = NumericSystem(spec, sol, refined=True, prim_order=sol.order)
    tau_hat = None
    for frac in (0.99, 0.95, 0.9):
        tau_hat = solve_pointwise(numeric, frac * rho_hat)
        if tau_hat is not None:
            break
    if tau_hat is None:
        evals = [SeriesEvaluator(sol.coefficients(i)) for i in range(spec.arity)]
        tau_hat = np.array([ev(0.9 * rho_hat).value for ev in evals])
    tau_hat = np.maximum(np.asarray(tau_hat, dtype=float), 1e-3)
    return [1.2 * rho_hat] + [10.0 * t for t in tau_hat]


def find_char_points(
    spec: SystemSpec,
    search_box=None,
    n_starts: int = 64,
    seed: int = 0,
    sol: StandardSolution | None = None,
    order: int = 512,
    eigentol: float = DEFAULT_EIGENTOL,
    residual_tol: float = RESIDUAL_TOL,
) -> list:
    """All characteristic points found in the box, deduplicated, largest a first.

    An empty list is a legitimate outcome (systems without characteristic
    points); completeness inside the box is not certified.  Points whose
    series evaluations diverge, or whose Perron root falls visibly below 1,
    are rejected as numerical artifacts.
    """
    m = spec.arity
    if search_box is None:
        search_box = default_search_box(spec, sol=sol, order=order)
    hi = np.asarray(search_box, dtype=float)
    if hi.shape != (m + 1,) or np.any(hi <= 0):
        raise CharPointError(f"search box needs {m + 1} positive upper bounds")

    numeric = NumericSystem(spec, sol, refined=True, prim_order=order)
    x_hi = min((ev.domain_edge(hi[0]) for ev in numeric.aux_pointwise.values()), default=math.inf)
    autos = sysdef.automorphisms(spec)

    def F(z):
        res, flag = numeric.char_residual(z[0], z[1:])
        if res is None or flag == "diverging" or not np.all(np.isfinite(res)):
            return None
        return res

    sampler = qmc.Sobol(d=m + 1, scramble=True, seed=seed)
    starts = sampler.random(n_starts) * hi * (1 - 1e-6) + 1e-7

    raw: list[tuple[np.ndarray, float, bool]] = []
    for z0 in starts:
        z0 = np.minimum(z0, [x_hi] + [math.inf] * m)
        out = _damped_newton(F, z0, x_hi)
        if out is None:
            continue
        z, rnorm = out
        degenerate = False
        if rnorm > residual_tol and math.isfinite(x_hi) and abs(z[0] - x_hi) < 1e-5 * max(x_hi, 1e-9):
            polished = _pinned_boundary_polish(numeric, x_hi, z[1:])
            if polished is not None:
                z, rnorm = polished
        elif rnorm <= residual_tol:
            z, rnorm, degenerate = _polish_root(F, z, rnorm, x_hi, autos, residual_tol)
        if rnorm <= residual_tol and np.all(z > 0):
            raw.append((z, rnorm, degenerate))

    # a boundary characteristic point sits exactly at the aux domain edge;
    # probe it directly rather than hoping a Newton run stalls there
    if math.isfinite(x_hi) and x_hi <= 1.5 * hi[0]:
        polished = _pinned_boundary_polish(numeric, x_hi)
        if polished is not None:
            raw.append((polished[0], polished[1], False))

    # dedupe, keep the best residual per cluster; degenerate roots keep a
    # float pseudo-root valley, so pairs of them merge at a coarser radius
    unique: list[tuple[np.ndarray, float, bool]] = []
    for z, r, deg in sorted(raw, key=lambda t: t[1]):
        keep = True
        for u, _, udeg in unique:
            tol_here = 1e-4 if (deg and udeg) else DEDUP_TOL
            if np.max(np.abs(z - u)) < tol_here:
                keep = False
                break
        if keep:
            unique.append((z, r, deg))

    points = []
    for z, r, _ in unique:
        jac, flag = numeric.jac_values(z[0], z[1:])
        if jac is None or flag == "diverging":
            continue
        lam = perron.lambda_max(jac).lam
        if lam < 1.0 - LAMBDA_FLOOR:
            continue
        points.append(
            CharPoint(
                a=float(z[0]),
                b=tuple(float(v) for v in z[1:]),
                residual=r,
                lam=lam,
                location=_classify_location(numeric, z, x_hi),
                is_eigenpoint=abs(lam - 1.0) <= eigentol,
            )
        )
    points.sort(key=lambda p: -p.a)
    return points


def _classify_location(numeric: NumericSystem, z, x_hi: float, delta: float = 1e-3) -> str:
    """interior / boundary / unknown per evaluability at inflated coordinates."""
    zi = np.asarray(z, dtype=float) * (1 + delta)
    g, f1 = numeric.g_values(zi[0], zi[1:])
    if g is not None and f1 == "converged":
        jac, f2 = numeric.jac_values(zi[0], zi[1:])
        if jac is not None and f2 == "converged":
            return "interior"
    if math.isfinite(x_hi) and abs(z[0] - x_hi) <= 1e-6 * max(1.0, x_hi):
        return "boundary"
    return "unknown"


# ---------------------------------------------------------------------------
# Order structure
# ---------------------------------------------------------------------------

def antichain_check(points, tol: float = 1e-9):
    """True when no point dominates another componentwise (within tol)."""
    for i, p in enumerate(points):
        for q in points[i + 1:]:
            zp, zq = p.coords(), q.coords()
            if np.all(zp <= zq + tol) or np.all(zq <= zp + tol):
                return False, (p, q)
    return True, None


def largest_a_candidate(points, tol: float = 1e-9):
    """The unique point of maximal first coordinate; ties signal a broken solve."""
    if not points:
        raise CharPointError("no characteristic points supplied")
    best = max(points, key=lambda p: p.a)
    ties = [p for p in points if p is not best and abs(p.a - best.a) <= tol]
    if ties:
        raise CharPointError(f"tie for the largest first coordinate at a={best.a}")
    return best


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def classify(
    points,
    sol: StandardSolution,
    eigentol: float = DEFAULT_EIGENTOL,
    boundary_prim_order: int = 200_000,
) -> ExtremeReport:
    """Locate (rho, tau) from the found characteristic points.

    Exactly one eigenpoint: that point is (rho, tau).  None: rho is estimated
    from coefficient asymptotics and tau by solving y = G(rho, y) pointwise at
    the boundary (primitive series get an extended truncation there).  Two or
    more eigenpoints violate the uniqueness theorem and raise.
    """
    eigen = [p for p in points if p.is_eigenpoint]
    if len(eigen) > 1:
        raise MultipleEigenpointsError(
            f"{len(eigen)} eigenpoints found; uniqueness fails only if the "
            "system is invalid or tolerances are misconfigured"
        )
    rho_hat = asympt.estimate_radius(sol, 0)
    if len(eigen) == 1:
        p = eigen[0]
        return ExtremeReport(
            rho=p.a,
            tau=p.b,
            method="eigenpoint",
            lambda_at_extreme=p.lam,
            cross_check={
                "rho_estimate": rho_hat,
                "rel_gap": abs(rho_hat - p.a) / p.a,
            },
        )

    numeric = NumericSystem(sol.system, sol, refined=True, prim_order=boundary_prim_order)
    x_edge = min(
        (ev.domain_edge(rho_hat) for ev in numeric.aux_pointwise.values()),
        default=math.inf,
    )
    x_b = min(rho_hat, x_edge)
    tau = solve_pointwise(numeric, x_b)
    if tau is None:
        lo, hi_x = 0.5 * x_b, x_b
        for _ in range(120):
            mid = 0.5 * (lo + hi_x)
            if solve_pointwise(numeric, mid) is not None:
                lo = mid
            else:
                hi_x = mid
        x_b = lo
        tau = solve_pointwise(numeric, x_b)
    if tau is None:
        raise CharPointError("boundary estimation failed: system not solvable near rho-hat")
    jac, flag = numeric.jac_values(x_b, tau)
    lam = perron.lambda_max(jac).lam if jac is not None else math.nan
    return ExtremeReport(
        rho=x_b,
        tau=tuple(float(v) for v in tau),
        method="boundary-estimated",
        lambda_at_extreme=lam,
        cross_check={"rho_estimate": rho_hat, "rel_gap": abs(rho_hat - x_b) / max(x_b, 1e-300)},
    )
