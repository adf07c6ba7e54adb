"""Radius and singularity-exponent estimation from solution coefficients.

This is the independent cross-check for the characteristic-point machinery:
with t_n ~ C rho^-n n^-alpha on the nonzero support, consecutive coefficient
ratios converge to rho like 1 + alpha/n, which Richardson extrapolation
accelerates; the exponent comes from a log-log least-squares fit of t_n rho^n
on the trailing window.  Coefficients overflow binary64 long before n = 2000
for rho < 1/2, so everything runs on exact-log magnitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from charpoint.solve import StandardSolution

MIN_NONZERO = 200
_LN2 = math.log(2.0)


class AsymptError(ValueError):
    pass


def log_abs_exact(c) -> float:
    """log |c| of an int or Fraction of arbitrary size, without overflow."""
    if isinstance(c, Fraction):
        return log_abs_exact(c.numerator) - log_abs_exact(c.denominator)
    i = abs(int(c))
    if i == 0:
        raise AsymptError("log of zero coefficient")
    nbits = i.bit_length()
    if nbits <= 900:
        return math.log(i)
    shift = nbits - 64
    return math.log(i >> shift) + shift * _LN2


@dataclass
class AsymptoticFit:
    """Fit of t_n ~ C rho^-n n^-alpha over a trailing window of the support."""

    rho_hat: float
    exponent_hat: float
    C_hat: float
    stride: int
    window: tuple
    fit_residual: float


def _support(coefs) -> list:
    support = [n for n, c in enumerate(coefs) if c]
    for c in (coefs[n] for n in support):
        if c < 0:
            raise AsymptError("asymptotic fits need nonnegative coefficients")
    return support


def _uniform_tail(support: list) -> tuple[list, int]:
    """Longest trailing run of support indices with a constant gap, and the gap."""
    if len(support) < 2:
        return support, 1
    gap = support[-1] - support[-2]
    run = [support[-1], support[-2]]
    for a, b in zip(support[-3::-1], support[-2::-1]):
        if b - a == gap:
            run.append(a)
        else:
            break
    run.reverse()
    return run, gap


def _richardson(ns, us, levels: int) -> np.ndarray:
    for _ in range(levels):
        if len(us) < 3:
            break
        us = (ns[1:] * us[1:] - ns[:-1] * us[:-1]) / (ns[1:] - ns[:-1])
        ns = ns[1:]
    return us


def estimate_radius(sol: StandardSolution, component: int = 0) -> float:
    """Radius of convergence of component ``component`` via stride-aware ratios.

    The ratio lag starts at the support stride and doubles while the ratio
    sequence still oscillates (solutions driven by strided auxiliaries carry
    a periodic amplitude modulation on a dense support); two Richardson
    levels then strip the 1/n drift.  Needs at least 200 nonzero
    coefficients; targets ~1e-3 relative accuracy by order 2000.
    """
    coefs = sol.coefficients(component)
    support = _support(coefs)
    if len(support) < MIN_NONZERO:
        raise AsymptError(
            f"only {len(support)} nonzero coefficients; need {MIN_NONZERO} "
            "(solve to a higher order)"
        )
    tail, gap = _uniform_tail(support)
    take = min(len(tail), 240)
    idx = tail[-take:]
    logs = np.array([log_abs_exact(coefs[n]) for n in idx])
    best = None
    for mult in (1, 2, 3, 4, 5, 6):
        if len(idx) <= 4 * mult + 12:
            break
        s = gap * mult
        ns = np.array(idx[mult:], dtype=float)
        us = np.exp((logs[:-mult] - logs[mult:]) / s)
        du = np.abs(np.diff(us[-12:]))
        wobble = float(np.median(du) / max(abs(us[-1]), 1e-300))
        # keep the modulation phase constant for the extrapolation below
        ns_s = ns[::-1][::mult][::-1]
        us_s = us[::-1][::mult][::-1]
        if best is None or wobble < best[0]:
            best = (wobble, ns_s, us_s)
    wobble, ns, us = best
    raw = float(us[-1])
    val = float(_richardson(ns, us, 2)[-1])
    lo = 0.85 * float(min(us[-6:]))
    hi = 1.15 * float(max(us[-6:]))
    if not (lo <= val <= hi):
        val = float(_richardson(ns, us, 1)[-1])
    if not (lo <= val <= hi):
        val = raw
    return val


def fit_exponent(sol: StandardSolution, component: int, rho: float) -> AsymptoticFit:
    """Least-squares fit of -alpha as the slope of log(t_n rho^n) against log n.

    ``rho`` should come from estimate_radius or a located eigenpoint.  The
    window is the trailing half of the computed support.  The reported C_hat
    carries no error bar and no singularity-type claim goes with alpha-hat.
    """
    if rho <= 0:
        raise AsymptError("rho must be positive")
    coefs = sol.coefficients(component)
    support = _support(coefs)
    if len(support) < 8:
        raise AsymptError("too few nonzero coefficients for an exponent fit")
    stride = sol.support_stride[component]
    n_max = support[-1]
    window = [n for n in support if n >= n_max // 2]
    if len(window) < 4:
        window = support[-4:]
    log_rho = math.log(rho)
    ys = np.array([log_abs_exact(coefs[n]) + n * log_rho for n in window])
    xs = np.log(np.array(window, dtype=float))
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    return AsymptoticFit(
        rho_hat=rho,
        exponent_hat=float(-slope),
        C_hat=float(math.exp(intercept)),
        stride=stride,
        window=(window[0], window[-1]),
        fit_residual=float(np.sqrt(np.mean(resid ** 2))),
    )
