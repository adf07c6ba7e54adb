"""charpoint: locating the extreme point of recursive generating-function systems.

The package solves systems y = G(x, y) of recursively defined nonnegative
power series, finds the positive solutions of the associated characteristic
system (the system equations plus det(I - J_G) = 0), classifies them through
the Perron root of the Jacobian, and cross-checks the located radius of
convergence against coefficient asymptotics.
"""

from charpoint.series import MultiSeries, ExtendedValue, polylog_series
from charpoint.sysdef import parse, validate, jacobian, SystemSpec, pretty
from charpoint.solve import solve_coefficients, StandardSolution, eval_point, lambda_along_solution
from charpoint.perron import lambda_max, collatz_wielandt_check, PerronResult
from charpoint.charpt import (
    CharPoint,
    ExtremeReport,
    characteristic_residual,
    find_char_points,
    classify,
    antichain_check,
    largest_a_candidate,
)
from charpoint.transform import SubstitutionStep, minimal_substitute, saturate_jacobian, verify_invariance
from charpoint.asympt import AsymptoticFit, estimate_radius, fit_exponent

__version__ = "0.1.0"

__all__ = [
    "MultiSeries",
    "ExtendedValue",
    "polylog_series",
    "parse",
    "validate",
    "jacobian",
    "pretty",
    "SystemSpec",
    "solve_coefficients",
    "StandardSolution",
    "eval_point",
    "lambda_along_solution",
    "lambda_max",
    "collatz_wielandt_check",
    "PerronResult",
    "CharPoint",
    "ExtremeReport",
    "characteristic_residual",
    "find_char_points",
    "classify",
    "antichain_check",
    "largest_a_candidate",
    "SubstitutionStep",
    "minimal_substitute",
    "saturate_jacobian",
    "verify_invariance",
    "AsymptoticFit",
    "estimate_radius",
    "fit_exponent",
]
