"""Command-line frontend: solve / charpoints / classify / transform / asympt / verify.

Exit codes: 0 success, 2 parse or validation failure (and insufficient-order
asympt requests), 3 solver or saturation cap exceeded (partial results are
still printed, flagged), 4 multiple numeric eigenpoints (a theory violation
that signals a broken system or tolerance setup).

JSON output (--format json) is deterministic for a fixed (input, seed, order)
and follows docs/json-output.md; exact rationals are {"num": "...", "den":
"..."} strings, floats are shortest round-trip decimals.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from charpoint import asympt as asympt_mod
from charpoint import charpt, registry, solve as solve_mod, sysdef, transform as transform_mod

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CAP = 3
EXIT_MULTI_EIGEN = 4


class CliError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _rat(q) -> dict:
    q = Fraction(q)
    return {"num": str(q.numerator), "den": str(q.denominator)}


def _emit(payload: dict, fmt: str, text_renderer):
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=False))
    else:
        text_renderer(payload)


def _load_spec(args) -> tuple:
    """Returns (spec, entry-or-None, label)."""
    if args.registry:
        entry = registry.get(args.registry)
        return sysdef.parse(entry.text), entry, entry.key
    if not args.input:
        raise CliError("either --registry KEY or an input file is required")
    try:
        with open(args.input, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc}")
    return sysdef.parse(text), None, args.input


def _order(args, entry, attr="solve_order", floor=16) -> int:
    if args.order is not None:
        if args.order < floor:
            raise CliError(f"order must be at least {floor}")
        return args.order
    return getattr(entry, attr) if entry is not None else (2000 if attr == "asympt_order" else 512)


def _starts(args, entry) -> int:
    if args.starts is not None:
        if args.starts < 1:
            raise CliError("--starts must be >= 1")
        return args.starts
    return entry.n_starts if entry is not None else 64


def _validated(spec, args):
    report = sysdef.validate(spec, probe_order=args.probe_order)
    hard_failures = [k for k, v in report.verdicts.items() if v == "fail"]
    if hard_failures:
        raise CliError(
            "system is not well-conditioned: "
            + "; ".join(f"({k}) {report.witnesses.get(k)}" for k in hard_failures)
        )
    return report


def _solution(spec, order):
    try:
        return solve_mod.solve_coefficients(spec, order)
    except solve_mod.SolveError as exc:
        raise CliError(f"coefficient recursion failed: {exc}")


def _box(args, m):
    if not args.box:
        return None
    parts = [float(p) for p in args.box.split(",")]
    if len(parts) == 2 and m > 1:
        parts = [parts[0]] + [parts[1]] * m
    if len(parts) != m + 1:
        raise CliError(f"--box needs {m + 1} comma-separated bounds (x,y1..y{m})")
    return parts


def _find_points(spec, entry, args, sol):
    return charpt.find_char_points(
        spec,
        search_box=_box(args, spec.arity),
        n_starts=_starts(args, entry),
        seed=args.seed,
        sol=sol,
        order=sol.order,
        eigentol=args.eigentol,
    )


def _point_payload(p: charpt.CharPoint) -> dict:
    return {
        "a": p.a,
        "b": list(p.b),
        "residual": p.residual,
        "lambda": p.lam,
        "eigenpoint": p.is_eigenpoint,
        "location": p.location,
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    spec, entry, label = _load_spec(args)
    _validated(spec, args)
    order = _order(args, entry)
    sol = _solution(spec, order)
    rows = []
    for i in range(sol.arity):
        coefs = sol.coefficients(i)
        for n, c in enumerate(coefs):
            q = Fraction(c)
            rows.append({"component": i + 1, "n": n,
                         "numerator": str(q.numerator), "denominator": str(q.denominator)})
    payload = {
        "command": "solve",
        "system": label,
        "order": order,
        "support_stride": list(sol.support_stride),
        "coefficients": rows,
    }

    def render(p):
        print(f"standard solution of {p['system']} through order {p['order']}")
        print(f"support strides: {p['support_stride']}")
        shown = 0
        for row in p["coefficients"]:
            if row["numerator"] != "0":
                frac = row["numerator"] + ("" if row["denominator"] == "1" else "/" + row["denominator"])
                print(f"  T_{row['component']}[{row['n']}] = {frac}")
                shown += 1
                if shown >= 40 * sol.arity:
                    print("  ... (full table in --format json)")
                    break

    _emit(payload, args.format, render)
    return EXIT_OK


def cmd_charpoints(args) -> int:
    spec, entry, label = _load_spec(args)
    _validated(spec, args)
    sol = _solution(spec, _order(args, entry))
    points = _find_points(spec, entry, args, sol)
    payload = {
        "command": "charpoints",
        "system": label,
        "order": sol.order,
        "seed": args.seed,
        "points": [_point_payload(p) for p in points],
    }

    def render(p):
        if not p["points"]:
            print(f"{label}: no characteristic points found in the search box")
            return
        print(f"{label}: {len(p['points'])} characteristic point(s), largest a first")
        for pt in points:
            print("  " + str(pt))

    _emit(payload, args.format, render)
    return EXIT_OK


def cmd_classify(args) -> int:
    spec, entry, label = _load_spec(args)
    _validated(spec, args)
    sol = _solution(spec, _order(args, entry))
    points = _find_points(spec, entry, args, sol)
    try:
        report = charpt.classify(points, sol, eigentol=args.eigentol)
    except charpt.MultipleEigenpointsError as exc:
        raise CliError(str(exc), code=EXIT_MULTI_EIGEN)
    payload = {
        "command": "classify",
        "system": label,
        "rho": report.rho,
        "tau": list(report.tau),
        "method": report.method,
        "lambda": report.lambda_at_extreme,
        "cross_check": report.cross_check,
        "n_char_points": len(points),
    }

    def render(p):
        if report.method == "eigenpoint":
            print(f"{label}: eigenpoint located")
        else:
            print(f"{label}: no eigenpoint found; boundary-estimated extreme point")
        print("  " + str(report))

    _emit(payload, args.format, render)
    return EXIT_OK


def cmd_asympt(args) -> int:
    spec, entry, label = _load_spec(args)
    _validated(spec, args)
    order = _order(args, entry, attr="asympt_order")
    sol = _solution(spec, order)
    comps = []
    for i in range(sol.arity):
        try:
            rho_hat = asympt_mod.estimate_radius(sol, i)
            fit = asympt_mod.fit_exponent(sol, i, rho_hat)
        except asympt_mod.AsymptError as exc:
            raise CliError(f"component {i + 1}: {exc}")
        comps.append({
            "component": i + 1,
            "rho_hat": rho_hat,
            "exponent_hat": fit.exponent_hat,
            "C_hat": fit.C_hat,
            "stride": fit.stride,
            "window": list(fit.window),
            "fit_residual": fit.fit_residual,
        })
    payload = {"command": "asympt", "system": label, "order": order, "components": comps}

    def render(p):
        print(f"{label}: coefficient asymptotics at order {order}")
        for c in comps:
            print(
                f"  component {c['component']}: rho_hat={c['rho_hat']:.6f} "
                f"alpha_hat={c['exponent_hat']:.4f} C_hat={c['C_hat']:.4g} "
                f"stride={c['stride']} window={c['window']}"
            )

    _emit(payload, args.format, render)
    return EXIT_OK


def _parse_step(text: str) -> transform_mod.SubstitutionStep:
    fields = {}
    for part in text.split(","):
        if "=" not in part:
            raise CliError(f"bad --step component {part!r} (want k=v)")
        k, v = part.split("=", 1)
        fields[k.strip()] = v.strip()
    try:
        return transform_mod.SubstitutionStep(
            i=int(fields.get("i", 1)),
            j=int(fields.get("j", 1)),
            occurrence=int(fields.get("occ", fields.get("occurrence", 1))),
            alpha=Fraction(fields.get("alpha", "1/2")),
        )
    except (ValueError, transform_mod.TransformError) as exc:
        raise CliError(f"bad --step {text!r}: {exc}")


def cmd_transform(args) -> int:
    spec, entry, label = _load_spec(args)
    _validated(spec, args)
    steps_applied = []
    code = EXIT_OK
    if args.saturate:
        try:
            new_spec, steps_applied = transform_mod.saturate_jacobian(
                spec, probe_order=args.probe_order, max_steps=args.max_steps
            )
        except transform_mod.TransformError as exc:
            raise CliError(str(exc), code=EXIT_CAP)
    elif args.step:
        new_spec = spec
        for s in args.step:
            step = _parse_step(s)
            try:
                new_spec = transform_mod.minimal_substitute(new_spec, step)
            except transform_mod.TransformError as exc:
                raise CliError(str(exc))
            steps_applied.append(step)
    else:
        raise CliError("transform needs --saturate or at least one --step")

    sol = _solution(spec, _order(args, entry))
    points = _find_points(spec, entry, args, sol)
    report = transform_mod.verify_invariance(spec, new_spec, points)
    payload = {
        "command": "transform",
        "system": label,
        "steps": [
            {"i": s.i, "j": s.j, "occurrence": s.occurrence, "alpha": _rat(s.alpha)}
            for s in steps_applied
        ],
        "transformed": sysdef.pretty(new_spec),
        "invariance_ok": report.ok,
        "invariance": [
            {
                "point": list(e.point),
                "residual": e.residual_transformed,
                "lambda_original": e.lambda_original,
                "lambda_transformed": e.lambda_transformed,
                "flags_agree": e.eigen_flags_agree,
            }
            for e in report.entries
        ],
    }

    def render(p):
        print(f"{label}: applied {len(steps_applied)} substitution step(s)")
        print(p["transformed"], end="")
        print(str(report))

    _emit(payload, args.format, render)
    return code


def _verify_entry(entry: registry.RegistryEntry, seed: int, eigentol: float) -> dict:
    checks = []

    def check(name, passed, detail=""):
        checks.append({"name": name, "passed": bool(passed), "detail": detail})

    spec = sysdef.parse(entry.text)
    report = sysdef.validate(spec)
    hard = [k for k, v in report.verdicts.items() if v == "fail"]
    check("well-conditioned", not hard, ",".join(hard) or "no hard failures")

    sol = solve_mod.solve_coefficients(spec, entry.solve_order)
    points = charpt.find_char_points(
        spec, n_starts=entry.n_starts, seed=seed, sol=sol, order=sol.order, eigentol=eigentol
    )
    if entry.count_known:
        check(
            "characteristic-point count",
            len(points) == len(entry.char_points),
            f"found {len(points)}, expected {len(entry.char_points)}",
        )
    for want in entry.char_points:
        best = None
        for p in points:
            gap = max(abs(a - b) for a, b in zip(p.coords(), want.coords))
            if best is None or gap < best[0]:
                best = (gap, p)
        if best is None:
            check(f"point near a={want.coords[0]:.6f}", False, "no points found")
            continue
        gap, p = best
        check(
            f"point near a={want.coords[0]:.7f}",
            gap <= want.tol,
            f"gap {gap:.2e} (tol {want.tol:.0e})",
        )
        check(
            f"eigen flag at a={want.coords[0]:.7f}",
            p.is_eigenpoint == want.eigenpoint,
            f"lambda={p.lam:.9f}",
        )
    if len(points) >= 2:
        ok, pair = charpt.antichain_check(points)
        check("antichain", ok, "" if ok else f"comparable pair at a={pair[0].a}, {pair[1].a}")

    rep = charpt.classify(points, sol, eigentol=eigentol)
    if entry.method:
        check("classification method", rep.method == entry.method,
              f"{rep.method} (expected {entry.method})")
    if entry.extreme is not None:
        rho, tau = entry.extreme
        gap = abs(rep.rho - rho)
        for got, want_t in zip(rep.tau, tau):
            gap = max(gap, abs(got - want_t))
        check("extreme point", gap <= entry.extreme_tol,
              f"gap {gap:.2e} (tol {entry.extreme_tol:.0e})")
        ratio = rep.cross_check.get("rho_estimate", rho) / rho
        check("radius estimate cross-check", abs(ratio - 1) <= entry.rho_ratio_tol,
              f"rho_hat/rho = {ratio:.5f}")
    return {"key": entry.key, "checks": checks, "passed": all(c["passed"] for c in checks)}


def cmd_verify(args) -> int:
    targets = [registry.get(args.only)] if args.only else [registry.get(k) for k in registry.keys()]
    entries = []
    for entry in targets:
        result = _verify_entry(entry, args.seed, args.eigentol)
        entries.append(result)
        status = "pass" if result["passed"] else "FAIL"
        if args.format != "json":
            print(f"[{status}] {entry.key}")
            for c in result["checks"]:
                mark = "ok " if c["passed"] else "BAD"
                print(f"    {mark} {c['name']}: {c['detail']}")
    payload = {
        "command": "verify",
        "entries": entries,
        "passed": all(e["passed"] for e in entries),
    }
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        print("overall:", "pass" if payload["passed"] else "FAIL")
    return EXIT_OK if payload["passed"] else 1


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("input", nargs="?", help="system definition file")
    sub.add_argument("--registry", help="built-in example key (see `charpoint verify --list`)")
    sub.add_argument("-N", "--order", type=int, default=None, help="series truncation order")
    sub.add_argument("--probe-order", type=int, default=24, dest="probe_order")
    sub.add_argument("--starts", type=int, default=None, help="Newton multistart count")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--box", help="search box upper bounds: xmax,ymax1[,ymax2...]")
    sub.add_argument("--format", choices=("text", "json"), default="text")
    sub.add_argument("--eigentol", type=float, default=charpt.DEFAULT_EIGENTOL)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="charpoint",
        description="Locate and classify the extreme point of recursive "
        "generating-function systems via characteristic points and the "
        "Perron-root criterion.",
    )
    subs = ap.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("solve", cmd_solve),
        ("charpoints", cmd_charpoints),
        ("classify", cmd_classify),
        ("asympt", cmd_asympt),
        ("transform", cmd_transform),
    ):
        sub = subs.add_parser(name)
        _add_common(sub)
        sub.set_defaults(fn=fn)
    tr = subs.choices["transform"]
    tr.add_argument("--saturate", action="store_true", help="eliminate structural Jacobian zeros")
    tr.add_argument("--step", action="append", help="i=1,j=2,occ=1,alpha=1/2 (repeatable)")
    tr.add_argument("--max-steps", type=int, default=100, dest="max_steps")
    vf = subs.add_parser("verify")
    vf.add_argument("--only", help="run a single registry entry")
    vf.add_argument("--seed", type=int, default=0)
    vf.add_argument("--eigentol", type=float, default=charpt.DEFAULT_EIGENTOL)
    vf.add_argument("--format", choices=("text", "json"), default="text")
    vf.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except sysdef.SysdefError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (solve_mod.SolveError, charpt.CharPointError, asympt_mod.AsymptError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
