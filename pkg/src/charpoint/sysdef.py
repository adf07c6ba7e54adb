"""System-definition language: parsing, validation, symbolic Jacobians.

A system file defines m equations ``y_i = G_i(x, y1..ym)`` over nonnegative
rational constants, with optional let-bound auxiliary series that are
themselves recursively defined systems (arity 1 in practice)::

    let A = solve { y = x*(1+9*y^2); };
    y1 = A*(1 + y2 + y1^2);
    y2 = A*(1 + y1 + y2^2);

Grammar (comments run from ``#`` to end of line, whitespace is free):

    file    := letdef* eq+
    letdef  := "let" IDENT "=" "solve" "{" file "}" ";"
    eq      := YVAR "=" expr ";"
    expr    := term ("+" term)*
    term    := factor ("*" factor)*
    factor  := atom ("^" INT)?
    atom    := NUMBER | "x" | YVAR | IDENT
             | "exp" "(" expr ")" | "polylog" "(" INT "," expr ")"
             | "(" expr ")"
    NUMBER  := integer | decimal | integer "/" integer     (all nonnegative)

Subtraction and division are intentionally absent: every parsed system has
nonnegative coefficients by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from charpoint.series import Coef, MultiSeries, SeriesError, _q


class SysdefError(ValueError):
    """Parse or semantic error in a system definition."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Expression AST
# ---------------------------------------------------------------------------

class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: Coef

    def __post_init__(self):
        object.__setattr__(self, "value", _q(self.value))


@dataclass(frozen=True)
class VarX(Expr):
    pass


@dataclass(frozen=True)
class VarY(Expr):
    index: int  # 1-based


@dataclass(frozen=True)
class Add(Expr):
    terms: tuple


@dataclass(frozen=True)
class Mul(Expr):
    factors: tuple


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr


@dataclass(frozen=True)
class Polylog(Expr):
    weight: int
    arg: Expr


@dataclass(frozen=True)
class AuxSeries(Expr):
    name: str


@dataclass(frozen=True)
class PolylogD(Expr):
    """shift-th derivative of polylog(weight, .): sum (n)_shift n^-weight w^(n-shift).

    Produced only by differentiation; never parsed or printed.
    """

    weight: int
    shift: int
    arg: Expr


@dataclass(frozen=True)
class AuxDeriv(Expr):
    """k-th x-derivative of a let-bound series. Produced only by differentiation."""

    name: str
    order: int


ZERO = Const(0)
ONE = Const(1)


def add_expr(terms: Sequence[Expr]) -> Expr:
    flat: list[Expr] = []
    const: Coef = 0
    for t in terms:
        if isinstance(t, Add):
            flat.extend(t.terms)
        elif isinstance(t, Const):
            const = const + t.value
        else:
            flat.append(t)
    if const:
        flat.append(Const(const))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def mul_expr(factors: Sequence[Expr]) -> Expr:
    flat: list[Expr] = []
    const: Coef = 1
    for f in factors:
        if isinstance(f, Mul):
            flat.extend(f.factors)
        elif isinstance(f, Const):
            const = const * f.value
        else:
            flat.append(f)
    if not const:
        return ZERO
    if const != 1 or not flat:
        flat.insert(0, Const(const))
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat))


def pow_expr(base: Expr, k: int) -> Expr:
    if k == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value ** k)
    return Pow(base, k)


def constant_term(e: Expr) -> Coef:
    """Exact constant term of the series an expression denotes."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, (VarX, VarY, Polylog, PolylogD, AuxSeries, AuxDeriv)):
        # aux solutions go through the origin; polylog-family series have no
        # constant term; AuxDeriv constant terms are unknown here but never
        # appear where a constant term matters (they arise from x-derivatives
        # of origin-vanishing series, checked at differentiation sites).
        return 0
    if isinstance(e, Add):
        return sum((constant_term(t) for t in e.terms), 0)
    if isinstance(e, Mul):
        out: Coef = 1
        for f in e.factors:
            out = out * constant_term(f)
            if not out:
                return 0
        return out
    if isinstance(e, Pow):
        return constant_term(e.base) ** e.exponent
    if isinstance(e, Exp):
        return 1  # arg has zero constant term by construction
    raise TypeError(f"unknown node {e!r}")


def differentiate(e: Expr, var: int) -> Expr:
    """Symbolic partial derivative; var 0 is x, var j >= 1 is y_j."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, VarX):
        return ONE if var == 0 else ZERO
    if isinstance(e, VarY):
        return ONE if var == e.index else ZERO
    if isinstance(e, Add):
        return add_expr([differentiate(t, var) for t in e.terms])
    if isinstance(e, Mul):
        parts = []
        for i, f in enumerate(e.factors):
            df = differentiate(f, var)
            if df is not ZERO:
                parts.append(mul_expr(list(e.factors[:i]) + [df] + list(e.factors[i + 1:])))
        return add_expr(parts)
    if isinstance(e, Pow):
        db = differentiate(e.base, var)
        if db is ZERO:
            return ZERO
        return mul_expr([Const(e.exponent), pow_expr(e.base, e.exponent - 1), db])
    if isinstance(e, Exp):
        da = differentiate(e.arg, var)
        if da is ZERO:
            return ZERO
        return mul_expr([e, da])
    if isinstance(e, Polylog):
        da = differentiate(e.arg, var)
        if da is ZERO:
            return ZERO
        return mul_expr([PolylogD(e.weight, 1, e.arg), da])
    if isinstance(e, PolylogD):
        da = differentiate(e.arg, var)
        if da is ZERO:
            return ZERO
        return mul_expr([PolylogD(e.weight, e.shift + 1, e.arg), da])
    if isinstance(e, AuxSeries):
        return AuxDeriv(e.name, 1) if var == 0 else ZERO
    if isinstance(e, AuxDeriv):
        return AuxDeriv(e.name, e.order + 1) if var == 0 else ZERO
    raise TypeError(f"unknown node {e!r}")


def aux_names_used(e: Expr, acc: set | None = None) -> set:
    if acc is None:
        acc = set()
    if isinstance(e, (AuxSeries, AuxDeriv)):
        acc.add(e.name)
    elif isinstance(e, Add):
        for t in e.terms:
            aux_names_used(t, acc)
    elif isinstance(e, Mul):
        for f in e.factors:
            aux_names_used(f, acc)
    elif isinstance(e, Pow):
        aux_names_used(e.base, acc)
    elif isinstance(e, (Exp, Polylog, PolylogD)):
        aux_names_used(e.arg, acc)
    return acc


def canonical(e: Expr) -> Expr:
    """Canonical form for structural comparison: flattened, folded, sorted."""
    if isinstance(e, Add):
        terms = [canonical(t) for t in e.terms]
        flattened = add_expr(terms)
        if isinstance(flattened, Add):
            return Add(tuple(sorted(flattened.terms, key=repr)))
        return flattened
    if isinstance(e, Mul):
        factors = [canonical(f) for f in e.factors]
        # expand constant-folded powers of identical sorted factors? keep simple
        flattened = mul_expr(factors)
        if isinstance(flattened, Mul):
            return Mul(tuple(sorted(flattened.factors, key=repr)))
        return flattened
    if isinstance(e, Pow):
        return pow_expr(canonical(e.base), e.exponent)
    if isinstance(e, Exp):
        return Exp(canonical(e.arg))
    if isinstance(e, Polylog):
        return Polylog(e.weight, canonical(e.arg))
    if isinstance(e, PolylogD):
        return PolylogD(e.weight, e.shift, canonical(e.arg))
    return e


def expr_equal(a: Expr, b: Expr) -> bool:
    return canonical(a) == canonical(b)


def substitute_yvars(e: Expr, perm: dict) -> Expr:
    """Rename y-variables by a permutation {index: image}."""
    if isinstance(e, VarY):
        return VarY(perm[e.index])
    if isinstance(e, Add):
        return Add(tuple(substitute_yvars(t, perm) for t in e.terms))
    if isinstance(e, Mul):
        return Mul(tuple(substitute_yvars(f, perm) for f in e.factors))
    if isinstance(e, Pow):
        return Pow(substitute_yvars(e.base, perm), e.exponent)
    if isinstance(e, Exp):
        return Exp(substitute_yvars(e.arg, perm))
    if isinstance(e, Polylog):
        return Polylog(e.weight, substitute_yvars(e.arg, perm))
    if isinstance(e, PolylogD):
        return PolylogD(e.weight, e.shift, substitute_yvars(e.arg, perm))
    return e


def automorphisms(spec: "SystemSpec", max_arity: int = 6) -> list:
    """Variable permutations that map the system onto itself.

    A permutation pi is an automorphism when renaming y_i -> y_pi(i) inside
    G_i reproduces G_pi(i) structurally.  Characteristic points of such a
    system come in pi-orbits, and roots pinned to the fixed subspace can be
    polished there (the antisymmetric directions are flat to high order, so
    full-space Newton cannot resolve them).
    """
    import itertools

    m = spec.arity
    if m > max_arity:
        return []
    ident = tuple(range(1, m + 1))
    canon = [canonical(g) for g in spec.equations]
    out = []
    for perm in itertools.permutations(range(1, m + 1)):
        if perm == ident:
            continue
        pd = {i + 1: perm[i] for i in range(m)}
        if all(
            canonical(substitute_yvars(spec.equations[i], pd)) == canon[perm[i] - 1]
            for i in range(m)
        ):
            out.append(perm)
    return out


# ---------------------------------------------------------------------------
# SystemSpec
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemSpec:
    """A parsed recursive system y = G(x, y) with let-bound auxiliary systems.

    ``aux`` holds this spec's own let definitions in source order; nested
    definitions may reference names bound earlier in any enclosing scope, so
    solving proceeds by threading an environment through the list.
    """

    arity: int
    equations: tuple
    aux: tuple = ()  # tuple of (name, SystemSpec)
    source: str = ""
    source_span: tuple = ()  # per-equation (line, col)

    def aux_spec(self, name: str) -> "SystemSpec":
        for n, sub in self.aux:
            if n == name:
                return sub
        raise KeyError(name)

    def with_equation(self, i: int, new_rhs: Expr) -> "SystemSpec":
        """Copy with equation i (1-based) replaced."""
        eqs = list(self.equations)
        eqs[i - 1] = new_rhs
        return SystemSpec(self.arity, tuple(eqs), self.aux, self.source, self.source_span)


# ---------------------------------------------------------------------------
# Lexer / parser
# ---------------------------------------------------------------------------

_KEYWORDS = {"let", "solve", "exp", "polylog", "x"}


@dataclass(frozen=True)
class _Tok:
    kind: str  # NUM INT IDENT YVAR SYM EOF
    text: str
    value: object
    line: int
    col: int


def _lex(text: str) -> Iterator[_Tok]:
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                if j >= n or not text[j].isdigit():
                    raise SysdefError("malformed decimal literal", line, start_col)
                while j < n and text[j].isdigit():
                    j += 1
                tok = _Tok("NUM", text[i:j], _q(Fraction(text[i:j])), line, start_col)
            else:
                tok = _Tok("INT", text[i:j], int(text[i:j]), line, start_col)
            col += j - i
            i = j
            yield tok
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            col += j - i
            i = j
            if word == "y" or (word[0] == "y" and word[1:].isdigit()):
                idx = 1 if word == "y" else int(word[1:])
                if word != "y" and (word[1] == "0"):
                    raise SysdefError(f"bad y-variable {word!r}", line, start_col)
                yield _Tok("YVAR", word, idx, line, start_col)
            elif word in _KEYWORDS:
                yield _Tok("SYM", word, word, line, start_col)
            else:
                yield _Tok("IDENT", word, word, line, start_col)
            continue
        if c in "=;{}()+*^,/":
            yield _Tok("SYM", c, c, line, start_col)
            i += 1
            col += 1
            continue
        if c == "-":
            raise SysdefError("negative literals and subtraction are not allowed", line, start_col)
        raise SysdefError(f"unexpected character {c!r}", line, start_col)
    yield _Tok("EOF", "", None, line, col)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = list(_lex(text))
        self.pos = 0

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise SysdefError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return t

    def at_sym(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "SYM" and t.text == text

    # file := letdef* eq+
    def parse_file(self, scope: dict) -> SystemSpec:
        aux: list = []
        local_scope = dict(scope)
        while self.at_sym("let"):
            t_let = self.next()
            name_tok = self.next()
            if name_tok.kind != "IDENT":
                raise SysdefError("expected identifier after 'let'", name_tok.line, name_tok.col)
            if name_tok.text in local_scope:
                raise SysdefError(f"duplicate let name {name_tok.text!r}", name_tok.line, name_tok.col)
            self.expect("=")
            self.expect("solve")
            self.expect("{")
            sub = self.parse_file(local_scope)
            self.expect("}")
            self.expect(";")
            aux.append((name_tok.text, sub))
            local_scope[name_tok.text] = sub
            del t_let
        eqs: list[tuple[int, Expr, tuple]] = []
        while self.peek().kind == "YVAR":
            t = self.next()
            self.expect("=")
            rhs = self.parse_expr(local_scope)
            self.expect(";")
            eqs.append((t.value, rhs, (t.line, t.col)))
            if t.text == "y" and len(eqs) > 1:
                raise SysdefError("plain 'y' is only allowed in 1-equation systems", t.line, t.col)
        if not eqs:
            t = self.peek()
            raise SysdefError("expected an equation", t.line, t.col)
        m = len(eqs)
        for k, (idx, _, span) in enumerate(eqs, start=1):
            if idx != k:
                raise SysdefError(
                    f"equations must define y1..y{m} in order; found y{idx} in position {k}",
                    span[0], span[1],
                )
        for idx, rhs, span in eqs:
            hi = _max_yvar(rhs)
            if hi > m:
                raise SysdefError(f"y{hi} referenced but the system has arity {m}", span[0], span[1])
        return SystemSpec(
            arity=m,
            equations=tuple(rhs for _, rhs, _ in eqs),
            aux=tuple(aux),
            source=self.text,
            source_span=tuple(span for _, _, span in eqs),
        )

    def parse_expr(self, scope: dict) -> Expr:
        terms = [self.parse_term(scope)]
        while self.at_sym("+"):
            self.next()
            terms.append(self.parse_term(scope))
        return add_expr(terms)

    def parse_term(self, scope: dict) -> Expr:
        factors = [self.parse_factor(scope)]
        while self.at_sym("*"):
            self.next()
            factors.append(self.parse_factor(scope))
        return mul_expr(factors)

    def parse_factor(self, scope: dict) -> Expr:
        atom = self.parse_atom(scope)
        if self.at_sym("^"):
            t = self.next()
            e = self.next()
            if e.kind != "INT":
                raise SysdefError("exponent must be a positive integer", e.line, e.col)
            if e.value < 1:
                raise SysdefError("exponent must be >= 1", e.line, e.col)
            return pow_expr(atom, e.value)
        return atom

    def parse_atom(self, scope: dict) -> Expr:
        t = self.next()
        if t.kind == "INT":
            # NUMBER := integer ("/" integer)?
            if self.at_sym("/"):
                self.next()
                d = self.next()
                if d.kind != "INT":
                    raise SysdefError("expected integer denominator", d.line, d.col)
                if d.value == 0:
                    raise SysdefError("zero denominator", d.line, d.col)
                return Const(Fraction(t.value, d.value))
            return Const(t.value)
        if t.kind == "NUM":
            return Const(t.value)
        if t.kind == "YVAR":
            return VarY(t.value)
        if t.kind == "SYM" and t.text == "x":
            return VarX()
        if t.kind == "SYM" and t.text == "exp":
            self.expect("(")
            arg = self.parse_expr(scope)
            self.expect(")")
            if constant_term(arg):
                raise SysdefError("exp() argument must have zero constant term", t.line, t.col)
            return Exp(arg)
        if t.kind == "SYM" and t.text == "polylog":
            self.expect("(")
            w = self.next()
            if w.kind != "INT" or w.value < 1:
                raise SysdefError("polylog weight must be a positive integer", w.line, w.col)
            self.expect(",")
            arg = self.parse_expr(scope)
            self.expect(")")
            if constant_term(arg):
                raise SysdefError("polylog() argument must have zero constant term", t.line, t.col)
            return Polylog(w.value, arg)
        if t.kind == "SYM" and t.text == "(":
            inner = self.parse_expr(scope)
            self.expect(")")
            return inner
        if t.kind == "IDENT":
            if t.text not in scope:
                raise SysdefError(f"unknown identifier {t.text!r}", t.line, t.col)
            return AuxSeries(t.text)
        raise SysdefError(f"unexpected token {t.text or 'end of input'!r}", t.line, t.col)


def _max_yvar(e: Expr) -> int:
    if isinstance(e, VarY):
        return e.index
    if isinstance(e, Add):
        return max((_max_yvar(t) for t in e.terms), default=0)
    if isinstance(e, Mul):
        return max((_max_yvar(f) for f in e.factors), default=0)
    if isinstance(e, Pow):
        return _max_yvar(e.base)
    if isinstance(e, (Exp, Polylog, PolylogD)):
        return _max_yvar(e.arg)
    return 0


def parse(text: str) -> SystemSpec:
    """Parse a system definition; raises SysdefError with line/column on failure."""
    p = _Parser(text)
    spec = p.parse_file({})
    tail = p.peek()
    if tail.kind != "EOF":
        raise SysdefError(f"trailing input {tail.text!r}", tail.line, tail.col)
    return spec


# ---------------------------------------------------------------------------
# Pretty-printing (parse . pretty is the identity on ASTs)
# ---------------------------------------------------------------------------

def _fmt_coef(c: Coef) -> str:
    if isinstance(c, Fraction):
        return f"{c.numerator}/{c.denominator}"
    return str(c)


def _pp(e: Expr, prec: int = 0) -> str:
    # precedence: 0 add, 1 mul, 2 pow/atom
    if isinstance(e, Const):
        s = _fmt_coef(e.value)
        return f"({s})" if "/" in s and prec >= 2 else s
    if isinstance(e, VarX):
        return "x"
    if isinstance(e, VarY):
        return f"y{e.index}"
    if isinstance(e, AuxSeries):
        return e.name
    if isinstance(e, Add):
        s = " + ".join(_pp(t, 1) for t in e.terms)
        return f"({s})" if prec >= 1 else s
    if isinstance(e, Mul):
        s = "*".join(_pp(f, 2) for f in e.factors)
        return f"({s})" if prec >= 2 else s
    if isinstance(e, Pow):
        return f"{_pp(e.base, 2)}^{e.exponent}"
    if isinstance(e, Exp):
        return f"exp({_pp(e.arg, 0)})"
    if isinstance(e, Polylog):
        return f"polylog({e.weight}, {_pp(e.arg, 0)})"
    raise SysdefError(f"cannot print internal node {type(e).__name__}")


def pretty(spec: SystemSpec) -> str:
    """Render a SystemSpec back to the input grammar."""
    lines = []
    for name, sub in spec.aux:
        body = pretty(sub).strip().replace("\n", " ")
        lines.append(f"let {name} = solve {{ {body} }};")
    for i, rhs in enumerate(spec.equations, start=1):
        lhs = f"y{i}"
        lines.append(f"{lhs} = {_pp(rhs)};")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Expression -> truncated series expansion
# ---------------------------------------------------------------------------

def expand(e: Expr, nvars: int, order: int, aux_env: dict) -> MultiSeries:
    """Expand an expression as a MultiSeries over (x, y1..y_{nvars-1}).

    ``aux_env`` maps aux names to solved univariate series (in x) of at least
    the requested order.
    """
    if isinstance(e, Const):
        return MultiSeries.constant(e.value, nvars, order)
    if isinstance(e, VarX):
        return MultiSeries.variable(1, nvars, order)
    if isinstance(e, VarY):
        return MultiSeries.variable(e.index + 1, nvars, order)
    if isinstance(e, Add):
        acc = MultiSeries(nvars, order)
        for t in e.terms:
            acc = acc + expand(t, nvars, order, aux_env)
        return acc
    if isinstance(e, Mul):
        acc = MultiSeries.constant(1, nvars, order)
        for f in e.factors:
            acc = acc * expand(f, nvars, order, aux_env)
        return acc
    if isinstance(e, Pow):
        return expand(e.base, nvars, order, aux_env) ** e.exponent
    if isinstance(e, Exp):
        return expand(e.arg, nvars, order, aux_env).exp()
    if isinstance(e, (Polylog, PolylogD)):
        weight = e.weight
        shift = e.shift if isinstance(e, PolylogD) else 0
        coeffs = {}
        for n in range(max(1, shift), order + shift + 1):
            c = Fraction(math.perm(n, shift), n ** weight) if shift else Fraction(1, n ** weight)
            coeffs[(n - shift,)] = _q(c)
        prim = MultiSeries(1, order, coeffs)
        arg = expand(e.arg, nvars, order, aux_env)
        return prim.compose([arg])
    if isinstance(e, AuxSeries):
        return _embed_univariate(aux_env[e.name], nvars, order)
    if isinstance(e, AuxDeriv):
        ser = aux_env[e.name]
        for _ in range(e.order):
            ser = ser.partial(1)
        return _embed_univariate(ser, nvars, order)
    raise TypeError(f"unknown node {e!r}")


def _embed_univariate(ser: MultiSeries, nvars: int, order: int) -> MultiSeries:
    if ser.nvars != 1:
        raise SeriesError("aux series must be univariate")
    pad = (0,) * (nvars - 1)
    return MultiSeries(
        nvars, order, {(n,) + pad: c for (n,), c in ser.coeffs.items() if n <= order}
    )


# ---------------------------------------------------------------------------
# Jacobian and validation
# ---------------------------------------------------------------------------

def jacobian(spec: SystemSpec) -> list:
    """m x m matrix of symbolic partials dG_i/dy_j."""
    return [
        [differentiate(g, j) for j in range(1, spec.arity + 1)]
        for g in spec.equations
    ]


def gradient_x(spec: SystemSpec) -> list:
    """Vector of symbolic partials dG_i/dx."""
    return [differentiate(g, 0) for g in spec.equations]


@dataclass
class ValidationReport:
    """Per-condition verdicts for the well-conditioned hypotheses (a)-(g).

    Verdicts are "pass", "fail", or "undecidable-at-truncation"; witnesses
    explain the verdict (a violating monomial, the nonlinearity triple, the
    dependency-graph components...).
    """

    probe_order: int
    verdicts: dict
    witnesses: dict

    @property
    def ok(self) -> bool:
        return all(v == "pass" for v in self.verdicts.values())

    def failures(self) -> list:
        return [k for k, v in self.verdicts.items() if v != "pass"]

    def __str__(self) -> str:
        lines = [f"well-conditioned check at probe order {self.probe_order}:"]
        for k in "abcdefg":
            w = self.witnesses.get(k)
            lines.append(f"  ({k}) {self.verdicts[k]}" + (f" -- {w}" if w else ""))
        return "\n".join(lines)


def _walk_consts(e: Expr):
    if isinstance(e, Const):
        yield e.value
    elif isinstance(e, Add):
        for t in e.terms:
            yield from _walk_consts(t)
    elif isinstance(e, Mul):
        for f in e.factors:
            yield from _walk_consts(f)
    elif isinstance(e, Pow):
        yield from _walk_consts(e.base)
    elif isinstance(e, (Exp, Polylog, PolylogD)):
        yield from _walk_consts(e.arg)


def _strongly_connected(m: int, edges: set) -> tuple[bool, list]:
    """Check strong connectivity of a digraph on 1..m; returns (ok, components)."""
    if m == 1:
        return ((1, 1) in edges, [[1]])

    def reach(start: int, adj) -> set:
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj.get(u, ()):  # noqa: B909 - adj is immutable here
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    fwd: dict[int, list] = {}
    bwd: dict[int, list] = {}
    for i, j in edges:
        fwd.setdefault(i, []).append(j)
        bwd.setdefault(j, []).append(i)
    f = reach(1, fwd)
    b = reach(1, bwd)
    ok = len(f) == m and len(b) == m
    return ok, sorted(f & b)


def aux_environment(spec: SystemSpec, order: int, outer: dict | None = None) -> dict:
    """Solve every aux system (in scope order) to ``order``; name -> MultiSeries."""
    from charpoint import solve as _solve  # deferred: solve imports sysdef

    env = dict(outer) if outer else {}
    for name, sub in spec.aux:
        if name in env and env[name].order >= order:
            continue
        env.update(aux_environment(sub, order, env))
        sol = _solve.solve_coefficients(sub, order, aux_env=env)
        env[name] = sol.series[0]
    return env


def validate(spec: SystemSpec, probe_order: int = 24) -> ValidationReport:
    """Check Definition-style well-conditioned hypotheses from truncations.

    Conditions (d), (f), (g) are semidecidable: a nonzero witness up to the
    probe order is definitive, absence yields "undecidable-at-truncation".
    """
    if probe_order < 2:
        raise ValueError("probe_order must be >= 2")
    m = spec.arity
    nvars = m + 1
    env = aux_environment(spec, probe_order)
    g_series = [expand(g, nvars, probe_order, env) for g in spec.equations]
    jac = jacobian(spec)
    jac_series = [
        [expand(jac[i][j], nvars, probe_order, env) for j in range(m)] for i in range(m)
    ]
    verdicts: dict[str, str] = {}
    witnesses: dict[str, object] = {}

    # (a) nonnegative coefficients: guaranteed by the grammar, re-checked on the AST
    bad = [c for g in spec.equations for c in _walk_consts(g) if c < 0]
    verdicts["a"] = "fail" if bad else "pass"
    witnesses["a"] = f"negative constant {bad[0]}" if bad else "nonnegative by construction"

    # (b') convergence at a positive point, observed on the truncated expansion
    probe_pt = [1e-2] * nvars
    diags = [gs.eval(probe_pt) for gs in g_series]
    if all(d.flag == "converged" for d in diags):
        verdicts["b"] = "pass"
        witnesses["b"] = f"all G_i converged at {probe_pt[0]}"
    else:
        verdicts["b"] = "undecidable-at-truncation"
        witnesses["b"] = [d.flag for d in diags]

    # (c) G(0, y) = 0: every monomial must carry a positive power of x
    offender = None
    for i, gs in enumerate(g_series, start=1):
        for expt in gs.coeffs:
            if expt[0] == 0:
                offender = (i, expt)
                break
        if offender:
            break
    verdicts["c"] = "fail" if offender else "pass"
    witnesses["c"] = (
        f"G_{offender[0]} has an x-free monomial with y-exponents {offender[1][1:]}"
        if offender
        else None
    )

    # (d) G_i(x, 0) != 0 up to the probe order
    missing = []
    for i, gs in enumerate(g_series, start=1):
        if not any(all(e == 0 for e in expt[1:]) for expt in gs.coeffs):
            missing.append(i)
    if missing:
        verdicts["d"] = "undecidable-at-truncation"
        witnesses["d"] = f"no y-free monomial found in G_i for i in {missing}"
    else:
        verdicts["d"] = "pass"
        witnesses["d"] = None

    # (e) det(I - J_G(0,0)) != 0, exact in the constant terms
    j0 = [[Fraction(jac_series[i][j].constant_term()) for j in range(m)] for i in range(m)]
    det = _exact_det([[(1 if i == j else 0) - j0[i][j] for j in range(m)] for i in range(m)])
    verdicts["e"] = "pass" if det else "fail"
    witnesses["e"] = f"det(I - J_G(0,0)) = {det}"

    # (f) irreducibility: strong connectivity of the y-dependency digraph
    edges = {
        (i + 1, j + 1)
        for i in range(m)
        for j in range(m)
        if not jac_series[i][j].is_zero()
    }
    sc, comp = _strongly_connected(m, edges)
    verdicts["f"] = "pass" if sc else "undecidable-at-truncation"
    witnesses["f"] = {"edges": sorted(edges), "reachable_from_1": comp}

    # (g) some second y-partial is nonzero (nonlinearity)
    triple = None
    for i in range(m):
        for j in range(m):
            if jac_series[i][j].is_zero():
                continue
            for k in range(m):
                second = differentiate(jac[i][j], k + 1)
                if not expand(second, nvars, probe_order, env).is_zero():
                    triple = (i + 1, j + 1, k + 1)
                    break
            if triple:
                break
        if triple:
            break
    verdicts["g"] = "pass" if triple else "undecidable-at-truncation"
    witnesses["g"] = f"d2 G_{triple[0]} / dy_{triple[1]} dy_{triple[2]} != 0" if triple else None

    return ValidationReport(probe_order=probe_order, verdicts=verdicts, witnesses=witnesses)


def _exact_det(mat: list) -> Fraction:
    """Fraction-exact determinant by elimination; mat is modified locally."""
    m = len(mat)
    a = [[Fraction(v) for v in row] for row in mat]
    det = Fraction(1)
    for c in range(m):
        pivot = next((r for r in range(c, m) if a[r][c] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != c:
            a[c], a[pivot] = a[pivot], a[c]
            det = -det
        det *= a[c][c]
        inv = 1 / a[c][c]
        for r in range(c + 1, m):
            if a[r][c]:
                f = a[r][c] * inv
                for k in range(c, m):
                    a[r][k] -= f * a[c][k]
    return det
