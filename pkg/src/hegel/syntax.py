"""Abstract syntax: base types, qualifiers, refinement types, and terms.

Everything here is an immutable value type; the parser in `specfile` builds
these, and every other module consumes them.  Terms follow an A-normal-form
discipline: arguments and scrutinees are atomic, composite results are
let-bound with unique binders.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Union

# ---------------------------------------------------------------------------
# Base types


@dataclass(frozen=True)
class BPrim:
    name: str  # "int" | "bool" | "char" | "unit"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class BList:
    elem: "BaseType"

    def __str__(self) -> str:
        return f"[{self.elem}]"


@dataclass(frozen=True)
class BPair:
    first: "BaseType"
    second: "BaseType"

    def __str__(self) -> str:
        return f"({self.first}, {self.second})"


@dataclass(frozen=True)
class BVar:
    name: str

    def __str__(self) -> str:
        return self.name


BaseType = Union[BPrim, BList, BPair, BVar]

INT = BPrim("int")
BOOL = BPrim("bool")
CHAR = BPrim("char")
UNIT = BPrim("unit")


def base_type_vars(t: BaseType) -> set[str]:
    match t:
        case BVar(name):
            return {name}
        case BList(elem):
            return base_type_vars(elem)
        case BPair(a, b):
            return base_type_vars(a) | base_type_vars(b)
        case _:
            return set()


def apply_base_subst(t: BaseType, sub: Mapping[str, BaseType]) -> BaseType:
    match t:
        case BVar(name):
            return sub.get(name, t)
        case BList(elem):
            return BList(apply_base_subst(elem, sub))
        case BPair(a, b):
            return BPair(apply_base_subst(a, sub), apply_base_subst(b, sub))
        case _:
            return t


def unify_base(a: BaseType, b: BaseType, sub: Optional[dict[str, BaseType]] = None
               ) -> Optional[dict[str, BaseType]]:
    """First-order unification of erased type shapes.  Returns the extended
    substitution or None.  The input substitution is not mutated on failure."""
    sub = dict(sub) if sub else {}

    def walk(t: BaseType) -> BaseType:
        while isinstance(t, BVar) and t.name in sub:
            t = sub[t.name]
        return t

    def go(x: BaseType, y: BaseType) -> bool:
        x, y = walk(x), walk(y)
        if x == y:
            return True
        if isinstance(x, BVar):
            if x.name in base_type_vars(apply_base_subst(y, sub)):
                return False
            sub[x.name] = y
            return True
        if isinstance(y, BVar):
            return go(y, x)
        match x, y:
            case BList(e1), BList(e2):
                return go(e1, e2)
            case BPair(a1, b1), BPair(a2, b2):
                return go(a1, a2) and go(b1, b2)
            case _:
                return False

    if go(a, b):
        # fully resolve chains so callers can apply the result directly
        return {k: apply_base_subst(v, sub) for k, v in sub.items()}
    return None


# ---------------------------------------------------------------------------
# Qualifier expressions.
#
# A single expression grammar serves both integer positions (len(v) + 1) and
# boolean atoms (mem(u, v)); predicate declarations assign sorts.


@dataclass(frozen=True)
class EVar:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ELit:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class EBool:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class EAdd:
    lhs: "Expr"
    rhs: "Expr"

    def __str__(self) -> str:
        return f"{self.lhs} + {_atom_str(self.rhs)}"


@dataclass(frozen=True)
class ESub:
    lhs: "Expr"
    rhs: "Expr"

    def __str__(self) -> str:
        return f"{self.lhs} - {_atom_str(self.rhs)}"


@dataclass(frozen=True)
class EMul:
    factor: int
    arg: "Expr"

    def __str__(self) -> str:
        return f"{self.factor} * {_atom_str(self.arg)}"


@dataclass(frozen=True)
class EApp:
    """Application of a declared method predicate, e.g. len (v)."""

    name: str
    args: tuple["Expr", ...]

    def __str__(self) -> str:
        return f"{self.name} ({', '.join(str(a) for a in self.args)})"


Expr = Union[EVar, ELit, EBool, EAdd, ESub, EMul, EApp]


def _atom_str(e: Expr) -> str:
    if isinstance(e, (EAdd, ESub, EMul)):
        return f"({e})"
    return str(e)


def expr_free_vars(e: Expr) -> set[str]:
    match e:
        case EVar(name):
            return {name}
        case EAdd(l, r) | ESub(l, r):
            return expr_free_vars(l) | expr_free_vars(r)
        case EMul(_, a):
            return expr_free_vars(a)
        case EApp(_, args):
            out: set[str] = set()
            for a in args:
                out |= expr_free_vars(a)
            return out
        case _:
            return set()


def expr_subst(e: Expr, sub: Mapping[str, Expr]) -> Expr:
    match e:
        case EVar(name):
            return sub.get(name, e)
        case EAdd(l, r):
            return EAdd(expr_subst(l, sub), expr_subst(r, sub))
        case ESub(l, r):
            return ESub(expr_subst(l, sub), expr_subst(r, sub))
        case EMul(k, a):
            return EMul(k, expr_subst(a, sub))
        case EApp(name, args):
            return EApp(name, tuple(expr_subst(a, sub) for a in args))
        case _:
            return e


# ---------------------------------------------------------------------------
# Qualifiers (first-order formulas)

REL_OPS = ("=", "<>", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class QTrue:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class QFalse:
    def __str__(self) -> str:
        return "false"


@dataclass(frozen=True)
class Rel:
    op: str
    lhs: Expr
    rhs: Expr

    def __str__(self) -> str:
        return f"{self.lhs} {self.op} {self.rhs}"


@dataclass(frozen=True)
class Atom:
    """A boolean-sorted expression used as a formula (a bool variable or a
    boolean predicate application)."""

    expr: Expr

    def __str__(self) -> str:
        return str(self.expr)


@dataclass(frozen=True)
class Not:
    arg: "Qualifier"

    def __str__(self) -> str:
        return f"not ({self.arg})"


@dataclass(frozen=True)
class And:
    lhs: "Qualifier"
    rhs: "Qualifier"

    def __str__(self) -> str:
        return f"{_q_str(self.lhs)} /\\ {_q_str(self.rhs)}"


@dataclass(frozen=True)
class Or:
    lhs: "Qualifier"
    rhs: "Qualifier"

    def __str__(self) -> str:
        return f"{_q_str(self.lhs)} \\/ {_q_str(self.rhs)}"


@dataclass(frozen=True)
class Implies:
    lhs: "Qualifier"
    rhs: "Qualifier"

    def __str__(self) -> str:
        return f"{_q_str(self.lhs)} => {_q_str(self.rhs)}"


@dataclass(frozen=True)
class Iff:
    lhs: "Qualifier"
    rhs: "Qualifier"

    def __str__(self) -> str:
        return f"{_q_str(self.lhs)} <=> {_q_str(self.rhs)}"


@dataclass(frozen=True)
class Quant:
    """forall/exists (x : T). body"""

    kind: str  # "forall" | "exists"
    var: str
    sort: BaseType
    body: "Qualifier"

    def __str__(self) -> str:
        return f"{self.kind} ({self.var} : {self.sort}). {self.body}"


@dataclass(frozen=True)
class RefVar:
    """A refinement-predicate placeholder awaiting instantiation."""

    name: str

    def __str__(self) -> str:
        return self.name


Qualifier = Union[QTrue, QFalse, Rel, Atom, Not, And, Or, Implies, Iff, Quant, RefVar]

TRUE = QTrue()
FALSE = QFalse()


def _q_str(q: Qualifier) -> str:
    if isinstance(q, (And, Or, Implies, Iff, Quant)):
        return f"({q})"
    return str(q)


def conj(parts: list[Qualifier]) -> Qualifier:
    """Balanced conjunction (keeps recursion depth logarithmic)."""
    parts = [p for p in parts if not isinstance(p, QTrue)]
    if not parts:
        return TRUE
    while len(parts) > 1:
        nxt = []
        for i in range(0, len(parts) - 1, 2):
            nxt.append(And(parts[i], parts[i + 1]))
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def conjuncts(q: Qualifier) -> list[Qualifier]:
    if isinstance(q, And):
        return conjuncts(q.lhs) + conjuncts(q.rhs)
    if isinstance(q, QTrue):
        return []
    return [q]


def qual_free_vars(q: Qualifier) -> set[str]:
    match q:
        case Rel(_, l, r):
            return expr_free_vars(l) | expr_free_vars(r)
        case Atom(e):
            return expr_free_vars(e)
        case Not(a):
            return qual_free_vars(a)
        case And(l, r) | Or(l, r) | Implies(l, r) | Iff(l, r):
            return qual_free_vars(l) | qual_free_vars(r)
        case Quant(_, v, _, body):
            return qual_free_vars(body) - {v}
        case _:
            return set()


_fresh_counter = itertools.count()


def fresh_name(stem: str) -> str:
    return f"{stem}%{next(_fresh_counter)}"


def qual_subst(q: Qualifier, sub: Mapping[str, Expr | str]) -> Qualifier:
    """Capture-avoiding substitution of free names by names or expressions.

    Idempotent on names absent from `q`; quantifier binders are freshened
    when they collide with names introduced by the substitution.
    """
    esub: dict[str, Expr] = {}
    for k, v in sub.items():
        esub[k] = EVar(v) if isinstance(v, str) else v

    introduced: set[str] = set()
    for v in esub.values():
        introduced |= expr_free_vars(v)

    def go(q: Qualifier, esub: Mapping[str, Expr]) -> Qualifier:
        match q:
            case Rel(op, l, r):
                return Rel(op, expr_subst(l, esub), expr_subst(r, esub))
            case Atom(e):
                return Atom(expr_subst(e, esub))
            case Not(a):
                return Not(go(a, esub))
            case And(l, r):
                return And(go(l, esub), go(r, esub))
            case Or(l, r):
                return Or(go(l, esub), go(r, esub))
            case Implies(l, r):
                return Implies(go(l, esub), go(r, esub))
            case Iff(l, r):
                return Iff(go(l, esub), go(r, esub))
            case Quant(kind, v, sort, body):
                inner = {k: e for k, e in esub.items() if k != v}
                if not inner:
                    return q
                if v in introduced:
                    v2 = fresh_name(v.split("%")[0])
                    body = go(body, {v: EVar(v2)})
                    return Quant(kind, v2, sort, go(body, inner))
                return Quant(kind, v, sort, go(body, inner))
            case _:
                return q

    return go(q, esub)


def qual_subst_refvars(q: Qualifier, sub: Mapping[str, Qualifier]) -> Qualifier:
    match q:
        case RefVar(name):
            return sub.get(name, q)
        case Not(a):
            return Not(qual_subst_refvars(a, sub))
        case And(l, r):
            return And(qual_subst_refvars(l, sub), qual_subst_refvars(r, sub))
        case Or(l, r):
            return Or(qual_subst_refvars(l, sub), qual_subst_refvars(r, sub))
        case Implies(l, r):
            return Implies(qual_subst_refvars(l, sub), qual_subst_refvars(r, sub))
        case Iff(l, r):
            return Iff(qual_subst_refvars(l, sub), qual_subst_refvars(r, sub))
        case Quant(kind, v, sort, body):
            return Quant(kind, v, sort, qual_subst_refvars(body, sub))
        case _:
            return q


def qual_refvars(q: Qualifier) -> set[str]:
    match q:
        case RefVar(name):
            return {name}
        case Not(a):
            return qual_refvars(a)
        case And(l, r) | Or(l, r) | Implies(l, r) | Iff(l, r):
            return qual_refvars(l) | qual_refvars(r)
        case Quant(_, _, _, body):
            return qual_refvars(body)
        case _:
            return set()


# ---------------------------------------------------------------------------
# Refinement types
#
# Base refinements store their qualifier over the reserved value variable
# VALUE_VAR; the display binder (the `v` of `{v : t | phi}`, or the argument
# name when the type sits in argument position) is kept alongside for
# printing and for name-level substitutions between automaton positions.

VALUE_VAR = "%v"


@dataclass(frozen=True)
class RBase:
    binder: str
    base: BaseType
    qual: Qualifier  # over VALUE_VAR, binder names appear only via positions

    def __str__(self) -> str:
        q = qual_subst(self.qual, {VALUE_VAR: self.binder})
        return f"{{{self.binder} : {self.base} | {q}}}"


@dataclass(frozen=True)
class RArrow:
    arg_name: str
    arg_type: "RefinementType"
    result: "RefinementType"

    def __str__(self) -> str:
        return f"({self.arg_name} : {self.arg_type}) -> {self.result}"


@dataclass(frozen=True)
class RForallTy:
    ty_var: str
    body: "RefinementType"

    def __str__(self) -> str:
        return f"forall {self.ty_var}. {self.body}"


@dataclass(frozen=True)
class RForallPred:
    pred_var: str
    sort: BaseType
    body: "RefinementType"

    def __str__(self) -> str:
        return f"forall ({self.pred_var} : {self.sort}). {self.body}"


RefinementType = Union[RBase, RArrow, RForallTy, RForallPred]


def erase(ty: RefinementType) -> BaseType | tuple:
    """Erased shape of a refinement type; arrows erase to ("->", in, out)."""
    match ty:
        case RBase(_, base, _):
            return base
        case RArrow(_, a, r):
            return ("->", erase(a), erase(r))
        case RForallTy(_, body) | RForallPred(_, _, body):
            return erase(body)


def strip_quantifiers(ty: RefinementType) -> tuple[list[tuple[str, str, BaseType | None]], RefinementType]:
    """Peel RForallTy/RForallPred binders; returns ([(kind, name, sort)], core)."""
    binders: list[tuple[str, str, BaseType | None]] = []
    while True:
        match ty:
            case RForallTy(v, body):
                binders.append(("ty", v, None))
                ty = body
            case RForallPred(v, sort, body):
                binders.append(("pred", v, sort))
                ty = body
            case _:
                return binders, ty


def arrow_args(ty: RefinementType) -> tuple[list[tuple[str, RefinementType]], RefinementType]:
    """Uncurry: ([(arg_name, arg_type), ...], final result type)."""
    args: list[tuple[str, RefinementType]] = []
    _, core = strip_quantifiers(ty)
    while isinstance(core, RArrow):
        args.append((core.arg_name, core.arg_type))
        core = core.result
    return args, core


def type_subst_names(ty: RefinementType, sub: Mapping[str, Expr | str]) -> RefinementType:
    """Substitute free (non-binder) names inside every qualifier of `ty`."""
    match ty:
        case RBase(b, base, q):
            return RBase(b, base, qual_subst(q, sub))
        case RArrow(n, a, r):
            inner = {k: v for k, v in sub.items() if k != n}
            return RArrow(n, type_subst_names(a, sub), type_subst_names(r, inner))
        case RForallTy(v, body):
            return RForallTy(v, type_subst_names(body, sub))
        case RForallPred(v, s, body):
            return RForallPred(v, s, type_subst_names(body, sub))


def type_subst_base(ty: RefinementType, sub: Mapping[str, BaseType]) -> RefinementType:
    match ty:
        case RBase(b, base, q):
            return RBase(b, apply_base_subst(base, sub), q)
        case RArrow(n, a, r):
            return RArrow(n, type_subst_base(a, sub), type_subst_base(r, sub))
        case RForallTy(v, body):
            inner = {k: t for k, t in sub.items() if k != v}
            return RForallTy(v, type_subst_base(body, inner))
        case RForallPred(v, s, body):
            return RForallPred(v, s, type_subst_base(body, sub))


def type_subst_refvars(ty: RefinementType, sub: Mapping[str, Qualifier]) -> RefinementType:
    match ty:
        case RBase(b, base, q):
            return RBase(b, base, qual_subst_refvars(q, sub))
        case RArrow(n, a, r):
            return RArrow(n, type_subst_refvars(a, sub), type_subst_refvars(r, sub))
        case RForallTy(v, body):
            return RForallTy(v, type_subst_refvars(body, sub))
        case RForallPred(v, s, body):
            inner = {k: q for k, q in sub.items() if k != v}
            return RForallPred(v, s, type_subst_refvars(body, inner))


def trivial(base: BaseType, binder: str = "v") -> RBase:
    return RBase(binder, base, TRUE)


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    value: object  # int | bool | "nil" | "unit"
    base: BaseType

    def __str__(self) -> str:
        if isinstance(self.value, bool):
            return "true" if self.value else "false"
        if self.value == "nil":
            return "[]"
        if self.value == "unit":
            return "()"
        return str(self.value)


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"


@dataclass(frozen=True)
class TyApp:
    fn: "Term"
    ty: BaseType


@dataclass(frozen=True)
class If:
    cond: "Term"
    then: "Term"
    orelse: "Term"


@dataclass(frozen=True)
class Let:
    name: str
    bound: "Term"
    body: "Term"


@dataclass(frozen=True)
class Lam:
    arg: str
    arg_type: Optional[RefinementType]
    body: "Term"


Term = Union[Var, Const, App, TyApp, If, Let, Lam]


def subterms(t: Term) -> Iterator[Term]:
    yield t
    match t:
        case App(f, a):
            yield from subterms(f)
            yield from subterms(a)
        case TyApp(f, _):
            yield from subterms(f)
        case If(c, a, b):
            yield from subterms(c)
            yield from subterms(a)
            yield from subterms(b)
        case Let(_, bound, body):
            yield from subterms(bound)
            yield from subterms(body)
        case Lam(_, _, body):
            yield from subterms(body)


def spine(t: Term) -> tuple[Term, list[Term]]:
    """Decompose an application spine into (head, args)."""
    args: list[Term] = []
    while True:
        match t:
            case App(f, a):
                args.append(a)
                t = f
            case TyApp(f, _):
                t = f
            case _:
                return t, list(reversed(args))


def call_count(t: Term, library_names: set[str], lets: Optional[dict[str, Term]] = None) -> int:
    """Number of library-function invocations: application spines whose head
    resolves (through let aliases) to a library component name."""
    lets = dict(lets) if lets else {}

    def resolve(h: Term) -> Term:
        while isinstance(h, Var) and h.name in lets:
            h = lets[h.name]
        return h

    match t:
        case App():
            head, args = spine(t)
            head = resolve(head)
            n = 1 if isinstance(head, Var) and head.name in library_names else 0
            return n + sum(call_count(a, library_names, lets) for a in args) + (
                call_count(head, library_names, lets) if not isinstance(head, (Var, Const)) else 0)
        case If(c, a, b):
            return sum(call_count(x, library_names, lets) for x in (c, a, b))
        case Let(name, bound, body):
            n = call_count(bound, library_names, lets)
            lets2 = dict(lets)
            lets2[name] = bound
            return n + call_count(body, library_names, lets2)
        case Lam(_, _, body):
            return call_count(body, library_names, lets)
        case TyApp(f, _):
            return call_count(f, library_names, lets)
        case _:
            return 0


def resolve_alias(t: Term, lets: Mapping[str, Term]) -> Term:
    while isinstance(t, Var) and t.name in lets:
        t = lets[t.name]
    return t


def anf_valid(t: Term) -> bool:
    """ANF checker: App arguments and If scrutinees are atomic (Var/Const),
    application spines are otherwise headed by atoms, every Let binder is
    distinct, and composite subterms appear only as let-bound right-hand
    sides or at tail position."""
    binders: list[str] = []

    def atomic(x: Term) -> bool:
        return isinstance(x, (Var, Const))

    def ok_spine(x: Term) -> bool:
        head, args = spine(x)
        return atomic(head) and all(atomic(a) for a in args)

    def ok(x: Term, tail: bool) -> bool:
        match x:
            case Var() | Const():
                return True
            case App():
                return ok_spine(x)
            case TyApp(f, _):
                return ok(f, tail)
            case If(c, a, b):
                return atomic(c) and ok(a, True) and ok(b, True)
            case Let(name, bound, body):
                binders.append(name)
                return ok(bound, False) and not isinstance(bound, (Let, Lam)) and ok(body, True)
            case Lam(_, _, body):
                return tail and ok(body, True)
        return False

    if not ok(t, True):
        return False
    return len(binders) == len(set(binders))


def let_normalize(t: Term, prefix: str = "t") -> Term:
    """Rewrite a nested term into ANF with fresh, deterministic let binders."""
    counter = itertools.count()
    lets: list[tuple[str, Term]] = []

    def atomize(x: Term) -> Term:
        x = norm(x)
        if isinstance(x, (Var, Const)):
            return x
        name = f"{prefix}{next(counter)}"
        lets.append((name, x))
        return Var(name)

    def norm(x: Term) -> Term:
        match x:
            case App(f, a):
                head, args = spine(x)
                head_n = head if isinstance(head, (Var, Const)) else atomize(head)
                out: Term = head_n
                for arg in args:
                    out = App(out, atomize(arg))
                return out
            case If(c, a, b):
                return If(atomize(c), wrap(a), wrap(b))
            case TyApp(f, ty):
                return TyApp(norm(f), ty)
            case Let(name, bound, body):
                lets.append((name, norm(bound)))
                return norm(body)
            case Lam(arg, ty, body):
                return Lam(arg, ty, wrap(body))
            case _:
                return x

    def wrap(x: Term) -> Term:
        nonlocal lets
        saved, lets = lets, []
        out = norm(x)
        mine, lets = lets, saved
        for name, bound in reversed(mine):
            out = Let(name, bound, out)
        return out

    return wrap(t)


def inline_lets(t: Term) -> Term:
    """Inline every let binding; inverse view of `let_normalize` for
    alpha-comparison of solutions."""

    def go(x: Term, env: dict[str, Term]) -> Term:
        match x:
            case Var(name):
                return env.get(name, x)
            case App(f, a):
                return App(go(f, env), go(a, env))
            case TyApp(f, ty):
                return TyApp(go(f, env), ty)
            case If(c, a, b):
                return If(go(c, env), go(a, env), go(b, env))
            case Let(name, bound, body):
                env2 = dict(env)
                env2[name] = go(bound, env)
                return go(body, env2)
            case Lam(arg, ty, body):
                env2 = {k: v for k, v in env.items() if k != arg}
                return Lam(arg, ty, go(body, env2))
            case _:
                return x

    return go(t, {})


def alpha_equivalent(a: Term, b: Term) -> bool:
    """Structural equality modulo bound-variable names (lets inlined first)."""

    def go(x: Term, y: Term, env: dict[str, str]) -> bool:
        match x, y:
            case Var(n1), Var(n2):
                return env.get(n1, n1) == n2
            case Const(v1, b1), Const(v2, b2):
                return x == y
            case App(f1, a1), App(f2, a2):
                return go(f1, f2, env) and go(a1, a2, env)
            case TyApp(f1, _), TyApp(f2, _):
                return go(f1, f2, env)
            case If(c1, t1, e1), If(c2, t2, e2):
                return go(c1, c2, env) and go(t1, t2, env) and go(e1, e2, env)
            case Lam(x1, _, b1), Lam(x2, _, b2):
                env2 = dict(env)
                env2[x1] = x2
                return go(b1, b2, env2)
            case _:
                return False

    return go(inline_lets(a), inline_lets(b), {})


# ---------------------------------------------------------------------------
# Libraries and queries


class SpecError(Exception):
    pass


class DuplicateComponent(SpecError):
    pass


class UnknownPredicate(SpecError):
    pass


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    arg_sorts: tuple[BaseType, ...]
    result: BaseType  # INT or BOOL


@dataclass
class Library:
    components: list[tuple[str, RefinementType]] = field(default_factory=list)
    predicates: list[PredicateDecl] = field(default_factory=list)
    axioms: list[Qualifier] = field(default_factory=list)

    @property
    def type_context(self) -> dict[str, RefinementType]:
        return dict(self.components)

    def predicate(self, name: str) -> Optional[PredicateDecl]:
        for p in self.predicates:
            if p.name == name:
                return p
        return None

    def names(self) -> set[str]:
        return {n for n, _ in self.components}


@dataclass
class Query:
    args: list[tuple[str, RefinementType]]
    result: RefinementType  # RBase

    def as_type(self) -> RefinementType:
        ty: RefinementType = self.result
        for name, aty in reversed(self.args):
            ty = RArrow(name, aty, ty)
        return ty
