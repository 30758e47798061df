"""Deterministic, re-parseable rendering of types, qualifiers, and terms."""

from __future__ import annotations

from .syntax import (
    And, App, Atom, BaseType, BList, BPair, BPrim, BVar, Const, EAdd, EApp,
    EBool, ELit, EMul, ESub, EVar, Expr, If, Iff, Implies, Lam, Let, Not, Or,
    QFalse, QTrue, Quant, Qualifier, RArrow, RBase, RefVar, RefinementType,
    RForallPred, RForallTy, Rel, Term, TyApp, VALUE_VAR, Var, qual_subst, spine,
)


def pretty_base(t: BaseType) -> str:
    match t:
        case BPrim(name):
            return name
        case BList(elem):
            return f"[{pretty_base(elem)}]"
        case BPair(a, b):
            return f"({pretty_base(a)}, {pretty_base(b)})"
        case BVar(name):
            return name
    raise TypeError(t)


def pretty_expr(e: Expr, parens: bool = False) -> str:
    match e:
        case EVar(name):
            return name
        case ELit(v):
            return str(v) if v >= 0 or not parens else f"({v})"
        case EBool(v):
            return "true" if v else "false"
        case EAdd(l, r):
            s = f"{pretty_expr(l)} + {pretty_expr(r, True)}"
        case ESub(l, r):
            s = f"{pretty_expr(l)} - {pretty_expr(r, True)}"
        case EMul(k, a):
            s = f"{k} * {pretty_expr(a, True)}"
        case EApp(name, args):
            return f"{name} ({', '.join(pretty_expr(a) for a in args)})"
        case _:
            raise TypeError(e)
    return f"({s})" if parens else s


def pretty_qual(q: Qualifier, prec: int = 0) -> str:
    # precedence: 1 iff, 2 implies, 3 or, 4 and, 5 not/atoms
    def wrap(s: str, level: int) -> str:
        return f"({s})" if level < prec else s

    match q:
        case QTrue():
            return "true"
        case QFalse():
            return "false"
        case Rel(op, l, r):
            return f"{pretty_expr(l)} {op} {pretty_expr(r)}"
        case Atom(e):
            return pretty_expr(e)
        case Not(a):
            return f"not {pretty_qual(a, 5)}"
        case And(l, r):
            return wrap(f"{pretty_qual(l, 4)} /\\ {pretty_qual(r, 4)}", 4)
        case Or(l, r):
            return wrap(f"{pretty_qual(l, 3)} \\/ {pretty_qual(r, 3)}", 3)
        case Implies(l, r):
            return wrap(f"{pretty_qual(l, 3)} => {pretty_qual(r, 2)}", 2)
        case Iff(l, r):
            return wrap(f"{pretty_qual(l, 2)} <=> {pretty_qual(r, 2)}", 1)
        case Quant(kind, v, sort, body):
            return wrap(f"{kind} ({v} : {pretty_base(sort)}). {pretty_qual(body, 1)}", 1)
        case RefVar(name):
            return name
    raise TypeError(q)


def pretty_type(ty: RefinementType) -> str:
    match ty:
        case RBase(binder, base, qual):
            if isinstance(qual, QTrue):
                return pretty_base(base)
            shown = qual_subst(qual, {VALUE_VAR: binder})
            return f"{{{binder} : {pretty_base(base)} | {pretty_qual(shown)}}}"
        case RArrow(name, arg, res):
            return f"({name} : {pretty_type(arg)}) -> {pretty_type(res)}"
        case RForallTy(v, body):
            return f"forall {v}. {pretty_type(body)}"
        case RForallPred(v, sort, body):
            return f"forall ({v} : {pretty_base(sort)}). {pretty_type(body)}"
    raise TypeError(ty)


def _atom_term(t: Term) -> str:
    s = pretty_term(t)
    if isinstance(t, (Var, Const)):
        return s
    return f"({s})"


def pretty_term(t: Term) -> str:
    match t:
        case Var(name):
            return name
        case Const():
            return str(t)
        case App():
            head, args = spine(t)
            return " ".join([_atom_term(head)] + [_atom_term(a) for a in args])
        case TyApp(f, _):
            return pretty_term(f)
        case If(c, a, b):
            return f"if {_atom_term(c)} then {pretty_term(a)} else {pretty_term(b)}"
        case Let(name, bound, body):
            return f"let {name} = {pretty_term(bound)} in {pretty_term(body)}"
        case Lam():
            args = []
            body: Term = t
            while isinstance(body, Lam):
                args.append(body.arg)
                body = body.body
            return f"fun {' '.join(args)} -> {pretty_term(body)}"
    raise TypeError(t)


def pretty(obj) -> str:
    """Render a term, type, qualifier, base type, or library/query to its
    surface syntax."""
    from .syntax import Library, Query

    if isinstance(obj, (Var, Const, App, TyApp, If, Let, Lam)):
        return pretty_term(obj)
    if isinstance(obj, (RBase, RArrow, RForallTy, RForallPred)):
        return pretty_type(obj)
    if isinstance(obj, (BPrim, BList, BPair, BVar)):
        return pretty_base(obj)
    if isinstance(obj, Library):
        lines = []
        for p in obj.predicates:
            sorts = " * ".join(pretty_base(s) for s in p.arg_sorts)
            lines.append(f"pred {p.name} : {sorts} -> {pretty_base(p.result)}")
        for ax in obj.axioms:
            lines.append(f"axiom {pretty_qual(ax)}")
        for name, ty in obj.components:
            lines.append(f"{name} : {pretty_type(ty)}")
        return "\n".join(lines) + ("\n" if lines else "")
    if isinstance(obj, Query):
        return f"goal : {pretty_type(obj.as_type())}\n"
    return pretty_qual(obj)
