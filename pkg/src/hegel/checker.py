"""Independent correctness oracles.

A standalone refinement type checker over terms (bidirectional, with
path-sensitive conditionals and unification-driven instantiation) and a
brute-force enumerator of well-typed compositions.  Neither touches the
automaton machinery: the engine's results are validated against these.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .entailment import EntailmentQuery, Oracle
from .syntax import (
    And, App, Atom, BOOL, BaseType, BList, BVar, Const, EApp, EBool, ELit,
    EVar, Expr, If, INT, Lam, Let, Library, Not, Or, Qualifier, QTrue, Query,
    RArrow, RBase, RefVar, RefinementType, Rel, TRUE, Term, TyApp, UNIT,
    VALUE_VAR, Var, anf_valid, apply_base_subst, call_count, erase,
    qual_subst, strip_quantifiers, trivial, type_subst_base, type_subst_names,
    type_subst_refvars, unify_base,
)
from .construct import erased_shape, unify_shape


class CapExceeded(Exception):
    pass


@dataclass
class CheckContext:
    bindings: list[tuple[str, RefinementType]] = field(default_factory=list)
    path_conditions: list[Qualifier] = field(default_factory=list)

    def lookup(self, name: str) -> Optional[RefinementType]:
        for n, ty in reversed(self.bindings):
            if n == name:
                return ty
        return None

    def extended(self, name: str, ty: RefinementType) -> "CheckContext":
        return CheckContext(self.bindings + [(name, ty)], list(self.path_conditions))

    def assuming(self, q: Qualifier) -> "CheckContext":
        return CheckContext(list(self.bindings), self.path_conditions + [q])

    def as_entailment_context(self) -> tuple:
        return tuple(self.bindings) + tuple(self.path_conditions)


def _const_refinement(c: Const) -> RefinementType:
    if isinstance(c.value, bool):
        q: Qualifier = Atom(EVar(VALUE_VAR)) if c.value else Not(Atom(EVar(VALUE_VAR)))
        return RBase("v", BOOL, q)
    if isinstance(c.value, int):
        return RBase("v", INT, Rel("=", EVar(VALUE_VAR), ELit(c.value)))
    if c.value == "nil":
        return RBase("v", c.base, Rel("=", EApp("len", (EVar(VALUE_VAR),)), ELit(0)))
    return RBase("v", UNIT, TRUE)


def _atom_expr(t: Term) -> Optional[Expr]:
    match t:
        case Var(name):
            return EVar(name)
        case Const(value, _):
            if isinstance(value, bool):
                return EBool(value)
            if isinstance(value, int):
                return ELit(value)
            return None
    return None


def subtype_check(ctx: CheckContext, ty1: RefinementType, ty2: RefinementType,
                  oracle: Oracle) -> bool:
    """Decidable subtyping: equal erased bases with oracle-valid qualifier
    implication, contravariant arrows (the stronger argument bound in scope
    for the result comparison), quantifiers by body comparison."""
    _, c1 = strip_quantifiers(ty1)
    _, c2 = strip_quantifiers(ty2)
    if isinstance(c1, RBase) and isinstance(c2, RBase):
        if c1.base != c2.base:
            return False
        if isinstance(c2.qual, QTrue):
            return True
        q = EntailmentQuery.make(
            context=ctx.as_entailment_context(), subst={},
            antecedent=c1.qual, consequent=c2.qual, value_sort=c1.base)
        return oracle.check_entailment(q).is_valid
    if isinstance(c1, RArrow) and isinstance(c2, RArrow):
        if not subtype_check(ctx, c2.arg_type, c1.arg_type, oracle):
            return False
        res2 = type_subst_names(c2.result, {c2.arg_name: c1.arg_name})
        ctx2 = ctx.extended(c1.arg_name, c2.arg_type)
        return subtype_check(ctx2, c1.result, res2, oracle)
    return False


def _synthesize(ctx: CheckContext, t: Term, oracle: Oracle,
                lets: dict[str, RefinementType]) -> Optional[RefinementType]:
    match t:
        case Var(name):
            ty = lets.get(name) or ctx.lookup(name)
            return ty
        case Const():
            return _const_refinement(t)
        case App(fn, arg):
            fn_ty = _synthesize(ctx, fn, oracle, lets)
            if fn_ty is None:
                return None
            binders, core = strip_quantifiers(fn_ty)
            if not isinstance(core, RArrow):
                return None
            arg_ty = _synthesize(ctx, arg, oracle, lets)
            if arg_ty is None:
                return None
            _, arg_core = strip_quantifiers(arg_ty)
            inst = unify_shape(erased_shape(core.arg_type), erased_shape(arg_core))
            if inst is None:
                return None
            formal = type_subst_base(core.arg_type, inst)
            # abstract refinement parameters instantiate from the actual
            pred_params = {n for k, n, _ in binders if k == "pred"}
            m_kappa: dict[str, Qualifier] = {}
            _, fcore = strip_quantifiers(formal)
            if pred_params and isinstance(fcore, RBase) and isinstance(fcore.qual, RefVar) \
                    and fcore.qual.name in pred_params and isinstance(arg_core, RBase):
                m_kappa[fcore.qual.name] = arg_core.qual
                formal = type_subst_refvars(formal, m_kappa)
            if not subtype_check(ctx, arg_core, formal, oracle):
                return None
            result = type_subst_base(core.result, inst)
            if m_kappa:
                result = type_subst_refvars(result, m_kappa)
            actual = _atom_expr(arg)
            if actual is None:
                return None  # ANF precondition violated
            return type_subst_names(result, {core.arg_name: actual})
        case TyApp(fn, _):
            return _synthesize(ctx, fn, oracle, lets)
        case Let(name, bound, body):
            bound_ty = _synthesize(ctx, bound, oracle, lets)
            if bound_ty is None:
                return None
            lets2 = dict(lets)
            lets2[name] = bound_ty
            return _synthesize(ctx.extended(name, bound_ty), t.body, oracle, lets2)
    return None


def _path_condition(cond: Term, cond_ty: RefinementType, positive: bool) -> Qualifier:
    val = _atom_expr(cond)
    parts: list[Qualifier] = []
    if isinstance(cond_ty, RBase) and not isinstance(cond_ty.qual, QTrue) and val is not None:
        parts.append(qual_subst(cond_ty.qual, {VALUE_VAR: val}))
    if val is not None and not isinstance(val, EBool):
        truth: Qualifier = Atom(val)
        parts.append(truth if positive else Not(truth))
    out: Qualifier = TRUE
    for p in parts:
        out = p if isinstance(out, QTrue) else And(out, p)
    return out


def type_check(ctx: CheckContext, t: Term, expected: RefinementType,
               oracle: Oracle) -> bool:
    """Bidirectional check of an ANF term against an expected type."""

    def check(ctx: CheckContext, t: Term, expected: RefinementType,
              lets: dict[str, RefinementType]) -> bool:
        match t:
            case If(cond, then, orelse):
                cond_ty = _synthesize(ctx, cond, oracle, lets)
                if cond_ty is None:
                    return False
                _, cc = strip_quantifiers(cond_ty)
                if not (isinstance(cc, RBase) and cc.base == BOOL):
                    return False
                then_ok = check(ctx.assuming(_path_condition(cond, cc, True)),
                                then, expected, lets)
                else_ok = check(ctx.assuming(_path_condition(cond, cc, False)),
                                orelse, expected, lets)
                return then_ok and else_ok
            case Let(name, bound, body):
                bound_ty = _synthesize(ctx, bound, oracle, lets)
                if bound_ty is None:
                    return False
                lets2 = dict(lets)
                lets2[name] = bound_ty
                return check(ctx.extended(name, bound_ty), body, expected, lets2)
            case Lam(arg, _, body):
                _, ecore = strip_quantifiers(expected)
                if not isinstance(ecore, RArrow):
                    return False
                arg_ty = ecore.arg_type
                if isinstance(arg_ty, RBase):
                    arg_ty = RBase(arg, arg_ty.base, arg_ty.qual)
                res = type_subst_names(ecore.result, {ecore.arg_name: arg})
                return check(ctx.extended(arg, arg_ty), body, res, lets)
            case _:
                got = _synthesize(ctx, t, oracle, lets)
                if got is None:
                    return False
                _, gcore = strip_quantifiers(got)
                _, ecore = strip_quantifiers(expected)
                # polymorphic result: instantiate free type variables of the
                # synthesized type against the expected shape
                inst = unify_shape(erased_shape(gcore), erased_shape(ecore))
                if inst:
                    gcore = type_subst_base(gcore, inst)
                return subtype_check(ctx, gcore, ecore, oracle)

    return check(ctx, t, expected, {})


# ---------------------------------------------------------------------------
# Brute-force enumeration


@dataclass(frozen=True)
class _Cand:
    term: Term
    ty: RefinementType
    size: int  # library-call count
    if_depth: int = 0


def _context_of(lib: Library, query: Query) -> CheckContext:
    ctx = CheckContext()
    for name, ty in lib.components:
        ctx.bindings.append((name, ty))
    for name, ty in query.args:
        shown = ty
        if isinstance(shown, RBase):
            shown = RBase(name, shown.base, shown.qual)
        ctx.bindings.append((name, shown))
    return ctx


def brute_force_synthesize(lib: Library, query: Query, k: int, oracle: Oracle,
                           literals: Sequence[object] = (),
                           enable_if: bool = True, max_if_depth: int = 1,
                           component_cap: int = 8, pool_cap: int = 60000,
                           max_terms: Optional[int] = None) -> list[Term]:
    """All ANF-normalizable compositions of at most `k` library calls that
    check against the query, in deterministic (size, construction) order.
    Exponential by design; guarded by `component_cap`/`pool_cap`."""
    if len(lib.components) > component_cap:
        raise CapExceeded(f"library too large for brute force: {len(lib.components)}")
    ctx = _context_of(lib, query)

    atoms: list[_Cand] = []
    for name, ty in query.args:
        shown = ty
        if isinstance(shown, RBase):
            shown = RBase(name, shown.base, shown.qual)
        atoms.append(_Cand(Var(name), shown, 0))
    for name, ty in lib.components:
        atoms.append(_Cand(Var(name), ty, 0))
    for lit in literals:
        if isinstance(lit, bool):
            c = Const(lit, BOOL)
        elif isinstance(lit, int):
            c = Const(lit, INT)
        elif lit == "nil":
            c = Const("nil", BList(BVar("%nil")))
        else:
            c = Const("unit", UNIT)
        atoms.append(_Cand(c, _const_refinement(c), 0))

    pool: list[_Cand] = list(atoms)
    seen: set[str] = {str(c.term) for c in pool}

    def add(c: _Cand) -> None:
        key = str(c.term)
        if key in seen:
            return
        if len(pool) > pool_cap:
            raise CapExceeded("candidate pool overflow")
        seen.add(key)
        pool.append(c)

    lib_names = lib.names()

    def try_apply(head: _Cand, arg: _Cand) -> Optional[_Cand]:
        term = App(head.term, arg.term)
        # starting a new spine on a library component costs one call;
        # extending a spine or applying a non-library function costs none
        new_call = 1 if isinstance(head.term, Var) and head.term.name in lib_names else 0
        size = head.size + arg.size + new_call
        if size > k:
            return None
        ty = _app_type(head.ty, arg, term)
        if ty is None:
            return None
        return _Cand(term, ty, size, max(head.if_depth, arg.if_depth))

    def _app_type(fn_ty: RefinementType, arg: _Cand, term: Term) -> Optional[RefinementType]:
        binders, core = strip_quantifiers(fn_ty)
        if not isinstance(core, RArrow):
            return None
        _, arg_core = strip_quantifiers(arg.ty)
        inst = unify_shape(erased_shape(core.arg_type), erased_shape(arg_core))
        if inst is None:
            return None
        formal = type_subst_base(core.arg_type, inst)
        pred_params = {n for kk, n, _ in binders if kk == "pred"}
        m_kappa: dict[str, Qualifier] = {}
        _, fcore = strip_quantifiers(formal)
        if pred_params and isinstance(fcore, RBase) and isinstance(fcore.qual, RefVar) \
                and fcore.qual.name in pred_params and isinstance(arg_core, RBase):
            m_kappa[fcore.qual.name] = arg_core.qual
            formal = type_subst_refvars(formal, m_kappa)
        if not subtype_check(ctx, arg_core, formal, oracle):
            return None
        result = type_subst_base(core.result, inst)
        if m_kappa:
            result = type_subst_refvars(result, m_kappa)
        actual = _atom_expr(arg.term)
        if actual is None:
            actual = EVar(f"b{abs(hash(str(arg.term))) % 10 ** 6}")
        return type_subst_names(result, {core.arg_name: actual})

    # saturate: repeat k rounds of spine growth over the pool
    for _ in range(2 * k + 1):
        snapshot = list(pool)
        grown = False
        for head in snapshot:
            _, hc = strip_quantifiers(head.ty)
            if not isinstance(hc, RArrow):
                continue
            for arg in snapshot:
                c = try_apply(head, arg)
                if c is not None and str(c.term) not in seen:
                    add(c)
                    grown = True
        if enable_if:
            snapshot2 = list(pool)
            bools = [c for c in snapshot2
                     if isinstance(strip_quantifiers(c.ty)[1], RBase)
                     and strip_quantifiers(c.ty)[1].base == BOOL]
            scalars = [c for c in snapshot2
                       if isinstance(strip_quantifiers(c.ty)[1], RBase)]
            for cb in bools:
                for ct in scalars:
                    for ce in scalars:
                        if ct.term == ce.term:
                            continue
                        depth = max(cb.if_depth, ct.if_depth, ce.if_depth) + 1
                        if depth > max_if_depth:
                            continue
                        size = cb.size + ct.size + ce.size
                        if size > k:
                            continue
                        tt = strip_quantifiers(ct.ty)[1]
                        te = strip_quantifiers(ce.ty)[1]
                        m = unify_shape(erased_shape(tt), erased_shape(te))
                        if m is None:
                            continue
                        term = If(cb.term, ct.term, ce.term)
                        if str(term) in seen:
                            continue
                        ty = _if_type(cb, tt, te, m)
                        add(_Cand(term, ty, size, depth))
                        grown = True
        if not grown:
            break

    # filter by the query
    from .syntax import let_normalize

    solutions: list[Term] = []
    pool.sort(key=lambda c: (c.size, str(c.term)))
    for c in pool:
        if c.size > k:
            continue
        body = let_normalize(c.term)
        wrapped: Term = body
        for name, _ in reversed(query.args):
            wrapped = Lam(name, None, wrapped)
        if type_check(ctx, body, query.result, oracle):
            solutions.append(wrapped)
            if max_terms is not None and len(solutions) >= max_terms:
                break
    return solutions


def _if_type(cb: _Cand, tt: RBase, te: RBase, m: dict) -> RefinementType:
    _, cc = strip_quantifiers(cb.ty)
    pt = _path_condition(cb.term, cc, True) if isinstance(cc, RBase) else TRUE
    pf = _path_condition(cb.term, cc, False) if isinstance(cc, RBase) else TRUE
    qual: Qualifier = Or(And(pt, tt.qual), And(pf, te.qual))
    return RBase("v", apply_base_subst(tt.base, m), qual)
