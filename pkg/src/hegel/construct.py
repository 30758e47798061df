"""Automaton construction from a library and a query.

`wf_init` seeds the automaton with one leaf state per base type, qualifier,
and binder, one type state per distinct (binder, base, qualifier) or arrow
shape, and one variable/constant transition per component, query argument,
and configured literal, plus the final goal transitions.  `transition_step`
grows the automaton one round: applications of every function-typed state
to every shape-compatible argument state (and conditionals when enabled),
wiring fresh result-type states through placeholder inference.

Every new transition's constraint is checked against the acyclicity
restriction before it is kept.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .entailment import CtxEntry, Oracle
from .lta import (
    C_TRUE, CGuard, Constraint, CSubst, LTA, Position, SemEnt, StateId, SymAlpha,
    SymApp, SymBase, SymBinder, SymBottom, SymConst, SymGoal, SymIf, SymKappa,
    SymQual, SymTau, SymArrow, SymVar, SynEq, Transition, TransitionId, c_and,
    constraint_well_formed, pos,
)
from .printer import pretty_qual, pretty_type
from .syntax import (
    And, Atom, BaseType, BList, BOOL, BPair, BPrim, BVar, EBool, ELit, EVar,
    Expr, INT, Library, Not, Or, Qualifier, QTrue, Query, RArrow, RBase,
    RefVar, RefinementType, RForallPred, RForallTy, TRUE, UNIT, VALUE_VAR,
    apply_base_subst, base_type_vars, conj, erase, qual_subst,
    qual_subst_refvars, strip_quantifiers, trivial, type_subst_base,
    type_subst_names, type_subst_refvars, unify_base,
)


class IllFormedType(Exception):
    pass


def _type_key(ty: RefinementType) -> str:
    """Canonical interning key: unlike the pretty form, it always includes
    binder names, which carry the dependent-substitution targets."""
    match ty:
        case RBase(b, base, qual):
            return f"B({b}:{base}|{pretty_qual(qual)})"
        case RArrow(n, a, r):
            return f"A({n},{_type_key(a)},{_type_key(r)})"
        case RForallTy(v, body):
            return f"T({v},{_type_key(body)})"
        case RForallPred(v, s, body):
            return f"P({v}:{s},{_type_key(body)})"
    raise IllFormedType(str(ty))


class CycleConstraintViolation(Exception):
    pass


# ---------------------------------------------------------------------------
# Erased shapes (arrows erase to nested tuples)

Shape = object  # BaseType | tuple["->", Shape, Shape]


def erased_shape(ty: RefinementType) -> Shape:
    return erase(ty)


def shape_type_vars(s: Shape) -> set[str]:
    if isinstance(s, tuple):
        return shape_type_vars(s[1]) | shape_type_vars(s[2])
    return base_type_vars(s)


def apply_shape_subst(s: Shape, sub: dict[str, BaseType]) -> Shape:
    if isinstance(s, tuple):
        return ("->", apply_shape_subst(s[1], sub), apply_shape_subst(s[2], sub))
    return apply_base_subst(s, sub)


def unify_shape(a: Shape, b: Shape, rigid: frozenset[str] = frozenset(),
                sub: Optional[dict[str, BaseType]] = None) -> Optional[dict[str, BaseType]]:
    """Unify erased shapes; variables in `rigid` may only match themselves."""
    sub = dict(sub) if sub else {}

    def walk(s: Shape) -> Shape:
        while not isinstance(s, tuple) and isinstance(s, BVar) and s.name in sub:
            s = sub[s.name]
        return s

    def occurs(name: str, s: Shape) -> bool:
        return name in shape_type_vars(apply_shape_subst(s, sub))

    def go(x: Shape, y: Shape) -> bool:
        x, y = walk(x), walk(y)
        if x == y:
            return True
        if not isinstance(x, tuple) and isinstance(x, BVar) and x.name not in rigid:
            if isinstance(y, tuple):
                return False  # arrows never instantiate a type variable here
            if occurs(x.name, y):
                return False
            sub[x.name] = y
            return True
        if not isinstance(y, tuple) and isinstance(y, BVar) and y.name not in rigid:
            return go(y, x)
        if isinstance(x, tuple) and isinstance(y, tuple):
            return go(x[1], y[1]) and go(x[2], y[2])
        if isinstance(x, BList) and isinstance(y, BList):
            return go(x.elem, y.elem)
        if isinstance(x, BPair) and isinstance(y, BPair):
            return go(x.first, y.first) and go(x.second, y.second)
        return False

    if go(a, b):
        return {k: apply_base_subst(v, sub) for k, v in sub.items()}
    return None


# ---------------------------------------------------------------------------
# Construction state


@dataclass
class ConstructionState:
    automaton: LTA
    library: Library
    query: Query
    interned: dict = field(default_factory=dict)          # canonical key -> StateId
    term_types: dict[StateId, RefinementType] = field(default_factory=dict)
    state_names: dict[StateId, str] = field(default_factory=dict)
    goal_state: StateId = -1
    goal_type_state: StateId = -1
    goal_wired: set[StateId] = field(default_factory=set)
    apps_done: set[tuple[StateId, StateId]] = field(default_factory=set)
    ifs_done: set[tuple[StateId, StateId, StateId]] = field(default_factory=set)
    rigid_vars: frozenset[str] = frozenset()
    if_layers: int = 0
    max_if_layers: int = 2
    enable_if: bool = True
    rejected: int = 0  # constraints rejected by the acyclicity check
    _alpha = itertools.count()
    _kappa = itertools.count()

    # -- interning helpers (the "q not in Q" side conditions)

    def _intern(self, key, make) -> StateId:
        if key in self.interned:
            return self.interned[key]
        q = make()
        self.interned[key] = q
        return q

    def binder_state(self, name: str) -> StateId:
        def make() -> StateId:
            q = self.automaton.add_state()
            self.automaton.add_transition(SymBinder(name), [], q)
            return q
        return self._intern(("binder", name), make)

    def base_state(self, base: BaseType) -> StateId:
        def make() -> StateId:
            q = self.automaton.add_state()
            self.automaton.add_transition(SymBase(base), [], q)
            return q
        return self._intern(("base", str(base)), make)

    def qual_state(self, qual: Qualifier) -> StateId:
        key = ("qual", pretty_qual(qual))

        def make() -> StateId:
            q = self.automaton.add_state()
            self.automaton.add_transition(SymQual(qual), [], q)
            return q
        return self._intern(key, make)

    def type_state(self, ty: RefinementType) -> StateId:
        """wf-base / wf-arrow: one state per canonical type."""
        binders, core = strip_quantifiers(ty)
        if binders:
            ty = core  # quantifiers live on the component, not the automaton
        key = ("type", _type_key(ty))

        def make() -> StateId:
            if isinstance(ty, RBase):
                qv = self.binder_state(ty.binder)
                qb = self.base_state(ty.base)
                qr = self.qual_state(ty.qual)
                q = self.automaton.add_state()
                self.automaton.add_transition(SymTau(), [qv, qb, qr], q)
                return q
            if isinstance(ty, RArrow):
                arg = ty.arg_type
                if isinstance(arg, RBase):
                    arg = RBase(ty.arg_name, arg.base, arg.qual)
                qi = self.type_state(arg)
                qo = self.type_state(ty.result)
                q = self.automaton.add_state()
                self.automaton.add_transition(SymArrow(), [qi, qo], q)
                return q
            raise IllFormedType(pretty_type(ty))
        return self._intern(key, make)

    def fresh_alpha(self) -> str:
        return f"%a{next(ConstructionState._alpha)}"

    def fresh_kappa(self) -> str:
        return f"%k{next(ConstructionState._kappa)}"

    def shape_state(self) -> tuple[StateId, StateId, StateId, StateId, str, str]:
        """e-alpha / e-kappa / e-tau-shape: a placeholder type awaiting
        inference."""
        a = self.automaton
        alpha = self.fresh_alpha()
        kappa = self.fresh_kappa()
        qa = a.add_state()
        a.add_transition(SymAlpha(alpha), [], qa)
        qk = a.add_state()
        a.add_transition(SymKappa(kappa), [], qk)
        qv = self.binder_state("v")
        qt = a.add_state()
        a.add_transition(SymTau(), [qv, qa, qk], qt)
        return qt, qv, qa, qk, alpha, kappa

    # -- component/term states

    def add_term_state(self, symbol, ty: RefinementType, name: str,
                       type_state: Optional[StateId] = None) -> StateId:
        a = self.automaton
        q_ty = type_state if type_state is not None else self.type_state(ty)
        q = a.add_state()
        a.add_transition(symbol, [q_ty], q)
        self.term_types[q] = ty
        self.state_names[q] = name
        return q


# ---------------------------------------------------------------------------
# SubType constraint generation (positions relative to a host transition)


def subtype_constraint_at(ty_i: RefinementType, ty_j: RefinementType,
                          p_i: Position, p_j: Position) -> Constraint:
    """Constraints sufficient for [[p_i]]'s type to be a subtype of
    [[p_j]]'s, unfolded over the statically-known shapes."""
    _, core_i = strip_quantifiers(ty_i)
    _, core_j = strip_quantifiers(ty_j)
    if isinstance(core_i, RBase) and isinstance(core_j, RBase):
        return c_and([
            SynEq(p_i.extend(2, label="base"), p_j.extend(2, label="base")),
            SemEnt(p_i.extend(3, label="ref"), p_j.extend(3, label="ref")),
        ])
    if isinstance(core_i, RArrow) and isinstance(core_j, RArrow):
        arg = subtype_constraint_at(core_j.arg_type, core_i.arg_type,
                                    p_j.extend(1, label="in"), p_i.extend(1, label="in"))
        out = subtype_constraint_at(core_i.result, core_j.result,
                                    p_i.extend(2, label="out"), p_j.extend(2, label="out"))
        theta = ((p_i.extend(1, label="in"), p_j.extend(1, label="in")),)
        return c_and([arg, CSubst(theta, out)])
    return C_TRUE


def subtype_constraint(a: LTA, d_i: TransitionId, d_j: TransitionId) -> Constraint:
    """SubType over two type transitions, with positions rooted at a virtual
    pair host whose child 1 is d_i's target and child 2 is d_j's."""
    from .lta import tree_to_type
    t_i = a.transitions[d_i]
    t_j = a.transitions[d_j]
    ty_i = state_type(a, t_i.target)
    ty_j = state_type(a, t_j.target)
    if ty_i is None or ty_j is None:
        return C_TRUE
    return subtype_constraint_at(ty_i, ty_j, pos(1, label="i"), pos(2, label="j"))


# ---------------------------------------------------------------------------
# Reading types back out of the automaton


def state_type(a: LTA, q: StateId) -> Optional[RefinementType]:
    """Reconstruct the refinement type represented by a type state (first
    incoming transition; constructed automata intern one per state)."""

    def go(q: StateId, depth: int) -> Optional[RefinementType]:
        if depth > 32:
            return None
        ts = a.incoming(q)
        if not ts:
            return None
        t = ts[0]
        sym = t.symbol
        if isinstance(sym, SymTau):
            binder = a.incoming(t.children[0])
            basei = a.incoming(t.children[1])
            refi = a.incoming(t.children[2])
            if not (binder and basei and refi):
                return None
            bному = binder[0].symbol
            bs = basei[0].symbol
            rs = refi[0].symbol
            bname = bному.name if isinstance(bному, SymBinder) else "v"
            if isinstance(bs, SymBase):
                base: BaseType = bs.base
            elif isinstance(bs, SymAlpha):
                base = BVar(bs.name)
            else:
                return None
            if isinstance(rs, SymQual):
                qual: Qualifier = rs.qual
            elif isinstance(rs, SymKappa):
                qual = RefVar(rs.name)
            else:
                return None
            return RBase(bname, base, qual)
        if isinstance(sym, SymArrow):
            i = go(t.children[0], depth + 1)
            o = go(t.children[1], depth + 1)
            if i is None or o is None:
                return None
            argn = i.binder if isinstance(i, RBase) else f"h{t.id}"
            return RArrow(argn, i, o)
        return None

    return go(q, 0)


def term_state_type(a: LTA, q: StateId) -> Optional[RefinementType]:
    """The type of a term state: its transitions' type child (child 1)."""
    for t in a.incoming(q):
        if t.children:
            ty = state_type(a, t.children[0])
            if ty is not None:
                return ty
    return None


def build_env(a: LTA) -> list[CtxEntry]:
    """Typing environment consistent with the automaton: every variable and
    constant transition contributes its binding, every composite transition
    contributes a fresh binder for its result type, plus any facts carried
    across merges."""
    env: list[CtxEntry] = []
    seen: set[str] = set()
    for tid in sorted(a.transitions):
        t = a.transitions[tid]
        sym = t.symbol
        if isinstance(sym, SymVar) and t.children:
            ty = state_type(a, t.children[0])
            if ty is not None and sym.name not in seen:
                seen.add(sym.name)
                env.append((sym.name, ty))
        elif isinstance(sym, SymConst) and t.children:
            ty = state_type(a, t.children[0])
            name = str(sym)
            if ty is not None and name not in seen:
                seen.add(name)
                env.append((name, ty))
        elif isinstance(sym, (SymApp, SymIf)) and t.children:
            ty = state_type(a, t.children[0])
            name = f"t{tid}"
            if ty is not None and name not in seen:
                seen.add(name)
                env.append((name, ty))
    for entry in a.extra_env:
        if isinstance(entry, tuple):
            if entry[0] not in seen:
                seen.add(entry[0])
                env.append(entry)
        else:
            env.append(entry)
    return env


# ---------------------------------------------------------------------------
# wf_init


def _const_type(value: object) -> RefinementType:
    if isinstance(value, bool):
        q: Qualifier = Atom(EVar(VALUE_VAR)) if value else Not(Atom(EVar(VALUE_VAR)))
        return RBase("v", BOOL, q)
    if isinstance(value, int):
        from .syntax import Rel
        return RBase("v", INT, Rel("=", EVar(VALUE_VAR), ELit(value)))
    if value == "nil":
        from .syntax import EApp, Rel
        return RBase("v", BList(BVar("%nil")), Rel("=", EApp("len", (EVar(VALUE_VAR),)), ELit(0)))
    return RBase("v", UNIT, TRUE)


def _freshen_query_tyvars(query: Query, taken: set[str]) -> Query:
    qvars: set[str] = set()
    for _, ty in query.args:
        qvars |= shape_type_vars(erased_shape(ty))
    qvars |= shape_type_vars(erased_shape(query.result))
    clash = {v for v in qvars if v in taken}
    if not clash:
        return query
    ren = {}
    for v in sorted(clash):
        k = 2
        while f"{v}_q{k}" in taken | qvars:
            k += 1
        ren[v] = BVar(f"{v}_q{k}")
    args = [(n, type_subst_base(t, ren)) for n, t in query.args]
    result = type_subst_base(query.result, ren)
    assert isinstance(result, RBase)
    return Query(args=args, result=result)


def wf_init(lib: Library, query: Query, literals: Sequence[object] = (),
            enable_if: bool = True, max_if_layers: int = 2) -> ConstructionState:
    """Build the depth-0 automaton: all well-formed terms of size one."""
    a = LTA()
    lib_tyvars: set[str] = set()
    for _, ty in lib.components:
        lib_tyvars |= shape_type_vars(erased_shape(ty))
    query = _freshen_query_tyvars(query, lib_tyvars | lib.names())

    rigid: set[str] = set()
    for _, ty in query.args:
        rigid |= shape_type_vars(erased_shape(ty))
    rigid |= shape_type_vars(erased_shape(query.result))

    cs = ConstructionState(automaton=a, library=lib, query=query,
                           rigid_vars=frozenset(rigid), enable_if=enable_if,
                           max_if_layers=max_if_layers)

    names = set(lib.names())
    for arg_name, _ in query.args:
        if arg_name in names:
            raise IllFormedType(f"query argument {arg_name!r} shadows a library component")
        names.add(arg_name)

    # wf + e-var for library components
    for name, ty in lib.components:
        _check_well_formed(ty)
        cs.add_term_state(SymVar(name), ty, name)
    # query arguments
    for arg_name, arg_ty in query.args:
        _check_well_formed(arg_ty)
        shown = arg_ty
        if isinstance(shown, RBase):
            shown = RBase(arg_name, shown.base, shown.qual)
        cs.add_term_state(SymVar(arg_name), shown, arg_name)
    # literals (e-const)
    for lit in literals:
        ty = _const_type(lit)
        base = ty.base if isinstance(ty, RBase) else INT
        cs.add_term_state(SymConst(lit, base), ty, str(Symbolish(lit)))

    # exemplar placeholder states for inference (e-alpha / e-kappa / e-tau-shape)
    cs.shape_state()

    # goal (Q-goal)
    cs.goal_type_state = cs.type_state(query.result)
    cs.goal_state = a.add_state(final=True)
    _wire_goal(cs)
    a.depth = 0
    return cs


class Symbolish:
    """Render a literal exactly like its constant symbol would print."""

    def __init__(self, value: object):
        self.value = value

    def __str__(self) -> str:
        if isinstance(self.value, bool):
            return "true" if self.value else "false"
        if self.value == "nil":
            return "[]"
        if self.value == "unit":
            return "()"
        return str(self.value)


def _check_well_formed(ty: RefinementType) -> None:
    binders, core = strip_quantifiers(ty)
    seen_args: set[str] = set()

    def go(t: RefinementType) -> None:
        if isinstance(t, RArrow):
            if t.arg_name in seen_args:
                raise IllFormedType(f"argument {t.arg_name!r} bound twice")
            seen_args.add(t.arg_name)
            go(t.arg_type)
            go(t.result)
        elif isinstance(t, (RForallTy, RForallPred)):
            go(t.body)

    go(core)


def _wire_goal(cs: ConstructionState) -> int:
    """Q-goal: connect every shape-compatible term state to the final state
    with a SubType constraint between the term's type and the goal's."""
    a = cs.automaton
    added = 0
    goal_ty = cs.query.result
    for q in sorted(cs.term_types):
        if q in cs.goal_wired or q not in a.states or not a.by_target.get(q):
            continue
        ty = cs.term_types[q]
        _, core = strip_quantifiers(ty)
        if not isinstance(core, RBase):
            cs.goal_wired.add(q)  # arrows never inhabit a base goal
            continue
        m = unify_shape(erased_shape(core), erased_shape(goal_ty), cs.rigid_vars)
        if m is None:
            cs.goal_wired.add(q)
            continue
        psi = subtype_constraint_at(core, goal_ty, pos(2, 1, label="term.type"),
                                    pos(1, label="goal.type"))
        t = a.add_transition(SymGoal(), [cs.goal_type_state, q], cs.goal_state,
                             constraint=psi, ty_inst=m)
        if not constraint_well_formed(a, t):
            a.remove_transition(t.id)
            cs.rejected += 1
        else:
            added += 1
        cs.goal_wired.add(q)
    return added


# ---------------------------------------------------------------------------
# Inference (e-infer / Solve)


class UnificationFailure(Exception):
    pass


def _split_arrow(ty: RefinementType) -> tuple[list, RArrow]:
    binders, core = strip_quantifiers(ty)
    if not isinstance(core, RArrow):
        raise UnificationFailure(f"not a function type: {pretty_type(ty)}")
    return binders, core


def solve_result_type(fun_ty: RefinementType, arg_ty: RefinementType,
                      actual: Expr | str, rigid: frozenset[str]
                      ) -> tuple[RefinementType, dict[str, BaseType], dict[str, Qualifier]]:
    """Solve the application's result type: unify erased shapes for the type
    arguments, instantiate refinement parameters by matching the formal
    argument's refinement against the actual's, then take the strongest
    postcondition of the result under [actual/formal]."""
    binders, core = _split_arrow(fun_ty)
    formal = core.arg_type
    m_alpha = unify_shape(erased_shape(formal), erased_shape(arg_ty), rigid)
    if m_alpha is None:
        raise UnificationFailure(
            f"{pretty_type(formal)} vs {pretty_type(arg_ty)}")

    m_kappa: dict[str, Qualifier] = {}
    pred_params = {name for kind, name, _ in binders if kind == "pred"}
    _, formal_core = strip_quantifiers(formal)
    if pred_params and isinstance(formal_core, RBase) and isinstance(formal_core.qual, RefVar) \
            and formal_core.qual.name in pred_params and isinstance(arg_ty, RBase):
        m_kappa[formal_core.qual.name] = arg_ty.qual

    result = core.result
    result = type_subst_base(result, m_alpha)
    if m_kappa:
        result = type_subst_refvars(result, m_kappa)
    result = type_subst_names(result, {core.arg_name: actual})
    return result, m_alpha, m_kappa


def infer_transition_types(cs: ConstructionState, tid: TransitionId,
                           oracle: Optional[Oracle] = None) -> ConstructionState:
    """Resolve a placeholder result type left by e-tau-shape: replace the
    alpha/kappa type child with the interned concrete type and record the
    instantiations on the transition."""
    a = cs.automaton
    t = a.transitions[tid]
    if not isinstance(t.symbol, SymApp):
        return cs
    fun_q, arg_q = t.children[1], t.children[2]
    fun_ty = cs.term_types.get(fun_q) or term_state_type(a, fun_q)
    arg_ty = cs.term_types.get(arg_q) or term_state_type(a, arg_q)
    if fun_ty is None or arg_ty is None:
        raise UnificationFailure("missing operand types")
    actual = _state_value(cs, arg_q)
    old = t.children[0]
    try:
        _, arg_core = strip_quantifiers(arg_ty)
        result, m_alpha, m_kappa = solve_result_type(fun_ty, arg_core, actual, cs.rigid_vars)
    except UnificationFailure:
        # dead application: replace by a bottom transition
        target = t.target
        a.remove_transition(tid)
        a.add_transition(SymBottom(), [], target)
        _drop_placeholder(cs, old)
        return cs
    q_ty = cs.type_state(result)
    a.rewire_child(tid, old, q_ty)
    t.ty_inst = tuple(sorted(m_alpha.items()))
    t.pred_inst = tuple(sorted(m_kappa.items()))
    cs.term_types[t.target] = result
    _drop_placeholder(cs, old)
    return cs


def _drop_placeholder(cs: ConstructionState, q_shape: StateId) -> None:
    """Remove a resolved e-tau-shape placeholder and its alpha/kappa leaves
    (the exemplar trio from initialization is never passed here)."""
    a = cs.automaton
    incoming = a.incoming(q_shape)
    if not incoming or not isinstance(incoming[0].symbol, SymTau):
        return
    if a.by_child.get(q_shape):
        return  # still referenced
    children = incoming[0].children
    a.remove_state(q_shape)
    for c in children[1:]:
        ts = a.incoming(c)
        if len(ts) == 1 and isinstance(ts[0].symbol, (SymAlpha, SymKappa)) \
                and not a.by_child.get(c):
            a.remove_state(c)


def _state_value(cs: ConstructionState, q: StateId) -> Expr | str:
    """The expression standing for a term state's value in qualifiers."""
    name = cs.state_names.get(q)
    a = cs.automaton
    for t in a.incoming(q):
        if isinstance(t.symbol, SymConst):
            v = t.symbol.value
            if isinstance(v, bool):
                return EBool(v)
            if isinstance(v, int):
                return ELit(v)
    return name if name is not None else f"q{q}"


# ---------------------------------------------------------------------------
# transition_step (e-app / e-if / Q-goal growth)


def transition_step(cs: ConstructionState, oracle: Optional[Oracle] = None) -> ConstructionState:
    """One expansion round: new applications and conditionals over the
    current term states, then goal wiring; the round counter advances even
    when nothing was added."""
    a = cs.automaton
    term_snapshot = sorted(q for q in cs.term_types
                           if q in a.states and a.by_target.get(q))

    fun_states = []
    arg_states = []
    for q in term_snapshot:
        ty = cs.term_types[q]
        _, core = strip_quantifiers(ty)
        if isinstance(core, RArrow):
            fun_states.append(q)
        arg_states.append(q)

    for qf in fun_states:
        fun_ty = cs.term_types[qf]
        binders, core = _split_arrow(fun_ty)
        for qa in arg_states:
            if (qf, qa) in cs.apps_done:
                continue
            cs.apps_done.add((qf, qa))
            arg_ty = cs.term_types[qa]
            _, arg_core = strip_quantifiers(arg_ty)
            if unify_shape(erased_shape(core.arg_type), erased_shape(arg_core),
                           cs.rigid_vars) is None:
                continue
            _add_app(cs, qf, qa, oracle)

    if cs.enable_if and cs.if_layers < cs.max_if_layers:
        added_if = _add_ifs(cs, term_snapshot)
        if added_if:
            cs.if_layers += 1

    _wire_goal(cs)
    a.depth += 1
    return cs


def _add_app(cs: ConstructionState, qf: StateId, qa: StateId,
             oracle: Optional[Oracle]) -> Optional[Transition]:
    a = cs.automaton
    # e-tau-shape placeholder for the result type, resolved by inference
    q_shape, _, _, _, _, _ = cs.shape_state()
    q_app = a.add_state()
    t = a.add_transition(SymApp(), [q_shape, qf, qa], q_app)
    cs.state_names[q_app] = f"t{t.id}"
    infer_transition_types(cs, t.id, oracle)
    t2 = a.transitions.get(t.id)
    if t2 is None or t2.is_bottom:
        return None
    fun_core = _split_arrow(cs.term_types[qf])[1]
    arg_core = strip_quantifiers(cs.term_types[qa])[1]
    result_ty = cs.term_types[t2.target]
    psi = c_and([
        subtype_constraint_at(arg_core, fun_core.arg_type,
                              pos(3, 1, label="arg.type"), pos(2, 1, 1, label="fun.in")),
        CSubst(((pos(3, label="arg"), pos(2, 1, 1, label="fun.in")),),
               subtype_constraint_at(fun_core.result, result_ty,
                                     pos(2, 1, 2, label="fun.out"),
                                     pos(1, label="app.type"))),
    ])
    t2.constraint = psi
    if not constraint_well_formed(a, t2):
        target = t2.target
        a.remove_transition(t2.id)
        a.add_transition(SymBottom(), [], target)
        cs.rejected += 1
        return None
    return t2


def _add_ifs(cs: ConstructionState, term_snapshot: list[StateId]) -> int:
    a = cs.automaton
    added = 0
    bool_states = [q for q in term_snapshot
                   if isinstance(strip_quantifiers(cs.term_types[q])[1], RBase)
                   and strip_quantifiers(cs.term_types[q])[1].base == BOOL]
    scalar_states = [q for q in term_snapshot
                     if isinstance(strip_quantifiers(cs.term_types[q])[1], RBase)]
    for qb in bool_states:
        for qt in scalar_states:
            for qe in scalar_states:
                if qt == qe or (qb, qt, qe) in cs.ifs_done:
                    continue
                cs.ifs_done.add((qb, qt, qe))
                then_ty = strip_quantifiers(cs.term_types[qt])[1]
                else_ty = strip_quantifiers(cs.term_types[qe])[1]
                m = unify_shape(erased_shape(then_ty), erased_shape(else_ty),
                                cs.rigid_vars)
                if m is None:
                    continue
                _add_one_if(cs, qb, qt, qe, m)
                added += 1
    return added


def _add_one_if(cs: ConstructionState, qb: StateId, qt: StateId, qe: StateId,
                m: dict[str, BaseType]) -> Optional[Transition]:
    a = cs.automaton
    then_ty = strip_quantifiers(cs.term_types[qt])[1]
    else_ty = strip_quantifiers(cs.term_types[qe])[1]
    cond_ty = strip_quantifiers(cs.term_types[qb])[1]
    assert isinstance(then_ty, RBase) and isinstance(else_ty, RBase) \
        and isinstance(cond_ty, RBase)
    cond_val = _state_value(cs, qb)
    cond_q = qual_subst(cond_ty.qual, {VALUE_VAR: cond_val if not isinstance(cond_val, str) else EVar(cond_val)})
    truth: Qualifier = Atom(cond_val if not isinstance(cond_val, str) else EVar(cond_val)) \
        if not isinstance(cond_val, EBool) else TRUE
    pathT = conj([cond_q, truth])
    pathF = conj([cond_q, Not(truth)])
    result_qual: Qualifier = Or(And(pathT, then_ty.qual), And(pathF, else_ty.qual))
    result = RBase("v", apply_base_subst(then_ty.base, m), result_qual)
    q_ty = cs.type_state(result)
    psi = c_and([
        CGuard(pos(2, label="cond"), True,
               subtype_constraint_at(then_ty, result, pos(3, 1, label="then.type"),
                                     pos(1, label="if.type"))),
        CGuard(pos(2, label="cond"), False,
               subtype_constraint_at(else_ty, result, pos(4, 1, label="else.type"),
                                     pos(1, label="if.type"))),
    ])
    q_if = a.add_state()
    t = a.add_transition(SymIf(), [q_ty, qb, qt, qe], q_if, constraint=psi, ty_inst=m)
    if not constraint_well_formed(a, t):
        a.remove_transition(t.id)
        cs.rejected += 1
        return None
    cs.term_types[q_if] = result
    cs.state_names[q_if] = f"t{t.id}"
    return t
