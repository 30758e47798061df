"""Search-space reductions: constraint-driven pruning, subtyping-based
similarity detection, and merge-based minimization.

Pruning walks every transition's conjunct atoms, intersects the transition
sets at the two constrained positions (syntactically for equality atoms,
semantically via the entailment oracle for entailment atoms), and drops
what cannot contribute: a transition whose atom admits no surviving pair
becomes bottom, and a candidate that fails against every counterpart is
removed in place when its spine is not shared.  Similarity records ordered
pairs (subtype-side, supertype-side) of same-kind transitions; minimization
removes the supertype's transition and rewires its users onto the retained
one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .construct import state_type, subtype_constraint_at, term_state_type
from .entailment import CtxEntry, EntailmentQuery, Oracle
from .lta import (
    CFalse, CGuard, Constraint, CSubst, C_TRUE, LTA, Position, SemEnt, StateId,
    SymApp, SymBase, SymBinder, SymBottom, SymConst, SymIf, SymQual, SymTau,
    SymVar, SynEq, Transition, TransitionId, at_position, c_and, normalize, pos,
)
from .syntax import (
    BaseType, INT, Qualifier, QTrue, RArrow, RBase, RefinementType, TRUE,
    VALUE_VAR, erase, qual_subst, qual_subst_refvars, strip_quantifiers,
    type_subst_names,
)


# ---------------------------------------------------------------------------
# Similarity bookkeeping


@dataclass
class SimilaritySet:
    """Ordered pairs (kept, removed): the first transition's type is the
    subtype and survives minimization."""

    pairs: list[tuple[TransitionId, TransitionId]] = field(default_factory=list)
    _seen: set[tuple[TransitionId, TransitionId]] = field(default_factory=set)

    def add(self, kept: TransitionId, removed: TransitionId) -> bool:
        if (kept, removed) in self._seen:
            return False
        self._seen.add((kept, removed))
        self.pairs.append((kept, removed))
        return True

    def __contains__(self, pair: tuple[TransitionId, TransitionId]) -> bool:
        return pair in self._seen

    def __len__(self) -> int:
        return len(self.pairs)

    def clear(self) -> None:
        self.pairs.clear()
        self._seen.clear()


@dataclass
class ReductionStats:
    transitions_pruned: int = 0
    pairs_recorded: int = 0
    transitions_merged: int = 0


# ---------------------------------------------------------------------------
# Intersections


def syntactic_intersection(a: LTA, d1: TransitionId, d2: TransitionId,
                           _memo: Optional[dict] = None) -> TransitionId:
    """Product-style tree intersection of two transitions.  Returns the id
    of a transition denoting the intersection: one of the inputs when they
    already coincide, a fresh interned product transition otherwise, or a
    bottom transition when symbols or arities clash.  Cycles are handled
    co-inductively: a pair re-entered during construction is assumed
    non-bottom."""
    memo: dict = _memo if _memo is not None else {}
    key = (d1, d2)
    if key in memo:
        cached = memo[key]
        return d1 if cached == "pending" else cached
    t1, t2 = a.transitions[d1], a.transitions[d2]
    if d1 == d2:
        return d1
    if t1.symbol != t2.symbol or len(t1.children) != len(t2.children):
        return _bottom(a, t1.target)
    memo[key] = "pending"
    new_children: list[StateId] = []
    for c1, c2 in zip(t1.children, t2.children):
        if c1 == c2:
            new_children.append(c1)
            continue
        kept: list[TransitionId] = []
        for s1 in sorted(a.by_target.get(c1, [])):
            for s2 in sorted(a.by_target.get(c2, [])):
                r = syntactic_intersection(a, s1, s2, memo)
                if not a.transitions[r].is_bottom:
                    kept.append(r)
        if not kept:
            memo[key] = _bottom(a, t1.target)
            return memo[key]
        if set(kept) == set(a.by_target.get(c1, [])):
            new_children.append(c1)
        else:
            q = a.add_state()
            for r in dict.fromkeys(kept):
                rt = a.transitions[r]
                a.add_transition(rt.symbol, rt.children, q, rt.constraint,
                                 rt.ty_inst, rt.pred_inst)
            new_children.append(q)
    if tuple(new_children) == t1.children:
        memo[key] = d1
        return d1
    q = a.add_state()
    t = a.add_transition(t1.symbol, new_children, q,
                         c_and([t1.constraint, t2.constraint]),
                         t1.ty_inst, t1.pred_inst)
    memo[key] = t.id
    return t.id


def _bottom(a: LTA, target: StateId) -> TransitionId:
    t = a.add_transition(SymBottom(), [], target)
    return t.id


def syn_compatible(a: LTA, d1: TransitionId, d2: TransitionId,
                   ty_map: Optional[dict] = None,
                   _memo: Optional[set] = None) -> bool:
    """Would the syntactic intersection of two transitions be non-bottom?
    Pure check used by pruning: compares symbols modulo a type
    instantiation and recurses into children, assuming compatibility on
    re-entered pairs (cycles)."""
    from .syntax import BVar, apply_base_subst
    from .lta import SymAlpha

    ty_map = ty_map or {}
    memo = _memo if _memo is not None else set()
    if (d1, d2) in memo:
        return True
    memo.add((d1, d2))
    t1, t2 = a.transitions[d1], a.transitions[d2]
    if d1 == d2:
        return True
    s1, s2 = t1.symbol, t2.symbol
    if isinstance(s1, SymBase) or isinstance(s2, SymBase) or \
            isinstance(s1, SymAlpha) or isinstance(s2, SymAlpha):
        def as_base(s):
            if isinstance(s, SymBase):
                return apply_base_subst(s.base, ty_map)
            if isinstance(s, SymAlpha):
                return apply_base_subst(BVar(s.name), ty_map)
            return None
        b1, b2 = as_base(s1), as_base(s2)
        if b1 is None or b2 is None:
            return False
        return b1 == b2
    if s1 != s2 or len(t1.children) != len(t2.children):
        return False
    for c1, c2 in zip(t1.children, t2.children):
        if c1 == c2:
            continue
        ok = False
        for u1 in sorted(a.by_target.get(c1, [])):
            for u2 in sorted(a.by_target.get(c2, [])):
                if syn_compatible(a, u1, u2, ty_map, memo):
                    ok = True
                    break
            if ok:
                break
        if not ok:
            return False
    return True


def _qual_of(a: LTA, tid: TransitionId) -> Optional[Qualifier]:
    t = a.transitions[tid]
    sym = t.symbol
    if isinstance(sym, SymQual):
        return sym.qual
    if isinstance(sym, SymTau):
        refs = a.incoming(t.children[2])
        if refs and isinstance(refs[0].symbol, SymQual):
            return refs[0].symbol.qual
    return None


def semantic_intersection(a: LTA, d_i: TransitionId, d_j: TransitionId,
                          psi: Constraint, env: Sequence[CtxEntry],
                          oracle: Oracle,
                          theta: Sequence[tuple[str, object]] = (),
                          guards: Sequence[Qualifier] = (),
                          value_sort: BaseType = INT,
                          pred_inst: tuple = ()) -> TransitionId:
    """Entailment-guarded intersection of two qualifier-carrying
    transitions: the subtype side survives when its qualifier entails the
    other's under the context; bottom when the entailment is refuted;
    kept (no pruning) when the oracle cannot decide."""
    qi = _qual_of(a, d_i)
    qj = _qual_of(a, d_j)
    if qi is None or qj is None:
        return d_i
    if pred_inst:
        pm = dict(pred_inst)
        qi = qual_subst_refvars(qi, pm)
        qj = qual_subst_refvars(qj, pm)
    query = EntailmentQuery.make(
        context=tuple(env) + tuple(g for g in guards),
        subst=dict(theta),
        antecedent=qi,
        consequent=qj,
        value_sort=value_sort,
    )
    verdict = oracle.check_entailment(query)
    if verdict.is_valid:
        return d_i
    if verdict.is_invalid:
        return _bottom(a, a.transitions[d_i].target)
    return d_i  # unknown: keep, preserving completeness


# ---------------------------------------------------------------------------
# Name/sort resolution over the automaton (the static analogue of the
# tree-level resolution in `lta.term_satisfies`)


def _state_value_name(a: LTA, q: StateId) -> Optional[str]:
    names = []
    for t in a.incoming(q):
        sym = t.symbol
        if isinstance(sym, SymVar):
            names.append(sym.name)
        elif isinstance(sym, SymConst):
            names.append(str(sym))
        elif isinstance(sym, (SymApp, SymIf)):
            names.append(f"t{t.id}")
        elif isinstance(sym, SymTau):
            b = a.incoming(t.children[0])
            if b and isinstance(b[0].symbol, SymBinder):
                names.append(b[0].symbol.name)
    return names[0] if names else None


def _position_names(a: LTA, host: Transition, p: Position) -> list[str]:
    out = []
    for tid in sorted(at_position(a, host, p)):
        t = a.transitions[tid]
        sym = t.symbol
        if isinstance(sym, SymVar):
            out.append(sym.name)
        elif isinstance(sym, SymConst):
            out.append(str(sym))
        elif isinstance(sym, (SymApp, SymIf)):
            out.append(f"t{tid}")
        elif isinstance(sym, SymTau):
            b = a.incoming(t.children[0])
            if b and isinstance(b[0].symbol, SymBinder):
                out.append(b[0].symbol.name)
    return out


def _theta_name_subst(a: LTA, host: Transition, theta_pairs: tuple) -> dict[str, str]:
    """Eq.-3 denotation of a position substitution, resolved against the
    automaton: [x/y] for each y named at the target position and x at the
    replacement.  Multiple candidates contribute pairwise (first name
    wins deterministically)."""
    sub: dict[str, str] = {}
    for p_repl, p_target in theta_pairs:
        tgt_names = _position_names(a, host, p_target)
        rep_names = _position_names(a, host, p_repl)
        if tgt_names and rep_names:
            for yn in tgt_names:
                sub.setdefault(yn, rep_names[0])
    return sub


def _guard_quals(a: LTA, host: Transition, guards: tuple) -> list[Qualifier]:
    from .syntax import And, Atom, EVar, Not, conj

    out: list[Qualifier] = []
    for cond_pos, positive in guards:
        names = _position_names(a, host, cond_pos)
        tids = sorted(at_position(a, host, cond_pos))
        if not tids or not names:
            continue
        t = a.transitions[tids[0]]
        ty = term_state_type(a, t.target)
        parts: list[Qualifier] = []
        if isinstance(ty, RBase) and not isinstance(ty.qual, QTrue):
            parts.append(qual_subst(ty.qual, {VALUE_VAR: names[0]}))
        truth: Qualifier = Atom(EVar(names[0]))
        if not positive:
            truth = Not(truth)
        parts.append(truth)
        out.append(conj(parts))
    return out


def _ref_value_sort(a: LTA, host: Transition, p: Position) -> BaseType:
    """Sort of the value a ref-position's qualifier talks about (its
    enclosing type node's base)."""
    if p.path and p.path[-1] == 3:
        parent = Position(p.path[:-1])
        for tid in sorted(at_position(a, host, parent)):
            t = a.transitions[tid]
            if isinstance(t.symbol, SymTau):
                b = a.incoming(t.children[1])
                if b and isinstance(b[0].symbol, SymBase):
                    return b[0].symbol.base
    return INT


# ---------------------------------------------------------------------------
# Prune


def _spine_private(a: LTA, host: Transition, p: Position) -> bool:
    """True when every state crossed from `host` along `p` is referenced
    only by this spine, so in-place edits cannot leak elsewhere."""
    t = host
    path = p.path
    while path:
        j = path[0]
        if j > len(t.children):
            return False
        q = t.children[j - 1]
        if len(a.by_child.get(q, set())) > 1:
            return False
        ts = a.by_target.get(q, [])
        if len(path) > 1:
            if len(ts) != 1:
                return False
            t = a.transitions[ts[0]]
        path = path[1:]
    return True


def prune(a: LTA, env: Sequence[CtxEntry], oracle: Oracle,
          stats: Optional[ReductionStats] = None,
          max_sweeps: int = 10) -> LTA:
    """Apply the pruning rules to a fixpoint (bounded by `max_sweeps`),
    eliminating transitions whose constraints cannot be satisfied; bottoms
    are swept by normalization after each pass."""
    stats = stats if stats is not None else ReductionStats()
    done: set[tuple[TransitionId, int]] = set()
    from .lta import conjunct_atoms

    for _ in range(max_sweeps):
        changed = False
        for tid in sorted(a.transitions):
            t = a.transitions.get(tid)
            if t is None or t.is_bottom:
                continue
            atoms = conjunct_atoms(t.constraint)
            for idx, (atom, theta, guards) in enumerate(atoms):
                if (tid, idx) in done:
                    continue
                done.add((tid, idx))
                p1, p2 = atom.lhs, atom.rhs
                set1 = sorted(at_position(a, t, p1))
                set2 = sorted(at_position(a, t, p2))
                if not set1 or not set2:
                    continue
                survivors: set[TransitionId] = set()
                removed_here: list[TransitionId] = []
                if isinstance(atom, SynEq):
                    ty_map = t.ty_map()
                    for d1 in set1:
                        ok = any(syn_compatible(a, d1, d2, ty_map) for d2 in set2)
                        if ok:
                            survivors.add(d1)
                        else:
                            removed_here.append(d1)
                else:
                    name_sub = _theta_name_subst(a, t, theta)
                    guard_qs = _guard_quals(a, t, guards)
                    sort = _ref_value_sort(a, t, p1)
                    for d1 in set1:
                        ok = False
                        for d2 in set2:
                            r = semantic_intersection(
                                a, d1, d2, atom, env, oracle,
                                theta=tuple(name_sub.items()), guards=guard_qs,
                                value_sort=sort, pred_inst=t.pred_inst)
                            if not a.transitions[r].is_bottom:
                                ok = True
                        if ok:
                            survivors.add(d1)
                        else:
                            removed_here.append(d1)
                if not survivors:
                    # the atom is unsatisfiable: the host transition is dead
                    target = t.target
                    a.remove_transition(tid)
                    a.add_transition(SymBottom(), [], target)
                    stats.transitions_pruned += 1
                    changed = True
                    break
                if removed_here and len(p1.path) >= 1 and _spine_private(a, t, p1):
                    for d1 in removed_here:
                        if d1 in a.transitions and tid in a.transitions:
                            a.remove_transition(d1)
                            stats.transitions_pruned += 1
                            changed = True
        # sweep bottoms and emptied states (keep not-yet-goal-wired states)
        cleaned = normalize(a, sweep_unreachable=False)
        if cleaned.stats() != a.stats():
            _replace_with(a, cleaned)
            changed = True
        if not changed:
            break
    return a


def _replace_with(a: LTA, b: LTA) -> None:
    a.states = b.states
    a.finals = b.finals
    a.transitions = b.transitions
    a.by_target = b.by_target
    a.by_child = b.by_child
    a._next_state = b._next_state
    a._next_transition = b._next_transition
    a.extra_env = b.extra_env


# ---------------------------------------------------------------------------
# Similarity


def _term_kind(t: Transition) -> Optional[str]:
    sym = t.symbol
    if isinstance(sym, SymVar):
        return "var"
    if isinstance(sym, SymConst):
        return "const"
    if isinstance(sym, SymApp):
        return "app"
    if isinstance(sym, SymIf):
        return "if"
    return None


def _subtype_semantically(a: LTA, ty_i: RefinementType, ty_j: RefinementType,
                          env: Sequence[CtxEntry], oracle: Oracle) -> bool:
    """Evaluate the SubType constraint between two statically-known types:
    the semantic-intersection reading of s-trans (no bottom in the
    pointwise intersection of the type sub-automata)."""
    _, ci = strip_quantifiers(ty_i)
    _, cj = strip_quantifiers(ty_j)
    if isinstance(ci, RBase) and isinstance(cj, RBase):
        if erase(ci) != erase(cj):
            return False
        q = EntailmentQuery.make(
            context=tuple(env), subst={},
            antecedent=ci.qual, consequent=cj.qual, value_sort=ci.base)
        return oracle.check_entailment(q).is_valid
    if isinstance(ci, RArrow) and isinstance(cj, RArrow):
        if not _subtype_semantically(a, cj.arg_type, ci.arg_type, env, oracle):
            return False
        out_j = type_subst_names(cj.result, {cj.arg_name: ci.arg_name})
        return _subtype_semantically(a, ci.result, out_j, env, oracle)
    return False


def _transition_value_name(t: Transition) -> Optional[str]:
    sym = t.symbol
    if isinstance(sym, SymVar):
        return sym.name
    if isinstance(sym, (SymApp, SymIf)):
        return f"t{t.id}"
    return None


def similarity(a: LTA, e: SimilaritySet, env: Sequence[CtxEntry], oracle: Oracle,
               budget: int = 2000, stats: Optional[ReductionStats] = None,
               pinned: frozenset[str] = frozenset()) -> SimilaritySet:
    """Record candidate merges: pairs of same-kind, same-erased-type term
    transitions where one side's type is a subtype of the other's.  Mutually
    similar pairs keep the earlier-created transition.  Transitions whose
    value the query refers to by name (`pinned`) are never removed: their
    identity, not just their type, is part of the goal."""
    stats = stats if stats is not None else ReductionStats()
    groups: dict[tuple, list[TransitionId]] = {}
    for tid in sorted(a.transitions):
        t = a.transitions[tid]
        kind = _term_kind(t)
        if kind is None:
            continue
        ty = term_state_type(a, t.target)
        if ty is None:
            continue
        _, core = strip_quantifiers(ty)
        groups.setdefault((kind, str(erase(core))), []).append(tid)

    spent = 0
    for key in sorted(groups):
        tids = groups[key]
        for i, j in itertools.combinations(tids, 2):
            if spent >= budget:
                return e
            if (i, j) in e or (j, i) in e:
                continue
            ti, tj = a.transitions[i], a.transitions[j]
            ty_i = term_state_type(a, ti.target)
            ty_j = term_state_type(a, tj.target)
            if ty_i is None or ty_j is None:
                continue
            i_removable = _transition_value_name(ti) not in pinned
            j_removable = _transition_value_name(tj) not in pinned
            if not (i_removable or j_removable):
                continue
            spent += 1
            i_sub_j = j_removable and _subtype_semantically(a, ty_i, ty_j, env, oracle)
            j_sub_i = i_removable and _subtype_semantically(a, ty_j, ty_i, env, oracle)
            if i_sub_j and j_sub_i:
                kept, removed = (i, j) if i < j else (j, i)
            elif i_sub_j:
                kept, removed = i, j
            elif j_sub_i:
                kept, removed = j, i
            else:
                continue
            if e.add(kept, removed):
                stats.pairs_recorded += 1
    return e


# ---------------------------------------------------------------------------
# Minimize


def minimize(a: LTA, e: SimilaritySet,
             stats: Optional[ReductionStats] = None) -> tuple[LTA, SimilaritySet]:
    """Merge recorded pairs: remove the supertype-side transition and
    redirect every use of its target state onto the subtype's; the
    similarity set is reset afterwards."""
    from .syntax import EVar, Rel

    stats = stats if stats is not None else ReductionStats()
    redirect: dict[TransitionId, TransitionId] = {}

    def reaches_down(start: StateId, goal_state: StateId) -> bool:
        seen: set[StateId] = set()
        stack = [start]
        while stack:
            q = stack.pop()
            if q == goal_state:
                return True
            if q in seen:
                continue
            seen.add(q)
            for tid in a.by_target.get(q, []):
                stack.extend(a.transitions[tid].children)
        return False

    for kept, removed in list(e.pairs):
        kept = redirect.get(kept, kept)
        removed = redirect.get(removed, removed)
        if kept == removed:
            continue
        if kept not in a.transitions or removed not in a.transitions:
            continue  # stale pair: already merged away
        tk = a.transitions[kept]
        tr = a.transitions[removed]
        q_keep, q_drop = tk.target, tr.target
        if reaches_down(q_keep, q_drop):
            continue  # rewiring would make the survivor its own descendant
        # stored types elsewhere may still mention the dropped value by
        # name: keep its binding and equate it with the survivor, whose
        # subtype value stands in for it
        n_drop = _transition_value_name(tr)
        n_keep = _transition_value_name(tk)
        dropped_ty = term_state_type(a, q_drop)
        a.remove_transition(removed)
        redirect[removed] = kept
        stats.transitions_merged += 1
        if n_drop and n_keep and n_drop != n_keep:
            if dropped_ty is not None:
                a.extra_env.append((n_drop, dropped_ty))
            a.extra_env.append(Rel("=", EVar(n_drop), EVar(n_keep)))
        # redirect users only when the dropped state has no remaining
        # alternatives; otherwise they must keep feeding from it
        if q_keep != q_drop and not a.by_target.get(q_drop):
            for user in sorted(a.by_child.get(q_drop, set())):
                a.rewire_child(user, q_drop, q_keep)
    cleaned = normalize(a, sweep_unreachable=False)
    _replace_with(a, cleaned)
    e.clear()
    return a, e
