"""The constrained tree automaton at the heart of the synthesizer.

States pool alternatives; transitions carry a symbol, ordered child states,
and a constraint over positions (paths of 1-based child indices).  Atomic
constraints are syntactic equality and semantic entailment between the
sub-automata reached at two positions; entailment is discharged by the
oracle from `entailment`.

Term-level transitions keep their type sub-automaton as child 1, so
positions compose uniformly: `fun.in` is 2.1.1 from an application
(function child, its type, the arrow's argument), `arg.type.ref` is 3.1.3,
and so on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from .entailment import CtxEntry, EntailmentQuery, Oracle
from .syntax import (
    App, BaseType, Const, EApp, EBool, ELit, EVar, Expr, If, INT, Qualifier,
    QTrue, RArrow, RBase, RefinementType, Term, TRUE, VALUE_VAR, Var,
    apply_base_subst, qual_subst, qual_subst_refvars, BPrim,
)

StateId = int
TransitionId = int


# ---------------------------------------------------------------------------
# Symbols


@dataclass(frozen=True)
class SymVar:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SymConst:
    value: object
    base: BaseType

    def __str__(self) -> str:
        return str(Const(self.value, self.base))


@dataclass(frozen=True)
class SymApp:
    def __str__(self) -> str:
        return "app"


@dataclass(frozen=True)
class SymIf:
    def __str__(self) -> str:
        return "if"


@dataclass(frozen=True)
class SymGoal:
    def __str__(self) -> str:
        return "goal"


@dataclass(frozen=True)
class SymTau:
    def __str__(self) -> str:
        return "tau"


@dataclass(frozen=True)
class SymArrow:
    def __str__(self) -> str:
        return "arrow"


@dataclass(frozen=True)
class SymBinder:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SymBase:
    base: BaseType

    def __str__(self) -> str:
        return str(self.base)


@dataclass(frozen=True)
class SymQual:
    qual: Qualifier

    def __str__(self) -> str:
        return str(self.qual)


@dataclass(frozen=True)
class SymAlpha:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SymKappa:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SymBottom:
    def __str__(self) -> str:
        return "bottom"


@dataclass(frozen=True)
class SymNode:
    """Generic labeled symbol for hand-built and random automata."""

    label: str

    def __str__(self) -> str:
        return self.label


Symbol = Union[SymVar, SymConst, SymApp, SymIf, SymGoal, SymTau, SymArrow,
               SymBinder, SymBase, SymQual, SymAlpha, SymKappa, SymBottom, SymNode]

BOTTOM = SymBottom()

# label aliases per symbol kind, for readable positions
_LABELS: dict[type, dict[str, int]] = {
    SymApp: {"type": 1, "fun": 2, "arg": 3},
    SymIf: {"type": 1, "cond": 2, "then": 3, "else": 4},
    SymGoal: {"type": 1, "term": 2},
    SymTau: {"var": 1, "base": 2, "ref": 3},
    SymArrow: {"in": 1, "out": 2},
    SymVar: {"type": 1},
    SymConst: {"type": 1},
}


def label_index(sym: Symbol, label: str) -> Optional[int]:
    return _LABELS.get(type(sym), {}).get(label)


# ---------------------------------------------------------------------------
# Positions


@dataclass(frozen=True)
class Position:
    path: tuple[int, ...]
    label: str = ""

    def __post_init__(self):
        assert all(i >= 1 for i in self.path)

    def __eq__(self, other) -> bool:
        return isinstance(other, Position) and self.path == other.path

    def __hash__(self) -> int:
        return hash(self.path)

    def __str__(self) -> str:
        if self.label:
            return self.label
        return ".".join(str(i) for i in self.path) if self.path else "ε"

    def extend(self, *idx: int, label: str = "") -> "Position":
        lbl = f"{self.label}.{label}" if self.label and label else label
        return Position(self.path + tuple(idx), lbl)


EPSILON = Position(())


def pos(*path: int, label: str = "") -> Position:
    return Position(tuple(path), label)


# ---------------------------------------------------------------------------
# Constraints


@dataclass(frozen=True)
class CTrue:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class CFalse:
    def __str__(self) -> str:
        return "false"


@dataclass(frozen=True)
class SynEq:
    lhs: Position
    rhs: Position

    def __str__(self) -> str:
        return f"{self.lhs} = {self.rhs}"


@dataclass(frozen=True)
class SemEnt:
    lhs: Position
    rhs: Position

    def __str__(self) -> str:
        return f"{self.lhs} |= {self.rhs}"


@dataclass(frozen=True)
class CNot:
    arg: "Constraint"

    def __str__(self) -> str:
        return f"not({self.arg})"


@dataclass(frozen=True)
class CAnd:
    items: tuple["Constraint", ...]

    def __str__(self) -> str:
        return " /\\ ".join(f"({c})" if isinstance(c, (CAnd, COr)) else str(c)
                            for c in self.items)


@dataclass(frozen=True)
class COr:
    items: tuple["Constraint", ...]

    def __str__(self) -> str:
        return " \\/ ".join(f"({c})" for c in self.items)


@dataclass(frozen=True)
class CSubst:
    """theta.psi with theta = [replacement/target] pairs over positions."""

    pairs: tuple[tuple[Position, Position], ...]
    body: "Constraint"

    def __str__(self) -> str:
        theta = ", ".join(f"{r}/{t}" for r, t in self.pairs)
        return f"[{theta}].({self.body})"


@dataclass(frozen=True)
class CGuard:
    """Evaluate `body` with the qualifier at `cond` (positively or negated)
    added to the entailment context: the path-sensitive reading of
    conditional typing."""

    cond: Position
    positive: bool
    body: "Constraint"

    def __str__(self) -> str:
        sign = "" if self.positive else "not "
        return f"assume({sign}{self.cond}).({self.body})"


Constraint = Union[CTrue, CFalse, SynEq, SemEnt, CNot, CAnd, COr, CSubst, CGuard]

C_TRUE = CTrue()
C_FALSE = CFalse()


def c_and(items: Sequence[Constraint]) -> Constraint:
    flat: list[Constraint] = []
    for c in items:
        if isinstance(c, CTrue):
            continue
        if isinstance(c, CFalse):
            return C_FALSE
        if isinstance(c, CAnd):
            flat.extend(c.items)
        else:
            flat.append(c)
    if not flat:
        return C_TRUE
    if len(flat) == 1:
        return flat[0]
    return CAnd(tuple(flat))


def constraint_positions(c: Constraint) -> list[Position]:
    match c:
        case SynEq(l, r) | SemEnt(l, r):
            return [l, r]
        case CNot(a):
            return constraint_positions(a)
        case CAnd(items) | COr(items):
            out: list[Position] = []
            for i in items:
                out.extend(constraint_positions(i))
            return out
        case CSubst(pairs, body):
            out = [p for pair in pairs for p in pair]
            out.extend(constraint_positions(body))
            return out
        case CGuard(cond, _, body):
            return [cond] + constraint_positions(body)
        case _:
            return []


def conjunct_atoms(c: Constraint) -> list[tuple[Constraint, tuple, tuple]]:
    """Flatten a constraint into top-level conjunct atoms, each with the
    substitution pairs and guards in scope: [(atom, theta_pairs, guards)].
    Disjunctions and negations are not split (no pruning on them)."""
    out: list[tuple[Constraint, tuple, tuple]] = []

    def go(c: Constraint, theta: tuple, guards: tuple) -> None:
        match c:
            case CAnd(items):
                for i in items:
                    go(i, theta, guards)
            case CSubst(pairs, body):
                go(body, theta + tuple(pairs), guards)
            case CGuard(cond, positive, body):
                go(body, theta, guards + ((cond, positive),))
            case SynEq() | SemEnt():
                out.append((c, theta, guards))
            case _:
                pass

    go(c, (), ())
    return out


# ---------------------------------------------------------------------------
# Transitions and the automaton


@dataclass
class Transition:
    id: TransitionId
    symbol: Symbol
    children: tuple[StateId, ...]
    constraint: Constraint
    target: StateId
    ty_inst: tuple = ()    # ((tyvar, BaseType), ...) resolved type arguments
    pred_inst: tuple = ()  # ((predvar, Qualifier), ...) resolved refinements

    @property
    def is_bottom(self) -> bool:
        return isinstance(self.symbol, SymBottom)

    def ty_map(self) -> dict[str, BaseType]:
        return dict(self.ty_inst)

    def pred_map(self) -> dict[str, Qualifier]:
        return dict(self.pred_inst)

    def __str__(self) -> str:
        kids = ", ".join(f"q{c}" for c in self.children)
        cons = f" [{self.constraint}]" if not isinstance(self.constraint, CTrue) else ""
        return f"d{self.id}: {self.symbol}({kids}) -> q{self.target}{cons}"


class PositionUnresolved(Exception):
    def __init__(self, position: Position):
        super().__init__(f"position {position} does not resolve")
        self.position = position


class LTA:
    """Mutable automaton with deterministic ids and id-ordered iteration."""

    def __init__(self) -> None:
        self.states: set[StateId] = set()
        self.finals: set[StateId] = set()
        self.transitions: dict[TransitionId, Transition] = {}
        self.by_target: dict[StateId, list[TransitionId]] = {}
        self.by_child: dict[StateId, set[TransitionId]] = {}
        self.depth = 0
        self._next_state = 0
        self._next_transition = 0
        self.truncated = False  # set by denote when a budget clipped a result
        # facts carried across merges: bindings and alias equalities for
        # value names whose transitions were merged away
        self.extra_env: list = []
        self._version = 0
        self._cyc_dirty = False  # cached cyclic-state set needs recompute
        self._cyc_cache: frozenset = frozenset()

    # -- construction

    def add_state(self, final: bool = False) -> StateId:
        self._version += 1
        q = self._next_state
        self._next_state += 1
        self.states.add(q)
        self.by_target.setdefault(q, [])
        if final:
            self.finals.add(q)
        return q

    def add_transition(self, symbol: Symbol, children: Sequence[StateId],
                       target: StateId, constraint: Constraint = C_TRUE,
                       ty_inst: Mapping[str, BaseType] | tuple = (),
                       pred_inst: Mapping[str, Qualifier] | tuple = ()) -> Transition:
        assert target in self.states
        assert all(c in self.states for c in children)
        if isinstance(symbol, SymBottom):
            children = ()
            constraint = C_FALSE
        t = Transition(
            id=self._next_transition,
            symbol=symbol,
            children=tuple(children),
            constraint=constraint,
            target=target,
            ty_inst=tuple(sorted(ty_inst.items())) if isinstance(ty_inst, Mapping) else tuple(ty_inst),
            pred_inst=tuple(sorted(pred_inst.items())) if isinstance(pred_inst, Mapping) else tuple(pred_inst),
        )
        self._version += 1
        if self.by_child.get(target):
            # the target feeds other transitions: a new incoming edge may
            # close a dependency cycle
            self._cyc_dirty = True
        self._next_transition += 1
        self.transitions[t.id] = t
        self.by_target.setdefault(target, []).append(t.id)
        for c in t.children:
            self.by_child.setdefault(c, set()).add(t.id)
        return t

    def remove_transition(self, tid: TransitionId) -> None:
        t = self.transitions.pop(tid, None)
        if t is None:
            return
        self._version += 1
        self.by_target[t.target].remove(tid)
        for c in t.children:
            s = self.by_child.get(c)
            if s is not None:
                s.discard(tid)

    def remove_state(self, q: StateId) -> None:
        for tid in list(self.by_target.get(q, [])):
            self.remove_transition(tid)
        for tid in list(self.by_child.get(q, set())):
            self.remove_transition(tid)
        self.states.discard(q)
        self.finals.discard(q)
        self.by_target.pop(q, None)
        self.by_child.pop(q, None)

    def rewire_child(self, tid: TransitionId, old: StateId, new: StateId) -> None:
        self._version += 1
        self._cyc_dirty = True
        t = self.transitions[tid]
        children = tuple(new if c == old else c for c in t.children)
        for c in t.children:
            self.by_child.get(c, set()).discard(tid)
        t.children = children
        for c in children:
            self.by_child.setdefault(c, set()).add(tid)

    def incoming(self, q: StateId) -> list[Transition]:
        return [self.transitions[t] for t in sorted(self.by_target.get(q, []))]

    def clone(self) -> "LTA":
        other = LTA()
        other.states = set(self.states)
        other.finals = set(self.finals)
        other.transitions = {tid: replace(t) for tid, t in self.transitions.items()}
        other.by_target = {q: list(ts) for q, ts in self.by_target.items()}
        other.by_child = {q: set(ts) for q, ts in self.by_child.items()}
        other.depth = self.depth
        other._next_state = self._next_state
        other._next_transition = self._next_transition
        other.extra_env = list(self.extra_env)
        other._version = self._version
        other._cyc_dirty = self._cyc_dirty
        other._cyc_cache = self._cyc_cache
        return other

    def stats(self) -> dict:
        return {"states": len(self.states), "transitions": len(self.transitions),
                "finals": len(self.finals), "depth": self.depth}

    # -- rendering

    def dump(self) -> str:
        lines = [f"states: {len(self.states)}  finals: {sorted(self.finals)}  depth: {self.depth}"]
        for tid in sorted(self.transitions):
            lines.append("  " + str(self.transitions[tid]))
        return "\n".join(lines) + "\n"

    def dump_dot(self) -> str:
        lines = ["digraph lta {", "  rankdir=BT;"]
        for q in sorted(self.states):
            shape = "doublecircle" if q in self.finals else "circle"
            lines.append(f'  q{q} [shape={shape} label="q{q}"];')
        for tid in sorted(self.transitions):
            t = self.transitions[tid]
            c = str(t.constraint).replace('"', "'")
            label = f"{t.symbol}"
            if not isinstance(t.constraint, CTrue):
                label += f"\\n{c}"
            lines.append(f'  d{tid} [shape=box label="{label}"];')
            lines.append(f"  d{tid} -> q{t.target};")
            for i, ch in enumerate(t.children, start=1):
                lines.append(f'  q{ch} -> d{tid} [label="{i}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Positions over the automaton


def at_position(a: LTA, root: StateId | Transition, p: Position) -> set[TransitionId]:
    """Transitions reachable at position `p`.  A state at epsilon yields its
    incoming transitions, an index steps into a transition's child state,
    and out-of-range indices yield the empty set.  Pass a Transition object
    to resolve relative to one transition."""
    if isinstance(root, Transition):
        if not p.path:
            return {root.id}
        j = p.path[0]
        if j > len(root.children):
            return set()
        return at_position(a, root.children[j - 1], Position(p.path[1:]))
    if root not in a.states:
        return set()
    if not p.path:
        return set(a.by_target.get(root, []))
    out: set[TransitionId] = set()
    for t in a.incoming(root):
        out |= at_position(a, t, p)
    return out


def transition_symbol(a: LTA, tid: TransitionId) -> Symbol:
    return a.transitions[tid].symbol


# ---------------------------------------------------------------------------
# Concrete trees (elements of a denotation)


@dataclass(frozen=True)
class SymTree:
    symbol: Symbol
    children: tuple["SymTree", ...] = ()
    tid: TransitionId = -1
    ty_inst: tuple = ()
    pred_inst: tuple = ()

    def node_at(self, path: tuple[int, ...]) -> Optional["SymTree"]:
        node: SymTree = self
        for j in path:
            if j > len(node.children):
                return None
            node = node.children[j - 1]
        return node

    def __str__(self) -> str:
        if not self.children:
            return str(self.symbol)
        return f"{self.symbol}({', '.join(str(c) for c in self.children)})"


def tree_call_count(t: SymTree) -> int:
    n = 0
    if isinstance(t.symbol, SymApp) and len(t.children) >= 2 \
            and isinstance(t.children[1].symbol, SymVar):
        n += 1
    for c in t.children:
        n += tree_call_count(c)
    return n


def tree_size(t: SymTree) -> int:
    return 1 + sum(tree_size(c) for c in t.children)


def tree_to_type(t: SymTree) -> RefinementType:
    """Rebuild a refinement type from a type-shaped tree, applying any
    recorded instantiations."""
    sym = t.symbol
    if isinstance(sym, SymTau):
        binder = t.children[0].symbol
        base = t.children[1]
        ref = t.children[2]
        bname = binder.name if isinstance(binder, SymBinder) else str(binder)
        return RBase(bname, _tree_to_base(base), _tree_qual(ref))
    if isinstance(sym, SymArrow):
        arg = tree_to_type(t.children[0])
        res = tree_to_type(t.children[1])
        arg_name = arg.binder if isinstance(arg, RBase) else f"h{t.tid}"
        return RArrow(arg_name, arg, res)
    raise ValueError(f"not a type tree: {t}")


def _tree_to_base(t: SymTree) -> BaseType:
    sym = t.symbol
    if isinstance(sym, SymBase):
        return sym.base
    if isinstance(sym, SymAlpha):
        from .syntax import BVar
        return BVar(sym.name)
    raise ValueError(f"not a base-type node: {t}")


def _tree_qual(t: SymTree) -> Qualifier:
    sym = t.symbol
    if isinstance(sym, SymQual):
        return sym.qual
    if isinstance(sym, SymKappa):
        from .syntax import RefVar
        return RefVar(sym.name)
    raise ValueError(f"not a qualifier node: {t}")


def tree_to_term(t: SymTree) -> Term:
    """Project the term out of a term-shaped tree (type children dropped)."""
    sym = t.symbol
    if isinstance(sym, SymVar):
        return Var(sym.name)
    if isinstance(sym, SymConst):
        return Const(sym.value, sym.base)
    if isinstance(sym, SymApp):
        return App(tree_to_term(t.children[1]), tree_to_term(t.children[2]))
    if isinstance(sym, SymIf):
        return If(tree_to_term(t.children[1]), tree_to_term(t.children[2]),
                  tree_to_term(t.children[3]))
    if isinstance(sym, SymGoal):
        return tree_to_term(t.children[1])
    raise ValueError(f"not a term tree: {t}")


def tree_type_of(t: SymTree) -> Optional[RefinementType]:
    """The type carried by a term-shaped tree's type child, if any."""
    if isinstance(t.symbol, (SymVar, SymConst, SymApp, SymIf, SymGoal)) and t.children:
        try:
            return tree_to_type(t.children[0])
        except ValueError:
            return None
    return None


# -- witness naming for composite subtrees
#
# A composite subterm is named after the transition that produced it,
# matching the binder the environment relation introduces for that
# transition, so entailment contexts know the subterm's refinement.


def tree_witness_name(t: SymTree, path: tuple[int, ...]) -> str:
    node = t.node_at(path)
    return f"t{node.tid}" if node is not None else f"t{t.tid}"


def name_expr_at(node: SymTree, witness: str) -> Expr:
    """The expression standing for the value at a tree node: variables and
    constants denote themselves, composites denote their witness binder."""
    sym = node.symbol
    if isinstance(sym, SymVar):
        return EVar(sym.name)
    if isinstance(sym, SymBinder):
        return EVar(sym.name)
    if isinstance(sym, SymConst):
        if isinstance(sym.value, bool):
            return EBool(sym.value)
        if isinstance(sym.value, int):
            return ELit(sym.value)
        return EVar(witness)
    if isinstance(sym, SymTau):
        return name_expr_at(node.children[0], witness)
    return EVar(witness)


# ---------------------------------------------------------------------------
# Constraint satisfaction on concrete trees


def _apply_insts(q: Qualifier, ty_inst: tuple, pred_inst: tuple) -> Qualifier:
    if pred_inst:
        q = qual_subst_refvars(q, dict(pred_inst))
    return q


def term_satisfies(t: SymTree, c: Constraint, env: Sequence[CtxEntry],
                   oracle: Oracle) -> bool:
    """Does the concrete tree satisfy the constraint that its root
    transition carries?  Syntactic atoms compare subtrees structurally
    (modulo the transition's type instantiation); entailment atoms ask the
    oracle, grounding both qualifiers at the value standing at the
    constrained positions."""
    ty_map = dict(t.ty_inst)

    def node(p: Position) -> SymTree:
        n = t.node_at(p.path)
        if n is None:
            raise PositionUnresolved(p)
        return n

    def syn_equal(a: SymTree, b: SymTree) -> bool:
        sa, sb = a.symbol, b.symbol
        if isinstance(sa, SymBase) and isinstance(sb, SymBase):
            return apply_base_subst(sa.base, ty_map) == apply_base_subst(sb.base, ty_map)
        if isinstance(sa, SymAlpha):
            from .syntax import BVar
            if isinstance(sb, SymBase):
                return apply_base_subst(BVar(sa.name), ty_map) == apply_base_subst(sb.base, ty_map)
        if isinstance(sb, SymAlpha):
            from .syntax import BVar
            if isinstance(sa, SymBase):
                return apply_base_subst(sa.base, ty_map) == apply_base_subst(BVar(sb.name), ty_map)
        if sa != sb or len(a.children) != len(b.children):
            return False
        return all(syn_equal(x, y) for x, y in zip(a.children, b.children))

    def qual_at(n: SymTree, pinst: tuple) -> Qualifier:
        sym = n.symbol
        if isinstance(sym, SymQual):
            return _apply_insts(sym.qual, (), pinst)
        if isinstance(sym, SymKappa):
            pm = dict(pinst)
            if sym.name in pm:
                return pm[sym.name]
            from .syntax import RefVar
            return RefVar(sym.name)
        if isinstance(sym, SymTau):
            return qual_at(n.children[2], pinst)
        raise PositionUnresolved(EPSILON)

    def value_info(p: Position) -> tuple[Optional[BaseType], Optional[str]]:
        """Sort and binder of the type node enclosing a ref position."""
        if p.path and p.path[-1] == 3:
            parent = t.node_at(p.path[:-1])
            if parent is not None and isinstance(parent.symbol, SymTau):
                basen = parent.children[1].symbol
                binder = parent.children[0].symbol
                base = basen.base if isinstance(basen, SymBase) else None
                bind = binder.name if isinstance(binder, SymBinder) else None
                return (apply_base_subst(base, ty_map) if base else None, bind)
        n = t.node_at(p.path)
        if n is not None and isinstance(n.symbol, SymTau):
            basen = n.children[1].symbol
            base = basen.base if isinstance(basen, SymBase) else None
            return (apply_base_subst(base, ty_map) if base else None, None)
        return (None, None)

    def theta_to_subst(theta: tuple) -> dict[str, Expr | str]:
        """Eq.-3 style: for each [p_repl/p_target], the name at the target
        position is replaced by the expression at the replacement."""
        sub: dict[str, Expr | str] = {}
        for p_repl, p_target in theta:
            tgt = t.node_at(p_target.path)
            rep = t.node_at(p_repl.path)
            if tgt is None or rep is None:
                raise PositionUnresolved(p_target if tgt is None else p_repl)
            tgt_name = _node_name(t, tgt, p_target)
            rep_expr = name_expr_at(rep, tree_witness_name(t, p_repl.path))
            if tgt_name is not None:
                sub[tgt_name] = rep_expr
        return sub

    def extra_bindings() -> list[CtxEntry]:
        """Witness bindings for composite subterms referenced by positions
        (redundant when the caller passes a full environment, needed for
        standalone use)."""
        out: list[CtxEntry] = []
        seen: set[str] = {e[0] for e in env if isinstance(e, tuple)}

        def visit(n: SymTree) -> None:
            if isinstance(n.symbol, (SymApp, SymIf)):
                ty = tree_type_of(n)
                w = f"t{n.tid}"
                if ty is not None and w not in seen:
                    seen.add(w)
                    out.append((w, ty))
            for c in n.children:
                visit(c)

        visit(t)
        return out

    witness_env: Optional[list[CtxEntry]] = None

    def eval_c(c: Constraint, theta: tuple, guards: list[Qualifier]) -> bool:
        nonlocal witness_env
        match c:
            case CTrue():
                return True
            case CFalse():
                return False
            case CAnd(items):
                return all(eval_c(i, theta, guards) for i in items)
            case COr(items):
                return any(eval_c(i, theta, guards) for i in items)
            case CNot(arg):
                return not eval_c(arg, theta, guards)
            case CSubst(pairs, body):
                return eval_c(body, theta + tuple(pairs), guards)
            case CGuard(cond, positive, body):
                g = _guard_qualifier(t, cond, positive)
                return eval_c(body, theta, guards + [g])
            case SynEq(l, r):
                return syn_equal(node(l), node(r))
            case SemEnt(l, r):
                ln, rn = node(l), node(r)
                lsort, _ = value_info(l)
                ante = qual_at(ln, t.pred_inst)
                cons = qual_at(rn, t.pred_inst)
                sub = theta_to_subst(theta)
                if witness_env is None:
                    witness_env = extra_bindings()
                q = EntailmentQuery.make(
                    context=tuple(env) + tuple(witness_env) + tuple(guards),
                    subst=sub,
                    antecedent=ante,
                    consequent=cons,
                    value_sort=lsort or INT,
                )
                return oracle.check_entailment(q).is_valid
        raise TypeError(c)

    return eval_c(c, (), [])


def _node_name(root: SymTree, n: SymTree, p: Position) -> Optional[str]:
    sym = n.symbol
    if isinstance(sym, SymVar):
        return sym.name
    if isinstance(sym, SymBinder):
        return sym.name
    if isinstance(sym, SymTau):
        return _node_name(root, n.children[0], p)
    if isinstance(sym, (SymApp, SymIf)):
        return tree_witness_name(root, p.path)
    return None


def _guard_qualifier(t: SymTree, cond: Position, positive: bool) -> Qualifier:
    """Path condition: the condition's refinement grounded at its value,
    conjoined with (or negated) truth of that value."""
    from .syntax import And, Atom, Not

    n = t.node_at(cond.path)
    if n is None:
        raise PositionUnresolved(cond)
    # cond points at the condition subtree root (term-shaped)
    from .syntax import QFalse, conj

    val = name_expr_at(n, tree_witness_name(t, cond.path))
    parts: list[Qualifier] = []
    ty = tree_type_of(n)
    if ty is not None and isinstance(ty, RBase) and not isinstance(ty.qual, QTrue):
        parts.append(qual_subst(ty.qual, {VALUE_VAR: val}))
    if isinstance(val, EBool):
        truth: Qualifier = TRUE if val.value else QFalse()
    else:
        truth = Atom(val)
    if not positive:
        truth = Not(truth)
    parts.append(truth)
    return conj(parts)


# ---------------------------------------------------------------------------
# Denotation


@dataclass
class DenoteBudget:
    max_depth: int = 6          # cycle-unrolling allowance per state
    max_terms: int = 256        # cap on the returned list
    node_cap: int = 4096        # cap per intermediate state expansion


def denote(a: LTA, root: StateId, budget: DenoteBudget | tuple = (6, 256),
           env: Sequence[CtxEntry] = (), oracle: Optional[Oracle] = None,
           counter: Optional[list] = None) -> list[SymTree]:
    """Enumerate accepted trees of the sub-automaton rooted at `root`,
    ascending by library-call count, filtering through every transition
    constraint.  Cycles are truncated once a state repeats `max_depth`
    times on the current spine."""
    if isinstance(budget, tuple):
        budget = DenoteBudget(max_depth=budget[0], max_terms=budget[1])
    oracle = oracle or Oracle()
    cyclic = cyclic_states(a)
    memo: dict[StateId, list[SymTree]] = {}

    def expand(q: StateId, spine: dict[StateId, int]) -> list[SymTree]:
        if q in memo and q not in cyclic:
            return memo[q]
        count = spine.get(q, 0)
        if count >= budget.max_depth:
            a.truncated = True
            return []
        spine2 = dict(spine)
        spine2[q] = count + 1
        out: list[SymTree] = []
        for t in a.incoming(q):
            if t.is_bottom:
                continue
            child_sets = []
            dead = False
            for c in t.children:
                trees = expand(c, spine2)
                if not trees:
                    dead = True
                    break
                child_sets.append(trees)
            if dead:
                continue
            for combo in itertools.product(*child_sets):
                if counter is not None and isinstance(t.symbol, (SymApp, SymIf, SymVar, SymConst)):
                    counter[0] += 1
                cand = SymTree(t.symbol, tuple(combo), t.id, t.ty_inst, t.pred_inst)
                if isinstance(t.constraint, CTrue) or \
                        term_satisfies(cand, t.constraint, env, oracle):
                    out.append(cand)
                if len(out) >= budget.node_cap:
                    a.truncated = True
                    break
            if len(out) >= budget.node_cap:
                break
        out.sort(key=lambda s: (tree_call_count(s), tree_size(s), s.tid))
        if q not in cyclic:
            memo[q] = out
        return out

    result = expand(root, {})
    if len(result) > budget.max_terms:
        a.truncated = True
        result = result[:budget.max_terms]
    return result


def nempty(a: LTA, env: Sequence[CtxEntry] = (), oracle: Optional[Oracle] = None,
           budget: Optional[DenoteBudget] = None,
           max_calls: Optional[int] = None) -> set[StateId]:
    """Final states whose denotation is non-empty (optionally restricted to
    trees with at most `max_calls` library calls)."""
    budget = budget or DenoteBudget()
    out: set[StateId] = set()
    for q in sorted(a.finals):
        trees = denote(a, q, budget, env, oracle)
        if max_calls is not None:
            trees = [t for t in trees if tree_call_count(t) <= max_calls]
        if trees:
            out.add(q)
    return out


# ---------------------------------------------------------------------------
# Structure maintenance


def normalize(a: LTA, sweep_unreachable: bool = True) -> LTA:
    """Fixpoint removal of bottom transitions and of transitions with an
    empty child state; optionally drop states that no final state depends
    on.  Pure: returns a cleaned clone."""
    b = a.clone()
    changed = True
    while changed:
        changed = False
        for tid in sorted(b.transitions):
            t = b.transitions[tid]
            if t.is_bottom or isinstance(t.constraint, CFalse):
                b.remove_transition(tid)
                changed = True
                continue
            if any(not b.by_target.get(c) for c in t.children):
                b.remove_transition(tid)
                changed = True
    for q in sorted(b.states):
        if not b.by_target.get(q) and q not in b.finals:
            b.remove_state(q)  # empty state: nothing can ever target it again
    if sweep_unreachable:
        live: set[StateId] = set()
        stack = sorted(b.finals)
        while stack:
            q = stack.pop()
            if q in live:
                continue
            live.add(q)
            for t in b.incoming(q):
                for c in t.children:
                    if c not in live:
                        stack.append(c)
        for q in sorted(set(b.states) - live):
            b.remove_state(q)
    return b


def dependency_graph(a: LTA) -> dict[StateId, set[StateId]]:
    """Edges (q' -> q) when q' feeds a transition targeting q."""
    edges: dict[StateId, set[StateId]] = {q: set() for q in a.states}
    for t in a.transitions.values():
        for c in t.children:
            edges[c].add(t.target)
    return edges


def cyclic_states(a: LTA) -> set[StateId]:
    """States on a directed cycle of the dependency graph (Tarjan).  The
    result is cached; additions targeting an unconsumed state cannot close
    a cycle, so the cache survives ordinary construction.  Removals may
    leave a stale superset, which only makes downstream checks more
    conservative."""
    if not a._cyc_dirty:
        return set(a._cyc_cache) & a.states
    edges = dependency_graph(a)
    index: dict[StateId, int] = {}
    low: dict[StateId, int] = {}
    on_stack: set[StateId] = set()
    stack: list[StateId] = []
    counter = itertools.count()
    cyclic: set[StateId] = set()

    def strongconnect(v: StateId) -> None:
        work = [(v, iter(sorted(edges.get(v, ()))))]
        index[v] = low[v] = next(counter)
        stack.append(v)
        on_stack.add(v)
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = next(counter)
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(edges.get(w, ())))))
                    advanced = True
                    break
                elif w in on_stack:
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                if len(comp) > 1:
                    cyclic.update(comp)
                elif comp[0] in edges.get(comp[0], set()):
                    cyclic.add(comp[0])  # self-loop

    for v in sorted(a.states):
        if v not in index:
            strongconnect(v)
    a._cyc_cache = frozenset(cyclic)
    a._cyc_dirty = False
    return cyclic


def constraint_well_formed(a: LTA, t: Transition) -> bool:
    """Every position mentioned by the constraint must resolve without
    touching a cyclic state."""
    cyc = cyclic_states(a)
    if not cyc:
        return True

    def touches_cyclic(root: Transition, path: tuple[int, ...]) -> bool:
        if not path:
            return False
        j = path[0]
        if j > len(root.children):
            return False
        q = root.children[j - 1]
        if q in cyc:
            return True
        return any(touches_cyclic(a.transitions[tid], path[1:])
                   for tid in a.by_target.get(q, []))

    for p in constraint_positions(t.constraint):
        if touches_cyclic(t, p.path):
            return False
    return True
