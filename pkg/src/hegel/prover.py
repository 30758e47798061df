"""Validity checking for the qualifier fragment.

Decides satisfiability of quantifier-free formulas over linear integer
arithmetic plus uninterpreted functions and opaque sorts, with bounded
ground instantiation for quantifiers.  All arithmetic is exact (Python
ints); integer feasibility uses the Omega test, so answers are decisive
inside the fragment and `None` (unknown) outside it.

The formula language here is a small sorted FOL; `translate` lowers
qualifiers from `syntax` into it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import gcd
from typing import Optional, Union

# ---------------------------------------------------------------------------
# Sorted first-order terms.  Sorts: "int", "bool", or "u" (one opaque sort for
# every non-arithmetic value; merging opaque sorts preserves satisfiability
# because only equality atoms can mention them).


@dataclass(frozen=True)
class TVar:
    name: str
    sort: str


@dataclass(frozen=True)
class TInt:
    value: int

    @property
    def sort(self) -> str:
        return "int"


@dataclass(frozen=True)
class TBool:
    value: bool

    @property
    def sort(self) -> str:
        return "bool"


@dataclass(frozen=True)
class TAdd:
    args: tuple["FTerm", ...]

    @property
    def sort(self) -> str:
        return "int"


@dataclass(frozen=True)
class TMul:
    factor: int
    arg: "FTerm"

    @property
    def sort(self) -> str:
        return "int"


@dataclass(frozen=True)
class TApp:
    fn: str
    args: tuple["FTerm", ...]
    result_sort: str

    @property
    def sort(self) -> str:
        return self.result_sort


FTerm = Union[TVar, TInt, TBool, TAdd, TMul, TApp]


@dataclass(frozen=True)
class FAtom:
    """op in {"=", "<="} for int sides; "=" for bool/opaque sides."""

    op: str
    lhs: FTerm
    rhs: FTerm


@dataclass(frozen=True)
class FNot:
    arg: "Formula"


@dataclass(frozen=True)
class FAnd:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class FOr:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class FQuant:
    kind: str  # "forall" | "exists"
    var: TVar
    body: "Formula"


@dataclass(frozen=True)
class FConst:
    value: bool


Formula = Union[FAtom, FNot, FAnd, FOr, FQuant, FConst]

F_TRUE = FConst(True)
F_FALSE = FConst(False)


def f_and(args: list[Formula]) -> Formula:
    flat: list[Formula] = []
    for a in args:
        if isinstance(a, FConst):
            if not a.value:
                return F_FALSE
            continue
        if isinstance(a, FAnd):
            flat.extend(a.args)
        else:
            flat.append(a)
    if not flat:
        return F_TRUE
    if len(flat) == 1:
        return flat[0]
    return FAnd(tuple(flat))


def f_or(args: list[Formula]) -> Formula:
    flat: list[Formula] = []
    for a in args:
        if isinstance(a, FConst):
            if a.value:
                return F_TRUE
            continue
        if isinstance(a, FOr):
            flat.extend(a.args)
        else:
            flat.append(a)
    if not flat:
        return F_FALSE
    if len(flat) == 1:
        return flat[0]
    return FOr(tuple(flat))


def f_not(a: Formula) -> Formula:
    if isinstance(a, FConst):
        return FConst(not a.value)
    if isinstance(a, FNot):
        return a.arg
    return FNot(a)


def f_implies(a: Formula, b: Formula) -> Formula:
    return f_or([f_not(a), b])


def term_subst(t: FTerm, sub: dict[str, FTerm]) -> FTerm:
    match t:
        case TVar(name, _):
            return sub.get(name, t)
        case TAdd(args):
            return TAdd(tuple(term_subst(a, sub) for a in args))
        case TMul(k, a):
            return TMul(k, term_subst(a, sub))
        case TApp(fn, args, rs):
            return TApp(fn, tuple(term_subst(a, sub) for a in args), rs)
        case _:
            return t


def formula_subst(f: Formula, sub: dict[str, FTerm]) -> Formula:
    match f:
        case FAtom(op, l, r):
            return FAtom(op, term_subst(l, sub), term_subst(r, sub))
        case FNot(a):
            return FNot(formula_subst(a, sub))
        case FAnd(args):
            return FAnd(tuple(formula_subst(a, sub) for a in args))
        case FOr(args):
            return FOr(tuple(formula_subst(a, sub) for a in args))
        case FQuant(kind, var, body):
            inner = {k: v for k, v in sub.items() if k != var.name}
            return FQuant(kind, var, formula_subst(body, inner))
        case _:
            return f


# ---------------------------------------------------------------------------
# Linear forms: mapping from "slot key" to coefficient plus a constant.
# A slot is an integer-sorted variable or uninterpreted application treated
# as an atomic integer unknown.


class NonLinear(Exception):
    pass


def linearize(t: FTerm, slots: dict[FTerm, str]) -> dict[str, int]:
    """Return {slot_name: coeff} with "" mapping to the constant."""

    def slot_of(term: FTerm) -> str:
        if term not in slots:
            slots[term] = f"s{len(slots)}"
        return slots[term]

    def go(t: FTerm, k: int, acc: dict[str, int]) -> None:
        match t:
            case TInt(v):
                acc[""] = acc.get("", 0) + k * v
            case TAdd(args):
                for a in args:
                    go(a, k, acc)
            case TMul(f, a):
                go(a, k * f, acc)
            case TVar() | TApp():
                name = slot_of(t)
                acc[name] = acc.get(name, 0) + k
            case _:
                raise NonLinear(str(t))

    acc: dict[str, int] = {}
    go(t, 1, acc)
    return acc


# ---------------------------------------------------------------------------
# Omega test: exact satisfiability of conjunctions of linear integer
# constraints.  Constraints are dicts {var: coeff} with "" the constant,
# meaning sum >= 0 (inequalities) or sum = 0 (equalities).

_OMEGA_SPLINTER_CAP = 4096


def _normalize(c: dict[str, int]) -> dict[str, int]:
    return {k: v for k, v in c.items() if v != 0 or k == ""}


def _content(c: dict[str, int]) -> int:
    g = 0
    for k, v in c.items():
        if k != "":
            g = gcd(g, abs(v))
    return g


def _tighten_ineq(c: dict[str, int]) -> Optional[dict[str, int]]:
    """Divide by the gcd of variable coefficients, flooring the constant.
    Returns None for a trivially true constraint, raises for unsat ground."""
    c = _normalize(c)
    vars_ = [k for k in c if k != ""]
    const = c.get("", 0)
    if not vars_:
        if const >= 0:
            return None
        raise _Unsat()
    g = _content(c)
    if g > 1:
        out = {k: v // g for k, v in c.items() if k != ""}
        # floor(const / g) keeps all integer solutions
        out[""] = const // g if const >= 0 else -((-const + g - 1) // g)
        return out
    c[""] = const
    return c


class _Unsat(Exception):
    pass


_sigma_counter = itertools.count()


def omega_sat(eqs: list[dict[str, int]], ineqs: list[dict[str, int]],
              budget: list[int]) -> bool:
    """Decide whether the system {e = 0 | e in eqs} ∪ {i >= 0 | i in ineqs}
    has an integer solution.  `budget` is a single-element splinter budget;
    exhausting it raises ProverBudget."""
    try:
        return _omega(eqs, ineqs, budget)
    except _Unsat:
        return False


class ProverBudget(Exception):
    pass


def _spend(budget: list[int], n: int = 1) -> None:
    budget[0] -= n
    if budget[0] < 0:
        raise ProverBudget()


def _omega(eqs: list[dict[str, int]], ineqs: list[dict[str, int]],
           budget: list[int]) -> bool:
    _spend(budget)
    eqs = [dict(_normalize(e)) for e in eqs]
    cleaned: list[dict[str, int]] = []
    for i in ineqs:
        t = _tighten_ineq(dict(i))
        if t is not None:
            cleaned.append(t)
    ineqs = cleaned

    # -- equality elimination
    while eqs:
        eq = eqs.pop()
        eq = _normalize(eq)
        vars_ = [k for k in eq if k != ""]
        const = eq.get("", 0)
        if not vars_:
            if const != 0:
                raise _Unsat()
            continue
        g = _content(eq)
        if const % g != 0:
            raise _Unsat()
        if g > 1:
            eq = {k: v // g for k, v in eq.items()}
            vars_ = [k for k in eq if k != ""]
        unit = next((k for k in vars_ if abs(eq[k]) == 1), None)
        if unit is not None:
            # solve for the unit variable and substitute everywhere
            a = eq[unit]
            repl = {k: -v * a for k, v in eq.items() if k != unit}

            def subst(c: dict[str, int], repl=repl, unit=unit) -> dict[str, int]:
                if unit not in c:
                    return c
                coef = c.pop(unit)
                for k, v in repl.items():
                    c[k] = c.get(k, 0) + coef * v
                return c

            eqs = [_normalize(subst(dict(e))) for e in eqs]
            new_ineqs = []
            for c in ineqs:
                t = _tighten_ineq(subst(dict(c)))
                if t is not None:
                    new_ineqs.append(t)
            ineqs = new_ineqs
            continue
        # Pugh's mod-reduction: no unit coefficient available.  Pick x_k with
        # the smallest |a_k|, set m = |a_k| + 1, and introduce sigma with
        #   -s*x_k + sum mod_hat(a_i) x_i + mod_hat(c) = m * sigma
        # (s = sign(a_k)); every integer solution admits such a sigma, and
        # the definition solves x_k with a unit coefficient.
        xk = min(vars_, key=lambda k: (abs(eq[k]), k))
        ak = eq[xk]
        s = 1 if ak > 0 else -1
        m = abs(ak) + 1

        def mod_hat(v: int) -> int:
            r = v % m
            return r - m if r > m - r else r

        sigma = f"%sg{next(_sigma_counter)}"
        # x_k = s * (sum_{i != k} mod_hat(a_i) x_i + mod_hat(c)) - s*m*sigma
        repl = {sigma: -s * m}
        for k, v in eq.items():
            if k == xk:
                continue
            h = mod_hat(v)
            if h:
                repl[k] = repl.get(k, 0) + s * h

        def subst2(c: dict[str, int], repl=repl, xk=xk) -> dict[str, int]:
            if xk not in c:
                return c
            coef = c.pop(xk)
            for k, v in repl.items():
                c[k] = c.get(k, 0) + coef * v
            return c

        # the eliminated equation itself becomes divisible by m
        rewritten = subst2(dict(eq))
        divided: dict[str, int] = {}
        for k, v in rewritten.items():
            if v % m != 0:
                raise _Unsat()
            if v:
                divided[k] = v // m
        eqs.append(divided)
        eqs = [_normalize(subst2(dict(e))) for e in eqs]
        new_ineqs = []
        for c in ineqs:
            t = _tighten_ineq(subst2(dict(c)))
            if t is not None:
                new_ineqs.append(t)
        ineqs = new_ineqs

    # -- inequalities only: eliminate variables one at a time
    while True:
        ineqs = [_normalize(c) for c in ineqs]
        vars_ = sorted({k for c in ineqs for k, v in c.items() if k != "" and v != 0})
        if not vars_:
            return all(c.get("", 0) >= 0 for c in ineqs)

        def cost(x: str) -> tuple[int, str]:
            lowers = sum(1 for c in ineqs if c.get(x, 0) > 0)
            uppers = sum(1 for c in ineqs if c.get(x, 0) < 0)
            exact = all(abs(c.get(x, 0)) <= 1 for c in ineqs)
            return (lowers * uppers - (lowers + uppers) - (1000 if exact else 0), x)

        x = min(vars_, key=cost)
        lowers = [c for c in ineqs if c.get(x, 0) > 0]   # a*x + rest >= 0, a>0
        uppers = [c for c in ineqs if c.get(x, 0) < 0]   # -b*x + rest >= 0, b>0
        rest = [c for c in ineqs if c.get(x, 0) == 0]
        if not lowers or not uppers:
            ineqs = rest  # x unbounded on one side: drop its constraints
            continue
        exact = all(c[x] == 1 for c in lowers) or all(-c[x] == 1 for c in uppers)
        real_shadow: list[dict[str, int]] = list(rest)
        dark_extra: list[dict[str, int]] = []
        for lo in lowers:
            a = lo[x]
            for up in uppers:
                b = -up[x]
                comb: dict[str, int] = {}
                for k, v in lo.items():
                    if k != x:
                        comb[k] = comb.get(k, 0) + b * v
                for k, v in up.items():
                    if k != x:
                        comb[k] = comb.get(k, 0) + a * v
                real_shadow.append(dict(comb))
                if not exact:
                    dark = dict(comb)
                    dark[""] = dark.get("", 0) - (a - 1) * (b - 1)
                    dark_extra.append(dark)
        if exact:
            ineqs = real_shadow
            continue
        # dark shadow is sufficient
        try:
            if _omega([], [dict(c) for c in rest + dark_extra +
                           [c for c in real_shadow if c not in rest]], budget):
                return True
        except _Unsat:
            pass
        # real shadow is necessary
        if not _omega([], [dict(c) for c in real_shadow], budget):
            return False
        # splinter: some lower bound is nearly tight
        c_hat = max(-up[x] for up in uppers)
        for lo in lowers:
            a = lo[x]
            upper_i = (a * c_hat - a - c_hat) // c_hat
            if upper_i >= _OMEGA_SPLINTER_CAP:
                raise ProverBudget()
            for i in range(upper_i + 1):
                _spend(budget)
                eq = {k: v for k, v in lo.items() if k != x}
                eq[""] = eq.get("", 0) - i
                eq[x] = a
                # a*x = (-(rest)) + i  ->  a*x + rest - i = 0
                try:
                    if _omega([eq], [dict(c) for c in ineqs], budget):
                        return True
                except _Unsat:
                    continue
        return False


# ---------------------------------------------------------------------------
# Congruence closure over ground terms


class _UnionFind:
    def __init__(self) -> None:
        self.parent: dict[FTerm, FTerm] = {}

    def add(self, t: FTerm) -> None:
        if t not in self.parent:
            self.parent[t] = t

    def find(self, t: FTerm) -> FTerm:
        self.add(t)
        root = t
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[t] != root:
            self.parent[t], t = root, self.parent[t]
        return root

    def union(self, a: FTerm, b: FTerm) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        # deterministic representative choice
        if repr(rb) < repr(ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def _subterm_apps(t: FTerm) -> list[TApp]:
    out: list[TApp] = []
    match t:
        case TApp(_, args, _):
            out.append(t)
            for a in args:
                out.extend(_subterm_apps(a))
        case TAdd(args):
            for a in args:
                out.extend(_subterm_apps(a))
        case TMul(_, a):
            out.extend(_subterm_apps(a))
    return out


# ---------------------------------------------------------------------------
# Satisfiability of a conjunction of ground literals


def _literals_sat(literals: list[tuple[bool, FAtom]], budget: list[int]) -> bool:
    """Theory check: congruence closure + integer feasibility, with implied
    integer equalities propagated back into the closure."""
    uf = _UnionFind()
    apps: list[TApp] = []
    bool_eqs: list[tuple[FTerm, FTerm]] = []
    bool_diseqs: list[tuple[FTerm, FTerm]] = []
    opaque_eqs: list[tuple[FTerm, FTerm]] = []
    opaque_diseqs: list[tuple[FTerm, FTerm]] = []
    int_eq_atoms: list[tuple[FTerm, FTerm]] = []
    int_ineq_atoms: list[tuple[bool, FTerm, FTerm]] = []  # (positive, l, r): l <= r
    int_diseqs: list[tuple[FTerm, FTerm]] = []

    for positive, atom in literals:
        l, r = atom.lhs, atom.rhs
        if atom.op == "<=":
            int_ineq_atoms.append((positive, l, r))
            continue
        if l.sort == "bool" or r.sort == "bool":
            # two-valued sort: not (t = b) is t = not b, keeping closure complete
            if not positive and isinstance(r, TBool):
                bool_eqs.append((l, TBool(not r.value)))
            elif not positive and isinstance(l, TBool):
                bool_eqs.append((TBool(not l.value), r))
            else:
                (bool_eqs if positive else bool_diseqs).append((l, r))
        elif l.sort == "int" and r.sort == "int":
            (int_eq_atoms if positive else int_diseqs).append((l, r))
        else:
            (opaque_eqs if positive else opaque_diseqs).append((l, r))

    for _, a in literals:
        apps.extend(_subterm_apps(a.lhs))
        apps.extend(_subterm_apps(a.rhs))
    apps = list(dict.fromkeys(apps))

    # boolean atoms: each bool term gets a truth value via union with TBool
    for l, r in bool_eqs:
        uf.union(l, r)
    # congruence + contradiction loop
    slots: dict[FTerm, str] = {}
    int_disequality_splits: list[tuple[FTerm, FTerm]] = list(int_diseqs)

    def congruence_round() -> bool:
        changed = False
        for a, b in itertools.combinations(apps, 2):
            if a.fn != b.fn or len(a.args) != len(b.args):
                continue
            if uf.find(a) == uf.find(b):
                continue
            if all(uf.find(x) == uf.find(y) for x, y in zip(a.args, b.args)):
                uf.union(a, b)
                changed = True
        return changed

    for l, r in opaque_eqs:
        uf.union(l, r)

    # fixpoint: congruence + integer-implied equalities
    for _ in range(64):
        while congruence_round():
            pass
        # check opaque/bool disequalities
        for l, r in opaque_diseqs + bool_diseqs:
            if uf.find(l) == uf.find(r):
                return False
        if uf.find(TBool(True)) == uf.find(TBool(False)):
            return False
        # build the integer system
        eqs: list[dict[str, int]] = []
        ineqs: list[dict[str, int]] = []

        def lin_diff(l: FTerm, r: FTerm) -> dict[str, int]:
            dl = linearize(l, slots)
            dr = linearize(r, slots)
            out = dict(dl)
            for k, v in dr.items():
                out[k] = out.get(k, 0) - v
            return out

        try:
            for l, r in int_eq_atoms:
                eqs.append(lin_diff(l, r))
            for positive, l, r in int_ineq_atoms:
                d = lin_diff(r, l)  # r - l >= 0  <=>  l <= r
                if positive:
                    ineqs.append(d)
                else:  # not (l <= r)  <=>  l - r - 1 >= 0
                    neg = {k: -v for k, v in d.items()}
                    neg[""] = neg.get("", 0) - 1
                    ineqs.append(neg)
        except NonLinear:
            raise ProverBudget()

        # same-class integer terms are equal
        for t, name in list(slots.items()):
            rep = uf.find(t)
            if rep != t and rep in slots and slots[rep] != name:
                eqs.append({name: 1, slots[rep]: -1})
            elif rep != t and rep not in slots and isinstance(rep, TInt):
                eqs.append({name: 1, "": -rep.value})

        # integer disequality: split into < or >
        def with_split(idx: int, extra: list[dict[str, int]]) -> bool:
            if idx == len(int_disequality_splits):
                return omega_sat([dict(e) for e in eqs],
                                 [dict(i) for i in ineqs] + [dict(e) for e in extra], budget)
            l, r = int_disequality_splits[idx]
            d = lin_diff(l, r)
            lt = {k: -v for k, v in d.items()}
            lt[""] = lt.get("", 0) - 1   # r - l - 1 >= 0  => l < r
            gt = dict(d)
            gt[""] = gt.get("", 0) - 1   # l - r - 1 >= 0  => l > r
            return with_split(idx + 1, extra + [lt]) or with_split(idx + 1, extra + [gt])

        if not with_split(0, []):
            return False

        # implied equalities among same-function application arguments drive
        # another congruence round
        new_union = False
        for a, b in itertools.combinations(apps, 2):
            if a.fn != b.fn or len(a.args) != len(b.args):
                continue
            if uf.find(a) == uf.find(b):
                continue
            args_int = all(x.sort == "int" for x in a.args)
            if not args_int:
                continue
            forced = True
            for x, y in zip(a.args, b.args):
                d_ = linearize(x, slots)
                d2 = linearize(y, slots)
                diff = dict(d_)
                for k, v in d2.items():
                    diff[k] = diff.get(k, 0) - v
                # x != y consistent?  then not forced
                lt = {k: -v for k, v in diff.items()}
                lt[""] = lt.get("", 0) - 1
                gt = dict(diff)
                gt[""] = gt.get("", 0) - 1
                if omega_sat([dict(e) for e in eqs], [dict(i) for i in ineqs] + [lt], budget) or \
                   omega_sat([dict(e) for e in eqs], [dict(i) for i in ineqs] + [gt], budget):
                    forced = False
                    break
            if forced:
                uf.union(a, b)
                new_union = True
        if not new_union:
            return True
    raise ProverBudget()


# ---------------------------------------------------------------------------
# Formula-level search


_BRANCH_CAP = 20000


def _nnf(f: Formula, positive: bool) -> Formula:
    match f:
        case FConst(v):
            return FConst(v if positive else not v)
        case FAtom():
            return f if positive else FNot(f)
        case FNot(a):
            return _nnf(a, not positive)
        case FAnd(args):
            parts = [_nnf(a, positive) for a in args]
            return f_and(parts) if positive else f_or(parts)
        case FOr(args):
            parts = [_nnf(a, positive) for a in args]
            return f_or(parts) if positive else f_and(parts)
        case FQuant(kind, var, body):
            nk = kind if positive else ("exists" if kind == "forall" else "forall")
            return FQuant(nk, var, _nnf(body, positive))
    raise TypeError(f)


def _collect_terms(f: Formula) -> list[FTerm]:
    found: dict[FTerm, None] = {}

    def from_term(t: FTerm) -> None:
        if not isinstance(t, (TAdd, TMul)):
            found.setdefault(t)
        match t:
            case TAdd(args):
                for a in args:
                    from_term(a)
            case TMul(_, a):
                from_term(a)
            case TApp(_, args, _):
                for a in args:
                    from_term(a)
            case _:
                pass

    def walk(g: Formula) -> None:
        match g:
            case FAtom(_, l, r):
                from_term(l)
                from_term(r)
            case FNot(a):
                walk(a)
            case FAnd(args) | FOr(args):
                for a in args:
                    walk(a)
            case FQuant(_, _, body):
                walk(body)
            case _:
                pass

    walk(f)
    return list(found)


def _term_vars(t: FTerm) -> set[str]:
    match t:
        case TVar(name, _):
            return {name}
        case TAdd(args):
            out: set[str] = set()
            for a in args:
                out |= _term_vars(a)
            return out
        case TMul(_, a):
            return _term_vars(a)
        case TApp(_, args, _):
            out = set()
            for a in args:
                out |= _term_vars(a)
            return out
        case _:
            return set()


def _bound_names(f: Formula) -> set[str]:
    out: set[str] = set()

    def walk(g: Formula) -> None:
        match g:
            case FQuant(_, var, body):
                out.add(var.name)
                walk(body)
            case FAnd(args) | FOr(args):
                for a in args:
                    walk(a)
            case FNot(a):
                walk(a)
            case _:
                pass

    walk(f)
    return out


def _var_only_under_apps(f: Formula, name: str) -> bool:
    """True when every occurrence of `name` sits inside the arguments of an
    uninterpreted application (the shape of a harmless axiom trigger)."""

    def bad_term(t: FTerm, top: bool) -> bool:
        match t:
            case TVar(n, _):
                return top and n == name
            case TAdd(args):
                return any(bad_term(a, top) for a in args)
            case TMul(_, a):
                return bad_term(a, top)
            case TApp():
                return False  # any occurrence below an application is fine
            case _:
                return False

    def walk(g: Formula) -> bool:
        match g:
            case FAtom(_, l, r):
                return bad_term(l, True) or bad_term(r, True)
            case FNot(a):
                return walk(a)
            case FAnd(args) | FOr(args):
                return any(walk(a) for a in args)
            case FQuant(_, _, body):
                return walk(body)
            case _:
                return False

    return not walk(f)


_skolem_counter = itertools.count()


def _eliminate_quantifiers(f: Formula) -> tuple[Optional[Formula], bool]:
    """NNF-normalized input.  Existentials become skolem constants (only when
    not under a universal); universals are instantiated over the closed
    ground terms of their sort.  Returns (formula, trustworthy_sat):
    trustworthy_sat is False when a satisfiable answer from the instantiated
    formula may not extend to the original."""
    bound = _bound_names(f)
    pool = [t for t in _collect_terms(f) if not (_term_vars(t) & bound)]
    skolems: list[FTerm] = []
    trustworthy = [True]

    def candidates_for(sort: str) -> list[FTerm]:
        out = [t for t in pool if t.sort == sort]
        out += [s for s in skolems if s.sort == sort]
        if sort == "int":
            out = out[:10] + [TInt(0), TInt(1)]
        return list(dict.fromkeys(out))

    def go(f: Formula, under_forall: bool) -> Optional[Formula]:
        match f:
            case FQuant("exists", var, body):
                if under_forall:
                    return None
                sk = TVar(f"%sk{next(_skolem_counter)}", var.sort)
                skolems.append(sk)
                return go(formula_subst(body, {var.name: sk}), under_forall)
            case FQuant("forall", var, body):
                body2 = go(body, True)
                if body2 is None:
                    return None
                cands = candidates_for(var.sort)
                if not cands:
                    sk = TVar(f"%fa{next(_skolem_counter)}", var.sort)
                    skolems.append(sk)
                    cands = [sk]
                if len(cands) > 24:
                    return None
                benign = var.sort == "u" and _var_only_under_apps(body, var.name)
                if not benign:
                    trustworthy[0] = False
                insts = [formula_subst(body2, {var.name: c}) for c in cands]
                return f_and(insts)
            case FAnd(args):
                parts = []
                for a in args:
                    p = go(a, under_forall)
                    if p is None:
                        return None
                    parts.append(p)
                return f_and(parts)
            case FOr(args):
                parts = []
                for a in args:
                    p = go(a, under_forall)
                    if p is None:
                        return None
                    parts.append(p)
                return f_or(parts)
            case _:
                return f

    out = go(f, False)
    return out, trustworthy[0]


def _has_quantifier(f: Formula) -> bool:
    match f:
        case FQuant():
            return True
        case FAnd(args) | FOr(args):
            return any(_has_quantifier(a) for a in args)
        case FNot(a):
            return _has_quantifier(a)
        case _:
            return False


def satisfiable(f: Formula, budget: int = 2_000_000) -> Optional[bool]:
    """True/False when decided, None when outside the fragment or over
    budget.  Universals are instantiated over ground terms; a satisfiable
    answer is only reported when the instantiation is known to extend to a
    full model (axiom-shaped universals over the opaque sort)."""
    f = _nnf(f, True)
    trustworthy_sat = True
    if _has_quantifier(f):
        g, trustworthy_sat = _eliminate_quantifiers(f)
        if g is None:
            return None
        f = g
    bspend = [budget]
    leaves = [0]
    try:
        result = _sat_search(f, [], bspend, leaves)
    except ProverBudget:
        return None
    if result and not trustworthy_sat:
        return None
    return result


def _sat_search(f: Formula, literals: list[tuple[bool, FAtom]],
                budget: list[int], leaves: list[int]) -> bool:
    """DNF-style branch search with theory checks at the leaves."""
    match f:
        case FConst(v):
            if not v:
                return False
            leaves[0] += 1
            if leaves[0] > _BRANCH_CAP:
                raise ProverBudget()
            return _literals_sat(literals, budget)
        case FAtom():
            return _sat_search(F_TRUE, literals + [(True, f)], budget, leaves)
        case FNot(a):
            assert isinstance(a, FAtom)
            return _sat_search(F_TRUE, literals + [(False, a)], budget, leaves)
        case FAnd(args):
            atoms: list[tuple[bool, FAtom]] = list(literals)
            complex_: list[Formula] = []
            for a in args:
                if isinstance(a, FAtom):
                    atoms.append((True, a))
                elif isinstance(a, FNot) and isinstance(a.arg, FAtom):
                    atoms.append((False, a.arg))
                elif isinstance(a, FConst):
                    if not a.value:
                        return False
                else:
                    complex_.append(a)
            if not complex_:
                return _sat_search(F_TRUE, atoms, budget, leaves)
            first, rest = complex_[0], complex_[1:]
            assert isinstance(first, FOr)
            for alt in first.args:
                if _sat_search(f_and([alt] + rest), atoms, budget, leaves):
                    return True
            return False
        case FOr(args):
            for alt in args:
                if _sat_search(alt, literals, budget, leaves):
                    return True
            return False
    raise TypeError(f)


def valid(f: Formula, budget: int = 2_000_000) -> Optional[bool]:
    """Validity of a (possibly quantified) formula: unsatisfiability of the
    negation.  None when undecided."""
    neg = _nnf(FNot(f), True)
    sat = satisfiable(neg, budget)
    if sat is None:
        return None
    return not sat
