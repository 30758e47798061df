"""Logical entailment oracle.

Decides queries of the form  [[ctx]] /\\ subst(antecedent) ==> subst(consequent)
with the value variable universally quantified and method predicates
uninterpreted.  Three backends, tried in order of configuration:

  * an external SMT-LIB2 solver subprocess (``--smt-cmd``, e.g. ``z3 -in``;
    ``hegel-smt`` ships in this package for installations without z3),
  * the in-process decision procedure from `prover`,
  * a sound syntactic fallback that never answers Invalid.

Verdicts are cached under a canonical key: sorted conjunct normal form with
de Bruijn-indexed binders.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from . import prover
from .prover import (
    FAtom, FConst, FQuant, Formula, FTerm, TApp, TBool, TInt, TVar, TAdd,
    TMul, f_and, f_implies, f_not, f_or,
)
from .syntax import (
    And, Atom, BaseType, BOOL, BPrim, EAdd, EApp, EBool, ELit, EMul, ESub,
    EVar, Expr, Iff, Implies, INT, Library, Not, Or, PredicateDecl, QFalse,
    QTrue, Quant, Qualifier, RArrow, RBase, RefVar, RefinementType,
    RForallPred, RForallTy, Rel, TRUE, VALUE_VAR, conj, conjuncts, erase,
    qual_free_vars, qual_subst,
)

# ---------------------------------------------------------------------------
# Verdicts and statistics


@dataclass(frozen=True)
class OracleVerdict:
    kind: str  # "valid" | "invalid" | "unknown"
    reason: str = ""

    @property
    def is_valid(self) -> bool:
        return self.kind == "valid"

    @property
    def is_invalid(self) -> bool:
        return self.kind == "invalid"

    @property
    def is_unknown(self) -> bool:
        return self.kind == "unknown"


VALID = OracleVerdict("valid")
INVALID = OracleVerdict("invalid")


def unknown(reason: str) -> OracleVerdict:
    return OracleVerdict("unknown", reason)


@dataclass
class OracleStats:
    queries_issued: int = 0
    cache_hits: int = 0
    total_solver_millis: float = 0.0

    def as_dict(self) -> dict:
        return {
            "smtQueries": self.queries_issued,
            "cacheHits": self.cache_hits,
            "totalSolverMillis": round(self.total_solver_millis, 3),
        }


class SolverSpawnError(Exception):
    pass


class SolverProtocolError(Exception):
    pass


class UnsupportedConstruct(Exception):
    pass


# ---------------------------------------------------------------------------
# Queries

CtxEntry = Union[tuple[str, "RefinementType"], Qualifier]


@dataclass(frozen=True)
class EntailmentQuery:
    context: tuple  # tuple of (name, RefinementType) bindings and Qualifier propositions
    subst: tuple  # sorted tuple of (name, Expr-or-name) pairs
    antecedent: Qualifier
    consequent: Qualifier
    value_sort: BaseType

    @staticmethod
    def make(context: Sequence[CtxEntry], subst: Mapping[str, Expr | str],
             antecedent: Qualifier, consequent: Qualifier,
             value_sort: BaseType) -> "EntailmentQuery":
        return EntailmentQuery(
            context=tuple(context),
            subst=tuple(sorted(subst.items(), key=lambda kv: kv[0])),
            antecedent=antecedent,
            consequent=consequent,
            value_sort=value_sort,
        )

    def substitution(self) -> dict[str, Expr | str]:
        return dict(self.subst)


def interpret_context(ctx: Sequence[CtxEntry]) -> Qualifier:
    """[[ctx]]: conjunction of each base binding's qualifier grounded at its
    name, plus recorded propositions.  Arrow and quantified bindings
    contribute nothing."""
    parts: list[Qualifier] = []
    for entry in ctx:
        if isinstance(entry, tuple):
            name, ty = entry
            if isinstance(ty, RBase) and not isinstance(ty.qual, QTrue):
                parts.append(qual_subst(ty.qual, {VALUE_VAR: name}))
        else:
            if not isinstance(entry, QTrue):
                parts.append(entry)
    return conj(parts)


def slice_context(ctx: Sequence[CtxEntry], roots: set[str]) -> list[CtxEntry]:
    """Keep only bindings/propositions transitively reachable from `roots`
    through free names; keeps entailment queries small and avoids dragging
    in facts about unrelated binders."""
    by_name: dict[str, tuple[str, RefinementType]] = {}
    props: list[Qualifier] = []
    order: list[CtxEntry] = []
    for entry in ctx:
        if isinstance(entry, tuple):
            by_name.setdefault(entry[0], entry)
        else:
            props.append(entry)
        order.append(entry)

    needed = set(roots)
    changed = True
    while changed:
        changed = False
        for name, (bn, ty) in list(by_name.items()):
            if name in needed and isinstance(ty, RBase):
                fv = qual_free_vars(qual_subst(ty.qual, {VALUE_VAR: name}))
                if not fv <= needed:
                    needed |= fv
                    changed = True
        for p in props:
            fv = qual_free_vars(p)
            if fv & needed and not fv <= needed:
                needed |= fv
                changed = True

    out: list[CtxEntry] = []
    for entry in order:
        if isinstance(entry, tuple):
            if entry[0] in needed:
                out.append(entry)
        elif qual_free_vars(entry) <= needed or not qual_free_vars(entry):
            if qual_free_vars(entry) & needed or not qual_free_vars(entry):
                out.append(entry)
    return out


# ---------------------------------------------------------------------------
# Canonical keys


def _canon_expr(e: Expr, env: dict[str, str]) -> str:
    match e:
        case EVar(n):
            return env.get(n, n)
        case ELit(v):
            return str(v)
        case EBool(v):
            return "t" if v else "f"
        case EAdd(l, r):
            return f"(+ {_canon_expr(l, env)} {_canon_expr(r, env)})"
        case ESub(l, r):
            return f"(- {_canon_expr(l, env)} {_canon_expr(r, env)})"
        case EMul(k, a):
            return f"(* {k} {_canon_expr(a, env)})"
        case EApp(n, args):
            return f"({n} {' '.join(_canon_expr(a, env) for a in args)})"
    raise TypeError(e)


def _canon_qual(q: Qualifier, env: dict[str, str], depth: int) -> str:
    match q:
        case QTrue():
            return "T"
        case QFalse():
            return "F"
        case Rel(op, l, r):
            return f"({op} {_canon_expr(l, env)} {_canon_expr(r, env)})"
        case Atom(e):
            return f"(atom {_canon_expr(e, env)})"
        case Not(a):
            return f"(not {_canon_qual(a, env, depth)})"
        case And():
            parts = sorted(_canon_qual(c, env, depth) for c in conjuncts(q))
            return f"(and {' '.join(parts)})"
        case Or(l, r):
            parts = sorted([_canon_qual(l, env, depth), _canon_qual(r, env, depth)])
            return f"(or {' '.join(parts)})"
        case Implies(l, r):
            return f"(=> {_canon_qual(l, env, depth)} {_canon_qual(r, env, depth)})"
        case Iff(l, r):
            parts = sorted([_canon_qual(l, env, depth), _canon_qual(r, env, depth)])
            return f"(iff {' '.join(parts)})"
        case Quant(kind, v, sort, body):
            env2 = dict(env)
            env2[v] = f"@{depth}"
            return f"({kind} {sort} {_canon_qual(body, env2, depth + 1)})"
        case RefVar(n):
            return f"(kappa {n})"
    raise TypeError(q)


def canonical_key(q: EntailmentQuery) -> str:
    sub = q.substitution()
    ante = qual_subst(conj([interpret_context(q.context), q.antecedent]), sub)
    cons = qual_subst(q.consequent, sub)
    return "|".join([
        _canon_qual(ante, {}, 0),
        _canon_qual(cons, {}, 0),
        str(erase(RBase("v", q.value_sort, TRUE))),
    ])


# ---------------------------------------------------------------------------
# Lowering qualifiers to prover formulas


def sort_tag(base: BaseType) -> str:
    if base == INT:
        return "int"
    if base == BOOL:
        return "bool"
    return "u"


class _Lowerer:
    def __init__(self, predicates: Mapping[str, PredicateDecl], sorts: Mapping[str, str]):
        self.predicates = dict(predicates)
        self.sorts = dict(sorts)

    def term(self, e: Expr) -> FTerm:
        match e:
            case EVar(n):
                return TVar(n, self.sorts.get(n, "int"))
            case ELit(v):
                return TInt(v)
            case EBool(v):
                return TBool(v)
            case EAdd(l, r):
                return TAdd((self.term(l), self.term(r)))
            case ESub(l, r):
                return TAdd((self.term(l), TMul(-1, self.term(r))))
            case EMul(k, a):
                return TMul(k, self.term(a))
            case EApp(n, args):
                decl = self.predicates.get(n)
                result = sort_tag(decl.result) if decl else "int"
                return TApp(n, tuple(self.term(a) for a in args), result)
        raise UnsupportedConstruct(str(e))

    def formula(self, q: Qualifier) -> Formula:
        match q:
            case QTrue():
                return prover.F_TRUE
            case QFalse():
                return prover.F_FALSE
            case Rel(op, l, r):
                tl, tr = self.term(l), self.term(r)
                match op:
                    case "=":
                        return FAtom("=", tl, tr)
                    case "<>":
                        return f_not(FAtom("=", tl, tr))
                    case "<=":
                        return FAtom("<=", tl, tr)
                    case ">=":
                        return FAtom("<=", tr, tl)
                    case "<":
                        return FAtom("<=", TAdd((tl, TInt(1))), tr)
                    case ">":
                        return FAtom("<=", TAdd((tr, TInt(1))), tl)
            case Atom(e):
                return FAtom("=", self.term(e), TBool(True))
            case Not(a):
                return f_not(self.formula(a))
            case And(l, r):
                return f_and([self.formula(l), self.formula(r)])
            case Or(l, r):
                return f_or([self.formula(l), self.formula(r)])
            case Implies(l, r):
                return f_implies(self.formula(l), self.formula(r))
            case Iff(l, r):
                fl, fr = self.formula(l), self.formula(r)
                return f_or([f_and([fl, fr]), f_and([f_not(fl), f_not(fr)])])
            case Quant(kind, v, sort, body):
                saved = self.sorts.get(v)
                self.sorts[v] = sort_tag(sort)
                inner = self.formula(body)
                if saved is None:
                    self.sorts.pop(v, None)
                else:
                    self.sorts[v] = saved
                return FQuant(kind, TVar(v, sort_tag(sort)), inner)
            case RefVar(n):
                # unresolved refinement placeholder: an uninterpreted truth
                return FAtom("=", TVar(f"%k_{n}", "bool"), TBool(True))
        raise UnsupportedConstruct(str(q))


def _query_parts(q: EntailmentQuery, predicates: Mapping[str, PredicateDecl],
                 axioms: Sequence[Qualifier]) -> tuple[Formula, dict[str, str]]:
    """Build the implication formula for a query; free variables are
    implicitly universal."""
    from .syntax import expr_free_vars

    sub = q.substitution()
    relevant = qual_free_vars(q.antecedent) | qual_free_vars(q.consequent)
    for v in sub.values():
        if isinstance(v, str):
            relevant.add(v)
        else:
            relevant |= expr_free_vars(v)
    ctx = slice_context(list(q.context), relevant | {VALUE_VAR})
    sorts: dict[str, str] = {VALUE_VAR: sort_tag(q.value_sort)}
    for entry in ctx:
        if isinstance(entry, tuple):
            name, ty = entry
            e = erase(ty)
            sorts[name] = "u" if isinstance(e, tuple) else sort_tag(e)
    low = _Lowerer(predicates, sorts)
    gamma = interpret_context(ctx)
    ante = qual_subst(conj([gamma] + list(axioms) + [q.antecedent]), sub)
    cons = qual_subst(q.consequent, sub)
    formula = f_implies(low.formula(ante), low.formula(cons))
    return formula, sorts


# ---------------------------------------------------------------------------
# SMT-LIB2 encoding


def _smt_sort(tag: str) -> str:
    return {"int": "Int", "bool": "Bool", "u": "U"}[tag]


def _smt_term(t: FTerm) -> str:
    match t:
        case TVar(n, _):
            return f"|{n}|"
        case TInt(v):
            return str(v) if v >= 0 else f"(- {-v})"
        case TBool(v):
            return "true" if v else "false"
        case TAdd(args):
            return f"(+ {' '.join(_smt_term(a) for a in args)})"
        case TMul(k, a):
            kk = str(k) if k >= 0 else f"(- {-k})"
            return f"(* {kk} {_smt_term(a)})"
        case TApp(fn, args, _):
            return f"(|{fn}| {' '.join(_smt_term(a) for a in args)})"
    raise TypeError(t)


def _smt_formula(f: Formula) -> str:
    match f:
        case FConst(v):
            return "true" if v else "false"
        case FAtom(op, l, r):
            return f"({op} {_smt_term(l)} {_smt_term(r)})"
        case prover.FNot(a):
            return f"(not {_smt_formula(a)})"
        case prover.FAnd(args):
            return f"(and {' '.join(_smt_formula(a) for a in args)})"
        case prover.FOr(args):
            return f"(or {' '.join(_smt_formula(a) for a in args)})"
        case FQuant(kind, var, body):
            return f"({kind} ((|{var.name}| {_smt_sort(var.sort)})) {_smt_formula(body)})"
    raise TypeError(f)


def _collect_symbols(f: Formula, consts: dict[str, str], funs: dict[str, tuple[tuple[str, ...], str]],
                     bound: set[str]) -> None:
    def from_term(t: FTerm) -> None:
        match t:
            case TVar(n, s):
                if n not in bound:
                    consts.setdefault(n, s)
            case TAdd(args):
                for a in args:
                    from_term(a)
            case TMul(_, a):
                from_term(a)
            case TApp(fn, args, rs):
                funs.setdefault(fn, (tuple(a.sort for a in args), rs))
                for a in args:
                    from_term(a)
            case _:
                pass

    match f:
        case FAtom(_, l, r):
            from_term(l)
            from_term(r)
        case prover.FNot(a):
            _collect_symbols(a, consts, funs, bound)
        case prover.FAnd(args) | prover.FOr(args):
            for a in args:
                _collect_symbols(a, consts, funs, bound)
        case FQuant(_, var, body):
            _collect_symbols(body, consts, funs, bound | {var.name})
        case _:
            pass


def encode_formula(f: Formula, timeout_ms: Optional[int] = None) -> str:
    """Standalone SMT-LIB2 script asserting the negation of `f`; `unsat`
    means the formula is valid."""
    consts: dict[str, str] = {}
    funs: dict[str, tuple[tuple[str, ...], str]] = {}
    _collect_symbols(f, consts, funs, set())
    lines = ["(set-logic ALL)"]
    if timeout_ms:
        lines.append(f"(set-option :timeout {timeout_ms})")
    if "u" in consts.values() or any("u" in sig[0] or sig[1] == "u" for sig in funs.values()):
        lines.append("(declare-sort U 0)")
    for name in sorted(consts):
        lines.append(f"(declare-const |{name}| {_smt_sort(consts[name])})")
    for name in sorted(funs):
        argsorts, rsort = funs[name]
        args = " ".join(_smt_sort(s) for s in argsorts)
        lines.append(f"(declare-fun |{name}| ({args}) {_smt_sort(rsort)})")
    lines.append(f"(assert (not {_smt_formula(f)}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Solver subprocess client


class SmtProcess:
    """One persistent solver child speaking SMT-LIB2 over stdin/stdout with
    per-query (push)/(pop)."""

    def __init__(self, cmd: str, timeout_ms: int = 2000):
        self.cmd = cmd
        self.timeout_ms = timeout_ms
        self.proc: Optional[subprocess.Popen] = None

    def _spawn(self) -> None:
        try:
            self.proc = subprocess.Popen(
                shlex.split(self.cmd),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            self.proc = None
            raise SolverSpawnError(f"cannot start solver {self.cmd!r}: {exc}") from exc

    def check(self, script: str) -> str:
        """Run one scripted query; returns the solver's sat/unsat/unknown."""
        if self.proc is None or self.proc.poll() is not None:
            self._spawn()
        assert self.proc is not None and self.proc.stdin and self.proc.stdout
        try:
            self.proc.stdin.write("(push 1)\n")
            self.proc.stdin.write(script)
            self.proc.stdin.write('(echo "%done%")\n(pop 1)\n')
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._kill()
            raise SolverProtocolError(str(exc)) from exc
        deadline = time.monotonic() + self.timeout_ms / 1000.0 + 1.0
        answer: Optional[str] = None
        while True:
            if time.monotonic() > deadline:
                self._kill()
                raise SolverProtocolError("solver timed out")
            line = self.proc.stdout.readline()
            if line == "":
                self._kill()
                raise SolverProtocolError("solver closed its output")
            line = line.strip()
            if line in ("sat", "unsat", "unknown"):
                answer = line
            elif line.strip('"') == "%done%":
                if answer is None:
                    raise SolverProtocolError("no answer before sync marker")
                return answer
            elif line.startswith("(error"):
                # drain until marker, then report
                answer = None
                err = line
                while True:
                    nxt = self.proc.stdout.readline().strip()
                    if nxt.strip('"') == "%done%" or nxt == "":
                        break
                raise SolverProtocolError(err)

    def _kill(self) -> None:
        if self.proc is not None:
            try:
                self.proc.kill()
            except OSError:
                pass
            self.proc = None

    def close(self) -> None:
        if self.proc is not None and self.proc.poll() is None:
            try:
                assert self.proc.stdin
                self.proc.stdin.write("(exit)\n")
                self.proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass
        self._kill()


def default_smt_command() -> Optional[str]:
    """The configured external solver: HEGEL_SMT_CMD, else ``z3 -in`` when z3
    is on PATH, else the bundled ``hegel-smt`` process."""
    env = os.environ.get("HEGEL_SMT_CMD")
    if env:
        return env
    import shutil
    import sys
    if shutil.which("z3"):
        return "z3 -in"
    return f"{shlex.quote(sys.executable)} -m hegel.smt_server"


# ---------------------------------------------------------------------------
# The oracle


def fallback_prove(q: EntailmentQuery) -> OracleVerdict:
    """Sound, incomplete syntactic prover: never answers Invalid."""
    sub = q.substitution()
    cons = qual_subst(q.consequent, sub)
    if isinstance(cons, QTrue):
        return VALID
    ante_parts = conjuncts(qual_subst(conj([interpret_context(q.context), q.antecedent]), sub))
    norm = {_canon_qual(c, {}, 0) for c in ante_parts}
    if _canon_qual(QFalse(), {}, 0) in norm:
        return VALID
    want = conjuncts(cons)
    if all(_canon_qual(c, {}, 0) in norm for c in want):
        return VALID
    return unknown("fallback: no syntactic proof")


class Oracle:
    """Entailment oracle with a per-instance cache and statistics.

    backend: "smt" uses the configured solver subprocess; "internal" uses the
    in-process decision procedure; "auto" picks z3 when installed and the
    internal prover otherwise (the bundled hegel-smt subprocess remains
    available for protocol-level use).
    """

    def __init__(self, library: Optional[Library] = None, smt_cmd: Optional[str] = None,
                 timeout_ms: int = 2000, backend: str = "auto"):
        self.library = library or Library()
        self.predicates = {p.name: p for p in self.library.predicates}
        self.axioms = list(self.library.axioms)
        self.timeout_ms = timeout_ms
        self.stats = OracleStats()
        self.cache: dict[str, OracleVerdict] = {}
        if backend == "auto":
            import shutil
            if smt_cmd:
                backend = "smt"
            elif os.environ.get("HEGEL_SMT_CMD"):
                backend, smt_cmd = "smt", os.environ["HEGEL_SMT_CMD"]
            elif shutil.which("z3"):
                backend, smt_cmd = "smt", "z3 -in"
            else:
                backend = "internal"
        self.backend = backend
        self.smt_cmd = smt_cmd or default_smt_command()
        self._proc: Optional[SmtProcess] = None

    # -- public operations

    def check_entailment(self, q: EntailmentQuery) -> OracleVerdict:
        if isinstance(q.consequent, QTrue):
            return VALID
        q = self._sliced(q)
        key = canonical_key(q)
        if key in self.cache:
            self.stats.cache_hits += 1
            return self.cache[key]
        verdict = self._solve(q)
        self.cache[key] = verdict
        return verdict

    def _sliced(self, q: EntailmentQuery) -> EntailmentQuery:
        """Restrict the context to names the two qualifiers can reach; the
        canonical key and the solver both work on the small query."""
        from dataclasses import replace
        from .syntax import expr_free_vars

        roots = qual_free_vars(q.antecedent) | qual_free_vars(q.consequent)
        for name, v in q.subst:
            roots.discard(name)
            if isinstance(v, str):
                roots.add(v)
            else:
                roots |= expr_free_vars(v)
        sliced = slice_context(list(q.context), roots | {VALUE_VAR})
        return replace(q, context=tuple(sliced))

    def encode_smtlib(self, q: EntailmentQuery) -> str:
        formula, _ = _query_parts(q, self.predicates, self.axioms)
        return encode_formula(formula, self.timeout_ms)

    def close(self) -> None:
        if self._proc is not None:
            self._proc.close()
            self._proc = None

    # -- helpers

    def _solve(self, q: EntailmentQuery) -> OracleVerdict:
        t0 = time.monotonic()
        try:
            formula, _ = _query_parts(q, self.predicates, self.axioms)
        except UnsupportedConstruct:
            return fallback_prove(q)
        self.stats.queries_issued += 1
        try:
            if self.backend == "smt":
                verdict = self._solve_subprocess(formula)
            else:
                verdict = self._solve_internal(formula)
        except (SolverSpawnError, SolverProtocolError) as exc:
            fb = fallback_prove(q)
            verdict = fb if fb.is_valid else unknown(f"solver failed: {exc}")
        finally:
            self.stats.total_solver_millis += (time.monotonic() - t0) * 1000.0
        if verdict.is_unknown:
            fb = fallback_prove(q)
            if fb.is_valid:
                return fb
        return verdict

    def _solve_internal(self, formula: Formula) -> OracleVerdict:
        result = prover.valid(formula)
        if result is None:
            return unknown("outside the decidable fragment")
        return VALID if result else INVALID

    def _solve_subprocess(self, formula: Formula) -> OracleVerdict:
        if self._proc is None:
            self._proc = SmtProcess(self.smt_cmd, self.timeout_ms)
        script = encode_formula(formula, self.timeout_ms)
        answer = self._proc.check(script)
        if answer == "unsat":
            return VALID
        if answer == "sat":
            return INVALID
        return unknown("solver returned unknown")
