"""A small SMT-LIB2 solver process.

Reads SMT-LIB2 commands from stdin and answers on stdout, deciding
assertions with the decision procedure in `prover`.  Covers the fragment
the entailment encoder emits (linear integer arithmetic, uninterpreted
sorts/functions, quantifiers by instantiation); anything it cannot decide
answers ``unknown``.  Usable as a drop-in ``--smt-cmd`` target:

    hegel-smt            # or: python -m hegel.smt_server
"""

from __future__ import annotations

import sys
from typing import Optional, Union

from . import prover
from .prover import (
    FAtom, FQuant, Formula, FTerm, TAdd, TApp, TBool, TInt, TMul, TVar,
    f_and, f_implies, f_not, f_or,
)

SExpr = Union[str, list]


def tokenize_sexprs(text: str) -> list[str]:
    tokens: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append(ch)
            i += 1
        elif ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif ch == "|":
            j = text.index("|", i + 1)
            tokens.append(text[i:j + 1])
            i = j + 1
        elif ch == '"':
            j = i + 1
            while j < len(text) and text[j] != '"':
                j += 1
            tokens.append(text[i:j + 1])
            i = j + 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "();":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


class SexprReader:
    """Incremental s-expression reader over a text stream."""

    def __init__(self, stream):
        self.stream = stream
        self.tokens: list[str] = []
        self.pos = 0

    def _fill(self) -> bool:
        line = self.stream.readline()
        if line == "":
            return False
        self.tokens.extend(tokenize_sexprs(line))
        return True

    def next_sexpr(self) -> Optional[SExpr]:
        while True:
            expr, consumed = self._try_parse(self.pos)
            if expr is not None:
                self.pos = consumed
                if self.pos > 4096:
                    self.tokens = self.tokens[self.pos:]
                    self.pos = 0
                return expr
            if not self._fill():
                return None

    def _try_parse(self, start: int) -> tuple[Optional[SExpr], int]:
        if start >= len(self.tokens):
            return None, start
        tok = self.tokens[start]
        if tok == "(":
            items: list[SExpr] = []
            i = start + 1
            while True:
                if i >= len(self.tokens):
                    return None, start
                if self.tokens[i] == ")":
                    return items, i + 1
                sub, i2 = self._try_parse(i)
                if sub is None:
                    return None, start
                items.append(sub)
                i = i2
        if tok == ")":
            raise ValueError("unbalanced ')'")
        return tok, start + 1


def _name(sym: str) -> str:
    if sym.startswith("|") and sym.endswith("|"):
        return sym[1:-1]
    return sym


class Solver:
    def __init__(self) -> None:
        self.stack: list[list[Formula]] = [[]]
        self.fun_sorts: dict[str, tuple[tuple[str, ...], str]] = {}
        self.const_sorts: dict[str, str] = {}
        self.scopes: list[tuple[dict, dict]] = []

    # -- sort and term construction

    def sort_tag(self, s: SExpr) -> str:
        if s == "Int":
            return "int"
        if s == "Bool":
            return "bool"
        return "u"

    def term(self, e: SExpr, bound: dict[str, str]) -> FTerm:
        if isinstance(e, str):
            if e == "true":
                return TBool(True)
            if e == "false":
                return TBool(False)
            if e.lstrip("-").isdigit():
                return TInt(int(e))
            n = _name(e)
            sort = bound.get(n) or self.const_sorts.get(n, "int")
            return TVar(n, sort)
        head = _name(e[0]) if isinstance(e[0], str) else None
        args = e[1:]
        if head == "+":
            return TAdd(tuple(self.term(a, bound) for a in args))
        if head == "-":
            if len(args) == 1:
                return TMul(-1, self.term(args[0], bound))
            out = [self.term(args[0], bound)]
            out += [TMul(-1, self.term(a, bound)) for a in args[1:]]
            return TAdd(tuple(out))
        if head == "*":
            lhs, rhs = args
            tl = self.term(lhs, bound)
            tr = self.term(rhs, bound)
            if isinstance(tl, TInt):
                return TMul(tl.value, tr)
            if isinstance(tr, TInt):
                return TMul(tr.value, tl)
            raise Unsupported("nonlinear multiplication")
        if head in self.fun_sorts:
            sig = self.fun_sorts[head]
            return TApp(head, tuple(self.term(a, bound) for a in args), sig[1])
        raise Unsupported(f"term {e!r}")

    def formula(self, e: SExpr, bound: dict[str, str]) -> Formula:
        if isinstance(e, str):
            if e == "true":
                return prover.F_TRUE
            if e == "false":
                return prover.F_FALSE
            t = self.term(e, bound)
            return FAtom("=", t, TBool(True))
        head = _name(e[0]) if isinstance(e[0], str) else None
        args = e[1:]
        if head == "not":
            return f_not(self.formula(args[0], bound))
        if head == "and":
            return f_and([self.formula(a, bound) for a in args])
        if head == "or":
            return f_or([self.formula(a, bound) for a in args])
        if head == "=>":
            out = self.formula(args[-1], bound)
            for a in reversed(args[:-1]):
                out = f_implies(self.formula(a, bound), out)
            return out
        if head in ("<", "<=", ">", ">="):
            tl, tr = self.term(args[0], bound), self.term(args[1], bound)
            match head:
                case "<=":
                    return FAtom("<=", tl, tr)
                case ">=":
                    return FAtom("<=", tr, tl)
                case "<":
                    return FAtom("<=", TAdd((tl, TInt(1))), tr)
                case ">":
                    return FAtom("<=", TAdd((tr, TInt(1))), tl)
        if head == "=":
            terms = [self.term(a, bound) for a in args]
            parts = [self._eq(terms[i], terms[i + 1]) for i in range(len(terms) - 1)]
            return f_and(parts)
        if head == "distinct":
            tl, tr = self.term(args[0], bound), self.term(args[1], bound)
            return f_not(self._eq(tl, tr))
        if head == "ite":
            raise Unsupported("ite")
        if head in ("forall", "exists"):
            binders = args[0]
            body_bound = dict(bound)
            vars_: list[TVar] = []
            for b in binders:
                vname = _name(b[0])
                vsort = self.sort_tag(b[1])
                body_bound[vname] = vsort
                vars_.append(TVar(vname, vsort))
            body = self.formula(args[1], body_bound)
            for v in reversed(vars_):
                body = FQuant(head, v, body)
            return body
        raise Unsupported(f"formula {e!r}")

    def _eq(self, tl: FTerm, tr: FTerm) -> Formula:
        if tl.sort == "bool" and not isinstance(tr, TBool) and not isinstance(tl, TBool):
            # boolean equivalence between non-constant terms
            a = FAtom("=", tl, TBool(True))
            b = FAtom("=", tr, TBool(True))
            return f_or([f_and([a, b]), f_and([f_not(a), f_not(b)])])
        return FAtom("=", tl, tr)

    # -- commands

    def run(self, cmd: SExpr, out) -> bool:
        """Execute one command; returns False on (exit)."""
        if not isinstance(cmd, list) or not cmd:
            return True
        head = cmd[0]
        try:
            match head:
                case "set-logic" | "set-option" | "set-info":
                    pass
                case "declare-sort":
                    pass  # every uninterpreted sort maps to the opaque sort
                case "declare-const":
                    self.const_sorts[_name(cmd[1])] = self.sort_tag(cmd[2])
                case "declare-fun":
                    name = _name(cmd[1])
                    argsorts = tuple(self.sort_tag(s) for s in cmd[2])
                    rsort = self.sort_tag(cmd[3])
                    if argsorts:
                        self.fun_sorts[name] = (argsorts, rsort)
                    else:
                        self.const_sorts[name] = rsort
                case "assert":
                    self.stack[-1].append(self.formula(cmd[1], {}))
                case "push":
                    n = int(cmd[1]) if len(cmd) > 1 else 1
                    for _ in range(n):
                        self.stack.append([])
                        self.scopes.append((dict(self.const_sorts), dict(self.fun_sorts)))
                case "pop":
                    n = int(cmd[1]) if len(cmd) > 1 else 1
                    for _ in range(n):
                        if len(self.stack) > 1:
                            self.stack.pop()
                            self.const_sorts, self.fun_sorts = self.scopes.pop()
                case "reset":
                    self.__init__()
                case "check-sat":
                    print(self.check(), file=out, flush=True)
                case "echo":
                    print(str(cmd[1]).strip('"'), file=out, flush=True)
                case "exit":
                    return False
                case "get-model" | "get-info":
                    print("(error \"unsupported\")", file=out, flush=True)
                case _:
                    print(f"(error \"unknown command {head}\")", file=out, flush=True)
        except Unsupported:
            if head == "check-sat":
                print("unknown", file=out, flush=True)
            elif head == "assert":
                # remember the failure: any check-sat in this scope is unknown
                self.stack[-1].append(None)  # type: ignore[arg-type]
        return True

    def check(self) -> str:
        formulas = [f for scope in self.stack for f in scope]
        if any(f is None for f in formulas):
            return "unknown"
        result = prover.satisfiable(f_and(list(formulas)))
        if result is None:
            return "unknown"
        return "sat" if result else "unsat"


class Unsupported(Exception):
    pass


def main(argv: Optional[list[str]] = None) -> int:
    reader = SexprReader(sys.stdin)
    solver = Solver()
    while True:
        try:
            cmd = reader.next_sexpr()
        except ValueError:
            print('(error "parse error")', flush=True)
            return 1
        if cmd is None:
            return 0
        if not solver.run(cmd, sys.stdout):
            return 0


if __name__ == "__main__":
    raise SystemExit(main())
