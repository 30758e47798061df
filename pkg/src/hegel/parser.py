"""Parser for library/query specification files and term patterns.

File format, one declaration per line (`--` starts a comment; a line with
unbalanced brackets continues on the next):

    pred len : [a] -> int
    pred mem : [a] * a -> bool
    axiom forall (l : [a]). len (l) >= 0
    take : (x : nat) -> (l : [a]) -> {v : [a] | len (v) <= x \\/ len (v) = 0}

A query file holds a single component-style signature (conventionally named
`goal`) whose final result is a base refinement.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    And, App, Atom, BaseType, BList, BOOL, BPair, BPrim, BVar, CHAR, Const,
    DuplicateComponent, EAdd, EApp, EBool, ELit, EMul, ESub, EVar, Expr, INT,
    If, Iff, Implies, Lam, Let, Library, Not, Or, PredicateDecl, QFalse, QTrue,
    Quant, Qualifier, Query, RArrow, RBase, RForallPred, RForallTy,
    RefinementType, Rel, SpecError, Term, TRUE, UNIT, UnknownPredicate,
    VALUE_VAR, Var, arrow_args, conj, qual_free_vars, qual_subst, trivial,
)


class ParseError(SpecError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "int" | "sym"
    text: str
    line: int
    col: int


_SYMBOLS = [
    "<=>", "->", "/\\", "\\/", "=>", "<=", ">=", "<>", "(", ")", "[", "]",
    "{", "}", ",", ":", ".", "|", "=", "<", ">", "+", "-", "*",
]

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_INT_RE = re.compile(r"[0-9]+")


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("--", 1)[0]
        i = 0
        while i < len(line):
            ch = line[i]
            if ch.isspace():
                i += 1
                continue
            m = _IDENT_RE.match(line, i)
            if m:
                tokens.append(Token("ident", m.group(), lineno, i + 1))
                i = m.end()
                continue
            m = _INT_RE.match(line, i)
            if m:
                tokens.append(Token("int", m.group(), lineno, i + 1))
                i = m.end()
                continue
            for sym in _SYMBOLS:
                if line.startswith(sym, i):
                    tokens.append(Token("sym", sym, lineno, i + 1))
                    i += len(sym)
                    break
            else:
                raise ParseError(lineno, i + 1, f"unexpected character {ch!r}")
        tokens.append(Token("sym", "\n", lineno, len(line) + 1))
    return tokens


def _join_continuations(tokens: list[Token]) -> list[list[Token]]:
    """Split the token stream into declarations: newline ends a declaration
    unless brackets are open."""
    decls: list[list[Token]] = []
    current: list[Token] = []
    depth = 0
    for tok in tokens:
        if tok.text == "\n":
            if depth == 0:
                if current:
                    decls.append(current)
                    current = []
            continue
        if tok.text in ("(", "[", "{"):
            depth += 1
        elif tok.text in (")", "]", "}"):
            depth = max(0, depth - 1)
        current.append(tok)
    if current:
        decls.append(current)
    return decls


class _Parser:
    """Recursive-descent parser over one declaration's tokens."""

    def __init__(self, tokens: list[Token], predicates: dict[str, PredicateDecl]):
        self.tokens = tokens
        self.pos = 0
        self.predicates = predicates
        self.bool_vars: set[str] = set()  # binders known to be bool-sorted

    # -- token plumbing

    def peek(self, k: int = 0) -> Token | None:
        i = self.pos + k
        return self.tokens[i] if i < len(self.tokens) else None

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.text == text

    def take(self) -> Token:
        t = self.peek()
        if t is None:
            last = self.tokens[-1]
            raise ParseError(last.line, last.col, "unexpected end of declaration")
        self.pos += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.take()
        if t.text != text:
            raise ParseError(t.line, t.col, f"expected {text!r}, found {t.text!r}")
        return t

    def error(self, message: str) -> ParseError:
        t = self.peek() or self.tokens[-1]
        return ParseError(t.line, t.col, message)

    def done(self) -> bool:
        return self.pos >= len(self.tokens)

    # -- base types

    def base_type(self) -> BaseType:
        t = self.take()
        if t.kind == "ident":
            if t.text == "int":
                return INT
            if t.text == "bool":
                return BOOL
            if t.text == "char":
                return CHAR
            if t.text == "unit":
                return UNIT
            if t.text == "nat":
                return INT  # callers fold in the >= 0 qualifier
            return BVar(t.text)
        if t.text == "[":
            elem = self.base_type()
            self.expect("]")
            return BList(elem)
        if t.text == "(":
            first = self.base_type()
            if self.at(","):
                self.take()
                second = self.base_type()
                self.expect(")")
                return BPair(first, second)
            self.expect(")")
            return first
        raise ParseError(t.line, t.col, f"expected a base type, found {t.text!r}")

    def _peek_is_nat(self) -> bool:
        t = self.peek()
        return t is not None and t.text == "nat"

    # -- qualifier expressions

    def _sort_of(self, e: Expr) -> str:
        match e:
            case EBool():
                return "bool"
            case EApp(name, _):
                decl = self.predicates.get(name)
                if decl is None:
                    tok = self.peek() or self.tokens[-1]
                    raise UnknownPredicate(f"{tok.line}: predicate {name!r} not declared")
                return "bool" if decl.result == BOOL else "int"
            case EVar(name):
                return "bool" if name in self.bool_vars else "int"
            case _:
                return "int"

    def _as_formula(self, e: Expr) -> Qualifier:
        if isinstance(e, EBool):
            return TRUE if e.value else QFalse()
        return Atom(e)

    def qualifier(self) -> Qualifier:
        return self._iff()

    def _iff(self) -> Qualifier:
        lhs = self._implies()
        while self.at("<=>"):
            self.take()
            lhs = Iff(lhs, self._implies())
        return lhs

    def _implies(self) -> Qualifier:
        lhs = self._or()
        if self.at("=>"):
            self.take()
            return Implies(lhs, self._implies())
        return lhs

    def _or(self) -> Qualifier:
        lhs = self._and()
        while self.at("\\/"):
            self.take()
            lhs = Or(lhs, self._and())
        return lhs

    def _and(self) -> Qualifier:
        lhs = self._neg()
        while self.at("/\\"):
            self.take()
            lhs = And(lhs, self._neg())
        return lhs

    def _neg(self) -> Qualifier:
        if self.at("not"):
            self.take()
            return Not(self._neg())
        if self.at("forall") or self.at("exists"):
            kind = self.take().text
            self.expect("(")
            name = self.take()
            if name.kind != "ident":
                raise ParseError(name.line, name.col, "expected a quantified variable")
            self.expect(":")
            is_nat = self._peek_is_nat()
            sort = self.base_type()
            self.expect(")")
            self.expect(".")
            was_bool = name.text in self.bool_vars
            if sort == BOOL:
                self.bool_vars.add(name.text)
            body = self.qualifier()
            if sort == BOOL and not was_bool:
                self.bool_vars.discard(name.text)
            if is_nat and kind == "forall":
                body = Implies(Rel(">=", EVar(name.text), ELit(0)), body)
            elif is_nat:
                body = And(Rel(">=", EVar(name.text), ELit(0)), body)
            return Quant(kind, name.text, sort, body)
        return self._cmp()

    def _cmp(self) -> Qualifier:
        lhs = self._additive()
        t = self.peek()
        if t is not None and t.text in ("=", "<>", "<", "<=", ">", ">="):
            op = self.take().text
            rhs = self._additive()
            if "bool" in (self._sort_of(lhs), self._sort_of(rhs)):
                if op not in ("=", "<>"):
                    raise self.error(f"operator {op!r} needs integer operands")
                out: Qualifier = Iff(self._as_formula(lhs), self._as_formula(rhs))
                return Not(out) if op == "<>" else out
            return Rel(op, lhs, rhs)
        if isinstance(lhs, EBool):
            return TRUE if lhs.value else QFalse()
        if self._sort_of(lhs) != "bool":
            raise self.error("expected a comparison or a boolean atom")
        return self._as_formula(lhs)

    def _additive(self) -> Expr:
        lhs = self._multiplicative()
        while self.at("+") or self.at("-"):
            op = self.take().text
            rhs = self._multiplicative()
            lhs = EAdd(lhs, rhs) if op == "+" else ESub(lhs, rhs)
        return lhs

    def _multiplicative(self) -> Expr:
        t = self.peek()
        if t is not None and t.kind == "int" and self.at("*", 1):
            k = int(self.take().text)
            self.expect("*")
            return EMul(k, self._primary_expr())
        return self._primary_expr()

    def _primary_expr(self) -> Expr:
        t = self.take()
        if t.kind == "int":
            return ELit(int(t.text))
        if t.text == "-" and self.peek() is not None and self.peek().kind == "int":
            return ELit(-int(self.take().text))
        if t.text == "true":
            return EBool(True)
        if t.text == "false":
            return EBool(False)
        if t.kind == "ident":
            if self.at("("):
                self.take()
                args: list[Expr] = []
                if not self.at(")"):
                    args.append(self._additive())
                    while self.at(","):
                        self.take()
                        args.append(self._additive())
                self.expect(")")
                decl = self.predicates.get(t.text)
                if decl is None:
                    raise UnknownPredicate(f"{t.line}:{t.col}: predicate {t.text!r} not declared")
                if len(args) != len(decl.arg_sorts):
                    raise ParseError(t.line, t.col,
                                     f"predicate {t.text!r} expects {len(decl.arg_sorts)} arguments")
                return EApp(t.text, tuple(args))
            return EVar(t.text)
        if t.text == "(":
            inner = self._additive()
            self.expect(")")
            return inner
        raise ParseError(t.line, t.col, f"unexpected token {t.text!r} in expression")

    # -- refinement types

    def rtype(self) -> RefinementType:
        if self.at("forall"):
            self.take()
            if self.at("("):
                self.take()
                name = self.take().text
                self.expect(":")
                sort = self.base_type()
                self.expect(")")
                self.expect(".")
                return RForallPred(name, sort, self.rtype())
            name = self.take().text
            self.expect(".")
            return RForallTy(name, self.rtype())
        return self._arrow_type()

    def _arrow_type(self) -> RefinementType:
        lhs_name, lhs = self._arg_type()
        if self.at("->"):
            self.take()
            rest = self._arrow_type()
            return RArrow(lhs_name, lhs, rest)
        return lhs

    _anon_count = 0

    def _fresh_arg(self) -> str:
        _Parser._anon_count += 1
        return f"arg{_Parser._anon_count}"

    def _arg_type(self) -> tuple[str, RefinementType]:
        # "(x : T)" names a dependent argument when followed by "->"
        if self.at("(") and self.peek(1) is not None and self.peek(1).kind == "ident" \
                and self.at(":", 2):
            save = self.pos
            self.take()
            name = self.take().text
            self.take()  # ":"
            is_nat = self._peek_is_nat()
            try:
                inner = self.rtype()
            except SpecError:
                self.pos = save
                return self._fresh_arg(), self._simple_type()
            if self.at(")"):
                self.take()
                if isinstance(inner, RBase):
                    inner = RBase(name, inner.base, inner.qual)
                    if inner.base == BOOL:
                        self.bool_vars.add(name)
                return name, inner
            # "(f : [a], s : [a])" is a named pair, not an argument
            self.pos = save
        return self._fresh_arg(), self._simple_type()

    def _simple_type(self) -> RefinementType:
        if self.at("{"):
            return self._refined_base()
        is_nat = self._peek_is_nat()
        save = self.pos
        t = self.take()
        # named pair "(f : T, s : T)" in bare position
        if t.text == "(" and self.peek() is not None and self.peek().kind == "ident" \
                and self.at(":", 1):
            self.pos = save
            binder = self._fresh_arg()
            base, named = self._pair_base()
            return RBase(binder, base, TRUE)
        self.pos = save
        base = self.base_type()
        qual: Qualifier = TRUE
        if is_nat:
            qual = Rel(">=", EVar(VALUE_VAR), ELit(0))
        return RBase(self._fresh_arg(), base, qual)

    def _pair_base(self) -> tuple[BaseType, list[tuple[str, str]]]:
        """Parse "(f : T, s : T)" returning the pair base plus component
        names mapped to fst/snd."""
        self.expect("(")
        names: list[tuple[str, str]] = []
        first_name = self.take().text
        self.expect(":")
        first = self.base_type()
        self.expect(",")
        second_name = self.take().text
        self.expect(":")
        second = self.base_type()
        self.expect(")")
        names = [(first_name, "fst"), (second_name, "snd")]
        return BPair(first, second), names

    def _refined_base(self) -> RefinementType:
        self.expect("{")
        binder = self.take()
        if binder.kind != "ident":
            raise ParseError(binder.line, binder.col, "expected a value binder")
        self.expect(":")
        named: list[tuple[str, str]] = []
        if self.at("(") and self.peek(1) is not None and self.peek(1).kind == "ident" \
                and self.at(":", 2):
            base, named = self._pair_base()
            is_nat = False
        else:
            is_nat = self._peek_is_nat()
            base = self.base_type()
        self.expect("|")
        was_bool = binder.text in self.bool_vars
        if base == BOOL:
            self.bool_vars.add(binder.text)
        qual = self.qualifier()
        if base == BOOL and not was_bool:
            self.bool_vars.discard(binder.text)
        self.expect("}")
        sub: dict[str, Expr] = {binder.text: EVar(VALUE_VAR)}
        for comp_name, proj in named:
            sub[comp_name] = EApp(proj, (EVar(VALUE_VAR),))
        qual = qual_subst(qual, sub)
        if is_nat:
            qual = conj([qual, Rel(">=", EVar(VALUE_VAR), ELit(0))])
        return RBase(binder.text, base, qual)

    # -- terms (used for solution patterns and round-trip tests)

    def term(self) -> Term:
        if self.at("fun"):
            self.take()
            names = []
            while not self.at("->"):
                tok = self.take()
                if tok.kind != "ident":
                    raise ParseError(tok.line, tok.col, "expected an argument name")
                names.append(tok.text)
            self.expect("->")
            body = self.term()
            for n in reversed(names):
                body = Lam(n, None, body)
            return body
        if self.at("let"):
            self.take()
            name = self.take().text
            self.expect("=")
            bound = self.term()
            self.expect("in")
            body = self.term()
            return Let(name, bound, body)
        if self.at("if"):
            self.take()
            cond = self._term_atom()
            self.expect("then")
            then = self.term()
            self.expect("else")
            orelse = self.term()
            return If(cond, then, orelse)
        return self._term_app()

    def _term_app(self) -> Term:
        out = self._term_atom()
        while True:
            t = self.peek()
            if t is None:
                break
            if t.kind == "ident" and t.text not in ("in", "then", "else", "let", "if", "fun"):
                pass
            elif t.kind == "int" or t.text in ("(", "["):
                pass
            else:
                break
            out = App(out, self._term_atom())
        return out

    def _term_atom(self) -> Term:
        t = self.take()
        if t.kind == "int":
            return Const(int(t.text), INT)
        if t.text == "true":
            return Const(True, BOOL)
        if t.text == "false":
            return Const(False, BOOL)
        if t.text == "[":
            self.expect("]")
            return Const("nil", BList(BVar("a")))
        if t.kind == "ident":
            return Var(t.text)
        if t.text == "(":
            if self.at(")"):
                self.take()
                return Const("unit", UNIT)
            inner = self.term()
            self.expect(")")
            return inner
        raise ParseError(t.line, t.col, f"unexpected token {t.text!r} in term")


def _rename_binders(ty: RefinementType, taken: set[str]) -> RefinementType:
    """Alpha-rename argument binders so they are distinct from `taken`,
    updating dependent occurrences in later qualifiers."""

    def go(ty: RefinementType) -> RefinementType:
        match ty:
            case RArrow(name, arg, res):
                new = name
                k = 2
                while new in taken:
                    new = f"{name}_{k}"
                    k += 1
                taken.add(new)
                arg2 = go(arg)
                if isinstance(arg2, RBase):
                    arg2 = RBase(new, arg2.base, arg2.qual)
                res2 = go(res)
                if new != name:
                    from .syntax import type_subst_names
                    res2 = type_subst_names(res2, {name: new})
                return RArrow(new, arg2, res2)
            case RForallTy(v, body):
                return RForallTy(v, go(body))
            case RForallPred(v, s, body):
                return RForallPred(v, s, go(body))
            case _:
                return ty

    return go(ty)


def _parse_decls(text: str, extra_predicates: list[PredicateDecl] | None = None
                 ) -> tuple[list[tuple[str, RefinementType]], list[PredicateDecl], list[Qualifier]]:
    predicates: dict[str, PredicateDecl] = {
        # built-ins usable without declaration
        "fst": PredicateDecl("fst", (BPair(BVar("a"), BVar("b")),), BVar("a")),
        "snd": PredicateDecl("snd", (BPair(BVar("a"), BVar("b")),), BVar("b")),
    }
    for p in extra_predicates or []:
        predicates[p.name] = p
    components: list[tuple[str, RefinementType]] = []
    axioms: list[Qualifier] = []
    for decl in _join_continuations(tokenize(text)):
        p = _Parser(decl, predicates)
        head = p.take()
        if head.text == "pred":
            name = p.take()
            p.expect(":")
            sorts = [p.base_type()]
            while p.at("*"):
                p.take()
                sorts.append(p.base_type())
            p.expect("->")
            result = p.base_type()
            if not p.done():
                raise p.error("trailing tokens after predicate declaration")
            predicates[name.text] = PredicateDecl(name.text, tuple(sorts), result)
            continue
        if head.text == "axiom":
            axioms.append(p.qualifier())
            if not p.done():
                raise p.error("trailing tokens after axiom")
            continue
        if head.kind != "ident":
            raise ParseError(head.line, head.col, f"expected a declaration, found {head.text!r}")
        p.expect(":")
        ty = p.rtype()
        if not p.done():
            raise p.error("trailing tokens after signature")
        if any(name == head.text for name, _ in components):
            raise DuplicateComponent(f"{head.line}: component {head.text!r} declared twice")
        components.append((head.text, ty))
    preds = [v for k, v in predicates.items() if k not in ("fst", "snd")]
    preds.insert(0, predicates["fst"])
    preds.insert(1, predicates["snd"])
    return components, preds, axioms


def parse_library(text: str) -> Library:
    """Parse a library specification; argument binders are alpha-renamed to be
    pairwise distinct across the whole library."""
    components, predicates, axioms = _parse_decls(text)
    taken: set[str] = {name for name, _ in components}
    renamed = [(name, _rename_binders(ty, taken)) for name, ty in components]
    return Library(components=renamed, predicates=predicates, axioms=axioms)


def parse_query(text: str, library: Library | None = None) -> Query:
    """Parse a query file: one component-style signature with a base-refined
    result.  Predicates declared by `library` are in scope."""
    components, _, _ = _parse_decls(text, library.predicates if library else None)
    if len(components) != 1:
        raise SpecError(f"query file must contain exactly one signature, found {len(components)}")
    _, ty = components[0]
    args, result = arrow_args(ty)
    if not isinstance(result, RBase):
        raise SpecError("query result must be a base refinement")
    return Query(args=list(args), result=result)


def parse_term(text: str) -> Term:
    """Parse a single term (solution pattern syntax)."""
    decls = _join_continuations(tokenize(text))
    if len(decls) != 1:
        raise SpecError("expected a single term")
    p = _Parser(decls[0], {})
    t = p.term()
    if not p.done():
        raise p.error("trailing tokens after term")
    return t
