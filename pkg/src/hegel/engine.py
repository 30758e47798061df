"""The synthesis loop.

Builds the depth-0 automaton, checks it for witnesses, then iterates
explore (new transitions), reduce (prune, similarity, minimize), and check
(non-emptiness of final states) until a solution surfaces or the call
bound is exhausted.  Solutions are extracted in ascending call-count
order, wrapped as functions over the query arguments, and re-verified by
the independent type checker before they are returned.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .checker import CheckContext, type_check, _context_of
from .construct import (
    ConstructionState, build_env, transition_step, wf_init,
)
from .entailment import Oracle
from .lta import (
    DenoteBudget, LTA, SymTree, denote, nempty, normalize, tree_call_count,
    tree_to_term,
)
from .reduce import ReductionStats, SimilaritySet, minimize, prune, similarity
from .syntax import (
    Lam, Library, Query, RBase, Term, alpha_equivalent, anf_valid, call_count,
    let_normalize,
)


class ConfigError(Exception):
    pass


class OracleFatal(Exception):
    pass


@dataclass
class SynthesisConfig:
    k: int = 5
    max_terms: int = 8
    smt_timeout_ms: int = 2000
    smt_cmd: Optional[str] = None
    backend: str = "auto"
    prune_enabled: bool = True
    similarity_enabled: bool = True
    enable_if: bool = True
    max_if_layers: int = 1
    literals: tuple = ()
    similarity_budget: int = 2000
    denote_node_cap: int = 4096
    prune_sweeps: int = 10

    def validate(self) -> None:
        if self.k < 0:
            raise ConfigError("k must be >= 0")
        if self.max_terms < 1:
            raise ConfigError("max_terms must be >= 1")


@dataclass
class RunStats:
    states_before_min: int = 0
    states_after_min: int = 0
    transitions_pruned: int = 0
    transitions_merged: int = 0
    pairs_recorded: int = 0
    smt_queries: int = 0
    cache_hits: int = 0
    terms_enumerated: int = 0
    discrepancies: int = 0
    rounds: int = 0
    wall_millis: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "schema": 1,
            "statesBeforeMin": self.states_before_min,
            "statesAfterMin": self.states_after_min,
            "transitionsPruned": self.transitions_pruned,
            "transitionsMerged": self.transitions_merged,
            "pairsRecorded": self.pairs_recorded,
            "smtQueries": self.smt_queries,
            "cacheHits": self.cache_hits,
            "termsEnumerated": self.terms_enumerated,
            "discrepancies": self.discrepancies,
            "rounds": self.rounds,
            "wallMillis": {k: round(v, 3) for k, v in self.wall_millis.items()},
        }


@dataclass
class SynthesisResult:
    solutions: list[Term]
    automaton: Optional[LTA]
    stats: RunStats

    @property
    def is_bottom(self) -> bool:
        return not self.solutions

    def __str__(self) -> str:
        if self.is_bottom:
            return "BOTTOM"
        from .printer import pretty_term
        return "\n".join(pretty_term(t) for t in self.solutions)


class _Phase:
    def __init__(self, stats: RunStats, name: str):
        self.stats = stats
        self.name = name

    def __enter__(self):
        self.t0 = time.monotonic()
        return self

    def __exit__(self, *exc):
        dt = (time.monotonic() - self.t0) * 1000.0
        self.stats.wall_millis[self.name] = self.stats.wall_millis.get(self.name, 0.0) + dt
        return False


def extract_terms(a: LTA, finals: Sequence[int], cfg: SynthesisConfig, env,
                  oracle: Oracle, query: Query, lib: Library,
                  stats: Optional[RunStats] = None) -> list[Term]:
    """Enumerate goal witnesses, wrap them over the query arguments, and
    keep those the independent checker confirms; a rejected witness is a
    discrepancy, counted and reported, never silently dropped."""
    stats = stats or RunStats()
    counter = [0]
    budget = DenoteBudget(max_depth=cfg.k + 2, max_terms=cfg.max_terms * 16,
                          node_cap=cfg.denote_node_cap)
    trees: list[SymTree] = []
    for q in sorted(finals):
        trees.extend(denote(a, q, budget, env, oracle, counter=counter))
    stats.terms_enumerated += counter[0]

    lib_names = lib.names()
    ctx = _context_of(lib, query)
    out: list[Term] = []
    seen: set[str] = set()
    for tree in sorted(trees, key=lambda t: (tree_call_count(t), t.tid)):
        term = tree_to_term(tree)
        body = let_normalize(term)
        if call_count(body, lib_names) > cfg.k:
            continue
        key = str(body)
        if key in seen:
            continue
        seen.add(key)
        if not type_check(ctx, body, query.result, oracle):
            stats.discrepancies += 1
            continue
        wrapped: Term = body
        for name, _ in reversed(query.args):
            wrapped = Lam(name, None, wrapped)
        assert anf_valid(wrapped)
        out.append(wrapped)
        if len(out) >= cfg.max_terms:
            break
    return out


def lta_synthesize(lib: Library, query: Query, cfg: Optional[SynthesisConfig] = None,
                   oracle: Optional[Oracle] = None) -> SynthesisResult:
    """LTASynthesize: initialize, check, then explore-reduce-check until a
    witness appears or the bound is reached (bottom)."""
    cfg = cfg or SynthesisConfig()
    cfg.validate()
    stats = RunStats()
    owned_oracle = oracle is None
    oracle = oracle or Oracle(lib, smt_cmd=cfg.smt_cmd,
                              timeout_ms=cfg.smt_timeout_ms, backend=cfg.backend)
    try:
        return _run(lib, query, cfg, oracle, stats)
    finally:
        stats.smt_queries = oracle.stats.queries_issued
        stats.cache_hits = oracle.stats.cache_hits
        if owned_oracle:
            oracle.close()


def _run(lib: Library, query: Query, cfg: SynthesisConfig, oracle: Oracle,
         stats: RunStats) -> SynthesisResult:
    with _Phase(stats, "init"):
        cs = wf_init(lib, query, literals=cfg.literals, enable_if=cfg.enable_if,
                     max_if_layers=cfg.max_if_layers)
    a = cs.automaton
    env = build_env(a)
    red = ReductionStats()
    sim = SimilaritySet()
    budget = DenoteBudget(max_depth=cfg.k + 2, max_terms=cfg.max_terms * 16,
                          node_cap=cfg.denote_node_cap)

    def check_and_extract(auto: LTA) -> Optional[list[Term]]:
        with _Phase(stats, "check"):
            counter = [0]
            hot = _nonempty_finals(auto, env, oracle, budget, cfg.k, counter)
            stats.terms_enumerated += counter[0]
        if not hot:
            return None
        with _Phase(stats, "extract"):
            terms = extract_terms(auto, sorted(hot), cfg, env, oracle, query,
                                  lib, stats)
        return terms or None

    stats.states_before_min = len(a.states)
    stats.states_after_min = len(a.states)
    found = check_and_extract(a)
    if found:
        stats.rounds = 0
        return SynthesisResult(found, normalize(a), stats)

    while a.depth < cfg.k:
        with _Phase(stats, "transition"):
            transition_step(cs, oracle)
            env = build_env(a)
        stats.states_before_min = len(a.states)
        stats.rounds = a.depth
        if cfg.prune_enabled:
            with _Phase(stats, "prune"):
                prune(a, env, oracle, red, max_sweeps=cfg.prune_sweeps)
        if cfg.similarity_enabled:
            with _Phase(stats, "similarity"):
                pinned = frozenset(name for name, _ in query.args)
                sim = similarity(a, sim, env, oracle, cfg.similarity_budget, red,
                                 pinned=pinned)
            with _Phase(stats, "minimize"):
                a, sim = minimize(a, sim, red)
                cs.automaton = a
        env = build_env(a)
        stats.states_after_min = len(a.states)
        stats.transitions_pruned = red.transitions_pruned
        stats.transitions_merged = red.transitions_merged
        stats.pairs_recorded = red.pairs_recorded
        found = check_and_extract(a)
        if found:
            return SynthesisResult(found, normalize(a), stats)

    return SynthesisResult([], normalize(a), stats)


def _nonempty_finals(a: LTA, env, oracle: Oracle, budget: DenoteBudget,
                     k: int, counter) -> set[int]:
    out = set()
    for q in sorted(a.finals):
        trees = denote(a, q, budget, env, oracle, counter=counter)
        if any(tree_call_count(t) <= k for t in trees):
            out.add(q)
    return out
