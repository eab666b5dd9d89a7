"""Conditional-independence statements of the block-recursive Markov properties."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .graph import (
    DEFAULT_COMPONENT_CAP,
    ChainGraph,
    ComponentDag,
    _check_cap,
    chain_components,
    dag_relations,
    is_connected,
    neighborhoods,
    subsets_in_order,
    vset,
)


class MarkovType(str, Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"

    @property
    def c2(self) -> str:
        return "a" if self in (MarkovType.I, MarkovType.II) else "b"

    @property
    def c3(self) -> str:
        return "a" if self in (MarkovType.I, MarkovType.III) else "b"

    @classmethod
    def parse(cls, value) -> "MarkovType":
        if isinstance(value, cls):
            return value
        return cls(str(value).upper())


@dataclass(frozen=True)
class CiStatement:
    """``alpha _||_ beta | gamma``, stored with alpha holding the smallest label."""

    alpha: frozenset
    beta: frozenset
    gamma: frozenset = frozenset()
    sources: tuple = field(default=(), compare=False)

    def __post_init__(self):
        a, b, c = vset(self.alpha), vset(self.beta), vset(self.gamma)
        if not a or not b:
            raise ValueError("alpha and beta must be nonempty")
        if a & b or a & c or b & c:
            raise ValueError("alpha, beta, gamma must be pairwise disjoint")
        if min(b) < min(a):
            a, b = b, a
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "gamma", c)

    @property
    def source(self):
        return self.sources[0] if self.sources else None

    def vertices(self):
        return self.alpha | self.beta | self.gamma

    def implies(self, other: "CiStatement") -> bool:
        """True if ``other`` follows from ``self`` by decomposition alone."""
        if self.gamma != other.gamma:
            return False
        return ((other.alpha <= self.alpha and other.beta <= self.beta)
                or (other.alpha <= self.beta and other.beta <= self.alpha))

    def to_json(self):
        out = {"alpha": sorted(self.alpha), "beta": sorted(self.beta),
               "gamma": sorted(self.gamma)}
        if self.sources:
            out["source"] = self.sources[0]
            out["sources"] = list(self.sources)
        return out

    def __str__(self):
        def fmt(s):
            return "{" + ",".join(map(str, sorted(s))) + "}"
        text = f"{fmt(self.alpha)} _||_ {fmt(self.beta)}"
        return text + (f" | {fmt(self.gamma)}" if self.gamma else "")


def ci(alpha, beta, gamma=(), source=None) -> CiStatement:
    return CiStatement(vset(alpha), vset(beta), vset(gamma), (source,) if source else ())


def statements_c1(dag: ComponentDag) -> list:
    out = []
    for k in range(len(dag.components)):
        tau = dag.components[k]
        pa, nd = dag_relations(dag, tau)
        rest = nd - pa
        if rest:
            out.append(ci(tau, rest, pa, "C1"))
    return out


def statements_c2(g: ChainGraph, variant: str = "a", reduced: bool = False,
                  dag: ComponentDag | None = None, cap: int = DEFAULT_COMPONENT_CAP) -> list:
    """(C2a)/(C2b) statements; ``reduced`` restricts sigma to connected sets (only for b)."""
    if variant not in ("a", "b"):
        raise ValueError(f"variant must be 'a' or 'b', got {variant!r}")
    if reduced and variant != "b":
        raise ValueError("the connected-set reduction applies to variant b only")
    dag = dag or chain_components(g)
    out = []
    tag = "C2" + variant
    for tau in dag.components:
        _check_cap(tau, cap)
        pa_d, _ = dag_relations(dag, tau)
        for sigma in subsets_in_order(tau):
            if reduced and not is_connected(g, sigma):
                continue
            _, nb, big_nb = neighborhoods(g, sigma)
            rest = tau - big_nb
            if not rest:
                continue
            cond = pa_d | nb if variant == "a" else pa_d
            out.append(ci(sigma, rest, cond, tag))
    return out


def statements_c3(g: ChainGraph, variant: str = "a", dag: ComponentDag | None = None,
                  cap: int = DEFAULT_COMPONENT_CAP) -> list:
    if variant not in ("a", "b"):
        raise ValueError(f"variant must be 'a' or 'b', got {variant!r}")
    dag = dag or chain_components(g)
    out = []
    tag = "C3" + variant
    for tau in dag.components:
        _check_cap(tau, cap)
        pa_d, _ = dag_relations(dag, tau)
        for sigma in subsets_in_order(tau):
            pa, nb, _ = neighborhoods(g, sigma)
            rest = pa_d - pa
            if not rest:
                continue
            cond = pa | nb if variant == "a" else pa
            out.append(ci(sigma, rest, cond, tag))
    return out


def merge_duplicates(stmts) -> list:
    """Merge equal statements, keeping first-seen order and all source tags."""
    merged = {}
    for s in stmts:
        if s in merged:
            prev = merged[s]
            tags = prev.sources + tuple(t for t in s.sources if t not in prev.sources)
            merged[s] = CiStatement(prev.alpha, prev.beta, prev.gamma, tags)
        else:
            merged[s] = s
    return list(merged.values())


def prune_implied(stmts) -> list:
    """Drop statements that follow from another listed one by decomposition."""
    keep = []
    for s in stmts:
        if any(t != s and t.implies(s) for t in stmts):
            continue
        keep.append(s)
    return keep


def statements(g: ChainGraph, mtype="IV", reduced: bool | None = None, minimal: bool = True,
               cap: int = DEFAULT_COMPONENT_CAP) -> list:
    """Statement list of the block-recursive Markov property of type ``mtype``.

    Exact duplicates are always merged. With ``minimal`` (the default) any
    statement obtainable from another one with the same conditioning set by
    shrinking alpha and beta is dropped; the remaining list imposes the same
    constraints. ``reduced`` defaults to True for (C2b).
    """
    mtype = MarkovType.parse(mtype)
    dag = chain_components(g)
    if reduced is None:
        reduced = mtype.c2 == "b"
    out = statements_c1(dag)
    out += statements_c2(g, mtype.c2, reduced=reduced and mtype.c2 == "b", dag=dag, cap=cap)
    out += statements_c3(g, mtype.c3, dag=dag, cap=cap)
    out = merge_duplicates(out)
    if minimal:
        out = prune_implied(out)
    return out
