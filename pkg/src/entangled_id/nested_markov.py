"""Fixing, intrinsic sets and binary Möbius parameter counts.

Conditional mixed graphs are :class:`MixedGraph` objects whose ``fixed``
set holds the context vertices.  Kernels are tables over random plus
context variables that are normalized over the random ones.  Fixing a
vertex moves it to the context in the graph and divides the kernel by the
vertex's conditional given its Markov blanket.

Parameter counting follows the nested Markov Möbius parameterization for
binary variables: each intrinsic set with head ``H`` and tail ``T``
contributes the parameters ``q(H = 0 | T = t)`` for every admissible tail
assignment ``t``.  For observed laws of missing-data graphs a tail
indicator that must equal 1 whenever a head proxy is observed is pinned,
so its configurations count once.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EntangledIdError
from .graph_model import MissingDataGraph, MixedGraph, indicator_id
from .id_engine import full_observability_graph
from .tables import Table

__all__ = [
    "chain_graph",
    "count_admg_parameters",
    "count_certificate",
    "count_mobius_parameters",
    "CountCertificate",
    "CountHalf",
    "DivisionByZeroRegion",
    "fix_kernel",
    "fix_sequence",
    "fix_vertex_graph",
    "intrinsic_sets",
    "IntrinsicSetRecord",
    "is_fixable",
    "Kernel",
    "markov_blanket_cadmg",
    "mobius_parameters",
    "MobiusParameter",
    "non_id_certificate",
    "NonBinaryVariable",
    "NotFixable",
    "observed_law_graph",
    "reachable_sets",
    "SizeCapExceeded",
    "valid_fixing_sequences",
    "verify_nested_factorization",
]

DEFAULT_SIZE_CAP = 14


class NotFixable(EntangledIdError):
    """The vertex shares its district with one of its descendants."""


class DivisionByZeroRegion(EntangledIdError):
    """Fixing divided by a conditional that is zero where the kernel is positive."""


class SizeCapExceeded(EntangledIdError):
    """The graph has more random vertices than the enumeration cap."""


class NonBinaryVariable(EntangledIdError):
    """Parameter counting is defined for binary variables only."""


# ---------------------------------------------------------------------------
# graph fixing
# ---------------------------------------------------------------------------


def _random_district(c: MixedGraph, v: str) -> frozenset[str]:
    return c.district(v, within=c.random)


def is_fixable(c: MixedGraph, v: str) -> bool:
    """True iff no other vertex is both in ``v``'s district and a descendant of ``v``."""
    if v not in c.random:
        raise NotFixable(f"{v} is not a random vertex")
    return (_random_district(c, v) & c.descendants({v})) == {v}


def fix_vertex_graph(c: MixedGraph, v: str) -> MixedGraph:
    """Move ``v`` to the context and drop every edge with an arrowhead at ``v``."""
    if not is_fixable(c, v):
        raise NotFixable(f"{v} is not fixable")
    directed = frozenset(e for e in c.directed if e[1] != v)
    bidirected = frozenset(e for e in c.bidirected if v not in e)
    return MixedGraph(c.vertices, directed, bidirected, c.fixed | {v})


def markov_blanket_cadmg(c: MixedGraph, v: str) -> frozenset[str]:
    """District of ``v`` and the parents of that district, without ``v``."""
    dis = _random_district(c, v)
    return (dis | c.parents_of(dis)) - {v}


def fix_sequence(c: MixedGraph, seq: Iterable[str]) -> MixedGraph:
    for v in seq:
        c = fix_vertex_graph(c, v)
    return c


def _greedy_sequence(c: MixedGraph, target: frozenset[str]) -> tuple[str, ...] | None:
    """Lexicographically least fixing sequence for ``random - target``, if one exists.

    Fixing never makes a fixable vertex unfixable, so always fixing the
    smallest fixable vertex succeeds whenever any sequence does.
    """
    seq: list[str] = []
    todo = set(c.random - target)
    while todo:
        for v in sorted(todo):
            if is_fixable(c, v):
                c = fix_vertex_graph(c, v)
                seq.append(v)
                todo.discard(v)
                break
        else:
            return None
    return tuple(seq)


def reachable_sets(c: MixedGraph, cap: int = DEFAULT_SIZE_CAP) -> dict[frozenset[str], MixedGraph]:
    """Every random set reachable by fixing, mapped to its conditional graph.

    The graph obtained by fixing a set does not depend on the order, so the
    search is memoized on the remaining random set.
    """
    if len(c.random) > cap:
        raise SizeCapExceeded(f"{len(c.random)} random vertices exceeds the cap of {cap}")
    start = frozenset(c.random)
    seen: dict[frozenset[str], MixedGraph] = {start: c}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        g = seen[s]
        for v in sorted(s):
            if is_fixable(g, v):
                t = s - {v}
                if t not in seen:
                    seen[t] = fix_vertex_graph(g, v)
                    queue.append(t)
    return seen


@dataclass(frozen=True)
class IntrinsicSetRecord:
    members: frozenset[str]
    sequence: tuple[str, ...]
    head: frozenset[str]
    tail: frozenset[str]

    def key(self) -> tuple:
        return (len(self.members), sorted(self.members))

    def to_json(self) -> dict:
        return {
            "set": sorted(self.members),
            "sequence": list(self.sequence),
            "head": sorted(self.head),
            "tail": sorted(self.tail),
        }


def intrinsic_sets(c: MixedGraph, cap: int = DEFAULT_SIZE_CAP) -> list[IntrinsicSetRecord]:
    """Reachable sets that form a single district once everything else is fixed."""
    out: list[IntrinsicSetRecord] = []
    for s, g in reachable_sets(c, cap).items():
        if not s:
            continue
        first = next(iter(s))
        if _random_district(g, first) != s:
            continue
        seq = _greedy_sequence(c, s)
        assert seq is not None
        head = frozenset(v for v in s if not (g.children(v) & g.random))
        tail = g.parents_of(head) - head
        out.append(IntrinsicSetRecord(s, seq, head, tail))
    out.sort(key=IntrinsicSetRecord.key)
    return out


def valid_fixing_sequences(c: MixedGraph, target: Iterable[str], limit: int = 200) -> list[tuple[str, ...]]:
    """Up to ``limit`` valid orders for fixing ``random - target``."""
    target = frozenset(target)
    out: list[tuple[str, ...]] = []

    def walk(g: MixedGraph, prefix: tuple[str, ...]) -> None:
        if len(out) >= limit:
            return
        todo = sorted(g.random - target)
        if not todo:
            out.append(prefix)
            return
        for v in todo:
            if is_fixable(g, v):
                walk(fix_vertex_graph(g, v), prefix + (v,))

    walk(c, ())
    return out


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Kernel:
    """``q(random | context)`` as a table over both variable sets."""

    table: Table
    random: tuple[str, ...]
    context: tuple[str, ...] = ()
    tolerance: float = 1e-10

    def __post_init__(self) -> None:
        names = set(self.random) | set(self.context)
        if names != set(self.table.variables) or len(names) != len(self.random) + len(self.context):
            raise ValueError("kernel axes must be exactly the random and context variables")
        if np.any(self.table.values < -self.tolerance):
            raise ValueError("kernel has negative entries")
        sums = self.table.sum_out(self.random)
        if sums.values.size and np.max(np.abs(sums.values - 1.0)) > 1e-8:
            raise ValueError("kernel is not normalized over its random variables")

    @classmethod
    def joint(cls, table: Table) -> "Kernel":
        return cls(table, tuple(table.variables), ())

    def marginal(self, keep: Iterable[str]) -> Table:
        """Marginal over a subset of the random variables, still indexed by the context."""
        keep = set(keep)
        return self.table.sum_out([v for v in self.random if v not in keep])

    def conditional(self, child: str, parents: Iterable[str]) -> Table:
        """``q(child | parents, context)`` with ``parents`` among the random variables."""
        parents = [p for p in parents if p in self.random and p != child]
        m = self.marginal([child] + parents)
        return m / m.sum_out([child])

    def restricted(self, assignment: Mapping[str, int]) -> Table:
        return self.table.slice(assignment)


def fix_kernel(q: Kernel, c: MixedGraph, v: str) -> Kernel:
    """Divide ``q`` by ``q(v | mb(v))`` and move ``v`` to the context."""
    if set(q.random) != set(c.random):
        raise ValueError("kernel and graph disagree on the random vertices")
    if not is_fixable(c, v):
        raise NotFixable(f"{v} is not fixable")
    mb = markov_blanket_cadmg(c, v)
    divisor = q.conditional(v, mb)
    positive = q.table.values > 0
    div_full = divisor.expand(q.table.variables, q.table.cards)
    if np.any(positive & (div_full <= 0)):
        raise DivisionByZeroRegion(f"q({v} | {sorted(mb)}) vanishes where the kernel is positive")
    new = q.table / divisor
    new = new.transpose(q.table.variables)
    random = tuple(x for x in q.random if x != v)
    return Kernel(new, random, q.context + (v,), q.tolerance)


def fix_kernel_sequence(q: Kernel, c: MixedGraph, seq: Iterable[str]) -> tuple[Kernel, MixedGraph]:
    for v in seq:
        q = fix_kernel(q, c, v)
        c = fix_vertex_graph(c, v)
    return q, c


# ---------------------------------------------------------------------------
# nested factorization check
# ---------------------------------------------------------------------------


@dataclass
class FactorizationReport:
    checked_sets: list[tuple[str, ...]] = field(default_factory=list)
    sequence_max_diff: float = 0.0
    context_max_diff: float = 0.0
    factorization_error: float = 0.0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _context_dependence(q: Kernel, c: MixedGraph, s: frozenset[str]) -> float:
    """How much ``q_S`` varies with fixed vertices that are not parents of ``S``."""
    pa = c.parents_of(s) - s
    idle = [w for w in q.context if w not in pa]
    if not idle:
        return 0.0
    t = q.table.transpose(list(s) + [w for w in q.context if w in pa] + idle)
    base = t.values.reshape(t.values.shape[: len(t.variables) - len(idle)] + (-1,))
    return float(np.max(np.abs(base - base[..., :1])))


def verify_nested_factorization(
    q: Kernel | Table,
    c: MixedGraph,
    trials: int = 10,
    rng: np.random.Generator | None = None,
    tol: float = 1e-10,
    sequence_limit: int = 24,
) -> FactorizationReport:
    """Check a joint against the nested Markov factorization of ``c``.

    For ``trials`` random reachable sets every valid fixing order (up to
    ``sequence_limit``) must give the same kernel, and the kernel of each
    intrinsic set may only depend on the parents of the set.  The product
    of district kernels must reproduce the joint.
    """
    if isinstance(q, Table):
        q = Kernel(q, tuple(v for v in q.variables if v not in c.fixed), tuple(v for v in q.variables if v in c.fixed))
    rng = rng or np.random.default_rng(0)
    report = FactorizationReport()
    reach = reachable_sets(c)
    candidates = sorted((s for s in reach if s and s != frozenset(c.random)), key=lambda s: (len(s), sorted(s)))
    picks: list[frozenset[str]] = []
    if candidates:
        idx = rng.choice(len(candidates), size=min(trials, len(candidates)), replace=False)
        picks = [candidates[i] for i in sorted(idx)]
    intrinsic = {r.members for r in intrinsic_sets(c)}
    for s in picks:
        report.checked_sets.append(tuple(sorted(s)))
        seqs = valid_fixing_sequences(c, s, sequence_limit)
        kernels = [fix_kernel_sequence(q, c, seq)[0] for seq in seqs]
        ref = kernels[0]
        for seq, k in zip(seqs[1:], kernels[1:]):
            d = ref.table.max_abs_diff(k.table)
            report.sequence_max_diff = max(report.sequence_max_diff, d)
            if d > tol:
                report.violations.append(f"fixing orders {seqs[0]} and {seq} disagree by {d:.3g}")
        if s in intrinsic:
            d = _context_dependence(ref, reach[s], s)
            report.context_max_diff = max(report.context_max_diff, d)
            if d > tol:
                report.violations.append(f"kernel of {sorted(s)} depends on non-parent context by {d:.3g}")
    product = Table.scalar(1.0)
    for dis in c.districts(c.random):
        seq = _greedy_sequence(c, dis)
        k, g = fix_kernel_sequence(q, c, seq)
        pa = g.parents_of(dis) - dis
        # the district kernel is a function of its parents only
        others = [w for w in k.context if w not in pa]
        factor = k.table.slice({w: 0 for w in others})
        product = product * factor
    err = product.max_abs_diff(q.table)
    report.factorization_error = err
    if err > tol:
        report.violations.append(f"district factorization is off by {err:.3g}")
    return report


# ---------------------------------------------------------------------------
# Möbius parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MobiusParameter:
    owner: frozenset[str]
    head: frozenset[str]
    tail: tuple[tuple[str, int], ...]
    admissible: bool

    def __str__(self) -> str:
        head = ", ".join(f"{h}=0" for h in sorted(self.head))
        tail = ", ".join(f"{t}={v}" for t, v in self.tail)
        return f"q({head} | {tail})" if tail else f"q({head})"


@dataclass(frozen=True)
class CountHalf:
    law: str
    records: tuple[IntrinsicSetRecord, ...]
    parameters: tuple[MobiusParameter, ...]
    pinned: Mapping[str, frozenset[str]] = field(default_factory=dict, compare=False)

    @property
    def total(self) -> int:
        return sum(1 for p in self.parameters if p.admissible)

    def breakdown(self) -> list[dict]:
        rows = []
        for r in self.records:
            n = sum(1 for p in self.parameters if p.owner == r.members and p.admissible)
            row = r.to_json()
            row["parameters"] = n
            rows.append(row)
        return rows

    def to_json(self) -> dict:
        return {"law": self.law, "total": self.total, "intrinsic_sets": self.breakdown()}


def mobius_parameters(
    c: MixedGraph,
    pinning: Mapping[str, Iterable[str]] | None = None,
    cap: int = DEFAULT_SIZE_CAP,
) -> tuple[list[IntrinsicSetRecord], list[MobiusParameter]]:
    """Intrinsic sets of ``c`` and all their parameters, admissible or not.

    ``pinning`` maps a head vertex to tail vertices that must equal 1
    whenever that vertex is in the head.
    """
    pinning = {k: frozenset(v) for k, v in (pinning or {}).items()}
    records = intrinsic_sets(c, cap)
    params: list[MobiusParameter] = []
    for r in records:
        pinned = frozenset().union(*(pinning.get(h, frozenset()) for h in r.head)) & r.tail
        tail = sorted(r.tail)
        for bits in itertools.product((0, 1), repeat=len(tail)):
            assignment = tuple(zip(tail, bits))
            ok = all(val == 1 for t, val in assignment if t in pinned)
            params.append(MobiusParameter(r.members, r.head, assignment, ok))
    return records, params


def count_admg_parameters(
    c: MixedGraph,
    pinning: Mapping[str, Iterable[str]] | None = None,
    law: str = "admg",
    cap: int = DEFAULT_SIZE_CAP,
) -> CountHalf:
    records, params = mobius_parameters(c, pinning, cap)
    pins = {k: frozenset(v) for k, v in (pinning or {}).items()}
    return CountHalf(law, tuple(records), tuple(params), pins)


def observed_law_graph(g: MissingDataGraph) -> MixedGraph:
    """Covariates, proxies and indicators, with counterfactuals and hidden vertices projected out."""
    drop = g.counterfactuals() + g.hidden()
    return g.graph.latent_project(drop) if drop else g.graph


def _proxy_pins(g: MissingDataGraph) -> dict[str, frozenset[str]]:
    aff = g.affectors()
    return {p: frozenset({indicator_id(p)} | set(aff.indicators_of(p))) for p in g.proxies()}


def _check_binary(cards: Mapping[str, int] | None) -> None:
    for v, k in (cards or {}).items():
        if k != 2:
            raise NonBinaryVariable(f"{v} has {k} states; counting needs binary variables")


def count_mobius_parameters(
    g: MissingDataGraph,
    law: str = "full_observability",
    cards: Mapping[str, int] | None = None,
    cap: int = DEFAULT_SIZE_CAP,
) -> CountHalf:
    """Möbius parameter count of the full-observability law or of the observed law."""
    _check_binary(cards)
    if law in ("full_observability", "full-obs", "full"):
        return count_admg_parameters(full_observability_graph(g), None, "full_observability", cap)
    if law == "observed":
        return count_admg_parameters(observed_law_graph(g), _proxy_pins(g), "observed", cap)
    raise ValueError(f"unknown law {law!r}")


@dataclass(frozen=True)
class CountCertificate:
    full_observability: CountHalf
    observed: CountHalf

    @property
    def counts(self) -> tuple[int, int]:
        return (self.full_observability.total, self.observed.total)

    @property
    def certifies_non_id(self) -> bool:
        return self.full_observability.total > self.observed.total

    def to_json(self) -> dict:
        return {
            "full_observability": self.full_observability.total,
            "observed": self.observed.total,
            "certifies_non_identification": self.certifies_non_id,
            "breakdown": {
                "full_observability": self.full_observability.breakdown(),
                "observed": self.observed.breakdown(),
            },
        }


def count_certificate(g: MissingDataGraph, cap: int = DEFAULT_SIZE_CAP) -> CountCertificate:
    return CountCertificate(
        count_mobius_parameters(g, "full_observability", cap=cap),
        count_mobius_parameters(g, "observed", cap=cap),
    )


def non_id_certificate(g: MissingDataGraph, cap: int = DEFAULT_SIZE_CAP) -> CountCertificate | None:
    """A certificate when the observed law has fewer parameters; ``None`` is inconclusive."""
    cert = count_certificate(g, cap)
    return cert if cert.certifies_non_id else None


def chain_graph(names: Sequence[str]) -> MixedGraph:
    """Bidirected chain over ``names``."""
    return MixedGraph(frozenset(names), frozenset(), frozenset(frozenset(p) for p in zip(names, names[1:])))
