"""Mixed graphs whose vertices carry missing-data roles.

Two layers live here.  :class:`MixedGraph` is a plain conditional acyclic
directed mixed graph (directed edges, bidirected edges, and an optional set of
fixed context vertices) with the usual genealogical queries.  Every algorithm
in the package that does not care about roles works on it.
:class:`MissingDataGraph` wraps a mixed graph together with a role for every
vertex (always observed, counterfactual, indicator, proxy, hidden, context),
the set of deterministic proxy edges, and a mode flag selecting which edge
restrictions apply.

Vertex identifiers are plain strings with a fixed spelling:

* covariates ``O.<name>``
* hidden variables ``H.<name>``
* proxies ``<name>``
* indicators ``R_<short>`` where ``<short>`` is the digits of names such as
  ``Z3`` and the full name otherwise (``R_3`` for ``Z3``, ``R_A`` for ``A``)
* counterfactuals ``<name>[1]`` or ``<name>[1;r2=0,r3=1]`` with pattern keys
  sorted by indicator id
"""

from __future__ import annotations

import enum
import heapq
import re
from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Union

from .errors import EntangledIdError

__all__ = [
    "AffectorMap",
    "AlwaysObserved",
    "Context",
    "Counterfactual",
    "CyclicDirectedPart",
    "DropRetainedRole",
    "GraphValidationError",
    "Hidden",
    "IllegalIndicatorEdge",
    "Indicator",
    "MalformedProxyParents",
    "MissingDataGraph",
    "MixedGraph",
    "Mode",
    "ModeMismatch",
    "PatternReferencesUnknownIndicator",
    "Proxy",
    "UnknownVertex",
    "Violation",
    "build_and_validate",
    "counterfactual_id",
    "derive_affectors",
    "districts",
    "indicator_id",
    "latent_project",
    "parse_counterfactual_id",
    "pattern_key",
    "short_name",
    "validate_graph",
]


# ---------------------------------------------------------------------------
# naming
# ---------------------------------------------------------------------------

_NUMBERED = re.compile(r"^Z(\d+)$")
_CTF_ID = re.compile(r"^([^\[\]\s]+)\[1(?:;([^\]]*))?\]$")


def short_name(name: str) -> str:
    """Return the suffix used for indicator ids and pattern keys of ``name``."""
    match = _NUMBERED.match(name)
    return match.group(1) if match else name


def indicator_id(name: str) -> str:
    """Id of the missingness indicator belonging to variable ``name``."""
    return "R_" + short_name(name)


def pattern_key(indicator: str) -> str:
    """Pattern key (``r2``) that refers to indicator ``indicator`` (``R_2``)."""
    return "r" + indicator[2:]


def key_indicator(key: str) -> str:
    """Inverse of :func:`pattern_key`."""
    return "R_" + key[1:]


def counterfactual_id(name: str, pattern: Mapping[str, int] | Iterable[tuple[str, int]] = ()) -> str:
    """Canonical id for the counterfactual of ``name`` under ``pattern``.

    ``pattern`` maps indicator ids to 0/1.  Keys are sorted so that two
    spellings of the same assignment yield one id.
    """
    items = sorted(dict(pattern).items())
    if not items:
        return f"{name}[1]"
    body = ",".join(f"{pattern_key(k)}={int(v)}" for k, v in items)
    return f"{name}[1;{body}]"


def parse_counterfactual_id(text: str) -> tuple[str, tuple[tuple[str, int], ...]]:
    """Split a counterfactual id (spaces tolerated) into name and sorted pattern."""
    compact = re.sub(r"\s+", "", text)
    match = _CTF_ID.match(compact)
    if not match:
        raise ValueError(f"not a counterfactual id: {text!r}")
    name, body = match.group(1), match.group(2)
    pattern: dict[str, int] = {}
    if body:
        for part in body.split(","):
            key, _, value = part.partition("=")
            if not key.startswith("r") or len(key) < 2 or value not in ("0", "1"):
                raise ValueError(f"bad pattern entry {part!r} in {text!r}")
            ind = key_indicator(key)
            if ind in pattern:
                raise ValueError(f"repeated pattern key {key!r} in {text!r}")
            pattern[ind] = int(value)
    return name, tuple(sorted(pattern.items()))


# ---------------------------------------------------------------------------
# roles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlwaysObserved:
    unit: str
    name: str
    kind = "covariate"


@dataclass(frozen=True)
class Counterfactual:
    unit: str
    name: str
    pattern: tuple[tuple[str, int], ...] = ()
    kind = "counterfactual"

    @property
    def pattern_map(self) -> dict[str, int]:
        return dict(self.pattern)

    @property
    def all_ones(self) -> bool:
        """True for the full-observability version (no zero in the pattern)."""
        return all(v == 1 for _, v in self.pattern)


@dataclass(frozen=True)
class Indicator:
    unit: str
    name: str
    kind = "indicator"


@dataclass(frozen=True)
class Proxy:
    unit: str
    name: str
    kind = "proxy"


@dataclass(frozen=True)
class Hidden:
    label: str
    unit: str | None = None
    kind = "hidden"


@dataclass(frozen=True)
class Context:
    label: str
    kind = "context"


VertexRole = Union[AlwaysObserved, Counterfactual, Indicator, Proxy, Hidden, Context]


class Mode(str, enum.Enum):
    CLASSIC = "classic"
    INTERFERENCE = "interference"
    RELAXED_IID = "relaxed_iid"


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    """One broken structural restriction, naming the offending objects."""

    kind: str
    message: str
    subjects: tuple[str, ...] = ()


class GraphValidationError(EntangledIdError):
    """Raised when a graph breaks one or more restrictions of its mode."""

    def __init__(self, violations: Iterable[Violation]):
        self.violations = tuple(violations)
        lines = "; ".join(f"{v.kind}: {v.message}" for v in self.violations)
        super().__init__(lines or "invalid graph")


class CyclicDirectedPart(GraphValidationError):
    pass


class IllegalIndicatorEdge(GraphValidationError):
    pass


class MalformedProxyParents(GraphValidationError):
    pass


class PatternReferencesUnknownIndicator(GraphValidationError):
    pass


class ModeMismatch(GraphValidationError):
    pass


class UnknownVertex(GraphValidationError):
    pass


class DropRetainedRole(EntangledIdError):
    """Raised when a latent projection would discard an observed vertex."""


_ERROR_BY_KIND: dict[str, type[GraphValidationError]] = {
    "CyclicDirectedPart": CyclicDirectedPart,
    "IllegalIndicatorEdge": IllegalIndicatorEdge,
    "MalformedProxyParents": MalformedProxyParents,
    "PatternReferencesUnknownIndicator": PatternReferencesUnknownIndicator,
    "ModeMismatch": ModeMismatch,
    "UnknownVertex": UnknownVertex,
}


def _raise_for(violations: list[Violation]) -> None:
    if violations:
        cls = _ERROR_BY_KIND.get(violations[0].kind, GraphValidationError)
        raise cls(violations)


# ---------------------------------------------------------------------------
# plain mixed graphs
# ---------------------------------------------------------------------------


def _edge2(a: str, b: str) -> frozenset[str]:
    return frozenset((a, b))


@dataclass(frozen=True, eq=False)
class MixedGraph:
    """A (conditional) acyclic directed mixed graph.

    ``fixed`` holds the context vertices of a CADMG; the remaining vertices are
    random.  Instances are immutable and cache their adjacency maps.
    """

    vertices: frozenset[str]
    directed: frozenset[tuple[str, str]]
    bidirected: frozenset[frozenset[str]]
    fixed: frozenset[str] = frozenset()
    _pa: Mapping[str, frozenset[str]] = field(init=False, repr=False)
    _ch: Mapping[str, frozenset[str]] = field(init=False, repr=False)
    _sib: Mapping[str, frozenset[str]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        pa: dict[str, set[str]] = {v: set() for v in self.vertices}
        ch: dict[str, set[str]] = {v: set() for v in self.vertices}
        sib: dict[str, set[str]] = {v: set() for v in self.vertices}
        for a, b in self.directed:
            if a not in pa or b not in pa:
                raise UnknownVertex([Violation("UnknownVertex", f"edge {a} -> {b} uses an unknown vertex", (a, b))])
            if a == b:
                raise CyclicDirectedPart([Violation("CyclicDirectedPart", f"self loop on {a}", (a,))])
            ch[a].add(b)
            pa[b].add(a)
        for e in self.bidirected:
            if len(e) != 2:
                raise UnknownVertex([Violation("UnknownVertex", f"bidirected self loop {sorted(e)}", tuple(e))])
            a, b = sorted(e)
            if a not in sib or b not in sib:
                raise UnknownVertex([Violation("UnknownVertex", f"edge {a} <-> {b} uses an unknown vertex", (a, b))])
            sib[a].add(b)
            sib[b].add(a)
        object.__setattr__(self, "_pa", {k: frozenset(v) for k, v in pa.items()})
        object.__setattr__(self, "_ch", {k: frozenset(v) for k, v in ch.items()})
        object.__setattr__(self, "_sib", {k: frozenset(v) for k, v in sib.items()})

    # construction ---------------------------------------------------------

    @classmethod
    def build(
        cls,
        vertices: Iterable[str],
        directed: Iterable[tuple[str, str]] = (),
        bidirected: Iterable[Iterable[str]] = (),
        fixed: Iterable[str] = (),
    ) -> "MixedGraph":
        return cls(
            frozenset(vertices),
            frozenset((a, b) for a, b in directed),
            frozenset(frozenset(e) for e in bidirected),
            frozenset(fixed),
        )

    # equality and hashing on the structure only ---------------------------

    def key(self) -> tuple:
        """Canonical hashable description of the graph."""
        return (
            tuple(sorted(self.vertices)),
            tuple(sorted(self.directed)),
            tuple(sorted(tuple(sorted(e)) for e in self.bidirected)),
            tuple(sorted(self.fixed)),
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MixedGraph) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    # basic queries ---------------------------------------------------------

    @property
    def random(self) -> frozenset[str]:
        return self.vertices - self.fixed

    def parents(self, v: str) -> frozenset[str]:
        return self._pa[v]

    def children(self, v: str) -> frozenset[str]:
        return self._ch[v]

    def siblings(self, v: str) -> frozenset[str]:
        return self._sib[v]

    def parents_of(self, vs: Iterable[str]) -> frozenset[str]:
        out: set[str] = set()
        for v in vs:
            out |= self._pa[v]
        return frozenset(out)

    def has_directed(self, a: str, b: str) -> bool:
        return (a, b) in self.directed

    def has_bidirected(self, a: str, b: str) -> bool:
        return b in self._sib.get(a, ())

    def adjacent(self, a: str, b: str) -> bool:
        return b in self._pa[a] or b in self._ch[a] or b in self._sib[a]

    @property
    def is_dag(self) -> bool:
        return not self.bidirected

    def ancestors(self, vs: Iterable[str]) -> frozenset[str]:
        """Ancestors of ``vs``, the set itself included."""
        seen = set(vs)
        stack = list(seen)
        while stack:
            v = stack.pop()
            for p in self._pa[v]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return frozenset(seen)

    def descendants(self, vs: Iterable[str]) -> frozenset[str]:
        """Descendants of ``vs``, the set itself included."""
        seen = set(vs)
        stack = list(seen)
        while stack:
            v = stack.pop()
            for c in self._ch[v]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return frozenset(seen)

    def district(self, v: str, within: Iterable[str] | None = None) -> frozenset[str]:
        """Bidirected-connected component of ``v`` among ``within`` (random vertices by default)."""
        allowed = self.random if within is None else frozenset(within)
        if v not in allowed:
            return frozenset()
        seen = {v}
        stack = [v]
        while stack:
            u = stack.pop()
            for s in self._sib[u]:
                if s in allowed and s not in seen:
                    seen.add(s)
                    stack.append(s)
        return frozenset(seen)

    def districts(self, within: Iterable[str] | None = None) -> list[frozenset[str]]:
        allowed = self.random if within is None else frozenset(within)
        out: list[frozenset[str]] = []
        seen: set[str] = set()
        for v in sorted(allowed):
            if v not in seen:
                d = self.district(v, allowed)
                seen |= d
                out.append(d)
        return out

    def topological_order(self) -> list[str]:
        """Deterministic topological order; raises on a directed cycle."""
        indeg = {v: len(self._pa[v]) for v in self.vertices}
        ready = sorted(v for v, d in indeg.items() if d == 0)
        order: list[str] = []

        heapq.heapify(ready)
        while ready:
            v = heapq.heappop(ready)
            order.append(v)
            for c in self._ch[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(order) != len(self.vertices):
            cyc = sorted(v for v, d in indeg.items() if d > 0)
            raise CyclicDirectedPart([Violation("CyclicDirectedPart", f"directed cycle among {cyc}", tuple(cyc))])
        return order

    def is_acyclic(self) -> bool:
        try:
            self.topological_order()
        except CyclicDirectedPart:
            return False
        return True

    # derived graphs --------------------------------------------------------

    def induced(self, keep: Iterable[str]) -> "MixedGraph":
        keep = frozenset(keep) & self.vertices
        return MixedGraph(
            keep,
            frozenset(e for e in self.directed if e[0] in keep and e[1] in keep),
            frozenset(e for e in self.bidirected if e <= keep),
            self.fixed & keep,
        )

    def without(self, drop: Iterable[str]) -> "MixedGraph":
        return self.induced(self.vertices - frozenset(drop))

    def latent_project(self, drop: Iterable[str]) -> "MixedGraph":
        """Latent projection onto the vertices not in ``drop``.

        ``a -> b`` survives when a directed path from ``a`` to ``b`` has every
        intermediate vertex in ``drop``; ``a <-> b`` appears when a path with
        arrowheads at both ends has all its interior vertices in ``drop`` and
        none of them is a collider.
        """
        drop = frozenset(drop) & self.vertices
        if not drop:
            return self
        keep = self.vertices - drop

        reach_cache: dict[str, frozenset[str]] = {}

        def reach(x: str) -> frozenset[str]:
            # retained vertices reachable from x by directed paths whose
            # intermediate vertices are all dropped
            if x in reach_cache:
                return reach_cache[x]
            found: set[str] = set()
            seen = {x}
            stack = [x]
            while stack:
                u = stack.pop()
                for c in self._ch[u]:
                    if c in keep:
                        found.add(c)
                    elif c not in seen:
                        seen.add(c)
                        stack.append(c)
            reach_cache[x] = frozenset(found)
            return reach_cache[x]

        directed: set[tuple[str, str]] = set()
        for a in keep:
            for b in reach(a):
                directed.add((a, b))
        bidirected: set[frozenset[str]] = set()

        def ends(x: str) -> frozenset[str]:
            return frozenset((x,)) if x in keep else reach(x)

        for m in drop:
            r = sorted(reach(m))
            for i, a in enumerate(r):
                for b in r[i + 1 :]:
                    bidirected.add(_edge2(a, b))
        for e in self.bidirected:
            x, y = sorted(e)
            for a in ends(x):
                for b in ends(y):
                    if a != b:
                        bidirected.add(_edge2(a, b))
        return MixedGraph(keep, frozenset(directed), frozenset(bidirected), self.fixed & keep)

    # serialisation ---------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "vertices": sorted(self.vertices),
            "fixed": sorted(self.fixed),
            "adjacency": {
                "directed": {v: sorted(self._ch[v]) for v in sorted(self.vertices) if self._ch[v]},
                "bidirected": {v: sorted(self._sib[v]) for v in sorted(self.vertices) if self._sib[v]},
            },
        }


# ---------------------------------------------------------------------------
# missing-data graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffectorMap:
    """Affector sets derived from counterfactual patterns.

    ``units`` maps each unit to the units whose indicators index its
    counterfactuals; ``variables`` refines this to the indicator ids indexing
    the counterfactuals of each missing variable.
    """

    units: Mapping[str, frozenset[str]]
    variables: Mapping[str, frozenset[str]]

    def of_unit(self, unit: str) -> frozenset[str]:
        return self.units.get(unit, frozenset())

    def indicators_of(self, name: str) -> frozenset[str]:
        return self.variables.get(name, frozenset())


@dataclass(frozen=True, eq=False)
class MissingDataGraph:
    """Mixed graph plus missing-data roles, deterministic proxy edges and mode."""

    roles: Mapping[str, VertexRole]
    graph: MixedGraph
    deterministic: frozenset[tuple[str, str]]
    mode: Mode

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, MissingDataGraph)
            and self.graph == other.graph
            and dict(self.roles) == dict(other.roles)
            and self.deterministic == other.deterministic
            and self.mode == other.mode
        )

    def __hash__(self) -> int:
        return hash((self.graph, self.mode))

    # role selectors ------------------------------------------------------

    @property
    def vertices(self) -> frozenset[str]:
        return self.graph.vertices

    @property
    def directed_edges(self) -> frozenset[tuple[str, str]]:
        return self.graph.directed

    @property
    def bidirected_edges(self) -> frozenset[frozenset[str]]:
        return self.graph.bidirected

    def role(self, v: str) -> VertexRole:
        return self.roles[v]

    def of_kind(self, kind: str) -> list[str]:
        return sorted(v for v, r in self.roles.items() if r.kind == kind)

    def covariates(self) -> list[str]:
        return self.of_kind("covariate")

    def counterfactuals(self) -> list[str]:
        return self.of_kind("counterfactual")

    def indicators(self) -> list[str]:
        return self.of_kind("indicator")

    def proxies(self) -> list[str]:
        return self.of_kind("proxy")

    def hidden(self) -> list[str]:
        return self.of_kind("hidden")

    def missing_names(self) -> list[str]:
        return sorted(self.roles[p].name for p in self.proxies())

    def units(self) -> list[str]:
        us = {getattr(r, "unit", None) for r in self.roles.values()}
        return sorted((u for u in us if u is not None), key=_natural)

    def indicator_of(self, name: str) -> str:
        return indicator_id(name)

    def counterfactuals_of(self, name: str) -> list[str]:
        return sorted(v for v in self.counterfactuals() if self.roles[v].name == name)

    def full_observability_counterfactuals(self) -> list[str]:
        """One all-ones counterfactual per missing variable."""
        return [v for v in self.counterfactuals() if self.roles[v].all_ones]

    def owner_indicator(self, v: str) -> str:
        """Indicator of the variable a counterfactual or proxy belongs to."""
        return indicator_id(self.roles[v].name)

    def has_interference(self) -> bool:
        return any(self.roles[v].pattern for v in self.counterfactuals())

    # derived graphs ------------------------------------------------------

    def proxy_free(self) -> MixedGraph:
        """The mixed graph with proxies and their deterministic edges removed."""
        return self.graph.without(self.proxies())

    def analysis_graph(self) -> MixedGraph:
        """Proxy-free graph with hidden vertices projected out."""
        g = self.proxy_free()
        hidden = self.hidden()
        return g.latent_project(hidden) if hidden else g

    def affectors(self) -> AffectorMap:
        return derive_affectors(self)

    def with_edges(
        self,
        add_directed: Iterable[tuple[str, str]] = (),
        add_bidirected: Iterable[Iterable[str]] = (),
        remove_directed: Iterable[tuple[str, str]] = (),
        validate: bool = True,
    ) -> "MissingDataGraph":
        directed = (set(self.graph.directed) - set(self.deterministic) - set(remove_directed)) | set(add_directed)
        bidirected = set(self.graph.bidirected) | {frozenset(e) for e in add_bidirected}
        if validate:
            return validate_graph(self.roles, directed, bidirected, self.mode)
        g = MixedGraph(self.graph.vertices, frozenset(directed | self.deterministic), frozenset(bidirected), self.graph.fixed)
        return MissingDataGraph(self.roles, g, self.deterministic, self.mode)

    def to_json(self) -> dict:
        verts = []
        for v in sorted(self.vertices):
            r = self.roles[v]
            entry: dict = {"id": v, "role": r.kind}
            if hasattr(r, "unit") and getattr(r, "unit") is not None:
                entry["unit"] = r.unit
            if hasattr(r, "name"):
                entry["name"] = r.name
            if isinstance(r, Counterfactual):
                entry["pattern"] = {k: int(x) for k, x in r.pattern}
            verts.append(entry)
        body = self.graph.to_json()
        return {
            "mode": self.mode.value,
            "vertices": verts,
            "adjacency": body["adjacency"],
            "deterministic": [list(e) for e in sorted(self.deterministic)],
        }


def _natural(text: str) -> tuple:
    return tuple(int(t) if t.isdigit() else t for t in re.split(r"(\d+)", text))


def derive_affectors(g: MissingDataGraph) -> AffectorMap:
    """Affector sets read off counterfactual patterns; a unit never affects itself."""
    unit_of_indicator = {v: g.roles[v].unit for v in g.indicators()}
    units: dict[str, set[str]] = {u: set() for u in g.units()}
    variables: dict[str, set[str]] = {n: set() for n in g.missing_names()}
    for v in g.counterfactuals():
        r = g.roles[v]
        variables.setdefault(r.name, set())
        for ind, _ in r.pattern:
            variables[r.name].add(ind)
            owner = unit_of_indicator.get(ind)
            if owner is not None and owner != r.unit:
                units.setdefault(r.unit, set()).add(owner)
    return AffectorMap(
        MappingProxyType({k: frozenset(v) for k, v in units.items()}),
        MappingProxyType({k: frozenset(v) for k, v in variables.items()}),
    )


def districts(g: MissingDataGraph | MixedGraph) -> list[frozenset[str]]:
    """Districts over random vertices; proxies are left out for role-aware graphs."""
    if isinstance(g, MissingDataGraph):
        keep = g.graph.random - frozenset(g.proxies())
        return g.graph.districts(keep)
    return g.districts()


def latent_project(g: MissingDataGraph, drop: Iterable[str], force: bool = False) -> MissingDataGraph:
    """Project out hidden and counterfactual vertices.

    Dropping a counterfactual that points into an indicator changes what the
    indicator's Markov blanket means, so it needs ``force=True``.
    """
    drop = frozenset(drop)
    unknown = drop - g.vertices
    if unknown:
        raise DropRetainedRole(f"cannot drop unknown vertices {sorted(unknown)}")
    for v in sorted(drop):
        kind = g.roles[v].kind
        if kind not in ("hidden", "counterfactual"):
            raise DropRetainedRole(f"{v} has role {kind} and must be retained")
        if kind == "counterfactual" and not force:
            bad = sorted(c for c in g.graph.children(v) if g.roles[c].kind == "indicator")
            if bad:
                raise DropRetainedRole(f"{v} points into indicators {bad}; pass force=True to project it anyway")
    if not drop:
        return g
    projected = g.graph.latent_project(drop)
    roles = MappingProxyType({v: r for v, r in g.roles.items() if v not in drop})
    det = frozenset(e for e in g.deterministic if e in projected.directed)
    return MissingDataGraph(roles, projected, det, g.mode)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _proxy_parents(roles: Mapping[str, VertexRole], proxy: str) -> set[str]:
    name = roles[proxy].name
    parents = {indicator_id(name)}
    for v, r in roles.items():
        if isinstance(r, Counterfactual) and r.name == name:
            parents.add(v)
            parents.update(k for k, _ in r.pattern)
    return parents


def validate_graph(
    roles: Mapping[str, VertexRole],
    directed: Iterable[tuple[str, str]],
    bidirected: Iterable[Iterable[str]],
    mode: Mode | str | None = None,
) -> MissingDataGraph:
    """Check every restriction of ``mode`` and return the assembled graph.

    Deterministic proxy edges are added here and must not be supplied by the
    caller.  All violations are collected before raising, so the error lists
    each offending vertex or edge.
    """
    roles = dict(roles)
    directed = {(a, b) for a, b in directed}
    bidirected = {frozenset(e) for e in bidirected}
    has_pattern = any(isinstance(r, Counterfactual) and r.pattern for r in roles.values())
    if mode is None:
        mode = Mode.INTERFERENCE if has_pattern else Mode.CLASSIC
    mode = Mode(mode)
    violations: list[Violation] = []

    for a, b in sorted(directed):
        for x in (a, b):
            if x not in roles:
                violations.append(Violation("UnknownVertex", f"edge {a} -> {b} uses unknown vertex {x}", (a, b)))
    for e in sorted(tuple(sorted(e)) for e in bidirected):
        if len(e) != 2:
            violations.append(Violation("UnknownVertex", f"bidirected self loop on {e[0]}", e))
            continue
        for x in e:
            if x not in roles:
                violations.append(Violation("UnknownVertex", f"edge {e[0]} <-> {e[1]} uses unknown vertex {x}", e))
    _raise_for(violations)

    names_with_proxy = {r.name for r in roles.values() if isinstance(r, Proxy)}
    indicator_names = {}
    for v, r in roles.items():
        if isinstance(r, Indicator):
            indicator_names[v] = r
    for v, r in sorted(roles.items()):
        if isinstance(r, Proxy):
            ind = indicator_id(r.name)
            if ind not in roles or not isinstance(roles[ind], Indicator) or roles[ind].name != r.name:
                violations.append(Violation("MalformedProxyParents", f"proxy {v} has no matching indicator {ind}", (v,)))
            if not any(isinstance(x, Counterfactual) and x.name == r.name for x in roles.values()):
                violations.append(Violation("MalformedProxyParents", f"proxy {v} has no counterfactual", (v,)))
        if isinstance(r, Counterfactual):
            if r.name not in names_with_proxy:
                violations.append(Violation("MalformedProxyParents", f"counterfactual {v} has no proxy {r.name}", (v,)))
            for ind, val in r.pattern:
                if val not in (0, 1):
                    violations.append(Violation("PatternReferencesUnknownIndicator", f"{v} assigns {val} to {ind}", (v, ind)))
                if ind not in indicator_names:
                    violations.append(
                        Violation("PatternReferencesUnknownIndicator", f"{v} is indexed by unknown indicator {ind}", (v, ind))
                    )
                    continue
                owner = indicator_names[ind]
                if owner.name == r.name:
                    violations.append(
                        Violation("PatternReferencesUnknownIndicator", f"{v} is indexed by its own indicator {ind}", (v, ind))
                    )
                elif owner.unit == r.unit and mode is not Mode.RELAXED_IID:
                    violations.append(
                        Violation(
                            "ModeMismatch",
                            f"{v} is indexed by same-unit indicator {ind}; only relaxed_iid mode allows this",
                            (v, ind),
                        )
                    )
            if r.pattern and mode is Mode.CLASSIC:
                violations.append(Violation("ModeMismatch", f"classic mode forbids indexed counterfactual {v}", (v,)))

    for a, b in sorted(directed):
        ra, rb = roles[a], roles[b]
        if isinstance(rb, Proxy):
            violations.append(
                Violation("MalformedProxyParents", f"edge {a} -> {b} into a proxy; proxy edges are implied", (a, b))
            )
        if isinstance(rb, Context):
            violations.append(Violation("MalformedProxyParents", f"context vertex {b} has an incoming edge", (a, b)))
        if isinstance(ra, Indicator) and isinstance(rb, (AlwaysObserved, Counterfactual)):
            allowed = False
            if mode is Mode.RELAXED_IID and isinstance(rb, Counterfactual):
                # the projection of a multi-indexed family may point from the
                # indexing indicator into the classic counterfactual
                allowed = any(
                    isinstance(x, Counterfactual) and x.name == rb.name and a in dict(x.pattern)
                    for x in roles.values()
                )
            if not allowed:
                violations.append(Violation("IllegalIndicatorEdge", f"indicator {a} points into {rb.kind} {b}", (a, b)))
    for e in sorted(tuple(sorted(e)) for e in bidirected):
        for x in e:
            if isinstance(roles[x], Proxy):
                violations.append(Violation("MalformedProxyParents", f"bidirected edge {e[0]} <-> {e[1]} touches a proxy", e))
            if isinstance(roles[x], Context):
                violations.append(Violation("MalformedProxyParents", f"bidirected edge touches context vertex {x}", e))

    deterministic: set[tuple[str, str]] = set()
    for v, r in roles.items():
        if isinstance(r, Proxy):
            for p in _proxy_parents(roles, v):
                if p in roles:
                    deterministic.add((p, v))
    all_directed = directed | deterministic
    _raise_for(violations)
    graph = MixedGraph(
        frozenset(roles),
        frozenset(all_directed),
        frozenset(bidirected),
        frozenset(v for v, r in roles.items() if isinstance(r, Context)),
    )
    try:
        graph.topological_order()
    except CyclicDirectedPart as exc:
        raise CyclicDirectedPart(exc.violations) from None
    return MissingDataGraph(MappingProxyType(roles), graph, frozenset(deterministic), mode)


def build_and_validate(spec, mode: Mode | str | None = None) -> MissingDataGraph:
    """Turn a parsed spec into a validated :class:`MissingDataGraph`.

    ``mode`` defaults to interference when any counterfactual is indexed by
    affector indicators and classic otherwise.
    """
    roles: dict[str, VertexRole] = {}
    for unit in spec.units:
        for decl in unit.decls:
            for vid, role in roles_for_decl(unit.unit_id, decl.kind, decl.name, decl.affectors):
                roles[vid] = role
    directed = [(e.source, e.target) for e in spec.edges if e.kind == "->"]
    bidirected = [(e.source, e.target) for e in spec.edges if e.kind == "<->"]
    return validate_graph(roles, directed, bidirected, mode)


def roles_for_decl(unit: str, kind: str, name: str, affectors: Iterable[str] = ()) -> list[tuple[str, VertexRole]]:
    """Vertices created by one unit-block declaration.

    ``missing Z1 [r2]`` yields the proxy, the indicator and one counterfactual
    per assignment of the affector indicators.
    """
    if kind == "covariate":
        return [("O." + name, AlwaysObserved(unit, name))]
    if kind == "hidden":
        return [("H." + name, Hidden(name, unit))]
    if kind == "context":
        return [("W." + name, Context(name))]
    if kind != "missing":
        raise ValueError(f"unknown declaration kind {kind!r}")
    keys = sorted(key_indicator(k) if not k.startswith("R_") else k for k in affectors)
    out: list[tuple[str, VertexRole]] = [
        (name, Proxy(unit, name)),
        (indicator_id(name), Indicator(unit, name)),
    ]
    for bits in range(2 ** len(keys)):
        pattern = tuple((k, (bits >> i) & 1) for i, k in enumerate(keys))
        pattern = tuple(sorted(pattern))
        out.append((counterfactual_id(name, pattern), Counterfactual(unit, name, pattern)))
    return out
