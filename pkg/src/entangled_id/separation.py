"""m-separation, Markov blankets and collider-path enumeration.

All functions accept either a plain :class:`MixedGraph` or a
:class:`MissingDataGraph`; for the latter the proxies and their deterministic
edges are removed first, since proxies never take part in separation or
identification path searches.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Union

from .errors import EntangledIdError
from .graph_model import MissingDataGraph, MixedGraph

__all__ = [
    "BlanketDivergenceWarning",
    "ColliderPath",
    "DegenerateExplosion",
    "InvalidSeparationQuery",
    "VertexNotInGraph",
    "collider_paths_between",
    "markov_blanket",
    "m_separated",
]

GraphLike = Union[MixedGraph, MissingDataGraph]

DEFAULT_PATH_CAP = 10_000


class VertexNotInGraph(EntangledIdError):
    """A query named a vertex the (proxy-free) graph does not contain."""


class InvalidSeparationQuery(EntangledIdError):
    """The sets of a separation query are empty or overlap."""


class DegenerateExplosion(EntangledIdError):
    """Collider-path enumeration exceeded its path cap."""


class BlanketDivergenceWarning(UserWarning):
    """The two Markov-blanket definitions disagreed on some vertex."""


@dataclass(frozen=True)
class ColliderPath:
    """A path whose interior vertices are all colliders.

    ``marks[i]`` is the edge between ``vertices[i]`` and ``vertices[i + 1]``
    written from left to right: ``"->"``, ``"<-"`` or ``"<->"``.
    """

    vertices: tuple[str, ...]
    marks: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.marks)

    @property
    def is_direct(self) -> bool:
        return len(self.marks) == 1

    def __str__(self) -> str:
        parts = [self.vertices[0]]
        for mark, v in zip(self.marks, self.vertices[1:]):
            parts.extend((mark, v))
        return " ".join(parts)


def _plain(g: GraphLike) -> tuple[MixedGraph, frozenset[str]]:
    if isinstance(g, MissingDataGraph):
        return g.proxy_free(), frozenset(g.proxies())
    return g, frozenset()


def _check_vertices(g: MixedGraph, proxies: frozenset[str], vs: Iterable[str]) -> None:
    for v in vs:
        if v in proxies:
            raise VertexNotInGraph(f"{v} is a proxy; separation queries exclude proxies")
        if v not in g.vertices:
            raise VertexNotInGraph(f"unknown vertex {v!r}")


def m_separated(g: GraphLike, xs: Iterable[str], ys: Iterable[str], zs: Iterable[str] = ()) -> bool:
    """Return True iff ``xs`` and ``ys`` are m-separated given ``zs``.

    Uses a reachability search over (vertex, entered-with-arrowhead) states:
    a collider passes iff it is an ancestor of ``zs``, a non-collider passes
    iff it is not in ``zs``.
    """
    plain, proxies = _plain(g)
    xs, ys, zs = frozenset(xs), frozenset(ys), frozenset(zs)
    _check_vertices(plain, proxies, xs | ys | zs)
    if not xs or not ys:
        raise InvalidSeparationQuery("both sides of a separation query must be nonempty")
    if xs & ys or xs & zs or ys & zs:
        raise InvalidSeparationQuery("separation query sets must be pairwise disjoint")
    anc_z = plain.ancestors(zs)

    # state: (vertex, head) where head says the edge used to arrive had an
    # arrowhead at the vertex
    seen: set[tuple[str, bool]] = set()
    queue: deque[tuple[str, bool]] = deque()
    for x in xs:
        # leaving a start vertex is unconstrained; model it as a non-collider
        for c in plain.children(x):
            queue.append((c, True))
        for s in plain.siblings(x):
            queue.append((s, True))
        for p in plain.parents(x):
            queue.append((p, False))
    while queue:
        state = queue.popleft()
        if state in seen:
            continue
        seen.add(state)
        v, head = state
        if v in ys:
            return False
        if v in xs:
            continue
        # leaving through an edge with a tail at v: v is a non-collider
        if v not in zs:
            for c in plain.children(v):
                queue.append((c, True))
        # leaving through an edge with an arrowhead at v
        collider_ok = v in anc_z
        noncollider_ok = v not in zs
        through_head = collider_ok if head else noncollider_ok
        if through_head:
            for s in plain.siblings(v):
                queue.append((s, True))
            for p in plain.parents(v):
                queue.append((p, False))
    return True


def _blanket_collider(g: MixedGraph, v: str) -> frozenset[str]:
    out = set(g.parents(v)) | set(g.children(v)) | set(g.siblings(v))
    # colliders reachable from v: first edge has its arrowhead away from v
    frontier = deque(set(g.children(v)) | set(g.siblings(v)))
    visited = set(frontier)
    while frontier:
        c = frontier.popleft()
        for p in g.parents(c):
            out.add(p)
        for s in g.siblings(c):
            out.add(s)
            if s not in visited and s != v:
                visited.add(s)
                frontier.append(s)
    out.discard(v)
    return frozenset(out)


def _blanket_formula(g: MixedGraph, v: str) -> frozenset[str]:
    dis_v = g.district(v) if v in g.random else frozenset((v,))
    ch_v = g.children(v)
    dis_ch: set[str] = set()
    for c in ch_v:
        dis_ch |= g.district(c) if c in g.random else {c}
    out = (
        set(g.parents(v))
        | dis_v
        | g.parents_of(dis_v)
        | ch_v
        | g.parents_of(ch_v)
        | dis_ch
        | g.parents_of(dis_ch)
    )
    out.discard(v)
    return frozenset(out)


def markov_blanket(g: GraphLike, v: str, definition: str = "collider_path", check: bool = True) -> frozenset[str]:
    """Markov blanket of ``v``.

    ``definition="collider_path"`` collects vertices adjacent to ``v`` or
    joined to it by a collider path; ``"district_formula"`` evaluates the set
    expression built from parents, children and districts.  With ``check``
    the other definition is also computed and a
    :class:`BlanketDivergenceWarning` is issued if they differ.
    """
    plain, proxies = _plain(g)
    _check_vertices(plain, proxies, [v])
    if definition == "collider_path":
        mb, other = _blanket_collider, _blanket_formula
    elif definition == "district_formula":
        mb, other = _blanket_formula, _blanket_collider
    else:
        raise ValueError(f"unknown blanket definition {definition!r}")
    result = mb(plain, v)
    if check:
        alt = other(plain, v)
        if alt != result:
            warnings.warn(
                f"Markov blanket definitions disagree at {v}: {sorted(result)} vs {sorted(alt)}",
                BlanketDivergenceWarning,
                stacklevel=2,
            )
    return result


def collider_paths_between(
    g: GraphLike,
    a: str,
    b: str,
    forbidden: Iterable[str] = (),
    cap: int = DEFAULT_PATH_CAP,
) -> list[ColliderPath]:
    """All simple paths from ``a`` to ``b`` whose interior vertices are colliders.

    A direct edge counts as a path of length one.  Interior vertices must
    avoid ``forbidden``.  Results are sorted by length and then by vertex
    sequence.  More than ``cap`` paths raises :class:`DegenerateExplosion`.
    """
    plain, proxies = _plain(g)
    if a == b:
        raise InvalidSeparationQuery("collider paths need two distinct endpoints")
    _check_vertices(plain, proxies, [a, b])
    banned = frozenset(forbidden) | proxies
    found: list[ColliderPath] = []

    def emit(vertices: list[str], marks: list[str]) -> None:
        found.append(ColliderPath(tuple(vertices), tuple(marks)))
        if len(found) > cap:
            raise DegenerateExplosion(f"more than {cap} collider paths between {a} and {b}")

    def extend(vertices: list[str], marks: list[str], on_path: set[str]) -> None:
        # the last vertex was entered with an arrowhead; it is a collider if
        # we leave through another arrowhead at it
        u = vertices[-1]
        for x, mark in [(p, "<-") for p in plain.parents(u)] + [(s, "<->") for s in plain.siblings(u)]:
            if x in on_path:
                continue
            if x == b:
                emit(vertices + [x], marks + [mark])
                continue
            if mark == "<->" and x not in banned:
                on_path.add(x)
                extend(vertices + [x], marks + [mark], on_path)
                on_path.discard(x)

    steps = (
        [(c, "->") for c in sorted(plain.children(a))]
        + [(s, "<->") for s in sorted(plain.siblings(a))]
        + [(p, "<-") for p in sorted(plain.parents(a))]
    )
    for x, mark in steps:
        if x == b:
            emit([a, b], [mark])
            continue
        if mark == "<-" or x in banned:
            continue
        extend([a, x], [mark], {a, x})
    found.sort(key=lambda p: (len(p.marks), p.vertices, p.marks))
    return found
