"""Identification verdicts for missing-data graphs with and without interference.

Every check works on the analysis graph: proxies and their deterministic
edges removed, hidden vertices projected out.  Negative verdicts carry the
offending structures as :class:`Witness` records so a reader can check them
against the graph by hand.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import EntangledIdError, InputError
from .graph_model import (
    Counterfactual,
    MissingDataGraph,
    MixedGraph,
    counterfactual_id,
    indicator_id,
    parse_counterfactual_id,
)
from .separation import ColliderPath, collider_paths_between, m_separated

__all__ = [
    "Assumption1Violated",
    "check_assumption_1",
    "check_full_law_id",
    "check_full_observability_id",
    "check_id",
    "check_single_world_query",
    "classify_mechanism",
    "Decision",
    "detect_e_structures",
    "EStructures",
    "full_observability_graph",
    "IdVerdict",
    "InterferencePatternPresent",
    "Mechanism",
    "resolve_theorem",
    "SingleWorldQuery",
    "THEOREM_ALIASES",
    "UnknownCounterfactual",
    "Witness",
]


class InterferencePatternPresent(EntangledIdError):
    """A full-law check was asked about a graph with pattern-indexed counterfactuals."""


class Assumption1Violated(EntangledIdError):
    """Some counterfactual with a zero in its pattern points into an indicator."""

    def __init__(self, witnesses: list["Witness"]):
        self.witnesses = witnesses
        edges = ", ".join(f"{w.vertices[0]} -> {w.vertices[1]}" for w in witnesses)
        super().__init__(f"counterfactuals outside the all-ones world point into indicators: {edges}")


class UnknownCounterfactual(InputError):
    """A query named a counterfactual the graph does not contain."""


class EStructureWarning(UserWarning):
    """A collider structure fell outside the literal e-colluder definition."""


class Decision(str, enum.Enum):
    IDENTIFIED = "Identified"
    NOT_IDENTIFIED = "NotIdentified"
    CONDITIONS_NOT_MET = "ConditionsNotMet"


class Mechanism(str, enum.Enum):
    MCAR = "MCAR"
    MAR = "MAR"
    MNAR = "MNAR"


THEOREM_ALIASES = {
    "1": "full-law-dag",
    "2": "full-law-admg",
    "3": "single-world",
    "4": "full-observability",
}


@dataclass(frozen=True)
class Witness:
    """One offending structure.

    ``kind`` is one of ``self_censoring``, ``colluder``, ``colluding_path``,
    ``affector_censoring``, ``e_colluder``, ``e_colluding_path``,
    ``assumption_1``, ``inconsistent_pattern`` or ``mnar``.
    """

    kind: str
    vertices: tuple[str, ...]
    marks: tuple[str, ...] = ()
    note: str = ""

    @classmethod
    def from_path(cls, kind: str, path: ColliderPath, note: str = "") -> "Witness":
        return cls(kind, path.vertices, path.marks, note)

    def __str__(self) -> str:
        if self.marks:
            parts = [self.vertices[0]]
            for m, v in zip(self.marks, self.vertices[1:]):
                parts.extend((m, v))
            return f"{self.kind}: {' '.join(parts)}"
        return f"{self.kind}: {', '.join(self.vertices)}" + (f" ({self.note})" if self.note else "")


@dataclass(frozen=True)
class IdVerdict:
    decision: Decision
    theorem: str
    witnesses: tuple[Witness, ...] = ()
    functional_id: str | None = None
    mechanism: Mechanism | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.decision is Decision.NOT_IDENTIFIED and not self.witnesses:
            raise ValueError("a negative verdict needs at least one witness")
        if self.decision is Decision.IDENTIFIED and self.witnesses:
            raise ValueError("a positive verdict carries no witnesses")

    @property
    def identified(self) -> bool:
        return self.decision is Decision.IDENTIFIED

    def to_json(self) -> dict:
        out: dict = {
            "decision": self.decision.value,
            "theorem": self.theorem,
            "witnesses": [list(w.vertices) for w in self.witnesses],
            "witness_kinds": [w.kind for w in self.witnesses],
        }
        if self.functional_id is not None:
            out["functional_id"] = self.functional_id
        if self.mechanism is not None:
            out["mechanism"] = self.mechanism.value
        if self.warnings:
            out["warnings"] = list(self.warnings)
        return out


def _sorted_witnesses(ws: Iterable[Witness]) -> tuple[Witness, ...]:
    return tuple(sorted(set(ws), key=lambda w: (w.vertices, w.marks, w.kind)))


# ---------------------------------------------------------------------------
# mechanism classes
# ---------------------------------------------------------------------------


def _separated_or_empty(g: MixedGraph, xs, ys, zs) -> bool:
    xs, ys = set(xs), set(ys) - set(zs)
    if not xs or not ys:
        return True
    return m_separated(g, xs, ys, zs)


def classify_mechanism(g: MissingDataGraph, indicators: Iterable[str] | None = None) -> Mechanism:
    """MCAR, MAR or MNAR for a subset of indicators (all of them by default)."""
    subset = sorted(g.indicators() if indicators is None else indicators)
    unknown = [r for r in subset if g.roles.get(r) is None or g.roles[r].kind != "indicator"]
    if unknown:
        raise InputError(f"not indicators: {unknown}")
    ag = g.analysis_graph()
    ctfs = g.counterfactuals()
    covs = g.covariates()
    if _separated_or_empty(ag, subset, covs + ctfs, ()):
        return Mechanism.MCAR
    if _separated_or_empty(ag, subset, ctfs, covs):
        return Mechanism.MAR
    return Mechanism.MNAR


# ---------------------------------------------------------------------------
# classic full law
# ---------------------------------------------------------------------------


def _attach(verdict: IdVerdict, emit) -> IdVerdict:
    if not verdict.identified:
        return verdict
    # imported here because the emitter module imports this one
    from .functional_emitter import STORE

    fid = STORE.register(emit())
    return IdVerdict(verdict.decision, verdict.theorem, (), fid, verdict.mechanism, verdict.warnings)


def check_full_law_id(g: MissingDataGraph, attach_functional: bool = True) -> IdVerdict:
    """Full-law identification for graphs without missingness interference.

    The full law is identified iff no counterfactual ``Z[1]`` lies in the
    Markov blanket of its own indicator, i.e. there is no direct edge and no
    collider path between them.  In a DAG the collider paths are exactly the
    self-censoring edges and the colluders ``Z[1] -> R' <- R_Z``.
    """
    if g.has_interference():
        raise InterferencePatternPresent(
            "counterfactuals carry affector patterns; use check_full_observability_id"
        )
    ag = g.analysis_graph()
    is_dag = not ag.bidirected
    witnesses: list[Witness] = []
    for name in g.missing_names():
        ctf = g.counterfactuals_of(name)[0]
        for path in collider_paths_between(ag, ctf, indicator_id(name)):
            if path.is_direct:
                kind = "self_censoring"
            else:
                kind = "colluder" if is_dag else "colluding_path"
            witnesses.append(Witness.from_path(kind, path))
    theorem = "full-law-dag" if is_dag else "full-law-admg"
    if witnesses:
        return IdVerdict(Decision.NOT_IDENTIFIED, theorem, _sorted_witnesses(witnesses))
    verdict = IdVerdict(Decision.IDENTIFIED, theorem)
    if not attach_functional:
        return verdict
    from .functional_emitter import emit_full_law_functional

    return _attach(verdict, lambda: emit_full_law_functional(g))


# ---------------------------------------------------------------------------
# entangled structures
# ---------------------------------------------------------------------------


def check_assumption_1(g: MissingDataGraph) -> tuple[bool, list[Witness]]:
    """True iff no counterfactual with a zero in its pattern has an indicator child."""
    out: list[Witness] = []
    for v in g.counterfactuals():
        role = g.roles[v]
        if role.all_ones:
            continue
        for c in sorted(g.graph.children(v)):
            if g.roles[c].kind == "indicator":
                out.append(Witness("assumption_1", (v, c), ("->",)))
    return (not out), out


def full_observability_graph(g: MissingDataGraph) -> MixedGraph:
    """Analysis graph restricted to covariates, indicators and all-ones counterfactuals."""
    drop = [v for v in g.counterfactuals() if not g.roles[v].all_ones]
    ag = g.analysis_graph()
    return ag.latent_project(drop) if drop else ag


@dataclass(frozen=True)
class EStructures:
    """Entangled collider structures, each list sorted by vertex ids."""

    affector_censoring: tuple[Witness, ...] = ()
    e_colluders: tuple[Witness, ...] = ()
    e_colluding_paths: tuple[Witness, ...] = ()
    graph_is_dag: bool = True
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def empty(self) -> bool:
        return not (self.affector_censoring or self.e_colluders or self.e_colluding_paths)

    def to_json(self) -> dict:
        return {
            "affector_censoring": [list(w.vertices) for w in self.affector_censoring],
            "e_colluders": [list(w.vertices) for w in self.e_colluders],
            "e_colluding_paths": [list(w.vertices) for w in self.e_colluding_paths],
        }


def _checked_indicators(g: MissingDataGraph, ctf: str) -> list[str]:
    """Indicators whose blanket must avoid the all-ones counterfactual ``ctf``.

    These are the indicators indexing the variable's counterfactuals plus the
    variable's own indicator, so the classic self-censoring and colluder
    conditions are kept inside each unit.
    """
    role = g.roles[ctf]
    aff = g.affectors().indicators_of(role.name)
    return sorted(set(aff) | {indicator_id(role.name)})


def detect_e_structures(g: MissingDataGraph) -> EStructures:
    """Affector-censoring edges, e-colluders and e-colluding paths.

    Computed on :func:`full_observability_graph`.  Raises
    :class:`Assumption1Violated` when the all-ones projection is not
    meaningful.
    """
    ok, bad = check_assumption_1(g)
    if not ok:
        raise Assumption1Violated(bad)
    fg = full_observability_graph(g)
    aff = g.affectors()
    indicator_unit_name = {r: g.roles[r].name for r in g.indicators()}
    censoring: list[Witness] = []
    colluders: list[Witness] = []
    paths: list[Witness] = []
    notes: list[str] = []
    for ctf in g.full_observability_counterfactuals():
        for rk in _checked_indicators(g, ctf):
            if fg.has_directed(ctf, rk):
                censoring.append(Witness("affector_censoring", (ctf, rk), ("->",)))
            aff_k = aff.indicators_of(indicator_unit_name[rk])
            for rj in sorted(fg.children(ctf)):
                if rj == rk or g.roles[rj].kind != "indicator" or not fg.has_directed(rk, rj):
                    continue
                if rj in aff_k:
                    notes.append(
                        f"{ctf} -> {rj} <- {rk} is a collider with {rj} indexing {indicator_unit_name[rk]}; "
                        "kept out of the e-colluder list and reported through the path check"
                    )
                    warnings.warn(notes[-1], EStructureWarning, stacklevel=2)
                    continue
                colluders.append(Witness("e_colluder", (ctf, rj, rk), ("->", "<-")))
            for path in collider_paths_between(fg, ctf, rk):
                paths.append(Witness.from_path("e_colluding_path", path))
    return EStructures(
        _sorted_witnesses(censoring),
        _sorted_witnesses(colluders),
        _sorted_witnesses(paths),
        graph_is_dag=not fg.bidirected,
        warnings=tuple(notes),
    )


def check_full_observability_id(g: MissingDataGraph, attach_functional: bool = True) -> IdVerdict:
    """Identification of the full-observability law ``p(Z~(r=1), O, R)``.

    In a mixed graph the verdict is negative iff some e-colluding path
    exists.  In a DAG it is negative iff there is an affector-censoring edge
    or an e-colluder.
    """
    es = detect_e_structures(g)
    if es.graph_is_dag:
        witnesses = es.affector_censoring + es.e_colluders
    else:
        witnesses = es.e_colluding_paths
    if witnesses:
        return IdVerdict(Decision.NOT_IDENTIFIED, "full-observability", _sorted_witnesses(witnesses), warnings=es.warnings)
    verdict = IdVerdict(Decision.IDENTIFIED, "full-observability", warnings=es.warnings)
    if not attach_functional:
        return verdict
    from .functional_emitter import emit_full_observability_functional

    return _attach(verdict, lambda: emit_full_observability_functional(g))


# ---------------------------------------------------------------------------
# single-world queries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SingleWorldQuery:
    """Counterfactuals ``Z'`` asked about jointly in the world ``R = r``."""

    counterfactuals: tuple[str, ...]
    world: tuple[tuple[str, int], ...]

    @classmethod
    def build(cls, counterfactuals: Iterable[str], world: Mapping[str, int] | Iterable[tuple[str, int]]) -> "SingleWorldQuery":
        ctfs = []
        for c in counterfactuals:
            name, pattern = parse_counterfactual_id(c)
            ctfs.append(counterfactual_id(name, pattern))
        items = dict(world.items() if isinstance(world, Mapping) else world)
        return cls(tuple(sorted(set(ctfs))), tuple(sorted((k, int(v)) for k, v in items.items())))

    @property
    def world_map(self) -> dict[str, int]:
        return dict(self.world)

    def indexing_indicators(self, g: MissingDataGraph) -> list[str]:
        """Own indicators and pattern indicators of the queried counterfactuals."""
        out: set[str] = set()
        for c in self.counterfactuals:
            role = g.roles[c]
            out.add(indicator_id(role.name))
            out.update(k for k, _ in role.pattern)
        return sorted(out)


def _query_inconsistencies(g: MissingDataGraph, q: SingleWorldQuery) -> list[Witness]:
    world = q.world_map
    out: list[Witness] = []
    for c in q.counterfactuals:
        role = g.roles[c]
        own = indicator_id(role.name)
        if world.get(own, 1) != 1:
            out.append(Witness("inconsistent_pattern", (c, own), note=f"{c} is only defined when {own}=1"))
        for ind, val in role.pattern:
            if ind in world and world[ind] != val:
                out.append(
                    Witness("inconsistent_pattern", (c, ind), note=f"pattern sets {ind}={val}, world has {world[ind]}")
                )
    return out


def check_single_world_query(g: MissingDataGraph, q: SingleWorldQuery, attach_functional: bool = True) -> IdVerdict:
    """Validity of ``q`` and identification under MCAR or MAR of its indicators."""
    for c in q.counterfactuals:
        role = g.roles.get(c)
        if not isinstance(role, Counterfactual):
            raise UnknownCounterfactual(f"unknown counterfactual {c!r}")
    indicators = set(g.indicators())
    for ind, val in q.world:
        if ind not in indicators:
            raise UnknownCounterfactual(f"world assigns unknown indicator {ind!r}")
        if val not in (0, 1):
            raise InputError(f"indicator {ind} must be 0 or 1, got {val}")
    bad = _query_inconsistencies(g, q)
    if bad:
        return IdVerdict(Decision.CONDITIONS_NOT_MET, "single-world", _sorted_witnesses(bad))
    world = q.world_map
    unset = [r for r in q.indexing_indicators(g) if r not in world]
    if unset:
        raise InputError(f"world does not assign indexing indicators {unset}")
    rprime = q.indexing_indicators(g)
    if not q.counterfactuals:
        mech = Mechanism.MCAR
    else:
        mech = classify_mechanism(g, rprime)
    if mech is Mechanism.MNAR:
        w = Witness("mnar", tuple(rprime), note="indexing indicators are not independent of the counterfactuals given covariates")
        return IdVerdict(Decision.CONDITIONS_NOT_MET, "single-world", (w,), mechanism=mech)
    verdict = IdVerdict(Decision.IDENTIFIED, "single-world", mechanism=mech)
    if not attach_functional:
        return verdict
    from .functional_emitter import emit_single_world_functional

    return _attach(verdict, lambda: emit_single_world_functional(g, q, mech))


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def resolve_theorem(name: str) -> str:
    """Canonical theorem tag for ``name`` (``auto``, an alias ``1``..``4`` or a tag)."""
    tag = THEOREM_ALIASES.get(str(name), str(name))
    if tag != "auto" and tag not in THEOREM_ALIASES.values():
        raise InputError(f"unknown theorem {name!r}; expected auto, 1-4 or one of {sorted(THEOREM_ALIASES.values())}")
    return tag


def check_id(
    g: MissingDataGraph,
    theorem: str = "auto",
    queries: Iterable[SingleWorldQuery] = (),
    attach_functional: bool = True,
) -> list[IdVerdict]:
    """Run the identification check selected by ``theorem``.

    ``auto`` picks the full-observability check for graphs with affector
    patterns and the full-law check otherwise.  The single-world check
    returns one verdict per query; every other check returns one verdict.
    """
    tag = resolve_theorem(theorem)
    if tag == "auto":
        tag = "full-observability" if g.has_interference() else "full-law-admg"
    if tag == "single-world":
        queries = list(queries)
        if not queries:
            raise InputError("the single-world check needs a query")
        return [check_single_world_query(g, q, attach_functional) for q in queries]
    if tag == "full-observability":
        return [check_full_observability_id(g, attach_functional)]
    if tag == "full-law-dag" and g.analysis_graph().bidirected:
        raise InputError("the DAG full-law check needs a graph without bidirected edges")
    return [check_full_law_id(g, attach_functional)]
