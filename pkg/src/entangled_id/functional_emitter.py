"""Symbolic identifying functionals and their exact evaluation.

Functionals are immutable trees of :class:`Node` objects.  Leaves are
conditional probabilities of the observed law (possibly restricted to a
complete-case event such as ``R_3=1``) and odds-ratio factors of the
missingness mechanism; inner nodes are products, ratios, sums and
evaluations at fixed values.

:func:`evaluate` computes a tree exactly on a :class:`TabularLaw`.  A law
may be either an observed law (proxies with a ``?`` state) or a law over
counterfactuals; the same tree evaluates on both, which is how the tests
check that a functional reproduces the quantity it claims to identify.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import EntangledIdError
from .graph_model import (
    Counterfactual,
    MissingDataGraph,
    MixedGraph,
    indicator_id,
    parse_counterfactual_id,
)
from .id_engine import (
    Mechanism,
    check_full_law_id,
    check_full_observability_id,
    classify_mechanism,
    full_observability_graph,
)
from .separation import m_separated
from .tables import Table

__all__ = [
    "Constant",
    "CriterionNotEstablished",
    "emit_full_law_functional",
    "emit_full_observability_functional",
    "emit_g_formula",
    "emit_or_mechanism",
    "emit_single_world_functional",
    "evaluate",
    "EvaluateAt",
    "FunctionalStore",
    "Node",
    "Normalizer",
    "NotADag",
    "NotMcarOrMar",
    "observed_law",
    "OddsRatio",
    "PositivityViolation",
    "Prob",
    "Product",
    "random_full_law",
    "Ratio",
    "render",
    "ScopeMismatch",
    "STORE",
    "Sum",
    "TabularLaw",
]


class NotADag(EntangledIdError):
    """The g-formula was requested on a graph with bidirected edges."""


class CriterionNotEstablished(EntangledIdError):
    """An independence needed by the emitted functional does not hold in the graph."""


class NotMcarOrMar(EntangledIdError):
    """A single-world functional was requested for an MNAR mechanism."""


class PositivityViolation(EntangledIdError):
    """A conditioning event or denominator has probability zero."""


class ScopeMismatch(EntangledIdError):
    """A functional refers to variables the law does not contain."""


Assignment = tuple[tuple[str, int], ...]


def _assign(items: Mapping[str, int] | Iterable[tuple[str, int]]) -> Assignment:
    pairs = items.items() if isinstance(items, Mapping) else items
    return tuple(sorted((str(k), int(v)) for k, v in pairs))


# ---------------------------------------------------------------------------
# nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Prob:
    """``p(variables | given, restriction)``, or ``p(variables, restriction | given)`` when ``joint``.

    ``labels`` maps proxies to the counterfactuals they equal under the
    restriction.  On an observed law the proxies are read and relabelled
    (their ``?`` state has no mass there); on a counterfactual law the
    labels are read directly.
    """

    variables: tuple[str, ...]
    given: tuple[str, ...] = ()
    restriction: Assignment = ()
    joint: bool = False
    labels: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class Product:
    factors: tuple["Node", ...]


@dataclass(frozen=True)
class Ratio:
    numerator: "Node"
    denominator: "Node"


@dataclass(frozen=True)
class Sum:
    variables: tuple[str, ...]
    body: "Node"


@dataclass(frozen=True)
class EvaluateAt:
    body: "Node"
    assignment: Assignment


@dataclass(frozen=True)
class OddsRatio:
    """``OR(target, preceding | succeeding = reference, context)`` with reference level 1."""

    target: str
    preceding: tuple[str, ...]
    succeeding: tuple[str, ...]
    context: tuple[str, ...]
    reference: int = 1


@dataclass(frozen=True)
class Normalizer:
    """``sigma``: the sum of ``body`` over ``over``."""

    body: "Node"
    over: tuple[str, ...]


@dataclass(frozen=True)
class Constant:
    value: float = 1.0


Node = Union[Prob, Product, Ratio, Sum, EvaluateAt, OddsRatio, Normalizer, Constant]


def _product(factors: Sequence[Node]) -> Node:
    fs = [f for f in factors if not (isinstance(f, Constant) and f.value == 1.0)]
    if not fs:
        return Constant(1.0)
    if len(fs) == 1:
        return fs[0]
    return Product(tuple(fs))


# ---------------------------------------------------------------------------
# rendering and serialization
# ---------------------------------------------------------------------------


def _fmt_assign(a: Assignment) -> list[str]:
    return [f"{k}={v}" for k, v in a]


def render(node: Node) -> str:
    """Compact text form; counterfactual labels are shown in place of proxies."""
    if isinstance(node, Prob):
        label = dict(node.labels)
        left = [label.get(v, v) for v in node.variables]
        right = [label.get(v, v) for v in node.given]
        if node.joint:
            left += _fmt_assign(node.restriction)
        else:
            right += _fmt_assign(node.restriction)
        inner = ", ".join(left) if left else ""
        return f"p({inner} | {', '.join(right)})" if right else f"p({inner})"
    if isinstance(node, Product):
        return " * ".join(_wrap(f) for f in node.factors)
    if isinstance(node, Ratio):
        return f"{_wrap(node.numerator)} / {_wrap(node.denominator)}"
    if isinstance(node, Sum):
        return f"sum_{{{', '.join(node.variables)}}} {_wrap(node.body)}"
    if isinstance(node, EvaluateAt):
        return f"{_wrap(node.body)}|_{{{', '.join(_fmt_assign(node.assignment))}}}"
    if isinstance(node, OddsRatio):
        cond = [f"{s}={node.reference}" for s in node.succeeding] + list(node.context)
        return f"OR({node.target}, {{{', '.join(node.preceding)}}} | {', '.join(cond)})"
    if isinstance(node, Normalizer):
        return f"sigma[{render(node.body)}; over {', '.join(node.over)}]"
    if isinstance(node, Constant):
        return repr(node.value)
    raise TypeError(f"unknown node {node!r}")


def _wrap(node: Node) -> str:
    text = render(node)
    return f"({text})" if isinstance(node, (Product, Ratio)) else text


def to_json(node: Node) -> dict:
    if isinstance(node, Prob):
        return {
            "node": "Prob",
            "variables": list(node.variables),
            "given": list(node.given),
            "restriction": dict(node.restriction),
            "joint": node.joint,
            "labels": dict(node.labels),
        }
    if isinstance(node, Product):
        return {"node": "Product", "factors": [to_json(f) for f in node.factors]}
    if isinstance(node, Ratio):
        return {"node": "Ratio", "numerator": to_json(node.numerator), "denominator": to_json(node.denominator)}
    if isinstance(node, Sum):
        return {"node": "Sum", "variables": list(node.variables), "body": to_json(node.body)}
    if isinstance(node, EvaluateAt):
        return {"node": "EvaluateAt", "assignment": dict(node.assignment), "body": to_json(node.body)}
    if isinstance(node, OddsRatio):
        return {
            "node": "OddsRatio",
            "target": node.target,
            "preceding": list(node.preceding),
            "succeeding": list(node.succeeding),
            "context": list(node.context),
            "reference": node.reference,
        }
    if isinstance(node, Normalizer):
        return {"node": "Normalizer", "over": list(node.over), "body": to_json(node.body)}
    if isinstance(node, Constant):
        return {"node": "Constant", "value": node.value}
    raise TypeError(f"unknown node {node!r}")


def iter_nodes(node: Node):
    yield node
    children: tuple = ()
    if isinstance(node, Product):
        children = node.factors
    elif isinstance(node, Ratio):
        children = (node.numerator, node.denominator)
    elif isinstance(node, (Sum, EvaluateAt, Normalizer)):
        children = (node.body,)
    for c in children:
        yield from iter_nodes(c)


class FunctionalStore:
    """Append-only, hash-consed registry of functionals keyed by content hash."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._by_id: dict[str, Node] = {}
        self._interned: dict[Node, Node] = {}

    @staticmethod
    def key_of(node: Node) -> str:
        blob = json.dumps(to_json(node), sort_keys=True).encode()
        return "fn-" + hashlib.sha256(blob).hexdigest()[:16]

    def intern(self, node: Node) -> Node:
        with self._lock:
            return self._interned.setdefault(node, node)

    def register(self, node: Node) -> str:
        fid = self.key_of(node)
        with self._lock:
            node = self._interned.setdefault(node, node)
            self._by_id.setdefault(fid, node)
        return fid

    def get(self, fid: str) -> Node:
        with self._lock:
            return self._by_id[fid]

    def __contains__(self, fid: str) -> bool:
        with self._lock:
            return fid in self._by_id

    def __len__(self) -> int:
        with self._lock:
            return len(self._by_id)


STORE = FunctionalStore()


# ---------------------------------------------------------------------------
# tabular laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TabularLaw:
    """Joint distribution over named discrete variables.

    Proxies of an observed law have one state more than their
    counterfactuals; the last state is the missing marker ``?``.
    ``proxies`` names the variables that carry that marker.
    """

    table: Table
    proxies: frozenset[str] = frozenset()
    graph: MissingDataGraph | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if np.any(self.table.values < 0):
            raise ValueError("negative probabilities")
        total = self.table.total()
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"law sums to {total}, not 1")

    @property
    def variables(self) -> tuple[str, ...]:
        return self.table.variables

    @property
    def cards(self) -> dict[str, int]:
        return self.table.cards

    def missing_state(self, proxy: str) -> int:
        return self.cards[proxy] - 1

    def marginal(self, keep: Iterable[str]) -> Table:
        return self.table.marginal(keep)


def _dirichlet_cpt(rng: np.random.Generator, parent_cards: list[int], card: int, floor: float) -> np.ndarray:
    draws = rng.dirichlet(np.ones(card), size=int(np.prod(parent_cards)) if parent_cards else 1)
    draws = floor + (1 - card * floor) * draws
    return draws.reshape(parent_cards + [card])


def random_full_law(
    g: MissingDataGraph | MixedGraph,
    rng: np.random.Generator,
    cards: Mapping[str, int] | None = None,
    floor: float = 0.02,
) -> TabularLaw:
    """A random positive law that factorizes according to ``g``.

    Each bidirected edge is realized by its own binary latent parent, so the
    margin lies in the model of the mixed graph.  Proxies are not part of
    the result; use :func:`observed_law` for the observed margin.
    """
    graph = g.proxy_free() if isinstance(g, MissingDataGraph) else g
    cards = dict(cards or {})
    latent_parents: dict[str, list[str]] = {v: [] for v in graph.vertices}
    latents: list[str] = []
    for i, e in enumerate(sorted(tuple(sorted(e)) for e in graph.bidirected)):
        h = f"~u{i}"
        latents.append(h)
        for v in e:
            latent_parents[v].append(h)
    joint = Table.scalar(1.0)
    for h in latents:
        joint = joint * Table((h,), _dirichlet_cpt(rng, [], 2, floor).reshape(2))
    for v in graph.topological_order():
        parents = sorted(graph.parents(v)) + latent_parents[v]
        pc = [cards.get(p, 2) for p in parents]
        cpt = _dirichlet_cpt(rng, pc, cards.get(v, 2), floor)
        joint = joint * Table(tuple(parents) + (v,), cpt)
    hidden = set(latents)
    if isinstance(g, MissingDataGraph):
        hidden |= set(g.hidden())
    joint = joint.sum_out(sorted(hidden))
    order = sorted(joint.variables)
    return TabularLaw(joint.transpose(order), graph=g if isinstance(g, MissingDataGraph) else None)


def observed_law(full: TabularLaw, g: MissingDataGraph | None = None) -> TabularLaw:
    """Observed margin ``p(O, Z, R)`` of a law over counterfactuals.

    A proxy equals the counterfactual whose pattern matches the realized
    indicators when its own indicator is 1, and ``?`` otherwise.
    """
    g = g or full.graph
    if g is None:
        raise ValueError("observed_law needs the graph roles")
    t = full.table
    cards = t.cards
    indicators = [r for r in g.indicators() if r in cards]
    covariates = [c for c in g.covariates() if c in cards]
    names = g.missing_names()
    ctfs_of = {n: [c for c in g.counterfactuals_of(n) if c in cards] for n in names}
    proxy_card = {n: cards[ctfs_of[n][0]] + 1 for n in names}
    order = covariates + names + indicators
    out = np.zeros([cards[c] for c in covariates] + [proxy_card[n] for n in names] + [2] * len(indicators))
    for bits in itertools.product((0, 1), repeat=len(indicators)):
        world = dict(zip(indicators, bits))
        piece = t.slice(world)
        for n in names:
            own = indicator_id(n)
            chosen = None
            if world[own] == 1:
                for c in ctfs_of[n]:
                    if all(world[k] == v for k, v in g.roles[c].pattern):
                        chosen = c
            others = [c for c in ctfs_of[n] if c != chosen]
            piece = piece.sum_out(others)
            if chosen is None:
                onehot = np.zeros(proxy_card[n])
                onehot[-1] = 1.0
                piece = piece * Table((n,), onehot)
            else:
                moved = piece.transpose(_last(piece.variables, chosen))
                vals = moved.values
                pad = np.concatenate([vals, np.zeros(vals.shape[:-1] + (1,))], axis=-1)
                piece = Table(moved.variables[:-1] + (n,), pad)
        piece = piece.transpose(covariates + names)
        out[(Ellipsis,) + bits] = piece.values
    return TabularLaw(Table(order, out), proxies=frozenset(names), graph=g)


def _last(variables: Sequence[str], v: str) -> tuple[str, ...]:
    return tuple(x for x in variables if x != v) + (v,)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


class _Evaluator:
    def __init__(self, law: TabularLaw):
        self.law = law
        self.scope = set(law.variables)
        self._log_odds: dict[tuple, dict[frozenset, Table]] = {}

    # probabilities ---------------------------------------------------------

    def _event_table(self, names: Sequence[str], restriction: Assignment) -> Table:
        """Mass of ``names`` jointly with the restriction event."""
        rvars = [k for k, _ in restriction]
        missing = [v for v in list(names) + rvars if v not in self.scope]
        if missing:
            raise ScopeMismatch(f"law has no variables {sorted(set(missing))}")
        return self.law.marginal(list(dict.fromkeys(list(names) + rvars))).slice(dict(restriction))

    def _drop_missing_state(self, t: Table, proxies: Iterable[str]) -> Table:
        for p in proxies:
            if p in t.variables:
                t = t.take(p, range(self.law.missing_state(p)))
        return t

    def prob(self, node: Prob) -> Table:
        labels = dict(node.labels)
        names = list(node.variables) + list(node.given)
        use_proxies = all(v in self.scope for v in names)
        if not use_proxies:
            names = [labels.get(v, v) for v in names]
            labels = {}
            if not all(v in self.scope for v in names):
                raise ScopeMismatch(f"neither the proxies nor the counterfactuals of {render(node)} are in the law")
        k = len(node.variables)
        variables, given = names[:k], names[k:]
        relabel = [p for p in labels if p in self.law.proxies]
        num = self._drop_missing_state(self._event_table(variables + given, node.restriction), relabel)
        if node.joint:
            den_vars: list[str] = given
            den = self._drop_missing_state(self.law.marginal(den_vars), relabel) if den_vars else None
        else:
            den = self._drop_missing_state(self._event_table(given, node.restriction), relabel)
        if den is not None:
            if np.any(den.values <= 0):
                raise PositivityViolation(f"conditioning event of {render(node)} has zero probability")
            num = num / den
        return num.rename(labels)

    # odds ratios -----------------------------------------------------------

    def _observed_log_odds(self, indicators: tuple[str, ...], context: tuple[str, ...]) -> dict[frozenset, Table]:
        """``log p(R=r | ctx) - log p(R=1 | ctx)`` for every zero set, from the observed law.

        The interaction term of a zero set ``T`` is free of every
        counterfactual that is unobserved in the world where exactly ``T``
        is zero, so it can be solved for from the mass of that world,
        smallest zero sets first.
        """
        key = (indicators, context)
        if key in self._log_odds:
            return self._log_odds[key]
        law = self.law
        ctfs = [c for c in context if c not in self.scope]
        covs = [c for c in context if c in self.scope]
        proxy_of: dict[str, str] = {}
        pattern_of: dict[str, dict[str, int]] = {}
        for c in ctfs:
            name, pattern = parse_counterfactual_id(c)
            if name not in law.proxies:
                raise ScopeMismatch(f"law has neither {c} nor its proxy")
            proxy_of[c] = name
            pattern_of[c] = dict(pattern)

        def visible(c: str, zeros: frozenset) -> bool:
            if indicator_id(proxy_of[c]) in zeros:
                return False
            return all((k in zeros) == (v == 0) for k, v in pattern_of[c].items())

        def world_mass(zeros: frozenset, keep: list[str]) -> Table:
            world = {r: (0 if r in zeros else 1) for r in indicators}
            proxies = [proxy_of[c] for c in keep]
            t = law.marginal(covs + proxies + list(indicators)).slice(world)
            t = self._drop_missing_state(t, proxies)
            return t.rename({proxy_of[c]: c for c in keep})

        base = world_mass(frozenset(), ctfs)
        psi: dict[frozenset, Table] = {}
        for size in range(1, len(indicators) + 1):
            for zs in itertools.combinations(indicators, size):
                zeros = frozenset(zs)
                keep = [c for c in ctfs if visible(c, zeros)]
                lower = Table.scalar(0.0)
                for s in psi:
                    if s < zeros:
                        lower = lower + psi[s]
                acc = (base * lower.map(np.exp)).sum_out([c for c in ctfs if c not in keep])
                num = world_mass(zeros, keep)
                if np.any(acc.values <= 0) or np.any(num.values <= 0):
                    raise PositivityViolation(f"world with {sorted(zeros)} missing has zero mass somewhere")
                psi[zeros] = (num / acc).map(np.log)
        log_odds = {frozenset(): Table.scalar(0.0)}
        for zeros in psi:
            total = Table.scalar(0.0)
            for s, t in psi.items():
                if s <= zeros:
                    total = total + t
            log_odds[zeros] = total
        self._log_odds[key] = log_odds
        return log_odds

    def _direct_log_odds(self, indicators: tuple[str, ...], context: tuple[str, ...]) -> dict[frozenset, Table]:
        key = ("direct", indicators, context)
        if key in self._log_odds:
            return self._log_odds[key]
        cond = self.law.table.conditional(list(indicators), list(context))
        ref = cond.slice({r: 1 for r in indicators})
        out: dict[frozenset, Table] = {}
        for size in range(len(indicators) + 1):
            for zs in itertools.combinations(indicators, size):
                world = {r: (0 if r in zs else 1) for r in indicators}
                out[frozenset(zs)] = (cond.slice(world) / ref).map(np.log)
        self._log_odds[key] = out
        return out

    def odds_ratio(self, node: OddsRatio) -> Table:
        if node.reference != 1:
            raise ValueError("odds ratios are defined with reference level 1")
        indicators = tuple(sorted((node.target,) + node.preceding + node.succeeding))
        if all(c in self.scope for c in node.context):
            log_odds = self._direct_log_odds(indicators, node.context)
        else:
            log_odds = self._observed_log_odds(indicators, node.context)
        axes = (node.target,) + node.preceding
        slices = []
        for bits in itertools.product((0, 1), repeat=len(axes)):
            zeros = frozenset(v for v, b in zip(axes, bits) if b == 0)
            kz = zeros & {node.target}
            pz = zeros - {node.target}
            value = (log_odds[zeros] - log_odds[pz] - log_odds[kz]).map(np.exp)
            slices.append(value)
        ctx = tuple(dict.fromkeys(v for s in slices for v in s.variables))
        cards = {}
        for s in slices:
            cards.update(s.cards)
        stacked = np.stack([s.expand(ctx, cards) for s in slices], axis=0).reshape((2,) * len(axes) + tuple(cards[v] for v in ctx))
        return Table(axes + ctx, stacked)

    # dispatch --------------------------------------------------------------

    def run(self, node: Node) -> Table:
        if isinstance(node, Prob):
            return self.prob(node)
        if isinstance(node, Product):
            out = Table.scalar(1.0)
            for f in node.factors:
                out = out * self.run(f)
            return out
        if isinstance(node, Ratio):
            num, den = self.run(node.numerator), self.run(node.denominator)
            out = num / den
            if np.any(np.isinf(out.values)):
                raise PositivityViolation(f"zero denominator in {render(node.denominator)}")
            return out
        if isinstance(node, Sum):
            return self.run(node.body).sum_out(node.variables)
        if isinstance(node, EvaluateAt):
            return self.run(node.body).slice(dict(node.assignment))
        if isinstance(node, OddsRatio):
            return self.odds_ratio(node)
        if isinstance(node, Normalizer):
            return self.run(node.body).sum_out(node.over)
        if isinstance(node, Constant):
            return Table.scalar(node.value)
        raise TypeError(f"unknown node {node!r}")


def evaluate(node: Node, law: TabularLaw) -> Table:
    """Exact value of a functional on a law, as a table over its free variables."""
    return _Evaluator(law).run(node)


# ---------------------------------------------------------------------------
# emitters
# ---------------------------------------------------------------------------


def emit_g_formula(g: MixedGraph | MissingDataGraph, treatments: Iterable[str], assignment: Mapping[str, int]) -> Node:
    """Truncated factorization: product of ``p(V | pa(V))`` over untreated ``V``, at ``A = a``."""
    graph = g.proxy_free() if isinstance(g, MissingDataGraph) else g
    if graph.bidirected:
        raise NotADag("the g-formula needs a DAG over fully observed vertices")
    if isinstance(g, MissingDataGraph) and g.hidden():
        raise NotADag("the g-formula needs every vertex observed")
    treatments = set(treatments)
    unknown = treatments - graph.vertices
    if unknown:
        raise ScopeMismatch(f"unknown treatments {sorted(unknown)}")
    if set(assignment) != treatments:
        raise ValueError("assignment must give a value to every treatment")
    factors = [Prob((v,), tuple(sorted(graph.parents(v)))) for v in graph.topological_order() if v not in treatments]
    body = _product(factors)
    return EvaluateAt(body, _assign(assignment)) if treatments else body


def _mechanism_graph(g: MissingDataGraph) -> MixedGraph:
    return full_observability_graph(g)


def _visible(g: MissingDataGraph, ctf: str, zeros: Iterable[str]) -> bool:
    zeros = set(zeros)
    role = g.roles[ctf]
    if indicator_id(role.name) in zeros:
        return False
    return all((k in zeros) == (v == 0) for k, v in role.pattern)


def _needed_indicators(g: MissingDataGraph, ctfs: Iterable[str]) -> set[str]:
    out: set[str] = set()
    for c in ctfs:
        role = g.roles[c]
        out.add(indicator_id(role.name))
        out.update(k for k, _ in role.pattern)
    return out


def _labels(g: MissingDataGraph, variables: Iterable[str]) -> tuple[tuple[str, str], ...]:
    out = []
    for v in variables:
        role = g.roles.get(v)
        if isinstance(role, Counterfactual):
            out.append((role.name, v))
    return tuple(sorted(out))


def _as_proxies(g: MissingDataGraph, variables: Iterable[str]) -> tuple[str, ...]:
    out = []
    for v in variables:
        role = g.roles.get(v)
        out.append(role.name if isinstance(role, Counterfactual) else v)
    return tuple(out)


def _piece(fg: MixedGraph, g: MissingDataGraph, rk: str, indicators: Sequence[str], context: Sequence[str]) -> Prob:
    """``p(R_k | R_-k = 1, context)`` rewritten over observed quantities.

    Counterfactuals that are hidden when only ``R_k`` is zero must be
    separable from ``R_k``; the conditioning set is then thinned
    greedily by m-separation, keeping each indicator needed to read a
    remaining counterfactual off its proxy.
    """
    others = [r for r in indicators if r != rk]
    ctx_ctfs = [c for c in context if isinstance(g.roles.get(c), Counterfactual)]
    seen = [c for c in context if c not in ctx_ctfs or _visible(g, c, {rk})]
    hidden = [c for c in ctx_ctfs if c not in seen]
    if hidden and not m_separated(fg, {rk}, set(hidden), set(others) | set(seen)):
        raise CriterionNotEstablished(
            f"{rk} is not separated from {hidden} given the rest; its conditional is not observed"
        )
    cond = list(seen)
    kept = list(others)
    for w in sorted(cond):
        rest = set(cond) - {w}
        if m_separated(fg, {rk}, {w}, rest | set(kept)):
            cond.remove(w)
    needed = _needed_indicators(g, [c for c in cond if c in ctx_ctfs])
    for r in sorted(kept):
        if r in needed:
            continue
        rest = set(kept) - {r}
        if m_separated(fg, {rk}, {r}, rest | set(cond)):
            kept.remove(r)
    cond_sorted = tuple(sorted(cond))
    return Prob(
        (rk,),
        _as_proxies(g, cond_sorted),
        _assign((r, 1) for r in kept),
        labels=_labels(g, cond_sorted),
    )


def _default_context(g: MissingDataGraph) -> list[str]:
    return g.covariates() + g.full_observability_counterfactuals()


def emit_or_mechanism(
    g: MissingDataGraph,
    indicators: Sequence[str] | None = None,
    context: Sequence[str] | None = None,
) -> Node:
    """Missingness mechanism ``p(R | context)`` in odds-ratio form.

    The mechanism is ``(1/sigma) * prod_k p(R_k | R_-k=1, .) *
    prod_{k>=2} OR(R_k, R_{<k} | R_{>k}=1, .)``.  Odds ratios whose
    indicators are m-separated given the rest are dropped as identically
    one, and with no odds ratios left the normalizer is one as well.
    ``indicators`` fixes the product order (default: sorted).
    """
    order = list(indicators) if indicators is not None else g.indicators()
    if sorted(order) != g.indicators():
        raise CriterionNotEstablished("the mechanism must cover every indicator exactly once")
    ctx = list(context) if context is not None else _default_context(g)
    fg = _mechanism_graph(g)
    missing = [v for v in ctx if v not in fg.vertices]
    if missing:
        raise CriterionNotEstablished(f"context vertices {missing} are not in the analysis graph")
    pieces = [_piece(fg, g, rk, order, ctx) for rk in order]
    ratios: list[Node] = []
    for i, rk in enumerate(order[1:], start=1):
        prec, succ = order[:i], order[i + 1:]
        if m_separated(fg, {rk}, set(prec), set(succ) | set(ctx)):
            continue
        ratios.append(OddsRatio(rk, tuple(prec), tuple(succ), tuple(sorted(ctx))))
    body = _product(pieces + ratios)
    if not ratios:
        return body
    return Ratio(body, Normalizer(body, tuple(order)))


def _propensity_weighted(g: MissingDataGraph, ctfs: Sequence[str], mechanism: Node) -> Node:
    covs = g.covariates()
    ctfs = sorted(ctfs)
    ones = _assign((r, 1) for r in g.indicators())
    complete = Prob(tuple(covs) + _as_proxies(g, ctfs), (), ones, joint=True, labels=_labels(g, ctfs))
    if not g.indicators():
        return complete
    return Product((Ratio(complete, EvaluateAt(mechanism, ones)), mechanism))


def emit_full_law_functional(g: MissingDataGraph, order: Sequence[str] | None = None) -> Node:
    """``p(O, Z(1), R) = p(O, Z(1), R=1) / p(R=1 | Z(1), O) * p(R | Z(1), O)``."""
    if g.has_interference():
        raise CriterionNotEstablished("graph has affector patterns; use the full-observability functional")
    if not check_full_law_id(g, attach_functional=False).identified:
        raise CriterionNotEstablished("the full law is not identified in this graph")
    ctfs = g.full_observability_counterfactuals()
    return _propensity_weighted(g, ctfs, emit_or_mechanism(g, order, g.covariates() + ctfs))


def emit_full_observability_functional(g: MissingDataGraph, order: Sequence[str] | None = None) -> Node:
    """``p(Z~(r=1), O, R)`` by the same propensity identity over all-ones counterfactuals."""
    if not check_full_observability_id(g, attach_functional=False).identified:
        raise CriterionNotEstablished("the full-observability law is not identified in this graph")
    ctfs = g.full_observability_counterfactuals()
    return _propensity_weighted(g, ctfs, emit_or_mechanism(g, order, g.covariates() + ctfs))


def emit_single_world_functional(g: MissingDataGraph, q, mechanism_class=None, form: str = "marginal") -> Node:
    """Single-world query ``p(Z')`` under MCAR or MAR indexing indicators.

    ``form="marginal"`` gives ``p(Z | R'=r')`` (MCAR) or
    ``sum_O p(Z | O, R'=r') p(O)`` (MAR) with proxies read as the queried
    counterfactuals; covariates that are not needed for the MAR
    independence are dropped greedily.  ``form="joint"`` gives
    ``p(Z', R=r, O) / p(R=r | O) * p(R | O)``, which needs every indicator
    to be MCAR or MAR.
    """
    rprime = q.indexing_indicators(g)
    mech = mechanism_class or (classify_mechanism(g, rprime) if q.counterfactuals else Mechanism.MCAR)
    mech = Mechanism(mech)
    if mech is Mechanism.MNAR:
        raise NotMcarOrMar("the indexing indicators are neither MCAR nor MAR")
    world = q.world_map
    ctfs = list(q.counterfactuals)
    labels = _labels(g, ctfs)
    proxies = _as_proxies(g, ctfs)
    covs = g.covariates()
    if form == "joint":
        if classify_mechanism(g) is Mechanism.MNAR:
            raise NotMcarOrMar("the joint form needs every indicator to be MCAR or MAR")
        full_world = _assign((r, world.get(r, 1)) for r in g.indicators())
        num = Prob(tuple(covs) + proxies, (), full_world, joint=True, labels=labels)
        den = Prob((), tuple(covs), full_world, joint=True)
        return Product((Ratio(num, den), Prob(tuple(g.indicators()), tuple(covs))))
    if form != "marginal":
        raise ValueError(f"unknown form {form!r}")
    restriction = _assign((r, world[r]) for r in rprime)
    if not ctfs:
        return Constant(1.0)
    if mech is Mechanism.MCAR or not covs:
        return Prob(proxies, (), restriction, labels=labels)
    ag = g.analysis_graph()
    adjust = list(covs)
    for c in sorted(covs):
        rest = [x for x in adjust if x != c]
        if m_separated(ag, set(rprime), set(g.counterfactuals()), set(rest)):
            adjust = rest
    if not adjust:
        return Prob(proxies, (), restriction, labels=labels)
    adjust_t = tuple(sorted(adjust))
    return Sum(adjust_t, Product((Prob(proxies, adjust_t, restriction, labels=labels), Prob(adjust_t))))
