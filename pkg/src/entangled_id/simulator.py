"""Block simulation for partial-interference missing-data graphs.

A :class:`BlockScenario` attaches a linear-Gaussian generative model to a
missing-data graph: independent normal covariates, jointly normal
counterfactuals whose means are linear in their covariate parents, and
indicators drawn in topological order from a constant probability (MCAR) or
a logistic function of their parents (MAR, MNAR).  Proxies follow
consistency: a proxy equals the counterfactual selected by the realized
affector indicators when its own indicator is 1 and is missing otherwise.

Every block draws from its own stream ``default_rng([seed, block])``, so the
dataset does not depend on how blocks are split across workers.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EntangledIdError, InputError
from .graph_model import (
    AlwaysObserved,
    Counterfactual,
    Indicator,
    MissingDataGraph,
    Proxy,
    build_and_validate,
    counterfactual_id,
    parse_counterfactual_id,
)
from .gspec_parser import parse_file
from .id_engine import Mechanism, classify_mechanism

__all__ = [
    "BlockScenario",
    "CovarianceNotPD",
    "Dataset",
    "ground_truth",
    "IndicatorModel",
    "load_scenario",
    "MISSING",
    "monte_carlo_truth",
    "PositivityMarginViolated",
    "column_name",
    "oracle_path",
    "read_dataset",
    "scenario_from_json",
    "ScenarioError",
    "simulate",
    "thread_count",
    "Truth",
    "UnsupportedScenario",
    "write_dataset",
]

MISSING = "?"
DEFAULT_MCAR_RANGE = (0.3, 0.7)
THREADS_ENV = "ENTANGLED_ID_THREADS"


class ScenarioError(InputError):
    """A scenario file is malformed or disagrees with its graph."""


class UnsupportedScenario(ScenarioError):
    """The graph uses structure the linear-Gaussian block model cannot generate."""


class CovarianceNotPD(ScenarioError):
    """The counterfactual covariance is not symmetric positive definite."""


class PositivityMarginViolated(EntangledIdError):
    """An indicator probability left ``[margin, 1 - margin]``."""


def thread_count() -> int:
    """Worker cap from ``ENTANGLED_ID_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IndicatorModel:
    """Generative model of one indicator.

    ``mcar_probability`` is used under the MCAR toggle.  Under MAR only the
    covariate coefficients are active; under MNAR every coefficient is.
    """

    mcar_probability: float
    intercept: float = 0.0
    coefficients: Mapping[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "mcar_probability": self.mcar_probability,
            "intercept": self.intercept,
            "coefficients": dict(self.coefficients),
        }


@dataclass(frozen=True)
class BlockScenario:
    """Linear-Gaussian generative model for one block of units.

    Attributes
    ----------
    graph:
        The missing-data graph with the full edge set.
    mechanism:
        Active toggle; :meth:`effective_graph` drops the switched-off edges.
    covariates:
        ``{covariate: (mean, sd)}``.
    ctf_order, ctf_intercepts, ctf_coefficients, covariance:
        Counterfactual ``k`` has mean ``ctf_intercepts[k] + sum_c
        ctf_coefficients[k][c] * C_c`` and the ``covariance`` row ``k``.
    indicators:
        ``{indicator: IndicatorModel}``.
    positivity_margin:
        Every drawn indicator probability must lie in ``[m, 1 - m]``.
    """

    graph: MissingDataGraph
    mechanism: Mechanism
    covariates: Mapping[str, tuple[float, float]]
    ctf_order: tuple[str, ...]
    ctf_intercepts: Mapping[str, float]
    ctf_coefficients: Mapping[str, Mapping[str, float]]
    covariance: np.ndarray
    indicators: Mapping[str, IndicatorModel]
    positivity_margin: float = 0.005
    name: str = "scenario"
    graph_path: str | None = None
    mcar_range: tuple[float, float] = DEFAULT_MCAR_RANGE

    def __post_init__(self) -> None:
        self._validate()

    # validation ------------------------------------------------------------

    def _validate(self) -> None:
        g = self.graph
        if g.hidden():
            raise UnsupportedScenario(f"hidden vertices are not simulated: {g.hidden()}")
        covs, ctfs, inds = set(g.covariates()), list(g.counterfactuals()), g.indicators()
        if set(self.covariates) != covs:
            raise ScenarioError(f"covariate specs {sorted(self.covariates)} do not match graph {sorted(covs)}")
        for c, (_, sd) in self.covariates.items():
            if not sd > 0:
                raise ScenarioError(f"covariate {c} needs a positive sd")
            if g.graph.parents(c):
                raise UnsupportedScenario(f"covariate {c} has parents; covariates are exogenous")
        if sorted(self.ctf_order) != sorted(ctfs) or len(set(self.ctf_order)) != len(ctfs):
            raise ScenarioError(f"counterfactual order {list(self.ctf_order)} does not match graph {ctfs}")
        for k in ctfs:
            bad = set(g.graph.parents(k)) - covs
            if bad:
                raise UnsupportedScenario(f"{k} has non-covariate parents {sorted(bad)}")
            for c, b in self.ctf_coefficients.get(k, {}).items():
                if b != 0 and c not in g.graph.parents(k):
                    raise ScenarioError(f"coefficient of {c} in the mean of {k} without an edge {c} -> {k}")
        for e in g.graph.bidirected:
            if not e <= set(ctfs):
                raise UnsupportedScenario(f"bidirected edge {sorted(e)} not between counterfactuals")
        cov = self.covariance
        n = len(ctfs)
        if cov.shape != (n, n) or not np.allclose(cov, cov.T, atol=1e-12):
            raise CovarianceNotPD("counterfactual covariance must be a symmetric square matrix")
        if n and np.linalg.eigvalsh(cov).min() <= 1e-12:
            raise CovarianceNotPD("counterfactual covariance is not positive definite")
        idx = {k: i for i, k in enumerate(self.ctf_order)}
        for i, a in enumerate(self.ctf_order):
            for b in self.ctf_order[i + 1 :]:
                if cov[idx[a], idx[b]] != 0 and not g.graph.has_bidirected(a, b):
                    raise ScenarioError(f"covariance between {a} and {b} without a bidirected edge")
        if set(self.indicators) != set(inds):
            raise ScenarioError(f"indicator models {sorted(self.indicators)} do not match graph {sorted(inds)}")
        m = self.positivity_margin
        if not 0 <= m < 0.5:
            raise ScenarioError("positivity margin must lie in [0, 0.5)")
        for r, model in self.indicators.items():
            if not m <= model.mcar_probability <= 1 - m:
                raise PositivityMarginViolated(f"MCAR probability of {r} outside [{m}, {1 - m}]")
            for v, b in model.coefficients.items():
                if b != 0 and v not in g.graph.parents(r):
                    raise ScenarioError(f"coefficient of {v} in the model of {r} without an edge {v} -> {r}")
        got = classify_mechanism(self.effective_graph())
        if got != self.mechanism:
            raise ScenarioError(f"toggle {self.mechanism.value} but the active coefficients give {got.value}")

    # views -----------------------------------------------------------------

    def active_coefficients(self, indicator: str) -> dict[str, float]:
        """Coefficients of ``indicator`` that the current toggle switches on."""
        model = self.indicators[indicator]
        if self.mechanism is Mechanism.MCAR:
            return {}
        covs = set(self.graph.covariates())
        return {
            v: b
            for v, b in model.coefficients.items()
            if b != 0 and (self.mechanism is Mechanism.MNAR or v in covs)
        }

    def effective_graph(self) -> MissingDataGraph:
        """The graph restricted to the edges the toggle keeps active."""
        drop = []
        for r in self.graph.indicators():
            active = self.active_coefficients(r)
            drop.extend((v, r) for v in self.graph.graph.parents(r) if v not in active)
        return self.graph.with_edges(remove_directed=drop) if drop else self.graph

    def with_mechanism(self, mechanism: Mechanism | str) -> "BlockScenario":
        return replace(self, mechanism=Mechanism(_mechanism_value(mechanism)))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "graph": self.graph_path,
            "mechanism": self.mechanism.value,
            "positivity_margin": self.positivity_margin,
            "mcar_range": list(self.mcar_range),
            "covariates": {c: {"mean": m, "sd": s} for c, (m, s) in self.covariates.items()},
            "counterfactuals": {
                k: {"intercept": self.ctf_intercepts.get(k, 0.0), "coefficients": dict(self.ctf_coefficients.get(k, {}))}
                for k in self.ctf_order
            },
            "covariance": {"order": list(self.ctf_order), "matrix": self.covariance.tolist()},
            "missingness": {r: m.to_json() for r, m in self.indicators.items()},
        }


def _mechanism_value(m: Mechanism | str) -> str:
    text = m.value if isinstance(m, Mechanism) else str(m)
    up = text.upper()
    if up not in {x.value for x in Mechanism}:
        raise ScenarioError(f"unknown mechanism {text!r}; expected MCAR, MAR or MNAR")
    return up


def _number(x, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ScenarioError(f"{what} must be a finite number, got {x!r}")
    return float(x)


def scenario_from_json(
    data: Mapping,
    graph: MissingDataGraph,
    graph_path: str | None = None,
    mcar_seed: int = 0,
) -> BlockScenario:
    """Build a scenario from its JSON form.

    Indicators whose ``mcar_probability`` is null get a draw from
    ``mcar_range`` using ``mcar_seed``; the drawn value is kept in the
    scenario so :meth:`BlockScenario.to_json` records it.
    """
    try:
        lo, hi = (_number(v, "mcar_range") for v in data.get("mcar_range", DEFAULT_MCAR_RANGE))
        rng = np.random.default_rng([mcar_seed, 0x4D434152])
        covariates = {
            c: (_number(s.get("mean", 0.0), f"mean of {c}"), _number(s.get("sd", 1.0), f"sd of {c}"))
            for c, s in data.get("covariates", {}).items()
        }
        ctfs = data.get("counterfactuals", {})
        cov_block = data.get("covariance", {})
        order = tuple(cov_block.get("order", list(ctfs)))
        matrix = np.asarray(cov_block.get("matrix", np.eye(len(order)).tolist()), dtype=float)
        indicators = {}
        for r in sorted(data.get("missingness", {})):
            spec = data["missingness"][r]
            p = spec.get("mcar_probability")
            p = float(rng.uniform(lo, hi)) if p is None else _number(p, f"mcar_probability of {r}")
            indicators[r] = IndicatorModel(
                mcar_probability=p,
                intercept=_number(spec.get("intercept", 0.0), f"intercept of {r}"),
                coefficients={v: _number(b, f"coefficient {v} of {r}") for v, b in spec.get("coefficients", {}).items()},
            )
        return BlockScenario(
            graph=graph,
            mechanism=Mechanism(_mechanism_value(data.get("mechanism", "MNAR"))),
            covariates=covariates,
            ctf_order=order,
            ctf_intercepts={k: _number(v.get("intercept", 0.0), f"intercept of {k}") for k, v in ctfs.items()},
            ctf_coefficients={
                k: {c: _number(b, f"coefficient {c} of {k}") for c, b in v.get("coefficients", {}).items()}
                for k, v in ctfs.items()
            },
            covariance=matrix,
            indicators=indicators,
            positivity_margin=_number(data.get("positivity_margin", 0.005), "positivity_margin"),
            name=str(data.get("name", "scenario")),
            graph_path=graph_path,
            mcar_range=(lo, hi),
        )
    except (AttributeError, TypeError, ValueError) as exc:
        if isinstance(exc, EntangledIdError):
            raise
        raise ScenarioError(f"malformed scenario: {exc}") from exc


def load_scenario(path: str | os.PathLike, mechanism: Mechanism | str | None = None) -> BlockScenario:
    """Read ``*.scenario.json``; its ``graph`` entry is resolved next to the file.

    A ``.mdg`` path is also accepted when a sibling ``<stem>.scenario.json``
    exists.
    """
    path = Path(path)
    if path.suffix == ".mdg":
        sibling = path.with_name(path.stem + ".scenario.json")
        if not sibling.exists():
            raise ScenarioError(f"no scenario file next to {path}")
        path = sibling
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(data, dict) or "graph" not in data:
        raise ScenarioError(f"scenario {path} needs a 'graph' entry")
    graph_path = path.parent / data["graph"]
    graph = build_and_validate(parse_file(graph_path))
    scn = scenario_from_json(data, graph, graph_path=str(data["graph"]))
    return scn.with_mechanism(mechanism) if mechanism is not None else scn


# ---------------------------------------------------------------------------
# dataset
# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    """Simulated or loaded block data.

    Covariates and proxies are float arrays; ``observed[proxy]`` is the mask
    of cells that are present.  Missing cells are rendered as :data:`MISSING`
    wherever values leave the array form (:meth:`cell`, CSV).  ``oracle``
    holds every counterfactual draw when the data were simulated.
    """

    covariates: dict[str, np.ndarray]
    indicators: dict[str, np.ndarray]
    proxies: dict[str, np.ndarray]
    observed: dict[str, np.ndarray]
    oracle: dict[str, np.ndarray] | None = None
    columns: dict[str, str] = field(default_factory=dict)

    @property
    def n(self) -> int:
        for group in (self.indicators, self.covariates, self.proxies):
            for arr in group.values():
                return len(arr)
        return 0

    def proxy(self, name: str) -> np.ma.MaskedArray:
        return np.ma.masked_array(self.proxies[name], mask=~self.observed[name])

    def cell(self, row: int, vertex: str) -> float | int | str:
        if vertex in self.proxies:
            return float(self.proxies[vertex][row]) if self.observed[vertex][row] else MISSING
        if vertex in self.indicators:
            return int(self.indicators[vertex][row])
        return float(self.covariates[vertex][row])

    def column(self, vertex: str) -> np.ndarray:
        """Numeric column of a covariate, indicator or proxy (proxy gaps are NaN-free zeros)."""
        if vertex in self.covariates:
            return self.covariates[vertex]
        if vertex in self.indicators:
            return self.indicators[vertex].astype(float)
        if vertex in self.proxies:
            return np.where(self.observed[vertex], self.proxies[vertex], 0.0)
        raise KeyError(vertex)

    def take(self, rows: np.ndarray) -> "Dataset":
        """Rows (blocks) ``rows``, repeats allowed; used by the bootstrap."""
        pick = lambda d: {k: v[rows] for k, v in d.items()}  # noqa: E731
        return Dataset(
            pick(self.covariates),
            pick(self.indicators),
            pick(self.proxies),
            pick(self.observed),
            pick(self.oracle) if self.oracle is not None else None,
            dict(self.columns),
        )


def column_name(g: MissingDataGraph, vertex: str) -> str:
    """CSV header of a vertex: ``unit<i>.<name>`` or the indicator id."""
    role = g.role(vertex)
    if isinstance(role, Indicator):
        return vertex
    if isinstance(role, (AlwaysObserved, Proxy)):
        return f"unit{role.unit}.{role.name}"
    raise KeyError(f"{vertex} is not a data column")


def _data_vertices(g: MissingDataGraph) -> list[str]:
    out = []
    for u in g.units():
        out += [c for c in g.covariates() if g.role(c).unit == u]
        out += [p for p in g.proxies() if g.role(p).unit == u]
    return out + list(g.indicators())


def _indicator_order(g: MissingDataGraph) -> list[str]:
    order = g.graph.topological_order()
    return [v for v in order if v in set(g.indicators())]


def _check_margin(p: np.ndarray, r: str, margin: float) -> None:
    if p.size and (p.min() < margin or p.max() > 1 - margin):
        raise PositivityMarginViolated(
            f"probability of {r} = 1 reached [{p.min():.4g}, {p.max():.4g}], outside [{margin}, {1 - margin}]"
        )


def _draw_blocks(seed: int, start: int, stop: int, k_norm: int, k_unif: int) -> tuple[np.ndarray, np.ndarray]:
    z = np.empty((stop - start, k_norm))
    u = np.empty((stop - start, k_unif))
    for row, b in enumerate(range(start, stop)):
        rng = np.random.default_rng([seed, b])
        z[row] = rng.standard_normal(k_norm)
        u[row] = rng.random(k_unif)
    return z, u


def simulate(scn: BlockScenario, n: int, seed: int, threads: int | None = None) -> Dataset:
    """Draw ``n`` independent blocks.

    Raises
    ------
    PositivityMarginViolated
        If any drawn indicator probability leaves the configured margin.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    g = scn.graph
    covs = list(g.covariates())
    ctfs = list(scn.ctf_order)
    inds = _indicator_order(g)
    k_norm, k_unif = len(covs) + len(ctfs), len(inds)
    workers = threads or thread_count()
    chunk = max(1, math.ceil(n / workers)) if n else 1
    bounds = [(s, min(n, s + chunk)) for s in range(0, n, chunk)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _draw_blocks(seed, b[0], b[1], k_norm, k_unif), bounds))
    else:
        parts = [_draw_blocks(seed, s, e, k_norm, k_unif) for s, e in bounds]
    z = np.vstack([p[0] for p in parts]) if parts else np.empty((0, k_norm))
    u = np.vstack([p[1] for p in parts]) if parts else np.empty((0, k_unif))

    values: dict[str, np.ndarray] = {}
    for j, c in enumerate(covs):
        mean, sd = scn.covariates[c]
        values[c] = mean + sd * z[:, j]
    chol = np.linalg.cholesky(scn.covariance) if ctfs else np.empty((0, 0))
    noise = z[:, len(covs) :] @ chol.T
    for j, k in enumerate(ctfs):
        mean = np.full(n, scn.ctf_intercepts.get(k, 0.0))
        for c, b in scn.ctf_coefficients.get(k, {}).items():
            mean = mean + b * values[c]
        values[k] = mean + noise[:, j]
    indicators: dict[str, np.ndarray] = {}
    for j, r in enumerate(inds):
        model = scn.indicators[r]
        if scn.mechanism is Mechanism.MCAR:
            p = np.full(n, model.mcar_probability)
        else:
            eta = np.full(n, model.intercept)
            for v, b in scn.active_coefficients(r).items():
                eta = eta + b * (indicators[v] if v in indicators else values[v])
            p = _sigmoid(eta)
        _check_margin(p, r, scn.positivity_margin)
        indicators[r] = (u[:, j] < p).astype(np.int8)
    proxies, observed = {}, {}
    for name in g.missing_names():
        own = indicators[g.indicator_of(name)] == 1
        val = np.zeros(n)
        for k in g.counterfactuals_of(name):
            sel = own.copy()
            for ind, v in g.role(k).pattern:
                sel &= indicators[ind] == v
            val = np.where(sel, values[k], val)
        proxies[name] = val
        observed[name] = own
    return Dataset(
        covariates={c: values[c] for c in covs},
        indicators=indicators,
        proxies=proxies,
        observed=observed,
        oracle={k: values[k] for k in ctfs},
        columns={v: column_name(g, v) for v in _data_vertices(g)},
    )


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def oracle_path(path: str | os.PathLike) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".oracle.csv")


def write_dataset(ds: Dataset, g: MissingDataGraph, path: str | os.PathLike, oracle: bool = True) -> None:
    """Write the data CSV and, when present, the ``*.oracle.csv`` side file."""
    verts = _data_vertices(g)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([column_name(g, v) for v in verts])
        for i in range(ds.n):
            w.writerow([_fmt(c) if isinstance(c := ds.cell(i, v), float) else c for v in verts])
    if oracle and ds.oracle is not None:
        keys = list(ds.oracle)
        with open(oracle_path(path), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(keys)
            for i in range(ds.n):
                w.writerow([_fmt(ds.oracle[k][i]) for k in keys])


def _parse_cell(text: str, where: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise InputError(f"{where}: not a number: {text!r}") from None
    if not math.isfinite(x):
        raise InputError(f"{where}: non-finite value {text!r}")
    return x


def read_dataset(path: str | os.PathLike, g: MissingDataGraph, oracle: bool = True) -> Dataset:
    """Read a data CSV written by :func:`write_dataset` (extra columns are ignored)."""
    verts = _data_vertices(g)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: empty file")
    header = rows[0]
    where = {}
    for v in verts:
        name = column_name(g, v)
        if name not in header:
            raise InputError(f"{path}: missing column {name}")
        where[v] = header.index(name)
    body = rows[1:]
    n = len(body)
    covariates = {c: np.zeros(n) for c in g.covariates()}
    indicators = {r: np.zeros(n, dtype=np.int8) for r in g.indicators()}
    proxies = {p: np.zeros(n) for p in g.proxies()}
    observed = {p: np.zeros(n, dtype=bool) for p in g.proxies()}
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise InputError(f"{path}:{i + 2}: expected {len(header)} cells, got {len(row)}")
        for v, j in where.items():
            text = row[j].strip()
            loc = f"{path}:{i + 2}:{header[j]}"
            if v in proxies:
                if text != MISSING:
                    proxies[v][i] = _parse_cell(text, loc)
                    observed[v][i] = True
            elif v in indicators:
                if text not in ("0", "1"):
                    raise InputError(f"{loc}: indicator must be 0 or 1, got {text!r}")
                indicators[v][i] = int(text)
            else:
                if text == MISSING:
                    raise InputError(f"{loc}: covariates are always observed")
                covariates[v][i] = _parse_cell(text, loc)
    for p in proxies:
        own = indicators[g.indicator_of(p)] == 1
        if np.any(own != observed[p]):
            i = int(np.argmax(own != observed[p]))
            raise InputError(f"{path}:{i + 2}: proxy {column_name(g, p)} disagrees with {g.indicator_of(p)}")
    orc = None
    side = oracle_path(path)
    if oracle and side.exists():
        with open(side, newline="", encoding="utf-8") as fh:
            orows = list(csv.reader(fh))
        keys = orows[0]
        if len(orows) - 1 != n:
            raise InputError(f"{side}: {len(orows) - 1} rows for {n} data rows")
        orc = {k: np.array([_parse_cell(r[j], str(side)) for r in orows[1:]]) for j, k in enumerate(keys)}
    return Dataset(covariates, indicators, proxies, observed, orc, {v: column_name(g, v) for v in verts})


# ---------------------------------------------------------------------------
# ground truth
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Truth:
    value: float
    se: float
    method: str


def _target_id(scn: BlockScenario, target: str) -> str:
    try:
        name, pattern = parse_counterfactual_id(target)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    cid = counterfactual_id(name, pattern)
    if cid not in scn.ctf_order:
        raise InputError(f"{target} is not a counterfactual of the scenario graph")
    return cid


def ground_truth(scn: BlockScenario, target: str) -> Truth:
    """Analytic mean of a counterfactual: intercept plus coefficient-weighted covariate means."""
    k = _target_id(scn, target)
    value = scn.ctf_intercepts.get(k, 0.0) + sum(
        b * scn.covariates[c][0] for c, b in scn.ctf_coefficients.get(k, {}).items()
    )
    return Truth(float(value), 0.0, "analytic")


def monte_carlo_truth(ds: Dataset, target: str) -> Truth:
    """Mean of the oracle draws of ``target`` with its standard error."""
    if ds.oracle is None:
        raise InputError("dataset has no oracle block")
    k = counterfactual_id(*parse_counterfactual_id(target))
    x = ds.oracle[k]
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.inf
    return Truth(float(x.mean()), se, "monte_carlo")
