"""Propensity fitting, IPW estimates, baselines and the block bootstrap.

The propensity model is read off the emitted missingness mechanism: each
factor ``p(R_k | features, restriction)`` becomes a logistic regression of
``R_k`` on its features, fitted on the rows that satisfy the restriction.
Under the restriction every counterfactual feature is visible through its
proxy, so the fit uses observed data only.

The bootstrap resamples whole blocks, since blocks and not units are the
independent replicates under partial interference.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import EntangledIdError, InputError
from .functional_emitter import Node, OddsRatio, Prob, emit_or_mechanism, iter_nodes
from .graph_model import MissingDataGraph, counterfactual_id, indicator_id, parse_counterfactual_id
from .id_engine import Decision, Mechanism, check_full_observability_id, classify_mechanism
from .simulator import Dataset, ground_truth, simulate, thread_count

__all__ = [
    "aipw_iid_mar",
    "BIAS_COLUMNS",
    "BiasRow",
    "BiasStudy",
    "bootstrap",
    "bootstrap_many",
    "default_targets",
    "DEFAULT_WEIGHT_CAP",
    "DegenerateWeights",
    "EmptyPattern",
    "EstimateReport",
    "EstimatorUnsupported",
    "fit_logistic",
    "fit_propensities",
    "ipw_estimate",
    "LogisticFit",
    "NotIdentifiedForEstimation",
    "PieceModel",
    "PropensityModel",
    "RestrictedSampleEmpty",
    "run_bias_study",
    "SeparationInLogistic",
    "target_world",
    "unadjusted_means",
    "weight_mean",
    "write_bias_csv",
    "write_reports_csv",
]

EPS = 1e-6
DEFAULT_WEIGHT_CAP = 100.0


class SeparationInLogistic(EntangledIdError):
    """The features separate the outcome perfectly, so the MLE does not exist."""


class RestrictedSampleEmpty(EntangledIdError):
    """No rows satisfy the restriction a mechanism factor is fitted on."""


class DegenerateWeights(EntangledIdError):
    """An inverse weight exceeded the configured cap."""


class EmptyPattern(EntangledIdError):
    """No rows have the requested missingness pattern."""


class EstimatorUnsupported(EntangledIdError):
    """The mechanism has odds-ratio factors, which the estimator does not fit."""


class NotIdentifiedForEstimation(EntangledIdError):
    """The graph's full-observability law is not identified."""


# ---------------------------------------------------------------------------
# logistic regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogisticFit:
    """Logistic regression ``P(y = 1 | x) = sigmoid(b0 + x @ b)``.

    ``constant`` marks an outcome with a single observed value; its
    prediction is that value clipped to ``(EPS, 1 - EPS)``.
    """

    features: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray
    converged: bool
    iterations: int
    gradient_norm: float
    n: int
    constant: float | None = None

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(len(x), len(self.features))
        if self.constant is not None:
            return np.full(len(x), min(max(self.constant, EPS), 1 - EPS))
        eta = self.coef[0] + x @ self.coef[1:]
        return np.clip(_sigmoid(eta), EPS, 1 - EPS)

    def to_json(self) -> dict:
        names = ["(intercept)", *self.features]
        return {
            "coefficients": dict(zip(names, map(float, self.coef))),
            "standard_errors": dict(zip(names, map(float, self.se))),
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "n": self.n,
            "constant": self.constant,
        }


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _loglik(eta: np.ndarray, y: np.ndarray) -> float:
    # log sigmoid(eta) = -log1p(exp(-eta)), computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logistic(
    x: np.ndarray,
    y: np.ndarray,
    features: Sequence[str] = (),
    tol: float = 1e-8,
    max_iter: int = 100,
) -> LogisticFit:
    """Maximum likelihood by damped Newton steps.

    The step is halved until the log-likelihood does not decrease.
    Convergence means the gradient norm (scaled by ``n``) is below ``tol``;
    otherwise the fit is returned with ``converged=False``.

    Raises
    ------
    SeparationInLogistic
        When the features separate a non-constant outcome completely.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n == 0:
        raise RestrictedSampleEmpty("no rows to fit a logistic regression on")
    x = np.asarray(x, dtype=float).reshape(n, -1)
    features = tuple(features) or tuple(f"x{j}" for j in range(x.shape[1]))
    k = x.shape[1] + 1
    ybar = float(y.mean())
    if ybar in (0.0, 1.0):
        return LogisticFit(features, np.zeros(k), np.full(k, np.inf), True, 0, 0.0, n, constant=ybar)
    design = np.column_stack([np.ones(n), x])
    beta = np.zeros(k)
    beta[0] = math.log(ybar / (1 - ybar))
    eta = design @ beta
    ll = _loglik(eta, y)
    converged = False
    grad_norm = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        p = _sigmoid(eta)
        grad = design.T @ (y - p)
        grad_norm = float(np.linalg.norm(grad) / n)
        if grad_norm < tol:
            converged = True
            it -= 1
            break
        w = p * (1 - p)
        hess = design.T @ (design * w[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        while True:
            cand = beta + t * step
            ceta = design @ cand
            cll = _loglik(ceta, y)
            if cll >= ll - 1e-12 or t < 1e-10:
                break
            t *= 0.5
        beta, eta, ll = cand, ceta, cll
    # a linear predictor that classifies every row correctly exists only for
    # separable data, where the maximum likelihood estimate does not
    if np.all((eta > 0) == (y == 1)):
        raise SeparationInLogistic(f"features {list(features)} separate the outcome")
    p = _sigmoid(eta)
    w = p * (1 - p)
    hess = design.T @ (design * w[:, None])
    try:
        se = np.sqrt(np.diag(np.linalg.inv(hess)))
    except np.linalg.LinAlgError:
        se = np.full(k, np.inf)
    return LogisticFit(features, beta, se, converged, it, grad_norm, n)


# ---------------------------------------------------------------------------
# propensity model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PieceModel:
    """One mechanism factor ``p(indicator | features, restriction)``."""

    indicator: str
    features: tuple[str, ...]
    restriction: tuple[tuple[str, int], ...]
    fit: LogisticFit

    def probability(self, ds: Dataset, value: int, rows: np.ndarray | None = None) -> np.ndarray:
        x = _features(ds, self.features, rows)
        p1 = self.fit.predict(x)
        return p1 if value == 1 else 1 - p1

    def to_json(self) -> dict:
        return {
            "indicator": self.indicator,
            "features": list(self.features),
            "restriction": dict(self.restriction),
            "fit": self.fit.to_json(),
        }


@dataclass(frozen=True)
class PropensityModel:
    """Product of fitted mechanism factors."""

    pieces: tuple[PieceModel, ...]
    mechanism: Mechanism
    functional: Node

    @property
    def converged(self) -> bool:
        return all(p.fit.converged for p in self.pieces)

    def probability(self, ds: Dataset, world: Mapping[str, int], rows: np.ndarray | None = None) -> np.ndarray:
        """``pi(world | features)`` on ``rows`` (a boolean mask or index array)."""
        out = None
        for piece in self.pieces:
            p = piece.probability(ds, world.get(piece.indicator, 1), rows)
            out = p if out is None else out * p
        n = ds.n if rows is None else len(np.arange(ds.n)[rows])
        return np.ones(n) if out is None else out

    def to_json(self) -> dict:
        return {
            "mechanism": self.mechanism.value,
            "converged": self.converged,
            "pieces": [p.to_json() for p in self.pieces],
        }


def _features(ds: Dataset, names: Sequence[str], rows: np.ndarray | None) -> np.ndarray:
    cols = [ds.column(v) if rows is None else ds.column(v)[rows] for v in names]
    n = ds.n if rows is None else len(np.arange(ds.n)[rows])
    return np.column_stack(cols) if cols else np.empty((n, 0))


def _restriction_mask(ds: Dataset, restriction: Iterable[tuple[str, int]]) -> np.ndarray:
    mask = np.ones(ds.n, dtype=bool)
    for r, v in restriction:
        mask &= ds.indicators[r] == v
    return mask


def fit_propensities(
    ds: Dataset,
    g: MissingDataGraph,
    mechanism_class: Mechanism | str | None = None,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> PropensityModel:
    """Fit every factor of the mechanism emitted for ``g``.

    ``mechanism_class`` defaults to the class read off ``g``; a different
    value is rejected because the graph fixes which restrictions are valid.
    """
    verdict = check_full_observability_id(g, attach_functional=False)
    if verdict.decision is not Decision.IDENTIFIED:
        raise NotIdentifiedForEstimation(f"mechanism of this graph is not identified: {verdict.witnesses}")
    implied = classify_mechanism(g)
    if mechanism_class is not None and Mechanism(str(getattr(mechanism_class, "value", mechanism_class)).upper()) != implied:
        raise InputError(f"graph implies a {implied.value} mechanism, not {mechanism_class}")
    mech = emit_or_mechanism(g)
    if any(isinstance(node, OddsRatio) for node in iter_nodes(mech)):
        raise EstimatorUnsupported("mechanism has odds-ratio factors; only factorized mechanisms are fitted")
    pieces = []
    for node in iter_nodes(mech):
        if not isinstance(node, Prob):
            continue
        (r,) = node.variables
        mask = _restriction_mask(ds, node.restriction)
        if not mask.any():
            raise RestrictedSampleEmpty(f"no rows with {dict(node.restriction)} to fit p({r} | ...)")
        for v in node.given:
            if v in ds.observed and not ds.observed[v][mask].all():
                raise InputError(f"proxy {v} is missing on rows used to fit p({r} | ...)")
        x = _features(ds, node.given, mask)
        fit = fit_logistic(x, ds.indicators[r][mask], node.given, tol=tol, max_iter=max_iter)
        pieces.append(PieceModel(r, tuple(node.given), tuple(node.restriction), fit))
    return PropensityModel(tuple(pieces), implied, mech)


# ---------------------------------------------------------------------------
# estimates
# ---------------------------------------------------------------------------


def _target(g: MissingDataGraph, target: str) -> tuple[str, str, dict[str, int]]:
    try:
        name, pattern = parse_counterfactual_id(target)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    cid = counterfactual_id(name, pattern)
    if cid not in g.counterfactuals():
        raise InputError(f"{target} is not a counterfactual of the graph")
    return cid, name, dict(pattern)


def target_world(g: MissingDataGraph, target: str) -> dict[str, int]:
    """World in which the proxy of ``target`` shows it: own indicator 1, the
    pattern indicators at their pattern values, every other indicator 1."""
    _, name, pattern = _target(g, target)
    world = {r: 1 for r in g.indicators()}
    world.update(pattern)
    world[indicator_id(name)] = 1
    return world


def ipw_estimate(
    ds: Dataset,
    pm: PropensityModel,
    g: MissingDataGraph,
    target: str,
    world: Mapping[str, int] | None = None,
    weight_cap: float = DEFAULT_WEIGHT_CAP,
    truncate: bool = False,
) -> float:
    """``(1/N) * sum 1{R = world} * h / pi`` with ``h`` the proxy of ``target``.

    Raises
    ------
    DegenerateWeights
        If a weight exceeds ``weight_cap`` and ``truncate`` is False; with
        ``truncate`` the weights are clipped at the cap instead.
    """
    cid, name, pattern = _target(g, target)
    world = dict(target_world(g, cid) if world is None else world)
    if world.get(indicator_id(name)) != 1 or any(world.get(k) != v for k, v in pattern.items()):
        raise InputError(f"world {world} does not reveal {cid}")
    n = ds.n
    if n == 0:
        raise EmptyPattern("empty dataset")
    rows = _restriction_mask(ds, world.items())
    if not rows.any():
        return 0.0
    w = 1.0 / pm.probability(ds, world, rows)
    if w.max() > weight_cap:
        if not truncate:
            raise DegenerateWeights(f"max weight {w.max():.4g} exceeds cap {weight_cap}")
        w = np.minimum(w, weight_cap)
    return float(np.sum(ds.proxies[name][rows] * w) / n)


def weight_mean(ds: Dataset, pm: PropensityModel, world: Mapping[str, int]) -> float:
    """``(1/N) * sum 1{R = world} / pi``; close to 1 for a well-fitted model."""
    rows = _restriction_mask(ds, world.items())
    if ds.n == 0:
        return math.nan
    return float(np.sum(1.0 / pm.probability(ds, world, rows)) / ds.n)


def _unit_covariates(g: MissingDataGraph, unit: str) -> list[str]:
    return [c for c in g.covariates() if g.role(c).unit == unit]


def aipw_iid_mar(ds: Dataset, g: MissingDataGraph, unit: str) -> float:
    """Naive augmented IPW for the variable of ``unit`` assuming i.i.d. MAR data.

    Uses the unit's own covariates only, a logistic model for its indicator
    and a linear outcome regression fitted on its complete cases.
    """
    names = [m for m in g.missing_names() if g.role(m).unit == str(unit)]
    if len(names) != 1:
        raise InputError(f"unit {unit} must carry exactly one missing variable, found {names}")
    name = names[0]
    r = ds.indicators[indicator_id(name)].astype(float)
    covs = _unit_covariates(g, str(unit))
    x = _features(ds, covs, None)
    p = fit_logistic(x, r, covs).predict(x)
    seen = r == 1
    if not seen.any():
        raise EmptyPattern(f"no observed values of {name}")
    design = np.column_stack([np.ones(ds.n), x])
    beta = np.linalg.lstsq(design[seen], ds.proxies[name][seen], rcond=None)[0]
    m = design @ beta
    z = np.where(seen, ds.proxies[name], 0.0)
    return float(np.mean(r * z / p - (r - p) / p * m))


def unadjusted_means(ds: Dataset, g: MissingDataGraph, targets: Iterable[str]) -> dict[str, float]:
    """Mean of each target's proxy over rows with the target's own and pattern indicators."""
    out = {}
    for t in targets:
        cid, name, pattern = _target(g, t)
        rows = _restriction_mask(ds, [(indicator_id(name), 1), *pattern.items()])
        if not rows.any():
            raise EmptyPattern(f"no rows reveal {cid}")
        out[cid] = float(ds.proxies[name][rows].mean())
    return out


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimateReport:
    """Point estimate with block-bootstrap summaries.

    ``bias`` is the bootstrap mean minus ``truth`` when a truth is known.
    """

    point: float
    mean: float
    q05: float
    q95: float
    B: int
    seed: int
    truth: float | None = None
    target: str | None = None
    label: str | None = None
    replicates: tuple[float, ...] = field(default=(), repr=False)

    @property
    def bias(self) -> float | None:
        return None if self.truth is None else self.mean - self.truth

    def to_json(self) -> dict:
        out = {
            "point": self.point,
            "mean": self.mean,
            "q05": self.q05,
            "q95": self.q95,
            "bias": self.bias,
            "B": self.B,
            "seed": self.seed,
        }
        if self.truth is not None:
            out["truth"] = self.truth
        if self.target is not None:
            out["target"] = self.target
        if self.label is not None:
            out["label"] = self.label
        return out


def _resample(n: int, seed: int, b: int) -> np.ndarray:
    return np.random.default_rng([seed, b]).integers(0, n, size=n)


def bootstrap_many(
    ds: Dataset,
    estimator: Callable[[Dataset], Mapping[str, float]],
    B: int,
    seed: int,
    truths: Mapping[str, float] | None = None,
    threads: int | None = None,
) -> dict[str, EstimateReport]:
    """Bootstrap an estimator that returns several named estimates at once.

    Replicate ``b`` resamples blocks with ``default_rng([seed, b])``, so the
    reports do not depend on the number of worker threads.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    point = dict(estimator(ds))
    if ds.n == 0:
        raise EmptyPattern("cannot bootstrap an empty dataset")

    def one(b: int) -> Mapping[str, float]:
        return estimator(ds.take(_resample(ds.n, seed, b)))

    workers = threads or thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(one, range(B)))
    else:
        reps = [one(b) for b in range(B)]
    truths = truths or {}
    out = {}
    for key, value in point.items():
        xs = np.array([r[key] for r in reps], dtype=float)
        q05, q95 = np.quantile(xs, [0.05, 0.95])
        out[key] = EstimateReport(
            point=float(value),
            mean=float(xs.mean()),
            q05=float(q05),
            q95=float(q95),
            B=B,
            seed=seed,
            truth=truths.get(key),
            target=key,
            replicates=tuple(map(float, xs)),
        )
    return out


def bootstrap(
    ds: Dataset,
    estimator: Callable[[Dataset], float],
    B: int,
    seed: int,
    truth: float | None = None,
    threads: int | None = None,
) -> EstimateReport:
    """Block bootstrap of a scalar estimator."""
    key = "estimate"
    reports = bootstrap_many(
        ds, lambda d: {key: estimator(d)}, B, seed, None if truth is None else {key: truth}, threads
    )
    r = reports[key]
    return EstimateReport(r.point, r.mean, r.q05, r.q95, r.B, r.seed, r.truth, None, None, r.replicates)


REPORT_COLUMNS = ("target", "label", "point", "mean", "q05", "q95", "bias", "truth", "B", "seed")


def write_reports_csv(reports: Iterable[EstimateReport], path) -> None:
    """One row per report with :data:`REPORT_COLUMNS`."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            row = r.to_json()
            w.writerow(["" if row.get(c) is None else row.get(c) for c in REPORT_COLUMNS])


# ---------------------------------------------------------------------------
# bias study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BiasRow:
    """Adjusted and unadjusted bias of one target under one mechanism toggle."""

    target: str
    mechanism: str
    truth: float
    adjusted: EstimateReport
    unadjusted: EstimateReport

    @property
    def adjusted_bias(self) -> float:
        return self.adjusted.mean - self.truth

    @property
    def unadjusted_bias(self) -> float:
        return self.unadjusted.mean - self.truth

    def csv_row(self) -> dict:
        return {
            "target": self.target,
            "mechanism": self.mechanism,
            "adjusted_bias": self.adjusted_bias,
            "unadjusted_bias": self.unadjusted_bias,
            "q05": self.adjusted.q05 - self.truth,
            "q95": self.adjusted.q95 - self.truth,
        }


@dataclass(frozen=True)
class BiasStudy:
    rows: tuple[BiasRow, ...]
    naive: Mapping[str, Mapping[str, EstimateReport]]
    n: int
    B: int
    seed: int

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "B": self.B,
            "seed": self.seed,
            "rows": [
                {**r.csv_row(), "truth": r.truth, "adjusted": r.adjusted.to_json(), "unadjusted": r.unadjusted.to_json()}
                for r in self.rows
            ],
            "naive_aipw": {m: {u: rep.to_json() for u, rep in d.items()} for m, d in self.naive.items()},
        }


BIAS_COLUMNS = ("target", "mechanism", "adjusted_bias", "unadjusted_bias", "q05", "q95")


def default_targets(g: MissingDataGraph) -> list[str]:
    """Counterfactuals indexed by an affector pattern, or all of them when there are none."""
    patterned = [c for c in g.counterfactuals() if g.role(c).pattern]
    return patterned or list(g.counterfactuals())


def run_bias_study(
    scn,
    mechanisms: Sequence[Mechanism | str],
    n: int,
    B: int,
    seed: int,
    targets: Sequence[str] | None = None,
    weight_cap: float = DEFAULT_WEIGHT_CAP,
    threads: int | None = None,
) -> BiasStudy:
    """Simulate each mechanism toggle and bootstrap adjusted IPW, unadjusted means and naive AIPW.

    The same ``seed`` drives simulation and bootstrap for every toggle.
    Propensities are refitted inside each bootstrap replicate.
    """
    rows: list[BiasRow] = []
    naive: dict[str, dict[str, EstimateReport]] = {}
    for mech in mechanisms:
        s = scn.with_mechanism(mech)
        g = s.effective_graph()
        ts = list(targets) if targets else default_targets(g)
        ts = [_target(g, t)[0] for t in ts]
        ds = simulate(s, n, seed, threads=threads)
        truths = {t: ground_truth(s, t).value for t in ts}
        units = [g.role(m).unit for m in g.missing_names() if any(_target(g, t)[1] == m for t in ts)]

        def estimates(d: Dataset) -> dict[str, float]:
            pm = fit_propensities(d, g)
            out = {f"ipw|{t}": ipw_estimate(d, pm, g, t, weight_cap=weight_cap) for t in ts}
            out.update({f"unadjusted|{t}": v for t, v in unadjusted_means(d, g, ts).items()})
            out.update({f"aipw|{u}": aipw_iid_mar(d, g, u) for u in units})
            return out

        reps = bootstrap_many(ds, estimates, B, seed, threads=threads)
        label = s.mechanism.value
        for t in ts:
            rows.append(BiasRow(t, label.lower(), truths[t], reps[f"ipw|{t}"], reps[f"unadjusted|{t}"]))
        naive[label.lower()] = {u: reps[f"aipw|{u}"] for u in units}
    return BiasStudy(tuple(rows), naive, n, B, seed)


def write_bias_csv(study: BiasStudy, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=BIAS_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in study.rows:
            w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.csv_row().items()})
