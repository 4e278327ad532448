"""Command-line interface: ``entangled-id <subcommand> ...``.

Exit codes: 0 on success, 1 when ``--fail-on-nonid`` is set and a verdict is
not positive, 2 on usage or input errors.  ``--json`` outputs follow the
schemas shipped in ``entangled_id/schemas``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import EntangledIdError
from .estimator import (
    DEFAULT_WEIGHT_CAP,
    EstimateReport,
    aipw_iid_mar,
    bootstrap,
    fit_propensities,
    ipw_estimate,
    run_bias_study,
    target_world,
    unadjusted_means,
    write_bias_csv,
)
from .functional_emitter import (
    STORE,
    emit_full_law_functional,
    emit_full_observability_functional,
    emit_or_mechanism,
    emit_single_world_functional,
    render,
    to_json,
)
from .graph_model import MissingDataGraph, build_and_validate, counterfactual_id, parse_counterfactual_id
from .gspec_parser import GraphSpec, ParseError, QueryStmt, parse
from .id_engine import (
    Decision,
    IdVerdict,
    SingleWorldQuery,
    check_id,
    check_single_world_query,
    full_observability_graph,
)
from .nested_markov import count_certificate, count_mobius_parameters, intrinsic_sets, observed_law_graph
from .simulator import (
    ground_truth,
    load_scenario,
    monte_carlo_truth,
    read_dataset,
    simulate,
    write_dataset,
)

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_NONID, EXIT_INPUT = 0, 1, 2


class UsageError(EntangledIdError):
    """Flags that parse but do not make sense together."""


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _load_spec(path: str, extra: str = "") -> GraphSpec:
    text = _read_text(path)
    if extra:
        text = text.rstrip("\n") + "\n" + extra + "\n"
    return parse(text)


def _load_graph(path: str) -> tuple[GraphSpec, MissingDataGraph]:
    spec = _load_spec(path)
    return spec, build_and_validate(spec)


def _query(stmt: QueryStmt) -> SingleWorldQuery:
    return SingleWorldQuery.build(stmt.counterfactuals, stmt.given)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=False))


def _fmt_witness(w) -> str:
    if w.marks and len(w.marks) == len(w.vertices) - 1:
        parts = [w.vertices[0]]
        for m, v in zip(w.marks, w.vertices[1:]):
            parts += [m, v]
        body = " ".join(parts)
    else:
        body = ", ".join(w.vertices)
    return f"{body}  [{w.kind}]"


def _verdict_json(v: IdVerdict, details: bool) -> dict:
    full = v.to_json()
    if details:
        return full
    return {"decision": full["decision"], "witnesses": full["witnesses"]}


def _parse_target_query(spec_path: str, target: str) -> tuple[MissingDataGraph, SingleWorldQuery]:
    text = target.strip()
    if not text.startswith("query"):
        text = "query " + text
    spec = _load_spec(spec_path, text)
    g = build_and_validate(spec)
    return g, _query(spec.queries[-1])


def _mean_target(text: str) -> str:
    text = text.strip()
    if text.startswith("E[") and text.endswith("]"):
        text = text[2:-1]
    try:
        return counterfactual_id(*parse_counterfactual_id(text))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    spec = _load_spec(args.spec)
    g = build_and_validate(spec)
    roles: dict[str, int] = {}
    for v in g.vertices:
        kind = g.role(v).kind
        roles[kind] = roles.get(kind, 0) + 1
    directed = len(g.graph.directed)
    bidirected = len(g.graph.bidirected)
    if args.json:
        _emit(
            {
                "vertices": len(g.vertices),
                "directed_edges": directed,
                "bidirected_edges": bidirected,
                "mode": g.mode.value,
                "roles": dict(sorted(roles.items())),
                "queries": len(spec.queries),
            }
        )
        return EXIT_OK
    if not g.vertices:
        print("0 vertices")
        return EXIT_OK
    kinds = ", ".join(f"{n} {k}" for k, n in sorted(roles.items()))
    print(f"{len(g.vertices)} vertices ({kinds}); {directed} directed and {bidirected} bidirected edges; mode {g.mode.value}")
    if spec.queries:
        print(f"{len(spec.queries)} queries")
    return EXIT_OK


def cmd_check_id(args) -> int:
    spec, g = _load_graph(args.spec)
    queries = [_query(q) for q in spec.queries]
    verdicts = check_id(g, args.theorem, queries, attach_functional=args.details)
    if args.json:
        out = [_verdict_json(v, args.details) for v in verdicts]
        _emit(out[0] if len(out) == 1 else out)
    else:
        for v in verdicts:
            print(f"{v.decision.value} ({v.theorem})")
            for w in v.witnesses:
                print("  " + _fmt_witness(w))
            for msg in v.warnings:
                print("  warning: " + msg)
            if v.functional_id:
                print(f"  functional {v.functional_id}")
    if args.fail_on_nonid and any(v.decision is not Decision.IDENTIFIED for v in verdicts):
        return EXIT_NONID
    return EXIT_OK


_LAWS = {"full-obs": "full_observability", "observed": "observed"}


def cmd_mobius_count(args) -> int:
    _, g = _load_graph(args.spec)
    if args.law == "both":
        cert = count_certificate(g, cap=args.cap)
        if args.json:
            _emit(cert.to_json())
        else:
            full, obs = cert.counts
            print(f"full-obs {full}")
            print(f"observed {obs}")
            verdict = "certifies non-identification" if cert.certifies_non_id else "inconclusive"
            print(f"certificate: {verdict}")
        return EXIT_OK
    half = count_mobius_parameters(g, _LAWS[args.law], cap=args.cap)
    if args.json:
        _emit(half.to_json())
    else:
        print(half.total)
    return EXIT_OK


def cmd_intrinsic(args) -> int:
    _, g = _load_graph(args.spec)
    c = full_observability_graph(g) if args.law == "full-obs" else observed_law_graph(g)
    records = intrinsic_sets(c, cap=args.cap)
    if args.json:
        _emit({"law": _LAWS[args.law], "intrinsic_sets": [r.to_json() for r in records]})
        return EXIT_OK
    for r in records:
        fmt = lambda s: "{" + ", ".join(sorted(s)) + "}"  # noqa: E731
        seq = ", ".join(r.sequence) if r.sequence else "nothing"
        print(f"{fmt(r.members)}  head {fmt(r.head)}  tail {fmt(r.tail)}  fix {seq}")
    return EXIT_OK


def cmd_emit_functional(args) -> int:
    target = args.target.strip()
    if target in ("full-law", "full-observability", "mechanism"):
        _, g = _load_graph(args.spec)
        if target == "full-law":
            node = emit_full_law_functional(g)
        elif target == "full-observability":
            node = emit_full_observability_functional(g)
        else:
            node = emit_or_mechanism(g)
    else:
        if target == "query" or target.startswith("query:"):
            spec, g = _load_graph(args.spec)
            idx = int(target.split(":", 1)[1]) if ":" in target else 0
            if not 0 <= idx < len(spec.queries):
                raise UsageError(f"{args.spec} has {len(spec.queries)} queries, no index {idx}")
            q = _query(spec.queries[idx])
        else:
            g, q = _parse_target_query(args.spec, target)
        verdict = check_single_world_query(g, q, attach_functional=False)
        if verdict.decision is not Decision.IDENTIFIED:
            reasons = "; ".join(_fmt_witness(w) for w in verdict.witnesses)
            raise UsageError(f"query is not identified ({verdict.decision.value}): {reasons}")
        node = emit_single_world_functional(g, q, verdict.mechanism, form=args.form)
    fid = STORE.register(node)
    if args.json:
        _emit({"functional_id": fid, "target": target, "text": render(node), "ast": to_json(node)})
    else:
        print(render(node))
    return EXIT_OK


def cmd_simulate(args) -> int:
    scn = load_scenario(args.scenario, args.mechanism)
    if args.n < 0:
        raise UsageError("-n must be non-negative")
    ds = simulate(scn, args.n, args.seed)
    write_dataset(ds, scn.graph, args.output, oracle=not args.no_oracle)
    print(f"wrote {ds.n} blocks ({scn.mechanism.value}) to {args.output}")
    return EXIT_OK


def _estimation_inputs(args):
    path = args.spec
    if path.endswith(".json"):
        scn = load_scenario(path, args.mechanism)
        return scn.effective_graph(), scn
    if args.mechanism:
        raise UsageError("--mechanism needs a scenario file")
    return _load_graph(path)[1], None


def cmd_estimate(args) -> int:
    g, scn = _estimation_inputs(args)
    ds = read_dataset(args.data, g)
    target = _mean_target(args.target)
    if args.estimator == "ipw":

        def est(d):
            return ipw_estimate(d, fit_propensities(d, g), g, target, weight_cap=args.weight_cap, truncate=args.truncate)
    elif args.estimator == "unadjusted":

        def est(d):
            return unadjusted_means(d, g, [target])[target]
    else:
        unit = g.role(target).unit

        def est(d):
            return aipw_iid_mar(d, g, unit)

    if args.truth is not None:
        truth = args.truth
    elif scn is not None:
        truth = ground_truth(scn, target).value
    elif ds.oracle is not None:
        truth = monte_carlo_truth(ds, target).value
    else:
        truth = None
    if args.bootstrap:
        report = bootstrap(ds, est, args.bootstrap, args.seed, truth)
    else:
        point = est(ds)
        report = EstimateReport(point, point, point, point, 0, args.seed, truth)
    report = EstimateReport(
        report.point, report.mean, report.q05, report.q95, report.B, report.seed, report.truth, target, args.estimator
    )
    if args.json:
        out = report.to_json()
        out["world"] = target_world(g, target)
        _emit(out)
    else:
        line = f"{target} {args.estimator}: {report.point:.6g}"
        if report.B:
            line += f"  bootstrap mean {report.mean:.6g}  q05 {report.q05:.6g}  q95 {report.q95:.6g}  (B={report.B})"
        if report.bias is not None:
            line += f"  bias {report.bias:+.4g}"
        print(line)
    return EXIT_OK


def cmd_bench_bias(args) -> int:
    scn = load_scenario(args.scenario)
    mechanisms = [m.strip() for m in args.mechanisms.split(",") if m.strip()]
    if not mechanisms:
        raise UsageError("--mechanisms needs at least one of mcar, mar, mnar")
    targets = [t.strip() for t in args.targets.split(";")] if args.targets else None
    study = run_bias_study(scn, mechanisms, args.n, args.bootstrap, args.seed, targets, args.weight_cap)
    write_bias_csv(study, args.output)
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(study.to_json(), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(study.rows)} rows to {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="entangled-id", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="<command>")

    s = sub.add_parser("validate", help="parse and validate a graph spec")
    s.add_argument("spec")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("check-id", help="decide identification")
    s.add_argument("spec")
    s.add_argument("--theorem", default="auto", help="auto, 1 (full-law DAG), 2 (full-law ADMG), 3 (single-world), 4 (full-observability)")
    s.add_argument("--json", action="store_true")
    s.add_argument("--details", action="store_true", help="include theorem, witness kinds and functional id")
    s.add_argument("--fail-on-nonid", action="store_true", help="exit 1 unless every verdict is Identified")
    s.set_defaults(func=cmd_check_id)

    s = sub.add_parser("mobius-count", help="count Möbius parameters")
    s.add_argument("spec")
    s.add_argument("--law", choices=["full-obs", "observed", "both"], default="both")
    s.add_argument("--cap", type=int, default=14, help="largest graph size enumerated")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_mobius_count)

    s = sub.add_parser("intrinsic", help="list intrinsic sets with heads and tails")
    s.add_argument("spec")
    s.add_argument("--law", choices=["full-obs", "observed"], default="full-obs")
    s.add_argument("--cap", type=int, default=14)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_intrinsic)

    s = sub.add_parser("emit-functional", help="print an identifying functional")
    s.add_argument("spec")
    s.add_argument(
        "--target",
        required=True,
        help="full-law, full-observability, mechanism, query[:i], or 'singleworld (...) given ...'",
    )
    s.add_argument("--form", choices=["marginal", "joint"], default="marginal")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_emit_functional)

    s = sub.add_parser("simulate", help="simulate block data from a scenario")
    s.add_argument("scenario")
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--mechanism", choices=["mcar", "mar", "mnar"], type=str.lower)
    s.add_argument("--no-oracle", action="store_true")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="estimate a counterfactual mean")
    s.add_argument("spec", help="graph spec (.mdg) or scenario (.scenario.json)")
    s.add_argument("data")
    s.add_argument("--target", required=True, help="counterfactual, e.g. 'Z1[1;r2=0]' or 'E[Z1[1;r2=0]]'")
    s.add_argument("--estimator", choices=["ipw", "unadjusted", "aipw-iid"], default="ipw")
    s.add_argument("--bootstrap", type=int, default=0, metavar="B")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--weight-cap", type=float, default=DEFAULT_WEIGHT_CAP)
    s.add_argument("--truncate", action="store_true", help="clip weights at the cap instead of failing")
    s.add_argument("--truth", type=float)
    s.add_argument("--mechanism", choices=["mcar", "mar", "mnar"], type=str.lower)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("bench-bias", help="bias table across mechanism toggles")
    s.add_argument("scenario")
    s.add_argument("--mechanisms", default="mcar,mar,mnar")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("-n", type=int, default=50_000)
    s.add_argument("--bootstrap", type=int, default=50, metavar="B")
    s.add_argument("--seed", type=int, default=2024)
    s.add_argument("--targets", help="';'-separated counterfactuals (default: all pattern-indexed ones)")
    s.add_argument("--weight-cap", type=float, default=DEFAULT_WEIGHT_CAP)
    s.add_argument("--json-out")
    s.set_defaults(func=cmd_bench_bias)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        for d in exc.diagnostics:
            print(str(d), file=sys.stderr)
        return EXIT_INPUT
    except (EntangledIdError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
