"""Shared fixtures, random graph generators and independent oracles."""

from __future__ import annotations

import itertools
import json
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from entangled_id.graph_model import MissingDataGraph, MixedGraph, build_and_validate
from entangled_id.gspec_parser import GraphSpec, parse_file
from entangled_id.tables import Table

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
MDG_FIXTURES = sorted(p.stem for p in FIXTURES.glob("*.mdg"))


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.mdg"


def load_spec(name: str) -> GraphSpec:
    return parse_file(fixture_path(name))


def load_graph(name: str) -> MissingDataGraph:
    return build_and_validate(load_spec(name))


def schema(name: str) -> dict:
    text = resources.files("entangled_id").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


@pytest.fixture
def graph():
    return load_graph


# ---------------------------------------------------------------------------
# random graphs
# ---------------------------------------------------------------------------


def random_admg(rng: np.random.Generator, max_vertices: int = 6, p_dir: float = 0.35, p_bi: float = 0.3) -> MixedGraph:
    n = int(rng.integers(1, max_vertices + 1))
    names = [f"V{i}" for i in range(n)]
    order = list(rng.permutation(names))
    directed = [(a, b) for i, a in enumerate(order) for b in order[i + 1 :] if rng.random() < p_dir]
    bidirected = [(a, b) for i, a in enumerate(names) for b in names[i + 1 :] if rng.random() < p_bi]
    return MixedGraph.build(names, directed, bidirected)


def random_dag(rng: np.random.Generator, max_vertices: int = 6, p_dir: float = 0.4) -> MixedGraph:
    return random_admg(rng, max_vertices, p_dir, 0.0)


def three_indicator_spec(rng: np.random.Generator) -> str:
    """Random single-unit graph with three missing variables and one covariate.

    Indicator parents are drawn from the covariate, the other variables'
    counterfactuals and earlier indicators, so neither self-censoring nor
    a colluder (``X[1] -> R_Y <- R_X``) can appear by construction.
    """
    names = ["X1", "X2", "X3"]
    lines = ["unit 1 {", "  covariate C"] + [f"  missing {x}" for x in names] + ["}"]
    order = list(rng.permutation(names))
    for i, a in enumerate(order):
        if rng.random() < 0.5:
            lines.append(f"O.C -> {a}[1]")
        for b in order[i + 1 :]:
            if rng.random() < 0.5:
                lines.append(f"{a}[1] -> {b}[1]")
    r_order = list(rng.permutation(names))
    for i, x in enumerate(r_order):
        rx = f"R_{x}"
        if rng.random() < 0.5:
            lines.append(f"O.C -> {rx}")
        earlier = r_order[:i]
        parents_r = [y for y in earlier if rng.random() < 0.4]
        for y in parents_r:
            lines.append(f"R_{y} -> {rx}")
        for y in names:
            # Y[1] -> R_X together with R_Y -> R_X would be a colluder
            if y != x and y not in parents_r and rng.random() < 0.5:
                lines.append(f"{y}[1] -> {rx}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------


def moral_separated(g: MixedGraph, xs, ys, zs) -> bool:
    """Separation by the ancestral moral graph of the latent DAG of ``g``.

    Every bidirected edge becomes a latent common parent; the query is then
    answered by undirected reachability in the moralized ancestral graph.
    This shares no code with the path-based implementation.
    """
    xs, ys, zs = set(xs), set(ys), set(zs)
    parents = {v: set(g.parents(v)) for v in g.vertices}
    for i, e in enumerate(sorted(tuple(sorted(e)) for e in g.bidirected)):
        h = f"~h{i}"
        parents[h] = set()
        for v in e:
            parents[v].add(h)
    keep = set()
    stack = list(xs | ys | zs)
    while stack:
        v = stack.pop()
        if v not in keep:
            keep.add(v)
            stack.extend(parents[v])
    adj = {v: set() for v in keep}
    for v in keep:
        ps = parents[v] & keep
        for p in ps:
            adj[v].add(p)
            adj[p].add(v)
        for a, b in itertools.combinations(ps, 2):
            adj[a].add(b)
            adj[b].add(a)
    seen = set(xs)
    stack = list(xs)
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w in zs or w in seen:
                continue
            if w in ys:
                return False
            seen.add(w)
            stack.append(w)
    return True


def conditional_independence_gap(joint: Table, xs, ys, zs) -> float:
    """``max |p(x,y,z) p(z) - p(x,z) p(y,z)|`` over all cells."""
    xs, ys, zs = list(xs), list(ys), list(zs)
    pxyz = joint.marginal(xs + ys + zs)
    pz = joint.marginal(zs) if zs else Table.scalar(1.0)
    pxz = joint.marginal(xs + zs)
    pyz = joint.marginal(ys + zs)
    lhs = pxyz * pz
    rhs = pxz * pyz
    return lhs.max_abs_diff(rhs.transpose(lhs.variables))


# ---------------------------------------------------------------------------
# parser fuzzing
# ---------------------------------------------------------------------------

FUZZ_TOKENS = [
    "unit", "covariate", "missing", "hidden", "ctf_family", "query", "singleworld", "given",
    "scenario", "edge", "{", "}", "[", "]", "(", ")", ",", ";", "=", "->", "<->", "<-", "*",
    "O.C1", "H.H1", "R_1", "R_Z1", "Z1", "Z1[1]", "Z1[1;r2=0]", "Z1[*]", "r1=1", "r2", "1", "0",
    "\n", " ", "#", "\t", "é", "﻿", "\x00", "9999999999",
]


def fuzz_case(rng: np.random.Generator, corpus: list[str]) -> str | bytes:
    """One malformed-or-valid input drawn from four mutation families."""
    kind = int(rng.integers(4))
    if kind == 0:
        text = list(corpus[int(rng.integers(len(corpus)))])
        for _ in range(int(rng.integers(1, 6))):
            if not text:
                break
            i = int(rng.integers(len(text)))
            op = int(rng.integers(3))
            if op == 0:
                del text[i]
            elif op == 1:
                text.insert(i, FUZZ_TOKENS[int(rng.integers(len(FUZZ_TOKENS)))])
            else:
                j = int(rng.integers(len(text)))
                text[i], text[j] = text[j], text[i]
        return "".join(text)
    if kind == 1:
        n = int(rng.integers(0, 40))
        return " ".join(FUZZ_TOKENS[int(k)] for k in rng.integers(len(FUZZ_TOKENS), size=n))
    if kind == 2:
        lines = corpus[int(rng.integers(len(corpus)))].splitlines(keepends=True)
        rng.shuffle(lines)
        return "".join(lines[: int(rng.integers(len(lines) + 1))])
    return bytes(rng.integers(0, 256, size=int(rng.integers(0, 64)), dtype=np.uint8))


def fixture_corpus() -> list[str]:
    return [fixture_path(n).read_text() for n in MDG_FIXTURES]


def check_parse_robust(text: str | bytes) -> bool:
    """Parse without raising; accepted inputs must round-trip. Returns acceptance."""
    from entangled_id.gspec_parser import parse, parse_with_diagnostics, serialize_with_diagnostics

    result = parse_with_diagnostics(text)
    size = len(text) + 1
    for d in result.diagnostics:
        assert d.severity in ("error", "warning")
        assert d.span.line >= 1 and d.span.column >= 1
        assert 0 <= d.span.offset <= size
    if result.spec is None:
        assert any(d.severity == "error" for d in result.diagnostics)
        return False
    for style in ("expanded", "condensed"):
        out, _ = serialize_with_diagnostics(result.spec, style)
        assert parse(out) == result.spec
    return True


# ---------------------------------------------------------------------------
# colluding-path counting cases
# ---------------------------------------------------------------------------

COLLUDING_CASES = "abcdef"


def colluding_case(kind: str, k: int) -> tuple[MixedGraph, dict[str, set[str]]]:
    """Graph and tail pinning of one colluding-path counting case with ``k`` links.

    Indicators outside the chain and the edges into proxies are left out;
    ``Zi`` is pinned to ``Rj = 1`` where the chain starts at a counterfactual
    indexed by ``Rj``.
    """
    vs = [f"V{i}" for i in range(1, k + 1)]

    def chain(names):
        return list(zip(names, names[1:]))

    if kind == "a":
        ch = ["Z"] + vs + ["Rj"]
        return MixedGraph.build(ch, [], chain(ch)), {}
    if kind == "b":
        ch = vs + ["Rj"]
        return MixedGraph.build(["Z"] + ch, [("Z", "V1")], chain(ch)), {}
    if kind == "c":
        ch = ["Z"] + vs[:-1] + ["RK"]
        return MixedGraph.build(ch + ["Rj"], [("Rj", "RK")], chain(ch)), {}
    if kind == "d":
        ch = vs[:-1] + ["RK"]
        return MixedGraph.build(["Z", "Rj"] + ch, [("Z", ch[0]), ("Rj", "RK")], chain(ch)), {}
    if kind == "e":
        ch = ["Zi"] + vs + ["Rj"]
        return MixedGraph.build(ch, [("Rj", "Zi")], chain(ch)), {"Zi": {"Rj"}}
    if kind == "f":
        ch = ["Zi"] + vs[:-1] + ["RK"]
        return MixedGraph.build(ch + ["Rj"], [("Rj", "RK"), ("Rj", "Zi")], chain(ch)), {"Zi": {"Rj"}}
    raise ValueError(kind)


def colluding_case_count(kind: str, k: int) -> int:
    base = (k + 2) * (k + 3) // 2
    return base - 1 if kind in "ef" else base


# ---------------------------------------------------------------------------
# acceptance report
# ---------------------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, title: str, ok: bool, seconds: float, detail: str) -> None:
    """Record one pass/fail line; the lines are printed in the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({seconds:.2f} s) {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
