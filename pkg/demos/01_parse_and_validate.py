"""Parse a graph spec, inspect its roles and edges, and write it back out.

Run with ``python3 demos/01_parse_and_validate.py``.
"""

from __future__ import annotations

from pathlib import Path

from entangled_id.graph_model import build_and_validate
from entangled_id.gspec_parser import parse, parse_with_diagnostics, serialize

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def main() -> None:
    text = (FIXTURES / "fig6b.mdg").read_text()
    print("three-unit spec with pattern-indexed counterfactuals:\n")
    print(text)

    g = build_and_validate(parse(text))
    print("counterfactuals:", ", ".join(sorted(g.counterfactuals())))
    print("indicators:     ", ", ".join(sorted(g.indicators())))
    print("proxies:        ", ", ".join(sorted(g.proxies())))
    print(f"{len(g.graph.directed)} directed and {len(g.graph.bidirected)} bidirected edges\n")

    # the condensed form folds pattern families back into wildcards
    condensed = serialize(parse(text), "condensed")
    print("condensed serialization:\n")
    print(condensed)
    assert parse(condensed) == parse(text)

    # malformed input yields positioned diagnostics instead of an exception
    result = parse_with_diagnostics("unit 1 {\n  missing Z\n}\nZ[1] -> \n")
    print("diagnostics for a truncated edge:")
    for d in result.diagnostics:
        print("  ", d)


if __name__ == "__main__":
    main()
