#!/usr/bin/env python3
"""Smoke test for the netrw_py extension module.

Build the module and run this script from the repository root:

    cargo build -p netrw-py
    python3 python/smoke_test.py

The script locates the compiled cdylib in target/ itself; no install step
is needed.
"""

import ctypes  # noqa: F401  (imported to surface loader errors early)
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / "debug" / "libnetrw_py.so",
        ROOT / "target" / "release" / "libnetrw_py.so",
    ]
    built = next((c for c in candidates if c.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p netrw-py")
    staging = pathlib.Path(tempfile.mkdtemp(prefix="netrw_py_"))
    shutil.copy2(built, staging / "netrw_py.so")
    sys.path.insert(0, str(staging))
    import netrw_py

    return netrw_py


CHAIN2 = """\
net CHAIN2 {
  node 1 : a in=0 out=1
  node 2 : b in=1 out=0
  link 1.o1 -> 2.i1
}
"""

RELABEL_A = """\
rule ra {
  left {
    node 1 : a in=0 out=1
    frontier 1.o1 = x
  }
  right {
    node 1 : a2 in=0 out=1
    frontier 1.o1 = x
  }
}
"""

RELABEL_B = """\
rule rb {
  left {
    node 1 : b in=1 out=0
    frontier 1.i1 = y
  }
  right {
    node 1 : b2 in=1 out=0
    frontier 1.i1 = y
  }
}
"""

DIM_A = """\
net DIM_A1 {
  node 1 : a in=0 out=1
}
net DIM_A2 {
  node 1 : a2 in=0 out=1
}
"""

DIM_B = """\
net DIM_B1 {
  node 1 : b in=1 out=0
}
net DIM_B2 {
  node 1 : b2 in=1 out=0
}
"""


def parse_all_nets(text, netrw_py):
    """Splits a multi-net text into one Net per block."""
    nets = []
    block = []
    for line in text.splitlines():
        block.append(line)
        if line.strip() == "}":
            nets.append(netrw_py.Net.parse("\n".join(block) + "\n"))
            block = []
    return nets


def main():
    netrw_py = load_module()

    # Parse / validate / serialize roundtrip.
    chain = netrw_py.Net.parse(CHAIN2)
    assert chain.node_count == 2 and chain.link_count == 1
    assert chain.validate() == []
    reparsed = netrw_py.Net.parse(chain.serialize())
    assert chain.is_isomorphic(reparsed)
    assert chain.canonical_key() == reparsed.canonical_key()

    # Enclosure: both single nodes plus the chain itself.
    assert len(chain.enclose()) == 3

    # Embedding counts.
    assert netrw_py.embedding_count(chain, chain) == 1

    # Block-cover decomposition roundtrip, including an overlapping cover.
    rep = chain.decompose([[1], [2]], 0)
    assert rep.block_count == 1
    assert rep.inverse().is_isomorphic(chain)
    overlapping = chain.decompose([[1, 2], [2]], 0)
    assert overlapping.overlap == [(0, 2)]
    assert overlapping.inverse().is_isomorphic(chain)

    # Rule application.
    ra = netrw_py.RuleSystem.parse(RELABEL_A)
    rb = netrw_py.RuleSystem.parse(RELABEL_B)
    assert ra.rule_names == ["ra"]
    rewritten = ra.apply([chain])
    assert len(rewritten) == 1
    assert rewritten[0].node_count == 2

    # Universally-partitioning diagnostics: relabeling a inside CHAIN2
    # leaves the b label in place, so the label-disjointness check fires.
    diags = ra.uprns_diagnostics(chain)
    assert any("labels" in d for d in diags)

    # Confluence pipeline against the letter-orbit dimensions.
    dims_a = parse_all_nets(DIM_A, netrw_py)
    dims_b = parse_all_nets(DIM_B, netrw_py)
    kind, direction, connectors = netrw_py.confluence_verdict(
        chain, ra, rb, dims_a, dims_b
    )
    assert (kind, direction, connectors) == ("comprehensive", "=", 1), (
        kind,
        direction,
        connectors,
    )

    # Brute-force oracle agrees.
    completions = netrw_py.RuleSystem.parse(RELABEL_A + RELABEL_B)
    joinable_at, relation = netrw_py.joinable_relation(chain, ra, rb, completions)
    assert joinable_at == 2 and relation == "=", (joinable_at, relation)

    # Derivation space of both relabels from CHAIN2: four labelings.
    vertices, edges, truncated = netrw_py.derivation_summary(chain, completions)
    assert vertices == 4 and not truncated, (vertices, edges, truncated)

    # Connector bound.
    assert [netrw_py.min_connector_bound(n) for n in (2, 3, 4)] == [1, 3, 6]

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
