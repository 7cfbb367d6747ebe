"""Shared builders for hand-placed test topologies."""

from __future__ import annotations

import sys

import pytest

from rplsim.defense import DefenseMode
from rplsim.messages import INFINITE_RANK, MIN_HOP_RANK_INCREASE, ROOT_RANK
from rplsim.network import Network
from rplsim.node import Candidate
from rplsim.scenario import Scenario

SPACING = 40.0


def line_positions(ids, spacing: float = SPACING, y: float = 75.0) -> dict[int, list[float]]:
    """Nodes on a horizontal line, ``ids[0]`` leftmost, ``spacing`` metres apart."""
    return {nid: [5.0 + i * spacing, y] for i, nid in enumerate(ids)}


def chain_network(ids, *, defense: DefenseMode = DefenseMode.NONE, attackers=(),
                  seed: int = 1, trace=None, **overrides) -> Network:
    """A line topology rooted at ``ids[0]`` (must be 0).

    With the default 50 m range and 40 m spacing each node only hears its
    neighbours on the line, so the DODAG is forced to be the chain itself.
    """
    assert ids[0] == 0
    n = len(ids) - 1
    sc = Scenario(clients=max(n - len(attackers), 1), attackers=len(attackers),
                  attack=bool(attackers), defense=defense, **overrides)
    return Network(sc, seed, positions=line_positions(ids), attackers=list(attackers),
                   trace=trace)


def wire_chain(net: Network, ids) -> None:
    """Install the chain DODAG directly, without running DIO exchange."""
    for i, nid in enumerate(ids[1:], start=1):
        node = net.nodes[nid]
        parent = ids[i - 1]
        prank = ROOT_RANK + (i - 1) * MIN_HOP_RANK_INCREASE
        node.candidates[parent] = Candidate(prank)
        node.preferred = parent
        node.rank = prank + MIN_HOP_RANK_INCREASE
        assert node.rank < INFINITE_RANK


@pytest.fixture
def chain():
    return chain_network


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines at the end of the run."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
