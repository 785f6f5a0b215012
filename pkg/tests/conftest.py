"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's vectorized code paths:
energies come from per-term python sums, spectra from itertools
enumeration, pair distributions from hand-rolled four-term partition
functions.  Tests freeze expected values computed through these routes.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from annealcal.chimera import build_chimera
from annealcal.ising import IsingInstance


@pytest.fixture(scope="session")
def cell_graph():
    return build_chimera(1, 1, 4)


@pytest.fixture(scope="session")
def pair_graph():
    return build_chimera(1, 1, 1)


@pytest.fixture(scope="session")
def grid_graph():
    return build_chimera(2, 2, 4)


def term_energy(inst: IsingInstance, spins) -> float:
    """Exhaustive term-by-term energy sum over the instance dictionaries."""
    idx = inst.graph.index_of
    total = 0.0
    for q, v in sorted(inst.h.items(), reverse=True):
        total += v * spins[idx[q]]
    for (i, j), v in sorted(inst.J.items(), reverse=True):
        total += v * spins[idx[i]] * spins[idx[j]]
    return total


def spectrum_by_product(inst: IsingInstance) -> list[tuple[float, int]]:
    """Second enumeration pass: itertools spin products, ascending order."""
    levels: dict[float, int] = {}
    for spins in itertools.product((-1, 1), repeat=inst.n):
        e = term_energy(inst, np.array(spins))
        levels[e] = levels.get(e, 0) + 1
    return sorted(levels.items())


def four_state_probs(h_i: float, h_j: float, j_ij: float, temp: float) -> dict[str, float]:
    """Hand-rolled pair Boltzmann probabilities keyed uu/ud/du/dd."""
    weights = {
        "uu": math.exp(-(h_i + h_j + j_ij) / temp),
        "ud": math.exp(-(h_i - h_j - j_ij) / temp),
        "du": math.exp(-(-h_i + h_j - j_ij) / temp),
        "dd": math.exp(-(-h_i - h_j + j_ij) / temp),
    }
    z = sum(weights.values())
    return {k: w / z for k, w in weights.items()}


def boltzmann_probs_pair_order(probs: np.ndarray) -> np.ndarray:
    """Reorder a 4-state distribution from state-code order to uu/ud/du/dd."""
    # state codes: 0 uu, 1 du, 2 ud, 3 dd (bit 0 = first qubit, 1 = down)
    return np.array([probs[0], probs[2], probs[1], probs[3]])


def chimera_edge_count_oracle(rows: int, cols: int, shore: int, broken=frozenset()) -> tuple[int, int]:
    """Node/edge counts via an O(N^2) adjacency predicate, independent of the builder."""

    def coords(idx):
        z = idx - 1
        k = z % shore
        z //= shore
        u = z % 2
        z //= 2
        return z // cols, z % cols, u, k

    def adjacent(a, b):
        ra, ca, ua, ka = coords(a)
        rb, cb, ub, kb = coords(b)
        if (ra, ca) == (rb, cb) and ua != ub:
            return True
        if ua == ub == 0 and ca == cb and abs(ra - rb) == 1 and ka == kb:
            return True
        if ua == ub == 1 and ra == rb and abs(ca - cb) == 1 and ka == kb:
            return True
        return False

    nominal = rows * cols * 2 * shore
    alive = [q for q in range(1, nominal + 1) if q not in broken]
    edges = sum(
        1 for a, b in itertools.combinations(alive, 2) if adjacent(a, b)
    )
    return len(alive), edges


def assert_matching(batch) -> None:
    touched = set()
    for i, j in batch:
        assert i not in touched and j not in touched, "two edges share a qubit"
        touched.update((i, j))
