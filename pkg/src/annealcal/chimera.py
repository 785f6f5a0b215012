"""Chimera topology: graph construction, coupler batches, random instances.

A Chimera graph is a rows-by-cols grid of complete bipartite cells with
``shore`` qubits per side.  Qubit indices are 1-based and assigned to every
nominal site; broken qubits keep their index but are dropped from the
active set together with their incident edges.

Coordinates: cell (r, c), side u (0 = vertical shore, 1 = horizontal
shore), offset k in [0, shore).  Linear index:

    idx = ((r * cols + c) * 2 + u) * shore + k + 1

Side-0 qubits couple to the same offset in the cell below; side-1 qubits
couple to the same offset in the cell to the right.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .ising import IsingInstance

BENCHMARK_RANGES = (1, 2, 4, 8, 16)
BENCHMARK_SCALE = 0.9
NUM_BATCHES = 6


@dataclass(frozen=True)
class CouplingGraph:
    rows: int
    cols: int
    shore: int
    active: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    broken: frozenset[int]

    @property
    def n(self) -> int:
        return len(self.active)

    @property
    def nominal(self) -> int:
        return self.rows * self.cols * 2 * self.shore

    @cached_property
    def index_of(self) -> dict[int, int]:
        """Active-order position of each active qubit index."""
        return {q: p for p, q in enumerate(self.active)}

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: p for p, e in enumerate(self.edges)}

    def coords(self, idx: int) -> tuple[int, int, int, int]:
        """(row, col, side, offset) of a 1-based qubit index."""
        if not 1 <= idx <= self.nominal:
            raise ValueError(f"qubit index {idx} out of range 1..{self.nominal}")
        z = idx - 1
        k = z % self.shore
        z //= self.shore
        u = z % 2
        z //= 2
        return z // self.cols, z % self.cols, u, k

    def index(self, r: int, c: int, u: int, k: int) -> int:
        return ((r * self.cols + c) * 2 + u) * self.shore + k + 1


def build_chimera(
    rows: int, cols: int, shore: int = 4, broken: set[int] | tuple[int, ...] = ()
) -> CouplingGraph:
    """Build a Chimera graph with the given broken qubits removed."""
    if rows < 1 or cols < 1 or shore < 1:
        raise ValueError("rows, cols and shore must all be >= 1")
    nominal = rows * cols * 2 * shore
    broken = frozenset(int(b) for b in broken)
    for b in broken:
        if not 1 <= b <= nominal:
            raise ValueError(f"broken qubit {b} out of range 1..{nominal}")

    def idx(r, c, u, k):
        return ((r * cols + c) * 2 + u) * shore + k + 1

    active = tuple(q for q in range(1, nominal + 1) if q not in broken)
    alive = set(active)
    edges = []
    for r in range(rows):
        for c in range(cols):
            for a in range(shore):
                for b in range(shore):
                    edges.append((idx(r, c, 0, a), idx(r, c, 1, b)))
            if r + 1 < rows:
                for k in range(shore):
                    edges.append((idx(r, c, 0, k), idx(r + 1, c, 0, k)))
            if c + 1 < cols:
                for k in range(shore):
                    edges.append((idx(r, c, 1, k), idx(r, c + 1, 1, k)))
    kept = sorted(
        tuple(sorted(e)) for e in edges if e[0] in alive and e[1] in alive
    )
    return CouplingGraph(rows, cols, shore, active, tuple(kept), broken)


@dataclass(frozen=True)
class CouplerBatches:
    """Six pairwise disjoint matchings whose union is the whole edge set."""

    batches: tuple[frozenset[tuple[int, int]], ...]

    def __post_init__(self) -> None:
        if len(self.batches) != NUM_BATCHES:
            raise ValueError(f"expected {NUM_BATCHES} batches")

    def validate_partition(self, graph: CouplingGraph) -> None:
        seen: set[tuple[int, int]] = set()
        for batch in self.batches:
            if seen & batch:
                raise ValueError("batches overlap")
            seen |= batch
            touched: set[int] = set()
            for i, j in batch:
                if i in touched or j in touched:
                    raise ValueError("batch is not a matching")
                touched.update((i, j))
        if seen != set(graph.edges):
            raise ValueError("batches do not cover the edge set")


def edge_batches(graph: CouplingGraph) -> CouplerBatches:
    """Deterministic 6-coloring of the edges into matchings.

    Intra-cell edge (side-0 offset a, side-1 offset b) gets color
    (a + b) mod shore; vertical inter-cell edges get 4 + parity of the
    upper cell row; horizontal ones 4 + parity of the left cell column.
    Vertical and horizontal inter-cell edges touch disjoint qubit sets
    (side 0 vs side 1) so they can share colors 4 and 5.
    """
    if graph.shore > 4:
        raise ValueError("six batches require shore <= 4")
    groups: list[set[tuple[int, int]]] = [set() for _ in range(NUM_BATCHES)]
    for edge in graph.edges:
        ra, ca, ua, ka = graph.coords(edge[0])
        rb, cb, ub, kb = graph.coords(edge[1])
        if (ra, ca) == (rb, cb):
            a, b = (ka, kb) if ua == 0 else (kb, ka)
            color = (a + b) % 4
        elif ca == cb:
            color = 4 + (min(ra, rb) % 2)
        else:
            color = 4 + (min(ca, cb) % 2)
        groups[color].add(edge)
    return CouplerBatches(tuple(frozenset(g) for g in groups))


def random_range_instance(
    graph: CouplingGraph, r: int, seed: int | np.random.Generator
) -> IsingInstance:
    """Benchmark instance: h = 0, J_ij uniform on {-r..r} scaled by 0.9/r."""
    if r not in BENCHMARK_RANGES:
        raise ValueError(f"range r = {r} not in {BENCHMARK_RANGES}")
    rng = np.random.default_rng(seed)
    draws = rng.integers(-r, r + 1, size=len(graph.edges))
    scale = BENCHMARK_SCALE / r
    J = {e: float(v * scale) for e, v in zip(graph.edges, draws)}
    return IsingInstance(graph, h={}, J=J)


# --- Config format ----------------------------------------------------------


def graph_to_dict(graph: CouplingGraph) -> dict:
    return {
        "rows": graph.rows,
        "cols": graph.cols,
        "shore": graph.shore,
        "broken": sorted(graph.broken),
    }


def graph_from_dict(data: dict) -> CouplingGraph:
    return build_chimera(
        int(data["rows"]),
        int(data["cols"]),
        int(data.get("shore", 4)),
        set(data.get("broken", ())),
    )


def parse_chimera_spec(spec: str) -> tuple[int, int, int]:
    """Parse an 'MxN' or 'MxN,shore=S' grid spec into (rows, cols, shore)."""
    m = re.fullmatch(r"(\d+)x(\d+)(?:,shore=(\d+))?", spec.strip())
    if not m:
        raise ValueError(f"bad chimera spec {spec!r}; expected e.g. 8x8,shore=4")
    rows, cols = int(m.group(1)), int(m.group(2))
    shore = int(m.group(3)) if m.group(3) else 4
    return rows, cols, shore
