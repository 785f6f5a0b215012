"""Ising instances on a fixed topology: energies, gauges, and exact oracles.

An instance assigns local fields h_i and pairwise couplings J_ij to the
active qubits and edges of a coupling graph.  The energy of a spin
configuration s (entries +-1) is

    E(s) = sum_i h_i s_i + sum_{i<j} J_ij s_i s_j.

Spin configurations and gauges are plain numpy vectors ordered by ascending
active qubit index.  State integers used by the exact distribution oracles
encode position b of that ordering in bit b (LSB = first active qubit),
with bit 0 meaning spin +1 and bit 1 meaning spin -1.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .chimera import CouplingGraph

H_USER_RANGE = 2.0
J_USER_RANGE = 1.0

ENUMERATION_LIMIT = 24
DISTRIBUTION_LIMIT = 20


@dataclass(frozen=True)
class IsingInstance:
    """Fields and couplings over the active qubits of a coupling graph.

    ``h`` maps 1-based qubit index to field value; ``J`` maps canonical
    (i, j) pairs with i < j to coupling values.  Missing entries mean 0.
    Keys must lie on the graph; treat instances as immutable.
    """

    graph: "CouplingGraph"
    h: dict[int, float] = field(default_factory=dict)
    J: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        active = set(self.graph.active)
        for q in self.h:
            if q not in active:
                raise ValueError(f"field on inactive or unknown qubit {q}")
        edges = set(self.graph.edges)
        for pair in self.J:
            i, j = pair
            if i >= j:
                raise ValueError(f"non-canonical coupler key {pair}; want i < j")
            if pair not in edges:
                raise ValueError(f"coupler {pair} is not an edge of the topology")

    @property
    def n(self) -> int:
        return self.graph.n

    @cached_property
    def h_vector(self) -> np.ndarray:
        """Dense field vector in active order."""
        vec = np.zeros(self.n)
        idx = self.graph.index_of
        for q, v in self.h.items():
            vec[idx[q]] = v
        return vec

    @cached_property
    def j_vector(self) -> np.ndarray:
        """Dense coupling vector in canonical edge order (zeros where absent)."""
        vec = np.zeros(len(self.graph.edges))
        eidx = self.graph.edge_index
        for pair, v in self.J.items():
            vec[eidx[pair]] = v
        return vec

    @cached_property
    def edge_positions(self) -> np.ndarray:
        """(m, 2) array of active-order positions for each edge."""
        idx = self.graph.index_of
        return np.array(
            [(idx[i], idx[j]) for i, j in self.graph.edges], dtype=np.int64
        ).reshape(-1, 2)


def check_user_ranges(instance: IsingInstance) -> None:
    """Reject programmed values outside |h| <= 2, |J| <= 1."""
    for q, v in instance.h.items():
        if abs(v) > H_USER_RANGE:
            raise ValueError(f"h[{q}] = {v} outside programmable range [-2, 2]")
    for pair, v in instance.J.items():
        if abs(v) > J_USER_RANGE:
            raise ValueError(f"J[{pair}] = {v} outside programmable range [-1, 1]")


def _check_spins(instance: IsingInstance, spins: np.ndarray) -> np.ndarray:
    spins = np.asarray(spins)
    if spins.shape[-1] != instance.n:
        raise ValueError(
            f"spin vector length {spins.shape[-1]} does not match n = {instance.n}"
        )
    return spins


def energy(instance: IsingInstance, spins: np.ndarray) -> float:
    """Energy of one configuration."""
    spins = _check_spins(instance, spins)
    return float(energies(instance, spins.reshape(1, -1))[0])


def energies(instance: IsingInstance, spins: np.ndarray) -> np.ndarray:
    """Energies of a (reads, n) batch of configurations."""
    spins = _check_spins(instance, spins)
    s = spins.astype(np.float64, copy=False)
    out = s @ instance.h_vector
    if len(instance.graph.edges):
        ep = instance.edge_positions
        out = out + (s[:, ep[:, 0]] * s[:, ep[:, 1]]) @ instance.j_vector
    return out


def apply_gauge(instance: IsingInstance, gauge: np.ndarray) -> IsingInstance:
    """Spin-reversal transform: h_i -> g_i h_i, J_ij -> g_i g_j J_ij.

    energy(apply_gauge(inst, g), g * s) == energy(inst, s) for every s.
    """
    gauge = _check_spins(instance, gauge)
    idx = instance.graph.index_of
    h = {q: gauge[idx[q]] * v for q, v in instance.h.items()}
    J = {
        (i, j): gauge[idx[i]] * gauge[idx[j]] * v
        for (i, j), v in instance.J.items()
    }
    return IsingInstance(instance.graph, h, J)


def ungauge_sample(spins: np.ndarray, gauge: np.ndarray) -> np.ndarray:
    """Map a sample from the gauged frame back: s_i -> g_i s_i (involution)."""
    spins = np.asarray(spins)
    gauge = np.asarray(gauge)
    if spins.shape[-1] != gauge.shape[-1]:
        raise ValueError("spin/gauge length mismatch")
    return spins * gauge


def state_spins(n: int) -> np.ndarray:
    """(2^n, n) int8 matrix of all configurations in state-integer order."""
    states = np.arange(1 << n, dtype=np.uint32)
    bits = (states[:, None] >> np.arange(n, dtype=np.uint32)) & 1
    return (1 - 2 * bits).astype(np.int8)


def _all_energies(instance: IsingInstance, chunk: int = 1 << 16) -> np.ndarray:
    n = instance.n
    total = 1 << n
    out = np.empty(total)
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        states = np.arange(start, stop, dtype=np.uint32)
        bits = (states[:, None] >> np.arange(n, dtype=np.uint32)) & 1
        spins = (1 - 2 * bits).astype(np.int8)
        out[start:stop] = energies(instance, spins)
    return out


def brute_force_spectrum(
    instance: IsingInstance, limit: int = ENUMERATION_LIMIT
) -> list[tuple[float, int]]:
    """Exact spectrum over all 2^n configurations, ascending.

    Returns (energy, degeneracy) pairs; degeneracy counts configurations
    whose energies are exactly equal as floats.
    """
    if instance.n > limit:
        raise ValueError(f"n = {instance.n} exceeds enumeration limit {limit}")
    values, counts = np.unique(_all_energies(instance), return_counts=True)
    return [(float(v), int(c)) for v, c in zip(values, counts)]


def boltzmann_probs(instance: IsingInstance, temperature: float) -> np.ndarray:
    """Exact Boltzmann distribution p(s) = exp(-E(s)/T) / Z over 2^n states."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if instance.n > DISTRIBUTION_LIMIT:
        raise ValueError(
            f"n = {instance.n} exceeds distribution limit {DISTRIBUTION_LIMIT}"
        )
    logw = -_all_energies(instance) / temperature
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


# --- File format ------------------------------------------------------------
#
# {"n": int, "h": {"<i>": value}, "J": {"<i>,<j>": value}} with 1-based
# indices and i < j key canonicalization.


def instance_to_dict(instance: IsingInstance) -> dict:
    return {
        "n": instance.n,
        "h": {str(q): v for q, v in sorted(instance.h.items())},
        "J": {f"{i},{j}": v for (i, j), v in sorted(instance.J.items())},
    }


def instance_from_dict(data: dict, graph: "CouplingGraph") -> IsingInstance:
    if int(data.get("n", graph.n)) != graph.n:
        raise ValueError(f"instance n = {data.get('n')} does not match graph n = {graph.n}")
    h = {}
    for key, v in data.get("h", {}).items():
        h[int(key)] = float(v)
    J = {}
    for key, v in data.get("J", {}).items():
        parts = key.split(",")
        if len(parts) != 2:
            raise ValueError(f"malformed coupler key {key!r}")
        i, j = int(parts[0]), int(parts[1])
        if i >= j:
            raise ValueError(f"non-canonical coupler key {key!r}; want i < j")
        J[(i, j)] = float(v)
    instance = IsingInstance(graph, h, J)
    check_user_ranges(instance)
    return instance


def instance_json(instance: IsingInstance) -> str:
    return json.dumps(instance_to_dict(instance), sort_keys=True, separators=(",", ":"))


def instance_hash(instance: IsingInstance) -> str:
    """Content hash of the canonical JSON form, used as a pairing id."""
    return hashlib.sha256(instance_json(instance).encode()).hexdigest()[:16]
