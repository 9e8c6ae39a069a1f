"""Network topology, hopping structure and disorder realizations.

Units are arranged on a ring (indices mod N).  Finite-range coupling links
each unit to its D nearest neighbours on either side; once D reaches
ceil(N/2) every unit is linked to every other one, so the topology is
canonicalized to all-to-all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np


@dataclass(frozen=True)
class FiniteRange:
    D: int

    def __post_init__(self):
        if int(self.D) != self.D or self.D < 1:
            raise ValueError(f"connectivity.D must be a positive integer, got {self.D!r}")


@dataclass(frozen=True)
class AllToAll:
    pass


Connectivity = Union[FiniteRange, AllToAll]


@dataclass(frozen=True)
class DisorderSpec:
    """Half-widths of the uniform disorder on cavity frequencies and hoppings."""

    delta_omega: float = 0.0
    delta_J: float = 0.0

    def __post_init__(self):
        if self.delta_omega < 0:
            raise ValueError("disorder.delta_omega must be >= 0")
        if self.delta_J < 0:
            raise ValueError("disorder.delta_J must be >= 0")

    @property
    def is_clean(self) -> bool:
        return self.delta_omega == 0 and self.delta_J == 0


@dataclass(frozen=True)
class NetworkSpec:
    N: int
    J: float = 1.0
    connectivity: Connectivity = field(default_factory=AllToAll)
    disorder: DisorderSpec = field(default_factory=DisorderSpec)
    seed: int = 0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")
        if self.J < 0:
            raise ValueError("J must be >= 0")
        conn = self.connectivity
        if isinstance(conn, FiniteRange) and conn.D >= math.ceil(self.N / 2):
            object.__setattr__(self, "connectivity", AllToAll())
        elif not isinstance(conn, (FiniteRange, AllToAll)):
            raise TypeError(f"unsupported connectivity {conn!r}")

    @property
    def is_all_to_all(self) -> bool:
        return isinstance(self.connectivity, AllToAll)

    @property
    def D(self) -> int | None:
        """Neighbour count per side, None for all-to-all."""
        return None if self.is_all_to_all else self.connectivity.D

    def to_dict(self) -> dict:
        if self.is_all_to_all:
            conn = {"type": "all_to_all"}
        else:
            conn = {"type": "finite_range", "D": self.connectivity.D}
        return {
            "N": self.N,
            "J": self.J,
            "connectivity": conn,
            "disorder": {
                "delta_omega": self.disorder.delta_omega,
                "delta_J": self.disorder.delta_J,
            },
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            N=d["N"],
            J=d.get("J", 1.0),
            connectivity=connectivity_from_dict(d.get("connectivity", {"type": "all_to_all"})),
            disorder=DisorderSpec(**d.get("disorder", {})),
            seed=d.get("seed", 0),
        )


def connectivity_from_dict(d: dict) -> Connectivity:
    kind = d.get("type")
    if kind == "all_to_all":
        extra = set(d) - {"type"}
        if extra:
            raise ValueError(f"connectivity: unexpected keys {sorted(extra)}")
        return AllToAll()
    if kind == "finite_range":
        extra = set(d) - {"type", "D"}
        if extra:
            raise ValueError(f"connectivity: unexpected keys {sorted(extra)}")
        if "D" not in d:
            raise ValueError("connectivity.D is required for finite_range")
        return FiniteRange(d["D"])
    raise ValueError(f"connectivity.type must be 'finite_range' or 'all_to_all', got {kind!r}")


@dataclass(frozen=True)
class DisorderRealization:
    epsilon_site: np.ndarray
    epsilon_bond: np.ndarray

    def __post_init__(self):
        n = len(self.epsilon_site)
        if self.epsilon_bond.shape != (n, n):
            raise ValueError("epsilon_bond must be N x N")
        if not np.array_equal(self.epsilon_bond, self.epsilon_bond.T):
            raise ValueError("epsilon_bond must be exactly symmetric")
        self.epsilon_site.setflags(write=False)
        self.epsilon_bond.setflags(write=False)

    @classmethod
    def clean(cls, N: int) -> "DisorderRealization":
        return cls(np.zeros(N), np.zeros((N, N)))


def neighbor_offsets(spec: NetworkSpec) -> list[int]:
    """Nonzero ring offsets d (mod N) such that unit i couples to unit i+d."""
    N = spec.N
    if spec.is_all_to_all:
        return list(range(1, N))
    D = spec.connectivity.D
    offs = {d % N for d in range(1, D + 1)} | {(-d) % N for d in range(1, D + 1)}
    offs.discard(0)
    return sorted(offs)


def adjacency(spec: NetworkSpec) -> np.ndarray:
    """Boolean N x N matrix of connected pairs (no self loops)."""
    N = spec.N
    adj = np.zeros((N, N), dtype=bool)
    idx = np.arange(N)
    for d in neighbor_offsets(spec):
        adj[idx, (idx + d) % N] = True
    return adj


def bonds(spec: NetworkSpec) -> list[tuple[int, int]]:
    """Connected pairs (i, j) with i < j, in lexicographic order."""
    i, j = np.nonzero(np.triu(adjacency(spec), 1))
    return list(zip(i.tolist(), j.tolist()))


def make_rng(seed: int, *indices: int) -> np.random.Generator:
    """Counter-based generator keyed by a base seed and any number of indices.

    Streams for different index tuples are independent, so ensemble members
    can be regenerated in any order.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, indices)])
    return np.random.Generator(np.random.Philox(ss))


def sample_disorder(spec: NetworkSpec, rng: np.random.Generator | None = None) -> DisorderRealization:
    """Draw one disorder realization.

    Site shifts are drawn first (one per unit), then one shift per existing
    bond in lexicographic (i < j) order.  Missing bonds stay at zero.  If no
    generator is given, one is derived from ``spec.seed``.
    """
    N = spec.N
    dis = spec.disorder
    if dis.is_clean:
        return DisorderRealization.clean(N)
    if rng is None:
        rng = make_rng(spec.seed)
    eps_site = rng.uniform(-dis.delta_omega, dis.delta_omega, size=N) if dis.delta_omega > 0 else np.zeros(N)
    eps_bond = np.zeros((N, N))
    if dis.delta_J > 0:
        pairs = bonds(spec)
        vals = rng.uniform(-dis.delta_J, dis.delta_J, size=len(pairs))
        for (i, j), v in zip(pairs, vals):
            eps_bond[i, j] = eps_bond[j, i] = v
    return DisorderRealization(eps_site, eps_bond)


def single_particle_hamiltonian(
    spec: NetworkSpec, omega_c: float, realization: DisorderRealization | None = None
) -> np.ndarray:
    """N x N hopping matrix h with H = sum_ij h_ij a_i^dag a_j.

    Diagonal: omega_c + eps_i.  Off-diagonal: -(J + eps_ij) on connected pairs.
    """
    N = spec.N
    if realization is None:
        realization = DisorderRealization.clean(N)
    if realization.epsilon_site.shape != (N,):
        raise ValueError(
            f"disorder realization has {realization.epsilon_site.shape[0]} sites, network has N={N}"
        )
    adj = adjacency(spec)
    h = np.where(adj, -(spec.J + realization.epsilon_bond), 0.0).astype(complex)
    h[np.diag_indices(N)] = omega_c + realization.epsilon_site
    return h
