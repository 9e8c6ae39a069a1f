"""Unit Hamiltonians placed on every node of the network."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True)
class Harmonic:
    omega_c: float = 1.0

    kind = "harmonic"


@dataclass(frozen=True)
class JaynesCummings:
    """Cavity + two-level qubit with rotating-wave coupling g."""

    omega_c: float = 1.0
    omega_q: float = 1.0
    g: float = 0.0

    kind = "jc"


@dataclass(frozen=True)
class BoseHubbard:
    """Cavity with attractive on-site term -(U/2) n^2."""

    omega_c: float = 1.0
    U: float = 0.0

    kind = "bh"

    def __post_init__(self):
        if self.U < 0:
            raise ValueError("U must be >= 0 (attractive convention)")


UnitModel = Union[Harmonic, JaynesCummings, BoseHubbard]


def has_qubits(model: UnitModel) -> bool:
    return isinstance(model, JaynesCummings)
