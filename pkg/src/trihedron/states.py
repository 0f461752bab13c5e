"""Amplitude containers for the signal (Alice) and reference (Bob) states.

Both live on the multiplicity-free space ``sum_j V_j`` with one copy of each
irrep on the ladder of N spins: j = N/2, N/2 - 1, ... down to 0 or 1/2.
Blocks are stored in ascending j; amplitudes in ascending m.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .su2 import check_label

__all__ = [
    "ladder",
    "IrrepBlock",
    "ReferenceState",
    "SignalState",
    "ReducedWeights",
    "LadderMismatch",
    "optimal_reference",
    "random_reference_state",
    "random_signal_state",
    "signal_from_weights",
]


class LadderMismatch(ValueError):
    """Two states do not live on the same irrep ladder."""


def ladder(n_spins: int) -> list[int]:
    """Doubled spins of the irreps present for ``n_spins``, ascending."""
    if n_spins < 0:
        raise ValueError("n_spins must be >= 0")
    return list(range(n_spins % 2, n_spins + 1, 2))


@dataclass(frozen=True)
class IrrepBlock:
    two_j: int
    amps: np.ndarray

    def __post_init__(self):
        check_label(self.two_j)
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (self.two_j + 1,):
            raise ValueError(f"block two_j={self.two_j} needs {self.two_j + 1} amplitudes")
        if not np.all(np.isfinite(amps)):
            raise ValueError("non-finite amplitude")
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self) -> int:
        return self.two_j + 1

    def norm2(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def component(self, two_m: int) -> complex:
        check_label(self.two_j, two_m)
        return complex(self.amps[(two_m + self.two_j) // 2])

    @classmethod
    def basis(cls, two_j: int, two_m: int) -> "IrrepBlock":
        check_label(two_j, two_m)
        amps = np.zeros(two_j + 1, complex)
        amps[(two_m + two_j) // 2] = 1.0
        return cls(two_j, amps)


class _LadderState:
    """Shared machinery: one block per irrep of ``ladder(n_spins)``."""

    def __init__(self, n_spins: int, blocks):
        blocks = tuple(b if isinstance(b, IrrepBlock) else IrrepBlock(*b) for b in blocks)
        if [b.two_j for b in blocks] != ladder(n_spins):
            raise LadderMismatch(
                f"blocks {[b.two_j for b in blocks]} do not match ladder({n_spins})")
        self.n_spins = n_spins
        self.blocks = blocks

    @property
    def two_js(self) -> list[int]:
        return [b.two_j for b in self.blocks]

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    def block(self, two_j: int) -> IrrepBlock:
        for b in self.blocks:
            if b.two_j == two_j:
                return b
        raise KeyError(two_j)

    def _same_ladder(self, other: "_LadderState") -> None:
        if self.n_spins != other.n_spins:
            raise LadderMismatch(f"N={self.n_spins} vs N={other.n_spins}")

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n_spins={self.n_spins}, dim={self.dim})"


class ReferenceState(_LadderState):
    """Bob's seed state without the sqrt(2j+1) factors; every block has unit norm.

    The physical seed vector is ``vector()``, which carries the sqrt(2j+1)
    weights, so that the group orbit of |B><B| integrates to the identity.
    """

    def __init__(self, n_spins: int, blocks, atol: float = 1e-10):
        super().__init__(n_spins, blocks)
        for b in self.blocks:
            if abs(b.norm2() - 1.0) > atol:
                raise ValueError(f"reference block two_j={b.two_j} has norm^2 {b.norm2()}")

    def vector(self) -> np.ndarray:
        return np.concatenate([np.sqrt(b.two_j + 1.0) * b.amps for b in self.blocks])


class SignalState(_LadderState):
    """Alice's state; unit norm overall."""

    def __init__(self, n_spins: int, blocks, atol: float = 1e-10):
        super().__init__(n_spins, blocks)
        total = sum(b.norm2() for b in self.blocks)
        if abs(total - 1.0) > atol:
            raise ValueError(f"signal state has norm^2 {total}")

    def vector(self) -> np.ndarray:
        return np.concatenate([b.amps for b in self.blocks])


@dataclass(frozen=True)
class ReducedWeights:
    """Irrep weights C^j (ascending j) with sum |C^j|^2 = 1."""

    two_js: tuple[int, ...]
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c)
        if c.shape != (len(self.two_js),):
            raise ValueError("one weight per irrep required")
        if abs(float(np.vdot(c, c).real) - 1.0) > 1e-10:
            raise ValueError("weights must have unit norm")
        object.__setattr__(self, "c", c)


def optimal_reference(n_spins: int) -> ReferenceState:
    """The reference with |j, j> in every block."""
    return ReferenceState(n_spins, [IrrepBlock.basis(tj, tj) for tj in ladder(n_spins)])


def signal_from_weights(weights: ReducedWeights, reference: ReferenceState) -> SignalState:
    """A^j_m = C^j B^j_m."""
    if tuple(reference.two_js) != tuple(weights.two_js):
        raise LadderMismatch("weights and reference are on different ladders")
    blocks = [IrrepBlock(b.two_j, c * b.amps) for c, b in zip(weights.c, reference.blocks)]
    return SignalState(reference.n_spins, blocks)


def _random_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_reference_state(n_spins: int, rng: np.random.Generator) -> ReferenceState:
    """Independent Haar-random unit vector in every block."""
    return ReferenceState(n_spins, [IrrepBlock(tj, _random_unit(rng, tj + 1))
                                    for tj in ladder(n_spins)])


def random_signal_state(n_spins: int, rng: np.random.Generator) -> SignalState:
    two_js = ladder(n_spins)
    v = _random_unit(rng, sum(tj + 1 for tj in two_js))
    blocks, start = [], 0
    for tj in two_js:
        blocks.append(IrrepBlock(tj, v[start:start + tj + 1]))
        start += tj + 1
    return SignalState(n_spins, blocks)
