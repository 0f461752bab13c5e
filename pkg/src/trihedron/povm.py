"""Finite covariant measurements.

A finite POVM is a reference state |B> plus weighted rotations (g_r, c_r), with
sum c_r = 1.  Its elements are ``c_r U(g_r)|b><b|U(g_r)^dagger`` where
``b = sum_j sqrt(2j+1) B^j``.  It is complete on the multiplicity-free space
whenever the rotations reproduce the group orthogonality relations up to the
top spin, which equidistant alpha/gamma plus Gauss-Legendre cos(beta) achieve.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .states import IrrepBlock, ReferenceState, ladder
from .su2 import EulerAngles, GroupGrid, check_label, tensor_grid, wigner_D_matrix

__all__ = [
    "FinitePovm",
    "CompletenessReport",
    "build_isotropic_set",
    "check_discrete_orthogonality",
    "build_finite_povm",
    "check_completeness",
    "minimal_povm_n2",
    "rotated_vectors",
    "povm_to_dict",
    "povm_from_dict",
    "save_povm",
    "load_povm",
]


def rotated_vectors(two_js, blocks, alpha, beta, gamma) -> np.ndarray:
    """Stack of U(g) applied to a block vector, for arrays of angles.

    ``blocks`` is a list of amplitude arrays (one per entry of ``two_js``);
    the result has shape ``alpha.shape + (D,)``.
    """
    parts = [wigner_D_matrix(tj, alpha, beta, gamma) @ np.asarray(amps, complex)
             for tj, amps in zip(two_js, blocks)]
    return np.concatenate(parts, axis=-1)


def build_isotropic_set(n_spins: int) -> GroupGrid:
    """Rotations isotropically distributed up to spin N/2.

    N + 1 equidistant alpha and gamma values, and floor(N/2) + 1 Gauss-Legendre
    nodes in cos(beta), which kills the Legendre moments 1..N.
    """
    if n_spins < 0:
        raise ValueError("n_spins must be >= 0")
    return tensor_grid(n_spins + 1, n_spins // 2 + 1)


def check_discrete_orthogonality(grid: GroupGrid, two_j_max: int,
                                 reference: ReferenceState | None = None) -> float:
    """Largest deviation of the weighted sums from the orthogonality relations.

    Spins j, j' run over two_j_max, two_j_max - 2, ... (one parity class, as on
    a ladder).  Without ``reference`` every index tuple is checked:

        sum_r c_r D^j_{mn}(g_r) conj(D^j'_{m'n'}(g_r)) = delta / (2j+1).

    With ``reference`` the second index is contracted with its blocks, which is
    the form that completeness actually needs.
    """
    check_label(two_j_max)
    w = grid.weights / grid.weights.sum()
    two_js = list(range(two_j_max % 2, two_j_max + 1, 2))
    mats = {tj: wigner_D_matrix(tj, grid.alpha, grid.beta, grid.gamma) for tj in two_js}
    if reference is not None:
        mats = {tj: (mats[tj] @ reference.block(tj).amps)[..., None] for tj in two_js}
    worst = 0.0
    for tj in two_js:
        for tk in two_js:
            s = np.einsum("r,rab,rcd->abcd", w, mats[tj], mats[tk].conj())
            if tj == tk:
                na, nb = s.shape[0], s.shape[1]
                target = np.einsum("ac,bd->abcd", np.eye(na), np.eye(nb)) / (tj + 1.0)
                s = s - target
            worst = max(worst, float(np.abs(s).max()))
    return worst


@dataclass(frozen=True)
class FinitePovm:
    n_spins: int
    reference: ReferenceState
    grid: GroupGrid

    def __post_init__(self):
        if self.reference.n_spins != self.n_spins:
            raise ValueError("reference state is on a different ladder")
        # the weights need not sum to one; check_completeness reports any deficit
        if np.any(self.grid.weights <= 0):
            raise ValueError("POVM weights must be positive")

    def __len__(self) -> int:
        return len(self.grid)

    @property
    def outcomes(self) -> list[tuple[EulerAngles, float]]:
        return self.grid.nodes

    @property
    def dim(self) -> int:
        return self.reference.dim

    def outcome_vectors(self) -> np.ndarray:
        """Rows are U(g_r) b, with b carrying the sqrt(2j+1) factors."""
        ref = self.reference
        blocks = [math.sqrt(b.two_j + 1.0) * b.amps for b in ref.blocks]
        return rotated_vectors(ref.two_js, blocks, self.grid.alpha, self.grid.beta, self.grid.gamma)


@dataclass(frozen=True)
class CompletenessReport:
    dimension: int
    residual_norm: float
    is_projective: bool
    pairwise_residual: float

    def as_dict(self) -> dict:
        return {"dimension": self.dimension, "residual_norm": self.residual_norm,
                "is_projective": self.is_projective,
                "pairwise_residual": self.pairwise_residual}


def build_finite_povm(n_spins: int, reference: ReferenceState) -> FinitePovm:
    return FinitePovm(n_spins, reference, build_isotropic_set(n_spins))


def check_completeness(p: FinitePovm, projective_tol: float = 1e-10) -> CompletenessReport:
    """Max-abs residual of sum_r O_r - I, and of O_r O_s - delta_rs O_r."""
    vecs = p.outcome_vectors()
    c = p.grid.weights
    total = np.einsum("r,ra,rb->ab", c, vecs, vecs.conj())
    residual = float(np.abs(total - np.eye(p.dim)).max())

    # O_r O_s = c_r c_s <b_r|b_s> |b_r><b_s|; max-abs entry factorises
    gram = vecs.conj() @ vecs.T
    peak = np.abs(vecs).max(axis=1)
    pair = np.outer(c, c) * np.abs(gram) * np.outer(peak, peak)
    norms2 = gram.diagonal().real
    np.fill_diagonal(pair, np.abs(c * c * norms2 - c) * peak * peak)
    pairwise = float(pair.max())
    return CompletenessReport(p.dim, residual, pairwise <= projective_tol, pairwise)


def minimal_povm_n2() -> FinitePovm:
    """Four-outcome von Neumann measurement for two spins.

    Seed (sqrt(3)/2)|1,1> + (1/2)|0,0>; the rotations are the identity and
    three elements with alpha_r = 2 pi (r-1)/3, gamma_r = pi - alpha_r and
    cos(beta) = -1/3, each with weight 1/4.
    """
    ref = ReferenceState(2, [IrrepBlock.basis(0, 0), IrrepBlock.basis(2, 2)])
    alpha = np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3, 0.0])
    gamma = np.array([np.pi, np.pi - 2 * np.pi / 3, np.pi - 4 * np.pi / 3, 0.0])
    beta = np.array([math.acos(-1.0 / 3.0)] * 3 + [0.0])
    grid = GroupGrid(alpha, beta, np.mod(gamma, 2 * np.pi), np.full(4, 0.25))
    return FinitePovm(2, ref, grid)


# --------------------------------------------------------------------------
# JSON export


def povm_to_dict(p: FinitePovm, report: CompletenessReport | None = None) -> dict:
    doc = {
        "n_spins": p.n_spins,
        "reference": [
            {"two_j": b.two_j, "amps": [[float(z.real), float(z.imag)] for z in b.amps]}
            for b in p.reference.blocks
        ],
        "outcomes": [
            {"alpha": float(a), "beta": float(b), "gamma": float(c), "weight": float(w)}
            for a, b, c, w in zip(p.grid.alpha, p.grid.beta, p.grid.gamma, p.grid.weights)
        ],
    }
    if report is not None:
        doc["completeness"] = report.as_dict()
    return doc


def povm_from_dict(doc: dict) -> FinitePovm:
    n = int(doc["n_spins"])
    blocks = [IrrepBlock(int(b["two_j"]), np.array([complex(re, im) for re, im in b["amps"]]))
              for b in doc["reference"]]
    blocks.sort(key=lambda b: b.two_j)
    if [b.two_j for b in blocks] != ladder(n):
        raise ValueError("reference blocks do not match the ladder of n_spins")
    out = doc["outcomes"]
    grid = GroupGrid(*(np.array([o[k] for o in out], dtype=float)
                       for k in ("alpha", "beta", "gamma", "weight")))
    return FinitePovm(n, ReferenceState(n, blocks), grid)


def save_povm(p: FinitePovm, path, report: CompletenessReport | None = None) -> None:
    # float repr is the shortest string that round-trips (at most 17 digits)
    Path(path).write_text(json.dumps(povm_to_dict(p, report), indent=1))


def load_povm(path) -> FinitePovm:
    return povm_from_dict(json.loads(Path(path).read_text()))
