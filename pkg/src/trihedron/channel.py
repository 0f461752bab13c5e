"""Monte-Carlo play of the frame-transmission protocol, plus a quadrature oracle.

Alice draws a Haar-random rotation g and sends U(g)|A>; Bob measures with a
finite covariant POVM and guesses g_r.  The score of one round is
t = tr U1(g_r^-1 g), the error h = 6 - 2 t.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .povm import FinitePovm, rotated_vectors
from .states import LadderMismatch, ReferenceState, SignalState
from .su2 import (
    EulerAngles,
    compose,
    euler_to_quaternion,
    haar_sample,
    inverse,
    su2_quadrature_grid,
    trace_rep1,
    wigner_D_matrix,
)

__all__ = [
    "SimResult",
    "IncompletePovmError",
    "overlap",
    "error_h",
    "outcome_probs",
    "simulate",
    "avg_t_quadrature",
]

CHUNK = 8192


class IncompletePovmError(RuntimeError):
    """Outcome probabilities do not sum to one."""


@dataclass(frozen=True)
class SimResult:
    shots: int
    t_mean: float
    h_mean: float
    std_err: float
    seed: int


def overlap(b: ReferenceState, a: SignalState, g: EulerAngles) -> complex:
    """<B|U(g)|A> with the sqrt(2j+1) weights of the reference."""
    if a.n_spins != b.n_spins:
        raise LadderMismatch(f"N={a.n_spins} vs N={b.n_spins}")
    total = 0.0 + 0.0j
    for bb, ab in zip(b.blocks, a.blocks):
        D = wigner_D_matrix(bb.two_j, g.alpha, g.beta, g.gamma)
        total += math.sqrt(bb.two_j + 1.0) * np.vdot(bb.amps, D @ ab.amps)
    return complex(total)


def error_h(g: EulerAngles, gp: EulerAngles) -> float:
    """sum_a |n_a(g) - n_a(g')|^2 = 6 - 2 tr U1(g'^-1 g)."""
    return 6.0 - 2.0 * trace_rep1(compose(inverse(gp), g))


def _signal_vectors(a: SignalState, alpha, beta, gamma) -> np.ndarray:
    return rotated_vectors(a.two_js, [blk.amps for blk in a.blocks], alpha, beta, gamma)


def _probabilities(p: FinitePovm, seeds: np.ndarray, states: np.ndarray) -> np.ndarray:
    amps = states @ seeds.conj().T
    return p.grid.weights * (amps.real ** 2 + amps.imag ** 2)


def outcome_probs(p: FinitePovm, a: SignalState, g: EulerAngles) -> np.ndarray:
    """p_r = c_r |<b| U(g_r)^dagger U(g) |A>|^2."""
    if a.n_spins != p.n_spins:
        raise LadderMismatch(f"N={a.n_spins} vs N={p.n_spins}")
    state = _signal_vectors(a, g.alpha, g.beta, g.gamma)
    return _probabilities(p, p.outcome_vectors(), state[None, :])[0]


def _run_chunk(p: FinitePovm, a: SignalState, seeds: np.ndarray, guess_q: np.ndarray,
               n: int, seed: int, index: int, fixed_q: np.ndarray | None):
    rng = np.random.default_rng([seed, index])
    alpha, beta, gamma = haar_sample(rng, n)
    u = rng.random(n)
    probs = _probabilities(p, seeds, _signal_vectors(a, alpha, beta, gamma))
    cum = np.cumsum(probs, axis=1)
    mass = cum[:, -1]
    deficit = float(np.abs(mass - 1.0).max())
    if deficit > 1e-6:
        raise IncompletePovmError(f"probability mass off by {deficit:.3g}; POVM is not complete")
    r = np.minimum((cum < (u * mass)[:, None]).sum(axis=1), len(p) - 1)
    q = euler_to_quaternion(alpha, beta, gamma)
    guess = guess_q[r] if fixed_q is None else fixed_q[None, :]
    # tr R(g_r^-1 g) = 4 w^2 - 1, w the scalar part of the relative quaternion
    w = np.einsum("ij,ij->i", guess, q)
    t = 4.0 * w * w - 1.0
    return float(t.sum()), float((t * t).sum()), n


def simulate(p: FinitePovm, a: SignalState, shots: int, seed: int,
             workers: int = 1, fixed_guess: EulerAngles | None = None) -> SimResult:
    """Estimate <t> and <h> from ``shots`` independent rounds.

    Shots are cut into fixed-size chunks, chunk k drawing from the generator
    seeded with (seed, k); the result is therefore the same for any number of
    ``workers``.  ``fixed_guess`` replaces Bob's guess by a constant rotation
    (a control that must score zero on average).
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if a.n_spins != p.n_spins:
        raise LadderMismatch(f"N={a.n_spins} vs N={p.n_spins}")
    seeds = p.outcome_vectors()
    guess_q = euler_to_quaternion(p.grid.alpha, p.grid.beta, p.grid.gamma)
    fixed_q = None if fixed_guess is None else fixed_guess.quaternion()
    sizes = [CHUNK] * (shots // CHUNK) + ([shots % CHUNK] if shots % CHUNK else [])
    jobs = [(p, a, seeds, guess_q, n, seed, k, fixed_q) for k, n in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: _run_chunk(*job), jobs))
    else:
        parts = [_run_chunk(*job) for job in jobs]

    s1 = math.fsum(x[0] for x in parts)
    s2 = math.fsum(x[1] for x in parts)
    mean = s1 / shots
    if shots > 1:
        var = max(s2 - shots * mean * mean, 0.0) / (shots - 1)
        std_err = math.sqrt(var / shots)
    else:
        std_err = 0.0
    return SimResult(shots, mean, 6.0 - 2.0 * mean, std_err, seed)


def avg_t_quadrature(a: SignalState, b: ReferenceState) -> float:
    """<t> = integral of |<B|U(g)|A>|^2 tr U1(g) dg on an exact grid.

    The integrand couples spins up to N/2 + 1, so a grid exact to that spin
    integrates it to roundoff.
    """
    if a.n_spins != b.n_spins:
        raise LadderMismatch(f"N={a.n_spins} vs N={b.n_spins}")
    grid = su2_quadrature_grid(a.n_spins + 2)
    states = _signal_vectors(a, grid.alpha, grid.beta, grid.gamma)
    amp = states @ b.vector().conj()
    cb = np.cos(grid.beta)
    tr = cb + (1.0 + cb) * np.cos(grid.alpha + grid.gamma)
    return float(np.sum(grid.weights * (amp.real ** 2 + amp.imag ** 2) * tr))
