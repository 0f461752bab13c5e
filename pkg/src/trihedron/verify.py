"""Invariant suite behind ``trihedron verify``.

Each check returns a ``CheckResult``.  The Clebsch-Gordan routine and the
quadrature-grid factory are parameters so that faults can be injected.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import channel, fidelity, povm, states, su2

__all__ = ["CheckResult", "run_checks", "GROUPS", "corrupted_cg", "undersized_grid"]


@dataclass(frozen=True)
class CheckResult:
    group: str
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def corrupted_cg(*args) -> float:
    """CG with one coefficient sign-flipped; for fault-injection runs."""
    val = su2.clebsch_gordan(*args)
    return -val if args == (2, 2, 2, 0, 2, 2) else val


def undersized_grid(two_j_max: int) -> su2.GroupGrid:
    """A grid one angle short of exactness; for fault-injection runs."""
    return su2.tensor_grid(max(two_j_max, 1), (two_j_max + 3) // 2)


# --------------------------------------------------------------------------
# su2


def cg_orthogonality(cg=su2.clebsch_gordan, two_max: int = 6) -> float:
    worst = 0.0
    for t1 in range(two_max + 1):
        for t2 in range(two_max + 1):
            prod = [(m1, m2) for m1 in range(-t1, t1 + 1, 2) for m2 in range(-t2, t2 + 1, 2)]
            coupled = [(J, M) for J in range(abs(t1 - t2), t1 + t2 + 1, 2)
                       for M in range(-J, J + 1, 2)]
            U = np.array([[cg(t1, m1, t2, m2, J, M) for (J, M) in coupled] for (m1, m2) in prod])
            worst = max(worst, float(np.abs(U.T @ U - np.eye(len(coupled))).max()))
    return worst


def homomorphism(rng, pairs: int = 50, two_max: int = 5) -> float:
    worst = 0.0
    for _ in range(pairs):
        g1, g2 = su2.haar_sample(rng), su2.haar_sample(rng)
        g12 = su2.compose(g1, g2)
        for tj in range(two_max + 1):
            lhs = su2.wigner_D_matrix(tj, *g12.as_tuple())
            rhs = su2.wigner_D_matrix(tj, *g1.as_tuple()) @ su2.wigner_D_matrix(tj, *g2.as_tuple())
            err = np.abs(lhs - rhs).max()
            if tj % 2:
                # canonical angles fix the rotation, not the SU(2) sign
                err = min(err, np.abs(lhs + rhs).max())
            worst = max(worst, float(err))
    return worst


def unitarity(rng, samples: int = 50, two_max: int = 8) -> float:
    worst = 0.0
    for _ in range(samples):
        g = su2.haar_sample(rng)
        for tj in range(two_max + 1):
            D = su2.wigner_D_matrix(tj, *g.as_tuple())
            worst = max(worst, float(np.abs(D @ D.conj().T - np.eye(tj + 1)).max()))
    return worst


def convention_lock(rng, samples: int = 1000) -> float:
    a, b, c = su2.haar_sample(rng, samples)
    tr = np.trace(su2.wigner_D_matrix(2, a, b, c), axis1=-2, axis2=-1)
    closed = np.cos(b) + (1 + np.cos(b)) * np.cos(a + c)
    return float(np.abs(tr - closed).max())


def quadrature_exactness(grid_fn=su2.su2_quadrature_grid, two_max: int = 4) -> float:
    worst = 0.0
    for tj in range(1, two_max + 1):
        worst = max(worst, povm.check_discrete_orthogonality(grid_fn(tj), tj))
    return worst


# --------------------------------------------------------------------------
# fidelity


def domination(rng, n_values=(2, 3, 4, 6), count: int = 200) -> tuple[float, float]:
    """Largest excess of |M_B| over M_op, and of lambda(M_B) over lambda_op."""
    entry, eig = -np.inf, -np.inf
    for n in n_values:
        mop = fidelity.build_M_op(n)
        lam_op = fidelity.max_eigen(mop)[0]
        for _ in range(count):
            mb = fidelity.build_M_B(states.random_reference_state(n, rng))
            entry = max(entry, float(np.max(np.abs(mb.dense()) - mop.dense())))
            eig = max(eig, fidelity.max_eigen(mb)[0] - lam_op)
    return entry, eig


def oracle_equivalence(rng, n_values=(1, 2, 3, 4), count: int = 50) -> float:
    worst = 0.0
    for n in n_values:
        for _ in range(count):
            a = states.random_signal_state(n, rng)
            b = states.random_reference_state(n, rng)
            worst = max(worst, abs(fidelity.avg_t_general(a, b) - channel.avg_t_quadrature(a, b)))
    return worst


def form_equivalence(rng, n_values=(1, 2, 3, 4, 5), count: int = 20) -> float:
    worst = 0.0
    for n in n_values:
        for _ in range(count):
            b = states.random_reference_state(n, rng)
            m1, m2 = fidelity.build_M_B(b), fidelity.build_M_B_cg(b)
            worst = max(worst, float(np.abs(m1.dense() - m2.dense()).max()))
    return worst


def protocol_shape(n_max: int = 60) -> bool:
    lams = [fidelity.optimal_protocol(n).lambda_op for n in range(1, n_max + 1)]
    h_ok = all(0.0 < 6.0 - 2.0 * x <= 6.0 for x in lams)
    return all(b >= a for a, b in zip(lams, lams[1:])) and max(lams) < 3.0 and h_ok


def perron_positive(n_values=range(0, 201)) -> float:
    return min(float(fidelity.optimal_protocol(n).weights.c.min()) for n in n_values)


# --------------------------------------------------------------------------
# povm / channel


def povm_completeness(n_values=(0, 1, 2, 3, 4, 5, 6, 8)) -> float:
    worst = povm.check_completeness(povm.minimal_povm_n2()).residual_norm
    for n in n_values:
        p = povm.build_finite_povm(n, states.optimal_reference(n))
        worst = max(worst, povm.check_completeness(p).residual_norm)
    return worst


def isotropic_sharpness(n_values=(1, 2, 3, 4, 6)) -> float:
    return min(povm.check_discrete_orthogonality(povm.build_isotropic_set(n), n + 2)
               for n in n_values)


def probability_vectors(rng, samples: int = 100) -> tuple[float, float]:
    """Worst |sum p - 1| and most negative entry over random states and rotations."""
    worst_sum, most_neg = 0.0, 0.0
    cases = [povm.minimal_povm_n2()] + [
        povm.build_finite_povm(n, states.random_reference_state(n, rng)) for n in (1, 3, 4)]
    for p in cases:
        for _ in range(samples):
            a = states.random_signal_state(p.n_spins, rng)
            pr = channel.outcome_probs(p, a, su2.haar_sample(rng))
            worst_sum = max(worst_sum, abs(float(pr.sum()) - 1.0))
            most_neg = min(most_neg, float(pr.min()))
    return worst_sum, most_neg


def determinism() -> bool:
    p = povm.minimal_povm_n2()
    a = fidelity.optimal_signal_state(fidelity.optimal_protocol(2))
    return channel.simulate(p, a, 20000, 11) == channel.simulate(p, a, 20000, 11, workers=3)


def h_range(rng, samples: int = 2000) -> tuple[float, float]:
    hs = [channel.error_h(su2.haar_sample(rng), su2.haar_sample(rng)) for _ in range(samples)]
    return min(hs), max(hs)


# --------------------------------------------------------------------------


GROUPS = ("su2", "fidelity", "povm", "channel")


def run_checks(cg: Callable = su2.clebsch_gordan,
               grid_fn: Callable = su2.su2_quadrature_grid,
               seed: int = 2024) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results: list[CheckResult] = []

    def record(group, name, fn):
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(group, name, bool(passed), detail, time.perf_counter() - t0))

    def bound(value, tol):
        return value <= tol, f"{value:.3e} (limit {tol:.0e})"

    def floor(value, tol, label):
        return value > tol, f"{label} {value:.3e} (must exceed {tol:.0e})"

    record("su2", "cg-orthogonality", lambda: bound(cg_orthogonality(cg), 1e-12))
    record("su2", "homomorphism", lambda: bound(homomorphism(rng), 1e-11))
    record("su2", "unitarity", lambda: bound(unitarity(rng), 1e-12))
    record("su2", "convention-lock", lambda: bound(convention_lock(rng), 1e-12))
    record("su2", "quadrature-exactness", lambda: bound(quadrature_exactness(grid_fn), 1e-13))

    def dom():
        entry, eig = domination(rng)
        return entry <= 1e-10 and eig <= 1e-10, f"entry excess {entry:.2e}, eigen excess {eig:.2e}"

    record("fidelity", "domination", dom)
    record("fidelity", "oracle-equivalence", lambda: bound(oracle_equivalence(rng), 1e-10))
    record("fidelity", "form-equivalence", lambda: bound(form_equivalence(rng), 1e-11))
    record("fidelity", "protocol-monotone", lambda: (protocol_shape(), "N = 1..60"))
    record("fidelity", "perron-positive",
           lambda: floor(perron_positive(), 0.0, "min weight"))

    record("povm", "completeness", lambda: bound(povm_completeness(), 1e-10))
    record("povm", "isotropic-sharpness",
           lambda: floor(isotropic_sharpness(), 1e-6, "violation one spin up"))

    def probs():
        s, neg = probability_vectors(rng)
        return s <= 1e-10 and neg >= -1e-14, f"|sum-1| {s:.2e}, min entry {neg:.2e}"

    record("channel", "probability", probs)
    record("channel", "determinism", lambda: (determinism(), "same seed, 1 vs 3 workers"))
    def h_bounds():
        lo, hi = h_range(rng)
        return lo >= 0.0 and hi <= 8.0, f"h in [{lo:.3f}, {hi:.3f}]"

    record("channel", "h-range", h_bounds)
    return results
