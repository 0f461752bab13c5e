import math

import numpy as np
import pytest

from trihedron.channel import (
    IncompletePovmError,
    avg_t_quadrature,
    error_h,
    outcome_probs,
    overlap,
    simulate,
)
from trihedron.fidelity import avg_t_general, optimal_protocol, optimal_signal_state
from trihedron.povm import FinitePovm, build_finite_povm, minimal_povm_n2
from trihedron.states import (
    IrrepBlock,
    ReducedWeights,
    SignalState,
    ladder,
    optimal_reference,
    random_reference_state,
    random_signal_state,
    signal_from_weights,
)
from trihedron.su2 import (
    IDENTITY,
    EulerAngles,
    GroupGrid,
    haar_sample,
    inverse,
    rotation_matrix,
    su2_quadrature_grid,
    wigner_D,
)

LAMBDA_2 = (3 + math.sqrt(57)) / 12


def _optimal(n):
    sol = optimal_protocol(n)
    return sol, optimal_signal_state(sol)


def _top_irrep_only(n):
    blocks = [IrrepBlock.basis(tj, tj) if tj == n else IrrepBlock(tj, np.zeros(tj + 1))
              for tj in ladder(n)]
    return SignalState(n, blocks)


def _mirrored_minimal():
    p = minimal_povm_n2()
    beta = p.grid.beta.copy()
    beta[:3] = math.acos(1 / 3)
    g = p.grid
    return FinitePovm(2, p.reference, GroupGrid(g.alpha, beta, g.gamma, g.weights))


# -- overlap --------------------------------------------------------------------------


def test_overlap_at_identity(rng):
    for n in (1, 2, 4):
        b = random_reference_state(n, rng)
        c = rng.normal(size=len(ladder(n))) + 0j
        w = ReducedWeights(tuple(ladder(n)), c / np.linalg.norm(c))
        a = signal_from_weights(w, b)
        expect = sum(math.sqrt(tj + 1) * cj for tj, cj in zip(w.two_js, w.c))
        assert overlap(b, a, IDENTITY) == pytest.approx(expect, abs=1e-13)


def test_overlap_corner_closed_form(rng):
    for n in (2, 3, 5):
        sol, a = _optimal(n)
        for _ in range(10):
            g = haar_sample(rng)
            expect = sum(
                math.sqrt(tj + 1) * c * np.exp(-0.5j * tj * (g.alpha + g.gamma))
                * math.cos(g.beta / 2) ** tj
                for tj, c in zip(sol.weights.two_js, sol.weights.c))
            assert overlap(optimal_reference(n), a, g) == pytest.approx(expect, abs=1e-12)


def test_overlap_integrates_to_one(rng):
    for n in (1, 2, 3):
        b = random_reference_state(n, rng)
        c = rng.normal(size=len(ladder(n))) + 1j * rng.normal(size=len(ladder(n)))
        a = signal_from_weights(ReducedWeights(tuple(ladder(n)), c / np.linalg.norm(c)), b)
        grid = su2_quadrature_grid(n + 2)
        total = sum(w * abs(overlap(b, a, g)) ** 2 for g, w in grid.nodes)
        assert total == pytest.approx(1.0, abs=1e-12)


# -- error h ------------------------------------------------------------------------


def test_error_h_examples(rng):
    g = haar_sample(rng)
    assert error_h(g, g) == pytest.approx(0.0, abs=1e-12)
    assert error_h(EulerAngles(0.0, math.pi, 0.0), IDENTITY) == pytest.approx(8.0)


def test_error_h_against_trihedra(rng):
    for _ in range(100):
        g, gp = haar_sample(rng), haar_sample(rng)
        r, rp = rotation_matrix(g), rotation_matrix(gp)
        direct = sum(np.sum((r[:, k] - rp[:, k]) ** 2) for k in range(3))
        assert error_h(g, gp) == pytest.approx(direct, abs=1e-12)


# -- outcome probabilities --------------------------------------------------------


def test_probs_aligned_with_outcome():
    p = minimal_povm_n2()
    # signal equal to the normalised identity-outcome vector
    b = p.outcome_vectors()[3]
    a = SignalState(2, [IrrepBlock(0, b[:1] / 2), IrrepBlock(2, b[1:] / 2)])
    pr = outcome_probs(p, a, IDENTITY)
    assert int(np.argmax(pr)) == 3
    assert pr[3] == pytest.approx(1.0)


def test_probs_closed_form_n2():
    p = minimal_povm_n2()
    sol, a = _optimal(2)
    c0, c1 = sol.weights.c
    pr = outcome_probs(p, a, IDENTITY)
    expect = [abs(math.sqrt(3) * c1 * wigner_D(2, 2, 2, inverse(g)) + c0) ** 2 / 4
              for g, _ in p.outcomes]
    assert np.allclose(pr, expect, atol=1e-13)


def test_probs_sum_to_one(rng):
    for p in (minimal_povm_n2(), build_finite_povm(3, random_reference_state(3, rng))):
        for _ in range(20):
            pr = outcome_probs(p, random_signal_state(p.n_spins, rng), haar_sample(rng))
            assert pr.sum() == pytest.approx(1.0, abs=1e-12)
            assert pr.min() >= 0.0


# -- simulate ------------------------------------------------------------------------


def test_simulate_deterministic_and_worker_invariant():
    p = minimal_povm_n2()
    _, a = _optimal(2)
    r1 = simulate(p, a, 30000, 7)
    assert r1 == simulate(p, a, 30000, 7)
    assert r1 == simulate(p, a, 30000, 7, workers=4)
    assert r1 != simulate(p, a, 30000, 8)
    assert r1.h_mean == pytest.approx(6 - 2 * r1.t_mean)


def test_simulate_minimal_n2():
    p = minimal_povm_n2()
    _, a = _optimal(2)
    r = simulate(p, a, 200_000, 3)
    assert abs(r.t_mean - LAMBDA_2) <= 4 * r.std_err


def test_simulate_single_irrep():
    n = 4
    J = n / 2
    p = build_finite_povm(n, optimal_reference(n))
    r = simulate(p, _top_irrep_only(n), 200_000, 5)
    assert abs(r.t_mean - J / (J + 1)) <= 4 * r.std_err


def test_simulate_fixed_guess_control(rng):
    p = minimal_povm_n2()
    _, a = _optimal(2)
    r = simulate(p, a, 200_000, 9, fixed_guess=haar_sample(rng))
    assert abs(r.t_mean) <= 4 * r.std_err


def test_simulate_single_shot():
    r = simulate(minimal_povm_n2(), _optimal(2)[1], 1, 0)
    assert r.shots == 1 and r.std_err == 0.0
    assert -1.0 <= r.t_mean <= 3.0


def test_simulate_rejects_bad_input():
    p = minimal_povm_n2()
    with pytest.raises(ValueError):
        simulate(p, _optimal(2)[1], 0, 0)
    with pytest.raises(ValueError):
        simulate(p, _optimal(3)[1], 10, 0)


def test_simulate_incomplete_povm_aborts():
    with pytest.raises(IncompletePovmError):
        simulate(_mirrored_minimal(), _optimal(2)[1], 1000, 0)


# -- quadrature oracle --------------------------------------------------------------


def test_quadrature_examples():
    _, a = _optimal(2)
    assert avg_t_quadrature(a, optimal_reference(2)) == pytest.approx(LAMBDA_2, abs=1e-10)
    only_zero = SignalState(2, [IrrepBlock.basis(0, 0), IrrepBlock(2, np.zeros(3))])
    assert avg_t_quadrature(only_zero, optimal_reference(2)) == pytest.approx(0.0, abs=1e-14)


def test_quadrature_equals_general(rng):
    for n in (1, 2, 3, 4):
        for _ in range(50):
            a, b = random_signal_state(n, rng), random_reference_state(n, rng)
            assert abs(avg_t_quadrature(a, b) - avg_t_general(a, b)) <= 1e-10
