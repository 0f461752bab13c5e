import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trihedron.channel import avg_t_quadrature
from trihedron.fidelity import (
    TridiagSym,
    asymptotic_fit,
    avg_t_general,
    avg_t_p1,
    avg_t_reduced,
    bounds,
    build_M_B,
    build_M_B_cg,
    build_M_op,
    fit_residuals,
    m_tensor,
    m_tensor_block,
    max_eigen,
    optimal_protocol,
    optimal_signal_state,
    sturm_count,
    time_reverse,
)
from trihedron.states import (
    IrrepBlock,
    LadderMismatch,
    ReducedWeights,
    SignalState,
    ladder,
    optimal_reference,
    random_reference_state,
    random_signal_state,
    signal_from_weights,
)
from trihedron.su2 import su2_quadrature_grid, wigner_D_matrix

LAMBDA_2 = (3 + math.sqrt(57)) / 12
LAMBDA_3 = (14 + math.sqrt(466)) / 30
# numpy.linalg.eigvalsh on the dense 6x6 matrix for N = 10 (top spin 5)
LAMBDA_10_DENSE = 2.2442633225937456

seeds = st.integers(0, 2**32 - 1)


# -- time reversal ----------------------------------------------------------


@given(st.integers(0, 8), seeds)
def test_time_reverse_twice(two_j, seed):
    rng = np.random.default_rng(seed)
    b = IrrepBlock(two_j, rng.normal(size=two_j + 1) + 1j * rng.normal(size=two_j + 1))
    twice = time_reverse(time_reverse(b))
    assert np.allclose(twice.amps, (-1) ** two_j * b.amps)


def test_time_reverse_scalar_block():
    assert time_reverse(IrrepBlock(0, [2 - 3j])).amps.tolist() == [2 + 3j]


def test_time_reverse_phase_choice_irrelevant(rng):
    for n in range(1, 5):
        for _ in range(10):
            a, b = random_signal_state(n, rng), random_reference_state(n, rng)
            assert avg_t_p1(a, b, "literal") == pytest.approx(avg_t_p1(a, b, "standard"), abs=1e-13)


# -- M tensor -----------------------------------------------------------------


def test_m_tensor_selection_rule():
    assert not m_tensor_block(4, 0).any()
    assert not m_tensor_block(0, 4).any()
    assert m_tensor(6, 2, 2, 2, 2, 2) == 0.0


def test_m_tensor_corner_gives_single_irrep_value():
    for two_j in range(1, 9):
        j = two_j / 2
        assert m_tensor(two_j, two_j, two_j, two_j, two_j, two_j) == pytest.approx(j / (j + 1))


def test_m_tensor_matches_quadrature():
    grid = su2_quadrature_grid(6)
    cb = np.cos(grid.beta)
    tr = cb + (1 + cb) * np.cos(grid.alpha + grid.gamma)
    for two_l in range(4):
        for two_j in range(4):
            if (two_l - two_j) % 2:
                continue
            Dj = wigner_D_matrix(two_j, grid.alpha, grid.beta, grid.gamma)
            Dl = wigner_D_matrix(two_l, grid.alpha, grid.beta, grid.gamma)
            # [n, m, n', m'] <- D^j_{m'm} conj(D^l_{n'n})
            quad = np.einsum("g,g,gqm,gpn->nmpq", grid.weights, tr, Dj, Dl.conj())
            quad *= math.sqrt((two_l + 1) * (two_j + 1))
            assert np.abs(quad - m_tensor_block(two_l, two_j)).max() < 1e-11


# -- <t> in its three forms --------------------------------------------------------


def test_avg_t_n0():
    a = SignalState(0, [IrrepBlock(0, [1.0])])
    assert avg_t_general(a, optimal_reference(0)) == 0.0


@pytest.mark.parametrize("n", range(1, 9))
def test_single_irrep_value(n):
    J = n / 2
    blocks = [IrrepBlock.basis(tj, tj) if tj == n else IrrepBlock(tj, np.zeros(tj + 1))
              for tj in ladder(n)]
    a = SignalState(n, blocks)
    assert avg_t_general(a, optimal_reference(n)) == pytest.approx(J / (J + 1), abs=1e-13)


@given(st.integers(1, 4), seeds)
@settings(max_examples=40, deadline=None)
def test_general_equals_quadrature(n, seed):
    rng = np.random.default_rng(seed)
    a, b = random_signal_state(n, rng), random_reference_state(n, rng)
    t = avg_t_general(a, b)
    assert t == pytest.approx(avg_t_quadrature(a, b), abs=1e-10)
    assert -1.0 - 1e-12 <= t <= 3.0 + 1e-12


@given(st.integers(1, 6), seeds)
@settings(max_examples=40, deadline=None)
def test_general_equals_projector_form(n, seed):
    rng = np.random.default_rng(seed)
    a, b = random_signal_state(n, rng), random_reference_state(n, rng)
    assert avg_t_general(a, b) == pytest.approx(avg_t_p1(a, b), abs=1e-12)


def test_ladder_mismatch():
    rng = np.random.default_rng(0)
    with pytest.raises(LadderMismatch):
        avg_t_general(random_signal_state(2, rng), random_reference_state(4, rng))


# -- M_B -----------------------------------------------------------------------


@pytest.mark.parametrize("n", range(0, 9))
def test_M_B_at_optimal_reference(n):
    m = build_M_B(optimal_reference(n))
    j = np.array(ladder(n)) / 2
    assert np.allclose(m.diag, j / (j + 1), atol=1e-13)
    assert np.allclose(m.off, np.sqrt((2 * j[:-1] + 1) / (2 * j[:-1] + 3)), atol=1e-13)


@given(st.integers(1, 7), seeds)
@settings(max_examples=60, deadline=None)
def test_M_B_bounds_and_routes(n, seed):
    b = random_reference_state(n, np.random.default_rng(seed))
    m, m_cg = build_M_B(b), build_M_B_cg(b)
    mop = build_M_op(n)
    assert np.all(m.diag >= 0) and np.all(m.off >= 0)
    assert np.all(m.diag <= mop.diag + 1e-12)
    assert np.all(m.off <= mop.off + 1e-12)
    assert np.abs(m.dense() - m_cg.dense()).max() < 1e-11
    assert max_eigen(m)[0] <= max_eigen(mop)[0] + 1e-10


def test_reduced_form_examples():
    mop2 = build_M_op(2)
    assert avg_t_reduced(np.array([0.0, 1.0]), mop2) == pytest.approx(0.5)
    c = np.array([1.0, 1.0]) / math.sqrt(2)
    assert avg_t_reduced(c, mop2) == pytest.approx((0 + 0.5 + 2 * math.sqrt(1 / 3)) / 2)
    for n in (3, 6):
        J = n / 2
        e = np.zeros(len(ladder(n)))
        e[-1] = 1.0
        assert avg_t_reduced(e, build_M_op(n)) == pytest.approx(J / (J + 1))
    with pytest.raises(ValueError):
        avg_t_reduced(np.ones(3), mop2)


@given(st.integers(1, 5), seeds)
@settings(max_examples=30, deadline=None)
def test_reduced_form_consistent_with_general(n, seed):
    rng = np.random.default_rng(seed)
    b = random_reference_state(n, rng)
    k = len(ladder(n))
    c = rng.normal(size=k) + 1j * rng.normal(size=k)
    w = ReducedWeights(tuple(ladder(n)), c / np.linalg.norm(c))
    a = signal_from_weights(w, b)
    assert avg_t_reduced(w, build_M_B(b)) == pytest.approx(avg_t_general(a, b), abs=1e-12)


# -- M_op and the eigen-solver --------------------------------------------------


def test_M_op_closed_forms():
    m = build_M_op(2)
    assert np.allclose(m.diag, [0, 0.5]) and np.allclose(m.off, [math.sqrt(1 / 3)])
    m = build_M_op(3)
    assert np.allclose(m.diag, [1 / 3, 3 / 5]) and np.allclose(m.off, [math.sqrt(1 / 2)])
    m = build_M_op(0)
    assert m.diag.tolist() == [0.0] and len(m.off) == 0


def test_tridiag_shape_check():
    with pytest.raises(ValueError):
        TridiagSym(np.ones(3), np.ones(3))


def test_sturm_count_against_dense(rng):
    for _ in range(20):
        n = int(rng.integers(1, 12))
        m = TridiagSym(rng.normal(size=n), rng.normal(size=n - 1))
        ev = np.linalg.eigvalsh(m.dense())
        for x in rng.normal(size=5):
            assert sturm_count(m, x) == int(np.sum(ev < x))


def test_max_eigen_table_values():
    lam, _ = max_eigen(build_M_op(2))
    assert lam == pytest.approx(LAMBDA_2, rel=1e-13)
    lam, _ = max_eigen(build_M_op(3))
    assert lam == pytest.approx(LAMBDA_3, rel=1e-13)
    lam, _ = max_eigen(build_M_op(10))
    assert lam == pytest.approx(LAMBDA_10_DENSE, rel=1e-13)
    assert lam == pytest.approx(np.linalg.eigvalsh(build_M_op(10).dense())[-1], rel=1e-13)


@given(st.integers(1, 40), seeds)
@settings(max_examples=40, deadline=None)
def test_max_eigen_random_nonnegative(n, seed):
    rng = np.random.default_rng(seed)
    m = TridiagSym(rng.random(n), rng.random(n - 1) + 0.01)
    lam, v = max_eigen(m)
    assert lam == pytest.approx(np.linalg.eigvalsh(m.dense())[-1], rel=1e-12, abs=1e-14)
    assert np.linalg.norm(m.matvec(v) - lam * v) <= 1e-10 * max(1.0, lam)
    assert np.all(v > 0)
    assert np.linalg.norm(v) == pytest.approx(1.0)


# -- optimal protocol -------------------------------------------------------------


def test_optimal_protocol_examples():
    assert optimal_protocol(5).lambda_op == pytest.approx(1.6708, abs=5e-5)
    sol = optimal_protocol(2)
    assert sol.avg_h == pytest.approx(6 - (3 + math.sqrt(57)) / 6, rel=1e-13)
    sol0 = optimal_protocol(0)
    assert sol0.lambda_op == 0.0 and sol0.avg_h == 6.0


def test_protocol_monotone_and_bounded():
    lams = [optimal_protocol(n).lambda_op for n in range(1, 61)]
    assert all(b >= a for a, b in zip(lams, lams[1:]))
    assert max(lams) < 3.0
    assert all(0.0 < 6 - 2 * x <= 6.0 for x in lams)


def test_perron_weights_positive():
    for n in range(0, 201):
        assert np.all(optimal_protocol(n).weights.c > 0), n


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 8])
def test_optimal_signal_state(n):
    sol = optimal_protocol(n)
    a = optimal_signal_state(sol)
    for blk in a.blocks:
        nz = np.flatnonzero(np.abs(blk.amps) > 0)
        assert nz.tolist() == [blk.two_j]   # only m = j populated
    assert avg_t_general(a, optimal_reference(n)) == pytest.approx(sol.lambda_op, abs=1e-10)
    if n >= 2:
        populated_m = {blk.two_j for blk in a.blocks if abs(blk.amps[-1]) > 0}
        assert len(populated_m) >= 2   # not a J_z eigenstate


# -- bounds and fit -------------------------------------------------------------


def test_bounds_n2():
    lower, upper = bounds(2)
    assert upper == pytest.approx(0.5 + math.sqrt(1 / 3))
    assert lower <= LAMBDA_2 <= upper


@pytest.mark.parametrize("n", [4, 10, 100, 1000])
def test_bounds_sandwich(n):
    lower, upper = bounds(n)
    lam = optimal_protocol(n).lambda_op
    assert lower <= lam + 1e-12
    assert lam <= upper + 1e-12


def test_upper_bound_asymptotics():
    n = 1000
    _, upper = bounds(n)
    assert abs(upper - (3 - 4 / n)) < 10 / n ** 2


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        asymptotic_fit([200, 400, 800])
    with pytest.raises(ValueError):
        asymptotic_fit([50, 200, 400, 800])
    with pytest.raises(ValueError):
        asymptotic_fit([200, 200, 200, 200])


def test_fit_leading_coefficient():
    grid = [200, 400, 800, 1600, 3200]
    a, b = asymptotic_fit(grid)
    assert a == pytest.approx(4.0, rel=0.05)
    res = np.abs(fit_residuals(grid, a, b))
    assert np.all(res < 1e-5)
    # the two-term model tracks the gap to well under one percent
    gaps = np.array([3 - optimal_protocol(n).lambda_op for n in grid])
    assert np.all(res / gaps < 1e-2)


def test_reference_model_error_shrinks_with_n():
    grid = [200, 400, 800, 1600, 3200]
    err = [abs(3 - optimal_protocol(n).lambda_op - (4 / n + 9.4 / n ** (4 / 3))) for n in grid]
    assert all(b < a for a, b in zip(err, err[1:]))
