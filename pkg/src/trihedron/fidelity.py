"""Fidelity quadratic forms and the optimal protocol.

The average score <t> of a signal |A> read out with the covariant measurement
seeded by |B> is a quartic form in the amplitudes.  Restricting to
A^j_m = C^j B^j_m turns it into the quadratic form c^T M_B c with a real,
symmetric, nonnegative tridiagonal M_B.  Every entry of M_B is dominated by the
matrix obtained from B^j = |j, j>, so the optimum is the Perron eigenvalue of
that matrix, which has closed-form entries

    diag(j)      = j / (j + 1)
    off(j, j+1)  = sqrt((2j + 1) / (2j + 3)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import solveh_banded

from .states import (
    IrrepBlock,
    LadderMismatch,
    ReducedWeights,
    ReferenceState,
    SignalState,
    ladder,
    optimal_reference,
    signal_from_weights,
)
from .su2 import ConvergenceError, check_label, clebsch_gordan

__all__ = [
    "TridiagSym",
    "ProtocolSolution",
    "time_reverse",
    "m_tensor",
    "m_tensor_block",
    "avg_t_general",
    "avg_t_p1",
    "build_M_B",
    "build_M_B_cg",
    "avg_t_reduced",
    "build_M_op",
    "sturm_count",
    "max_eigen",
    "optimal_protocol",
    "optimal_signal_state",
    "bounds",
    "asymptotic_fit",
    "fit_residuals",
]


def time_reverse(b: IrrepBlock, phase: str = "standard") -> IrrepBlock:
    """Time-reversed block: out_m = phase(m) * conj(in_{-m}).

    ``phase="standard"`` uses (-1)^(j-m), which is real for every j.
    ``phase="literal"`` uses (-1)^m = exp(i pi m); for half-integer j it differs
    from the standard choice by a constant factor per irrep.
    """
    two_m = np.arange(-b.two_j, b.two_j + 1, 2)
    if phase == "standard":
        ph = np.where(((b.two_j - two_m) // 2) % 2 == 0, 1.0, -1.0)
    elif phase == "literal":
        ph = np.exp(0.5j * np.pi * two_m)
    else:
        raise ValueError(f"unknown phase convention {phase!r}")
    return IrrepBlock(b.two_j, ph * np.conj(b.amps[::-1]))


# --------------------------------------------------------------------------
# coupling tensors


@lru_cache(maxsize=None)
def _spin1_projector(two_j: int, two_l: int) -> np.ndarray:
    """cg[M, m, n] = <j m l n | 1 M> (M = -1, 0, 1)."""
    out = np.zeros((3, two_j + 1, two_l + 1))
    for iM, two_M in enumerate((-2, 0, 2)):
        for im, two_m in enumerate(range(-two_j, two_j + 1, 2)):
            two_n = two_M - two_m
            if abs(two_n) <= two_l:
                out[iM, im, (two_n + two_l) // 2] = clebsch_gordan(
                    two_j, two_m, two_l, two_n, 2, two_M)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def m_tensor_block(two_l: int, two_j: int) -> np.ndarray:
    """All M^{lj}_{n m n' m'} for one irrep pair, indexed [n, m, n', m'].

    Equals sqrt((2l+1)(2j+1)) * integral of tr U1(g) D^j_{m'm}(g) conj(D^l_{n'n}(g)),
    i.e. sqrt((2j+1)/(2l+1)) * sum_M <1 M j m|l n><1 M j m'|l n'>.
    """
    check_label(two_l)
    check_label(two_j)
    out = np.zeros((two_l + 1, two_j + 1, two_l + 1, two_j + 1))
    if abs(two_l - two_j) > 2 or (two_l - two_j) % 2:
        out.setflags(write=False)
        return out
    # cg[M, m, n] = <1 M j m | l n>
    cg = np.zeros((3, two_j + 1, two_l + 1))
    for iM, two_M in enumerate((-2, 0, 2)):
        for im, two_m in enumerate(range(-two_j, two_j + 1, 2)):
            two_n = two_M + two_m
            if abs(two_n) <= two_l:
                cg[iM, im, (two_n + two_l) // 2] = clebsch_gordan(
                    2, two_M, two_j, two_m, two_l, two_n)
    out = math.sqrt((two_j + 1.0) / (two_l + 1.0)) * np.einsum("Mmn,Mpq->nmqp", cg, cg)
    out.setflags(write=False)
    return out


def m_tensor(two_l: int, two_j: int, two_n: int, two_m: int, two_np: int, two_mp: int) -> float:
    for tj, tm in ((two_l, two_n), (two_j, two_m), (two_l, two_np), (two_j, two_mp)):
        check_label(tj, tm)
    blk = m_tensor_block(two_l, two_j)
    return float(blk[(two_n + two_l) // 2, (two_m + two_j) // 2,
                     (two_np + two_l) // 2, (two_mp + two_j) // 2])


def _check_ladders(a, b) -> None:
    if a.n_spins != b.n_spins:
        raise LadderMismatch(f"N={a.n_spins} vs N={b.n_spins}")


def avg_t_general(a: SignalState, b: ReferenceState) -> float:
    """<t> as the full contraction of the amplitudes with M^{lj}."""
    _check_ladders(a, b)
    total = 0.0 + 0.0j
    for al, bl in zip(a.blocks, b.blocks):
        for aj, bj in zip(a.blocks, b.blocks):
            if abs(al.two_j - aj.two_j) > 2:
                continue
            blk = m_tensor_block(al.two_j, aj.two_j)
            total += np.einsum("nmpq,n,m,p,q->", blk, al.amps.conj(), aj.amps,
                               bl.amps, bj.amps.conj())
    return float(total.real)


def _p1_image(x: IrrepBlock, y: IrrepBlock, phase: str) -> np.ndarray:
    """Components <1 M| (x (x) y~) for M = -1, 0, 1."""
    yt = time_reverse(y, phase).amps
    return np.einsum("Mmn,m,n->M", _spin1_projector(x.two_j, y.two_j), x.amps, yt)


def avg_t_p1(a: SignalState, b: ReferenceState, phase: str = "standard") -> float:
    """<t> through the spin-1 projector on |A^j> (x) time-reversed |A^l>."""
    _check_ladders(a, b)
    total = 0.0 + 0.0j
    for al, bl in zip(a.blocks, b.blocks):
        for aj, bj in zip(a.blocks, b.blocks):
            if abs(al.two_j - aj.two_j) > 2:
                continue
            pref = math.sqrt((al.two_j + 1.0) * (aj.two_j + 1.0)) / 3.0
            total += pref * np.vdot(_p1_image(bj, bl, phase), _p1_image(aj, al, phase))
    return float(total.real)


# --------------------------------------------------------------------------
# tridiagonal matrices


@dataclass(frozen=True)
class TridiagSym:
    """Real symmetric tridiagonal matrix; ``off[i]`` couples rows i and i+1."""

    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        e = np.asarray(self.off, dtype=float)
        if d.ndim != 1 or len(d) < 1 or e.shape != (len(d) - 1,):
            raise ValueError("off-diagonal must have length len(diag) - 1")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "off", e)

    def __len__(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out

    def row_sums(self) -> np.ndarray:
        return self.matvec(np.ones(len(self)))


def _m_b_entry_p1(bj: IrrepBlock, bl: IrrepBlock) -> float:
    v = _p1_image(bj, bl, "standard")
    return math.sqrt((bj.two_j + 1.0) * (bl.two_j + 1.0)) / 3.0 * float(np.vdot(v, v).real)


def _m_b_entry_cg(bj: IrrepBlock, bl: IrrepBlock) -> float:
    # term of the quartic form with A = B restricted to the (l, j) pair
    blk = m_tensor_block(bl.two_j, bj.two_j)
    val = np.einsum("nmpq,n,m,p,q->", blk, bl.amps.conj(), bj.amps, bl.amps, bj.amps.conj())
    return float(val.real)


def build_M_B(b: ReferenceState) -> TridiagSym:
    """Reduced matrix of a reference state via the spin-1 projector form."""
    bl = b.blocks
    diag = [_m_b_entry_p1(x, x) for x in bl]
    off = [_m_b_entry_p1(x, y) for x, y in zip(bl[:-1], bl[1:])]
    return TridiagSym(np.array(diag), np.array(off))


def build_M_B_cg(b: ReferenceState) -> TridiagSym:
    """Same matrix from the Clebsch-Gordan contraction; independent route."""
    bl = b.blocks
    diag = [_m_b_entry_cg(x, x) for x in bl]
    off = [_m_b_entry_cg(x, y) for x, y in zip(bl[:-1], bl[1:])]
    return TridiagSym(np.array(diag), np.array(off))


def avg_t_reduced(c, m: TridiagSym) -> float:
    """conj(c)^T M c; accepts a ``ReducedWeights`` or a plain vector."""
    vec = np.asarray(c.c if isinstance(c, ReducedWeights) else c)
    if vec.shape != (len(m),):
        raise ValueError(f"weights of length {vec.shape} vs matrix of size {len(m)}")
    return float(np.vdot(vec, m.matvec(vec.real) + 1j * m.matvec(vec.imag)).real)


def build_M_op(n_spins: int) -> TridiagSym:
    if n_spins < 0:
        raise ValueError("n_spins must be >= 0")
    j = np.array(ladder(n_spins), dtype=float) / 2.0
    diag = j / (j + 1.0)
    off = np.sqrt((2.0 * j[:-1] + 1.0) / (2.0 * j[:-1] + 3.0))
    return TridiagSym(diag, off)


# --------------------------------------------------------------------------
# eigen-solver


def sturm_count(m: TridiagSym, x: float) -> int:
    """Number of eigenvalues strictly below ``x``."""
    d = m.diag.tolist()
    e2 = (m.off * m.off).tolist()
    count = 0
    q = d[0] - x
    if q < 0.0:
        count += 1
    for i in range(1, len(d)):
        if q == 0.0:
            q = 1e-300
        q = d[i] - x - e2[i - 1] / q
        if q < 0.0:
            count += 1
    return count


def _bisect_top(m: TridiagSym, rtol: float, max_iter: int = 500) -> tuple[float, float]:
    n = len(m)
    radius = np.zeros(n)
    radius[:-1] += np.abs(m.off)
    radius[1:] += np.abs(m.off)
    lo = float(np.max(m.diag - radius))
    hi = float(np.max(m.diag + radius))
    # widen so that lo is strictly below and hi strictly above the top eigenvalue
    pad = 1e-12 * max(1.0, abs(lo), abs(hi))
    lo, hi = lo - pad, hi + pad
    for _ in range(max_iter):
        if hi - lo <= rtol * max(abs(lo), abs(hi)) or hi - lo <= 1e-300:
            return lo, hi
        mid = 0.5 * (lo + hi)
        if sturm_count(m, mid) == n:
            hi = mid
        else:
            lo = mid
    raise ConvergenceError("bisection did not reach the requested tolerance")


def max_eigen(m: TridiagSym, rtol: float = 1e-13, max_retries: int = 6) -> tuple[float, np.ndarray]:
    """Largest eigenvalue (Sturm bisection) and its eigenvector (inverse iteration).

    The vector is unit-norm with nonnegative sum, so for a nonnegative
    irreducible matrix it is the Perron vector.
    """
    n = len(m)
    if n == 1:
        return float(m.diag[0]), np.ones(1)
    lo, hi = _bisect_top(m, rtol)
    lam = 0.5 * (lo + hi)
    scale = max(1.0, abs(lam))
    delta = 1e-10 * scale
    for _ in range(max_retries):
        # sigma I - M is positive definite for sigma above the top eigenvalue
        sigma = hi + delta
        ab = np.zeros((2, n))
        ab[0, 1:] = -m.off
        ab[1] = sigma - m.diag
        v = np.ones(n) / math.sqrt(n)
        try:
            for _ in range(4):
                v = solveh_banded(ab, v)
                v /= np.linalg.norm(v)
        except np.linalg.LinAlgError:
            delta *= 10.0
            continue
        if v.sum() < 0:
            v = -v
        # the Rayleigh quotient is second-order accurate; keep it inside the bracket
        lam = min(max(float(v @ m.matvec(v)), lo), hi)
        residual = np.linalg.norm(m.matvec(v) - lam * v)
        if np.all(np.isfinite(v)) and residual <= 1e-10 * scale:
            return lam, v
        delta *= 10.0
    raise ConvergenceError("inverse iteration failed to produce an eigenvector")


# --------------------------------------------------------------------------
# protocol


@dataclass(frozen=True)
class ProtocolSolution:
    n_spins: int
    lambda_op: float
    weights: ReducedWeights
    avg_h: float


def optimal_protocol(n_spins: int) -> ProtocolSolution:
    lam, vec = max_eigen(build_M_op(n_spins))
    weights = ReducedWeights(tuple(ladder(n_spins)), vec / np.linalg.norm(vec))
    return ProtocolSolution(n_spins, lam, weights, 6.0 - 2.0 * lam)


def optimal_signal_state(sol: ProtocolSolution) -> SignalState:
    """A^j_m = C^j delta_{m, j}: the top-weight state of every irrep, superposed."""
    weights = ReducedWeights(sol.weights.two_js, sol.weights.c.astype(complex))
    return signal_from_weights(weights, optimal_reference(sol.n_spins))


def _trial_vector(n_spins: int, p: float) -> np.ndarray:
    """sqrt(2j - 1) (N/2 - j) j^p on the ladder, zero for j < 1; unit norm."""
    j = np.array(ladder(n_spins), dtype=float) / 2.0
    keep = (j >= 1.0) & (j < n_spins / 2.0)
    logc = np.full(j.shape, -np.inf)
    jk = j[keep]
    logc[keep] = 0.5 * np.log(2 * jk - 1) + np.log(n_spins / 2.0 - jk) + p * np.log(jk)
    if not keep.any():
        return np.zeros_like(j)
    c = np.exp(logc - logc[keep].max())
    return c / np.linalg.norm(c)


def _golden_max(f, a: float, b: float, tol: float = 1e-6, max_iter: int = 200) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def bounds(n_spins: int) -> tuple[float, float]:
    """Lower and upper bounds on the optimal <t>.

    Upper: the largest row sum of the optimal matrix.  Lower: the best Rayleigh
    quotient of the trial family sqrt(2j-1) (N/2 - j) j^p, optimised over p
    around (3N/4)^(1/3).  For N < 4 that family is identically zero and the
    lower bound falls back to the top-irrep value J/(J+1).
    """
    if n_spins < 2:
        raise ValueError("bounds need n_spins >= 2")
    m = build_M_op(n_spins)
    upper = float(m.row_sums().max())
    p_star = (0.75 * n_spins) ** (1.0 / 3.0)

    def rayleigh(p: float) -> float:
        c = _trial_vector(n_spins, p)
        return float(c @ m.matvec(c))

    if not _trial_vector(n_spins, p_star).any():
        return float(m.diag[-1]), upper
    _, lower = _golden_max(rayleigh, 0.25 * p_star, 4.0 * p_star)
    return lower, upper


def _fit_design(n_list: Sequence[int]) -> np.ndarray:
    n = np.asarray(n_list, dtype=float)
    return np.column_stack([1.0 / n, n ** (-4.0 / 3.0)])


def asymptotic_fit(n_list: Sequence[int]) -> tuple[float, float]:
    """Least-squares (a, b) in 3 - lambda_op(N) ~ a/N + b/N^(4/3)."""
    n_list = [int(n) for n in n_list]
    if len(n_list) < 4 or min(n_list) < 100:
        raise ValueError("need at least 4 points, all with N >= 100")
    X = _fit_design(n_list)
    y = np.array([3.0 - optimal_protocol(n).lambda_op for n in n_list])
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 2:
        raise ValueError("degenerate fit design; use distinct N values")
    return float(coef[0]), float(coef[1])


def fit_residuals(n_list: Sequence[int], a: float, b: float) -> np.ndarray:
    """(3 - lambda_op(N)) - (a/N + b/N^(4/3)) for each N."""
    y = np.array([3.0 - optimal_protocol(int(n)).lambda_op for n in n_list])
    return y - _fit_design(n_list) @ np.array([a, b])
