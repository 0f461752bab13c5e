"""SU(2) representation kernel.

All spin labels are *doubled* integers: ``two_j = 2*j`` and ``two_m = 2*m``,
so half-integer representations are exact.

Conventions
-----------
Euler angles are z-y-z, ``U(g) = exp(-i a Jz) exp(-i b Jy) exp(-i c Jz)``, and

    D^j_{m'm}(g) = <j m'| U(g) |j m> = exp(-i m' a) d^j_{m'm}(b) exp(-i m c).

With this choice ``sum_m D^1_{mm}(g) = cos b + (1 + cos b) cos(a + c)``.
Clebsch-Gordan coefficients follow Condon-Shortley.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "EulerAngles",
    "GroupGrid",
    "IDENTITY",
    "check_label",
    "clebsch_gordan",
    "compose",
    "inverse",
    "wigner_small_d",
    "wigner_d_matrix",
    "wigner_D",
    "wigner_D_matrix",
    "trace_rep1",
    "legendre_p",
    "gauss_legendre",
    "haar_sample",
    "su2_quadrature_grid",
    "euler_to_quaternion",
    "quaternion_to_euler",
    "rotation_matrix",
    "ConvergenceError",
]

TWO_PI = 2.0 * math.pi


class ConvergenceError(RuntimeError):
    """An iterative numerical routine hit its iteration cap."""


def check_label(two_j: int, two_m: int | None = None) -> None:
    """Raise ``ValueError`` unless (j, m) is a valid doubled-integer pair."""
    if int(two_j) != two_j or two_j < 0:
        raise ValueError(f"invalid spin label two_j={two_j}")
    if two_m is None:
        return
    if int(two_m) != two_m:
        raise ValueError(f"invalid magnetic label two_m={two_m}")
    if abs(two_m) > two_j:
        raise ValueError(f"|m| > j: two_m={two_m}, two_j={two_j}")
    if (two_j - two_m) % 2:
        raise ValueError(f"parity mismatch: two_j={two_j}, two_m={two_m}")


# --------------------------------------------------------------------------
# factorials


@lru_cache(maxsize=None)
def _log_factorial_table(n_max: int) -> np.ndarray:
    return np.array([math.lgamma(k + 1.0) for k in range(n_max + 1)])


def _lfact(n: int) -> float:
    # tables grow in powers of two so repeated calls share one cache entry
    size = 64
    while size < n:
        size *= 2
    return float(_log_factorial_table(size)[n])


# --------------------------------------------------------------------------
# Clebsch-Gordan


def clebsch_gordan(two_j1: int, two_m1: int, two_j2: int, two_m2: int,
                   two_J: int, two_M: int) -> float:
    """<j1 m1 j2 m2 | J M> by the Racah sum, evaluated in log space."""
    check_label(two_j1, two_m1)
    check_label(two_j2, two_m2)
    check_label(two_J, two_M)
    if two_m1 + two_m2 != two_M:
        return 0.0
    if two_J > two_j1 + two_j2 or two_J < abs(two_j1 - two_j2):
        return 0.0
    if (two_j1 + two_j2 + two_J) % 2:
        return 0.0

    a = (two_j1 + two_j2 - two_J) // 2
    b = (two_j1 - two_j2 + two_J) // 2
    c = (-two_j1 + two_j2 + two_J) // 2
    s = (two_j1 + two_j2 + two_J) // 2 + 1
    j1pm, j1mm = (two_j1 + two_m1) // 2, (two_j1 - two_m1) // 2
    j2pm, j2mm = (two_j2 + two_m2) // 2, (two_j2 - two_m2) // 2
    Jpm, Jmm = (two_J + two_M) // 2, (two_J - two_M) // 2

    log_pre = 0.5 * (
        math.log(two_J + 1)
        + _lfact(a) + _lfact(b) + _lfact(c) - _lfact(s)
        + _lfact(j1pm) + _lfact(j1mm) + _lfact(j2pm) + _lfact(j2mm)
        + _lfact(Jpm) + _lfact(Jmm)
    )
    # denominators: k, a-k, j1-m1-k, j2+m2-k, J-j2+m1+k, J-j1-m2+k
    d5 = (two_J - two_j2 + two_m1) // 2
    d6 = (two_J - two_j1 - two_m2) // 2
    k_lo = max(0, -d5, -d6)
    k_hi = min(a, j1mm, j2pm)
    total = 0.0
    for k in range(k_lo, k_hi + 1):
        log_den = (_lfact(k) + _lfact(a - k) + _lfact(j1mm - k)
                   + _lfact(j2pm - k) + _lfact(d5 + k) + _lfact(d6 + k))
        term = math.exp(log_pre - log_den)
        total += -term if k % 2 else term
    return total


# --------------------------------------------------------------------------
# Wigner matrices


@lru_cache(maxsize=256)
def _small_d_terms(two_j: int):
    """Per-entry lists of (row, col, coeff, cos power, sin power)."""
    terms = []
    for i, two_mp in enumerate(range(-two_j, two_j + 1, 2)):
        for k_col, two_m in enumerate(range(-two_j, two_j + 1, 2)):
            jpmp, jmmp = (two_j + two_mp) // 2, (two_j - two_mp) // 2
            jpm, jmm = (two_j + two_m) // 2, (two_j - two_m) // 2
            dmm = (two_mp - two_m) // 2  # m' - m
            log_root = 0.5 * (_lfact(jpmp) + _lfact(jmmp) + _lfact(jpm) + _lfact(jmm))
            for k in range(max(0, -dmm), min(jpm, jmmp) + 1):
                log_den = (_lfact(jpm - k) + _lfact(k) + _lfact(jmmp - k)
                           + _lfact(k + dmm))
                coeff = math.exp(log_root - log_den)
                if (k + dmm) % 2:
                    coeff = -coeff
                terms.append((i, k_col, coeff, two_j - 2 * k - dmm, 2 * k + dmm))
    rows, cols, coeffs, pc, ps = (np.array(x) for x in zip(*terms))
    return rows, cols, coeffs.astype(float), pc, ps


def wigner_d_matrix(two_j: int, beta) -> np.ndarray:
    """Full real matrix d^j(beta), rows m' and columns m ascending from -j.

    ``beta`` may be an array; the matrix axes are appended to its shape.
    """
    check_label(two_j)
    beta = np.asarray(beta, dtype=float)
    dim = two_j + 1
    rows, cols, coeffs, pc, ps = _small_d_terms(two_j)
    c = np.cos(beta / 2.0)[..., None]
    s = np.sin(beta / 2.0)[..., None]
    vals = coeffs * c ** pc * s ** ps
    out = np.zeros(beta.shape + (dim * dim,))
    flat = rows * dim + cols
    for idx in range(vals.shape[-1]):
        out[..., flat[idx]] += vals[..., idx]
    return out.reshape(beta.shape + (dim, dim))


def wigner_small_d(two_j: int, two_mp: int, two_m: int, beta: float) -> float:
    check_label(two_j, two_mp)
    check_label(two_j, two_m)
    return float(wigner_d_matrix(two_j, beta)[(two_mp + two_j) // 2, (two_m + two_j) // 2])


def wigner_D_matrix(two_j: int, alpha, beta, gamma) -> np.ndarray:
    """Full complex matrix D^j(alpha, beta, gamma); broadcasts over angle arrays."""
    alpha, beta, gamma = np.broadcast_arrays(
        np.asarray(alpha, float), np.asarray(beta, float), np.asarray(gamma, float))
    m = np.arange(-two_j, two_j + 1, 2) / 2.0
    left = np.exp(-1j * m * alpha[..., None])[..., :, None]
    right = np.exp(-1j * m * gamma[..., None])[..., None, :]
    return left * wigner_d_matrix(two_j, beta) * right


def wigner_D(two_j: int, two_mp: int, two_m: int, g: "EulerAngles") -> complex:
    check_label(two_j, two_mp)
    check_label(two_j, two_m)
    d = wigner_small_d(two_j, two_mp, two_m, g.beta)
    return complex(np.exp(-0.5j * (two_mp * g.alpha + two_m * g.gamma)) * d)


def trace_rep1(g: "EulerAngles") -> float:
    """Trace of the spin-1 matrix: cos b + (1 + cos b) cos(a + c), in [-1, 3]."""
    cb = math.cos(g.beta)
    t = cb + (1.0 + cb) * math.cos(g.alpha + g.gamma)
    return min(max(t, -1.0), 3.0)  # roundoff can leave the interval by an ulp


# --------------------------------------------------------------------------
# group elements


def euler_to_quaternion(alpha, beta, gamma) -> np.ndarray:
    """Unit quaternion (w, x, y, z) of Rz(alpha) Ry(beta) Rz(gamma); vectorised."""
    alpha, beta, gamma = np.broadcast_arrays(
        np.asarray(alpha, float), np.asarray(beta, float), np.asarray(gamma, float))
    c, s = np.cos(beta / 2.0), np.sin(beta / 2.0)
    hp, hm = (alpha + gamma) / 2.0, (alpha - gamma) / 2.0
    return np.stack([c * np.cos(hp), -s * np.sin(hm), s * np.cos(hm), c * np.sin(hp)], axis=-1)


def quaternion_to_euler(q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Canonical z-y-z angles of a (not necessarily unit) quaternion; vectorised.

    At beta = 0 or pi the twist is folded into alpha and gamma is set to 0.
    """
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = np.moveaxis(q, -1, 0)
    beta = 2.0 * np.arctan2(np.hypot(x, y), np.hypot(w, z))
    plus = 2.0 * np.arctan2(z, w)     # alpha + gamma
    minus = 2.0 * np.arctan2(-x, y)   # alpha - gamma
    alpha = 0.5 * (plus + minus)
    gamma = 0.5 * (plus - minus)
    eps = 1e-12
    north = np.hypot(x, y) < eps
    south = np.hypot(w, z) < eps
    alpha = np.where(north, plus, alpha)
    alpha = np.where(south, minus, alpha)
    gamma = np.where(north | south, 0.0, gamma)
    beta = np.where(north, 0.0, np.where(south, np.pi, beta))
    alpha = np.mod(alpha, TWO_PI)
    gamma = np.mod(gamma, TWO_PI)
    # mod can return exactly 2*pi for tiny negative inputs
    alpha = np.where(alpha >= TWO_PI, 0.0, alpha)
    gamma = np.where(gamma >= TWO_PI, 0.0, gamma)
    return alpha, beta, gamma


def _quat_mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    pw, px, py, pz = np.moveaxis(p, -1, 0)
    qw, qx, qy, qz = np.moveaxis(q, -1, 0)
    return np.stack([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ], axis=-1)


@dataclass(frozen=True)
class EulerAngles:
    """Group element g = (alpha, beta, gamma), z-y-z, radians."""

    alpha: float
    beta: float
    gamma: float

    @classmethod
    def canonical(cls, alpha: float, beta: float, gamma: float) -> "EulerAngles":
        """Map any real triple to alpha, gamma in [0, 2pi) and beta in [0, pi]."""
        return cls.from_quaternion(euler_to_quaternion(alpha, beta, gamma))

    @classmethod
    def from_quaternion(cls, q) -> "EulerAngles":
        a, b, c = quaternion_to_euler(q)
        return cls(float(a), float(b), float(c))

    def quaternion(self) -> np.ndarray:
        return euler_to_quaternion(self.alpha, self.beta, self.gamma)

    def same_rotation(self, other: "EulerAngles", atol: float = 1e-12) -> bool:
        """Equality on rotations: quaternions compared up to global sign."""
        return abs(abs(float(np.dot(self.quaternion(), other.quaternion()))) - 1.0) <= atol

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


IDENTITY = EulerAngles(0.0, 0.0, 0.0)


def compose(g1: EulerAngles, g2: EulerAngles) -> EulerAngles:
    """Group product g1*g2 (apply g2, then g1): D(g1 g2) = D(g1) D(g2)."""
    return EulerAngles.from_quaternion(_quat_mul(g1.quaternion(), g2.quaternion()))


def inverse(g: EulerAngles) -> EulerAngles:
    q = g.quaternion() * np.array([1.0, -1.0, -1.0, -1.0])
    return EulerAngles.from_quaternion(q)


def rotation_matrix(g: EulerAngles) -> np.ndarray:
    """3x3 matrix Rz(alpha) Ry(beta) Rz(gamma); its columns are the rotated axes."""
    def rz(t):
        c, s = math.cos(t), math.sin(t)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    c, s = math.cos(g.beta), math.sin(g.beta)
    ry = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return rz(g.alpha) @ ry @ rz(g.gamma)


def haar_sample(rng: np.random.Generator, size: int | None = None):
    """Haar-random rotation(s): alpha, gamma uniform, cos(beta) uniform.

    Returns an ``EulerAngles`` when ``size`` is None, otherwise three arrays.
    """
    u = rng.random((3,) if size is None else (3, size))
    alpha = TWO_PI * u[0]
    beta = np.arccos(1.0 - 2.0 * u[1])
    gamma = TWO_PI * u[2]
    if size is None:
        return EulerAngles(float(alpha), float(beta), float(gamma))
    return alpha, beta, gamma


# --------------------------------------------------------------------------
# Legendre / Gauss-Legendre


def _legendre_and_derivative(n: int, x):
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def legendre_p(L: int, x):
    """P_L(x) by the three-term recurrence."""
    if L < 0:
        raise ValueError("L must be >= 0")
    arr = np.asarray(x, dtype=float)
    p_prev, p = np.ones_like(arr), arr.copy()
    if L == 0:
        p = p_prev
    for k in range(2, L + 1):
        p_prev, p = p, ((2 * k - 1) * arr * p - (k - 1) * p_prev) / k
    return float(p) if np.ndim(x) == 0 else p


def gauss_legendre(n: int, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (ascending) and weights of the n-point Gauss-Legendre rule.

    Each positive root of P_n is refined by safeguarded Newton steps inside its
    Bruns bracket, (k - 1/2) pi/(n + 1/2) < theta_k < k pi/(n + 1/2), starting
    from a Chebyshev-type guess; negative roots follow by symmetry.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    nodes = np.zeros(n)
    weights = np.zeros(n)
    for k in range(1, n // 2 + 1):
        lo = math.cos(k * math.pi / (n + 0.5))
        hi = math.cos((k - 0.5) * math.pi / (n + 0.5))
        x = math.cos(math.pi * (k - 0.25) / (n + 0.5))
        lo_negative = float(_legendre_and_derivative(n, np.array(lo))[0]) < 0
        for _ in range(max_iter):
            p, dp = (float(v) for v in _legendre_and_derivative(n, np.array(x)))
            if p == 0.0:
                break
            if (p < 0) == lo_negative:
                lo = x
            else:
                hi = x
            x_new = x - p / dp
            if not lo < x_new < hi:
                x_new = 0.5 * (lo + hi)
            done = abs(x_new - x) <= 4e-16
            x = x_new
            if done:
                break
        else:
            raise ConvergenceError(f"root {k} of P_{n} did not converge")
        dp = float(_legendre_and_derivative(n, np.array(x))[1])
        w = 2.0 / ((1.0 - x * x) * dp * dp)
        nodes[n - k], weights[n - k] = x, w
        nodes[k - 1], weights[k - 1] = -x, w
    if n % 2:
        dp = float(_legendre_and_derivative(n, np.array(0.0))[1])
        weights[n // 2] = 2.0 / (dp * dp)
    return nodes, weights


# --------------------------------------------------------------------------
# quadrature on the group


@dataclass(frozen=True)
class GroupGrid:
    """Weighted nodes on the group; ``weights`` sum to 1."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def nodes(self) -> list[tuple[EulerAngles, float]]:
        return [(EulerAngles(float(a), float(b), float(c)), float(w))
                for a, b, c, w in zip(self.alpha, self.beta, self.gamma, self.weights)]


def tensor_grid(n_ang: int, n_beta: int) -> GroupGrid:
    """Equidistant alpha/gamma times Gauss-Legendre in cos(beta)."""
    ang = TWO_PI * np.arange(n_ang) / n_ang
    x, w = gauss_legendre(n_beta)
    a, b, c = np.meshgrid(ang, np.arccos(x), ang, indexing="ij")
    wt = np.broadcast_to((w / 2.0)[None, :, None], a.shape) / n_ang ** 2
    return GroupGrid(a.ravel(), b.ravel(), c.ravel(), np.ascontiguousarray(wt).ravel())


def su2_quadrature_grid(two_j_max: int) -> GroupGrid:
    """Grid exact for D^j x conj(D^j') with j, j' <= j_max of equal parity."""
    check_label(two_j_max)
    return tensor_grid(two_j_max + 1, (two_j_max + 3) // 2)
