"""Distribution of ``sum_i zeta_i * chi2_1(delta_i)``.

The CDF is the expansion in central chi-squares

    P(Q <= x) = sum_v C_v P(chi2_{r+2v} <= x / zeta_min)

with ``C_v = (prod zeta_min/zeta_j)^{1/2} exp(-delta/2) E(Qhat^v) / v!`` and
``Qhat = 1/2 sum_j (sqrt(g_j) Z_j + mu_j sqrt(1 - g_j))^2``, ``g_j = 1 - zeta_min/zeta_j``.
Writing ``log E exp(y Qhat) = sum_m d_m y^m`` with

    d_m = sum_j [ g_j^m / (2m) + delta_j (1 - g_j) g_j^{m-1} / 2 ]

gives the recursion ``k a_k = sum_{m=1}^k m d_m a_{k-m}`` for ``a_k = E(Qhat^k)/k!``.
Every ``d_m`` is nonnegative, so every ``C_v`` is too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

RANK_TOL = 1e-10
MAX_TERMS = 20000
DEFAULT_TOL = 1e-10


class SeriesConvergenceError(ArithmeticError):
    def __init__(self, achieved: float, terms: int):
        super().__init__(f"chi-square mixture series not converged: e_N = {achieved:.3e} after {terms} terms")
        self.achieved = achieved
        self.terms = terms


@dataclass(frozen=True)
class ChiSqMixture:
    zeta: tuple[float, ...]
    delta: tuple[float, ...]

    def __post_init__(self):
        if len(self.zeta) != len(self.delta):
            raise ValueError("zeta and delta must have equal length")
        if len(self.zeta) == 0:
            raise ValueError("mixture needs at least one component")
        if min(self.zeta) <= 0:
            raise ValueError("weights must be positive")
        if min(self.delta) < 0:
            raise ValueError("non-centralities must be nonnegative")

    @classmethod
    def of(cls, zeta, delta=None):
        z = tuple(float(v) for v in np.atleast_1d(zeta))
        d = tuple(0.0 for _ in z) if delta is None else tuple(float(v) for v in np.atleast_1d(delta))
        return cls(z, d)

    @property
    def r(self) -> int:
        return len(self.zeta)

    @property
    def total_noncentrality(self) -> float:
        return math.fsum(self.delta)

    def scaled(self, c: float) -> ChiSqMixture:
        return ChiSqMixture(tuple(c * z for z in self.zeta), self.delta)


@dataclass(frozen=True)
class KotzSeries:
    coefficients: np.ndarray
    zeta_min: float
    r: int

    @property
    def N(self) -> int:
        return len(self.coefficients) - 1

    @property
    def error_bound(self) -> float:
        return truncation_bound(self)


def build_mixture(A, Sigma, delta_shift=None) -> ChiSqMixture:
    """Law of ``W^T A W`` for ``W ~ N(delta_shift, Sigma)``.

    Eigen-decomposes ``Sigma^{1/2} A Sigma^{1/2} = P^T Gamma P``; eigenvalues
    below ``1e-10`` times the largest are dropped and ``delta_i`` is the squared
    ``i``-th coordinate of ``P Sigma^{-1/2} delta_shift``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    S = np.atleast_2d(np.asarray(Sigma, dtype=float))
    p = A.shape[0]
    shift = np.zeros(p) if delta_shift is None else np.atleast_1d(np.asarray(delta_shift, dtype=float))
    s_eig, s_vec = np.linalg.eigh(0.5 * (S + S.T))
    if s_eig[0] <= 0:
        raise np.linalg.LinAlgError(f"Sigma is not positive definite (eigenvalue {s_eig[0]:.3e})")
    root = (s_vec * np.sqrt(s_eig)) @ s_vec.T
    inv_root = (s_vec / np.sqrt(s_eig)) @ s_vec.T
    M = root @ (0.5 * (A + A.T)) @ root
    gam, Q = np.linalg.eigh(0.5 * (M + M.T))
    top = max(abs(gam[-1]), 1e-300)
    keep = gam > RANK_TOL * top
    if not np.any(keep):
        raise ValueError("A Sigma has no positive eigenvalue")
    mu = Q.T @ (inv_root @ shift)
    return ChiSqMixture(tuple(float(v) for v in gam[keep]), tuple(float(v) ** 2 for v in mu[keep]))


def _c0_and_d(zeta, delta, n_terms):
    zeta = np.asarray(zeta, dtype=float)
    delta = np.asarray(delta, dtype=float)
    zmin = zeta.min()
    ratio = zmin / zeta
    g = 1.0 - ratio
    m = np.arange(1, n_terms + 1)[:, None]
    gpow = g[None, :] ** (m - 1)
    d = (gpow * g[None, :] / (2.0 * m) + 0.5 * delta * ratio * gpow).sum(axis=1)
    c0 = math.exp(0.5 * np.log(ratio).sum() - 0.5 * delta.sum())
    return c0, d


def kotz_coefficients(zeta, delta, n_terms: int) -> np.ndarray:
    """``C_0 .. C_{n_terms}`` for weights ``zeta`` and non-centralities ``delta``."""
    if n_terms < 0:
        raise ValueError("order must be nonnegative")
    c0, d = _c0_and_d(zeta, delta, max(n_terms, 1))
    C = np.empty(n_terms + 1)
    C[0] = c0
    md = np.arange(1, n_terms + 1) * d[:n_terms]
    for k in range(1, n_terms + 1):
        # k C_k = sum_{m=1}^k m d_m C_{k-m}
        C[k] = np.dot(md[:k], C[k - 1::-1]) / k
    return C


def series_coefficients(mixture: ChiSqMixture, N: int | None = None, tol: float = DEFAULT_TOL) -> KotzSeries:
    """Coefficients to order ``N``, or to the smallest order with ``e_N <= tol``."""
    zeta = np.asarray(mixture.zeta)
    if N is not None:
        return KotzSeries(kotz_coefficients(zeta, mixture.delta, N), float(zeta.min()), mixture.r)
    if math.exp(-0.5 * mixture.total_noncentrality) == 0.0:
        raise SeriesConvergenceError(1.0, 0)
    n = 64
    while True:
        C = kotz_coefficients(zeta, mixture.delta, n)
        partial = np.cumsum(C)
        hit = np.nonzero(1.0 - partial <= tol)[0]
        if hit.size:
            return KotzSeries(C[: hit[0] + 1], float(zeta.min()), mixture.r)
        if n >= MAX_TERMS:
            raise SeriesConvergenceError(float(1.0 - partial[-1]), n)
        n = min(4 * n, MAX_TERMS)


def truncation_bound(series: KotzSeries) -> float:
    """``1 - sum_{v<=N} C_v``: bound on the dropped tail of the series."""
    return max(0.0, 1.0 - math.fsum(series.coefficients))


def _dofs(series: KotzSeries):
    return series.r + 2 * np.arange(series.N + 1)


def series_cdf(series: KotzSeries, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    z = np.maximum(x, 0.0)[..., None] / series.zeta_min
    return np.clip((series.coefficients * stats.chi2.cdf(z, _dofs(series))).sum(axis=-1), 0.0, 1.0)


def series_sf(series: KotzSeries, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    z = np.maximum(x, 0.0)[..., None] / series.zeta_min
    return np.clip((series.coefficients * stats.chi2.sf(z, _dofs(series))).sum(axis=-1), 0.0, 1.0)


def _single(mixture):
    return mixture.r == 1


def cdf(mixture: ChiSqMixture, x, tol: float = DEFAULT_TOL, method: str = "auto"):
    """``P(Q <= x)``.  ``method="auto"`` takes the exact (non-)central chi2_1 path when ``r = 1``."""
    x_arr = np.asarray(x, dtype=float)
    if method == "auto" and _single(mixture):
        z, d = mixture.zeta[0], mixture.delta[0]
        out = stats.chi2.cdf(x_arr / z, 1) if d == 0 else stats.ncx2.cdf(x_arr / z, 1, d)
    else:
        out = series_cdf(series_coefficients(mixture, tol=tol), x_arr)
    out = np.where(x_arr <= 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def sf(mixture: ChiSqMixture, x, tol: float = DEFAULT_TOL, method: str = "auto"):
    """``P(Q > x)``, summed directly rather than as ``1 - cdf``."""
    x_arr = np.asarray(x, dtype=float)
    if method == "auto" and _single(mixture):
        z, d = mixture.zeta[0], mixture.delta[0]
        out = stats.chi2.sf(x_arr / z, 1) if d == 0 else stats.ncx2.sf(x_arr / z, 1, d)
    else:
        out = series_sf(series_coefficients(mixture, tol=tol), x_arr)
    out = np.where(x_arr <= 0, 1.0, out)
    return float(out) if out.ndim == 0 else out


def quantile(mixture: ChiSqMixture, q: float, tol: float = DEFAULT_TOL, method: str = "auto") -> float:
    """``x`` with ``cdf(x) = q``, by bracketing and bisection on the series."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    if method == "auto" and _single(mixture):
        z, d = mixture.zeta[0], mixture.delta[0]
        return float(z * (stats.chi2.ppf(q, 1) if d == 0 else stats.ncx2.ppf(q, 1, d)))
    series = series_coefficients(mixture, tol=tol)
    r = mixture.r
    lo, hi = 0.0, r * max(mixture.zeta) * (r + mixture.total_noncentrality + 40.0)
    while series_cdf(series, hi) < q:
        lo, hi = hi, 2 * hi
    # bisection to machine resolution; the series is monotone in x
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if series_cdf(series, mid) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    return hi


def upper_quantile(mixture: ChiSqMixture, alpha: float, tol: float = DEFAULT_TOL, method: str = "auto") -> float:
    """Critical value ``t`` with ``P(Q > t) = alpha``, bisected on the survival series."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if method == "auto" and _single(mixture):
        z, d = mixture.zeta[0], mixture.delta[0]
        return float(z * (stats.chi2.isf(alpha, 1) if d == 0 else stats.ncx2.isf(alpha, 1, d)))
    series = series_coefficients(mixture, tol=tol)
    r = mixture.r
    lo, hi = 0.0, r * max(mixture.zeta) * (r + mixture.total_noncentrality + 40.0)
    while series_sf(series, hi) > alpha:
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if series_sf(series, mid) > alpha:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    return hi


def sample(mixture: ChiSqMixture, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of ``sum zeta_i (Z_i + sqrt(delta_i))^2``."""
    z = np.asarray(mixture.zeta)
    mu = np.sqrt(np.asarray(mixture.delta))
    W = rng.standard_normal((size, mixture.r)) + mu
    return (W * W) @ z
