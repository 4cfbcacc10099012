"""Constructive verification objects behind the spectral claims.

The approximation theory rests on solving the moment system

    sum_i (-1)^n k_i^(2n) X_i = u^(2n)(0),      n = 0..N-1,
    sum_i (-1)^n k_i^(2n+1) Y_i = u^(2n+1)(0),

i.e. Vandermonde systems at the nodes -k_i^2.  This module builds those
objects explicitly so they can be checked numerically:

  * elementary symmetric functions and the closed-form Vandermonde inverse
        v_ij = (-1)^(j-1) sigma_{n-j}^i / prod_{l != i} (x_l - x_i),
  * the Taylor-matching coefficients (X, Y) and their deterministic bounds
        |X_i| <= M_u [(2N-2)!]^s prod_{j != i} (C_u^2 + k_j^2) / |k_i^2 - k_j^2|
    (the odd-parity bound carries [(2N-1)!]^s C_u / k_i instead),
  * the high-probability event that the node products stay controlled,
    whose complement has probability at most exp(-(c-1-ln c)(N-1)),
  * the frequency-moment bound
        E[k^(4N) max((C_u/S)^2/(k/S), ((C_u/S)^2+1)/(k/S+1))^(2N-2)]
            <= S^4 max(C_u, S)^(4N-4) / (2N+3),
  * and the quartic-exponential integral
        J(alpha) = int_0^1 exp(-lam t^4 - lam alpha^2 + 2 lam delta alpha t^2) dt
    with its closed-form majorant c lam^(-1/4) exp(2 lam (delta^2-1)),
    c = Gamma(5/4) [2 erf(pi Gamma(5/4)^(-2) / 16) + 1].  J drives the tail
    probability of the Frobenius-mass ratio rho: max_alpha J <= 0.95 at
    delta = 200/199 (lam = 1/(8(delta^2-1))) and <= 0.72 at delta = 1.1,
    lam = 7.15.

The Vandermonde nodes are exponentially ill-conditioned in N, which is the
very phenomenon under study; the helpers here are meant for N <= 8 and
numerical checks reject draws with nearly coincident frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import SplitMix64
from .problem import ManufacturedSolution

__all__ = [
    "SymFuncTable",
    "TaylorPair",
    "elementary_symmetric",
    "vandermonde_inverse",
    "taylor_match_coefficients",
    "taylor_match_bound",
    "coefficient_product_event",
    "event_probability_bound",
    "moment_bound_check",
    "moment_integral",
    "chernoff_integral",
    "chernoff_integral_max",
    "chernoff_integral_bound",
    "wilson_interval",
]


# ---------------------------------------------------------------------------
# Symmetric functions and Vandermonde inversion
# ---------------------------------------------------------------------------

def _sym_coeffs(xs: np.ndarray) -> np.ndarray:
    """sigma_0..sigma_n via the product expansion of prod (t + x_i).

    Uses Neumaier-compensated updates; the coefficients are read off from
    prod_v (t + x_v) = sum_j sigma_{n-j} t^j.
    """
    n = len(xs)
    coeff = np.zeros(n + 1)
    comp = np.zeros(n + 1)
    coeff[0] = 1.0
    for m, x in enumerate(xs, start=1):
        for j in range(m, 0, -1):
            add = x * coeff[j - 1]
            s = coeff[j] + add
            if abs(coeff[j]) >= abs(add):
                comp[j] += (coeff[j] - s) + add
            else:
                comp[j] += (add - s) + coeff[j]
            coeff[j] = s
    return coeff + comp


@dataclass(frozen=True, eq=False)
class SymFuncTable:
    """sigma_m of the inputs plus the leave-one-out table sigma_m^i."""

    xs: np.ndarray
    values: np.ndarray        # sigma_0..sigma_n
    loo: np.ndarray           # loo[i, m] = sigma_m with x_i removed

    def sigma(self, m: int) -> float:
        return float(self.values[m])

    def sigma_loo(self, m: int, i: int) -> float:
        return float(self.loo[i, m])


def elementary_symmetric(xs) -> SymFuncTable:
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    values = _sym_coeffs(xs)
    loo = np.zeros((n, n))
    for i in range(n):
        loo[i] = _sym_coeffs(np.delete(xs, i))
    return SymFuncTable(xs=xs, values=values, loo=loo)


def vandermonde_inverse(xs) -> np.ndarray:
    """Closed-form inverse of the Vandermonde matrix at pairwise-distinct nodes."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    if len(np.unique(xs)) != n:
        raise np.linalg.LinAlgError("coincident nodes make the system singular")
    table = elementary_symmetric(xs)
    inv = np.empty((n, n))
    for i in range(n):
        denom = np.prod(np.delete(xs, i) - xs[i])
        for j in range(1, n + 1):
            inv[i, j - 1] = (-1.0) ** (j - 1) * table.sigma_loo(n - j, i) / denom
    return inv


# ---------------------------------------------------------------------------
# Taylor matching
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TaylorPair:
    """Even/odd derivative data and the matched trig coefficients."""

    F: np.ndarray      # u^(2i-2)(0)
    G: np.ndarray      # u^(2i-1)(0)
    X: np.ndarray      # cosine coefficients
    Y: np.ndarray      # sine coefficients

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([self.X, self.Y])


def taylor_match_coefficients(k, u: ManufacturedSolution,
                              N: int | None = None) -> TaylorPair:
    """Coefficients (X, Y) whose trig expansion matches the Maclaurin
    expansion of u through order 2N-1."""
    k = np.asarray(getattr(k, "k", k), dtype=float)
    if N is not None:
        k = k[:N]
    N = len(k)
    F = np.array([u.deriv_at_zero(2 * i) for i in range(N)])
    G = np.array([u.deriv_at_zero(2 * i + 1) for i in range(N)])
    inv = vandermonde_inverse(-(k**2))
    X = inv @ F
    Y = (inv @ G) / k
    return TaylorPair(F=F, G=G, X=X, Y=Y)


def taylor_match_bound(i: int, k, M_u: float, C_u: float, s: float,
                       parity: str = "even") -> float:
    """Deterministic bound on |X_i| (even) or |Y_i| (odd)."""
    k = np.asarray(getattr(k, "k", k), dtype=float)
    N = len(k)
    others = np.delete(k, i)
    prod = float(np.prod((C_u**2 + others**2) / np.abs(k[i] ** 2 - others**2)))
    if parity == "even":
        return M_u * math.exp(s * math.lgamma(2 * N - 1)) * prod
    if parity == "odd":
        return M_u * C_u * math.exp(s * math.lgamma(2 * N)) / k[i] * prod
    raise ValueError("parity must be 'even' or 'odd'")


# ---------------------------------------------------------------------------
# Probabilistic events
# ---------------------------------------------------------------------------

def coefficient_product_event(k, i: int, C_u: float, S: float, c_free: float):
    """Both sides of the node-product control event and its indicator.

    The event holds when

      prod_{j != i} (C_u^2 + k_j^2)/|k_i^2 - k_j^2|
          < [2 e^c max((C_u/S)^2/(k_i/S), ((C_u/S)^2+1)/(k_i/S+1))]^(N-1);

    at N = 1 both sides are empty products (lhs = rhs = 1) and the strict
    inequality makes the event false.
    """
    if c_free <= 1:
        raise ValueError("the free constant must exceed 1")
    k = np.asarray(getattr(k, "k", k), dtype=float)
    N = len(k)
    others = np.delete(k, i)
    lhs = float(np.prod((C_u**2 + others**2) / np.abs(k[i] ** 2 - others**2)))
    w2 = (C_u / S) ** 2
    khat = k[i] / S
    base = 2.0 * math.exp(c_free) * max(w2 / khat, (w2 + 1.0) / (khat + 1.0))
    rhs = base ** (N - 1)
    return lhs, rhs, bool(lhs < rhs)


def event_probability_bound(N: int, c_free: float) -> float:
    """exp(-(c - 1 - ln c)(N - 1)): tail bound for the event's complement."""
    if c_free <= 1:
        raise ValueError("the free constant must exceed 1")
    return math.exp(-(c_free - 1 - math.log(c_free)) * (N - 1))


def moment_bound_check(N: int, S: float, C_u: float, trials: int, seed: int):
    """Monte-Carlo estimate of the frequency moment versus its closed form.

    Returns (empirical_mean, bound) with bound = S^4 max(C_u,S)^(4N-4)/(2N+3).
    The integrand is rescaled by max(C_u, S)^(4N-4) S^4 internally so large N
    stay in floating range.
    """
    if trials < 10**3:
        raise ValueError("use at least 1000 trials")
    rng = SplitMix64(seed)
    khat = rng.uniforms(trials)          # k / S
    w2 = (C_u / S) ** 2
    ratio = np.maximum(w2 / khat, (w2 + 1.0) / (khat + 1.0))
    scale = max(C_u, S) ** 2 / S**2      # normaliser per power of the ratio
    # k^(4N) * ratio^(2N-2) = S^4 max(C_u,S)^(4N-4) * khat^(4N) (ratio/scale)^(2N-2)
    vals = khat ** (4 * N) * (ratio / scale) ** (2 * N - 2)
    empirical = float(np.mean(vals)) * S**4 * max(C_u, S) ** (4 * N - 4)
    bound = S**4 * max(C_u, S) ** (4 * N - 4) / (2 * N + 3)
    return empirical, bound


def moment_integral(N: int, S: float, C_u: float, n_nodes: int = 400) -> float:
    """The same expectation by quadrature (panels split at the max switch k = w^2)."""
    w2 = (C_u / S) ** 2
    breaks = [0.0, 1.0] if w2 >= 1.0 else [0.0, w2, 1.0]
    ref_x, ref_w = np.polynomial.legendre.leggauss(n_nodes)
    total = 0.0
    scale = max(C_u, S) ** 2 / S**2
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        khat = mid + half * ref_x
        ratio = np.maximum(w2 / khat, (w2 + 1.0) / (khat + 1.0))
        total += float(half * ref_w @ (khat ** (4 * N) * (ratio / scale) ** (2 * N - 2)))
    return total * S**4 * max(C_u, S) ** (4 * N - 4)


# ---------------------------------------------------------------------------
# Quartic-exponential integral
# ---------------------------------------------------------------------------

def chernoff_integral(alpha: float, lam: float, delta: float,
                      n_nodes: int = 128) -> float:
    """J(alpha) = int_0^1 exp(-lam t^4 - lam alpha^2 + 2 lam delta alpha t^2) dt."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    t = 0.5 * (x + 1.0)
    return float(0.5 * w @ np.exp(-lam * t**4 - lam * alpha**2
                                  + 2.0 * lam * delta * alpha * t**2))


def chernoff_integral_max(lam: float, delta: float, step: float = 1e-3,
                          n_nodes: int = 128) -> float:
    """max over the alpha grid [0, delta] (the maximiser lies there: the
    derivative in alpha is positive below 0 and negative above delta)."""
    alphas = np.arange(0.0, delta + step, step)
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    t = 0.5 * (x + 1.0)
    quartic = np.exp(-lam * t**4)
    vals = [float(0.5 * w @ (quartic * np.exp(-lam * a**2 + 2 * lam * delta * a * t**2)))
            for a in alphas]
    return max(vals)


def chernoff_integral_bound(lam: float, delta: float) -> float:
    """Closed-form majorant c lam^(-1/4) exp(2 lam (delta^2 - 1)) of max_alpha J."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if delta <= 1:
        raise ValueError("delta must exceed 1")
    g54 = math.gamma(1.25)
    c = g54 * (2.0 * math.erf(math.pi / (16.0 * g54**2)) + 1.0)
    return c * lam**-0.25 * math.exp(2.0 * lam * (delta**2 - 1.0))


def wilson_interval(successes: int, trials: int, z: float = 3.0):
    """Wilson score interval for a binomial proportion (z defaults to 3 sigma)."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = successes / trials
    denom = 1.0 + z**2 / trials
    center = (phat + z**2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z**2 / (4 * trials**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)
