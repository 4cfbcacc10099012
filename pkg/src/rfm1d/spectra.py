"""Singular-value diagnostics and closed-form bound evaluators.

The feature matrix of a trig trial space on a bounded interval has
singular values that collapse superexponentially: past the first few
indices,

    sigma_m <= sqrt(N) [ sqrt(3n-6) (L1 S^2 + L2 S th + L3 th^2)
                         + sqrt(2) (|g1| S + |g2| th) th ] (1 + th) th^(m-3),

where th = th(m) = S R Gamma(m-2)^(-1/(m-3)) is the per-index decay factor
(L1..L3 are sup-norm bounds of the coefficients).  Conversely the condition
number grows at least like th(M)^(3-M) with M = min(n, 2N), up to the
Frobenius-mass ratio

    rho = sum_j (A^2 k_j^4 - 2 B k_j^2 + C^2) / sum_j (A^2 k_j^4 + C^2),

with A, B, C accumulated from the coefficient samples at the interior
collocation points.  For uniformly drawn frequencies, rho >= 1/200 with
probability at least 1 - 0.95^N (and empirically >= 1/11 at rate 0.72^N;
see `rfm1d.oracle.chernoff_integral`).

For partitioned assemblies the spectrum is sandwiched between block-diagonal
comparison matrices: with B = diag(B_p), D_e/D_o the stacked local blocks of
the even/odd patches,

    sigma_m(B) <= sigma_m(Phi) <= min_k sqrt(sigma_k(D_e)^2 + sigma_{m+1-k}(D_o)^2),

and, for equal patch sizes, the simplified two-sided bound in terms of the
ceil(m / (P+1))-th local singular values.  This is why gluing local models
slows the decay by roughly the number of patches.

Everything below the precision floor sigma_1 * rcond is reported but never
certified; bound comparisons should restrict to one decade above the floor.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .assembly import BlockDiagonals, CollocationGrid, PatchBlocks
from .problem import PDEProblem

__all__ = [
    "SpectralReport",
    "BoundParams",
    "LossBoundParams",
    "ConditionLowerBound",
    "SandwichBounds",
    "RateFit",
    "singular_values",
    "tail_decay_factor",
    "singular_value_upper_bound",
    "condition_lower_bound",
    "pum_sandwich",
    "expected_loss_bound",
    "rate_fit",
    "truncate_at_floor",
    "write_spectrum_csv",
]


def _as_array(matrix) -> np.ndarray:
    return np.asarray(getattr(matrix, "values", matrix), dtype=float)


@dataclass(frozen=True, eq=False)
class SpectralReport:
    sigma: np.ndarray           # descending
    kappa: float                # sigma_1 / sigma_M, M = min(n, 2N)
    floor: float                # sigma_1 * rcond
    above_floor_count: int
    M: int


def singular_values(matrix, rcond: float = 1e-13) -> SpectralReport:
    """Full spectrum of the matrix; never forms the Gram matrix."""
    A = _as_array(matrix)
    if A.size == 0:
        raise ValueError("matrix must be nonempty")
    s = np.linalg.svd(A, compute_uv=False)
    M = min(A.shape)
    kappa = float(s[0] / s[M - 1]) if s[M - 1] > 0 else math.inf
    floor = float(s[0] * rcond)
    return SpectralReport(sigma=s, kappa=kappa, floor=floor,
                          above_floor_count=int(np.count_nonzero(s >= floor)), M=M)


def tail_decay_factor(m: int, S: float, R: float) -> float:
    """th(m) = S R Gamma(m-2)^(-1/(m-3)) for m >= 4.

    At m = 3 the exponent degenerates; the limit from above is
    S R e^(euler_gamma), which is what this returns (flagged: callers should
    treat m = 3 bounds as limiting values).
    """
    if m < 3:
        raise ValueError("decay factor defined for m >= 3")
    if m == 3:
        return S * R * math.exp(np.euler_gamma)
    return S * R * math.exp(-math.lgamma(m - 2) / (m - 3))


@dataclass(frozen=True)
class BoundParams:
    """Inputs for the closed-form spectral bounds.

    QA = sqrt(sum a(x_i)^2), QB = sum a(x_i) c(x_i), QC = sqrt(sum c(x_i)^2)
    accumulate over the interior collocation points.
    """

    S: float
    R: float
    lam1: float
    lam2: float
    lam3: float
    g1_norm: float
    g2_norm: float
    n: int
    N: int
    QA: float
    QB: float
    QC: float
    frobenius: Optional[float] = None

    @classmethod
    def from_problem(cls, problem: PDEProblem, grid: CollocationGrid, S: float,
                     N: int, frobenius: float | None = None) -> "BoundParams":
        xs = grid.interior
        a, c = problem.a(xs), problem.c(xs)
        return cls(
            S=float(S), R=problem.domain.R,
            lam1=problem.a.sup_bound, lam2=problem.b.sup_bound, lam3=problem.c.sup_bound,
            g1_norm=problem.boundary.g1_norm, g2_norm=problem.boundary.g2_norm,
            n=grid.n, N=int(N),
            QA=float(np.sqrt(np.sum(a**2))), QB=float(np.sum(a * c)),
            QC=float(np.sqrt(np.sum(c**2))), frobenius=frobenius,
        )


def singular_value_upper_bound(m: int, p: BoundParams) -> float:
    """Closed-form upper bound on sigma_m of the assembled matrix.

    For m in {1, 2} this is ||Phi||_F / sqrt(m) (with the Frobenius norm
    bounded through S when not supplied); for m >= 3 it is the decay-factor
    bound quoted in the module docstring.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m <= 2:
        if p.frobenius is not None:
            frob = p.frobenius
        else:
            frob = math.sqrt(p.N * (p.QA**2 * p.S**4 + 2 * abs(p.QB) * p.S**2 + p.QC**2
                                    + p.g1_norm**2 * p.S**2 + p.g2_norm**2))
        return frob / math.sqrt(m)
    th = tail_decay_factor(m, p.S, p.R)
    interior = math.sqrt(3 * p.n - 6) * (p.lam1 * p.S**2 + p.lam2 * p.S * th + p.lam3 * th**2)
    boundary = math.sqrt(2.0) * (p.g1_norm * p.S + p.g2_norm * th) * th
    return math.sqrt(p.N) * (interior + boundary) * (1.0 + th) * th ** (m - 3)


@dataclass(frozen=True)
class ConditionLowerBound:
    rho: float            # exact Frobenius-mass ratio of the sample
    rho_bound: float      # sign-pattern lower bound (1 when QB <= 0)
    kappa_lower: float
    M: int


def condition_lower_bound(p: BoundParams, k: np.ndarray) -> ConditionLowerBound:
    """Exact rho for the drawn frequencies plus the analytic lower bounds.

    The kappa bound uses the sign-pattern value of rho:
      QB <= 0                      -> 1
      QB > 0, QB != QA*QC          -> 1 - QB/(QA*QC)
      QB > 0, QB = QA*QC, QA S^2 < QC -> 1 - 2 QB S^2 / (QA^2 S^4 + QC^2)
    with a trivial 0 in the remaining (measure-zero) corner.
    """
    k = np.asarray(getattr(k, "k", k), dtype=float)
    if k.size == 0:
        raise ValueError("need a nonempty frequency sample")
    num = np.sum(p.QA**2 * k**4 - 2 * p.QB * k**2 + p.QC**2)
    den = np.sum(p.QA**2 * k**4 + p.QC**2)
    rho = float(num / den) if den > 0 else math.inf

    if p.QB <= 0:
        rho_bound = 1.0
    elif not math.isclose(p.QB, p.QA * p.QC, rel_tol=1e-12):
        rho_bound = 1.0 - p.QB / (p.QA * p.QC)
    elif p.QA * p.S**2 < p.QC:
        rho_bound = 1.0 - 2 * p.QB * p.S**2 / (p.QA**2 * p.S**4 + p.QC**2)
    else:
        rho_bound = 0.0

    M = min(p.n, 2 * p.N)
    th = tail_decay_factor(M, p.S, p.R)
    kappa_lower = math.sqrt(max(rho_bound, 0.0) / (6 * M)) * th ** (3 - M) / max(1.0, th**3)
    return ConditionLowerBound(rho=rho, rho_bound=rho_bound,
                               kappa_lower=kappa_lower, M=M)


# ---------------------------------------------------------------------------
# Partition sandwich
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichBounds:
    lower: float
    upper: float
    lower_simplified: float
    upper_simplified: float


def _spectrum(a: np.ndarray) -> np.ndarray:
    if a.size == 0 or min(a.shape) == 0:
        return np.zeros(0)
    return np.linalg.svd(a, compute_uv=False)


def _sigma_at(s: np.ndarray, idx: int) -> float:
    """idx is 1-based; indices past the stored spectrum count as zero."""
    return float(s[idx - 1]) if 1 <= idx <= len(s) else 0.0


class _SandwichData:
    """Caches the block spectra so bounds at many indices stay cheap."""

    def __init__(self, blocks: PatchBlocks, diag: BlockDiagonals):
        self.s_B = _spectrum(diag.B_diag)
        self.s_De = _spectrum(diag.D_even)
        self.s_Do = _spectrum(diag.D_odd)
        self.s_Bp = [_spectrum(b) for b in blocks.B]
        self.s_Dp = [_spectrum(d) for d in blocks.D]
        self.N_even = diag.N_even
        self.N_odd = diag.N_odd
        self.P = blocks.P
        self.total_cols = diag.N_even + diag.N_odd

    def at(self, m: int) -> SandwichBounds:
        if not 1 <= m <= self.total_cols:
            raise ValueError(f"m must lie in 1..{self.total_cols}")
        lower = _sigma_at(self.s_B, m)
        ks = range(max(1, m - self.N_odd), min(m, self.N_even + 1) + 1)
        upper = min(math.hypot(_sigma_at(self.s_De, k), _sigma_at(self.s_Do, m + 1 - k))
                    for k in ks)
        j = -(-m // (self.P + 1))        # ceil(m / (P+1))
        lower_s = min(_sigma_at(s, j) for s in self.s_Bp)
        upper_s = math.sqrt(2.0) * max(_sigma_at(s, j) for s in self.s_Dp)
        return SandwichBounds(lower=lower, upper=upper,
                              lower_simplified=lower_s, upper_simplified=upper_s)


def pum_sandwich(blocks: PatchBlocks, m, diag: BlockDiagonals | None = None):
    """Two-sided spectral bounds from the patch blocks at index m (or indices).

    Returns SandwichBounds for a scalar m, or a list when m is a sequence.
    """
    if diag is None:
        from scipy.linalg import block_diag
        diag = BlockDiagonals(B_diag=block_diag(*blocks.B),
                              D_even=block_diag(*blocks.D[0::2]),
                              D_odd=block_diag(*blocks.D[1::2]))
    data = _SandwichData(blocks, diag)
    if np.ndim(m) == 0:
        return data.at(int(m))
    return [data.at(int(mm)) for mm in np.asarray(m).ravel()]


# ---------------------------------------------------------------------------
# Expected-loss bound for smooth solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LossBoundParams:
    """Inputs for the closed-form expected-loss bound (index s <= 1 only)."""

    M_u: float
    C_u: float
    s: float
    S: float
    R: float
    N: int
    c_free: float = 2.0
    gamma: float = 1.0
    lam1: float = 1.0
    lam2: float = 0.0
    lam3: float = 0.0
    g1_norm: float = 0.0
    g2_norm: float = math.sqrt(2.0)

    def __post_init__(self):
        if self.c_free <= 1:
            raise ValueError("the free constant must exceed 1")
        if self.s > 1:
            raise ValueError("closed-form bound needs index s <= 1; use rate fits instead")


def expected_loss_bound(p: LossBoundParams) -> float:
    """Evaluate the two-term expected-loss bound (generic prefactor set to 1).

    tau = R max(C_u, S) Gamma(2N-1)^((s-1)/(2N-2)); the first term decays like
    N exp(-(c-1-ln c)(N-1)), the second like (2 e^c tau^2)^(2N-2).  Only
    trends and ratios are meaningful because the true bound carries an
    unspecified constant.
    """
    N, c = p.N, p.c_free
    mx = max(p.C_u, p.S)
    tau = p.R * mx * math.exp((p.s - 1) * math.lgamma(2 * N - 1) / (2 * N - 2))

    def eta_in(t: float) -> float:
        return (p.M_u**2 * p.R
                * (p.lam1**2 * mx**4 + p.lam2**2 * mx**2 * t**2 + p.lam3**2 * t**4)
                * (1 + t**2))

    def eta_bd(t: float) -> float:
        return (p.gamma * p.M_u**2
                * (p.g1_norm**2 * mx**2 + p.g2_norm**2 * t**2)
                * (1 + t**2) * t**2)

    first = (eta_in(1.0) + eta_bd(1.0)) * N * math.exp(-(c - 1 - math.log(c)) * (N - 1))
    second = ((eta_in(tau) + (1 + N ** (1 - 2 * p.s)) * eta_bd(tau))
              * (2 * math.exp(c) * tau**2) ** (2 * N - 2))
    return first + second


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    kind: str          # "exponential" | "stretched" | "algebraic"
    rate: float        # kappa for (stretched) exponentials, slope for algebraic
    residual: float    # RMS residual of the log-space fit
    stretch: Optional[float] = None   # s in exp(-kappa x^(1/s)) fits
    intercept: float = 0.0


def _linear_fit(t: np.ndarray, y: np.ndarray):
    A = np.column_stack([np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return coef, float(np.sqrt(np.mean(resid**2)))


def rate_fit(records: Sequence, kind: str = "auto") -> RateFit:
    """Fit log-error against candidate decay models and keep the best.

    records: pairs (x, error) with x the feature count or the patch size.
    Candidates: exponential exp(-kappa x), stretched exp(-kappa x^(1/s)) for
    a small grid of s > 1, and algebraic x^slope (log-log).  `kind` forces a
    single family; "auto" selects by AIC, so the stretched family (whose
    exponent is scanned, one extra effective parameter) must beat the
    two-parameter families by the usual complexity margin.  The reported
    residual is the RMS misfit of log-error.
    """
    pts = np.asarray(list(records), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4:
        raise ValueError("need at least 4 (x, error) records")
    x, err = pts[:, 0], pts[:, 1]
    if np.any(err <= 0):
        raise ValueError("errors must be positive")
    if np.any(x <= 0):
        raise ValueError("sweep values must be positive")
    loge = np.log(err)
    n = len(x)

    def aic(rms: float, n_params: int) -> float:
        return n * math.log(max(rms, 1e-300) ** 2) + 2 * n_params

    fits = []
    if kind in ("auto", "exponential"):
        coef, res = _linear_fit(x, loge)
        fits.append((aic(res, 2),
                     RateFit("exponential", rate=-coef[1], residual=res, intercept=coef[0])))
    if kind in ("auto", "stretched"):
        best = None
        for s in (1.5, 2.0, 2.5, 3.0, 4.0):
            coef, res = _linear_fit(x ** (1.0 / s), loge)
            cand = RateFit("stretched", rate=-coef[1], residual=res,
                           stretch=s, intercept=coef[0])
            if best is None or cand.residual < best.residual:
                best = cand
        fits.append((aic(best.residual, 3), best))
    if kind in ("auto", "algebraic"):
        coef, res = _linear_fit(np.log(x), loge)
        fits.append((aic(res, 2),
                     RateFit("algebraic", rate=coef[1], residual=res, intercept=coef[0])))
    if not fits:
        raise ValueError(f"unknown fit kind {kind!r}")
    return min(fits, key=lambda t: t[0])[1]


def truncate_at_floor(records: Sequence, min_points: int = 4,
                      improvement: float = 0.8) -> list:
    """Drop the trailing sweep points where the error has stopped decreasing.

    Keeps the prefix up to the first consecutive pair whose error ratio
    exceeds `improvement` (i.e. less than a 20% drop by default), but never
    fewer than `min_points` points.  Use before fitting decay rates so the
    precision floor does not masquerade as a slow model.
    """
    pts = list(records)
    cut = len(pts)
    for i in range(1, len(pts)):
        if pts[i][1] > improvement * pts[i - 1][1]:
            cut = i
            break
    return pts[:max(cut, min_points)]


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def write_spectrum_csv(path, report: SpectralReport,
                       upper_bounds: Sequence[float] | None = None,
                       sandwich: Sequence[SandwichBounds] | None = None) -> None:
    """Columns: m, sigma, upper_bound, sandwich_lower, sandwich_upper, floor."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# rfm1d csv v1 spectrum"])
        writer.writerow(["m", "sigma", "upper_bound", "sandwich_lower",
                         "sandwich_upper", "floor"])
        for i, sig in enumerate(report.sigma):
            m = i + 1
            ub = "" if upper_bounds is None else repr(float(upper_bounds[i]))
            lo = hi = ""
            if sandwich is not None:
                lo, hi = repr(sandwich[i].lower), repr(sandwich[i].upper)
            writer.writerow([m, repr(float(sig)), ub, lo, hi, repr(report.floor)])
