"""Least-squares solve, loss evaluation and error norms.

The collocation system Phi alpha = F is solved by a truncated-SVD
pseudo-inverse: singular values below rcond * sigma_1 are dropped and the
minimum-norm minimiser is returned.  The matrices are exponentially
ill-conditioned by construction, so untruncated direct solves are
meaningless in double precision; rcond defaults to 1e-13 and only the
retained subspace is trusted.  Iterative solvers are deliberately absent.

The continuous loss

    ||L u_N - f||^2_{L2(-R,R)} + gamma * [(B u_N - g)(-R)^2 + (B u_N - g)(R)^2]

is evaluated by composite Gauss-Legendre quadrature whose panels align with
the partition-of-unity zone boundaries (the residual of a partitioned model
is only piecewise smooth there) and subdivide until each panel resolves the
highest feature frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assembly import CollocationGrid, assemble_plain, assemble_pum
from .features import (FeatureSample, GlobalPUMModel, RandomFeatureModel,
                       eval_model, eval_pum_model, pum_skeleton,
                       sample_frequencies)
from .problem import Domain, ManufacturedSolution, PDEProblem

__all__ = [
    "SolveOptions",
    "FeatureConfig",
    "SolveResult",
    "lstsq_svd",
    "loss_eval",
    "error_norms",
    "function_norms",
    "solve_problem",
]


@dataclass(frozen=True)
class SolveOptions:
    rcond: float = 1e-13
    quadrature_order: int = 16      # Gauss-Legendre nodes per panel
    row_weighting: bool = False     # sqrt(2R/(n-2)) scaling of interior rows (study aid)

    def __post_init__(self):
        if not 0 < self.rcond < 1:
            raise ValueError("rcond must lie in (0, 1)")
        if self.quadrature_order < 2:
            raise ValueError("quadrature_order must be >= 2")


@dataclass(frozen=True)
class FeatureConfig:
    """Plain (N) or partitioned (P patches, N_p local features) trial space."""

    S: float
    seed: int
    N: Optional[int] = None
    P: Optional[int] = None
    N_p: Optional[int] = None

    def __post_init__(self):
        plain = self.N is not None
        pum = self.P is not None and self.N_p is not None
        if plain == pum:
            raise ValueError("specify either N (plain) or P and N_p (partitioned)")

    @property
    def pum(self) -> bool:
        return self.N is None

    @property
    def total_features(self) -> int:
        return self.N if self.N is not None else (self.P + 1) * self.N_p


@dataclass(frozen=True, eq=False)
class SolveResult:
    alpha: np.ndarray
    residual_2norm: float
    numerical_rank: int
    loss: float
    errors_l2: Optional[tuple]      # (e0, e1, e2), absolute L2 norms
    kappa: float
    seed: int
    N: Optional[int]
    P: Optional[int]
    N_p: Optional[int]
    S: float
    R: float
    n: int
    rcond: float

    def to_record(self) -> dict:
        e0, e1, e2 = self.errors_l2 if self.errors_l2 is not None else (None, None, None)
        return {
            "seed": self.seed, "N": self.N, "P": self.P, "N_p": self.N_p,
            "S": self.S, "R": self.R, "n": self.n, "rcond": self.rcond,
            "loss": self.loss, "e0": e0, "e1": e1, "e2": e2,
            "rank": self.numerical_rank, "kappa": self.kappa,
        }


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def _panel_rule(breakpoints: np.ndarray, nodes_per_panel: int):
    """Composite Gauss-Legendre nodes and weights over consecutive panels."""
    ref_x, ref_w = np.polynomial.legendre.leggauss(nodes_per_panel)
    xs, ws = [], []
    for lo, hi in zip(breakpoints[:-1], breakpoints[1:]):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        xs.append(mid + half * ref_x)
        ws.append(half * ref_w)
    return np.concatenate(xs), np.concatenate(ws)


def _model_breakpoints(model, R: float) -> np.ndarray:
    """Panel breakpoints: zone boundaries of the partition, subdivided so each
    panel spans at most ~pi/2 of the fastest oscillation."""
    pts = {-R, R}
    if isinstance(model, GlobalPUMModel):
        grid = model.grid
        k_max = max(float(np.max(m.sample.k)) for m in model.locals) / grid.r
        for p in range(grid.P + 1):
            xp = grid.centers[p]
            for off in (-1.25, -0.75, 0.75, 1.25):
                x = xp + off * grid.r
                if -R < x < R:
                    pts.add(x)
    else:
        k_max = float(np.max(model.sample.k))
    base = np.array(sorted(pts))
    h_target = min(2 * R / 8, math.pi / (2 * max(k_max, 1.0)))
    pieces = [np.linspace(lo, hi, max(2, int(np.ceil((hi - lo) / h_target)) + 1))
              for lo, hi in zip(base[:-1], base[1:])]
    return np.unique(np.concatenate(pieces))


def _derivs(model, x, order):
    if isinstance(model, GlobalPUMModel):
        return eval_pum_model(model, x, order)
    return eval_model(model, x, order)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def lstsq_svd(matrix: np.ndarray, rhs: np.ndarray, rcond: float = 1e-13):
    """Minimum-norm least squares through a truncated SVD.

    Returns (alpha, numerical_rank, residual_2norm); singular values below
    rcond * sigma_1 are treated as zero.
    """
    matrix = np.asarray(getattr(matrix, "values", matrix), dtype=float)
    rhs = np.asarray(getattr(rhs, "values", rhs), dtype=float)
    if matrix.size == 0:
        raise ValueError("matrix must be nonempty")
    U, s, Vt = np.linalg.svd(matrix, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros(matrix.shape[1]), 0, float(np.linalg.norm(rhs))
    keep = s > rcond * s[0]
    rank = int(np.count_nonzero(keep))
    coeffs = (U[:, keep].T @ rhs) / s[keep]
    alpha = Vt[keep].T @ coeffs
    residual = float(np.linalg.norm(matrix @ alpha - rhs))
    return alpha, rank, residual


def loss_eval(problem: PDEProblem, model, options: SolveOptions = SolveOptions()) -> float:
    """Continuous loss of the model: interior quadrature plus the two-point
    boundary penalty scaled by gamma."""
    R = problem.domain.R
    xq, wq = _panel_rule(_model_breakpoints(model, R), options.quadrature_order)
    residual = (problem.a(xq) * _derivs(model, xq, 2)
                + problem.b(xq) * _derivs(model, xq, 1)
                + problem.c(xq) * _derivs(model, xq, 0)
                - problem.f(xq))
    interior = float(wq @ residual**2)

    bc = problem.boundary
    bd = 0.0
    for x, g1, g2, g in ((-R, bc.g1_left, bc.g2_left, bc.g_left),
                         (R, bc.g1_right, bc.g2_right, bc.g_right)):
        val = g1 * float(_derivs(model, x, 1)) + g2 * float(_derivs(model, x, 0)) - g
        bd += val * val
    return interior + problem.gamma * bd


def error_norms(model, u_true: ManufacturedSolution, domain: Domain,
                options: SolveOptions = SolveOptions()):
    """L2 norms of u_N^(l) - u^(l) for l = 0, 1, 2.  model=None means u_N = 0."""
    R = domain.R
    if model is None:
        breaks = np.linspace(-R, R, 65)
    else:
        breaks = _model_breakpoints(model, R)
    xq, wq = _panel_rule(breaks, options.quadrature_order)
    out = []
    for order in (0, 1, 2):
        diff = -u_true.deriv(xq, order)
        if model is not None:
            diff = diff + _derivs(model, xq, order)
        out.append(float(np.sqrt(wq @ diff**2)))
    return tuple(out)


def function_norms(u: ManufacturedSolution, domain: Domain,
                   options: SolveOptions = SolveOptions()):
    """L2 norms of u, u', u'' (used to report relative errors)."""
    return error_norms(None, u, domain, options)


def solve_problem(problem: PDEProblem, features: FeatureConfig,
                  grid: CollocationGrid, options: SolveOptions = SolveOptions()) -> SolveResult:
    """Assemble, solve and evaluate one configuration end to end.

    Deterministic given the seed.  Error norms are reported when the problem
    carries its manufactured solution.
    """
    R = problem.domain.R
    if features.pum:
        skeleton = pum_skeleton(R=R, P=features.P, N_p=features.N_p,
                                S=features.S, seed=features.seed)
        matrix, rhs = assemble_pum(problem, skeleton, grid)
    else:
        sample = sample_frequencies(features.N, features.S, features.seed)
        matrix, rhs = assemble_plain(problem, sample, grid)

    values, fvec = matrix.values, rhs.values
    if options.row_weighting:
        w = math.sqrt(2 * R / len(grid.interior))
        values = values.copy()
        fvec = fvec.copy()
        values[~matrix.row_is_boundary] *= w
        fvec[: len(grid.interior)] *= w

    alpha, rank, residual = lstsq_svd(values, fvec, options.rcond)
    s = np.linalg.svd(values, compute_uv=False)
    M = min(values.shape)
    kappa = float(s[0] / s[M - 1]) if s[M - 1] > 0 else math.inf

    if features.pum:
        model = skeleton.with_coefficients(alpha)
    else:
        model = RandomFeatureModel(sample, alpha)

    loss = loss_eval(problem, model, options)
    errors = None
    if problem.solution is not None:
        errors = error_norms(model, problem.solution, problem.domain, options)

    return SolveResult(
        alpha=alpha, residual_2norm=residual, numerical_rank=rank, loss=loss,
        errors_l2=errors, kappa=kappa, seed=features.seed, N=features.N,
        P=features.P, N_p=features.N_p, S=features.S, R=R, n=grid.n,
        rcond=options.rcond,
    )
