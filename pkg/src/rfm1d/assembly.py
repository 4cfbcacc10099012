"""Collocation grids and dense assembly of the feature matrix Phi.

Rows are collocation points (interior points first, then the two endpoints)
and columns are features.  Interior rows apply the differential operator to
each feature; the two boundary rows apply the boundary operator scaled by
sqrt(gamma), so that ||Phi alpha - F||^2 is exactly the collocation
discretisation of the least-squares loss.

For partitioned models the columns group by patch (cos block then sin block
within each patch) and each column is supported only on the rows inside its
patch.  The block map records, per patch, the rows whose normalised
coordinate l_p(x_i) falls in the left overlap (-5/4, -3/4), the plateau
[-3/4, 3/4] (ties go to the closed plateau) and the right overlap
(3/4, 5/4).  Stacking a patch's three zones gives the local matrix D_p; the
plateau rows alone give B_p.  These local blocks drive the spectral
comparison bounds in `rfm1d.spectra`.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import block_diag

from .features import FeatureSample, GlobalPUMModel, pou_bump
from .problem import PDEProblem

__all__ = [
    "CollocationGrid",
    "FeatureMatrix",
    "RightHandSide",
    "PatchBlocks",
    "BlockDiagonals",
    "equidistant_grid",
    "assemble_plain",
    "assemble_pum",
    "extract_blocks",
    "blockdiag_compare",
    "export_matrix_csv",
    "export_sparsity_triplets",
]


@dataclass(frozen=True, eq=False)
class CollocationGrid:
    """Interior points in (-R, R) plus the two endpoints; gamma weights the latter."""

    interior: np.ndarray
    R: float
    gamma: float = 1.0

    def __post_init__(self):
        if len(self.interior) < 1:
            raise ValueError("need at least one interior point")
        if np.any(np.abs(self.interior) >= self.R):
            raise ValueError("interior points must lie strictly inside (-R, R)")

    @property
    def n(self) -> int:
        return len(self.interior) + 2

    @property
    def points(self) -> np.ndarray:
        """All collocation points in row order: interior, -R, R."""
        return np.concatenate([self.interior, [-self.R, self.R]])


def equidistant_grid(n: int, R: float, gamma: float = 1.0) -> CollocationGrid:
    """n equidistant points on [-R, R]; the endpoints become the boundary rows."""
    if n < 3:
        raise ValueError("n must be >= 3")
    xs = np.linspace(-R, R, n)
    return CollocationGrid(interior=xs[1:-1], R=float(R), gamma=float(gamma))


@dataclass(frozen=True, eq=False)
class BlockMap:
    """Per-patch column ranges and row-index sets of the three support zones."""

    col_ranges: tuple          # (start, stop) per patch
    zone_rows: tuple           # per patch: dict with keys "A", "B", "C" -> row indices


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray          # (n, 2N) dense
    row_points: np.ndarray      # collocation point per row
    row_is_boundary: np.ndarray
    col_patch: np.ndarray       # patch index per column (all zero for plain models)
    col_trig: np.ndarray        # 0 = cos, 1 = sin
    col_freq: np.ndarray        # frequency index within the patch
    pum: bool = False
    block_map: Optional[BlockMap] = None

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class RightHandSide:
    values: np.ndarray

    def __len__(self):
        return len(self.values)


def _check_distinct(k: np.ndarray) -> None:
    if len(np.unique(k)) != len(k):
        raise ValueError("duplicate frequencies; resample before assembling")


def _boundary_coeffs(problem: PDEProblem):
    bc = problem.boundary
    root_gamma = np.sqrt(problem.gamma)
    return root_gamma, bc


def assemble_plain(problem: PDEProblem, sample: FeatureSample,
                   grid: CollocationGrid):
    """Assemble Phi and F for a plain model: columns 1..N cos, N+1..2N sin."""
    _check_distinct(sample.k)
    k = sample.k
    N = len(k)
    xs = grid.interior
    a, b, c = problem.a(xs), problem.b(xs), problem.c(xs)
    t = np.outer(xs, k)
    cos_t, sin_t = np.cos(t), np.sin(t)
    # interior rows: L applied to cos(k x) and sin(k x)
    interior_cos = (c[:, None] - a[:, None] * k**2) * cos_t - b[:, None] * k * sin_t
    interior_sin = (c[:, None] - a[:, None] * k**2) * sin_t + b[:, None] * k * cos_t

    root_gamma, bc = _boundary_coeffs(problem)
    R = grid.R
    rows_bd = np.empty((2, 2 * N))
    for row, (x, g1, g2) in enumerate([(-R, bc.g1_left, bc.g2_left),
                                       (R, bc.g1_right, bc.g2_right)]):
        rows_bd[row, :N] = root_gamma * (-g1 * k * np.sin(k * x) + g2 * np.cos(k * x))
        rows_bd[row, N:] = root_gamma * (g1 * k * np.cos(k * x) + g2 * np.sin(k * x))

    values = np.vstack([np.hstack([interior_cos, interior_sin]), rows_bd])
    rhs = np.concatenate([problem.f(xs),
                          [root_gamma * bc.g_left, root_gamma * bc.g_right]])

    matrix = FeatureMatrix(
        values=values,
        row_points=np.concatenate([xs, [-R, R]]),
        row_is_boundary=np.concatenate([np.zeros(len(xs), bool), [True, True]]),
        col_patch=np.zeros(2 * N, dtype=int),
        col_trig=np.concatenate([np.zeros(N, int), np.ones(N, int)]),
        col_freq=np.concatenate([np.arange(N), np.arange(N)]),
        pum=False,
        block_map=None,
    )
    return matrix, RightHandSide(rhs)


def assemble_pum(problem: PDEProblem, model: GlobalPUMModel,
                 grid: CollocationGrid):
    """Assemble Phi and F for a partitioned model (coefficients in `model` are ignored).

    Each column (p, trig, j) carries the product-rule expansion of the
    operator applied to phi_p times the local feature, with one chain factor
    1/r per derivative order; it vanishes on rows outside the patch support.
    """
    pgrid = model.grid
    P, r = pgrid.P, pgrid.r
    inv_r = 1.0 / r
    N_p = model.N_p
    xs = grid.interior
    pts = np.concatenate([xs, [-grid.R, grid.R]])
    n = len(pts)
    a, b, c = problem.a(xs), problem.b(xs), problem.c(xs)
    root_gamma, bc = _boundary_coeffs(problem)

    values = np.zeros((n, 2 * (P + 1) * N_p))
    col_patch = np.repeat(np.arange(P + 1), 2 * N_p)
    col_trig = np.tile(np.concatenate([np.zeros(N_p, int), np.ones(N_p, int)]), P + 1)
    col_freq = np.tile(np.concatenate([np.arange(N_p), np.arange(N_p)]), P + 1)

    col_ranges = []
    zone_rows = []
    for p in range(P + 1):
        local_k = model.locals[p].sample.k
        _check_distinct(local_k)
        c0, c1 = 2 * N_p * p, 2 * N_p * (p + 1)
        col_ranges.append((c0, c1))

        t_all = pgrid.local_coord(p, pts)
        # half-open support matches the bump branches, so a point landing
        # exactly on a patch edge keeps sum_p phi_p'' = 0 across the rows
        support = (t_all >= -1.25) & (t_all < 1.25)
        if not np.any(support):
            raise ValueError(f"patch {p} contains no collocation points")
        in_A = (t_all >= -1.25) & (t_all < -0.75)
        in_B = (np.abs(t_all) <= 0.75)
        in_C = (t_all > 0.75) & (t_all < 1.25)
        zone_rows.append({"A": np.flatnonzero(in_A),
                          "B": np.flatnonzero(in_B),
                          "C": np.flatnonzero(in_C)})
        plateau_interior = np.count_nonzero(in_B)
        if plateau_interior < 2 * N_p:
            warnings.warn(
                f"patch {p} has only {plateau_interior} plateau points for "
                f"{2 * N_p} local features; spectral comparisons may degrade",
                stacklevel=2,
            )

        sup = np.flatnonzero(support)
        t = t_all[sup]
        phi0 = pou_bump(t, 0)
        phi1 = pou_bump(t, 1) * inv_r
        phi2 = pou_bump(t, 2) * inv_r**2
        arg = np.outer(t, local_k)
        cos_a, sin_a = np.cos(arg), np.sin(arg)
        kr = local_k * inv_r

        for which, v0, v1, v2 in (
            ("cos", cos_a, -kr * sin_a, -(kr**2) * cos_a),
            ("sin", sin_a, kr * cos_a, -(kr**2) * sin_a),
        ):
            cols = slice(c0, c0 + N_p) if which == "cos" else slice(c0 + N_p, c1)
            block = np.zeros((len(sup), N_p))
            interior_mask = sup < len(xs)
            ii = sup[interior_mask]
            im = np.flatnonzero(interior_mask)
            block[im] = (
                a[ii, None] * phi0[im, None] * v2[im]
                + (2.0 * a[ii, None] * phi1[im, None] + b[ii, None] * phi0[im, None]) * v1[im]
                + (a[ii, None] * phi2[im, None] + b[ii, None] * phi1[im, None]
                   + c[ii, None] * phi0[im, None]) * v0[im]
            )
            bd_mask = ~interior_mask
            for local_row in np.flatnonzero(bd_mask):
                row = sup[local_row]
                side_left = row == len(xs)
                g1 = bc.g1_left if side_left else bc.g1_right
                g2 = bc.g2_left if side_left else bc.g2_right
                block[local_row] = root_gamma * (
                    g1 * (phi1[local_row] * v0[local_row] + phi0[local_row] * v1[local_row])
                    + g2 * phi0[local_row] * v0[local_row]
                )
            values[sup, cols] = block

    rhs = np.concatenate([problem.f(xs),
                          [root_gamma * bc.g_left, root_gamma * bc.g_right]])
    matrix = FeatureMatrix(
        values=values,
        row_points=pts,
        row_is_boundary=np.concatenate([np.zeros(len(xs), bool), [True, True]]),
        col_patch=col_patch,
        col_trig=col_trig,
        col_freq=col_freq,
        pum=True,
        block_map=BlockMap(col_ranges=tuple(col_ranges), zone_rows=tuple(zone_rows)),
    )
    return matrix, RightHandSide(rhs)


# ---------------------------------------------------------------------------
# Block extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PatchBlocks:
    """Per-patch submatrices: overlap zones A/C, plateau B, and the stack D."""

    A: tuple
    B: tuple
    C: tuple
    D: tuple
    col_ranges: tuple
    zone_rows: tuple

    @property
    def P(self) -> int:
        return len(self.B) - 1


def extract_blocks(matrix: FeatureMatrix) -> PatchBlocks:
    """Slice the patch blocks out of a partitioned matrix.

    D_p stacks [A_p; B_p; C_p]; A_0 and C_P are empty because the outermost
    overlaps fall outside the domain.
    """
    if not matrix.pum or matrix.block_map is None:
        raise ValueError("block extraction needs a partitioned assembly")
    bm = matrix.block_map
    A, B, C, D = [], [], [], []
    for (c0, c1), zones in zip(bm.col_ranges, bm.zone_rows):
        cols = matrix.values[:, c0:c1]
        a_blk = cols[zones["A"]]
        b_blk = cols[zones["B"]]
        c_blk = cols[zones["C"]]
        A.append(a_blk)
        B.append(b_blk)
        C.append(c_blk)
        D.append(np.vstack([a_blk, b_blk, c_blk]))
    return PatchBlocks(A=tuple(A), B=tuple(B), C=tuple(C), D=tuple(D),
                       col_ranges=bm.col_ranges, zone_rows=bm.zone_rows)


@dataclass(frozen=True, eq=False)
class BlockDiagonals:
    """Block-diagonal comparison matrices built from the patch blocks."""

    B_diag: np.ndarray
    D_even: np.ndarray
    D_odd: np.ndarray

    @property
    def N_even(self) -> int:
        return self.D_even.shape[1]

    @property
    def N_odd(self) -> int:
        return self.D_odd.shape[1]


def blockdiag_compare(matrix: FeatureMatrix) -> BlockDiagonals:
    """diag(B_0..B_P) and the even/odd stacks diag(D_0, D_2, ...), diag(D_1, D_3, ...)."""
    blocks = extract_blocks(matrix)
    return BlockDiagonals(
        B_diag=block_diag(*blocks.B),
        D_even=block_diag(*blocks.D[0::2]),
        D_odd=block_diag(*blocks.D[1::2]),
    )


def reassemble_from_blocks(matrix: FeatureMatrix, blocks: PatchBlocks) -> np.ndarray:
    """Rebuild the dense matrix from the extracted blocks (testing aid)."""
    out = np.zeros_like(matrix.values)
    for (c0, c1), zones, a_blk, b_blk, c_blk in zip(
            blocks.col_ranges, blocks.zone_rows, blocks.A, blocks.B, blocks.C):
        out[zones["A"], c0:c1] = a_blk
        out[zones["B"], c0:c1] = b_blk
        out[zones["C"], c0:c1] = c_blk
    return out


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def export_matrix_csv(matrix: FeatureMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# rfm1d csv v1 dense-matrix"])
        for row in matrix.values:
            writer.writerow([repr(float(v)) for v in row])


def export_sparsity_triplets(matrix: FeatureMatrix, path) -> None:
    """Coordinate triplets (row, col, value) of the nonzero entries."""
    rows, cols = np.nonzero(matrix.values)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# rfm1d csv v1 sparsity-triplets"])
        writer.writerow(["row", "col", "value"])
        for i, j in zip(rows, cols):
            writer.writerow([int(i), int(j), repr(float(matrix.values[i, j]))])
