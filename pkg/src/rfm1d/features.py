"""Random trigonometric feature models and the partition-of-unity machinery.

A plain model with N frequencies k_1..k_N drawn uniformly from (0, S) is

    u_N(x) = sum_i alpha_i cos(k_i x) + sum_i alpha_{N+i} sin(k_i x).

The partitioned variant covers [-R, R] with P+1 patches centered at
x_p = -R + 2 r p (r = R / P), glues local models v_p through the bump

    phi(t) = (1 + sin(2 pi t)) / 2   on [-5/4, -3/4)
           = 1                       on [-3/4,  3/4)
           = (1 - sin(2 pi t)) / 2   on [ 3/4,  5/4)
           = 0                       elsewhere,

and evaluates u_N(x) = sum_p phi(l_p(x)) v_p(l_p(x)) in the normalised patch
coordinate l_p(x) = (x - x_p) / r.  phi is C^1 with a jump in phi'' at the
branch points, and the two ramps sum to one on every overlap, so the family
{phi_p} is an exact partition of unity on [-R, R].

Frequencies come from SplitMix64, a 64-bit generator with a published state
transition, so any implementation in any language reproduces the streams:

    state_{n+1} = state_n + 0x9E3779B97F4A7C15          (mod 2^64)
    z = state_{n+1}
    z = (z XOR z >> 30) * 0xBF58476D1CE4E5B9            (mod 2^64)
    z = (z XOR z >> 27) * 0x94D049BB133111EB            (mod 2^64)
    output = z XOR z >> 31

A uniform draw on (0, S) is (output >> 11) * 2^-53 * S, redrawing the
(probability 2^-53) exact zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "SplitMix64",
    "FeatureSample",
    "RandomFeatureModel",
    "PoUGrid",
    "GlobalPUMModel",
    "sample_frequencies",
    "eval_model",
    "pou_bump",
    "eval_pum_model",
    "partition_check",
    "pum_skeleton",
    "export_frequencies_csv",
]

_MASK64 = (1 << 64) - 1
_GAMMA64 = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Portable 64-bit generator; see the module docstring for the transition."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA64) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, scale: float = 1.0) -> float:
        """One draw from the open interval (0, scale)."""
        while True:
            u = (self.next_u64() >> 11) * 2.0**-53
            if u > 0.0:
                return u * scale

    def uniforms(self, count: int, scale: float = 1.0) -> np.ndarray:
        """Vectorised equivalent of count successive `uniform` calls."""
        idx = np.arange(1, count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + idx * np.uint64(_GAMMA64)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        u = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
        if np.any(u <= 0.0):
            # zero draws trigger the sequential rejection path
            return np.array([self.uniform(scale) for _ in range(count)])
        self._state = (self._state + count * _GAMMA64) & _MASK64
        return u * scale


# ---------------------------------------------------------------------------
# Frequency samples and plain models
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FeatureSample:
    """N frequencies in (0, S), reproducible from the seed."""

    k: np.ndarray
    S: float
    seed: int

    @property
    def N(self) -> int:
        return len(self.k)


def sample_frequencies(N: int, S: float, seed: int) -> FeatureSample:
    """Draw N distinct frequencies uniformly from (0, S).

    Collisions (possible only through rounding) are resolved by redrawing the
    later entry from the same stream, keeping the result deterministic.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if S <= 0:
        raise ValueError("S must be positive")
    rng = SplitMix64(seed)
    k = rng.uniforms(N, S)
    while True:
        _, first = np.unique(k, return_index=True)
        if len(first) == N:
            break
        dup = np.setdiff1d(np.arange(N), first)
        for i in dup:
            k[i] = rng.uniform(S)
    return FeatureSample(k=k, S=float(S), seed=int(seed))


@dataclass(frozen=True, eq=False)
class RandomFeatureModel:
    """Trig expansion with trainable outer coefficients (cos block then sin block)."""

    sample: FeatureSample
    alpha: np.ndarray

    def __post_init__(self):
        if len(self.alpha) != 2 * self.sample.N:
            raise ValueError("alpha must have length 2N")


def eval_model(model: RandomFeatureModel, x, order: int = 0):
    """Derivative of order 0, 1 or 2 of the trig expansion at x (vectorised)."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    k = model.sample.k
    N = len(k)
    ac, asn = model.alpha[:N], model.alpha[N:]
    t = np.multiply.outer(np.asarray(x, dtype=float), k)
    if order == 0:
        bc, bs = np.cos(t), np.sin(t)
    elif order == 1:
        bc, bs = -k * np.sin(t), k * np.cos(t)
    else:
        bc, bs = -(k**2) * np.cos(t), -(k**2) * np.sin(t)
    return bc @ ac + bs @ asn


# ---------------------------------------------------------------------------
# Partition of unity
# ---------------------------------------------------------------------------

def pou_bump(t, order: int = 0):
    """The C^1 bump phi and its first two derivatives, branch by branch.

    Zero outside [-5/4, 5/4); the plateau branch is the half-open interval
    [-3/4, 3/4) with the right ramp taking over at t = 3/4 (the two
    conventions agree by continuity).
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    t = np.asarray(t, dtype=float)
    two_pi_t = 2.0 * np.pi * t
    # half-open branches pair across neighbouring patches: t = 3/4 on one
    # patch coincides with t = -5/4 on the next, and the one-sided phi''
    # values there cancel only if the left ramp is closed at -5/4 while the
    # right ramp is open at 5/4
    left = (t >= -1.25) & (t < -0.75)
    mid = (t >= -0.75) & (t < 0.75)
    right = (t >= 0.75) & (t < 1.25)
    if order == 0:
        vals = [0.5 * (1.0 + np.sin(two_pi_t)), np.ones_like(t), 0.5 * (1.0 - np.sin(two_pi_t))]
    elif order == 1:
        vals = [np.pi * np.cos(two_pi_t), np.zeros_like(t), -np.pi * np.cos(two_pi_t)]
    else:
        vals = [-2.0 * np.pi**2 * np.sin(two_pi_t), np.zeros_like(t), 2.0 * np.pi**2 * np.sin(two_pi_t)]
    return np.select([left, mid, right], vals, default=0.0)


@dataclass(frozen=True)
class PoUGrid:
    """P+1 equidistant patch centers x_p = -R + 2 r p with radius r = R / P."""

    R: float
    P: int

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.P < 1:
            raise ValueError("P must be >= 1 (use a plain model for a single patch)")

    @property
    def r(self) -> float:
        return self.R / self.P

    @property
    def centers(self) -> np.ndarray:
        return -self.R + 2.0 * self.r * np.arange(self.P + 1)

    def local_coord(self, p: int, x):
        return (np.asarray(x, dtype=float) - self.centers[p]) / self.r


@dataclass(frozen=True, eq=False)
class GlobalPUMModel:
    """Per-patch local models glued by the bump partition."""

    grid: PoUGrid
    locals: tuple

    def __post_init__(self):
        if len(self.locals) != self.grid.P + 1:
            raise ValueError("need one local model per patch center")
        counts = {m.sample.N for m in self.locals}
        if len(counts) != 1:
            raise ValueError("all patches must use the same number of local features")

    @property
    def N_p(self) -> int:
        return self.locals[0].sample.N

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([m.alpha for m in self.locals])

    def with_coefficients(self, alpha: np.ndarray) -> "GlobalPUMModel":
        """Distribute a stacked coefficient vector back onto the patches."""
        width = 2 * self.N_p
        if len(alpha) != width * (self.grid.P + 1):
            raise ValueError("coefficient vector has the wrong length")
        locs = tuple(
            RandomFeatureModel(m.sample, np.asarray(alpha[p * width:(p + 1) * width], dtype=float))
            for p, m in enumerate(self.locals)
        )
        return GlobalPUMModel(self.grid, locs)


def pum_skeleton(R: float, P: int, N_p: int, S: float, seed: int) -> GlobalPUMModel:
    """Zero-coefficient partitioned model; one frequency stream feeds all patches."""
    grid = PoUGrid(R=R, P=P)
    rng = SplitMix64(seed)
    locs = []
    for p in range(P + 1):
        k = rng.uniforms(N_p, S)
        while True:
            _, first = np.unique(k, return_index=True)
            if len(first) == N_p:
                break
            for i in np.setdiff1d(np.arange(N_p), first):
                k[i] = rng.uniform(S)
        sample = FeatureSample(k=k, S=float(S), seed=int(seed))
        locs.append(RandomFeatureModel(sample, np.zeros(2 * N_p)))
    return GlobalPUMModel(grid, tuple(locs))


def eval_pum_model(model: GlobalPUMModel, x, order: int = 0):
    """Derivative of order 0, 1 or 2 of the glued model at x.

    Each term expands by the product rule with one chain factor 1/r per
    derivative of either the bump or the local model.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    grid = model.grid
    inv_r = 1.0 / grid.r
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for p, local in enumerate(model.locals):
        t = grid.local_coord(p, x)
        phi0 = pou_bump(t, 0)
        v0 = eval_model(local, t, 0)
        if order == 0:
            total = total + phi0 * v0
            continue
        phi1 = pou_bump(t, 1) * inv_r
        v1 = eval_model(local, t, 1) * inv_r
        if order == 1:
            total = total + phi1 * v0 + phi0 * v1
            continue
        phi2 = pou_bump(t, 2) * inv_r**2
        v2 = eval_model(local, t, 2) * inv_r**2
        total = total + phi2 * v0 + 2.0 * phi1 * v1 + phi0 * v2
    return total


def partition_check(grid: PoUGrid, n_samples: int) -> float:
    """Max over an equidistant grid of |sum_p phi_p(x) - 1| on [-R, R]."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    xs = np.linspace(-grid.R, grid.R, n_samples)
    total = np.zeros_like(xs)
    for p in range(grid.P + 1):
        total += pou_bump(grid.local_coord(p, xs), 0)
    return float(np.max(np.abs(total - 1.0)))


def export_frequencies_csv(samples: Sequence[FeatureSample], path) -> None:
    """Write sampled frequencies to CSV for reproducibility records."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# rfm1d csv v1 frequencies"])
        writer.writerow(["sample", "seed", "S", "index", "k"])
        for si, s in enumerate(samples):
            for i, k in enumerate(s.k):
                writer.writerow([si, s.seed, s.S, i, repr(float(k))])
