"""Laplace-domain stage generators, cached eigendecompositions, reductions.

Each protocol stage evolves the polarization vector under a generator of the
form ``-i*diag(phases) - (1/u) * ones * weights^T`` (a diagonal matrix plus a
rank-one coupling through the radiated field).  Stage 1 acts on the K
intrinsic classes, stages 2-4 on the K*N joint classes.

The stage-1 rank-one term carries the sum of the controlled Riemann weights,
which equals one only in the continuum limit: with it, the K-dimensional
stage-1/5 equations are the exact block reduction of the joint-class system
at any grid resolution, so the kernel pipeline and a direct discrete solver
agree to solver accuracy even on coarse grids.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from cribmem.model import DetuningGrid

_COND_LIMIT = 1e8
_RECON_TOL = 1e-9
_PROBE_LIMIT = 256  # full reconstruction check up to this size, probes beyond


class Stage(enum.Enum):
    S1 = 1
    S2 = 2
    S3 = 3
    S4 = 4


class BlockReduction(enum.Enum):
    J_TO_K_COLUMNS = "J"
    L_TO_K_ROWS = "L"
    B_TO_K_BY_K = "B"


@dataclass(frozen=True)
class StageGenerator:
    stage: Stage
    u: complex
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def stage_matrix(stage: Stage, u: complex, grid: DetuningGrid) -> StageGenerator:
    """Assemble the generator of one stage at Laplace moment u."""
    if u == 0:
        raise ValueError("u = 0 is a singular Laplace moment (1/u coupling)")
    u = complex(u)
    if stage is Stage.S1:
        phases = grid.intrinsic_nodes
        weights = grid.intrinsic_weights
        scale = grid.controlled_weight_sum / u
    else:
        if stage is Stage.S2:
            phases = grid.delta_plus()
        elif stage is Stage.S4:
            phases = grid.delta_minus()
        else:
            phases = grid.delta_zero()
        weights = grid.joint_weights
        scale = 1.0 / u
    m = -1j * np.diag(phases.astype(complex))
    m -= scale * np.outer(np.ones(phases.size), weights)
    return StageGenerator(stage=stage, u=u, matrix=m)


@dataclass
class EigenEntry:
    values: np.ndarray
    vectors: np.ndarray
    inverse: np.ndarray
    cond: float
    usable: bool

    def expm(self, duration: float) -> np.ndarray:
        return self.vectors @ (np.exp(self.values * duration)[:, None] * self.inverse)


class EigenCache:
    """Eigendecompositions keyed by (stage, u), computed once and reused.

    The entry is flagged unusable when the eigenvector matrix is too ill
    conditioned or fails to reconstruct the generator; propagator_exp then
    falls back to scaling-and-squaring.
    """

    def __init__(self):
        self._entries: dict[tuple[Stage, complex], EigenEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def entry(self, gen: StageGenerator) -> EigenEntry:
        key = (gen.stage, gen.u)
        got = self._entries.get(key)
        if got is None:
            got = _decompose(gen.matrix)
            self._entries[key] = got
        return got


def _decompose(matrix: np.ndarray) -> EigenEntry:
    n = matrix.shape[0]
    values, vectors = np.linalg.eig(matrix)
    try:
        inverse = np.linalg.solve(vectors, np.eye(n, dtype=complex))
    except np.linalg.LinAlgError:
        return EigenEntry(values, vectors, np.eye(n, dtype=complex), math.inf, False)
    cond = float(np.linalg.norm(vectors, 1) * np.linalg.norm(inverse, 1))
    usable = cond < _COND_LIMIT and _reconstructs(matrix, values, vectors, inverse)
    return EigenEntry(values, vectors, inverse, cond, usable)


def _reconstructs(matrix, values, vectors, inverse) -> bool:
    n = matrix.shape[0]
    scale = np.linalg.norm(matrix)
    if scale == 0.0:
        return True
    if n <= _PROBE_LIMIT:
        resid = np.linalg.norm(vectors @ (values[:, None] * inverse) - matrix)
        return resid <= _RECON_TOL * scale
    rng = np.random.default_rng(0)
    probes = rng.standard_normal((n, 4))
    resid = np.linalg.norm(vectors @ (values[:, None] * (inverse @ probes)) - matrix @ probes)
    return resid <= _RECON_TOL * scale * np.linalg.norm(probes) / math.sqrt(n)


def propagator_exp(gen: StageGenerator, duration: float,
                   cache: EigenCache | None = None) -> np.ndarray:
    """exp(matrix * duration) via the cached eigendecomposition.

    Falls back to scaling-and-squaring when the eigenvector matrix is
    ill conditioned (possible for the non-normal generators, never observed
    for symmetric detuning grids).
    """
    if duration < 0.0:
        raise ValueError(f"duration must be non-negative, got {duration!r}")
    if duration == 0.0:
        return np.eye(gen.dim, dtype=complex)
    if cache is None:
        cache = EigenCache()
    ent = cache.entry(gen)
    if ent.usable:
        return ent.expm(duration)
    return scipy.linalg.expm(gen.matrix * duration)


def block_reduce(matrix: np.ndarray, mode: BlockReduction,
                 grid: DetuningGrid) -> np.ndarray:
    """Collapse controlled-detuning blocks of a KN x KN stage product.

    J sums each block of N columns (the unweighted lift of a K-vector into
    the joint layout), L sums each block of N rows with the controlled
    weights (projection onto the per-intrinsic-class polarization), B applies
    both.
    """
    k, n = grid.k, grid.n
    kn = k * n
    matrix = np.asarray(matrix)
    if matrix.shape != (kn, kn):
        raise ValueError(f"expected a {kn}x{kn} matrix, got {matrix.shape}")
    gw = grid.controlled_weights
    if mode is BlockReduction.J_TO_K_COLUMNS:
        return matrix.reshape(kn, k, n).sum(axis=2)
    if mode is BlockReduction.L_TO_K_ROWS:
        return np.einsum("jnc,n->jc", matrix.reshape(k, n, kn), gw)
    if mode is BlockReduction.B_TO_K_BY_K:
        rows = np.einsum("jnc,n->jc", matrix.reshape(k, n, kn), gw)
        return rows.reshape(k, k, n).sum(axis=2)
    raise ValueError(f"unknown reduction mode {mode!r}")


# ---------------------------------------------------------------------------
# Structured fast paths used by the kernel assembly.  These produce the same
# numbers as the dense eigendecomposition route but exploit (a) the exact
# block degeneracy of the stage-3 generator and (b) the controlled-detuning
# reflection that maps stage 2 onto stage 4.


def phi1(z: np.ndarray) -> np.ndarray:
    """(exp(z) - 1)/z, stable near z = 0."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-5
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs * zs / 6.0
    zb = z[~small]
    out[~small] = (np.exp(zb) - 1.0) / zb
    return out


def block_reversal_permutation(grid: DetuningGrid) -> np.ndarray:
    """Joint-layout permutation Delta_k -> -Delta_k (maps stage 2 onto 4)."""
    return np.arange(grid.k * grid.n).reshape(grid.k, grid.n)[:, ::-1].ravel()


class Stage3Action:
    """Apply exp(M3 * t) without forming the KN x KN exponential.

    The stage-3 diagonal is constant inside each controlled block, so the
    weighted block sums close on a K-dimensional system (the stage-1
    generator).  The full action is the free block rotation plus a rank-one
    correction driven by that reduced system.
    """

    def __init__(self, u: complex, grid: DetuningGrid, duration: float,
                 cache: EigenCache | None = None):
        self.grid = grid
        self.u = complex(u)
        self.duration = float(duration)
        gen1 = stage_matrix(Stage.S1, u, grid)
        ent = (cache or EigenCache()).entry(gen1)
        d0 = grid.intrinsic_nodes
        lam = ent.values
        z = (lam[None, :] + 1j * d0[:, None]) * self.duration
        # E[j, m] = integral_0^t e^{-i d0_j (t-s)} e^{lam_m s} ds
        self._emat = self.duration * np.exp(-1j * d0[:, None] * self.duration) * phi1(z)
        self._phase = np.exp(-1j * grid.delta_zero() * self.duration)
        self._gv = grid.intrinsic_weights @ ent.vectors      # g0^T V
        self._vh = ent.inverse @ np.ones(grid.k)             # V^-1 h
        self._vectors = ent.vectors
        self._inverse = ent.inverse

    def apply_cols(self, x: np.ndarray) -> np.ndarray:
        """exp(M3 t) @ x for x of shape (KN, m)."""
        k, n = self.grid.k, self.grid.n
        x = np.atleast_2d(x.T).T if x.ndim == 1 else x
        w0 = np.einsum("jnm,n->jm", x.reshape(k, n, -1), self.grid.controlled_weights)
        c = (self._inverse @ w0) * self._gv[:, None]
        corr = (self._emat @ c) / self.u
        return self._phase[:, None] * x - np.repeat(corr, n, axis=0)

    def apply_rows(self, a: np.ndarray) -> np.ndarray:
        """a @ exp(M3 t) for a of shape (m, KN)."""
        k, n = self.grid.k, self.grid.n
        x = a.T
        v0 = x.reshape(k, n, -1).sum(axis=1)
        c = (self._vectors.T @ v0) * self._vh[:, None]
        corr = (self._emat @ c) / self.u
        g = self.grid.joint_weights
        out = self._phase[:, None] * x - g[:, None] * np.repeat(corr, n, axis=0)
        return out.T
