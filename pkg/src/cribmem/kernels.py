"""Transfer kernel, output field and efficiency kernel of the full protocol.

The retrieved field is a linear functional of the time-reversed input,

    E_out(t) = integral_0^tau_r  K_E(t, t') E_in(tau_r - t') dt',

with both times on the read window [0, tau_r].  K_E is assembled in four
quadrants split at tau_d in each argument: outputs with t <= tau_d are
emitted during the rephasing stage, later ones during the final free stage;
inputs with t' <= tau_d entered during the dephasing stage (the pulse tail),
later ones during the initial free stage.  Each quadrant is an inverse
Laplace transform, along a fixed Talbot contour, of a product of stage
exponentials sandwiched between the coupling weights and the drive vector.

The discretized efficiency kernel is the Gram matrix of the weighted
transfer matrix; its largest eigenvalue is the maximal storage-and-retrieval
efficiency.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from cribmem.errors import NumericsError
from cribmem.laplace import LaplaceContour
from cribmem.model import DetuningGrid, PhysicalParams, ProtocolSchedule
from cribmem.propagators import (
    BlockReduction,
    EigenCache,
    Stage,
    Stage3Action,
    block_reduce,
    block_reversal_permutation,
    propagator_exp,
    stage_matrix,
)
from cribmem.quadrature import TimeGrid, check_time_reversible

_IMAG_RESIDUE_TOL = 1e-7
_WINDOW_SLACK = 1e-9

KERNEL_DUMP_MAGIC = b"CRIBKRN1"


@dataclass(frozen=True)
class TransferKernel:
    """K_E sampled on out_grid x in_grid, plus assembly diagnostics."""

    out_grid: TimeGrid
    in_grid: TimeGrid
    values: np.ndarray
    schedule: ProtocolSchedule
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EfficiencyKernel:
    """Hermitian matrix sqrt(w_i) K_eff(t_i, t_j) sqrt(w_j) on the in-grid."""

    grid: TimeGrid
    matrix: np.ndarray


def _window_check(name: str, value: float, upper: float) -> None:
    slack = _WINDOW_SLACK * max(1.0, abs(upper))
    if not (-slack <= value <= upper + slack):
        raise ValueError(f"{name}={value!r} outside the window [0, {upper!r}]")


def kernel_samples(which: str, u: complex, t: float, t_prime: float,
                   cache: EigenCache, grid: DetuningGrid,
                   schedule: ProtocolSchedule) -> complex:
    """One Laplace-domain kernel sample k_bar(u, t, t') for k1..k4.

    Times are measured from the start of the emitting / injecting stage, so
    k1 and k2 take t in [0, tau_d], k3 and k4 take t in [0, tau_p]; t' lies
    in [0, tau_d] for k1, k3 and in [0, tau_p] for k2, k4.
    """
    td, tp, ts = schedule.tau_d, schedule.tau_p, schedule.tau_s
    windows = {"k1": (td, td), "k2": (td, tp), "k3": (tp, td), "k4": (tp, tp)}
    if which not in windows:
        raise ValueError(f"unknown kernel piece {which!r}")
    t_max, tp_max = windows[which]
    _window_check("t", t, t_max)
    _window_check("t_prime", t_prime, tp_max)

    g = grid.joint_weights
    g0 = grid.intrinsic_weights
    h_kn = np.ones(grid.k * grid.n)
    h_k = np.ones(grid.k)

    def expm(stage: Stage, duration: float) -> np.ndarray:
        return propagator_exp(stage_matrix(stage, u, grid), duration, cache)

    if which == "k1":
        row = g @ expm(Stage.S4, t)
        mid = expm(Stage.S3, ts)
        col = expm(Stage.S2, t_prime) @ h_kn
    elif which == "k2":
        row = g @ expm(Stage.S4, t)
        mid = block_reduce(expm(Stage.S3, ts) @ expm(Stage.S2, td),
                           BlockReduction.J_TO_K_COLUMNS, grid)
        col = expm(Stage.S1, t_prime) @ h_k
    elif which == "k3":
        row = g0 @ expm(Stage.S1, t)
        mid = block_reduce(expm(Stage.S4, td) @ expm(Stage.S3, ts),
                           BlockReduction.L_TO_K_ROWS, grid)
        col = expm(Stage.S2, t_prime) @ h_kn
    else:
        row = g0 @ expm(Stage.S1, t)
        mid = block_reduce(expm(Stage.S4, td) @ expm(Stage.S3, ts) @ expm(Stage.S2, td),
                           BlockReduction.B_TO_K_BY_K, grid)
        col = expm(Stage.S1, t_prime) @ h_k
    return complex(-(row @ mid @ col) / (u * u))


def _assembled_at_u(u: complex, grid: DetuningGrid, schedule: ProtocolSchedule,
                    t_out_lo, t_out_hi, t_in_lo, t_in_hi) -> tuple[np.ndarray, ...]:
    """All four quadrants of K_E-hat at one contour node.

    Performs a single dense eigendecomposition (stage 2); stage 4 follows by
    the controlled-detuning reflection and stage 3 by its exact block
    reduction, so the cost per node is one KN eigenproblem plus matrix
    products.
    """
    k, n = grid.k, grid.n
    kn = k * n
    g = grid.joint_weights
    g0 = grid.intrinsic_weights
    h_kn = np.ones(kn)
    h_k = np.ones(k)
    td, ts = schedule.tau_d, schedule.tau_s
    perm = block_reversal_permutation(grid)

    cache = EigenCache()
    e2 = cache.entry(stage_matrix(Stage.S2, u, grid))
    if not e2.usable:
        raise NumericsError(
            f"stage-2 eigendecomposition unusable at u={u!r} (cond={e2.cond:.3e})"
        )
    e1 = cache.entry(stage_matrix(Stage.S1, u, grid))
    if not e1.usable:
        raise NumericsError(
            f"stage-1 eigendecomposition unusable at u={u!r} (cond={e1.cond:.3e})"
        )
    s3 = Stage3Action(u, grid, ts, cache)

    # Row batches: g^T exp(M4 t) = (g^T exp(M2 t)) P  with P the reflection.
    gv2 = g @ e2.vectors
    a4 = ((gv2[None, :] * np.exp(np.outer(t_out_lo, e2.values))) @ e2.inverse)[:, perm]
    g0v1 = g0 @ e1.vectors
    a1 = (g0v1[None, :] * np.exp(np.outer(t_out_hi, e1.values))) @ e1.inverse

    # Column batches: exp(M2 t') h and exp(M1 s') h.
    b2 = e2.vectors @ (np.exp(np.outer(e2.values, t_in_lo)) * (e2.inverse @ h_kn)[:, None])
    b1 = e1.vectors @ (np.exp(np.outer(e1.values, t_in_hi)) * (e1.inverse @ h_k)[:, None])

    # Middle factors.
    lift = np.kron(np.eye(k), np.ones((n, 1)))            # KN x K column lift
    lw = np.kron(np.eye(k), grid.controlled_weights[None, :])  # K x KN weighted rows
    e2d_lift = e2.vectors @ (np.exp(e2.values * td)[:, None] * (e2.inverse @ lift))
    jr = s3.apply_cols(e2d_lift)                          # exp(M3 ts) exp(M2 td) lift
    lw_e2 = ((lw @ e2.vectors) * np.exp(e2.values * td)[None, :]) @ e2.inverse
    lr = s3.apply_rows(lw_e2)[:, perm]                    # lw exp(M4 td) exp(M3 ts)
    br = lr @ e2d_lift

    a4e3 = s3.apply_rows(a4)
    q11 = a4e3 @ b2
    q12 = (a4 @ jr) @ b1
    q21 = (a1 @ lr) @ b2
    q22 = (a1 @ br) @ b1
    return q11, q12, q21, q22


def build_transfer_kernel(
    params: PhysicalParams,
    schedule: ProtocolSchedule,
    grid: DetuningGrid,
    contour: LaplaceContour,
    out_grid: TimeGrid,
    in_grid: TimeGrid,
    assembly: str = "auto",
) -> TransferKernel:
    """Assemble K_E(t_i, t'_j) on the given time grids.

    ``assembly`` selects the contour evaluation: "full" sums every node and
    monitors the imaginary residue of the (real) kernel; "half" evaluates
    only the upper-half-plane nodes and doubles the real part, which is
    exact for symmetric detuning grids and halves the eigendecomposition
    cost.  "auto" picks "half" whenever the grid is symmetric.
    """
    for tg, name in ((out_grid, "out_grid"), (in_grid, "in_grid")):
        if abs(tg.a) > _WINDOW_SLACK or abs(tg.b - schedule.tau_r) > _WINDOW_SLACK * max(1.0, schedule.tau_r):
            raise ValueError(f"{name} must span [0, tau_r], got [{tg.a}, {tg.b}]")
    if assembly not in ("auto", "half", "full"):
        raise ValueError(f"unknown assembly mode {assembly!r}")
    symmetric = grid.is_symmetric()
    use_half = assembly == "half" or (assembly == "auto" and symmetric)
    if use_half and not symmetric:
        raise ValueError("half-contour assembly requires a symmetric detuning grid")

    td = schedule.tau_d
    out_lo = out_grid.nodes <= td
    in_lo = in_grid.nodes <= td
    t_out_lo = out_grid.nodes[out_lo]
    t_out_hi = out_grid.nodes[~out_lo] - td
    t_in_lo = in_grid.nodes[in_lo]
    t_in_hi = in_grid.nodes[~in_lo] - td

    if use_half:
        sel = contour.conjugate_half()
    else:
        sel = np.arange(contour.size)

    values = np.zeros((out_grid.size, in_grid.size), dtype=complex)
    io_lo = np.where(out_lo)[0]
    io_hi = np.where(~out_lo)[0]
    ii_lo = np.where(in_lo)[0]
    ii_hi = np.where(~in_lo)[0]
    for idx in sel:
        u = complex(contour.nodes[idx])
        wu = complex(contour.derivative_weights[idx]) * (-1.0 / (u * u))
        q11, q12, q21, q22 = _assembled_at_u(
            u, grid, schedule, t_out_lo, t_out_hi, t_in_lo, t_in_hi)
        values[np.ix_(io_lo, ii_lo)] += wu * q11
        values[np.ix_(io_lo, ii_hi)] += wu * q12
        values[np.ix_(io_hi, ii_lo)] += wu * q21
        values[np.ix_(io_hi, ii_hi)] += wu * q22

    diagnostics = {
        "assembly": "half" if use_half else "full",
        "contour_nodes": int(contour.size),
        "rephasing_time": grid.rephasing_time(),
    }
    if use_half:
        values = 2.0 * values.real + 0.0j
    else:
        scale = float(np.max(np.abs(values.real)))
        if symmetric and scale > 0.0:
            residue = float(np.max(np.abs(values.imag)))
            diagnostics["imag_residue"] = residue
            if residue > _IMAG_RESIDUE_TOL * scale:
                raise NumericsError(
                    f"imaginary residue {residue:.3e} exceeds "
                    f"{_IMAG_RESIDUE_TOL:.0e} x max|K_E| = {scale:.3e}"
                )
    if not np.all(np.isfinite(values.view(float))):
        raise NumericsError("non-finite entries in the transfer kernel")
    diagnostics["max_abs"] = float(np.max(np.abs(values)))
    return TransferKernel(out_grid=out_grid, in_grid=in_grid, values=values,
                          schedule=schedule, diagnostics=diagnostics)


def apply_output(kernel: TransferKernel, e_in) -> np.ndarray:
    """Retrieved field on out_grid for an input sampled on in_grid.

    The input enters time reversed, E_in(tau_r - t'); on the symmetric
    quadrature grid that is an index reversal of the samples.
    """
    e_in = np.asarray(e_in, dtype=complex)
    if e_in.shape != kernel.in_grid.nodes.shape:
        raise ValueError(
            f"input has {e_in.shape} samples, in-grid has {kernel.in_grid.nodes.shape}"
        )
    check_time_reversible(kernel.in_grid)
    return kernel.values @ (kernel.in_grid.weights * e_in[::-1])


def build_efficiency_kernel(kernel: TransferKernel) -> EfficiencyKernel:
    """Weight-folded Hermitian efficiency matrix from the transfer kernel.

    With A = sqrt(w_out) K_E sqrt(w_in), the matrix is A^H A, explicitly
    re-Hermitized; the Rayleigh quotient of sqrt(w)-scaled input samples
    under it is the storage-and-retrieval efficiency.
    """
    sw_out = np.sqrt(kernel.out_grid.weights)
    sw_in = np.sqrt(kernel.in_grid.weights)
    a = sw_out[:, None] * kernel.values * sw_in[None, :]
    m = a.conj().T @ a
    m = 0.5 * (m + m.conj().T)
    return EfficiencyKernel(grid=kernel.in_grid, matrix=m)


def write_kernel_dump(path, matrix: np.ndarray, tau_r: float) -> None:
    """Binary dump: 32-byte header (magic, u32 dims, f64 tau_r), c128 data."""
    matrix = np.ascontiguousarray(matrix, dtype=np.complex128)
    if matrix.ndim != 2:
        raise ValueError("kernel dump expects a 2-d matrix")
    header = struct.pack("<8sIId", KERNEL_DUMP_MAGIC,
                         matrix.shape[0], matrix.shape[1], float(tau_r))
    header += b"\x00" * (32 - len(header))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(matrix.astype("<c16").tobytes(order="C"))


def read_kernel_dump(path) -> tuple[np.ndarray, float]:
    with open(path, "rb") as fh:
        header = fh.read(32)
        if len(header) != 32 or header[:8] != KERNEL_DUMP_MAGIC:
            raise ValueError(f"{path!r} is not a kernel dump")
        rows, cols, tau_r = struct.unpack("<IId", header[8:24])
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != rows * cols:
        raise ValueError("kernel dump payload size mismatch")
    return data.reshape(rows, cols).astype(np.complex128), float(tau_r)
