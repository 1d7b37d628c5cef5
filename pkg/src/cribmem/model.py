"""Dimensionless parameters, protocol schedule and detuning discretization.

Conventions: the memory bandwidth ``mu`` is the unit of inverse time, so all
durations are ``tau*mu`` and all detunings and widths are ``delta/mu``.  The
intrinsic broadening width ``gamma0_rel`` fixes both the unbroadened optical
depth ``d0 = sqrt(2*pi)/gamma0_rel`` and the polarization coherence time
``t2_rel = sqrt(2)/gamma0_rel``; the three numbers are stored redundantly and
must agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_REL_TOL = 1e-12

DEFAULT_GRID_POINTS = 33
DEFAULT_EXTENT_SIGMAS = 5.0


def _check_rel(name: str, actual: float, expected: float) -> None:
    if not math.isfinite(actual) or abs(actual - expected) > _REL_TOL * abs(expected):
        raise ValueError(
            f"{name}={actual!r} inconsistent with derived value {expected!r}"
        )


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensionless physical constants of one memory configuration.

    gamma0_rel : intrinsic Gaussian width gamma0/mu (> 0)
    gamma_rel  : controlled Gaussian width gamma/mu (>= 0)
    d0         : resonant optical depth before broadening
    t2_rel     : coherence time T2*mu of the collective polarization
    """

    gamma0_rel: float
    gamma_rel: float
    d0: float
    t2_rel: float

    def __post_init__(self):
        if not (self.gamma0_rel > 0.0 and math.isfinite(self.gamma0_rel)):
            raise ValueError(f"gamma0_rel must be positive, got {self.gamma0_rel!r}")
        if not (self.gamma_rel >= 0.0 and math.isfinite(self.gamma_rel)):
            raise ValueError(f"gamma_rel must be non-negative, got {self.gamma_rel!r}")
        _check_rel("d0", self.d0, math.sqrt(2.0 * math.pi) / self.gamma0_rel)
        _check_rel("t2_rel", self.t2_rel, math.sqrt(2.0) / self.gamma0_rel)


def derive_params(d0: float, gamma_rel: float) -> PhysicalParams:
    """Build PhysicalParams from the optical depth and the controlled width.

    Uses gamma0_rel = sqrt(2*pi)/d0 and t2_rel = d0/sqrt(pi).
    """
    if not (d0 > 0.0 and math.isfinite(d0)):
        raise ValueError(f"optical depth must be positive, got {d0!r}")
    if not (gamma_rel >= 0.0 and math.isfinite(gamma_rel)):
        raise ValueError(f"gamma_rel must be non-negative, got {gamma_rel!r}")
    gamma0_rel = math.sqrt(2.0 * math.pi) / d0
    return PhysicalParams(
        gamma0_rel=gamma0_rel,
        gamma_rel=gamma_rel,
        d0=d0,
        t2_rel=math.sqrt(2.0) / gamma0_rel,
    )


@dataclass(frozen=True)
class ProtocolSchedule:
    """Stage durations of the five-stage protocol, in units of 1/mu.

    tau_p : read-in pulse window (stages 1 and 5)
    tau_d : duration of each broadening stage (stages 2 and 4)
    tau_s : dark storage window (stage 3)
    tau_r : combined read window tau_p + tau_d
    """

    tau_p: float
    tau_d: float
    tau_s: float
    tau_r: float = field(default=float("nan"))

    def __post_init__(self):
        if math.isnan(self.tau_r):
            object.__setattr__(self, "tau_r", self.tau_p + self.tau_d)
        for name in ("tau_p", "tau_d", "tau_s", "tau_r"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and non-negative, got {v!r}")
        if self.tau_p <= 0.0:
            raise ValueError("tau_p must be positive")
        if self.tau_r != self.tau_p + self.tau_d:
            raise ValueError("tau_r must equal tau_p + tau_d exactly")


def default_schedule(params: PhysicalParams) -> ProtocolSchedule:
    """Schedule with tau_s = T2/sqrt(8), tau_p = tau_s/4 and tau_d = 1."""
    tau_s = 0.5 / params.gamma0_rel
    return ProtocolSchedule(tau_p=tau_s / 4.0, tau_d=1.0, tau_s=tau_s)


def gaussian_pdf(x, width: float):
    """Normalized Gaussian density (1/sqrt(2 pi w^2)) exp(-x^2 / 2 w^2)."""
    if not (width > 0.0 and math.isfinite(width)):
        raise ValueError(f"width must be positive, got {width!r}")
    x = np.asarray(x, dtype=float)
    out = np.exp(-(x * x) / (2.0 * width * width)) / math.sqrt(2.0 * math.pi * width * width)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DetuningGrid:
    """Discretized intrinsic (K classes) and controlled (N classes) detunings.

    Weights are plain Riemann-sum weights ``step * G(node)`` and are *not*
    renormalized; the deviation of their sum from one is reported through
    :meth:`intrinsic_deficit` / :meth:`controlled_deficit`.  ``joint_weights``
    follows the (j-1)*N + k layout: the intrinsic index is the outer (block)
    index, the controlled index runs inside each block.
    """

    intrinsic_nodes: np.ndarray
    intrinsic_weights: np.ndarray
    controlled_nodes: np.ndarray
    controlled_weights: np.ndarray
    joint_weights: np.ndarray = field(default=None)

    def __post_init__(self):
        for name in ("intrinsic_nodes", "intrinsic_weights",
                     "controlled_nodes", "controlled_weights"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.intrinsic_nodes.shape != self.intrinsic_weights.shape:
            raise ValueError("intrinsic nodes/weights size mismatch")
        if self.controlled_nodes.shape != self.controlled_weights.shape:
            raise ValueError("controlled nodes/weights size mismatch")
        if self.joint_weights is None:
            jw = np.outer(self.intrinsic_weights, self.controlled_weights).ravel()
            object.__setattr__(self, "joint_weights", jw)
        else:
            object.__setattr__(self, "joint_weights",
                               np.asarray(self.joint_weights, dtype=float))
        if self.joint_weights.shape != (self.k * self.n,):
            raise ValueError("joint_weights must have K*N entries")

    @property
    def k(self) -> int:
        return self.intrinsic_nodes.size

    @property
    def n(self) -> int:
        return self.controlled_nodes.size

    @property
    def controlled_weight_sum(self) -> float:
        """Sum of the controlled Riemann weights (converges to 1 as N grows)."""
        return float(self.controlled_weights.sum())

    def intrinsic_deficit(self) -> float:
        return 1.0 - float(self.intrinsic_weights.sum())

    def controlled_deficit(self) -> float:
        return 1.0 - self.controlled_weight_sum

    def delta_plus(self) -> np.ndarray:
        """Stage-2 phase vector Delta0_j + Delta_k in joint layout."""
        return (self.intrinsic_nodes[:, None] + self.controlled_nodes[None, :]).ravel()

    def delta_minus(self) -> np.ndarray:
        """Stage-4 phase vector Delta0_j - Delta_k in joint layout."""
        return (self.intrinsic_nodes[:, None] - self.controlled_nodes[None, :]).ravel()

    def delta_zero(self) -> np.ndarray:
        """Stage-1/3/5 phase vector: Delta0_j repeated across each block."""
        return np.repeat(self.intrinsic_nodes, self.n)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        """True when both node families are symmetric about zero with even weights."""
        for nodes, w in ((self.intrinsic_nodes, self.intrinsic_weights),
                         (self.controlled_nodes, self.controlled_weights)):
            if not np.allclose(nodes, -nodes[::-1], atol=tol, rtol=0.0):
                return False
            if not np.allclose(w, w[::-1], rtol=1e-12, atol=0.0):
                return False
        return True

    def rephasing_time(self) -> float:
        """Onset of the spurious rephasing of the discrete controlled comb.

        A finite comb of controlled detunings with step ``dd`` rephases after
        about 2*pi/dd; the dephasing stages must be kept well below this.
        """
        if self.n < 2:
            return math.inf
        dd = float(self.controlled_nodes[1] - self.controlled_nodes[0])
        return 2.0 * math.pi / dd


def _family(width: float, count: int, extent_sigmas: float):
    """Symmetric uniform node comb with node-centered Riemann weights."""
    if count == 1:
        # Degenerate single-class grid: renormalized weight, resonant node.
        return np.array([0.0]), np.array([1.0])
    half = count // 2
    step = extent_sigmas * width / half
    if step == 0.0:
        step = np.finfo(float).tiny  # floor for denormal widths
    # Integer multiples of the step give exact +/- symmetry of the nodes.
    nodes = step * np.arange(-half, half + 1, dtype=float)
    weights = step * gaussian_pdf(nodes, width)
    return nodes, weights


def build_detuning_grid(
    gamma0_rel: float,
    gamma_rel: float,
    k: int = DEFAULT_GRID_POINTS,
    n: int = DEFAULT_GRID_POINTS,
    extent_sigmas: float = DEFAULT_EXTENT_SIGMAS,
) -> DetuningGrid:
    """Uniform detuning combs spanning +-extent_sigmas standard deviations.

    Both counts must be odd so that a resonant (zero-detuning) class exists.
    A degenerate count of 1 yields the single resonant class with weight one.
    """
    if k < 1 or n < 1:
        raise ValueError("node counts must be at least 1")
    if k % 2 == 0 or n % 2 == 0:
        raise ValueError("node counts must be odd so that zero detuning is a node")
    if not (extent_sigmas > 0.0 and math.isfinite(extent_sigmas)):
        raise ValueError(f"extent_sigmas must be positive, got {extent_sigmas!r}")
    if not (gamma0_rel > 0.0):
        raise ValueError("gamma0_rel must be positive")
    if gamma_rel < 0.0:
        raise ValueError("gamma_rel must be non-negative")
    if gamma_rel == 0.0 and n > 1:
        raise ValueError("gamma_rel = 0 admits only the degenerate n = 1 grid")
    in_nodes, in_w = _family(gamma0_rel, k, extent_sigmas)
    c_nodes, c_w = _family(gamma_rel, n, extent_sigmas)
    return DetuningGrid(in_nodes, in_w, c_nodes, c_w)
