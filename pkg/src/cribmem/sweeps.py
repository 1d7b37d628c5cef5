"""Parameter-sweep evaluation shared by the CLI and the acceptance suite.

Each sweep point (d0, gamma_rel) is independent: it builds its own detuning
grid, schedule, transfer kernel and efficiency kernel, then extracts the
requested quantities.  Points run in a process pool; results are returned in
input order, and a single worker reproduces byte-identical output.
"""

from __future__ import annotations

import concurrent.futures
import os
from dataclasses import dataclass

import numpy as np

from cribmem import kernels, modes
from cribmem.laplace import talbot_contour
from cribmem.model import build_detuning_grid, default_schedule, derive_params
from cribmem.quadrature import tanh_sinh_grid

DEFAULT_QUAD_LEVEL = 6
DEFAULT_CONTOUR_NODES = 32


@dataclass(frozen=True)
class GridSettings:
    """Discretization knobs shared by every sweep point."""

    k: int = 33
    n: int = 33
    extent_sigmas: float = 5.0
    quad_level: int = DEFAULT_QUAD_LEVEL
    contour_nodes: int = DEFAULT_CONTOUR_NODES

    def as_dict(self) -> dict:
        return {
            "grid_k": self.k,
            "grid_n": self.n,
            "extent": self.extent_sigmas,
            "quad_level": self.quad_level,
            "contour_nodes": self.contour_nodes,
        }


def build_pipeline(d0: float, gamma_rel: float, settings: GridSettings):
    """Params, schedule and efficiency kernel for one sweep point."""
    params = derive_params(d0, gamma_rel)
    schedule = default_schedule(params)
    grid = build_detuning_grid(params.gamma0_rel, gamma_rel,
                               settings.k, settings.n, settings.extent_sigmas)
    contour = talbot_contour(settings.contour_nodes, t_scale=1.0)
    tgrid = tanh_sinh_grid(0.0, schedule.tau_r, settings.quad_level)
    kernel = kernels.build_transfer_kernel(
        params, schedule, grid, contour, tgrid, tgrid)
    eff = kernels.build_efficiency_kernel(kernel)
    return params, schedule, kernel, eff


def evaluate_point(d0: float, gamma_rel: float, settings: GridSettings,
                   include_gaussian: bool = False, include_mode: bool = False,
                   seed: int | None = None) -> dict:
    params, schedule, kernel, eff = build_pipeline(d0, gamma_rel, settings)
    best = modes.optimal_mode(eff)
    row = {
        "d0": d0,
        "gamma_rel": gamma_rel,
        "tau_p": schedule.tau_p,
        "tau_r": schedule.tau_r,
        "eta_max": best.efficiency,
    }
    if include_gaussian:
        gauss = modes.optimize_gaussian(eff, schedule, seed=seed)
        row.update({
            "t_c_opt": gauss.gaussian_params[0],
            "t_w_opt": gauss.gaussian_params[1],
            "eta_gauss": gauss.efficiency,
        })
    if include_mode:
        row["mode_times"] = eff.grid.nodes.copy()
        row["mode"] = best.mode
    return row


def _run_one(args):
    return evaluate_point(*args[0], **args[1])


def run_points(points, settings: GridSettings, threads: int = 1,
               include_gaussian: bool = False, include_mode: bool = False,
               seed: int | None = None) -> list[dict]:
    """Evaluate (d0, gamma_rel) points, preserving input order."""
    jobs = [((d0, g, settings),
             {"include_gaussian": include_gaussian,
              "include_mode": include_mode, "seed": seed})
            for d0, g in points]
    if threads <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    workers = min(threads, len(jobs), os.cpu_count() or 1)
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def gaussian_map(d0: float, gamma_rel: float, settings: GridSettings,
                 tc_points: int = 25, tw_points: int = 20) -> list[dict]:
    """The (t_c, t_w) -> efficiency surface for Gaussian inputs."""
    params, schedule, kernel, eff = build_pipeline(d0, gamma_rel, settings)
    tr = schedule.tau_r
    tcs = np.linspace(0.0, tr, tc_points)
    tws = np.geomspace(0.05, tr, tw_points)
    rows = []
    for tc in tcs:
        for tw in tws:
            eta = modes.mode_efficiency(eff, modes.gaussian_mode(eff.grid, tc, tw))
            rows.append({"d0": d0, "gamma_rel": gamma_rel,
                         "t_c": float(tc), "t_w": float(tw), "eta": eta})
    return rows
