"""Batch drivers: reference solves, hybrid mesh ladders, method comparison and
the 1D studies, writing CSV tables, a JSON manifest and a plot script."""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import appendix
from .coefficients import (
    SourceTerm, appendix1d_coefficient, constant_coefficient, constant_source,
    example1_coefficient, example1_effective, example2_coefficient, example2_exterior, sample_points,
)
from .config import ExperimentConfig
from .errors import Box, convergence_table, cross_mesh_error, difference_norms, eta_factor
from .fem import FemSolution, solve_problem
from .global_local import PatchSpec, patch_mesh, solve_global_local
from .homogenization import (
    EffectiveTensor, analytic_tensor, cell_effective_matrix, composite_tensor, constant_tensor,
    hmm_effective_field, hybrid_effective_1d,
)
from .mesh import Domain, Mesh, RegionSpec, build_body_fitted_mesh, build_uniform_mesh, in_box
from .transition import HybridCoefficient, build_transition_2d

log = logging.getLogger(__name__)

ROUNDOFF = 1e-12
SOLVER_FLOOR = 100  # errors below SOLVER_FLOOR * tol are solver noise when forming ratios


# --- problem setup ----------------------------------------------------------


@dataclass
class Problem:
    domain: Domain
    region: RegionSpec
    a: Callable  # fine-scale coefficient
    A_h: EffectiveTensor  # effective coefficient used by the homogenized and hybrid solves
    f: SourceTerm
    g: Callable | None = None  # Dirichlet data; None means homogeneous
    e_hmm: float = 0.0
    meta: dict = field(default_factory=dict)

    def boundary_values(self, mesh: Mesh) -> np.ndarray | None:
        return None if self.g is None else self.g(mesh.vertices)

    def solve(self, kind: str, mesh: Mesh, coef, tol: float) -> FemSolution:
        return solve_problem(kind, mesh, coef, self.f, tol, dirichlet_values=self.boundary_values(mesh))


def build_problem(cfg: ExperimentConfig, workers: int = 1) -> Problem:
    domain = Domain.unit(2)
    region = RegionSpec(tuple(cfg.center), cfg.L, cfg.delta)
    region.validate_in(domain)
    if cfg.experiment == "constant":
        a = constant_coefficient(1.0, 2)
        return Problem(domain, region, a, constant_tensor(np.eye(2)), constant_source(0.0),
                       g=lambda x: x[:, 0] + 2 * x[:, 1], meta={"coefficient": "identity", "boundary": "x1 + 2 x2"})
    if cfg.experiment in ("ex1", "global-local"):
        a = example1_coefficient(cfg.R1, cfg.R2, cfg.eps)
        A = analytic_tensor(example1_effective(cfg.R1, cfg.R2), 2, "analytic")
        return Problem(domain, region, a, A, constant_source(1.0), meta={"coefficient": "example1"})
    if cfg.experiment == "ex2":
        a = example2_coefficient(cfg.eps, region)
        ext = example2_exterior(cfg.eps)
        table = hmm_effective_field(ext, cfg.hmm_samples, cfg.hmm_cell, domain, workers, cfg.tol)
        A_h = composite_tensor(a, table, region)
        # no closed form outside K0: estimate e(HMM) against cell solves at twice the resolution
        pts = sample_points(domain, 64, seed=3)
        lo, hi = region.k_box()
        pts = pts[~in_box(pts, lo, hi, tol=0.0)]
        finer = np.array([cell_effective_matrix(ext.cell(p), 2 * cfg.hmm_cell, 2, tol=cfg.tol) for p in pts])
        e = float(np.sqrt(((finer - A_h(pts)) ** 2).sum(axis=(1, 2))).max())
        return Problem(domain, region, a, A_h, constant_source(1.0), e_hmm=e,
                       meta={"coefficient": "example2", "hmm": table.provenance,
                             "e_hmm_estimate": f"self-refinement at cell={2 * cfg.hmm_cell}, {len(pts)} points"})
    raise ValueError(f"experiment {cfg.experiment!r} has no 2D problem")


# --- bands ------------------------------------------------------------------


@dataclass
class Band:
    name: str
    values: list
    lo: float
    hi: float
    hard: bool = True

    @property
    def passed(self) -> bool:
        return all(self.lo <= v <= self.hi for v in self.values)

    def to_dict(self) -> dict:
        return {"name": self.name, "values": self.values, "band": [self.lo, self.hi],
                "passed": self.passed, "hard": self.hard}

    def line(self) -> str:
        tag = "PASS" if self.passed else ("FAIL" if self.hard else "WARN")
        vals = ", ".join(f"{v:.4g}" for v in self.values)
        return f"[{tag}] {self.name}: [{vals}] in [{self.lo:g}, {self.hi:g}]"


def _flag(name: str, ok: bool, hard: bool = True) -> Band:
    return Band(name, [1.0 if ok else 0.0], 1.0, 1.0, hard)


def _monotone_decreasing(vals) -> bool:
    return all(b < a for a, b in zip(vals, vals[1:]))


# --- results ----------------------------------------------------------------


@dataclass
class RunResult:
    outdir: Path
    files: dict = field(default_factory=dict)  # name -> text
    bands: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.bands if b.hard)

    def write(self) -> None:
        self.outdir.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (self.outdir / name).write_text(text)
        self.manifest["files"] = sorted(self.files)
        self.manifest["bands"] = [b.to_dict() for b in self.bands]
        self.manifest["passed"] = self.passed
        (self.outdir / "manifest.json").write_text(json.dumps(self.manifest, indent=2, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (RegionSpec, Domain)):
        return obj.__dict__
    return str(obj)


def _stage(manifest: dict, name: str, t0: float, **info) -> None:
    manifest.setdefault("stages", []).append({"stage": name, "seconds": round(time.perf_counter() - t0, 3), **info})
    log.info("%s done in %.1fs", name, time.perf_counter() - t0)


def _map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _region_dict(r: RegionSpec) -> dict:
    return {"center": list(r.center), "L": r.half_width, "delta": r.collar}


# --- 2D pipelines -----------------------------------------------------------


def reference_solutions(problem: Problem, cfg: ExperimentConfig, manifest: dict, fine: bool = True,
                        homogenized: bool = True) -> dict:
    """Uniform-mesh reference solves (fine and/or homogenized) at h = 1/reference."""
    mesh = build_uniform_mesh(problem.domain, cfg.reference)
    out = {"mesh": mesh}
    if fine:
        t0 = time.perf_counter()
        out["fine"] = problem.solve("fine", mesh, problem.a, cfg.tol)
        _stage(manifest, "reference-fine", t0, n=cfg.reference, iterations=out["fine"].info.iterations,
               residual=out["fine"].info.residual)
    if homogenized:
        t0 = time.perf_counter()
        out["homogenized"] = problem.solve("homogenized", mesh, problem.A_h, cfg.tol)
        _stage(manifest, "reference-homogenized", t0, n=cfg.reference,
               iterations=out["homogenized"].info.iterations, residual=out["homogenized"].info.residual)
    return out


def hybrid_solve(problem: Problem, mesh: Mesh, kind: str, tol: float) -> FemSolution:
    region = mesh.metadata.get("region", problem.region)
    coef = HybridCoefficient(problem.a, problem.A_h, build_transition_2d(region, kind))
    return problem.solve("hybrid", mesh, coef, tol)


def table_ladder(problem: Problem, cfg: ExperimentConfig, u0: FemSolution, manifest: dict, workers: int = 1):
    """Hybrid solves with h outside K running over the ladder; errors against u0 on D minus K."""

    def one(h):
        mesh = build_body_fitted_mesh(problem.domain, problem.region, h, min(cfg.h_fine, h))
        v = hybrid_solve(problem, mesh, cfg.transition, cfg.tol)
        region = mesh.metadata["region"]
        nv = difference_norms(u0, v, u0.mesh, Box.outside_k(region))
        return nv, {"h_coarse": h, "h_fine": mesh.metadata["h_fine"], "cells": mesh.n_cells,
                    "iterations": v.info.iterations, "region": _region_dict(region)}

    t0 = time.perf_counter()
    res = _map(one, cfg.ladder, workers)
    report = convergence_table([(h, nv.l2, nv.h1) for h, (nv, _) in zip(cfg.ladder, res)])
    _stage(manifest, "table-ladder", t0, entries=[info for _, info in res])
    return report


def localized_ladder(problem: Problem, cfg: ExperimentConfig, ue: FemSolution, manifest: dict, workers: int = 1):
    """H1(K0) error against the fine reference for smooth and characteristic transitions."""
    box = Box.k0(problem.region)

    def one(hf):
        mesh = build_body_fitted_mesh(problem.domain, problem.region, cfg.h_coarse, hf)
        errs = {}
        for kind in ("smooth", "characteristic"):
            v = hybrid_solve(problem, mesh, kind, cfg.tol)
            errs[kind] = cross_mesh_error(ue, v, box, "h1")
        return errs

    t0 = time.perf_counter()
    res = _map(one, cfg.fine_ladder, workers)
    _stage(manifest, "localized-ladder", t0)
    lines = ["h_fine,err_smooth,err_characteristic"]
    lines += [f"{h!r},{r['smooth']:.6e},{r['characteristic']:.6e}" for h, r in zip(cfg.fine_ladder, res)]
    return "\n".join(lines) + "\n", res


def _table_bands(report, cfg: ExperimentConfig) -> list[Band]:
    bands = []
    h1 = report.orders("h1")
    l2 = report.orders("l2")
    if "h1_order" in cfg.bands and h1:
        bands.append(Band("H1(D\\K) orders", h1, *cfg.bands["h1_order"]))
    if "l2_order" in cfg.bands and len(l2) > 1:
        # the finest pair may degrade once h drops below L
        bands.append(Band("L2(D\\K) orders except finest pair", l2[:-1], *cfg.bands["l2_order"]))
    return bands


def _run_2d(cfg: ExperimentConfig, result: RunResult, workers: int) -> None:
    m = result.manifest
    t0 = time.perf_counter()
    problem = build_problem(cfg, workers)
    _stage(m, "setup", t0, **problem.meta)
    m["e_hmm"] = problem.e_hmm
    m["eta_K"] = eta_factor(problem.region.k_measure, 2)
    refs = reference_solutions(problem, cfg, m, fine=bool(cfg.fine_ladder))
    if cfg.ladder:
        report = table_ladder(problem, cfg, refs["homogenized"], m, workers)
        result.files["table_outside_K.csv"] = report.to_csv()
        result.bands += _table_bands(report, cfg)
    if cfg.fine_ladder:
        text, rows = localized_ladder(problem, cfg, refs["fine"], m, workers)
        result.files["localized_K0.csv"] = text
        result.bands.append(Band("smooth-rho error <= characteristic-rho error",
                                 [r["smooth"] / r["characteristic"] for r in rows], 0.0, 1.0, hard=False))


def compare_methods(cfg: ExperimentConfig, workers: int = 1, outdir=None) -> RunResult:
    """Concurrent versus global-local H1(K0) errors on the same fine-mesh ladder."""
    result = _start(cfg, outdir, "compare")
    try:
        _compare(cfg, result, workers)
        result.manifest["status"] = "complete"
    except Exception as exc:
        result.manifest.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        result.write()
        raise
    result.write()
    return result


def _compare(cfg: ExperimentConfig, result: RunResult, workers: int) -> None:
    m = result.manifest
    if not cfg.fine_ladder:
        raise ValueError("comparison needs a non-empty fine_ladder")
    t0 = time.perf_counter()
    problem = build_problem(cfg, workers)
    _stage(m, "setup", t0, **problem.meta)
    m["e_hmm"] = problem.e_hmm
    refs = reference_solutions(problem, cfg, m, homogenized=False)
    ue = refs["fine"]
    box = Box.k0(problem.region)

    def one(hf):
        mesh = build_body_fitted_mesh(problem.domain, problem.region, cfg.h_coarse, hf)
        v = hybrid_solve(problem, mesh, cfg.transition, cfg.tol)
        u0 = problem.solve("homogenized", mesh, problem.A_h, cfg.tol)
        gl = []
        for eta in cfg.eta:
            patch = PatchSpec(problem.region, eta)
            w = solve_global_local(u0, patch, patch_mesh(patch, hf), problem.a, problem.f, cfg.tol, problem.domain)
            gl.append(cross_mesh_error(ue, w, box, "h1"))
        return cross_mesh_error(ue, v, box, "h1"), gl, v.info.iterations

    t0 = time.perf_counter()
    res = _map(one, cfg.fine_ladder, workers)
    _stage(m, "comparison-ladder", t0, iterations=[r[2] for r in res])
    conc = [r[0] for r in res]
    glob = [r[1][0] for r in res]
    floor = max(ROUNDOFF, SOLVER_FLOOR * cfg.tol)
    ratios = [(c + floor) / (g + floor) for c, g in zip(conc, glob)]
    lines = ["h_fine,err_concurrent,err_globallocal,ratio"]
    lines += [f"{h!r},{c:.6e},{g:.6e},{r:.6f}" for h, c, g, r in zip(cfg.fine_ladder, conc, glob, ratios)]
    result.files["compare.csv"] = "\n".join(lines) + "\n"
    eta_lines = ["h_fine,eta,err_globallocal"]
    for h, r in zip(cfg.fine_ladder, res):
        eta_lines += [f"{h!r},{eta!r},{e:.6e}" for eta, e in zip(cfg.eta, r[1])]
    result.files["eta_sensitivity.csv"] = "\n".join(eta_lines) + "\n"

    if "ratio" in cfg.bands:
        result.bands.append(Band("concurrent / global-local H1(K0) ratio", ratios, *cfg.bands["ratio"]))
    if "max_error" in cfg.bands:
        result.bands.append(Band("H1(K0) errors", conc + glob, *cfg.bands["max_error"]))
    else:
        result.bands.append(_flag("concurrent errors decrease", _monotone_decreasing(conc)))
        result.bands.append(_flag("global-local errors decrease", _monotone_decreasing(glob)))
    if len(cfg.eta) > 1 and "eta_spread" in cfg.bands:
        spread = [max(r[1]) / min(r[1]) - 1 for r in res]
        result.bands.append(Band("global-local eta sensitivity", spread, *cfg.bands["eta_spread"], hard=False))


# --- 1D pipelines -----------------------------------------------------------


def _run_appendix(cfg: ExperimentConfig, result: RunResult, workers: int) -> None:
    m = result.manifest
    t0 = time.perf_counter()
    h = 1 / (2 * cfg.appendix_N)
    hf = 1 / (2 * cfg.appendix_fine_N)
    regimes = {
        "coarse": [appendix.AppendixSetup(cfg.appendix_N, round(L / h), cfg.appendix_eps_over_h * h, appendix.COARSE)
                   for L in cfg.appendix_L],
        "fine": [appendix.AppendixSetup(cfg.appendix_fine_N, round(L / hf), cfg.appendix_fine_eps, appendix.FINE)
                 for L in cfg.appendix_L],
    }
    res = dict(zip(regimes, _map(appendix.lower_bound_experiment, list(regimes.values()), workers)))
    for name, r in res.items():
        result.files[f"sharpness_{name}.csv"] = r.to_csv()
        if "slope" in cfg.bands:
            result.bands.append(Band(f"log-log slope ({r.regime})", [r.slope], *cfg.bands["slope"]))
        result.bands.append(_flag(f"errors above lower bound ({r.regime})",
                                  all(e >= b for e, b in zip(r.errors, r.bounds))))
        # the constant (2 - A)/(36 sqrt 2) bound is checked in both regimes
        c = (2 - appendix.A_EFF) / (36 * math.sqrt(2))
        result.bands.append(_flag(f"errors above c |K|^(1/2) ({r.regime})",
                                  all(e >= c * math.sqrt(k) for e, k in zip(r.errors, r.K_measure))))
    m["setups"] = {k: [s.__dict__ for s in v] for k, v in regimes.items()}
    worst = 0.0
    for N in (64, 256, 1024):
        for M in (4, 8):
            s = appendix.AppendixSetup(N, M, 0.03 / (2 * N))
            v = appendix.discrete_solution(s)
            w = appendix.fem_solution(s)
            worst = max(worst, float(np.max(np.abs(w[1:] - v[1:]) / np.abs(v[1:]))))
    m["fem_vs_closed_form"] = worst
    result.bands.append(Band("general assembly vs closed form (relative)", [worst], 0.0, 1e-12))
    _stage(m, "appendix", t0)


def _run_hlimit(cfg: ExperimentConfig, result: RunResult, workers: int) -> None:
    """1D H-limit of the hybrid coefficient at frozen rho against the blending bound."""
    eps = 1.0
    a = appendix1d_coefficient(eps)
    A = appendix.A_EFF
    lam, Lam = 1.0, 3.0
    rhos = np.linspace(0.0, 1.0, cfg.rho_samples)
    lines = ["rho,B,abs_diff,bound"]
    diffs, slack = [], []
    for r in rhos:
        B = hybrid_effective_1d(a, A, float(r), points=4096)
        bound = 2 * Lam * (Lam / lam + math.sqrt(Lam / lam)) * r * (1 - r)
        diffs.append(abs(A - B))
        slack.append(bound - abs(A - B))
        lines.append(f"{float(r)!r},{B:.12f},{abs(A - B):.6e},{bound:.6e}")
    result.files["hlimit_1d.csv"] = "\n".join(lines) + "\n"
    result.bands.append(Band("bound minus |A - B(rho)|", slack, -1e-12, math.inf))
    result.bands.append(Band("|A - B| at rho in {0, 1}", [diffs[0], diffs[-1]], 0.0, 1e-10))


# --- entry points -----------------------------------------------------------


def _start(cfg: ExperimentConfig, outdir, mode: str) -> RunResult:
    out = Path(outdir or cfg.output)
    return RunResult(out, manifest={"mode": mode, "experiment": cfg.experiment, "config": cfg.to_dict(),
                                    "status": "running"})


def run_experiment(cfg: ExperimentConfig, workers: int = 1, outdir=None) -> RunResult:
    """Run one configured experiment and write its CSVs, plot script and manifest.

    On failure the manifest is still written with status "failed" and the error.
    """
    cfg.validate()
    if cfg.experiment == "global-local":
        return compare_methods(cfg, workers, outdir)
    result = _start(cfg, outdir, "run")
    try:
        if cfg.experiment in ("ex1", "ex2", "constant"):
            _run_2d(cfg, result, workers)
        elif cfg.experiment == "appendix":
            _run_appendix(cfg, result, workers)
        elif cfg.experiment == "hlimit-1d":
            _run_hlimit(cfg, result, workers)
        result.files["plot.py"] = plot_script(sorted(n for n in result.files if n.endswith(".csv")))
        result.manifest["status"] = "complete"
    except Exception as exc:
        result.manifest.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        result.write()
        raise
    result.write()
    return result


def plot_script(csv_names: list[str]) -> str:
    """A standalone matplotlib script drawing every CSV next to it on log-log axes."""
    return f'''import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
for name in {csv_names!r}:
    with open(here / name) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        continue
    keys = list(rows[0])
    x = [float(r[keys[0]]) for r in rows]
    fig, ax = plt.subplots()
    for k in keys[1:]:
        if "order" in k or k == "ratio":
            continue
        y = [float(r[k]) for r in rows if r[k]]
        if len(y) == len(x) and all(v > 0 for v in y) and all(v > 0 for v in x):
            ax.loglog(x, y, "o-", label=k)
    ax.set_xlabel(keys[0])
    ax.legend()
    fig.savefig(here / (Path(name).stem + ".png"), dpi=120)
    plt.close(fig)
print("plots written to", here, file=sys.stderr)
'''
