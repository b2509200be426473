"""Outer drivers: split the domain by gradient norm and dispatch.

Each driver loops over outer iterations.  Large measured gradient: run the
region-appropriate first-order machinery (a full solve to stationarity in the
deterministic driver, one variance-reduced epoch otherwise).  Small measured
gradient: enter the small-gradient region, call the negative-curvature escape
exactly once, and either leave in that single step or terminate because the
finder declared bottom.  Termination by bottom is the only path to a
second_order_stationary certificate.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (Certificate, EvalCounters, SmoothnessSpec, STATUS_BUDGET,
                   STATUS_FIRST_ORDER, STATUS_SECOND_ORDER, ToleranceConfig,
                   as_counting, validate_config)
from .escape import (EscapeConfig, one_step_deterministic, one_step_finite_sum,
                     one_step_stochastic)
from .ncfind import NcConfig
from .solvers import ScsgConfig, derive_scsg_params, run_solver, scsg_epoch

LARGE = "large_gradient"
SMALL = "small_gradient"


@dataclass
class TraceRecord:
    """One outer iteration: branch taken and the measurements that chose it."""

    k: int
    branch: str
    grad_norm: float  # exact norm, or batch-estimate norm in stochastic mode
    f_value: float
    escape_taken: bool
    counters: EvalCounters  # snapshot after the iteration's work


@dataclass
class RunReport:
    certificate: Certificate
    trace: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seed: int = 0
    all_runs_failed: bool = False


def _config_echo(mode, tol, smooth, esc, extra=None) -> dict:
    echo = {
        "mode": mode,
        "tolerance": dataclasses.asdict(tol),
        "smoothness": dataclasses.asdict(smooth),
        "escape": dataclasses.asdict(esc),
    }
    if extra:
        echo.update(extra)
    return echo


def _finish(oracle, point, grad_norm, min_eig, status, trace, echo, seed):
    cert = Certificate(
        point=np.asarray(point, float),
        grad_norm=float(grad_norm),
        min_eig_estimate=float(min_eig),
        status=status,
        counters=oracle.counters.snapshot(),
    )
    return RunReport(certificate=cert, trace=trace, config=echo, seed=seed)


def _budget_status(grad_norm, eps):
    return STATUS_FIRST_ORDER if grad_norm <= eps else STATUS_BUDGET


def gose_deterministic(oracle, x0, tol: ToleranceConfig, smooth: SmoothnessSpec,
                       esc: EscapeConfig = EscapeConfig(),
                       solver_choice: str = "gd",
                       rng: Optional[np.random.Generator] = None,
                       ncfg: NcConfig = NcConfig(),
                       solver_max_iters: int = 200_000) -> RunReport:
    """Full-information driver.

    Per outer iteration: if ||grad f(x)|| > eps, run the first-order solver to
    eps-stationarity; else enter the small-gradient region and take one escape
    step.  A bottom outcome certifies the current point (subject to the
    finder's delta).
    """
    vcfg = validate_config(tol, smooth, "deterministic")
    rng = rng if rng is not None else np.random.default_rng(tol.seed)
    oracle = as_counting(oracle)
    echo = _config_echo("deterministic", tol, smooth, esc,
                        {"solver_choice": solver_choice, "nc": dataclasses.asdict(ncfg)})
    x = np.asarray(x0, float)
    trace: list[TraceRecord] = []
    last_nc_estimate = float("nan")

    for k in range(1, tol.max_outer + 1):
        oracle.counters.outer_iters += 1
        g = oracle.gradient(x)
        gn = float(np.linalg.norm(g))
        fx = oracle.value(x)
        if gn > tol.eps:
            res = run_solver(solver_choice, oracle, x, smooth.L, vcfg.rho_eff,
                             tol.eps, solver_max_iters)
            trace.append(TraceRecord(k, LARGE, gn, fx, False, oracle.counters.snapshot()))
            x = res.point
            if not res.converged:
                return _finish(oracle, x, res.grad_norm, last_nc_estimate,
                               _budget_status(res.grad_norm, tol.eps), trace, echo, tol.seed)
        else:
            oracle.counters.small_region_entries += 1
            res = one_step_deterministic(oracle, x, tol, smooth, esc, rng, ncfg, g=g)
            trace.append(TraceRecord(k, SMALL, gn, fx, res.escaped, oracle.counters.snapshot()))
            last_nc_estimate = res.nc.lambda_hat
            if not res.escaped:
                return _finish(oracle, x, gn, res.nc.lambda_hat,
                               STATUS_SECOND_ORDER, trace, echo, tol.seed)
            x = res.point

    gn = float(np.linalg.norm(oracle.gradient(x)))
    return _finish(oracle, x, gn, last_nc_estimate,
                   _budget_status(gn, tol.eps), trace, echo, tol.seed)


def gose_stochastic(oracle, x0, tol: ToleranceConfig, smooth: SmoothnessSpec,
                    esc: EscapeConfig = EscapeConfig(),
                    scsg_cfg: Optional[ScsgConfig] = None,
                    K: Optional[int] = None,
                    rng: Optional[np.random.Generator] = None,
                    ncfg: NcConfig = NcConfig()) -> RunReport:
    """Sampling-only driver.

    Per outer iteration: draw a batch of size B, branch on the batch-mean
    gradient norm against eps/2 (the halved threshold keeps the true gradient
    small when escaping), and either run one variance-reduced epoch anchored
    at that same batch gradient or take one stochastic escape step.
    """
    validate_config(tol, smooth, "stochastic")
    rng = rng if rng is not None else np.random.default_rng(tol.seed)
    oracle = as_counting(oracle)
    if scsg_cfg is None:
        scsg_cfg = derive_scsg_params(tol, smooth, "stochastic")
    K = K if K is not None else tol.max_outer
    echo = _config_echo("stochastic", tol, smooth, esc,
                        {"scsg": dataclasses.asdict(scsg_cfg), "nc": dataclasses.asdict(ncfg)})
    x = np.asarray(x0, float)
    trace: list[TraceRecord] = []
    last_nc_estimate = float("nan")

    for k in range(1, K + 1):
        oracle.counters.outer_iters += 1
        g_k = oracle.sample_gradient_batch(x, scsg_cfg.B, rng)
        gn = float(np.linalg.norm(g_k))
        fx = oracle.value(x)
        if gn > tol.eps / 2.0:
            x = scsg_epoch(oracle, x, scsg_cfg, g_k, rng)
            oracle.counters.epochs_run += 1
            trace.append(TraceRecord(k, LARGE, gn, fx, False, oracle.counters.snapshot()))
        else:
            oracle.counters.small_region_entries += 1
            res = one_step_stochastic(oracle, x, tol, smooth, esc, rng, ncfg)
            trace.append(TraceRecord(k, SMALL, gn, fx, res.escaped, oracle.counters.snapshot()))
            last_nc_estimate = res.nc.lambda_hat
            if not res.escaped:
                return _finish(oracle, x, gn, res.nc.lambda_hat,
                               STATUS_SECOND_ORDER, trace, echo, tol.seed)
            x = res.point

    g_k = oracle.sample_gradient_batch(x, scsg_cfg.B, rng)
    gn = float(np.linalg.norm(g_k))
    return _finish(oracle, x, gn, last_nc_estimate,
                   _budget_status(gn, tol.eps / 2.0), trace, echo, tol.seed)


def gose_finite_sum(oracle, x0, tol: ToleranceConfig, smooth: SmoothnessSpec,
                    esc: EscapeConfig = EscapeConfig(),
                    K: Optional[int] = None,
                    rng: Optional[np.random.Generator] = None,
                    ncfg: NcConfig = NcConfig(),
                    scsg_cfg: Optional[ScsgConfig] = None) -> RunReport:
    """Finite-sum driver.

    Unlike the sampling driver this one measures the full gradient each outer
    iteration and branches at eps (not eps/2); the epoch uses batch size n and
    minibatch size 1.
    """
    validate_config(tol, smooth, "finite_sum")
    rng = rng if rng is not None else np.random.default_rng(tol.seed)
    oracle = as_counting(oracle)
    n = oracle.n_components
    if scsg_cfg is None:
        scsg_cfg = derive_scsg_params(tol, smooth, "finite_sum", n=n)
    K = K if K is not None else tol.max_outer
    echo = _config_echo("finite_sum", tol, smooth, esc,
                        {"scsg": dataclasses.asdict(scsg_cfg), "nc": dataclasses.asdict(ncfg)})
    x = np.asarray(x0, float)
    trace: list[TraceRecord] = []
    last_nc_estimate = float("nan")

    for k in range(1, K + 1):
        oracle.counters.outer_iters += 1
        g_k = oracle.gradient(x)
        gn = float(np.linalg.norm(g_k))
        fx = oracle.value(x)
        if gn > tol.eps:
            x = scsg_epoch(oracle, x, scsg_cfg, g_k, rng)
            oracle.counters.epochs_run += 1
            trace.append(TraceRecord(k, LARGE, gn, fx, False, oracle.counters.snapshot()))
        else:
            oracle.counters.small_region_entries += 1
            res = one_step_finite_sum(oracle, x, tol, smooth, esc, rng, ncfg, g=g_k)
            trace.append(TraceRecord(k, SMALL, gn, fx, res.escaped, oracle.counters.snapshot()))
            last_nc_estimate = res.nc.lambda_hat
            if not res.escaped:
                return _finish(oracle, x, gn, res.nc.lambda_hat,
                               STATUS_SECOND_ORDER, trace, echo, tol.seed)
            x = res.point

    gn = float(np.linalg.norm(oracle.gradient(x)))
    return _finish(oracle, x, gn, last_nc_estimate,
                   _budget_status(gn, tol.eps), trace, echo, tol.seed)


def amplify(run_once: Callable[[int], RunReport], reps: int,
            certifier: Callable[[np.ndarray], bool],
            base_seed: int = 0) -> RunReport:
    """Success-probability amplification by independent repetition.

    Runs run_once(seed) for reps seeds; returns the first report whose
    terminal point passes the certifier.  If none passes, returns the report
    with the smallest measured gradient norm, flagged all_runs_failed.  With
    per-run success probability p the failure probability decays like
    (1-p)**reps.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    reports = []
    for i in range(reps):
        report = run_once(base_seed + i)
        if certifier(report.certificate.point):
            return report
        reports.append(report)
    best = min(reports, key=lambda r: r.certificate.grad_norm)
    best.all_runs_failed = True
    return best
