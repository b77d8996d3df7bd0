"""Lambda grids, adaptive penalty weights, BIC selection, and knot search.

Each step's single tuning level ``lambda`` is spread over coefficients
through adaptive weights (inverse unpenalized estimates), the grid runs
from a data-driven all-zero level down to 1e-3 in 100 geometric steps, and
each step minimizes ``log(rss) + log(n)/n * df`` along its own grid.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import knot_order_grid, make_basis, transformed_basis_matrix
from .exceptions import TuningError
from .model import Coefficients, Dataset, LoadingVector, index_values
from .solver import (
    GroupDescentProblem,
    GroupLayout,
    SolverConfig,
    build_step1_problem,
    build_step2_problem,
    lambda_max_step3,
    step3_beta_update,
    unpenalized_coefficients,
)

#: Weight used when an unpenalized estimate is exactly zero: the coefficient
#: is then shrunk at any lambda on the grid.
WEIGHT_CAP = 1e8

_LOG_FLOOR = 1e-300  # keeps log(rss) finite on noiseless data


@dataclass(frozen=True)
class TuningConfig:
    """Grid shape and smoothness assumption for the selection criteria."""

    r: int = 2                    # assumed derivative order in the knot-range rule
    grid_size: int = 100
    lambda_min: float = 1e-3
    confirm_tries: int = 40       # lambda_max bump attempts (factor 1.25 each)


@dataclass(frozen=True)
class LambdaGrid:
    """Geometric grid from ``lambda_max`` down to ``lambda_min``."""

    values: np.ndarray
    lambda_max: float
    lambda_min: float
    degenerate: bool = False


@dataclass(frozen=True)
class BicRecord:
    lam: float
    rss: float
    df: int
    bic: float


@dataclass
class BicTrace:
    """Per-lambda BIC path with the argmin (ties go to the larger lambda)."""

    records: list[BicRecord] = field(default_factory=list)
    argmin_index: int = -1
    lambda_max: float = 0.0
    skipped: int = 0

    @property
    def chosen(self) -> BicRecord:
        return self.records[self.argmin_index]


def bic_value(rss: float, df: int, n: int) -> float:
    return float(np.log(max(rss, _LOG_FLOOR)) + np.log(n) / n * df)


def build_grid(lambda_max: float, config: TuningConfig | None = None) -> LambdaGrid:
    """100 exponentially decreasing values ending at ``lambda_min``."""
    cfg = config or TuningConfig()
    if lambda_max <= cfg.lambda_min:
        warnings.warn("lambda_max below lambda_min; using a single-point grid")
        return LambdaGrid(values=np.array([cfg.lambda_min]),
                          lambda_max=cfg.lambda_min, lambda_min=cfg.lambda_min,
                          degenerate=True)
    values = np.geomspace(lambda_max, cfg.lambda_min, cfg.grid_size)
    return LambdaGrid(values=values, lambda_max=float(lambda_max),
                      lambda_min=cfg.lambda_min)


def _capped_inverse(values: np.ndarray) -> np.ndarray:
    out = np.empty_like(values, dtype=float)
    small = np.abs(values) < 1.0 / WEIGHT_CAP
    out[small] = WEIGHT_CAP
    out[~small] = 1.0 / np.abs(values[~small])
    return out


def adaptive_weights_step1(dataset: Dataset, spec, beta: LoadingVector,
                           config: SolverConfig | None = None) -> np.ndarray:
    """Inverse whole-group norms of the unpenalized spline fit, genes 1..p."""
    config = config or SolverConfig()
    gamma_un = unpenalized_coefficients(dataset, spec, beta, config)
    return _weights_from_unpenalized(gamma_un)


def _weights_from_unpenalized(gamma_un: Coefficients) -> np.ndarray:
    norms = np.sqrt(gamma_un.constant[1:] ** 2 +
                    np.sum(gamma_un.varying[1:] ** 2, axis=1))
    return _capped_inverse(norms)


def adaptive_weights_step2(gamma1: Coefficients) -> np.ndarray:
    """Inverse absolute Step-1 constants, genes 1..p."""
    return _capped_inverse(gamma1.constant[1:])


def adaptive_weights_step3(dataset: Dataset, spec, gamma2: Coefficients,
                           beta_start: LoadingVector,
                           config: SolverConfig | None = None
                           ) -> tuple[np.ndarray, LoadingVector]:
    """Inverse unpenalized loading estimates; also returns that estimate."""
    config = config or SolverConfig()
    beta_un, _ = step3_beta_update(dataset, spec, gamma2, 0.0,
                                   np.ones(dataset.q), beta_start, config)
    weights = _capped_inverse(beta_un.beta)
    weights[0] = 0.0  # never penalized
    return weights, beta_un


def _penalized_df(problem: GroupDescentProblem, theta: tuple) -> int:
    """Count of coefficients inside surviving penalized groups.

    Counting coefficients (group size times an indicator) rather than groups
    keeps the BIC penalty commensurate with the overfitting gain of a whole
    spline block; for singleton groups the two readings coincide.
    """
    _, thetap = theta
    count = 0
    for m in range(problem.M):
        if np.any(thetap[m]):
            count += int(problem.pen_widths[m])
    return count


def _confirmed_lambda_max(problem: GroupDescentProblem, start_theta: tuple | None,
                          tries: int) -> float:
    """One-pass zeroing level, bumped until a real solve confirms it."""
    lam = problem.lambda_max()
    if lam <= 0.0:
        return 0.0
    for _ in range(tries):
        res = problem.solve(lam, start_theta=start_theta)
        if _penalized_df(problem, res.theta) == 0:
            return lam
        lam *= 1.25
    raise TuningError("could not confirm an all-zero lambda_max")


def lambda_max_for_layout(y: np.ndarray, W: np.ndarray, layout: GroupLayout,
                          config: SolverConfig | None = None,
                          tuning_config: TuningConfig | None = None) -> float:
    """Confirmed smallest lambda at which every penalized group is zero."""
    config = config or SolverConfig()
    tcfg = tuning_config or TuningConfig()
    problem = GroupDescentProblem(y, W, layout, config)
    return _confirmed_lambda_max(problem, None, tcfg.confirm_tries)


def _scan_grid(problem: GroupDescentProblem, grid: LambdaGrid,
               start_theta: tuple | None, n: int
               ) -> tuple[float, BicTrace, np.ndarray]:
    """Warm-started descent along the grid; returns the BIC minimizer."""
    trace = BicTrace(lambda_max=grid.lambda_max)
    warm = start_theta
    best = None
    for lam in grid.values:
        try:
            res = problem.solve(float(lam), start_theta=warm)
        except Exception as exc:  # pragma: no cover - defensive skip path
            warnings.warn(f"grid point lambda={lam:.4g} failed: {exc}")
            trace.skipped += 1
            continue
        warm = res.theta
        df = _penalized_df(problem, res.theta)
        bic = bic_value(res.rss, df, n)
        trace.records.append(BicRecord(float(lam), res.rss, df, bic))
        if best is None or bic < best[0]:
            best = (bic, len(trace.records) - 1, float(lam), res.gamma.copy())
    if best is None:
        raise TuningError("every lambda grid point failed")
    trace.argmin_index = best[1]
    return best[2], trace, best[3]


def tune_step1(dataset: Dataset, spec, beta: LoadingVector, config: SolverConfig,
               tcfg: TuningConfig) -> tuple[float, BicTrace, Coefficients]:
    """Grid search for the varying-selection level; df counts nonzero
    varying-part groups."""
    gamma_un = unpenalized_coefficients(dataset, spec, beta, config)
    weights = _weights_from_unpenalized(gamma_un)
    problem = build_step1_problem(dataset, spec, beta, weights, config)
    start = problem.theta_from_gamma(gamma_un.flat())
    lam_max = _confirmed_lambda_max(problem, start, tcfg.confirm_tries)
    grid = build_grid(lam_max, tcfg)
    lam, trace, gamma = _scan_grid(problem, grid, start, dataset.n)
    return lam, trace, Coefficients.from_flat(gamma, dataset.p + 1)


def tune_step2(dataset: Dataset, spec, beta: LoadingVector, gamma1: Coefficients,
               config: SolverConfig, tcfg: TuningConfig
               ) -> tuple[float, BicTrace, Coefficients]:
    """Grid search for the constant-selection level; df counts surviving
    penalized constants."""
    weights = adaptive_weights_step2(gamma1)
    problem, cols, _ = build_step2_problem(dataset, spec, beta, gamma1,
                                           weights, config)
    start = problem.theta_from_gamma(gamma1.flat()[cols])
    lam_max = _confirmed_lambda_max(problem, start, tcfg.confirm_tries)
    grid = build_grid(lam_max, tcfg)
    lam, trace, gamma = _scan_grid(problem, grid, start, dataset.n)
    full = np.zeros(spec.num_basis * (dataset.p + 1))
    full[cols] = gamma
    return lam, trace, Coefficients.from_flat(full, dataset.p + 1)


def tune_step3(dataset: Dataset, spec, gamma2: Coefficients,
               beta_start: LoadingVector, config: SolverConfig,
               tcfg: TuningConfig) -> tuple[float, BicTrace, LoadingVector]:
    """Grid search for the loading-selection level; df counts nonzero
    loadings (the first is unpenalized, so df >= 1)."""
    weights, beta_un = adaptive_weights_step3(dataset, spec, gamma2,
                                              beta_start, config)
    lam_max = lambda_max_step3(dataset, spec, gamma2, np.maximum(weights, 1e-300),
                               beta_start, config)
    lam_max = _confirm_lambda_max_step3(dataset, spec, gamma2, weights,
                                        beta_start, config, lam_max,
                                        tcfg.confirm_tries)
    grid = build_grid(lam_max, tcfg)
    trace = BicTrace(lambda_max=grid.lambda_max)
    warm = beta_start
    best = None
    for lam in grid.values:
        try:
            cand, _ = step3_beta_update(dataset, spec, gamma2, float(lam),
                                        weights, warm, config)
        except Exception as exc:  # pragma: no cover - defensive skip path
            warnings.warn(f"grid point lambda={lam:.4g} failed: {exc}")
            trace.skipped += 1
            continue
        warm = cand
        rss = _model_rss(dataset, spec, gamma2, cand)
        df = int(np.count_nonzero(cand.beta))
        bic = bic_value(rss, df, dataset.n)
        trace.records.append(BicRecord(float(lam), rss, df, bic))
        if best is None or bic < best[0]:
            best = (bic, len(trace.records) - 1, float(lam), cand)
    if best is None:
        raise TuningError("every lambda grid point failed in the loading step")
    trace.argmin_index = best[1]
    return best[2], trace, best[3]


def _model_rss(dataset: Dataset, spec, coef: Coefficients,
               beta: LoadingVector) -> float:
    u = dataset.x @ beta.beta
    T = transformed_basis_matrix(spec, u, clamp_all=True)
    fmat = coef.constant[None, :] + T[:, 1:] @ coef.varying.T
    resid = dataset.y - np.sum(fmat * dataset.g, axis=1)
    return float(resid @ resid)


def _confirm_lambda_max_step3(dataset, spec, gamma2, weights, beta_start,
                              config, lam, tries) -> float:
    if lam <= 0.0:
        return 0.0
    for _ in range(tries):
        beta_hat, _ = step3_beta_update(dataset, spec, gamma2, lam, weights,
                                        beta_start, config)
        if np.count_nonzero(beta_hat.beta[1:]) == 0:
            return lam
        lam *= 1.25
    raise TuningError("could not confirm an all-zero lambda_max for loadings")


def select_lambda1(dataset: Dataset, spec, beta: LoadingVector,
                   config: SolverConfig | None = None,
                   tuning_config: TuningConfig | None = None
                   ) -> tuple[float, BicTrace]:
    lam, trace, _ = tune_step1(dataset, spec, beta, config or SolverConfig(),
                               tuning_config or TuningConfig())
    return lam, trace


def select_lambda2(dataset: Dataset, spec, beta: LoadingVector,
                   gamma1: Coefficients, config: SolverConfig | None = None,
                   tuning_config: TuningConfig | None = None
                   ) -> tuple[float, BicTrace]:
    lam, trace, _ = tune_step2(dataset, spec, beta, gamma1,
                               config or SolverConfig(),
                               tuning_config or TuningConfig())
    return lam, trace


def select_lambda3(dataset: Dataset, spec, gamma2: Coefficients,
                   beta_start: LoadingVector, config: SolverConfig | None = None,
                   tuning_config: TuningConfig | None = None
                   ) -> tuple[float, BicTrace]:
    lam, trace, _ = tune_step3(dataset, spec, gamma2, beta_start,
                               config or SolverConfig(),
                               tuning_config or TuningConfig())
    return lam, trace


def select_knots_order(dataset: Dataset, beta0: LoadingVector, r: int = 2,
                       config: SolverConfig | None = None) -> tuple[int, int]:
    """Two-dimensional grid search on the intercept-only spline fit.

    For every candidate (K, h) the response is regressed on the intercept
    basis alone and ``log(rss) + log(n)/n * (K + h)`` is minimized.
    """
    config = config or SolverConfig()
    (k_lo, k_hi), orders = knot_order_grid(dataset.n, r)
    u = index_values(dataset, beta0)
    lo, hi = float(u.min()), float(u.max())
    best = None
    for K in range(k_lo, k_hi + 1):
        for h in orders:
            spec = make_basis(lo, hi, K, h)
            T = transformed_basis_matrix(spec, u)
            gram = T.T @ T
            gram[np.diag_indices_from(gram)] += config.ridge_eps * max(
                np.trace(gram) / gram.shape[0], 1.0)
            coef = np.linalg.solve(gram, T.T @ dataset.y)
            resid = dataset.y - T @ coef
            crit = bic_value(float(resid @ resid), K + h, dataset.n)
            if best is None or crit < best[0]:
                best = (crit, K, h)
    return best[1], best[2]
