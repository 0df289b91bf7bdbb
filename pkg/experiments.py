"""
Experiment Runner
Composes the numerical modules into the named batch experiments and writes their artifacts
"""
import logging
import os
import warnings
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from config import GAMMA_GRID, OUTPUT_DIR, OUTPUT_DIR_ENV
from errors import DivergentTailError, DomainError
from exporters import ArtifactWriter
from fraccalc import FracParams
from jets import CoefficientTable, GrowthFit, build_table, fit_growth, word_label
from magnus import (
    coefficient_envelope,
    coefficient_magnitude_bound,
    group_trajectory,
    lie_series_terms,
)
from paths import PathGrid
from schemas import ExperimentConfig
from stochastic import McConfig, mc_l2, mc_truncation_error, probabilistic_remainder, tail_comparison
from taylor import (
    BoundParams,
    PathNorms,
    bound_trace,
    detect_tc,
    expansion_levels,
    path_norm_profile,
    remainder_bound,
    truncated_solution,
)
from young import integral_defect, picard_solve, picard_solve_split

logger = logging.getLogger(__name__)


def resolve_output_dir(config: ExperimentConfig, out: Optional[str] = None) -> Path:
    """--out wins, then the environment override, then the config file, then the default"""
    if out:
        return Path(out)
    if os.getenv(OUTPUT_DIR_ENV):
        return Path(os.environ[OUTPUT_DIR_ENV])
    if config.output_dir:
        return Path(config.output_dir)
    return Path(OUTPUT_DIR)


def _eval_index(path: PathGrid, config: ExperimentConfig) -> int:
    t = config.parameters.t
    return path.grid_size - 1 if t is None else path.index_of(t)


def _solve(config: ExperimentConfig, system, path: PathGrid):
    p = config.parameters
    solver = picard_solve_split if p.split else picard_solve
    return solver(system, path, tol=p.tolerance, max_iter=p.max_iter, scheme=p.scheme)


def _bound_params(config: ExperimentConfig, table: CoefficientTable, drive_count: int,
                  norms: PathNorms, N: int):
    """
    BoundParams with M and gamma taken from the config or fitted from the table.
    Fitted candidates are ranked by the remainder bound they give at order N under these norms.
    """
    p = config.parameters
    fit: Optional[GrowthFit] = None
    M, gamma = p.M, p.gamma
    if M is None or gamma is None:
        # gamma must stay below 1 - 2 alpha for the bound to exist
        grid = [gamma] if gamma is not None else [g for g in GAMMA_GRID if g < 1.0 - 2.0 * p.alpha]

        def score(g: float, m: float) -> float:
            try:
                return remainder_bound(BoundParams(p.alpha, g, m, drive_count), norms, N).log_value
            except (DivergentTailError, DomainError):
                return float("inf")

        fit = fit_growth(table, grid, score=score)
        if not fit.admissible:
            logger.warning("Growth fit is not admissible at order %d; bounds use M=%.4g", table.max_order, fit.M)
        M = fit.M if M is None else M
        gamma = fit.gamma if gamma is None else gamma
    radius = config.system.C if config.system.C is not None else float("inf")
    params = BoundParams(p.alpha, gamma, M, drive_count, p.r, radius)
    return params, fit


def _fit_summary(fit: Optional[GrowthFit]) -> Dict:
    if fit is None:
        return {}
    return {"growth_fit": {"M": fit.M, "gamma": fit.gamma, "admissible": fit.admissible,
                           "convention": fit.convention}}


def _probabilistic_fit(system, hurst: float, t: float, orders, gamma: Optional[float] = None) -> GrowthFit:
    """(M, gamma) in the |P_I| <= M^k (k!)^gamma form the probabilistic remainder assumes"""
    N = max(orders)
    table = build_table(system, N)
    grid = [gamma] if gamma is not None else [g for g in GAMMA_GRID if g < 0.5]

    def score(g: float, m: float) -> float:
        return probabilistic_remainder(N, t, hurst, m, g, system.drive_count, "l2").log_value

    fit = fit_growth(table, grid, convention="factorial", score=score)
    if not fit.admissible:
        logger.warning("Growth fit is not admissible at order %d; the probabilistic bound uses M=%.4g", N, fit.M)
    return fit


def run_solve(config: ExperimentConfig, writer: ArtifactWriter) -> Dict:
    system = config.system.build()
    path = config.path.build()
    output = _solve(config, system, path)
    header = ["t"] + [f"x{j + 1}" for j in range(system.dimension)]
    writer.csv("solution.csv", header, output.rows())
    if config.plot:
        series = {f"x{j + 1}": output.trajectory[:, j] for j in range(system.dimension)}
        writer.plot("solution.png", path.times, series, ylabel="X")
    defect = integral_defect(system, path, output.trajectory, scheme=config.parameters.scheme)
    return {"picard": {"iterations": output.iterations_used, "residual": output.residual, "defect": defect}}


def run_expand(config: ExperimentConfig, writer: ArtifactWriter) -> Dict:
    system = config.system.build()
    path = config.path.build()
    k_max = config.parameters.k_max
    table = build_table(system, k_max)
    levels = expansion_levels(path, table, k_max, scheme=config.parameters.scheme)
    writer.csv("coefficients.csv", ["word", "j", "value"], table.rows())
    writer.csv("levels.csv", ["k", "t", "j", "value"], (row for level in levels for row in level.rows()))
    if config.plot:
        writer.plot("levels.png", path.times, {f"g{level.order}": level.norms() for level in levels},
                    ylabel="|g_k(t)|")
    fit = fit_growth(table)
    return _fit_summary(fit)


def run_bound(config: ExperimentConfig, writer: ArtifactWriter) -> Dict:
    system = config.system.build()
    path = config.path.build()
    p = config.parameters
    FracParams(p.alpha, path.horizon).check_path(path)
    idx = _eval_index(path, config)
    k_max = p.k_max
    table = build_table(system, k_max)
    profile = path_norm_profile(path, p.alpha, stop=idx)
    params, fit = _bound_params(config, table, system.drive_count, profile.at(idx), p.N)

    rows = zip(profile.times, profile.lambda_alpha, profile.c_alpha, profile.sup_norm)
    writer.csv("norms.csv", ["t", "lambda_alpha", "c_alpha", "sup_norm"], rows)
    trace = bound_trace(params, profile.at(idx), range(1, p.N + 1))
    writer.csv("bounds.csv", ["N", "bound", "closed_form"], trace)
    if config.plot:
        orders = np.array([row[0] for row in trace])
        writer.plot("bounds.png", orders, {"bound": np.array([row[1] for row in trace]),
                                           "closed_form": np.array([row[2] for row in trace])},
                    xlabel="N", logy=True)

    extra = {"bound_params": {"alpha": params.alpha, "gamma": params.gamma, "M": params.M, "d": params.d}}
    extra.update(_fit_summary(fit))
    if np.isfinite(params.C):
        levels = expansion_levels(path, table, k_max, scheme=p.scheme)
        window = detect_tc(levels, params, path_norm_profile(path, p.alpha))
        extra["convergence_window"] = {"t_c": window.time, "index": window.index, "crossed": window.crossed}
    return extra


def run_compare(config: ExperimentConfig, writer: ArtifactWriter) -> Dict:
    """Picard reference against truncations and both remainder bounds at sampled times"""
    system = config.system.build()
    path = config.path.build()
    p = config.parameters
    last = _eval_index(path, config)
    k_max = max(p.N, p.k_max)
    table = build_table(system, k_max)
    profile = path_norm_profile(path, p.alpha, stop=last)
    params, fit = _bound_params(config, table, system.drive_count, profile.at(last), p.N)

    reference = _solve(config, system, path).trajectory
    levels = expansion_levels(path, table, k_max, scheme=p.scheme)
    truncations = {N: truncated_solution(levels, system.base_point, N) for N in range(1, p.N + 1)}
    window = detect_tc(levels, params, profile)

    indices = sorted(set(np.linspace(0, last, p.time_points + 1).round().astype(int)[1:].tolist()))
    rows: List[List] = []
    for idx in indices:
        norms = profile.at(idx)
        inside = (not window.crossed) or idx < window.index
        for N, bound, closed_form in bound_trace(params, norms, range(1, p.N + 1)):
            error = float(np.linalg.norm(reference[idx] - truncations[N][idx]))
            rows.append([path.times[idx], N, error, bound, closed_form, inside])
    writer.csv("compare.csv", ["t", "N", "error", "bound", "closed_form", "inside_window"], rows)

    if config.path.kind == "fbm" and params.gamma < 0.5:
        t = float(path.times[last])
        tails = tail_comparison(params, profile.at(last), config.path.hurst, t, range(1, p.N + 1))
        writer.csv("tails.csv", ["N", "probabilistic", "deterministic", "ratio"], tails)

    extra = {"convergence_window": {"t_c": window.time, "index": window.index, "crossed": window.crossed}}
    extra.update(_fit_summary(fit))
    return extra


def run_magnus(config: ExperimentConfig, writer: ArtifactWriter) -> Dict:
    setup = config.lie.build()
    path = config.path.build()
    p = config.parameters
    n = setup.size
    group = group_trajectory(setup, path, p.k_max)
    reference = _solve(config, setup.as_system(), path).trajectory.reshape(-1, n, n)

    header = ["t"] + [f"m{r + 1}{c + 1}" for r in range(n) for c in range(n)]
    writer.csv("group.csv", header, ([t, *g.ravel()] for t, g in zip(path.times, group)))
    errors = np.max(np.abs(group - reference), axis=(1, 2))
    orthogonality = np.max(np.abs(np.einsum("tji,tjk->tik", group, group) - np.eye(n)), axis=(1, 2))
    writer.csv("magnus_check.csv", ["t", "picard_error", "orthogonality_defect"],
               zip(path.times, errors, orthogonality))

    idx = _eval_index(path, config)
    terms = lie_series_terms(setup, path, p.k_max)
    writer.csv("lie_terms.csv", ["word", "coefficient", "bracket_norm"],
               ([word_label(term.word), term.coefficient[idx], np.linalg.norm(term.bracket)] for term in terms))
    writer.csv("coefficient_bounds.csv", ["k", "magnitude_bound", "envelope"],
               ([k, coefficient_magnitude_bound(k), coefficient_envelope(k)] for k in range(1, p.k_max + 1)))
    if config.plot:
        writer.plot("magnus_error.png", path.times, {"picard_error": errors}, ylabel="max |exp - picard|")
    return {"magnus": {"max_picard_error": float(errors[: idx + 1].max()), "terms": len(terms)}}


def run_mc_l2(config: ExperimentConfig, writer: ArtifactWriter) -> Dict:
    mc = config.monte_carlo
    spec = config.path.fbm_spec()
    mc_config = McConfig(spec, [tuple(w) for w in mc.words], mc.replicates, mc.confidence, mc.t)
    report = mc_l2(mc_config)
    writer.csv("l2.csv", ["word", "m", "empirical", "ci_halfwidth", "bound", "pass"],
               (row.csv_row() for row in report.rows))
    extra = {"l2": {"t": report.t, "all_passed": report.all_passed}}

    if config.system is not None:
        system = config.system.build()
        p = config.parameters
        M, gamma = p.M, p.gamma
        if M is None or gamma is None:
            fit = _probabilistic_fit(system, config.path.hurst, report.t, mc.orders, gamma)
            M = fit.M if M is None else M
            gamma = fit.gamma if gamma is None else gamma
            extra.update(_fit_summary(fit))
        rows = mc_truncation_error(system, spec, mc.replicates, report.t, mc.orders, M, gamma, mc.confidence)
        writer.csv("truncation.csv", ["N", "rms", "rms_upper", "bound", "pass"],
                   ([r.N, r.rms, r.rms_upper, r.bound, r.passed] for r in rows))
    return extra


EXPERIMENTS: Dict[str, Callable[[ExperimentConfig, ArtifactWriter], Dict]] = {
    "solve": run_solve,
    "expand": run_expand,
    "bound": run_bound,
    "compare": run_compare,
    "magnus": run_magnus,
    "mc-l2": run_mc_l2,
}


def run_experiment(config: ExperimentConfig, out_dir) -> Dict:
    """
    Run one experiment into out_dir and write its manifest.

    Toolkit errors propagate after error.json is written; warnings raised on the way are
    logged and echoed in the manifest.
    """
    writer = ArtifactWriter(out_dir)
    logger.info("Running experiment '%s' into %s", config.experiment, writer.out_dir)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            extra = EXPERIMENTS[config.experiment](config, writer)
    except Exception as err:
        writer.error(config.experiment, err)
        raise

    messages = []
    for warning in caught:
        logger.warning("%s: %s", warning.category.__name__, warning.message)
        messages.append(f"{warning.category.__name__}: {warning.message}")
    extra = dict(extra)
    extra["experiment"] = config.experiment
    if messages:
        extra["warnings"] = messages
    return writer.manifest(config.model_dump(mode="json"), config.seeds(), extra)
