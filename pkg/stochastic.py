"""
Monte Carlo Module
L2 checks of fBm iterated integrals, the probabilistic remainder and pathwise norm statistics
"""
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import norm

from config import MC_DEFAULT_REPLICATES, MC_MIN_REPLICATES, thread_limit
from errors import DivergentTailError, DomainError, ReplicateCountWarning
from fraccalc import FracParams, c_alpha, lambda_alpha, lambda_alpha_upper_bound
from jets import JetSystem, Word, build_table, word_label
from paths import FbmSpec, holder_constant, holder_sup_norm, sample_fbm, sample_fbm_batch
from taylor import (
    BoundParams,
    PathNorms,
    expansion_levels,
    iterated_integral_values,
    log_tail_sum,
    remainder_bound,
    safe_exp,
    truncated_solution,
)
from young import picard_solve

logger = logging.getLogger(__name__)

CHUNK_REPLICATES = 250


def _check_hurst(hurst: float) -> None:
    if not 0.5 < hurst < 1.0:
        raise DomainError(f"Hurst parameter must lie in (1/2, 1), got {hurst}")


def l2_bound(m: int, t: float, hurst: float) -> float:
    """K^{2m} / m! t^{2Hm} with K^2 = 2 / (H(2H-1))"""
    _check_hurst(hurst)
    if m < 1:
        raise DomainError("word length must be positive")
    if t <= 0:
        raise DomainError("t must be positive")
    k_squared = 2.0 / (hurst * (2.0 * hurst - 1.0))
    return float(math.exp(m * math.log(k_squared) - gammaln(m + 1) + 2.0 * hurst * m * math.log(t)))


def _k_constant(hurst: float) -> float:
    return math.sqrt(2.0 / (hurst * (2.0 * hurst - 1.0)))


def phi_gamma(x: float, gamma: float) -> float:
    """sum_{k>=0} x^k / (k!)^{1/2-gamma}"""
    if not 0.0 <= gamma < 0.5:
        raise DomainError(f"gamma must lie in [0, 1/2), got {gamma}")
    if x < 0:
        raise DomainError("x must be nonnegative")
    if x == 0:
        return 1.0
    log_x = math.log(x)
    log_value, _ = log_tail_sum(lambda k: k * log_x - (0.5 - gamma) * gammaln(k + 1.0), 0, label="Phi")
    return safe_exp(log_value)


@dataclass(frozen=True)
class ProbabilisticBound:
    """Direct tail and the displayed form with unit constant"""
    value: float
    log_value: float
    displayed: float
    log_displayed: float


def probabilistic_remainder(N: int, t: float, hurst: float, M: float, gamma: float, d: int,
                            time_exponent: str = "2h") -> ProbabilisticBound:
    """
    sum_{k>N} (d K t^{2H} M)^k / (k!)^{1/2-gamma}, and (.)^{N+1}/((N+1)!)^{1/2-gamma} Phi_gamma(.).
    time_exponent="l2" uses t^H, the per-level scale of the L2 estimate.
    """
    _check_hurst(hurst)
    if not 0.0 <= gamma < 0.5:
        raise DomainError(f"gamma must lie in [0, 1/2), got {gamma}")
    if N < 0:
        raise DomainError("N must be nonnegative")
    if time_exponent not in ("2h", "l2"):
        raise DomainError(f"unknown time exponent '{time_exponent}'")
    exponent = 2.0 * hurst if time_exponent == "2h" else hurst
    y = d * _k_constant(hurst) * t**exponent * M
    if y == 0.0:
        return ProbabilisticBound(0.0, -math.inf, 0.0, -math.inf)
    log_y = math.log(y)
    power = 0.5 - gamma
    log_value, _ = log_tail_sum(lambda k: k * log_y - power * gammaln(k + 1.0), N + 1, label="probabilistic")
    log_displayed = (N + 1) * log_y - power * gammaln(N + 2.0) + math.log(phi_gamma(y, gamma))
    return ProbabilisticBound(
        safe_exp(log_value),
        log_value,
        safe_exp(log_displayed),
        log_displayed,
    )


# ---- Monte Carlo plumbing ----

def _z_score(confidence: float) -> float:
    return float(norm.ppf(1.0 - (1.0 - confidence) / 2.0))


def _chunks(replicates: int):
    return [(start, min(CHUNK_REPLICATES, replicates - start)) for start in range(0, replicates, CHUNK_REPLICATES)]


def _run_chunks(job: Callable, replicates: int) -> List:
    chunks = _chunks(replicates)
    workers = min(thread_limit(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(lambda c: job(*c), chunks))
    return [job(*c) for c in chunks]


def _time_index(spec: FbmSpec, t: float) -> int:
    times = spec.times()
    tol = 1e-9 * max(1.0, spec.horizon)
    if t <= 0 or t > spec.horizon + tol:
        raise DomainError(f"t={t} outside (0, {spec.horizon}]")
    return int(np.searchsorted(times, t + tol, side="right") - 1)


def _warn_replicates(replicates: int) -> None:
    if replicates < MC_MIN_REPLICATES:
        warnings.warn(
            f"{replicates} replicates is below {MC_MIN_REPLICATES}; intervals are unreliable",
            ReplicateCountWarning,
            stacklevel=3,
        )


@dataclass
class McConfig:
    """Replicates of an fBm template; seeds run from fbm.seed upward"""
    fbm: FbmSpec
    words: List[Word]
    replicates: int = MC_DEFAULT_REPLICATES
    confidence: float = 0.99
    t: Optional[float] = None

    def __post_init__(self):
        if self.replicates < 1:
            raise DomainError("replicates must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise DomainError("confidence must lie in (0, 1)")
        self.words = [tuple(int(x) for x in w) for w in self.words]
        for word in self.words:
            if not word:
                raise DomainError("words must be nonempty")
            if any(letter < 1 or letter > self.fbm.dimension for letter in word):
                raise DomainError(f"word {word} must use letters 1..{self.fbm.dimension}; there is no drift")

    @property
    def time(self) -> float:
        return self.fbm.horizon if self.t is None else self.t

    @property
    def seeds(self) -> range:
        return range(self.fbm.seed, self.fbm.seed + self.replicates)


@dataclass
class L2Row:
    word: Word
    m: int
    empirical: float
    standard_error: float
    ci_halfwidth: float
    bound: float
    passed: bool

    def csv_row(self):
        return [word_label(self.word), self.m, self.empirical, self.ci_halfwidth, self.bound, self.passed]


@dataclass
class L2Report:
    rows: List[L2Row]
    replicates: int
    confidence: float
    t: float
    seeds: List[int] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(row.passed for row in self.rows)


def mc_l2(config: McConfig) -> L2Report:
    """Empirical E|int dB^I|^2 per word with a normal-approximation interval against l2_bound"""
    _warn_replicates(config.replicates)
    spec = config.fbm
    t = config.time
    idx = _time_index(spec, t)

    def job(start: int, size: int):
        values = sample_fbm_batch(spec, size, seed_offset=start)
        sums = []
        for word in config.words:
            squares = iterated_integral_values(values, word)[idx] ** 2
            sums.append((math.fsum(squares), math.fsum(squares**2)))
        logger.debug("L2 chunk at replicate %d done", start)
        return sums

    partials = _run_chunks(job, config.replicates)
    z = _z_score(config.confidence)
    R = config.replicates
    rows = []
    for w, word in enumerate(config.words):
        total = math.fsum(p[w][0] for p in partials)
        total_sq = math.fsum(p[w][1] for p in partials)
        mean = total / R
        variance = max(total_sq - R * mean * mean, 0.0) / (R - 1) if R > 1 else 0.0
        se = math.sqrt(variance / R)
        bound = l2_bound(len(word), t, spec.hurst)
        half = z * se
        rows.append(L2Row(word, len(word), mean, se, half, bound, bool(mean + half <= bound)))
    logger.info("L2 check over %d replicates: %d/%d words pass", R, sum(r.passed for r in rows), len(rows))
    return L2Report(rows, R, config.confidence, t, list(config.seeds))


@dataclass
class PathwiseStats:
    """Per-replicate pathwise functionals of fBm samples"""
    sup_norm: np.ndarray
    lambda_alpha: np.ndarray
    eta: np.ndarray
    chain_bound: np.ndarray
    c_alpha: float

    def summary(self) -> dict:
        return {
            "sup_norm_mean": float(np.mean(self.sup_norm)),
            "lambda_alpha_mean": float(np.mean(self.lambda_alpha)),
            "eta_mean": float(np.mean(self.eta)),
            "chain_bound_mean": float(np.mean(self.chain_bound)),
            "chain_violations": int(np.sum(self.lambda_alpha > self.chain_bound * (1 + 1e-12))),
            "c_alpha": self.c_alpha,
        }


def mc_pathwise_norms(spec: FbmSpec, replicates: int, alpha: float, beta: Optional[float] = None,
                      t: Optional[float] = None) -> PathwiseStats:
    """|B|_{alpha,T,inf}, Lambda_alpha(T,B), eta_{beta,T} and its chain estimate for each replicate"""
    beta = spec.effective_beta if beta is None else beta
    t = spec.horizon if t is None else t
    params = FracParams(alpha, t)

    def job(start: int, size: int):
        out = []
        for r in range(start, start + size):
            path = sample_fbm(spec.with_seed(spec.seed + r))
            eta = holder_constant(path, beta, t)
            out.append((
                holder_sup_norm(path, alpha, t),
                lambda_alpha(path, params),
                eta,
                lambda_alpha_upper_bound(eta, alpha, beta, t),
            ))
        return out

    results = [row for chunk in _run_chunks(job, replicates) for row in chunk]
    columns = np.array(results).T
    return PathwiseStats(columns[0], columns[1], columns[2], columns[3], c_alpha(t, alpha))


@dataclass
class TruncationRow:
    N: int
    rms: float
    rms_upper: float
    bound: float
    passed: bool


def mc_truncation_error(system: JetSystem, spec: FbmSpec, replicates: int, t: float,
                        orders: Sequence[int], M: float, gamma: float = 0.0,
                        confidence: float = 0.99) -> List[TruncationRow]:
    """RMS over replicates of |X_t - truncation(N)| against the probabilistic remainder at scale t^H"""
    if not system.is_zero(0):
        raise DomainError("the probabilistic remainder assumes no drift (V_0 = 0)")
    if system.drive_count != spec.dimension:
        raise DomainError("system and fBm have different numbers of driving components")
    _warn_replicates(replicates)
    orders = list(orders)
    k_max = max(orders)
    table = build_table(system, k_max)
    idx = _time_index(spec, t)

    def job(start: int, size: int):
        errors = []
        for r in range(start, start + size):
            path = sample_fbm(spec.with_seed(spec.seed + r))
            reference = picard_solve(system, path).trajectory[idx]
            levels = expansion_levels(path, table, k_max)
            errors.append([
                float(np.sum((reference - truncated_solution(levels, system.base_point, N)[idx]) ** 2))
                for N in orders
            ])
        return errors

    squared = np.array([row for chunk in _run_chunks(job, replicates) for row in chunk])
    z = _z_score(confidence)
    rows = []
    for col, N in enumerate(orders):
        mean = math.fsum(squared[:, col]) / replicates
        se = float(np.std(squared[:, col], ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
        bound = probabilistic_remainder(N, t, spec.hurst, M, gamma, system.drive_count, "l2").value
        upper = math.sqrt(mean + z * se)
        rows.append(TruncationRow(N, math.sqrt(mean), upper, bound, bool(upper <= bound)))
    return rows


def tail_comparison(params: BoundParams, norms: PathNorms, hurst: float, t: float,
                    orders: Sequence[int], time_exponent: str = "2h") -> List[List[float]]:
    """Rows (N, probabilistic, deterministic, ratio) on matched M, gamma, d"""
    rows = []
    for N in orders:
        prob = probabilistic_remainder(N, t, hurst, params.M, params.gamma, params.d, time_exponent).value
        try:
            det = remainder_bound(params, norms, N).value
        except DivergentTailError:
            det = math.inf
        ratio = prob / det if det > 0 else math.inf
        rows.append([N, prob, det, ratio])
    return rows
