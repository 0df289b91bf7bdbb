"""
Taylor Expansion Module
Iterated integrals, expansion levels, the inductive construction, truncations and remainder bounds
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.special import betaln, gammaln

from config import MAX_TABLE_WORDS, TAIL_MAX_TERMS, TAIL_RELATIVE_CUTOFF
from errors import BudgetExceededError, DivergentTailError, DomainError
from fraccalc import FracParams, c_alpha, lambda_alpha_profile
from jets import CoefficientTable, Jet, JetSystem, Word, count_words, jet_algebra, validate_word
from paths import PathGrid, holder_sup_norm_profile
from young import riemann_stieltjes

logger = logging.getLogger(__name__)


# ---- iterated integrals ----

def _letter_values(values: np.ndarray, letter: int) -> np.ndarray:
    return values[:, letter]


def iterated_integral_values(values: np.ndarray, word: Sequence[int], scheme: str = "trapezoid") -> np.ndarray:
    """
    Iterated integral over the simplex for raw path values of shape (grid, d+1, *batch).
    The first letter is integrated first (earliest time).
    """
    word = tuple(word)
    if not word:
        raise DomainError("words must have at least one letter")
    first = _letter_values(values, word[0])
    integral = first - first[0]
    for letter in word[1:]:
        integral = riemann_stieltjes(integral, _letter_values(values, letter), scheme)
    return integral


def iterated_integral(path: PathGrid, word: Sequence[int], scheme: str = "trapezoid") -> np.ndarray:
    """t -> int_{0<t1<...<tk<t} dy^{i1}...dy^{ik} on the grid"""
    word = validate_word(word, path.drive_count)
    return iterated_integral_values(path.values, word, scheme)


def iterated_integrals(path: PathGrid, max_length: int, letters: Optional[Sequence[int]] = None,
                       scheme: str = "trapezoid") -> Dict[Word, np.ndarray]:
    """All iterated integrals of words up to max_length; each word extends its prefix by one integration"""
    letters = list(range(path.drive_count + 1)) if letters is None else list(letters)
    total = count_words(len(letters), max_length)
    if total > MAX_TABLE_WORDS:
        raise BudgetExceededError(f"{total} words exceed the budget of {MAX_TABLE_WORDS}")
    out: Dict[Word, np.ndarray] = {}
    frontier = []
    for letter in letters:
        column = path.values[:, letter]
        out[(letter,)] = column - column[0]
        frontier.append((letter,))
    for _ in range(1, max_length):
        extended = []
        for word in frontier:
            for letter in letters:
                new = word + (letter,)
                out[new] = riemann_stieltjes(out[word], path.values[:, letter], scheme)
                extended.append(new)
        frontier = extended
    return out


# ---- expansion levels ----

@dataclass
class ExpansionLevel:
    """g_k on the grid, optionally with the per-word iterated integrals"""
    order: int
    times: np.ndarray
    values: np.ndarray
    per_word: Optional[Dict[Word, np.ndarray]] = None

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)

    def rows(self):
        for t, row in zip(self.times, self.values):
            for j, value in enumerate(row):
                yield [self.order, t, j + 1, value]


def expansion_levels(path: PathGrid, table: CoefficientTable, k_max: int, keep_words: bool = False,
                     scheme: str = "trapezoid") -> List[ExpansionLevel]:
    """
    g_k(t) = sum_{|I|=k} P_I int_{simplex} dy^I for k = 1..k_max.

    Words are visited depth first, so only one integral per length is held at a time
    unless keep_words is set.
    """
    if k_max < 1:
        raise DomainError("k_max must be at least 1")
    if table.max_order < k_max:
        raise DomainError(f"coefficient table covers orders <= {table.max_order}, need {k_max}")
    if table.drive_count != path.drive_count:
        raise DomainError("coefficient table and path use different alphabets")
    total = count_words(path.drive_count + 1, k_max)
    if total > MAX_TABLE_WORDS:
        raise BudgetExceededError(f"{total} words exceed the budget of {MAX_TABLE_WORDS}; lower k_max")

    n = path.grid_size
    sums = [np.zeros((n, table.dimension)) for _ in range(k_max)]
    per_word = [dict() for _ in range(k_max)] if keep_words else None
    letters = range(path.drive_count + 1)

    def visit(word: Word, integral: np.ndarray) -> None:
        k = len(word)
        coeff = table[word]
        if np.any(coeff):
            sums[k - 1] += integral[:, None] * coeff[None, :]
        if per_word is not None:
            per_word[k - 1][word] = integral
        if k == k_max:
            return
        for letter in letters:
            visit(word + (letter,), riemann_stieltjes(integral, path.values[:, letter], scheme))

    for letter in letters:
        column = path.values[:, letter]
        visit((letter,), column - column[0])

    levels = [
        ExpansionLevel(k + 1, path.times, sums[k], per_word[k] if per_word is not None else None)
        for k in range(k_max)
    ]
    logger.info("Assembled %d expansion levels from %d words", k_max, total)
    return levels


def inductive_levels(system: JetSystem, path: PathGrid, k_max: int,
                     scheme: str = "trapezoid") -> List[ExpansionLevel]:
    """
    h_1..h_k_max from dh_k = sum_i C_i^{k-1}(h_1..h_{k-1}) dy^i, where C_i^m is the coefficient of
    eps^m in V_i(x0 + sum_m eps^m h_m), extracted with univariate jets over the whole grid.
    """
    if k_max < 1:
        raise DomainError("k_max must be at least 1")
    if path.drive_count != system.drive_count:
        raise DomainError("path and system use different alphabets")
    n, dim = path.grid_size, system.dimension
    algebra = jet_algebra(1, max(k_max - 1, 0))
    coeffs = np.zeros((algebra.size, n, dim))
    coeffs[0] = system.base_point
    levels: List[ExpansionLevel] = []
    for k in range(1, k_max + 1):
        xs = [Jet(algebra, coeffs[..., m]) for m in range(dim)]
        h = np.zeros((n, dim))
        for i in range(system.drive_count + 1):
            if system.is_zero(i):
                continue
            components = system.evaluate_jets(i, xs)
            c = np.stack([np.broadcast_to(comp.coeffs[k - 1], (n,)) for comp in components], axis=1)
            h += riemann_stieltjes(c, path.values[:, i], scheme)
        levels.append(ExpansionLevel(k, path.times, h))
        if k < k_max:
            coeffs[k] = h
        logger.debug("Inductive level %d done", k)
    return levels


def truncated_solution(levels: Sequence[ExpansionLevel], x0, N: int) -> np.ndarray:
    """x0 + sum_{k<=N} g_k(t) on the grid"""
    x0 = np.asarray(x0, dtype=float)
    if N < 0 or N > len(levels):
        raise DomainError(f"N={N} outside 0..{len(levels)}")
    if not levels:
        raise DomainError("no levels to truncate")
    out = np.broadcast_to(x0, levels[0].values.shape).copy()
    for level in levels[:N]:
        out += level.values
    return out


# ---- bounds ----

@dataclass(frozen=True)
class BoundParams:
    """(alpha, gamma, M, r, C, d) of the convergence criterion"""
    alpha: float
    gamma: float
    M: float
    d: int
    r: float = 2.0
    C: float = math.inf

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise DomainError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0 - 2.0 * self.alpha:
            raise DomainError(f"gamma must lie in [0, 1 - 2 alpha) = [0, {1 - 2 * self.alpha}), got {self.gamma}")
        if self.M < 0:
            raise DomainError(f"M must be nonnegative, got {self.M}")
        if self.r <= 1.0:
            raise DomainError(f"r must exceed 1, got {self.r}")
        if not self.C > 0:
            raise DomainError(f"C must be positive, got {self.C}")
        if self.d < 0:
            raise DomainError("drive count must be nonnegative")

    @property
    def delta(self) -> float:
        return 1.0 - 2.0 * self.alpha - self.gamma

    def with_M(self, M: float) -> "BoundParams":
        return BoundParams(self.alpha, self.gamma, M, self.d, self.r, self.C)


@dataclass(frozen=True)
class PathNorms:
    """Lambda_alpha(t, y), C_alpha(t) and |y|_{alpha,t,inf} at one time"""
    lambda_alpha: float
    c_alpha: float
    sup_norm: float


@dataclass
class NormProfile:
    """The three path functionals at every grid time"""
    times: np.ndarray
    lambda_alpha: np.ndarray
    c_alpha: np.ndarray
    sup_norm: np.ndarray

    def at(self, index: int) -> PathNorms:
        return PathNorms(float(self.lambda_alpha[index]), float(self.c_alpha[index]), float(self.sup_norm[index]))


def path_norms(path: PathGrid, alpha: float, t: float) -> PathNorms:
    return path_norm_profile(path, alpha, stop=path.index_of(t)).at(-1)


def path_norm_profile(path: PathGrid, alpha: float, stop: Optional[int] = None) -> NormProfile:
    last = path.grid_size - 1 if stop is None else stop
    FracParams(alpha, max(path.times[last], 1e-300)).check_path(path)
    times = path.times[:last + 1]
    lam = lambda_alpha_profile(path, alpha, stop=last)
    c = np.array([c_alpha(t, alpha) if t > 0 else 0.0 for t in times])
    sup = holder_sup_norm_profile(path, alpha, stop=last)
    return NormProfile(times, lam, c, sup)


def domination_bound(length: int, alpha: float, norms: PathNorms) -> float:
    """Gamma(1-2a)/Gamma(n(1-2a)) C^{n-1} Lambda^{n-1} |y| for an iterated integral of length n"""
    if length < 1:
        raise DomainError("length must be positive")
    rho = 1.0 - 2.0 * alpha
    log_scale = gammaln(rho) - gammaln(length * rho)
    return float(math.exp(log_scale) * (norms.c_alpha * norms.lambda_alpha) ** (length - 1) * norms.sup_norm)


@dataclass(frozen=True)
class RemainderBound:
    """Direct tail sum and the closed-form majorant, with their logarithms"""
    value: float
    log_value: float
    closed_form: float
    log_closed_form: float
    terms: int


def _log_tail_terms(params: BoundParams, norms: PathNorms, k: np.ndarray) -> np.ndarray:
    rho = 1.0 - 2.0 * params.alpha
    log_gamma = np.zeros_like(k) if params.gamma == 0.0 else gammaln(params.gamma * k)
    with np.errstate(divide="ignore"):
        log_x = np.log(params.d + 1.0) + np.log(params.M) + np.log(norms.lambda_alpha * norms.c_alpha)
        log_a = np.log(params.d + 1.0) + np.log(params.M) + np.log(norms.sup_norm) + gammaln(rho)
    return log_a + (k - 1.0) * log_x + log_gamma - gammaln(k * rho)


def log_tail_sum(log_term, start: int, max_terms: int = TAIL_MAX_TERMS, label: str = "series"):
    """log of sum_{k>=start} exp(log_term(k)); stops once terms decay below the relative cutoff"""
    log_cutoff = math.log(TAIL_RELATIVE_CUTOFF)
    log_total = -math.inf
    k0 = start
    chunk = 64
    used = 0
    while used < max_terms:
        size = min(chunk, max_terms - used)
        k = np.arange(k0, k0 + size, dtype=float)
        logs = log_term(k)
        if np.all(np.isneginf(logs)):
            return log_total, used + size
        log_total = float(np.logaddexp(log_total, np.logaddexp.reduce(logs)))
        used += size
        k0 += size
        decaying = logs.size >= 2 and logs[-1] < logs[-2]
        if decaying and logs[-1] < log_total + log_cutoff:
            return log_total, used
        chunk *= 2
    raise DivergentTailError(
        f"{label} tail did not decay within {max_terms} terms; the criterion fails at these parameters"
    )


def remainder_bound(params: BoundParams, norms: PathNorms, N: int,
                    max_terms: int = TAIL_MAX_TERMS) -> RemainderBound:
    """
    Bound on |X_t - x0 - sum_{k<=N} g_k(t)|: the tail
    sum_{k>N} (d+1)^k M^k Gamma(k gamma) (Lambda C)^{k-1} |y| Gamma(1-2a) / Gamma(k(1-2a))
    evaluated directly, plus its closed-form majorant with the Beta-function constant.
    """
    if N < 1:
        raise DomainError("N must be at least 1")
    if params.M == 0.0 or norms.sup_norm == 0.0:
        return RemainderBound(0.0, -math.inf, 0.0, -math.inf, 0)
    if norms.lambda_alpha * norms.c_alpha == 0.0:
        # every term beyond the first carries Lambda^{k-1}
        return RemainderBound(0.0, -math.inf, 0.0, -math.inf, 0)

    log_value, used = log_tail_sum(lambda k: _log_tail_terms(params, norms, k), N + 1, max_terms, "remainder")
    log_closed = _log_closed_form(params, norms, N)
    return RemainderBound(safe_exp(log_value), log_value, safe_exp(log_closed), log_closed, used)


def _log_closed_form(params: BoundParams, norms: PathNorms, N: int) -> float:
    delta = params.delta
    rho = 1.0 - 2.0 * params.alpha
    x = (params.d + 1.0) * params.M * norms.lambda_alpha * norms.c_alpha
    log_k = betaln(delta, delta) + math.log(4.0) + 2.0 - math.log(delta)
    if params.gamma > 0.0:
        log_k += betaln(params.gamma, delta)
    return (
        math.log(norms.sup_norm) + gammaln(rho) + math.log((params.d + 1.0) * params.M) + log_k
        + N * math.log(x) + 2.0 * x ** (1.0 / delta) - gammaln(N * delta)
    )


def safe_exp(value: float) -> float:
    return math.exp(value) if value < 709.0 else math.inf


def bound_trace(params: BoundParams, norms: PathNorms, orders: Iterable[int]) -> List[List[float]]:
    """Rows (N, bound, closed_form) for the CSV trace; a direct tail that never decays is written as inf"""
    rows = []
    for N in orders:
        try:
            bound = remainder_bound(params, norms, N)
        except DivergentTailError as exc:
            logger.warning("No finite bound at N=%d: %s", N, exc)
            rows.append([N, math.inf, safe_exp(_log_closed_form(params, norms, N))])
            continue
        rows.append([N, bound.value, bound.closed_form])
    return rows


@dataclass(frozen=True)
class ConvergenceWindow:
    """First grid time where the r-weighted level norms reach C; crossed=False means never on the grid"""
    time: float
    index: int
    crossed: bool


def detect_tc(levels: Sequence[ExpansionLevel], params: BoundParams,
              norms: Optional[NormProfile] = None) -> ConvergenceWindow:
    """
    T_C(r) = inf{t : sum_k r^k |g_k(t)| >= C}. The tabulated levels are summed directly; when a
    norm profile is given, the tail beyond the last level adds the remainder bound with M -> rM.
    """
    times = levels[0].times
    last = times.size - 1
    if math.isinf(params.C):
        return ConvergenceWindow(float(times[-1]), last, False)
    weighted = np.zeros(times.size)
    for level in levels:
        weighted += params.r**level.order * level.norms()

    k_max = len(levels)
    folded = params.with_M(params.r * params.M)
    for idx in range(times.size):
        total = weighted[idx]
        if total < params.C and norms is not None and idx < norms.times.size:
            try:
                total += remainder_bound(folded, norms.at(idx), k_max).value
            except DivergentTailError:
                total = math.inf
        if total >= params.C:
            logger.info("Convergence window closes at t=%.6g", times[idx])
            return ConvergenceWindow(float(times[idx]), idx, True)
    return ConvergenceWindow(float(times[-1]), last, False)
