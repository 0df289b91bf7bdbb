"""
Jet Arithmetic Module
Truncated multivariate Taylor jets, vector-field systems, Taylor coefficient tables and growth fits
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from config import GAMMA_GRID, GROWTH_TOLERANCE, MAX_JET_DEPTH, MAX_TABLE_WORDS
from errors import BudgetExceededError, DomainError, JetOrderError

logger = logging.getLogger(__name__)

Word = Tuple[int, ...]


def validate_word(word: Sequence[int], drive_count: int) -> Word:
    word = tuple(int(letter) for letter in word)
    if not word:
        raise DomainError("words must have at least one letter")
    for letter in word:
        if not 0 <= letter <= drive_count:
            raise DomainError(f"letter {letter} outside the alphabet {{0..{drive_count}}}")
    return word


def word_label(word: Word) -> str:
    return "-".join(str(letter) for letter in word)


def parse_word(label: str) -> Word:
    return tuple(int(part) for part in str(label).split("-") if part != "")


def count_words(alphabet: int, max_length: int) -> int:
    return sum(alphabet**k for k in range(1, max_length + 1))


def words_of_length(letters: Sequence[int], length: int) -> Iterator[Word]:
    return itertools.product(letters, repeat=length)


# ---- truncated multivariate Taylor arithmetic ----

class JetAlgebra:
    """Monomials of total degree <= degree in nvars variables, graded, with product and derivative tables"""

    def __init__(self, nvars: int, degree: int):
        self.nvars = nvars
        self.degree = degree
        self.exponents: List[Tuple[int, ...]] = []
        for total in range(degree + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), total):
                exponent = [0] * nvars
                for var in combo:
                    exponent[var] += 1
                self.exponents.append(tuple(exponent))
        self.index = {exp: i for i, exp in enumerate(self.exponents)}
        self.size = len(self.exponents)
        self.total_degree = np.array([sum(e) for e in self.exponents])

        left, right, target = [], [], []
        for a, ea in enumerate(self.exponents):
            da = self.total_degree[a]
            for b, eb in enumerate(self.exponents):
                if da + self.total_degree[b] > degree:
                    continue
                left.append(a)
                right.append(b)
                target.append(self.index[tuple(x + y for x, y in zip(ea, eb))])
        self.left = np.array(left, dtype=np.intp)
        self.right = np.array(right, dtype=np.intp)
        self.target = np.array(target, dtype=np.intp)

        self.derivatives = []
        for var in range(nvars):
            src, dst, factor = [], [], []
            for a, ea in enumerate(self.exponents):
                if ea[var] == 0:
                    continue
                lowered = list(ea)
                lowered[var] -= 1
                src.append(a)
                dst.append(self.index[tuple(lowered)])
                factor.append(float(ea[var]))
            self.derivatives.append((np.array(src, dtype=np.intp), np.array(dst, dtype=np.intp),
                                     np.array(factor)))

    def variable(self, var: int, value=0.0) -> "Jet":
        """The jet of x_var expanded around value"""
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros((self.size,) + value.shape)
        coeffs[0] = value
        if self.degree >= 1:
            unit = [0] * self.nvars
            unit[var] = 1
            coeffs[self.index[tuple(unit)]] = 1.0
        return Jet(self, coeffs)

    def constant(self, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros((self.size,) + value.shape)
        coeffs[0] = value
        return Jet(self, coeffs)


@lru_cache(maxsize=32)
def jet_algebra(nvars: int, degree: int) -> JetAlgebra:
    return JetAlgebra(nvars, degree)


def _pad_batch(coeffs: np.ndarray, batch_ndim: int) -> np.ndarray:
    missing = batch_ndim - (coeffs.ndim - 1)
    if missing <= 0:
        return coeffs
    return coeffs.reshape((coeffs.shape[0],) + (1,) * missing + coeffs.shape[1:])


class Jet:
    """
    Truncated Taylor polynomial with coefficients of shape (algebra.size, *batch).

    Batch axes broadcast like numpy arrays. Arithmetic with floats or arrays of the
    batch shape acts on the constant term (addition) or scales every coefficient.
    """

    __array_ufunc__ = None

    def __init__(self, algebra: JetAlgebra, coeffs: np.ndarray):
        self.algebra = algebra
        self.coeffs = coeffs

    @property
    def batch_shape(self) -> Tuple[int, ...]:
        return self.coeffs.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.algebra is not self.algebra:
                raise DomainError("cannot combine jets from different algebras")
            return other
        return self.algebra.constant(other)

    def _combine(self, other: "Jet", op) -> "Jet":
        ndim = max(self.coeffs.ndim, other.coeffs.ndim) - 1
        return Jet(self.algebra, op(_pad_batch(self.coeffs, ndim), _pad_batch(other.coeffs, ndim)))

    def __add__(self, other):
        return self._combine(self._lift(other), np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(self._lift(other), np.subtract)

    def __rsub__(self, other):
        return self._lift(other)._combine(self, np.subtract)

    def __neg__(self):
        return Jet(self.algebra, -self.coeffs)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            scale = np.asarray(other, dtype=float)
            ndim = max(self.coeffs.ndim - 1, scale.ndim)
            return Jet(self.algebra, _pad_batch(self.coeffs, ndim) * scale[None])
        other = self._lift(other)
        ndim = max(self.coeffs.ndim, other.coeffs.ndim) - 1
        a = _pad_batch(self.coeffs, ndim)
        b = _pad_batch(other.coeffs, ndim)
        alg = self.algebra
        products = a[alg.left] * b[alg.right]
        out = np.zeros((alg.size,) + products.shape[1:])
        np.add.at(out, alg.target, products)
        return Jet(alg, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            raise DomainError("division by a jet is not supported")
        return self * (1.0 / np.asarray(other, dtype=float))

    def __pow__(self, exponent):
        if int(exponent) != exponent or exponent < 0:
            raise DomainError(f"jets support nonnegative integer powers only, got {exponent}")
        result = self.algebra.constant(np.ones(self.batch_shape))
        base = self
        k = int(exponent)
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def deriv(self, var: int) -> "Jet":
        src, dst, factor = self.algebra.derivatives[var]
        out = np.zeros_like(self.coeffs)
        out[dst] = self.coeffs[src] * factor.reshape((-1,) + (1,) * (self.coeffs.ndim - 1))
        return Jet(self.algebra, out)

    def _series(self, coefficients: Sequence) -> "Jet":
        """sum_k coefficients[k] * (self - self.value)^k, coefficients may carry batch shape"""
        nilpotent = self - self.value
        result = self.algebra.constant(np.zeros(self.batch_shape)) + coefficients[0]
        power = None
        for k in range(1, self.algebra.degree + 1):
            power = nilpotent if power is None else power * nilpotent
            result = result + power * coefficients[k]
        return result

    def exp(self) -> "Jet":
        base = np.exp(self.value)
        return self._series([base / math.factorial(k) for k in range(self.algebra.degree + 1)])

    def sin(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [s, c, -s, -c]
        return self._series([cycle[k % 4] / math.factorial(k) for k in range(self.algebra.degree + 1)])

    def cos(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [c, -s, -c, s]
        return self._series([cycle[k % 4] / math.factorial(k) for k in range(self.algebra.degree + 1)])


def jexp(x):
    return x.exp() if isinstance(x, Jet) else np.exp(x)


def jsin(x):
    return x.sin() if isinstance(x, Jet) else np.sin(x)


def jcos(x):
    return x.cos() if isinstance(x, Jet) else np.cos(x)


def stack_components(components: Sequence[Jet]) -> Jet:
    """Combine n scalar jets into one jet whose last batch axis indexes the components"""
    algebra = components[0].algebra
    batch = np.broadcast_shapes(*(c.batch_shape for c in components))
    coeffs = np.stack([np.broadcast_to(c.coeffs, (algebra.size,) + batch) for c in components], axis=-1)
    return Jet(algebra, coeffs)


# ---- vector-field systems ----

@dataclass
class JetSystem:
    """Vector fields V_0..V_d on R^n with base point x0 and declared analyticity radius C"""
    dimension: int
    fields: List
    base_point: np.ndarray
    analyticity_radius: float = math.inf
    max_depth: int = MAX_JET_DEPTH
    _jets: Dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.base_point = np.asarray(self.base_point, dtype=float)
        if self.dimension < 1:
            raise DomainError("system dimension must be positive")
        if self.base_point.shape != (self.dimension,):
            raise DomainError(f"base point must have shape ({self.dimension},)")
        if not self.fields:
            raise DomainError("a system needs at least the drift field V_0")
        if not self.analyticity_radius > 0:
            raise DomainError("analyticity radius must be positive")
        for f in self.fields:
            if f.dimension != self.dimension:
                raise DomainError(f"field of dimension {f.dimension} in a system of dimension {self.dimension}")

    @property
    def drive_count(self) -> int:
        return len(self.fields) - 1

    def is_zero(self, i: int) -> bool:
        return getattr(self.fields[i], "is_zero", False)

    def evaluate(self, i: int, points: np.ndarray) -> np.ndarray:
        """V_i at an array of points with the coordinate on the last axis"""
        points = np.asarray(points, dtype=float)
        coords = [points[..., m] for m in range(self.dimension)]
        out = self.fields[i].evaluate(coords)
        return np.stack([np.broadcast_to(v, points.shape[:-1]) for v in out], axis=-1)

    def evaluate_jets(self, i: int, xs: Sequence[Jet]) -> List[Jet]:
        out = self.fields[i].evaluate(list(xs))
        algebra = xs[0].algebra
        return [v if isinstance(v, Jet) else algebra.constant(v) for v in out]

    def field_jet(self, i: int, degree: int) -> List[Jet]:
        """Taylor jet of each component of V_i at the base point, to the given degree"""
        key = (i, degree)
        if key not in self._jets:
            algebra = jet_algebra(self.dimension, degree)
            xs = [algebra.variable(m, self.base_point[m]) for m in range(self.dimension)]
            self._jets[key] = self.evaluate_jets(i, xs)
        return self._jets[key]

    def jacobian(self, i: int) -> np.ndarray:
        """dV_i/dx at the base point from the degree-1 jet"""
        algebra = jet_algebra(self.dimension, 1)
        jets = self.field_jet(i, 1)
        out = np.zeros((self.dimension, self.dimension))
        for j, jet in enumerate(jets):
            for m in range(self.dimension):
                unit = [0] * self.dimension
                unit[m] = 1
                out[j, m] = jet.coeffs[algebra.index[tuple(unit)]]
        return out

    def apply(self, i: int, jet: Jet, degree: int) -> Jet:
        """The first-order operator V_i f = sum_m V_i^m d_m f in jet arithmetic"""
        components = self.field_jet(i, degree)
        result = None
        for m, component in enumerate(components):
            if not np.any(component.coeffs):
                continue
            term = component * jet.deriv(m)
            result = term if result is None else result + term
        if result is None:
            return Jet(jet.algebra, np.zeros_like(jet.coeffs))
        return result

    def _check_depth(self, depth: int) -> None:
        if depth > self.max_depth:
            raise JetOrderError(
                f"depth {depth} exceeds the configured differentiation depth {self.max_depth}"
            )

    def coordinate_jets(self, degree: int) -> Jet:
        """The coordinate projections pi^1..pi^n as one jet with batch shape (n,)"""
        algebra = jet_algebra(self.dimension, degree)
        return stack_components([algebra.variable(m, self.base_point[m]) for m in range(self.dimension)])


def finite_difference_gradient(system: JetSystem, i: int, step: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of V_i at the base point"""
    x0 = system.base_point
    out = np.zeros((system.dimension, system.dimension))
    for m in range(system.dimension):
        shift = np.zeros_like(x0)
        shift[m] = step
        forward = system.evaluate(i, x0 + shift)
        backward = system.evaluate(i, x0 - shift)
        out[:, m] = (forward - backward) / (2.0 * step)
    return out


# ---- Taylor coefficients ----

def coefficient(system: JetSystem, word: Sequence[int]) -> np.ndarray:
    """P_I = V_{i1}(V_{i2}(...V_{ik} pi))(x0), composed from the innermost letter outward"""
    word = validate_word(word, system.drive_count)
    system._check_depth(len(word))
    degree = len(word)
    jet = system.coordinate_jets(degree)
    for letter in reversed(word):
        jet = system.apply(letter, jet, degree)
    return jet.value.copy()


@dataclass
class CoefficientTable:
    """P_I for every word of length 1..max_order over {0..drive_count}"""
    entries: Dict[Word, np.ndarray]
    max_order: int
    drive_count: int
    dimension: int

    def __getitem__(self, word: Sequence[int]) -> np.ndarray:
        return self.entries[tuple(word)]

    def __len__(self) -> int:
        return len(self.entries)

    def words(self, order: int) -> List[Word]:
        return [w for w in self.entries if len(w) == order]

    def norms(self, order: int) -> np.ndarray:
        return np.array([np.linalg.norm(self.entries[w]) for w in self.words(order)])

    def rows(self):
        for word in sorted(self.entries, key=lambda w: (len(w), w)):
            for j, value in enumerate(self.entries[word]):
                yield [word_label(word), j + 1, value]

    @classmethod
    def from_norms(cls, norms_by_order: Dict[int, Sequence[float]], drive_count: int = 0) -> "CoefficientTable":
        """Scalar table with prescribed coefficient norms, words filled in alphabet order"""
        entries = {}
        max_order = max(norms_by_order)
        for k in range(1, max_order + 1):
            values = list(norms_by_order.get(k, []))
            for idx, word in enumerate(words_of_length(range(drive_count + 1), k)):
                entries[word] = np.array([values[idx] if idx < len(values) else 0.0])
        return cls(entries, max_order, drive_count, 1)


def build_table(system: JetSystem, k_max: int) -> CoefficientTable:
    """
    All P_I with |I| <= k_max. Words sharing a suffix share the operator composition:
    the jet of i.w is V_i applied to the jet of w.
    """
    if k_max < 1:
        raise DomainError("k_max must be at least 1")
    system._check_depth(k_max)
    alphabet = system.drive_count + 1
    total = count_words(alphabet, k_max)
    if total > MAX_TABLE_WORDS:
        raise BudgetExceededError(
            f"{total} words of length <= {k_max} exceed the budget of {MAX_TABLE_WORDS}; lower k_max"
        )

    degree = k_max
    base = system.coordinate_jets(degree)
    entries: Dict[Word, np.ndarray] = {}
    level_words: List[Word] = [()]
    level_jet = Jet(base.algebra, base.coeffs[:, :, None])
    for order in range(1, k_max + 1):
        new_words, new_jets = [], []
        for letter in range(alphabet):
            if system.is_zero(letter):
                applied = Jet(level_jet.algebra, np.zeros_like(level_jet.coeffs))
            else:
                applied = system.apply(letter, level_jet, degree)
            new_jets.append(applied.coeffs)
            new_words.extend((letter,) + w for w in level_words)
        level_words = new_words
        level_jet = Jet(base.algebra, np.concatenate(new_jets, axis=2))
        values = level_jet.value
        for idx, word in enumerate(level_words):
            entries[word] = values[:, idx].copy()
        logger.debug("Coefficient table order %d: %d words", order, len(level_words))
    logger.info("Built coefficient table with %d words up to order %d", len(entries), k_max)
    return CoefficientTable(entries, k_max, system.drive_count, system.dimension)


# ---- growth fit ----

CONVENTIONS = ("gamma", "factorial")


@dataclass
class GrowthFit:
    """
    Certificate |P_I| <= F_gamma(|I|) M^|I| over the tabulated orders, where F_gamma(k) is
    Gamma(gamma k) under the "gamma" convention and (k!)^gamma under "factorial"
    """
    M: float
    gamma: float
    admissible: bool
    residuals: np.ndarray
    order_constants: np.ndarray
    convention: str = "gamma"
    score: float = math.nan
    candidates: Dict[float, Tuple[float, bool]] = field(default_factory=dict)


def log_growth_factor(gamma: float, k, convention: str = "gamma") -> np.ndarray:
    """log F_gamma(k); the factor is 1 at gamma = 0 in both conventions"""
    k = np.asarray(k, dtype=float)
    if gamma == 0.0:
        return np.zeros_like(k)
    if convention == "factorial":
        return gamma * gammaln(k + 1.0)
    return gammaln(gamma * k)


def _fit_one(log_max: np.ndarray, orders: np.ndarray, gamma: float, tolerance: float, convention: str):
    factor = log_growth_factor(gamma, orders, convention)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_m = (log_max - factor) / orders
    order_constants = np.exp(log_m)
    M = float(order_constants.max()) if order_constants.size else 0.0
    if M > 0:
        slack = orders * np.log(M) + factor - log_max
    else:
        slack = np.full(orders.shape, np.inf)
    # the last order either stopped growing or sits clearly below the binding order
    admissible = bool(
        orders.size >= 3
        and (order_constants[-1] <= order_constants[-2] * (1.0 + tolerance)
             or order_constants[-1] * (1.0 + tolerance) <= M)
    )
    return M, admissible, slack, order_constants


def fit_growth(table: CoefficientTable, gamma_grid: Optional[Sequence[float]] = None,
               tolerance: float = GROWTH_TOLERANCE, convention: str = "gamma",
               score: Optional[Callable[[float, float], float]] = None) -> GrowthFit:
    """
    Smallest M per candidate gamma such that |P_I| <= F_gamma(|I|) M^|I| on every tabulated word.

    A candidate is admissible when the per-order constants M_k = max_{|I|=k} (|P_I| / F_gamma(k))^(1/k)
    have stopped growing at the last tabulated order, or stay clearly below M there; this needs
    at least three orders. Among admissible candidates (all candidates when none is) the one with
    the smallest score(gamma, M) is returned. score is the log of the remainder prefactor it feeds;
    by default the leading tail term k log M + log F_gamma(k) at k = k_max + 1.
    """
    if not len(table):
        raise DomainError("cannot fit an empty coefficient table")
    if convention not in CONVENTIONS:
        raise DomainError(f"unknown growth convention '{convention}'")
    grid = sorted(GAMMA_GRID if gamma_grid is None else gamma_grid)
    if not grid:
        raise DomainError("no gamma candidates to fit")
    for gamma in grid:
        if not 0.0 <= gamma < 1.0:
            raise DomainError(f"gamma candidates must lie in [0, 1), got {gamma}")

    orders = np.arange(1, table.max_order + 1, dtype=float)
    with np.errstate(divide="ignore"):
        log_max = np.array([np.log(table.norms(int(k)).max()) for k in orders])

    fits = {gamma: _fit_one(log_max, orders, gamma, tolerance, convention) for gamma in grid}
    pool = [g for g in grid if fits[g][1]] or grid

    k_ref = table.max_order + 1.0

    def leading_term(gamma: float, M: float) -> float:
        if M <= 0.0:
            return -math.inf
        return k_ref * math.log(M) + float(log_growth_factor(gamma, k_ref, convention))

    scores = {g: leading_term(g, fits[g][0]) for g in pool}
    if score is not None:
        custom = {g: score(g, fits[g][0]) for g in pool}
        if any(math.isfinite(v) or v == -math.inf for v in custom.values()):
            scores = custom
        else:
            logger.warning("Remainder prefactor is infinite for every gamma candidate; scoring by the leading term")
    # ties keep the smaller gamma
    chosen = min(pool, key=lambda g: (scores[g], g))
    M, admissible, slack, order_constants = fits[chosen]
    logger.info("Growth fit (%s): gamma=%s M=%.6g admissible=%s", convention, chosen, M, admissible)
    return GrowthFit(
        M=M,
        gamma=chosen,
        admissible=admissible,
        residuals=slack,
        order_constants=order_constants,
        convention=convention,
        score=scores[chosen],
        candidates={g: (fits[g][0], fits[g][1]) for g in grid},
    )
