"""
Lie Series Module
Permutation-weighted iterated integrals, right-nested brackets and exponentials for matrix groups
"""
import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from config import LIE_TRUST_RADIUS, PERMUTATION_CAP
from errors import BudgetExceededError, DomainError, SeriesMagnitudeWarning
from fields import MatrixField
from jets import JetSystem, Word, validate_word, words_of_length
from paths import PathGrid
from taylor import iterated_integrals

logger = logging.getLogger(__name__)


@dataclass
class MatrixLieSetup:
    """Generators A_1..A_d of left-invariant fields V_i(X) = X A_i, started at the identity"""
    generators: List[np.ndarray]
    drift: Optional[np.ndarray] = None
    _brackets: Dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.generators = [np.asarray(a, dtype=float) for a in self.generators]
        if not self.generators:
            raise DomainError("at least one generator is needed")
        n = self.generators[0].shape[0]
        for a in self.generators:
            if a.shape != (n, n):
                raise DomainError("generators must be square matrices of one size")
            if not np.all(np.isfinite(a)):
                raise DomainError("generators must be finite")
        self.drift = np.zeros((n, n)) if self.drift is None else np.asarray(self.drift, dtype=float)

    @property
    def size(self) -> int:
        return self.generators[0].shape[0]

    @property
    def drive_count(self) -> int:
        return len(self.generators)

    def matrix(self, letter: int) -> np.ndarray:
        """Letter 0 is the drift, letters 1..d the generators"""
        return self.drift if letter == 0 else self.generators[letter - 1]

    def letters(self) -> List[int]:
        first = 0 if np.any(self.drift) else 1
        return list(range(first, self.drive_count + 1))

    def as_system(self) -> JetSystem:
        """The same equation in matrix coordinates (row-major), for the Picard solver"""
        n = self.size
        fields = [MatrixField(self.matrix(i)) for i in range(self.drive_count + 1)]
        return JetSystem(n * n, fields, np.eye(n).ravel(), max_depth=PERMUTATION_CAP)


def descent_count(sigma: Sequence[int]) -> int:
    """Number of positions j with sigma(j) > sigma(j+1), for a permutation of 1..k"""
    sigma = list(sigma)
    if sorted(sigma) != list(range(1, len(sigma) + 1)):
        raise DomainError(f"{sigma} is not a permutation of 1..{len(sigma)}")
    return sum(1 for a, b in zip(sigma, sigma[1:]) if a > b)


@lru_cache(maxsize=None)
def _permutation_weights(k: int) -> Tuple[Tuple[Tuple[int, ...], float], ...]:
    """(sigma^{-1} as 0-based slot sources, weight) for every sigma in S_k"""
    out = []
    for sigma in itertools.permutations(range(1, k + 1)):
        e = descent_count(sigma)
        weight = (-1) ** e / (k * k * math.comb(k - 1, e))
        inverse = [0] * k
        for position, value in enumerate(sigma):
            inverse[value - 1] = position
        out.append((tuple(inverse), weight))
    return tuple(out)


def _check_length(k: int) -> None:
    if k > PERMUTATION_CAP:
        raise BudgetExceededError(
            f"word length {k} needs {math.factorial(k)} permutations; the cap is length {PERMUTATION_CAP}"
        )


def magnus_coefficient(path: PathGrid, word: Sequence[int],
                       integrals: Optional[Dict[Word, np.ndarray]] = None) -> np.ndarray:
    """
    Lambda_I(y)_t = sum_sigma (-1)^e(sigma) / (k^2 C(k-1, e(sigma))) int dy^{i_sigma^-1(1)}...dy^{i_sigma^-1(k)}.
    Pass integrals from taylor.iterated_integrals to reuse them across words.
    """
    word = validate_word(word, path.drive_count)
    k = len(word)
    _check_length(k)
    if integrals is None:
        integrals = iterated_integrals(path, k, letters=sorted(set(word)))
    total = np.zeros(path.grid_size)
    for sources, weight in _permutation_weights(k):
        total += weight * integrals[tuple(word[s] for s in sources)]
    return total


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def lie_bracket_word(setup: MatrixLieSetup, word: Sequence[int]) -> np.ndarray:
    """[A_{i1}, [A_{i2}, ..., [A_{i(k-1)}, A_{ik}]...]]"""
    word = validate_word(word, setup.drive_count)
    if word in setup._brackets:
        return setup._brackets[word]
    if len(word) == 1:
        result = setup.matrix(word[0]).copy()
    else:
        result = commutator(setup.matrix(word[0]), lie_bracket_word(setup, word[1:]))
    setup._brackets[word] = result
    return result


@dataclass
class LieSeriesTerm:
    word: Word
    coefficient: np.ndarray
    bracket: np.ndarray


def lie_series_terms(setup: MatrixLieSetup, path: PathGrid, k_max: int) -> List[LieSeriesTerm]:
    """Nonzero terms Lambda_I V_I of the truncated series"""
    if path.drive_count != setup.drive_count:
        raise DomainError("path and setup use different alphabets")
    _check_length(k_max)
    letters = setup.letters()
    integrals = iterated_integrals(path, k_max, letters=letters)
    terms = []
    for k in range(1, k_max + 1):
        for word in words_of_length(letters, k):
            bracket = lie_bracket_word(setup, word)
            if not np.any(bracket):
                continue
            terms.append(LieSeriesTerm(word, magnus_coefficient(path, word, integrals), bracket))
    logger.debug("Lie series up to order %d has %d nonzero terms", k_max, len(terms))
    return terms


def lie_series(setup: MatrixLieSetup, path: PathGrid, k_max: int) -> np.ndarray:
    """Truncated Lie series as a (grid, n, n) array"""
    n = setup.size
    series = np.zeros((path.grid_size, n, n))
    for term in lie_series_terms(setup, path, k_max):
        series += term.coefficient[:, None, None] * term.bracket[None]
    return series


def _exponentiate(series: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(series, 2)
    if norm > LIE_TRUST_RADIUS:
        warnings.warn(
            f"Lie series norm {norm:.3g} exceeds the trust radius {LIE_TRUST_RADIUS}; "
            "the exponential is advisory",
            SeriesMagnitudeWarning,
            stacklevel=3,
        )
    return expm(series)


def group_solution(setup: MatrixLieSetup, path: PathGrid, k_max: int, t: float) -> np.ndarray:
    """exp of the truncated Lie series at time t"""
    idx = path.index_of(t)
    return _exponentiate(lie_series(setup, path, k_max)[idx])


def group_trajectory(setup: MatrixLieSetup, path: PathGrid, k_max: int) -> np.ndarray:
    """exp of the truncated Lie series at every grid time"""
    series = lie_series(setup, path, k_max)
    return np.stack([_exponentiate(s) for s in series])


def chen_series(setup: MatrixLieSetup, path: PathGrid, k_max: int, t: float) -> np.ndarray:
    """I + sum_{|I|<=k_max} (int dy^I) A_{i1}...A_{ik} at time t"""
    idx = path.index_of(t)
    letters = setup.letters()
    integrals = iterated_integrals(path, k_max, letters=letters)
    out = np.eye(setup.size)
    for word, integral in integrals.items():
        product = np.eye(setup.size)
        for letter in word:
            product = product @ setup.matrix(letter)
        out += integral[idx] * product
    return out


def eulerian_numbers(k: int) -> List[int]:
    """Number of permutations of 1..k with e descents, e = 0..k-1"""
    if k < 1:
        raise DomainError("k must be positive")
    row = [1]
    for n in range(2, k + 1):
        row = [
            (n - e) * (row[e - 1] if e >= 1 else 0) + (e + 1) * (row[e] if e < len(row) else 0)
            for e in range(n)
        ]
    return row


def coefficient_magnitude_bound(k: int) -> float:
    """sum_{sigma in S_k} 1 / (k^2 C(k-1, e(sigma))), exact through Eulerian numbers"""
    if k < 1:
        raise DomainError("k must be positive")
    if k > 20:
        raise DomainError("exact Eulerian numbers are limited to k <= 20")
    total = sum(Fraction(count, k * k * math.comb(k - 1, e)) for e, count in enumerate(eulerian_numbers(k)))
    return float(total)


def coefficient_envelope(k: int) -> float:
    """k! sqrt(k) / 2^k"""
    return math.factorial(k) * math.sqrt(k) / 2.0**k
