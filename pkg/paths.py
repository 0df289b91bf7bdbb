"""
Sampled Hölder Paths Module
Grid-sampled driving paths, their Hölder-type norms and fractional Brownian motion sampling
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from errors import DomainError, FactorizationError, GridMismatchError
from exporters import format_float, write_csv

logger = logging.getLogger(__name__)

_GRID_TOL = 1e-9


@dataclass(frozen=True)
class PathGrid:
    """A (d+1)-dimensional path on a uniform grid; component 0 is the clock y0_t = t"""
    times: np.ndarray
    values: np.ndarray
    beta_hint: float = 1.0

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or times.size < 2:
            raise DomainError("PathGrid needs at least 2 grid points")
        if values.shape[0] != times.size:
            raise GridMismatchError(
                f"values have {values.shape[0]} rows but the grid has {times.size} points"
            )
        if times[0] != 0.0:
            raise DomainError(f"grid must start at t=0, got {times[0]}")
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise DomainError("grid times must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > _GRID_TOL * max(1.0, times[-1]):
            raise DomainError("grid must be uniform")
        if not np.array_equal(values[:, 0], times):
            raise DomainError("component 0 must equal the grid times")
        if not 0.5 < self.beta_hint <= 1.0:
            raise DomainError(f"beta_hint must lie in (1/2, 1], got {self.beta_hint}")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_drive(cls, times, drive, beta_hint: float = 1.0) -> "PathGrid":
        """Build a path from the driving components 1..d, prepending the clock"""
        times = np.asarray(times, dtype=float)
        drive = np.asarray(drive, dtype=float)
        if drive.ndim == 1:
            drive = drive[:, None]
        if drive.shape[0] != times.size:
            raise GridMismatchError("drive and times have different lengths")
        return cls(times, np.column_stack([times, drive]), beta_hint)

    @property
    def grid_size(self) -> int:
        return self.times.size

    @property
    def drive_count(self) -> int:
        """Number d of driving components besides the clock"""
        return self.values.shape[1] - 1

    @property
    def mesh(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def index_of(self, t: float) -> int:
        """Index of the last grid node not after t"""
        tol = _GRID_TOL * max(1.0, self.horizon)
        if t < -tol or t > self.horizon + tol:
            raise DomainError(f"time {t} outside the grid span [0, {self.horizon}]")
        return int(np.searchsorted(self.times, t + tol, side="right") - 1)

    def component_values(self, components: Optional[Sequence[int]] = None) -> np.ndarray:
        if components is None:
            return self.values
        return self.values[:, list(components)]

    def scaled(self, factor: float) -> "PathGrid":
        """Scale the driving components; the clock is left untouched"""
        values = self.values.copy()
        values[:, 1:] *= factor
        return PathGrid(self.times, values, self.beta_hint)

    def window(self, start: int, stop: int) -> "PathGrid":
        """Sub-path on grid indices [start, stop], shifted to start at t=0"""
        if not 0 <= start < stop < self.grid_size:
            raise DomainError(f"invalid window [{start}, {stop}]")
        times = self.times[start:stop + 1] - self.times[start]
        values = self.values[start:stop + 1].copy()
        values[:, 0] = times
        return PathGrid(times, values, self.beta_hint)

    def to_csv(self, filename) -> None:
        header = ["t"] + [f"y{i}" for i in range(self.drive_count + 1)]
        rows = (
            [format_float(t)] + [format_float(v) for v in row]
            for t, row in zip(self.times, self.values)
        )
        write_csv(filename, header, rows)

    @classmethod
    def from_csv(cls, filename, beta_hint: float = 1.0) -> "PathGrid":
        data = np.loadtxt(filename, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1:], beta_hint)


@dataclass(frozen=True)
class FbmSpec:
    """Law and grid of a d-dimensional fractional Brownian motion sample"""
    hurst: float
    dimension: int
    horizon: float
    grid_size: int
    seed: int = 0
    beta_hint: Optional[float] = None
    method: str = "cholesky"
    jitter: float = 0.0

    def __post_init__(self):
        if not 0.5 < self.hurst < 1.0:
            raise DomainError(f"Hurst parameter must lie in (1/2, 1), got {self.hurst}")
        if self.horizon <= 0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if self.dimension < 1:
            raise DomainError(f"dimension must be positive, got {self.dimension}")
        if self.grid_size < 2:
            raise DomainError(f"grid_size must be >= 2, got {self.grid_size}")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.method not in ("cholesky", "circulant"):
            raise DomainError(f"unknown sampling method '{self.method}'")

    @property
    def effective_beta(self) -> float:
        if self.beta_hint is not None:
            return self.beta_hint
        return 0.5 * (0.5 + self.hurst)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.grid_size)

    def with_seed(self, seed: int) -> "FbmSpec":
        return FbmSpec(self.hurst, self.dimension, self.horizon, self.grid_size,
                       seed, self.beta_hint, self.method, self.jitter)


def fbm_covariance(t, s, hurst: float):
    """Covariance R(t, s) = (s^2H + t^2H - |t-s|^2H) / 2 of fractional Brownian motion"""
    if not 0.0 < hurst < 1.0:
        raise DomainError(f"Hurst parameter must lie in (0, 1), got {hurst}")
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise DomainError("fBm covariance needs nonnegative times")
    two_h = 2.0 * hurst
    value = 0.5 * (s**two_h + t**two_h - np.abs(t - s) ** two_h)
    return float(value) if value.ndim == 0 else value


def covariance_matrix(times: np.ndarray, hurst: float) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    return fbm_covariance(times[:, None], times[None, :], hurst)


@lru_cache(maxsize=16)
def _cholesky_factor(hurst: float, horizon: float, grid_size: int, jitter: float) -> np.ndarray:
    times = np.linspace(0.0, horizon, grid_size)[1:]
    cov = covariance_matrix(times, hurst)
    if jitter:
        cov = cov + jitter * np.eye(times.size)
    try:
        factor = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError(
            f"fBm covariance not positive definite at H={hurst}, n={grid_size}; "
            "reduce grid_size or add jitter"
        ) from exc
    factor.setflags(write=False)
    logger.debug("Cholesky factor cached for H=%s n=%d", hurst, grid_size)
    return factor


@lru_cache(maxsize=16)
def _circulant_eigenvalues(hurst: float, n_increments: int) -> np.ndarray:
    k = np.arange(n_increments + 1, dtype=float)
    two_h = 2.0 * hurst
    autocov = 0.5 * (np.abs(k + 1) ** two_h - 2 * k**two_h + np.abs(k - 1) ** two_h)
    row = np.concatenate([autocov, autocov[-2:0:-1]])
    eigenvalues = np.fft.fft(row).real
    if np.min(eigenvalues) < -1e-10 * np.max(eigenvalues):
        raise FactorizationError(f"circulant embedding is not nonnegative at H={hurst}")
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    eigenvalues.setflags(write=False)
    return eigenvalues


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _drive_cholesky(spec: FbmSpec, normals: np.ndarray) -> np.ndarray:
    factor = _cholesky_factor(spec.hurst, spec.horizon, spec.grid_size, spec.jitter)
    return factor @ normals


def _drive_circulant(spec: FbmSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.grid_size - 1
    eigenvalues = _circulant_eigenvalues(spec.hurst, n)
    size = eigenvalues.size
    scale = np.sqrt(eigenvalues / size)
    columns = []
    for _ in range(spec.dimension):
        noise = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        increments = np.fft.fft(scale * noise).real[:n]
        columns.append(np.cumsum(increments))
    mesh = spec.horizon / n
    return np.column_stack(columns) * mesh**spec.hurst


def sample_fbm(spec: FbmSpec) -> PathGrid:
    """Sample one fBm path; deterministic given spec.seed"""
    rng = _generator(spec.seed)
    times = spec.times()
    if spec.method == "circulant":
        drive = _drive_circulant(spec, rng)
    else:
        normals = rng.standard_normal((spec.grid_size - 1, spec.dimension))
        drive = _drive_cholesky(spec, normals)
    drive = np.vstack([np.zeros((1, spec.dimension)), drive])
    return PathGrid.from_drive(times, drive, spec.effective_beta)


def sample_fbm_batch(spec: FbmSpec, replicates: int, seed_offset: int = 0) -> np.ndarray:
    """Sample replicates with seeds spec.seed + seed_offset + r; returns (grid, d+1, replicates)"""
    n, d = spec.grid_size, spec.dimension
    values = np.empty((n, d + 1, replicates))
    values[:, 0, :] = spec.times()[:, None]
    if spec.method == "circulant":
        for r in range(replicates):
            values[:, 1:, r] = sample_fbm(spec.with_seed(spec.seed + seed_offset + r)).values[:, 1:]
        return values
    normals = np.empty((n - 1, d * replicates))
    for r in range(replicates):
        rng = _generator(spec.seed + seed_offset + r)
        normals[:, r * d:(r + 1) * d] = rng.standard_normal((n - 1, d))
    drive = _drive_cholesky(spec, normals)
    values[0, 1:, :] = 0.0
    values[1:, 1:, :] = drive.reshape(n - 1, replicates, d).transpose(0, 2, 1)
    return values


def smooth_path(family: str, scales: Sequence[float], horizon: float, grid_size: int,
                beta_hint: float = 1.0) -> PathGrid:
    """Builtin smooth drives: linear s*t, quadratic s*t^2, sine s*sin(i*t) for component i"""
    times = np.linspace(0.0, horizon, grid_size)
    columns = []
    for i, scale in enumerate(scales, start=1):
        if family == "linear":
            columns.append(scale * times)
        elif family == "quadratic":
            columns.append(scale * times**2)
        elif family == "sine":
            columns.append(scale * np.sin(i * times))
        else:
            raise DomainError(f"unknown smooth path family '{family}'")
    drive = np.column_stack(columns) if columns else np.zeros((grid_size, 0))
    return PathGrid.from_drive(times, drive, beta_hint)


# ---- product integration of power kernels ----

def product_weights(n_cells: int, power: float, mesh: float, first: int = 1):
    """
    Weights (A_k, B_k), k = first..first+n_cells-1, such that for a numerator linear on [k, k+1]
    (units of mesh) the integral of N(u) u^power over that cell equals A_k N(k) + B_k N(k+1).
    """
    k = np.arange(first, first + n_cells, dtype=float)
    m0 = ((k + 1) ** (power + 1) - k ** (power + 1)) / (power + 1)
    m1 = ((k + 1) ** (power + 2) - k ** (power + 2)) / (power + 2)
    upper = m1 - k * m0
    lower = m0 - upper
    scale = mesh ** (power + 1)
    return lower * scale, upper * scale


def near_cell_weight(power: float, mesh: float, beta: float) -> float:
    """Integral over [0, mesh] of (u/mesh)^beta u^power, the Hölder extrapolation of the first cell"""
    exponent = beta + power + 1
    if exponent <= 0:
        raise DomainError("kernel is not integrable against the Hölder hint")
    return mesh ** (power + 1) / exponent


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"alpha must lie in (0, 1/2), got {alpha}")


def holder_sup_norm_profile(path: PathGrid, alpha: float, components: Optional[Sequence[int]] = None,
                            stop: Optional[int] = None) -> np.ndarray:
    """
    Running value of sup_{s<=t} ( |y(s)| + int_0^s |y(s)-y(u)| / (s-u)^(1+alpha) du )
    for every grid time up to index stop.
    """
    _check_alpha(alpha)
    y = path.component_values(components)
    last = path.grid_size - 1 if stop is None else stop
    mesh = path.mesh
    power = -1.0 - alpha
    lower, upper = product_weights(max(last, 1), power, mesh)
    near = near_cell_weight(power, mesh, path.beta_hint)

    terms = np.empty(last + 1)
    terms[0] = np.linalg.norm(y[0])
    for n in range(1, last + 1):
        numer = np.linalg.norm(y[n] - y[:n], axis=1)
        # Hölder constant of the last cell from the two nearest increments
        nearest = numer[n - 1] if n == 1 else max(numer[n - 1], float(np.linalg.norm(y[n - 1] - y[n - 2])))
        integral = nearest * near
        if n > 1:
            # cell at offset k spans u in [k, k+1]: numer[n-k] at u=k, numer[n-1-k] at u=k+1
            integral += lower[:n - 1] @ numer[n - 1:0:-1] + upper[:n - 1] @ numer[n - 2::-1]
        terms[n] = np.linalg.norm(y[n]) + integral
    return np.maximum.accumulate(terms)


def holder_sup_norm(path: PathGrid, alpha: float, t_end: float,
                    components: Optional[Sequence[int]] = None) -> float:
    """Grid approximation of the weighted sup norm |y|_{alpha, t_end, inf}"""
    _check_alpha(alpha)
    stop = path.index_of(t_end)
    return float(holder_sup_norm_profile(path, alpha, components, stop)[stop])


def holder_constant(path: PathGrid, beta: float, t_end: Optional[float] = None,
                    components: Optional[Sequence[int]] = None) -> float:
    """Pathwise Hölder constant: sup over grid pairs of |y_t - y_s| / |t - s|^beta"""
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"beta must lie in (0, 1], got {beta}")
    y = path.component_values(components)
    stop = path.grid_size - 1 if t_end is None else path.index_of(t_end)
    y = y[:stop + 1]
    best = 0.0
    for lag in range(1, stop + 1):
        increments = np.linalg.norm(y[lag:] - y[:-lag], axis=1)
        best = max(best, float(increments.max()) / (lag * path.mesh) ** beta)
    return best


def max_increment_ratio(path: PathGrid, beta: float, components: Optional[Sequence[int]] = None) -> float:
    """Largest one-step ratio |dy| / mesh^beta"""
    y = path.component_values(components)
    return float(np.linalg.norm(np.diff(y, axis=0), axis=1).max() / path.mesh**beta)
