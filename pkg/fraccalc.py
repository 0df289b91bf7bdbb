"""
Fractional Calculus Module
Fractional integrals, right Weyl derivatives and the path functionals built from them
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gamma

from config import thread_limit
from errors import DomainError
from paths import PathGrid, near_cell_weight, product_weights

logger = logging.getLogger(__name__)

_NODE_TOL = 1e-9


@dataclass(frozen=True)
class FracParams:
    """Order alpha in (0, 1/2) and horizon t_end of a path functional"""
    alpha: float
    t_end: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise DomainError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        if self.t_end <= 0:
            raise DomainError(f"t_end must be positive, got {self.t_end}")

    def check_path(self, path: PathGrid) -> None:
        if self.alpha <= 1.0 - path.beta_hint:
            raise DomainError(
                f"alpha={self.alpha} must exceed 1 - beta_hint = {1.0 - path.beta_hint}"
            )


def _node_index(times: np.ndarray, x: float) -> int:
    tol = _NODE_TOL * max(1.0, abs(times[-1]))
    idx = int(np.argmin(np.abs(times - x)))
    if abs(times[idx] - x) > tol:
        raise DomainError(f"point {x} is not a grid node")
    return idx


def _as_grid(times, values) -> Tuple[np.ndarray, np.ndarray]:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape[0] != times.size:
        raise DomainError("grid function and times have different lengths")
    return times, values


def left_fractional_integral(times, f, alpha: float, x: float):
    """I^alpha_{a+} f(x) with a = times[0], for x at a grid node; f linear between nodes"""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    times, f = _as_grid(times, f)
    if x <= times[0] or x > times[-1] + _NODE_TOL * max(1.0, abs(times[-1])):
        raise DomainError(f"x={x} outside the grid span ({times[0]}, {times[-1]}]")
    n = _node_index(times, x)
    mesh = times[1] - times[0]
    lower, upper = product_weights(n, alpha - 1.0, mesh, first=0)
    # kernel argument u = x - y: node n-k sits at u=k
    value = lower @ f[n:0:-1] + upper @ f[n - 1::-1]
    return value / gamma(alpha)


def right_fractional_integral(times, h, alpha: float, s: float, t: float):
    """I^alpha_{t-} h(s) = (1/Gamma(alpha)) int_s^t (y - s)^(alpha-1) h(y) dy at grid nodes s < t"""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    times, h = _as_grid(times, h)
    i, n = _node_index(times, s), _node_index(times, t)
    if i >= n:
        raise DomainError("right fractional integral needs s < t")
    mesh = times[1] - times[0]
    lower, upper = product_weights(n - i, alpha - 1.0, mesh, first=0)
    return (lower @ h[i:n] + upper @ h[i + 1:n + 1]) / gamma(alpha)


def _weyl_at(values: np.ndarray, i: int, n: int, alpha: float, beta: float, mesh: float):
    """Signed right Weyl derivative of order 1-alpha of g - g(t_n) at node i, unimodular factor dropped"""
    power = alpha - 2.0
    numer = values[i] - values[i + 1:n + 1]
    integral = numer[0] * near_cell_weight(power, mesh, beta)
    if n - i > 1:
        lower, upper = product_weights(n - i - 1, power, mesh)
        integral = integral + lower @ numer[:-1] + upper @ numer[1:]
    edge = (values[i] - values[n]) * ((n - i) * mesh) ** (alpha - 1.0)
    return (edge + (1.0 - alpha) * integral) / gamma(alpha)


def right_weyl_derivative(times, g, alpha: float, t: float, s: float, compensated: bool = True,
                          beta_hint: float = 1.0, signed: bool = False):
    """
    Right Weyl derivative D^{1-alpha}_{t-} g (s) at grid nodes 0 <= s < t.

    The unimodular factor (-1)^{1-alpha} is dropped. By default the magnitude is returned
    (absolute value for scalar g, Euclidean norm for vector g); signed=True returns the
    real value itself. The first cell next to s uses the Hölder extrapolation with beta_hint.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if s >= t:
        raise DomainError(f"Weyl derivative needs s < t, got s={s}, t={t}")
    times, g = _as_grid(times, g)
    i, n = _node_index(times, s), _node_index(times, t)
    if i >= n:
        raise DomainError("s and t fall on the same grid node")
    mesh = times[1] - times[0]
    value = _weyl_at(g, i, n, alpha, beta_hint, mesh)
    if not compensated:
        value = value + g[n] * ((n - i) * mesh) ** (alpha - 1.0) / gamma(alpha)
    if signed:
        return value
    return float(np.linalg.norm(np.atleast_1d(value)))


def _sweep_rows(values: np.ndarray, alpha: float, beta: float, mesh: float, stop: int,
                rows: Sequence[int], seminorm: bool) -> Iterator[Tuple[int, np.ndarray]]:
    """
    For each s index i, magnitudes over t indices i+1..stop.

    seminorm=False gives |D^{1-alpha}_{t-} g_{t-}(s)| * Gamma(alpha); True gives the
    W^{1-alpha,inf} integrand |g(t)-g(s)|/(t-s)^{1-alpha} + int_s^t |g(y)-g(s)|/(y-s)^{2-alpha} dy.
    """
    power = alpha - 2.0
    near = near_cell_weight(power, mesh, beta)
    lower, upper = product_weights(max(stop - 1, 1), power, mesh)
    for i in rows:
        count = stop - i
        numer = values[i] - values[i + 1:stop + 1]
        lags = np.arange(1, count + 1) * mesh
        edge_scale = lags ** (alpha - 1.0)
        if seminorm:
            numer_norm = np.linalg.norm(numer, axis=1)
            cell = lower[:count - 1] * numer_norm[:-1] + upper[:count - 1] * numer_norm[1:]
            integral = numer_norm[0] * near + np.concatenate([[0.0], np.cumsum(cell)])
            magnitude = numer_norm * edge_scale + integral
        else:
            cell = lower[:count - 1, None] * numer[:-1] + upper[:count - 1, None] * numer[1:]
            integral = numer[0] * near + np.vstack([np.zeros((1, numer.shape[1])), np.cumsum(cell, axis=0)])
            magnitude = np.linalg.norm(numer * edge_scale[:, None] + (1.0 - alpha) * integral, axis=1)
        yield i, magnitude


def _pair_profile(path: PathGrid, alpha: float, stop: int, components, seminorm: bool) -> np.ndarray:
    """Running sup over pairs s < t <= t_n, indexed by n"""
    values = path.component_values(components)
    best = np.zeros(stop + 1)
    if stop < 1:
        return best
    rows = list(range(stop))
    workers = min(thread_limit(), len(rows))

    def run(chunk: List[int]) -> np.ndarray:
        local = np.zeros(stop + 1)
        for i, magnitude in _sweep_rows(values, alpha, path.beta_hint, path.mesh, stop, chunk, seminorm):
            np.maximum(local[i + 1:], magnitude, out=local[i + 1:])
        return local

    if workers > 1:
        chunks = [rows[k::workers] for k in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as executor:
            for local in executor.map(run, chunks):
                np.maximum(best, local, out=best)
    else:
        best = run(rows)
    return np.maximum.accumulate(best)


def lambda_alpha_profile(path: PathGrid, alpha: float, components: Optional[Sequence[int]] = None,
                         stop: Optional[int] = None) -> np.ndarray:
    """Lambda_alpha(t_n, y) for every grid index n up to stop"""
    params = FracParams(alpha, max(path.horizon, 1e-300))
    params.check_path(path)
    last = path.grid_size - 1 if stop is None else stop
    profile = _pair_profile(path, alpha, last, components, seminorm=False)
    return profile / (gamma(alpha) * gamma(1.0 - alpha))


def lambda_alpha(path: PathGrid, params: FracParams, components: Optional[Sequence[int]] = None) -> float:
    """Lambda_alpha(T, y) = sup_{s<t<=T} |D^{1-alpha}_{t-} y_{t-}(s)| / Gamma(1-alpha) over grid pairs"""
    params.check_path(path)
    stop = path.index_of(params.t_end)
    value = float(lambda_alpha_profile(path, params.alpha, components, stop)[stop])
    logger.debug("Lambda_%s(%s) = %s", params.alpha, params.t_end, value)
    return value


def w_norm(path: PathGrid, alpha: float, t_end: float, components: Optional[Sequence[int]] = None) -> float:
    """Grid value of the W^{1-alpha,inf} seminorm on [0, t_end]"""
    FracParams(alpha, t_end).check_path(path)
    stop = path.index_of(t_end)
    return float(_pair_profile(path, alpha, stop, components, seminorm=True)[stop])


def derivative_surface(path: PathGrid, alpha: float, t_end: float, stride: int = 1,
                       components: Optional[Sequence[int]] = None) -> List[Tuple[float, float, float]]:
    """Rows (s, t, |D^{1-alpha}_{t-} y_{t-}(s)|) on every stride-th grid node, for debugging dumps"""
    FracParams(alpha, t_end).check_path(path)
    stop = path.index_of(t_end)
    values = path.component_values(components)
    rows = []
    scale = 1.0 / gamma(alpha)
    for i, magnitude in _sweep_rows(values, alpha, path.beta_hint, path.mesh, stop,
                                    range(0, stop, stride), False):
        for offset in range(0, magnitude.size, stride):
            n = i + 1 + offset
            rows.append((float(path.times[i]), float(path.times[n]), float(magnitude[offset] * scale)))
    return rows


def c_alpha(t_end: float, alpha: float) -> float:
    """C_alpha(T) = (1/(alpha(1-alpha)) + T^alpha)(1 + T^alpha) Gamma(1-2alpha) T^(1-2alpha)"""
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"alpha must lie in (0, 1/2), got {alpha}")
    if t_end <= 0:
        raise DomainError(f"t_end must be positive, got {t_end}")
    t_alpha = t_end**alpha
    return float(
        (1.0 / (alpha * (1.0 - alpha)) + t_alpha) * (1.0 + t_alpha)
        * gamma(1.0 - 2.0 * alpha) * t_end ** (1.0 - 2.0 * alpha)
    )


def lambda_alpha_upper_bound(eta: float, alpha: float, beta: float, t_end: float) -> float:
    """Estimate of Lambda_alpha(T, y) through the beta-Hölder constant eta of the path"""
    if alpha + beta <= 1.0:
        raise DomainError("the chain estimate needs alpha + beta > 1")
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"alpha must lie in (0, 1/2), got {alpha}")
    return float(
        beta * t_end ** (alpha + beta - 1.0) * eta
        / ((alpha + beta - 1.0) * gamma(1.0 - alpha) * gamma(alpha))
    )
