"""
Young Integration Module
Riemann-Stieltjes sums on grid paths and the Picard reference solver
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from config import PICARD_MAX_ITER, PICARD_SPLIT_DEPTH, PICARD_TOL_SCALE
from errors import (
    DomainError,
    GridMismatchError,
    HolderHintWarning,
    PicardConvergenceError,
    SolverBlowupError,
)
from paths import PathGrid

logger = logging.getLogger(__name__)

SCHEMES = ("trapezoid", "left")


@dataclass
class YoungIntegralResult:
    """Cumulative integral t -> int_0^t f dg on the grid"""
    value_at: np.ndarray
    mesh: Optional[float] = None

    def at(self, index: int) -> np.ndarray:
        return self.value_at[index]

    def between(self, start: int, stop: int) -> np.ndarray:
        """int_{t_start}^{t_stop} f dg"""
        return self.value_at[stop] - self.value_at[start]


def _align(a: np.ndarray, ndim: int) -> np.ndarray:
    return a.reshape(a.shape + (1,) * (ndim - a.ndim))


def riemann_stieltjes(f: np.ndarray, g: np.ndarray, scheme: str = "trapezoid") -> np.ndarray:
    """Cumulative sums of f against the increments of g along axis 0; trailing axes broadcast"""
    if scheme not in SCHEMES:
        raise DomainError(f"unknown Riemann-Stieltjes scheme '{scheme}'")
    dg = np.diff(g, axis=0)
    if scheme == "trapezoid":
        weights = 0.5 * (f[:-1] + f[1:])
    else:
        weights = f[:-1]
    ndim = max(weights.ndim, dg.ndim)
    steps = _align(weights, ndim) * _align(dg, ndim)
    out = np.zeros((steps.shape[0] + 1,) + steps.shape[1:])
    np.cumsum(steps, axis=0, out=out[1:])
    return out


def young_integral(f, g, times=None, scheme: str = "trapezoid",
                   beta_f: Optional[float] = None, beta_g: Optional[float] = None) -> YoungIntegralResult:
    """
    Young integral of f against g sampled on the same grid.

    The trapezoid scheme is the default; scheme="left" gives the left-point sums
    sum f(t_i)(g(t_{i+1}) - g(t_i)), which converge at rate O(mesh) for smooth data.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape[0] != g.shape[0]:
        raise GridMismatchError(f"f has {f.shape[0]} grid points but g has {g.shape[0]}")
    if times is not None and len(times) != g.shape[0]:
        raise GridMismatchError("integrand and time grid have different lengths")
    if beta_f is not None and beta_g is not None and beta_f + beta_g <= 1.0:
        warnings.warn(
            f"Hölder exponents {beta_f} + {beta_g} do not exceed 1; the Young integral may not exist",
            HolderHintWarning,
            stacklevel=2,
        )
    mesh = float(times[1] - times[0]) if times is not None else None
    return YoungIntegralResult(riemann_stieltjes(f, g, scheme), mesh)


@dataclass
class SolverOutput:
    """Picard fixed point on the grid"""
    times: np.ndarray
    trajectory: np.ndarray
    iterations_used: int
    residual: float
    residual_history: List[float] = field(default_factory=list)

    def at(self, t: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.times - t)))
        return self.trajectory[idx]

    def rows(self):
        for t, x in zip(self.times, self.trajectory):
            yield [t, *x]


def _drive_sum(system, path: PathGrid, trajectory: np.ndarray, scheme: str) -> np.ndarray:
    total = np.zeros_like(trajectory)
    for i in range(system.drive_count + 1):
        if system.is_zero(i):
            continue
        total += riemann_stieltjes(system.evaluate(i, trajectory), path.values[:, i], scheme)
    return total


def _check_shapes(system, path: PathGrid, x0: np.ndarray) -> None:
    if path.drive_count != system.drive_count:
        raise GridMismatchError(
            f"path has {path.drive_count} driving components, system expects {system.drive_count}"
        )
    if x0.shape != (system.dimension,):
        raise DomainError(f"x0 must have shape ({system.dimension},), got {x0.shape}")


def picard_solve(system, path: PathGrid, x0=None, tol: Optional[float] = None,
                 max_iter: int = PICARD_MAX_ITER, scheme: str = "trapezoid") -> SolverOutput:
    """
    Fixed point of X = x0 + sum_i int V_i(X) dy^i by plain Picard iteration.

    Stops when the sup-norm change between iterates falls below tol, which defaults to
    1e-10 (1 + |x0|).
    """
    x0 = np.asarray(system.base_point if x0 is None else x0, dtype=float)
    _check_shapes(system, path, x0)
    if tol is None:
        tol = PICARD_TOL_SCALE * (1.0 + np.linalg.norm(x0))
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")

    trajectory = np.broadcast_to(x0, (path.grid_size, x0.size)).copy()
    history = []
    with np.errstate(over="ignore", invalid="ignore"):
        for iteration in range(1, max_iter + 1):
            update = x0 + _drive_sum(system, path, trajectory, scheme)
            if not np.all(np.isfinite(update)):
                raise SolverBlowupError(
                    f"Picard iterate {iteration} is not finite; the trajectory left the domain of the fields"
                )
            change = float(np.max(np.abs(update - trajectory)))
            history.append(change)
            trajectory = update
            logger.debug("Picard iteration %d: change %.3e", iteration, change)
            if change < tol:
                logger.info("Picard converged in %d iterations (residual %.3e)", iteration, change)
                return SolverOutput(path.times, trajectory, iteration, change, history)

    raise PicardConvergenceError(
        f"Picard iteration did not reach tol={tol:.3e} in {max_iter} iterations "
        f"(last change {history[-1]:.3e}); shrink the horizon"
    )


def picard_solve_split(system, path: PathGrid, x0=None, tol: Optional[float] = None,
                       max_iter: int = PICARD_MAX_ITER, scheme: str = "trapezoid",
                       depth: int = PICARD_SPLIT_DEPTH) -> SolverOutput:
    """Picard solve that halves the horizon recursively when the iteration stalls or blows up"""
    x0 = np.asarray(system.base_point if x0 is None else x0, dtype=float)
    try:
        return picard_solve(system, path, x0, tol, max_iter, scheme)
    except (PicardConvergenceError, SolverBlowupError) as exc:
        if depth <= 0 or path.grid_size < 3:
            raise
        logger.info("Splitting horizon %.4g after: %s", path.horizon, exc)

    mid = (path.grid_size - 1) // 2
    first = picard_solve_split(system, path.window(0, mid), x0, tol, max_iter, scheme, depth - 1)
    second = picard_solve_split(system, path.window(mid, path.grid_size - 1), first.trajectory[-1],
                                tol, max_iter, scheme, depth - 1)
    return SolverOutput(
        times=path.times,
        trajectory=np.vstack([first.trajectory, second.trajectory[1:]]),
        iterations_used=max(first.iterations_used, second.iterations_used),
        residual=max(first.residual, second.residual),
        residual_history=first.residual_history + second.residual_history,
    )


def integral_defect(system, path: PathGrid, trajectory, x0=None, scheme: str = "trapezoid") -> float:
    """sup_t |X_t - x0 - sum_i int_0^t V_i(X_s) dy^i_s| recomputed from a trajectory"""
    trajectory = np.asarray(trajectory, dtype=float)
    x0 = trajectory[0] if x0 is None else np.asarray(x0, dtype=float)
    defect = trajectory - x0 - _drive_sum(system, path, trajectory, scheme)
    return float(np.max(np.abs(defect)))
