"""
Scalar thresholding operators.

h_{q,λ}(r) = argmin_β (β − r)² + λ|β|^q has a closed form for q = 1/2 and q = 2/3.
Each family comes as a scalar function plus an elementwise numpy map (`*_map`) that
the solvers apply to a whole Landweber iterate with per-component weights.
"""
import math
from typing import Callable, Tuple, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

HALF_THRESHOLD_COEF = 54.0 ** (1.0 / 3.0) / 4.0
# 零分支与非零分支在唯一的跳跃点相接，系数取 ⁴√48/3
TWO_THIRDS_THRESHOLD_COEF = 48.0 ** 0.25 / 3.0

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
ORACLE_GRID_STEP = 1e-3
ORACLE_REFINE_TOL = 1e-8


class ThresholdingError(ValueError):
    pass


def _check_lambda(lam: ArrayLike):
    if np.any(np.asarray(lam) <= 0):
        raise ThresholdingError(f"λ 必须为正: {lam}")


def t_half(lam: ArrayLike) -> ArrayLike:
    _check_lambda(lam)
    return HALF_THRESHOLD_COEF * np.power(lam, 2.0 / 3.0)


def t_two_thirds(lam: ArrayLike) -> ArrayLike:
    _check_lambda(lam)
    return TWO_THIRDS_THRESHOLD_COEF * np.power(lam, 0.75)


def _half_branch(r: np.ndarray, lam: np.ndarray) -> np.ndarray:
    arg = np.clip((lam / 8.0) * np.power(np.abs(r) / 3.0, -1.5), -1.0, 1.0)
    return (2.0 / 3.0) * r * (1.0 + np.cos(2.0 * np.pi / 3.0 - (2.0 / 3.0) * np.arccos(arg)))


def two_thirds_phi(r: ArrayLike, lam: ArrayLike) -> ArrayLike:
    """Φ_{2/3,λ}(r); the arccosh argument is clamped to ≥ 1."""
    arg = np.maximum((27.0 / 16.0) * np.power(lam, -1.5) * np.square(r), 1.0)
    return (2.0 / np.sqrt(3.0)) * np.power(lam, 0.25) * np.sqrt(np.cosh(np.arccosh(arg) / 3.0))


def _two_thirds_branch(r: np.ndarray, lam: np.ndarray) -> np.ndarray:
    phi = np.abs(two_thirds_phi(r, lam))
    magnitude = np.abs(r)
    radicand = np.maximum(2.0 * magnitude / phi - phi * phi, 0.0)
    return np.power(phi + np.sqrt(radicand), 3) / 8.0 * np.sign(r)


def _threshold_map(
    branch: Callable[[np.ndarray, np.ndarray], np.ndarray],
    threshold: Callable[[ArrayLike], ArrayLike],
    r: ArrayLike,
    lam: ArrayLike,
) -> np.ndarray:
    _check_lambda(lam)
    r_arr, lam_arr = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(lam, dtype=float))
    out = np.zeros(r_arr.shape, dtype=float)
    # |r| == t 落在零分支
    active = np.abs(r_arr) > threshold(lam_arr)
    if np.any(active):
        r_active = r_arr[active]
        values = branch(r_active, lam_arr[active])
        # cos(π/3) 舍入为 0.5000000000000001，|h| 可能超出 |r| 一个 ulp
        out[active] = np.sign(values) * np.minimum(np.abs(values), np.abs(r_active))
    return out


def half_threshold_map(r: ArrayLike, lam: ArrayLike) -> np.ndarray:
    return _threshold_map(_half_branch, t_half, r, lam)


def two_thirds_threshold_map(r: ArrayLike, lam: ArrayLike) -> np.ndarray:
    return _threshold_map(_two_thirds_branch, t_two_thirds, r, lam)


def hard_threshold_map(r: ArrayLike, t: ArrayLike) -> np.ndarray:
    r_arr = np.asarray(r, dtype=float)
    return np.where(np.abs(r_arr) > t, r_arr, 0.0)


def soft_threshold_map(r: ArrayLike, t: ArrayLike) -> np.ndarray:
    r_arr = np.asarray(r, dtype=float)
    return np.sign(r_arr) * np.maximum(np.abs(r_arr) - t, 0.0)


def half_threshold(r: float, lam: float) -> float:
    return float(half_threshold_map(r, lam))


def two_thirds_threshold(r: float, lam: float) -> float:
    return float(two_thirds_threshold_map(r, lam))


def hard_threshold(r: float, t: float) -> float:
    return float(hard_threshold_map(r, t))


def soft_threshold(r: float, t: float) -> float:
    return float(soft_threshold_map(r, t))


# ---------------------------------------------------------------------------
# Brute-force oracle, used by the test suite to check the closed forms.
# ---------------------------------------------------------------------------

def golden_section_minimize(
    f: Callable[[float], float], a: float, b: float, tol: float = ORACLE_REFINE_TOL
) -> Tuple[float, float]:
    """Derivative-free 1D minimization of a unimodal f on [a, b]."""
    c = b - (b - a) / GOLDEN_RATIO
    d = a + (b - a) / GOLDEN_RATIO
    fc = f(c)
    fd = f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - (b - a) / GOLDEN_RATIO
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) / GOLDEN_RATIO
            fd = f(d)
    x_opt = (a + b) / 2.0
    return x_opt, f(x_opt)


def scalar_prox_oracle(r: float, lam: float, q: float) -> float:
    """
    Global minimizer of (β − r)² + λ|β|^q by grid search plus golden-section refinement.

    Any minimizer satisfies |β| ≤ 2|r|, so the grid [−2|r|−1, 2|r|+1] contains it.
    The refined candidate is compared against β = 0; ties resolve to 0.
    """
    def objective(beta):
        return (beta - r) ** 2 + lam * np.abs(beta) ** q

    bound = 2.0 * abs(r) + 1.0
    grid = np.arange(-bound, bound + ORACLE_GRID_STEP, ORACLE_GRID_STEP)
    values = objective(grid)
    best = int(np.argmin(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]

    beta, value = golden_section_minimize(lambda x: float(objective(x)), float(lo), float(hi))
    if objective(0.0) <= value:
        return 0.0
    return beta
