"""
Dense linear algebra for the thresholding solvers.

Matrices are 2-D float64 numpy arrays (row-major), vectors are 1-D float64 arrays.
All randomness goes through an explicit seed; there is no module-level generator.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .console import rich_debug

DenseMatrix = np.ndarray
Vector = np.ndarray

SPECTRAL_TOL = 1e-10
SPECTRAL_MAX_ITER = 1000
SPECTRAL_BLOCK = 16
SPECTRAL_START_SEED = 0x5EED

CSV_FORMAT = "%.17g"


class LinalgError(ValueError):
    pass


class DimensionMismatchError(LinalgError):
    pass


class SpectralNormNotConverged(LinalgError):
    """Power iteration ran out of iterations; `estimate` holds the last value."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class Rearrangement:
    """
    非增重排: values[i] = |source[permutation[i]]|，且 values 非增。
    permutation 为 0 起始的下标。
    """
    values: Vector
    permutation: np.ndarray

    def kth(self, k: int) -> float:
        """第 k 大的幅值 (k 从 1 开始)，即 ⌈x⌋_k。"""
        return float(self.values[k - 1])

    def restore(self) -> Vector:
        """按逆置换把 values 放回原位置，得到 |source|。"""
        out = np.empty_like(self.values)
        out[self.permutation] = self.values
        return out


def make_rng(seed: int) -> np.random.Generator:
    # PCG64 + ziggurat normals: numpy 保证同一种子在各平台上产生相同的流
    return np.random.Generator(np.random.PCG64(seed))


def gaussian_matrix(m: int, n: int, seed: int) -> DenseMatrix:
    if m <= 0 or n <= 0:
        raise LinalgError(f"矩阵尺寸必须为正: m={m}, n={n}")
    return make_rng(seed).standard_normal((m, n))


def _check_matrix(A: DenseMatrix):
    if A.ndim != 2:
        raise DimensionMismatchError(f"期望二维矩阵，得到 shape={A.shape}")


def matvec(A: DenseMatrix, x: Vector) -> Vector:
    _check_matrix(A)
    if x.shape != (A.shape[1],):
        raise DimensionMismatchError(f"matvec: A 为 {A.shape}，x 为 {x.shape}")
    return A @ x


def matvec_transpose(A: DenseMatrix, y: Vector) -> Vector:
    _check_matrix(A)
    if y.shape != (A.shape[0],):
        raise DimensionMismatchError(f"matvec_transpose: A 为 {A.shape}，y 为 {y.shape}")
    return A.T @ y


def spectral_norm(
    A: DenseMatrix,
    tol: float = SPECTRAL_TOL,
    max_iter: int = SPECTRAL_MAX_ITER,
    seed: int = SPECTRAL_START_SEED,
) -> float:
    """
    ‖A‖₂ by block power iteration on the smaller Gram matrix G (AAᵀ or AᵀA).

    Each step multiplies a small orthonormal block by G and takes the top Ritz pair
    (ρ, v) of G on that block. Stops once the eigen-residual ‖Gv − ρv‖ ≤ tol·ρ, which
    puts an eigenvalue of G within tol·ρ of ρ and so bounds the relative error of √ρ
    by tol. Raises SpectralNormNotConverged after `max_iter` steps.
    """
    _check_matrix(A)
    if tol <= 0:
        raise LinalgError(f"tol 必须为正: {tol}")
    if not np.any(A):
        raise LinalgError("零矩阵没有可用于步长的谱范数")

    gram = A @ A.T if A.shape[0] <= A.shape[1] else A.T @ A
    block = min(SPECTRAL_BLOCK, gram.shape[0])
    V, _ = np.linalg.qr(make_rng(seed).standard_normal((gram.shape[0], block)))

    estimate = 0.0
    for it in range(1, max_iter + 1):
        W = gram @ V
        ritz_values, ritz_vectors = np.linalg.eigh(V.T @ W)
        top = ritz_vectors[:, -1]
        estimate = max(float(ritz_values[-1]), 0.0)
        residual = float(np.linalg.norm(W @ top - estimate * (V @ top)))
        if residual <= tol * estimate:
            rich_debug(f"[spectral_norm] {it} 次迭代收敛, σ² = {estimate:.17g}, 残差 {residual:.3g}")
            return float(np.sqrt(estimate))
        V, _ = np.linalg.qr(W)

    raise SpectralNormNotConverged(
        f"幂迭代在 {max_iter} 次内未收敛", estimate=float(np.sqrt(estimate))
    )


def landweber_step(A: DenseMatrix, b: Vector, z: Vector, mu: float) -> Vector:
    """B_μ(z) = z + μAᵀ(b − Az)."""
    if b.shape != (A.shape[0],):
        raise DimensionMismatchError(f"landweber_step: A 为 {A.shape}，b 为 {b.shape}")
    return z + mu * matvec_transpose(A, b - matvec(A, z))


def nonincreasing_rearrangement(x: Vector) -> Rearrangement:
    magnitudes = np.abs(np.asarray(x, dtype=float))
    # 稳定排序：幅值相同时按原下标升序
    permutation = np.argsort(-magnitudes, kind="stable")
    return Rearrangement(values=magnitudes[permutation], permutation=permutation)


def save_csv(path: Union[str, Path], array: np.ndarray):
    """矩阵每行一行；向量每个分量一行。"""
    data = np.asarray(array, dtype=float)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    np.savetxt(path, data, fmt=CSV_FORMAT, delimiter=",")


def load_matrix(path: Union[str, Path]) -> DenseMatrix:
    return np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)


def load_vector(path: Union[str, Path], length: Optional[int] = None) -> Vector:
    vector = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float).reshape(-1)
    if length is not None and vector.shape != (length,):
        raise DimensionMismatchError(f"{path}: 期望长度 {length}，得到 {vector.shape[0]}")
    return vector
