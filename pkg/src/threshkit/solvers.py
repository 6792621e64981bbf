"""
Iterative thresholding solvers: 1/2-ε, 2/3-ε and the Hard / Soft / Half / 2/3 baselines.

Every algorithm follows the same loop:

    Bz  = z + μAᵀ(b − Az)                         (Landweber step)
    λ   = adaptive rule from ⌈Bz⌋_{r+1}            (per family)
    z'  = h(Bz) componentwise                       (per family thresholding)

The ε-families additionally reweight each component by (|z_i| + ε_i)^{θ−p} and
refresh ε from the current residual before each step.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .console import rich_debug
from .linalg import (
    DenseMatrix,
    Vector,
    landweber_step,
    matvec,
    matvec_transpose,
    nonincreasing_rearrangement,
    spectral_norm,
)
from .thresholding import (
    half_threshold_map,
    hard_threshold_map,
    soft_threshold_map,
    two_thirds_threshold_map,
)

LAMBDA_FLOOR = 1e-12

HALF_LAMBDA_COEF = 8.0 / math.sqrt(54.0)
TWO_THIRDS_LAMBDA_COEF = 4.0 ** (4.0 / 3.0) / 48.0 ** (4.0 / 9.0)


class SolverConfigError(ValueError):
    pass


class ThresholdingRule(str, Enum):
    HARD = "hard"
    SOFT = "soft"
    HALF = "half"
    TWO_THIRDS = "two_thirds"
    HALF_EPS = "half_eps"
    TWO_THIRDS_EPS = "two_thirds_eps"

    @property
    def theta(self) -> Optional[float]:
        """罚项指数 θ；Hard/Soft 没有。"""
        if self in (ThresholdingRule.HALF, ThresholdingRule.HALF_EPS):
            return 0.5
        if self in (ThresholdingRule.TWO_THIRDS, ThresholdingRule.TWO_THIRDS_EPS):
            return 2.0 / 3.0
        return None

    @property
    def uses_epsilon(self) -> bool:
        return self in (ThresholdingRule.HALF_EPS, ThresholdingRule.TWO_THIRDS_EPS)

    @property
    def label(self) -> str:
        return _RULE_LABELS[self]

    @classmethod
    def parse(cls, name: str) -> "ThresholdingRule":
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            known = ", ".join(rule.value for rule in cls)
            raise SolverConfigError(f"未知算法 '{name}'，可选: {known}") from None


_RULE_LABELS = {
    ThresholdingRule.HARD: "Hard",
    ThresholdingRule.SOFT: "Soft",
    ThresholdingRule.HALF: "Half",
    ThresholdingRule.TWO_THIRDS: "2/3",
    ThresholdingRule.HALF_EPS: "1/2-ε",
    ThresholdingRule.TWO_THIRDS_EPS: "2/3-ε",
}


class TerminationReason(str, Enum):
    TOLERANCE = "tolerance"
    MAX_ITER = "max_iter"


@dataclass(frozen=True)
class SolverConfig:
    rule: ThresholdingRule
    sparsity_r: int
    p: float = 0.5
    eta: float = 0.01
    gamma: float = 0.7
    epsilon_floor: float = 1e-3
    tol: float = 1e-8
    max_iter: int = 5000

    def __post_init__(self):
        if not isinstance(self.rule, ThresholdingRule):
            object.__setattr__(self, "rule", ThresholdingRule.parse(self.rule))
        if not 0.0 < self.eta < 1.0:
            raise SolverConfigError(f"eta 必须在 (0, 1) 内: {self.eta}")
        if not 0.0 <= self.p < 1.0:
            raise SolverConfigError(f"p 必须在 [0, 1) 内: {self.p}")
        if self.sparsity_r < 1:
            raise SolverConfigError(f"sparsity_r 必须为正整数: {self.sparsity_r}")
        if self.gamma < 0:
            raise SolverConfigError(f"gamma 不能为负: {self.gamma}")
        if self.epsilon_floor <= 0:
            raise SolverConfigError(f"epsilon_floor 必须为正: {self.epsilon_floor}")
        if self.tol <= 0:
            raise SolverConfigError(f"tol 必须为正: {self.tol}")
        if self.max_iter < 1:
            raise SolverConfigError(f"max_iter 必须为正整数: {self.max_iter}")

    @property
    def effective_p(self) -> float:
        # Half / 2/3 即 p = θ 的 ε 版本
        if self.rule.uses_epsilon or self.rule.theta is None:
            return self.p
        return self.rule.theta

    @property
    def penalty_p(self) -> Optional[float]:
        """effective_p；Hard / Soft 没有 ℓp 罚项，返回 None。"""
        return None if self.rule.theta is None else self.effective_p


@dataclass(frozen=True)
class SolverState:
    z: Vector
    k: int
    lambda_k: float
    epsilon: Vector
    mu: float
    # C_{λk,εk}(z^k)，权重锚定在产生 z^k 的上一迭代点
    objective_k: float
    objective_before: Optional[float] = None
    step_norm: Optional[float] = None


@dataclass(frozen=True)
class TraceRecord:
    objective: float
    objective_next: float
    step_norm: float
    lambda_k: float


@dataclass(frozen=True)
class SolverResult:
    z_star: Vector
    iterations: int
    converged: bool
    trace: Tuple[TraceRecord, ...]
    termination_reason: TerminationReason
    lambda_final: float
    epsilon_final: Vector
    mu: float = 0.0


def step_size(A: DenseMatrix, eta: float) -> float:
    if not 0.0 < eta < 1.0:
        raise SolverConfigError(f"eta 必须在 (0, 1) 内: {eta}")
    return (1.0 - eta) / spectral_norm(A) ** 2


def _kth_magnitudes(r: int, *vectors: Vector) -> List[float]:
    n = vectors[0].shape[0]
    if r + 1 > n:
        raise SolverConfigError(f"r + 1 = {r + 1} 超过维数 n = {n}")
    return [nonincreasing_rearrangement(v).kth(r + 1) for v in vectors]


def adaptive_lambda_half(
    Bz: Vector, z: Vector, epsilon: Vector, r: int, mu: float, p: float
) -> float:
    b_r, z_r, e_r = _kth_magnitudes(r, Bz, z, epsilon)
    return HALF_LAMBDA_COEF * b_r ** 1.5 * (z_r + e_r) ** (0.5 - p) / mu


def adaptive_lambda_two_thirds(
    Bz: Vector, z: Vector, epsilon: Vector, r: int, mu: float, p: float
) -> float:
    b_r, z_r, e_r = _kth_magnitudes(r, Bz, z, epsilon)
    return TWO_THIRDS_LAMBDA_COEF * b_r ** (4.0 / 3.0) * (z_r + e_r) ** (2.0 / 3.0 - p) / mu


def epsilon_update(
    A: DenseMatrix, b: Vector, z: Vector, mu: float, gamma: float, floor: float
) -> Vector:
    """ε_i = max(γ|[μAᵀ(b − Az)]_i|, floor)."""
    if floor <= 0:
        raise SolverConfigError(f"epsilon floor 必须为正: {floor}")
    gradient_step = mu * matvec_transpose(A, b - matvec(A, z))
    return np.maximum(gamma * np.abs(gradient_step), floor)


def penalty_weights(anchor: Vector, epsilon: Vector, theta: float, p: float) -> Vector:
    """(|y_i| + ε_i)^{θ−p}；θ = p 时恒为 1。"""
    return np.power(np.abs(anchor) + epsilon, theta - p)


def modified_penalty(
    z: Vector, epsilon: Vector, theta: float, p: float, anchor: Optional[Vector] = None
) -> float:
    """Σ|z_i|^θ / (|y_i| + ε_i)^{θ−p}, with y = z unless an anchor is given."""
    anchor = z if anchor is None else anchor
    return float(np.sum(np.power(np.abs(z), theta) / penalty_weights(anchor, epsilon, theta, p)))


def objective(
    A: DenseMatrix,
    b: Vector,
    z: Vector,
    lam: float,
    epsilon: Optional[Vector],
    p: float,
    family: ThresholdingRule,
    anchor: Optional[Vector] = None,
) -> float:
    residual = matvec(A, z) - b
    fit = float(residual @ residual)
    if lam == 0.0:
        return fit
    if family is ThresholdingRule.HARD:
        return fit + lam * float(np.count_nonzero(z))
    if family is ThresholdingRule.SOFT:
        return fit + lam * float(np.sum(np.abs(z)))

    theta = family.theta
    if not family.uses_epsilon:
        p = theta
    if epsilon is None:
        epsilon = np.ones_like(z)
    return fit + lam * modified_penalty(z, epsilon, theta, p, anchor=anchor)


def surrogate_objective(
    A: DenseMatrix,
    b: Vector,
    z: Vector,
    y: Vector,
    lam: float,
    epsilon: Vector,
    mu: float,
    theta: float,
    p: float,
) -> float:
    """
    C_{λ,μ}(z, y) = μ‖Az−b‖² + λμΣ|z_i|^θ/(|y_i|+ε_i)^{θ−p} − μ‖Az−Ay‖² + ‖z−y‖².

    For μ < 1/‖A‖₂² it majorizes μ·C(z) with weights anchored at y, touching at z = y;
    one thresholding step from y minimizes it over z.
    """
    fit = matvec(A, z) - b
    gap = matvec(A, z - y)
    diff = z - y
    return float(
        mu * (fit @ fit)
        + lam * mu * modified_penalty(z, epsilon, theta, p, anchor=y)
        - mu * (gap @ gap)
        + diff @ diff
    )


def _shrink(
    Bz: Vector,
    z: Vector,
    lam: float,
    epsilon: Vector,
    mu: float,
    config: SolverConfig,
    threshold: Optional[float] = None,
) -> Vector:
    rule = config.rule
    if rule is ThresholdingRule.HARD:
        t = math.sqrt(lam * mu) if threshold is None else threshold
        return hard_threshold_map(Bz, t)
    if rule is ThresholdingRule.SOFT:
        t = lam * mu / 2.0 if threshold is None else threshold
        return soft_threshold_map(Bz, t)

    lam_eff = lam * mu / penalty_weights(z, epsilon, rule.theta, config.effective_p)
    if rule.theta == 0.5:
        return half_threshold_map(Bz, lam_eff)
    return two_thirds_threshold_map(Bz, lam_eff)


def frozen_step(
    A: DenseMatrix,
    b: Vector,
    z: Vector,
    lam: float,
    epsilon: Vector,
    mu: float,
    config: SolverConfig,
) -> Vector:
    """One thresholding step with λ and ε held fixed (no adaptive update)."""
    return _shrink(landweber_step(A, b, z, mu), z, lam, epsilon, mu, config)


def iterate_once(
    state: SolverState, A: DenseMatrix, b: Vector, config: SolverConfig
) -> SolverState:
    rule = config.rule
    z, mu = state.z, state.mu
    Bz = landweber_step(A, b, z, mu)

    epsilon = state.epsilon
    if rule.uses_epsilon:
        epsilon = epsilon_update(A, b, z, mu, config.gamma, config.epsilon_floor)

    threshold = None
    if rule is ThresholdingRule.HARD:
        threshold = _kth_magnitudes(config.sparsity_r, Bz)[0]
        lam = threshold ** 2 / mu
    elif rule is ThresholdingRule.SOFT:
        threshold = _kth_magnitudes(config.sparsity_r, Bz)[0]
        lam = 2.0 * threshold / mu
    else:
        adaptive = adaptive_lambda_half if rule.theta == 0.5 else adaptive_lambda_two_thirds
        lam = adaptive(Bz, z, epsilon, config.sparsity_r, mu, config.effective_p)
        # ⌈Bz⌋_{r+1} = 0 时退化为纯 Landweber 步
        lam = max(lam, LAMBDA_FLOOR)

    z_next = _shrink(Bz, z, lam, epsilon, mu, config, threshold)
    p = config.effective_p
    return SolverState(
        z=z_next,
        k=state.k + 1,
        lambda_k=lam,
        epsilon=epsilon,
        mu=mu,
        objective_k=objective(A, b, z_next, lam, epsilon, p, rule, anchor=z),
        objective_before=objective(A, b, z, lam, epsilon, p, rule, anchor=z),
        step_norm=float(np.linalg.norm(z_next - z)),
    )


def initial_state(
    A: DenseMatrix, b: Vector, config: SolverConfig, z0: Optional[Vector] = None, mu: Optional[float] = None
) -> SolverState:
    n = A.shape[1]
    z = np.zeros(n) if z0 is None else np.array(z0, dtype=float)
    if z.shape != (n,):
        raise SolverConfigError(f"z0 长度应为 {n}，得到 {z.shape}")
    if config.sparsity_r >= n:
        raise SolverConfigError(f"sparsity_r = {config.sparsity_r} 必须小于 n = {n}")
    mu = step_size(A, config.eta) if mu is None else mu
    epsilon = np.full(n, config.epsilon_floor)
    return SolverState(
        z=z,
        k=0,
        lambda_k=0.0,
        epsilon=epsilon,
        mu=mu,
        objective_k=objective(A, b, z, 0.0, epsilon, config.effective_p, config.rule),
    )


def solve(
    A: DenseMatrix, b: Vector, config: SolverConfig, z0: Optional[Vector] = None
) -> SolverResult:
    """
    Run the configured algorithm from z0 (zero by default).

    Stops when ‖z^{k+1} − z^k‖₂ / ‖z^k‖₂ ≤ tol (absolute change when z^k = 0) or
    after max_iter steps. Non-convergence is reported in the result, not raised.
    """
    if b.shape != (A.shape[0],):
        raise SolverConfigError(f"b 长度应为 {A.shape[0]}，得到 {b.shape}")
    state = initial_state(A, b, config, z0)
    trace: List[TraceRecord] = []
    reason = TerminationReason.MAX_ITER

    for _ in range(config.max_iter):
        previous_norm = float(np.linalg.norm(state.z))
        state = iterate_once(state, A, b, config)
        trace.append(
            TraceRecord(
                objective=state.objective_before,
                objective_next=state.objective_k,
                step_norm=state.step_norm,
                lambda_k=state.lambda_k,
            )
        )
        change = state.step_norm if previous_norm == 0.0 else state.step_norm / previous_norm
        if change <= config.tol:
            reason = TerminationReason.TOLERANCE
            break

    rich_debug(
        f"[solve] {config.rule.value} p={config.penalty_p}: "
        f"{state.k} 次迭代, 结束原因 {reason.value}"
    )
    return SolverResult(
        z_star=state.z,
        iterations=state.k,
        converged=reason is TerminationReason.TOLERANCE,
        trace=tuple(trace),
        termination_reason=reason,
        lambda_final=state.lambda_k,
        epsilon_final=state.epsilon,
        mu=state.mu,
    )
