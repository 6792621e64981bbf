"""
Phase-transition experiments: random instances, trial execution and success-rate sweeps.

Every trial (k, t) derives its instance seed from (base_seed, k, t) only, so all
algorithms in one sweep see identical instances. Cells run independently and are
reduced in a fixed order, so any worker count gives the same curves.
"""
import hashlib
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .console import rich_debug
from .linalg import DenseMatrix, Vector, gaussian_matrix, make_rng, matvec
from .solvers import SolverConfig, ThresholdingRule, solve

# 子种子角色标签
ROLE_MATRIX = 1
ROLE_SIGNAL = 2
ROLE_NOISE = 3
ROLE_TRIAL = 4

DEFAULT_TRIALS = 20
DEFAULT_SUCCESS_THRESHOLD = 1e-4


class ExperimentError(ValueError):
    pass


def derive_seed(*words: int) -> int:
    """64-bit sub-seed from integer words, mixed by numpy's SeedSequence hash."""
    sequence = np.random.SeedSequence([int(w) for w in words])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ProblemInstance:
    A: DenseMatrix
    b: Vector
    z_true: Vector
    sparsity_k: int
    noise_sigma: float
    seed: int

    def digest(self) -> str:
        h = hashlib.sha256()
        for array in (self.A, self.b, self.z_true):
            h.update(np.ascontiguousarray(array, dtype=np.float64).tobytes())
        h.update(f"{self.sparsity_k}:{self.noise_sigma!r}:{self.seed}".encode())
        return h.hexdigest()


@dataclass(frozen=True)
class SparsityRange:
    start: int
    stop: int
    step: int = 1

    def __post_init__(self):
        if self.step < 1:
            raise ExperimentError(f"稀疏度步长必须为正: {self.step}")
        if self.start < 1 or self.stop < self.start:
            raise ExperimentError(f"无效的稀疏度范围: {self.start}..{self.stop}")

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.start, self.stop + 1, self.step))

    @property
    def maximum(self) -> int:
        return list(self)[-1]


@dataclass(frozen=True)
class AlgorithmEntry:
    """
    One algorithm of a sweep. `p` is required for the ε rules, fixed to θ for
    Half / 2/3 and None for Hard / Soft, which have no ℓp penalty.
    """
    rule: ThresholdingRule
    p: Optional[float] = None

    def __post_init__(self):
        if self.rule.uses_epsilon:
            if self.p is None or not 0.0 <= self.p < 1.0:
                raise ExperimentError(f"算法 '{self.rule.value}' 需要 p ∈ [0, 1)，得到 {self.p}")
        else:
            object.__setattr__(self, "p", self.rule.theta)

    @property
    def label(self) -> str:
        if self.rule.uses_epsilon:
            return f"{self.rule.value}_p{self.p:g}"
        return self.rule.value

    @property
    def display_name(self) -> str:
        if self.rule.uses_epsilon:
            return f"{self.rule.label} (p={self.p:g})"
        return self.rule.label


@dataclass(frozen=True)
class ExperimentSpec:
    m: int
    n: int
    sparsity_range: SparsityRange
    algorithms: Tuple[AlgorithmEntry, ...]
    trials: int = DEFAULT_TRIALS
    noise_sigma: float = 0.0
    base_seed: int = 0
    success_threshold: float = DEFAULT_SUCCESS_THRESHOLD
    solver: SolverConfig = field(
        default_factory=lambda: SolverConfig(rule=ThresholdingRule.HALF_EPS, sparsity_r=1)
    )

    def __post_init__(self):
        if not self.algorithms:
            raise ExperimentError("算法列表为空")
        labels = [entry.label for entry in self.algorithms]
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            # 结果文件按 label 命名，重复会互相覆盖
            raise ExperimentError(f"算法标签重复: {', '.join(duplicates)}")
        if self.trials < 1:
            raise ExperimentError(f"trials 必须为正整数: {self.trials}")
        if self.noise_sigma < 0:
            raise ExperimentError(f"noise_sigma 不能为负: {self.noise_sigma}")
        if not 1 <= self.m < self.n:
            raise ExperimentError(f"恢复实验要求 1 ≤ m < n: m={self.m}, n={self.n}")
        if self.sparsity_range.maximum >= self.m:
            raise ExperimentError(
                f"最大稀疏度 {self.sparsity_range.maximum} 必须小于 m = {self.m}"
            )

    def solver_config(self, entry: AlgorithmEntry, k: int) -> SolverConfig:
        return SolverConfig(
            rule=entry.rule,
            sparsity_r=k,
            p=self.solver.p if entry.p is None else entry.p,
            eta=self.solver.eta,
            gamma=self.solver.gamma,
            epsilon_floor=self.solver.epsilon_floor,
            tol=self.solver.tol,
            max_iter=self.solver.max_iter,
        )


@dataclass(frozen=True)
class TrialOutcome:
    relative_error: float
    iterations: int
    converged: bool
    success: bool
    instance_digest: str


@dataclass(frozen=True)
class SuccessPoint:
    sparsity: int
    successes: int
    trials: int
    mean_re: float
    mean_iterations: float
    outcomes: Tuple[TrialOutcome, ...] = ()

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials


@dataclass(frozen=True)
class SuccessCurve:
    algorithm: AlgorithmEntry
    points: Tuple[SuccessPoint, ...]

    @property
    def label(self) -> str:
        return self.algorithm.label


def generate_sparse_signal(n: int, k: int, seed: int) -> Vector:
    if not 0 <= k <= n:
        raise ExperimentError(f"稀疏度 k={k} 超出 [0, n={n}]")
    rng = make_rng(seed)
    z = np.zeros(n)
    support = rng.choice(n, size=k, replace=False)
    z[support] = rng.standard_normal(k)
    return z


def make_instance(m: int, n: int, k: int, noise_sigma: float, seed: int) -> ProblemInstance:
    if not 0 <= k < m < n:
        raise ExperimentError(f"要求 0 ≤ k < m < n: k={k}, m={m}, n={n}")
    if noise_sigma < 0:
        raise ExperimentError(f"noise_sigma 不能为负: {noise_sigma}")
    A = gaussian_matrix(m, n, derive_seed(seed, ROLE_MATRIX))
    z_true = generate_sparse_signal(n, k, derive_seed(seed, ROLE_SIGNAL))
    b = matvec(A, z_true)
    if noise_sigma > 0:
        b = b + noise_sigma * make_rng(derive_seed(seed, ROLE_NOISE)).standard_normal(m)
    return ProblemInstance(A=A, b=b, z_true=z_true, sparsity_k=k, noise_sigma=noise_sigma, seed=seed)


def relative_error(z_star: Vector, z_true: Vector) -> float:
    reference = float(np.linalg.norm(z_true))
    if reference == 0.0:
        raise ExperimentError("z_true 为零向量，相对误差无定义")
    return float(np.linalg.norm(z_star - z_true)) / reference


def trial_seed(base_seed: int, k: int, t: int) -> int:
    return derive_seed(base_seed, ROLE_TRIAL, k, t)


def run_trial(spec: ExperimentSpec, entry: AlgorithmEntry, k: int, t: int) -> TrialOutcome:
    instance = make_instance(spec.m, spec.n, k, spec.noise_sigma, trial_seed(spec.base_seed, k, t))
    result = solve(instance.A, instance.b, spec.solver_config(entry, k))
    re = relative_error(result.z_star, instance.z_true)
    # 未收敛 (max_iter) 一律记为失败
    return TrialOutcome(
        relative_error=re,
        iterations=result.iterations,
        converged=result.converged,
        success=result.converged and re <= spec.success_threshold,
        instance_digest=instance.digest(),
    )


def _aggregate(k: int, outcomes: Sequence[TrialOutcome]) -> SuccessPoint:
    trials = len(outcomes)
    return SuccessPoint(
        sparsity=k,
        successes=sum(1 for o in outcomes if o.success),
        trials=trials,
        mean_re=float(np.mean([o.relative_error for o in outcomes])),
        mean_iterations=float(np.mean([o.iterations for o in outcomes])),
        outcomes=tuple(outcomes),
    )


def run_sweep(spec: ExperimentSpec, workers: int = 1) -> List[SuccessCurve]:
    cells = [
        (spec, entry, k, t)
        for entry in spec.algorithms
        for k in spec.sparsity_range
        for t in range(spec.trials)
    ]
    rich_debug(f"[sweep] {len(cells)} 个单元, workers={workers}")

    if workers > 1:
        # Parallel 按提交顺序返回结果，归约与完成顺序无关
        parallel = Parallel(n_jobs=workers, batch_size=max(1, spec.trials))
        outcomes = parallel(delayed(run_trial)(*cell) for cell in cells)
    else:
        outcomes = [run_trial(*cell) for cell in cells]

    curves = []
    cursor = 0
    for entry in spec.algorithms:
        points = []
        for k in spec.sparsity_range:
            points.append(_aggregate(k, outcomes[cursor:cursor + spec.trials]))
            cursor += spec.trials
        curves.append(SuccessCurve(algorithm=entry, points=tuple(points)))
    return curves


def point_at(curve: SuccessCurve, sparsity: int) -> Optional[SuccessPoint]:
    for point in curve.points:
        if point.sparsity == sparsity:
            return point
    return None
