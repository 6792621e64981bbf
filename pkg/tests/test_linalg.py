import numpy as np
import pytest

from threshkit.linalg import (
    DimensionMismatchError,
    LinalgError,
    SpectralNormNotConverged,
    gaussian_matrix,
    landweber_step,
    load_matrix,
    load_vector,
    matvec,
    matvec_transpose,
    nonincreasing_rearrangement,
    save_csv,
    spectral_norm,
)


def test_gaussian_matrix_is_deterministic_per_seed():
    first = gaussian_matrix(2, 3, 7)
    second = gaussian_matrix(2, 3, 7)
    assert first.shape == (2, 3)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, gaussian_matrix(2, 3, 8))


def test_gaussian_matrix_moments():
    A = gaussian_matrix(128, 512, 2024)
    assert abs(A.mean()) < 0.05
    assert abs(A.var() - 1.0) < 0.1


@pytest.mark.parametrize("m, n", [(0, 5), (5, 0), (-1, 3)])
def test_gaussian_matrix_rejects_empty_shapes(m, n):
    with pytest.raises(LinalgError):
        gaussian_matrix(m, n, 1)


def test_matvec_hand_computed():
    assert np.array_equal(matvec(np.eye(2), np.array([3.0, -1.0])), [3.0, -1.0])
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matvec(A, np.array([1.0, 1.0])), [3.0, 7.0])
    assert np.array_equal(matvec_transpose(A, np.array([1.0, 0.0])), [1.0, 2.0])


def test_matvec_dimension_mismatch():
    A = np.ones((2, 3))
    with pytest.raises(DimensionMismatchError):
        matvec(A, np.ones(2))
    with pytest.raises(DimensionMismatchError):
        matvec_transpose(A, np.ones(3))


def test_spectral_norm_simple_matrices():
    tol = 1e-10
    assert spectral_norm(np.eye(3), tol=tol) == pytest.approx(1.0, rel=tol)
    assert spectral_norm(np.diag([3.0, 1.0, 0.5]), tol=tol) == pytest.approx(3.0, rel=tol)


def test_spectral_norm_matches_eigen_oracle_on_small_gaussian():
    A = gaussian_matrix(20, 50, 11)
    oracle = np.sqrt(np.linalg.eigvalsh(A @ A.T).max())
    assert spectral_norm(A) == pytest.approx(oracle, rel=1e-8)


@pytest.mark.parametrize("m, n, seed", [(20, 50, 11), (64, 256, 12), (128, 512, 13), (256, 1024, 14)])
def test_spectral_norm_error_within_tol(m, n, seed):
    tol = 1e-10
    A = gaussian_matrix(m, n, seed)
    oracle = np.sqrt(np.linalg.eigvalsh(A @ A.T).max())
    assert abs(spectral_norm(A, tol=tol) - oracle) <= tol * oracle


def test_spectral_norm_is_homogeneous():
    tol = 1e-10
    A = gaussian_matrix(15, 40, 3)
    base = spectral_norm(A, tol=tol)
    for c in (-2.5, 0.1, 7.0):
        assert spectral_norm(c * A, tol=tol) == pytest.approx(abs(c) * base, rel=2 * tol)


def test_spectral_norm_tall_matrix_uses_small_gram():
    tol = 1e-10
    A = gaussian_matrix(40, 10, 5)
    assert spectral_norm(A, tol=tol) == pytest.approx(np.linalg.norm(A, 2), rel=tol)


def test_spectral_norm_rank_one_matrix():
    A = np.outer(np.arange(1.0, 5.0), np.ones(6))
    assert spectral_norm(A) == pytest.approx(np.sqrt(30.0 * 6.0), rel=1e-10)


def test_spectral_norm_rejects_zero_matrix():
    with pytest.raises(LinalgError):
        spectral_norm(np.zeros((3, 3)))


def test_spectral_norm_reports_last_estimate():
    # 两个几乎相等的奇异值
    A = np.diag(np.concatenate([[1.0, 1.0 - 1e-9], np.linspace(0.5, 0.1, 48)]))
    with pytest.raises(SpectralNormNotConverged) as excinfo:
        spectral_norm(A, tol=1e-300, max_iter=10)
    assert excinfo.value.estimate == pytest.approx(1.0, rel=1e-6)


def test_landweber_step_fixed_at_zero_residual():
    A = gaussian_matrix(4, 6, 1)
    z = np.arange(6, dtype=float)
    assert np.array_equal(landweber_step(A, matvec(A, z), z, 0.3), z)


def test_landweber_step_hand_computed():
    out = landweber_step(np.eye(2), np.array([1.0, 1.0]), np.zeros(2), 0.5)
    assert np.array_equal(out, [0.5, 0.5])


def test_landweber_step_is_composition():
    A = gaussian_matrix(8, 12, 9)
    b = gaussian_matrix(1, 8, 10)[0]
    z = gaussian_matrix(1, 12, 11)[0]
    expected = z + 0.01 * matvec_transpose(A, b - matvec(A, z))
    assert np.array_equal(landweber_step(A, b, z, 0.01), expected)


def test_landweber_step_operator_norm_bound():
    rng = np.random.default_rng(0)
    for _ in range(50):
        A = rng.standard_normal((6, 9))
        b = rng.standard_normal(6)
        z = rng.standard_normal(9)
        mu = rng.uniform(0.001, 1.0)
        step = np.linalg.norm(landweber_step(A, b, z, mu) - z)
        bound = mu * np.linalg.norm(A, 2) * np.linalg.norm(b - A @ z)
        assert step <= bound * (1 + 1e-12)


def test_rearrangement_examples():
    r = nonincreasing_rearrangement(np.array([3.0, -5.0, 0.0, 4.0]))
    assert r.values.tolist() == [5.0, 4.0, 3.0, 0.0]
    assert r.permutation.tolist() == [1, 3, 0, 2]
    assert r.kth(2) == 4.0

    zeros = nonincreasing_rearrangement(np.zeros(3))
    assert zeros.values.tolist() == [0.0, 0.0, 0.0]
    assert zeros.permutation.tolist() == [0, 1, 2]

    tie = nonincreasing_rearrangement(np.array([-2.0, 2.0]))
    assert tie.values.tolist() == [2.0, 2.0]
    assert tie.permutation.tolist() == [0, 1]


def test_rearrangement_properties_on_random_vectors():
    rng = np.random.default_rng(42)
    for _ in range(10_000):
        n = int(rng.integers(1, 20))
        x = rng.standard_normal(n)
        # 人为制造并列
        x[rng.integers(0, n)] = x[0] * -1.0
        r = nonincreasing_rearrangement(x)
        assert np.all(r.values[:-1] >= r.values[1:])
        assert np.all(r.values >= 0)
        assert np.array_equal(np.sort(r.permutation), np.arange(n))
        assert np.array_equal(r.values, np.abs(x[r.permutation]))
        assert np.array_equal(r.restore(), np.abs(x))


def test_csv_round_trip(tmp_path):
    A = gaussian_matrix(3, 4, 21) / 3.0
    v = gaussian_matrix(1, 5, 22)[0] * 1e-7
    save_csv(tmp_path / "A.csv", A)
    save_csv(tmp_path / "v.csv", v)
    assert np.array_equal(load_matrix(tmp_path / "A.csv"), A)
    assert np.array_equal(load_vector(tmp_path / "v.csv", length=5), v)
    with pytest.raises(DimensionMismatchError):
        load_vector(tmp_path / "v.csv", length=4)
