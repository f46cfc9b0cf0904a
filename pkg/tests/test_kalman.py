import numpy as np

from conftest import block_deficient_system, random_system
from kalmanflow.kalman import analyze, build_kalman_matrix, decompose, invariance_residual
from kalmanflow.model import ControlSet, LinearSystem


def test_kalman_matrix_examples(double_integrator):
    assert np.array_equal(build_kalman_matrix(double_integrator), [[0, 1], [1, 0]])
    sys = LinearSystem(np.eye(2), np.array([[1.0], [0.0]]), ControlSet.box(1.0, 1))
    assert np.array_equal(build_kalman_matrix(sys), [[1, 1], [0, 0]])
    B = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    sys = LinearSystem(np.zeros((3, 3)), B, ControlSet.box(1.0, 2))
    K = build_kalman_matrix(sys)
    assert K.shape == (3, 6)
    assert np.array_equal(K[:, :2], B) and not np.any(K[:, 2:])


def test_analyze_verdicts(double_integrator, deficient_diag):
    a = analyze(double_integrator)
    assert a.rank == 2 and a.controllable and a.describe() == "Controllable"
    d = analyze(deficient_diag)
    assert d.rank == 1 and d.describe() == "Deficient(1)"
    assert np.allclose(np.abs(d.subspace_basis[:, 0]), [1.0, 0.0])
    scalar = LinearSystem(np.array([[-3.0]]), np.array([[0.2]]), ControlSet.box(1.0, 1))
    assert analyze(scalar).controllable


def test_decompose_aligned(deficient_diag):
    dec = decompose(deficient_diag)
    assert dec.n_prime == 1
    assert np.allclose(dec.P, np.eye(2))


def test_decompose_controllable(double_integrator):
    dec = decompose(double_integrator)
    assert dec.n_prime == 2
    assert dec.A_new[2:, :2].size == 0


def test_decompose_block_structure():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(3, 6))
        r = int(rng.integers(1, n))
        sys, _ = block_deficient_system(rng, n, r, int(rng.integers(1, 3)))
        dec = decompose(sys)
        assert dec.n_prime == r
        assert np.allclose(dec.P.T @ dec.P, np.eye(n), atol=1e-12)
        assert np.max(np.abs(dec.A_new[r:, :r])) < 1e-10
        assert np.max(np.abs(dec.B_new[r:])) < 1e-10
        assert invariance_residual(sys.A, dec.P[:, :r]) < 1e-10


def test_rank_is_similarity_invariant():
    rng = np.random.default_rng(8)
    for _ in range(20):
        sys = random_system(rng)
        Q, _ = np.linalg.qr(rng.standard_normal((sys.n, sys.n)))
        rot = LinearSystem(Q @ sys.A @ Q.T, Q @ sys.B, sys.control_set)
        assert decompose(rot).n_prime == decompose(sys).n_prime
