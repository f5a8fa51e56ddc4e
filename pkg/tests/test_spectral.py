import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srsfa import spectral
from srsfa.markov import random_ergodic_chain, stationary_distribution
from srsfa.errors import DefinitenessError, DomainError, SymmetryError


def random_spd(rng, n, floor=0.5):
    X = rng.normal(size=(n, n))
    return X @ X.T + floor * np.eye(n)


def random_sym(rng, n):
    X = rng.normal(size=(n, n))
    return X + X.T


def test_solve_symmetric_examples(rng):
    assert np.allclose(spectral.solve_symmetric(np.eye(4)).eigenvalues, 1)
    assert np.allclose(spectral.solve_symmetric(np.diag([3.0, 1.0, 2.0])).eigenvalues, [1, 2, 3])
    assert np.allclose(spectral.solve_symmetric(np.diag([3.0, 1.0, 2.0]), "descending").eigenvalues, [3, 2, 1])
    a = random_sym(rng, 10)
    es = spectral.solve_symmetric(a)
    W, lam = es.eigenvectors, es.eigenvalues
    assert np.linalg.norm(W @ np.diag(lam) @ W.T - a) < 1e-9 * np.linalg.norm(a) * np.sqrt(10)
    assert np.linalg.norm(a @ W - W * lam) <= 1e-9 * np.linalg.norm(a) * np.sqrt(10)


def test_solve_symmetric_rejects_asymmetric():
    with pytest.raises(SymmetryError):
        spectral.solve_symmetric([[1.0, 2.0], [0.0, 1.0]])


def test_sign_convention():
    W = spectral.fix_signs(np.array([[0.1, -0.5], [-0.9, 0.5]]))
    assert np.allclose(W, [[-0.1, 0.5], [0.9, -0.5]])


def test_psd_sqrt_examples(rng):
    r = spectral.psd_sqrt(np.eye(3))
    assert np.allclose(r.root, np.eye(3)) and np.allclose(r.inverse_root, np.eye(3))
    r = spectral.psd_sqrt(np.diag([4.0, 9.0]), "zca")
    assert np.allclose(r.root, np.diag([2.0, 3.0]))
    assert np.allclose(r.inverse_root, np.diag([0.5, 1 / 3]))
    with pytest.raises(DefinitenessError):
        spectral.psd_sqrt(np.diag([1.0, 0.0]))
    with pytest.raises(DomainError):
        spectral.psd_sqrt(np.eye(2), "other")


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**32 - 1), st.sampled_from(["zca", "pca"]))
def test_psd_sqrt_property(n, seed, q):
    b = random_spd(np.random.default_rng(seed), n)
    r = spectral.psd_sqrt(b, q)
    assert np.max(np.abs(r.root @ r.root.T - b)) < 1e-9 * max(1, np.abs(b).max())
    assert np.max(np.abs(r.inverse_root @ r.root - np.eye(n))) < 1e-8
    assert np.max(np.abs(r.inverse_root.T @ r.inverse_root - np.linalg.inv(b))) < 1e-9 * max(
        1, np.abs(np.linalg.inv(b)).max()
    )
    if q == "zca":
        assert np.max(np.abs(r.root - r.root.T)) < 1e-10
        assert np.max(np.abs(r.inverse_root - r.inverse_root.T)) < 1e-10


def test_regularize_diagonal(rng):
    assert np.array_equal(spectral.regularize_diagonal(np.zeros((3, 3)), 1.0), np.eye(3))
    assert np.allclose(spectral.regularize_diagonal(np.diag([1.0, 0.0]), 0.5), np.diag([1.5, 0.5]))
    pi = rng.dirichlet(np.ones(6))
    b = np.diag(pi) - np.outer(pi, pi)
    assert np.linalg.eigvalsh(spectral.regularize_diagonal(b, 1e-6)).min() >= 1e-6 - 1e-12
    with pytest.raises(DomainError):
        spectral.regularize_diagonal(b, 0.0)


def test_regularize_preserves_eigenvectors(rng):
    b = random_spd(rng, 6)
    _, U = np.linalg.eigh(b)
    _, V = np.linalg.eigh(spectral.regularize_diagonal(b, 0.3))
    for k in range(6):
        assert 1 - abs(U[:, k] @ V[:, k]) < 1e-8


def test_normalizations_on_diagonal_pencil():
    pencil = spectral.MatrixPencil(np.diag([2.0, 8.0]), np.diag([1.0, 4.0]))
    S, _ = spectral.symmetric_normalize(pencil)
    assert np.allclose(S, np.diag([2.0, 2.0]))
    assert np.allclose(spectral.left_normalize(pencil), np.diag([2.0, 2.0]))
    assert np.allclose(spectral.solve_generalized(pencil).eigenvalues, [2.0, 2.0])


def test_identity_constraint_is_noop(rng):
    a = random_sym(rng, 5)
    pencil = spectral.MatrixPencil(a, np.eye(5))
    assert np.allclose(spectral.symmetric_normalize(pencil)[0], a)
    assert np.allclose(spectral.left_normalize(pencil), a)


def test_equal_pencil_gives_ones(rng):
    b = random_spd(rng, 4)
    assert np.allclose(spectral.solve_generalized(spectral.MatrixPencil(b, b)).eigenvalues, 1)


def test_singular_constraint_raises():
    pencil = spectral.MatrixPencil(np.eye(2), np.diag([1.0, 0.0]))
    with pytest.raises(DefinitenessError):
        spectral.symmetric_normalize(pencil)
    with pytest.raises(DefinitenessError):
        spectral.left_normalize(pencil)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_strategies_agree(n, seed):
    rng = np.random.default_rng(seed)
    pencil = spectral.MatrixPencil(random_sym(rng, n), random_spd(rng, n))
    ref = spectral.solve_generalized(pencil, strategy="direct")
    scale = np.abs(pencil.a).max()
    for strategy in ("symmetric", "left"):
        for q in ("zca", "pca"):
            es = spectral.solve_generalized(pencil, strategy=strategy, q_choice=q)
            assert np.max(np.abs(es.eigenvalues - ref.eigenvalues)) < 1e-8 * max(1, scale)
            W = es.eigenvectors
            assert np.max(np.abs(W.T @ pencil.b @ W - np.eye(n))) < 1e-8
            assert np.max(np.abs(pencil.a @ W - pencil.b @ W * es.eigenvalues)) < 1e-8 * max(1, scale)
            gaps = np.diff(ref.eigenvalues)
            if np.min(gaps) > 1e-3:
                assert np.max(np.abs(W - ref.eigenvectors)) < 1e-6


def test_ordering_flag(rng):
    pencil = spectral.MatrixPencil(random_sym(rng, 5), random_spd(rng, 5))
    asc = spectral.solve_generalized(pencil, "ascending")
    desc = spectral.solve_generalized(pencil, "descending")
    assert np.all(np.diff(asc.eigenvalues) >= 0) and np.all(np.diff(desc.eigenvalues) <= 0)
    assert asc.normalization == "b_weighted"


def test_degenerate_cluster_is_b_orthonormal(rng):
    b = random_spd(rng, 5)
    es = spectral.solve_generalized(spectral.MatrixPencil(b, b), strategy="left")
    assert np.max(np.abs(es.eigenvectors.T @ b @ es.eigenvectors - np.eye(5))) < 1e-8


def test_pseudoinverse_examples(rng):
    es = spectral.pseudoinverse_solve(spectral.MatrixPencil(np.diag([3.0, 7.0]), np.diag([1.0, 0.0])))
    assert len(es) == 1
    assert np.allclose(es.eigenvalues, [3.0]) and np.allclose(es.eigenvectors[:, 0], [1.0, 0.0])
    pencil = spectral.MatrixPencil(random_sym(rng, 4), random_spd(rng, 4))
    assert np.allclose(spectral.pseudoinverse_solve(pencil).eigenvalues, spectral.solve_generalized(pencil).eigenvalues)


def test_pseudoinverse_matches_noise_regularized(rng):
    # centered one-hot statistics of a chain: rank n-1 with the constant vector as null direction
    P = random_ergodic_chain(6, rng)
    pi = stationary_distribution(P)
    F = pi[:, None] * P
    a = 0.5 * (F + F.T) - np.outer(pi, pi)
    b = np.diag(pi) - np.outer(pi, pi)
    pinv = spectral.pseudoinverse_solve(spectral.MatrixPencil(a, b), "descending")
    reg = spectral.solve_generalized(spectral.MatrixPencil(a, b + 1e-8 * np.eye(6)), "descending")
    assert len(pinv) == 5
    W = reg.eigenvectors / np.linalg.norm(reg.eigenvectors, axis=0)
    constant = int(np.argmax(np.abs(W.T @ np.ones(6))))
    kept = [k for k in range(6) if k != constant]
    assert np.allclose(pinv.eigenvalues, reg.eigenvalues[kept], atol=1e-4)
    for k, j in enumerate(kept):
        u = pinv.eigenvectors[:, k] / np.linalg.norm(pinv.eigenvectors[:, k])
        assert 1 - abs(u @ W[:, j]) < 1e-4


def test_weighted_inner_product(rng):
    u, v = rng.normal(size=4), rng.normal(size=4)
    assert spectral.weighted_inner_product(u, v, np.eye(4)) == pytest.approx(u @ v)
    G = random_spd(rng, 4)
    brute = sum(u[i] * G[i, j] * v[j] for i in range(4) for j in range(4))
    assert spectral.weighted_inner_product(u, v, G) == pytest.approx(brute)
    W = spectral.solve_generalized(spectral.MatrixPencil(random_sym(rng, 4), G)).eigenvectors
    gram = [[spectral.weighted_inner_product(W[:, i], W[:, j], G) for j in range(4)] for i in range(4)]
    assert np.allclose(gram, np.eye(4), atol=1e-8)


def test_pencil_validation():
    with pytest.raises(SymmetryError):
        spectral.MatrixPencil([[1.0, 1.0], [0.0, 1.0]], np.eye(2))
    with pytest.raises(DefinitenessError):
        spectral.MatrixPencil(np.eye(2), np.diag([1.0, -1.0]))
