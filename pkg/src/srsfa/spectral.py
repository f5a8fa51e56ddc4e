"""Symmetric and symmetric-definite eigenvalue machinery.

A generalized problem ``A W = B W Lambda`` is held as a :class:`MatrixPencil`.
It can be solved directly, after symmetric normalization
``B^{-1/2} A B^{-T/2}`` or after left normalization ``B^{-1} A``; all routes
return B-orthonormal eigenvectors with a deterministic sign convention
(largest-magnitude entry positive, ties to the lowest index).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg

from .errors import DefinitenessError, DimensionError, DomainError, SymmetryError

Ordering = Literal["ascending", "descending"]
QChoice = Literal["zca", "pca"]

SYMMETRY_TOL = 1e-10
#: eigenvalues of a PSD matrix below this fraction of the largest count as zero
RANK_TOL = 1e-10
#: eigenvalues closer than this are treated as one degenerate cluster
DEGENERACY_GAP = 1e-9


def _square(m, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {m.shape}")
    return m


def _check_symmetric(m: np.ndarray, name: str, tol: float = SYMMETRY_TOL) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if m.size and np.max(np.abs(m - m.T)) > tol * scale:
        raise SymmetryError(f"{name} is not symmetric (max asymmetry {np.max(np.abs(m - m.T)):.3g})")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class MatrixPencil:
    """Ordered pair ``(a, b)`` with ``a`` symmetric and ``b`` symmetric PSD."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = _check_symmetric(_square(self.a, "a"), "a")
        b = _check_symmetric(_square(self.b, "b"), "b")
        if a.shape != b.shape:
            raise DimensionError(f"pencil matrices differ in shape: {a.shape} vs {b.shape}")
        if b.size and np.min(np.linalg.eigvalsh(b)) < -1e-10 * max(1.0, float(np.max(np.abs(b)))):
            raise DefinitenessError("constraint matrix b is not positive semidefinite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class EigenSystem:
    """Sorted eigenvalues with eigenvectors stored as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ordering: Ordering = "ascending"
    normalization: Literal["euclidean", "b_weighted"] = "euclidean"

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def head(self, m: int) -> "EigenSystem":
        return EigenSystem(self.eigenvalues[:m], self.eigenvectors[:, :m], self.ordering, self.normalization)


@dataclass(frozen=True)
class MatrixRoot:
    """``root @ root.T == b`` and ``inverse_root == inv(root)``."""

    root: np.ndarray
    inverse_root: np.ndarray
    q_choice: QChoice = "zca"


def fix_signs(W: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry is positive (lowest index wins ties)."""
    W = np.array(W, dtype=float, copy=True)
    if W.size == 0:
        return W
    # argmax returns the first maximum, which is the lowest-index tie-break
    idx = np.argmax(np.round(np.abs(W), 12), axis=0)
    signs = np.sign(W[idx, np.arange(W.shape[1])])
    signs[signs == 0] = 1.0
    return W * signs


def _order(values: np.ndarray, ordering: Ordering) -> np.ndarray:
    idx = np.argsort(values, kind="stable")
    return idx[::-1] if ordering == "descending" else idx


def _clusters(values: np.ndarray, gap: float = DEGENERACY_GAP) -> list[np.ndarray]:
    """Runs of consecutive (already sorted) eigenvalues closer than ``gap``."""
    groups, start = [], 0
    for k in range(1, len(values) + 1):
        if k == len(values) or abs(values[k] - values[k - 1]) >= gap * max(1.0, abs(values[k - 1])):
            groups.append(np.arange(start, k))
            start = k
    return groups


def _b_orthonormalize(W: np.ndarray, values: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Normalize to ``W^T b W = 1`` and re-orthogonalize inside degenerate clusters."""
    W = W.copy()
    for cluster in _clusters(values):
        block = W[:, cluster]
        G = block.T @ b @ block
        C = np.linalg.cholesky(0.5 * (G + G.T))
        W[:, cluster] = scipy.linalg.solve_triangular(C, block.T, lower=True).T
    return W


def solve_symmetric(a, ordering: Ordering = "ascending") -> EigenSystem:
    """Spectral decomposition of a real symmetric matrix."""
    a = _check_symmetric(_square(a, "a"), "a")
    vals, vecs = np.linalg.eigh(a)
    idx = _order(vals, ordering)
    return EigenSystem(vals[idx], fix_signs(vecs[:, idx]), ordering, "euclidean")


def psd_sqrt(b, q_choice: QChoice = "zca") -> MatrixRoot:
    """Positive root of an SPD matrix.

    ``zca`` gives the symmetric root ``U D^{1/2} U^T``; ``pca`` gives
    ``U D^{1/2}`` whose inverse ``D^{-1/2} U^T`` is the PCA whitening map.
    """
    b = _check_symmetric(_square(b, "b"), "b")
    d, U = np.linalg.eigh(b)
    if d.size and d.min() <= 1e-12:
        raise DefinitenessError(f"matrix is not positive definite (min eigenvalue {d.min():.3g})")
    s = np.sqrt(d)
    if q_choice == "zca":
        root = (U * s) @ U.T
        inv = (U / s) @ U.T
        return MatrixRoot(0.5 * (root + root.T), 0.5 * (inv + inv.T), "zca")
    if q_choice == "pca":
        return MatrixRoot(U * s, (U / s).T, "pca")
    raise DomainError(f"unknown q_choice {q_choice!r}")


def regularize_diagonal(b, epsilon: float) -> np.ndarray:
    """``b + epsilon * 1``."""
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    b = _square(b, "b")
    return b + epsilon * np.eye(b.shape[0])


def symmetric_normalize(pencil: MatrixPencil, q_choice: QChoice = "zca"):
    """Return ``(B^{-1/2} A B^{-T/2}, back_transform)``.

    Generalized eigenvectors are ``back_transform @ W_tilde`` where ``W_tilde``
    are eigenvectors of the normalized matrix.
    """
    r = psd_sqrt(pencil.b, q_choice)
    S = r.inverse_root @ pencil.a @ r.inverse_root.T
    return 0.5 * (S + S.T), r.inverse_root.T


def left_normalize(pencil: MatrixPencil) -> np.ndarray:
    """``B^{-1} A`` (generally not symmetric)."""
    try:
        c, low = scipy.linalg.cho_factor(pencil.b)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("constraint matrix b is singular; regularize it first") from exc
    return scipy.linalg.cho_solve((c, low), pencil.a)


def solve_generalized(
    pencil: MatrixPencil,
    ordering: Ordering = "ascending",
    strategy: Literal["symmetric", "left", "direct"] = "symmetric",
    q_choice: QChoice = "zca",
) -> EigenSystem:
    """Solve ``A W = B W Lambda`` with B-orthonormal eigenvectors."""
    if strategy == "symmetric":
        S, back = symmetric_normalize(pencil, q_choice)
        vals, Wt = np.linalg.eigh(S)
        W = back @ Wt
    elif strategy == "left":
        L = left_normalize(pencil)
        vals, W = scipy.linalg.eig(L)
        # a symmetric-definite pencil has real spectrum; drop rounding residue
        vals, W = vals.real, W.real
    elif strategy == "direct":
        try:
            vals, W = scipy.linalg.eigh(pencil.a, pencil.b)
        except np.linalg.LinAlgError as exc:
            raise DefinitenessError("constraint matrix b is not positive definite") from exc
    else:
        raise DomainError(f"unknown strategy {strategy!r}")
    idx = _order(vals, ordering)
    vals, W = vals[idx], W[:, idx]
    W = _b_orthonormalize(W, vals, pencil.b)
    return EigenSystem(vals, fix_signs(W), ordering, "b_weighted")


def range_basis(b, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the range of a PSD matrix."""
    d, U = np.linalg.eigh(_check_symmetric(_square(b, "b"), "b"))
    keep = d > tol * max(float(d.max(initial=0.0)), np.finfo(float).tiny)
    return U[:, keep]


def pseudoinverse_solve(
    pencil: MatrixPencil,
    ordering: Ordering = "ascending",
    strategy: Literal["symmetric", "left", "direct"] = "symmetric",
    q_choice: QChoice = "zca",
) -> EigenSystem:
    """Solve the pencil restricted to the range of ``b``.

    Returns ``rank(b)`` eigenpairs; eigenvectors are mapped back to the full
    space and lie in the range of ``b``.
    """
    U = range_basis(pencil.b)
    reduced = MatrixPencil(U.T @ pencil.a @ U, U.T @ pencil.b @ U)
    sol = solve_generalized(reduced, ordering, strategy, q_choice)
    W = U @ sol.eigenvectors
    return EigenSystem(sol.eigenvalues, fix_signs(W), ordering, "b_weighted")


def weighted_inner_product(u, v, weight_matrix) -> float:
    """``u^T G v``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    G = _square(weight_matrix, "weight_matrix")
    if u.shape != (G.shape[0],) or v.shape != (G.shape[0],):
        raise DimensionError("vector lengths do not match the weight matrix")
    return float(u @ G @ v)
