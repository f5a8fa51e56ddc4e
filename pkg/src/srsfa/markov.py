"""Finite Markov chains and the successor-representation family.

Transition matrices and stationary distributions are plain ``numpy`` arrays;
validation happens at the boundary of every public function.  SR-type
matrices carry their discount, horizon and construction kind in an
:class:`SrMatrix` record so downstream code can tell them apart.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DimensionError, DomainError, ErgodicityError, SingularityError

SrKind = Literal["successor", "predecessor", "additive_ir", "convex_ir", "sr_of_padd"]

#: entries at or below this are structural zeros when building the transition graph
STRUCTURAL_ZERO = 1e-15
ROW_SUM_TOL = 1e-12


def check_transition(P, tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Validate a row-stochastic matrix and return it as a float array."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise DimensionError(f"transition matrix must be square and non-empty, got {P.shape}")
    if np.any(P < 0):
        raise DomainError("transition matrix has negative entries")
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > tol:
        raise DomainError("transition matrix rows do not sum to 1")
    return P


def _check_distribution(pi, n: int, positive: bool = True) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (n,):
        raise DimensionError(f"distribution must have shape ({n},), got {pi.shape}")
    if positive and np.any(pi <= 0):
        raise SingularityError("stationary distribution has zero entries")
    return pi


@dataclass(frozen=True)
class MdpModel:
    """Finite MDP model: kernel ``p(s'|s,a)`` of shape (S, A, S) and policy ``mu(a|s)`` of shape (S, A)."""

    kernel: np.ndarray
    policy: np.ndarray

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=float)
        policy = np.asarray(self.policy, dtype=float)
        if kernel.ndim != 3 or kernel.shape[0] != kernel.shape[2]:
            raise DimensionError(f"kernel must have shape (S, A, S), got {kernel.shape}")
        if policy.shape != kernel.shape[:2]:
            raise DimensionError(
                f"policy shape {policy.shape} does not match kernel (S, A) = {kernel.shape[:2]}"
            )
        if np.any(kernel < 0) or np.max(np.abs(kernel.sum(axis=2) - 1.0)) > ROW_SUM_TOL:
            raise DomainError("every (s, a) slice of the kernel must be a probability vector")
        if np.any(policy < 0) or np.max(np.abs(policy.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise DomainError("every policy row must be a probability vector")
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "policy", policy)

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_actions(self) -> int:
        return self.kernel.shape[1]


def build_policy_transition(model: MdpModel) -> np.ndarray:
    """Combine kernel and policy into ``P_ij = sum_a mu(a|s_i) p(s_j|s_i,a)``."""
    return np.einsum("sa,sat->st", model.policy, model.kernel)


# ---------------------------------------------------------------------------
# graph structure


def _adjacency(P: np.ndarray) -> list[np.ndarray]:
    return [np.flatnonzero(row > STRUCTURAL_ZERO) for row in P]


def period(P) -> int:
    """Period of an irreducible chain (gcd of cycle lengths) via BFS levels."""
    P = check_transition(P)
    adj = _adjacency(P)
    n = P.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    queue = deque([0])
    g = 0
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                g = math.gcd(g, int(level[u] + 1 - level[v]))
    return g


def is_irreducible(P) -> bool:
    P = check_transition(P)
    graph = csr_matrix((P > STRUCTURAL_ZERO).astype(np.int8))
    n_comp, _ = connected_components(graph, directed=True, connection="strong")
    return n_comp == 1


def is_ergodic(P) -> bool:
    """True iff the transition graph is strongly connected and aperiodic."""
    return is_irreducible(P) and period(P) == 1


# ---------------------------------------------------------------------------
# stationary distribution and reversibility


def stationary_distribution(
    P, tol: float = 1e-12, max_iter: int = 10**6, require_aperiodic: bool = True
) -> np.ndarray:
    """Unique stationary distribution of an ergodic chain.

    The left eigenvector for the eigenvalue closest to one is extracted first;
    if its residual ``|pi P - pi|`` exceeds ``1e-10`` power iteration takes over.
    ``require_aperiodic=False`` also accepts irreducible periodic chains, whose
    stationary distribution is still unique.
    """
    P = check_transition(P)
    ok = is_ergodic(P) if require_aperiodic else is_irreducible(P)
    if not ok:
        raise ErgodicityError("stationary distribution requested for a non-ergodic chain")
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    vals, vecs = scipy.linalg.eig(P.T)
    k = int(np.argmin(np.abs(vals - 1.0)))
    pi = np.real(vecs[:, k])
    pi = pi / pi.sum()
    if np.all(pi > 0) and np.max(np.abs(pi @ P - pi)) <= 1e-10:
        return pi
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ P
        if np.max(np.abs(nxt - pi)) < tol:
            pi = nxt
            break
        pi = nxt
    return pi / pi.sum()


def flow_matrix(P, pi) -> np.ndarray:
    """Stationary probability flow ``Pi P``."""
    P = check_transition(P)
    pi = _check_distribution(pi, P.shape[0], positive=False)
    return pi[:, None] * P


def is_reversible(P, pi, tol: float = 1e-10) -> bool:
    F = flow_matrix(P, pi)
    return bool(np.max(np.abs(F - F.T)) <= tol)


def time_reversal(P, pi) -> np.ndarray:
    """``Pi^-1 P^T Pi``."""
    P = check_transition(P)
    pi = _check_distribution(pi, P.shape[0])
    return P.T * pi[None, :] / pi[:, None]


def additive_reversibilization(P, pi) -> np.ndarray:
    return 0.5 * (check_transition(P) + time_reversal(P, pi))


def convex_reversibilization(P, pi, weight: float) -> np.ndarray:
    if not 0.0 <= weight <= 1.0:
        raise DomainError(f"weight must lie in [0, 1], got {weight}")
    return weight * check_transition(P) + (1.0 - weight) * time_reversal(P, pi)


def k_step(P, k: int) -> np.ndarray:
    """``P^k`` by repeated multiplication (``P^0`` is the identity)."""
    P = check_transition(P)
    if k < 0:
        raise DomainError("k must be non-negative")
    out = np.eye(P.shape[0])
    for _ in range(k):
        out = out @ P
    return out


def directed_laplacian(P, pi) -> np.ndarray:
    """Combinatorial directed Laplacian ``Pi - (Pi P + (Pi P)^T) / 2``."""
    P = check_transition(P)
    pi = _check_distribution(pi, P.shape[0])
    F = pi[:, None] * P
    return np.diag(pi) - 0.5 * (F + F.T)


# ---------------------------------------------------------------------------
# successor representation family


@dataclass(frozen=True)
class SrMatrix:
    """An SR-type matrix together with how it was built.

    ``horizon`` is ``None`` for the infinite sum and ``k_max`` for the partial
    sum ``sum_{k=0}^{k_max}``.  ``weight`` is only meaningful for ``convex_ir``.
    """

    entries: np.ndarray
    discount: float
    horizon: Optional[int] = None
    kind: SrKind = "successor"
    weight: Optional[float] = None
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def n_states(self) -> int:
        return self.entries.shape[0]

    @property
    def infinite(self) -> bool:
        return self.horizon is None


def _check_discount(gamma: float) -> float:
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"discount must lie in (0, 1), got {gamma}")
    return float(gamma)


def _neumann(P: np.ndarray, gamma: float, horizon: Optional[int]) -> np.ndarray:
    n = P.shape[0]
    if horizon is None:
        return np.linalg.solve(np.eye(n) - gamma * P, np.eye(n))
    if horizon < 0:
        raise DomainError("finite horizon must be non-negative")
    total = np.zeros((n, n))
    Pk = np.eye(n)
    for k in range(horizon + 1):
        total += gamma**k * Pk
        Pk = Pk @ P
    return total


def sr_matrix(P, gamma: float, horizon: Optional[int] = None) -> SrMatrix:
    """Successor representation ``(1 - gamma P)^-1`` or its Neumann partial sum."""
    P = check_transition(P)
    gamma = _check_discount(gamma)
    return SrMatrix(_neumann(P, gamma, horizon), gamma, horizon, "successor")


def predecessor_representation(P, pi, gamma: float, horizon: Optional[int] = None) -> SrMatrix:
    """SR of the time-reversed chain."""
    gamma = _check_discount(gamma)
    M_rev = _neumann(time_reversal(P, pi), gamma, horizon)
    return SrMatrix(M_rev, gamma, horizon, "predecessor")


def predecessor_from_sr(M: SrMatrix, pi) -> np.ndarray:
    """``Pi^-1 M^T Pi``; equals :func:`predecessor_representation` for the same chain."""
    pi = _check_distribution(pi, M.n_states)
    return M.entries.T * pi[None, :] / pi[:, None]


def ir_additive(P, pi, gamma: float, horizon: Optional[int] = None) -> SrMatrix:
    """Intercessor representation ``(M + M_rev) / 2``."""
    M = sr_matrix(P, gamma, horizon).entries
    M_rev = predecessor_representation(P, pi, gamma, horizon).entries
    return SrMatrix(0.5 * (M + M_rev), gamma, horizon, "additive_ir")


def ir_additive_series(P, pi, gamma: float, k_max: int) -> np.ndarray:
    """``sum_k gamma^k (P^k)_add`` accumulated term by term (independent route to ``M_add``)."""
    P = check_transition(P)
    gamma = _check_discount(gamma)
    pi = _check_distribution(pi, P.shape[0])
    total = np.zeros_like(P)
    Pk = np.eye(P.shape[0])
    for k in range(k_max + 1):
        total += gamma**k * additive_reversibilization(Pk, pi)
        Pk = Pk @ P
    return total


def ir_convex(P, pi, gamma: float, horizon: Optional[int] = None, weight: float = 0.5) -> SrMatrix:
    if not 0.0 <= weight <= 1.0:
        raise DomainError(f"weight must lie in [0, 1], got {weight}")
    M = sr_matrix(P, gamma, horizon).entries
    M_rev = predecessor_representation(P, pi, gamma, horizon).entries
    return SrMatrix(weight * M + (1.0 - weight) * M_rev, gamma, horizon, "convex_ir", weight)


def sr_of_padd(P, pi, gamma: float, horizon: Optional[int] = None) -> SrMatrix:
    """Regular SR of the additively reversibilized chain."""
    gamma = _check_discount(gamma)
    return SrMatrix(_neumann(additive_reversibilization(P, pi), gamma, horizon), gamma, horizon, "sr_of_padd")


def value_function(M: SrMatrix, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (M.n_states,):
        raise DimensionError(f"reward vector must have shape ({M.n_states},), got {r.shape}")
    if not np.all(np.isfinite(r)):
        raise DomainError("reward vector has non-finite entries")
    return M.entries @ r


def sr_entry_monte_carlo(
    P,
    gamma: float,
    i: int,
    j: int,
    k_max: int,
    n_rollouts: int,
    seed: int,
    return_stderr: bool = False,
):
    """Monte-Carlo estimate of ``M_ij`` from discounted occupancy of rollouts started at ``i``.

    Each rollout draws its uniforms from its own child of ``SeedSequence(seed)``,
    so the estimate does not depend on how rollouts are batched.
    """
    P = check_transition(P)
    gamma = _check_discount(gamma)
    n = P.shape[0]
    cdf = np.cumsum(P, axis=1)
    cdf /= cdf[:, -1:]
    children = np.random.SeedSequence(seed).spawn(n_rollouts)
    U = np.stack([np.random.Generator(np.random.Philox(c)).random(k_max) for c in children]) if k_max else None
    state = np.full(n_rollouts, i)
    returns = (state == j).astype(float)
    disc = 1.0
    for k in range(k_max):
        rows = cdf[state]
        state = np.minimum((rows <= U[:, k : k + 1]).sum(axis=1), n - 1)
        disc *= gamma
        returns += disc * (state == j)
    est = float(returns.mean())
    if return_stderr:
        stderr = float(returns.std(ddof=1) / math.sqrt(n_rollouts)) if n_rollouts > 1 else 0.0
        return est, stderr
    return est


# ---------------------------------------------------------------------------
# eigen relations between P, P^k and M


def _principal_sines(A: np.ndarray, B: np.ndarray) -> float:
    """Largest sine of the principal angles between column spans of A and B."""
    Qa, _ = np.linalg.qr(A)
    Qb, _ = np.linalg.qr(B)
    s = np.linalg.svd(Qa.conj().T @ Qb, compute_uv=False)
    return float(np.sqrt(max(0.0, 1.0 - np.min(s) ** 2)))


def _clusters(values: np.ndarray, gap: float = 1e-9) -> list[np.ndarray]:
    order = np.lexsort((np.imag(values), np.real(values)))
    groups, current = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if abs(values[b] - values[a]) < gap:
            current.append(b)
        else:
            groups.append(np.array(current))
            current = [b]
    groups.append(np.array(current))
    return groups


def _eig_pair(X: np.ndarray, pi: Optional[np.ndarray]):
    """Eigendecomposition; symmetric route when ``Pi X`` is symmetric."""
    if pi is not None:
        s = np.sqrt(pi)
        S = s[:, None] * X / s[None, :]
        S = 0.5 * (S + S.T)
        vals, U = np.linalg.eigh(S)
        return vals.astype(complex), (U / s[:, None]).astype(complex)
    vals, V = scipy.linalg.eig(X)
    return vals, V


def eigen_relations_check(P, gamma: float, tol: float = 1e-8, powers=(2, 3)) -> list[dict]:
    """Check ``lambda -> lambda^k`` and ``lambda -> 1/(1 - gamma lambda)`` eigen maps.

    Eigenvectors of P are matched to eigenvectors of ``P^k`` and the infinite
    horizon SR by maximal normalized overlap; clusters of P-eigenvalues closer
    than 1e-9 are compared as subspaces.  Every returned record holds the
    eigenvalue residual, the subspace sine and a ``passed`` flag.
    """
    P = check_transition(P)
    gamma = _check_discount(gamma)
    pi = None
    if is_ergodic(P):
        pi_c = stationary_distribution(P)
        if is_reversible(P, pi_c, tol=1e-12):
            pi = pi_c
    lam, V = _eig_pair(P, pi)
    targets = {f"P^{k}": (k_step(P, k), lambda x, k=k: x**k) for k in powers}
    targets["M"] = (sr_matrix(P, gamma).entries, lambda x: 1.0 / (1.0 - gamma * x))
    report = []
    for name, (X, fmap) in targets.items():
        mu, U = _eig_pair(X, pi)
        Un = U / np.linalg.norm(U, axis=0)
        for cluster in _clusters(lam):
            Vc = V[:, cluster]
            predicted = fmap(lam[cluster])
            if len(cluster) == 1:
                v = Vc[:, 0] / np.linalg.norm(Vc[:, 0])
                overlap = np.abs(Un.conj().T @ v)
                m = int(np.argmax(overlap))
                ev_res = float(abs(mu[m] - predicted[0]))
                sine = float(np.sqrt(max(0.0, 1.0 - overlap[m] ** 2)))
            else:
                # pick the len(cluster) eigenvectors of X closest to the predicted values
                dist = np.min(np.abs(mu[:, None] - predicted[None, :]), axis=1)
                chosen = np.argsort(dist)[: len(cluster)]
                ev_res = float(np.max(np.abs(np.sort_complex(mu[chosen]) - np.sort_complex(predicted))))
                sine = _principal_sines(Vc, U[:, chosen])
            # direct residual of X v = f(lambda) v, independent of the matching
            resid = float(
                np.max(np.linalg.norm(X @ Vc - Vc * predicted[None, :], axis=0) / np.linalg.norm(Vc, axis=0))
            )
            report.append(
                {
                    "matrix": name,
                    "eigenvalue_P": complex(lam[cluster[0]]),
                    "multiplicity": int(len(cluster)),
                    "predicted": complex(predicted[0]),
                    "eigenvalue_residual": ev_res,
                    "vector_residual": resid,
                    "subspace_sine": sine,
                    "passed": bool(ev_res < tol and resid < tol),
                }
            )
    return report


def ir_property_check(P, gamma: float, horizon: Optional[int] = None, tol: float = 1e-8) -> dict:
    """Symmetry, reality and weighted-orthogonality properties of ``M_add``.

    Eigenvectors come from a general (non-symmetric) eigensolver so the
    orthogonality test is not implied by construction.  Degenerate eigenspaces
    are Pi-orthogonalized within block before testing.
    """
    P = check_transition(P)
    pi = stationary_distribution(P, require_aperiodic=False)
    M_add = ir_additive(P, pi, gamma, horizon).entries
    F = pi[:, None] * M_add
    s = np.sqrt(pi)
    S = s[:, None] * M_add / s[None, :]
    vals, L, R = scipy.linalg.eig(M_add, left=True, right=True)
    imag = float(max(np.max(np.abs(vals.imag)), np.max(np.abs(R.imag)), np.max(np.abs(L.imag))))
    vals, L, R = vals.real, L.real, R.real
    R = _block_orthonormalize(R, vals, np.diag(pi))
    L = _block_orthonormalize(L, vals, np.diag(1.0 / pi))
    gram_r = R.T @ (pi[:, None] * R)
    gram_l = L.T @ (L / pi[:, None])
    off = lambda G: float(np.max(np.abs(G - np.diag(np.diag(G)))))
    return {
        "flow_asymmetry": float(np.max(np.abs(F - F.T))),
        "similarity_asymmetry": float(np.max(np.abs(S - S.T))),
        "max_imaginary": imag,
        "right_orthogonality": off(gram_r),
        "left_orthogonality": off(gram_l),
    }


def _block_orthonormalize(V: np.ndarray, vals: np.ndarray, W: np.ndarray, gap: float = 1e-9) -> np.ndarray:
    V = V.copy()
    for cluster in _clusters(vals.astype(complex), gap):
        block = V[:, cluster]
        # Gram-Schmidt under the W inner product via Cholesky of the Gram matrix
        G = block.T @ W @ block
        C = np.linalg.cholesky(0.5 * (G + G.T))
        V[:, cluster] = block @ np.linalg.inv(C).T
    return V


# ---------------------------------------------------------------------------
# random chains for experiments and tests


def random_ergodic_chain(n: int, rng: np.random.Generator, density: float = 1.0) -> np.ndarray:
    """Random ergodic chain; generically non-reversible.

    With ``density < 1`` entries are dropped at random, but a self loop and a
    ring through all states keep the chain irreducible and aperiodic.
    """
    W = rng.random((n, n)) * (rng.random((n, n)) < density)
    W[np.arange(n), np.arange(n)] += rng.random(n) + 0.1
    W[np.arange(n), (np.arange(n) + 1) % n] += rng.random(n) + 0.1
    return W / W.sum(axis=1, keepdims=True)


def random_reversible_chain(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random walk on a random weighted undirected graph with self loops (reversible, ergodic)."""
    W = rng.random((n, n))
    W = W + W.T + np.diag(rng.random(n) + 0.1)
    return W / W.sum(axis=1, keepdims=True)
