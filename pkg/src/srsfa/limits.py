"""Large-sample limits of SFA statistics on Markovian one-hot trajectories.

For an ergodic chain with stationary distribution pi (``Pi = diag(pi)``):

* uncentered: ``Sigma_hat -> Pi``, ``Sigma_dot -> 2 L_dir``,
  ``Omega_hat_tau -> Pi (P^tau)_add`` and ``Psi_hat -> Pi M_add``;
* centered: subtract ``pi pi^T`` (``alpha pi pi^T`` for Psi), except for
  ``Sigma_dot`` which is unchanged because centering cancels in differences.

``M_add`` here is the partial sum up to ``tau_max`` so that it matches the
empirical lag sum term by term.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import markov
from .errors import DefinitenessError, DomainError, ErgodicityError
from .gridworld import rollout
from .sfa import SfaStatistics, add_noise, one_hot
from .spectral import psd_sqrt


def alpha(gamma: float, tau_max: int) -> float:
    """``(1 - gamma^(tau_max+1)) / (1 - gamma)``, the weight sum of an LF matrix."""
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"discount must lie in (0, 1), got {gamma}")
    if tau_max < 0:
        raise DomainError("tau_max must be non-negative")
    return (1.0 - gamma ** (tau_max + 1)) / (1.0 - gamma)


def _weight_sum(gamma: float, tau_max: int) -> float:
    # equals alpha(); summed in the same order as the LF matrix so degenerate chains cancel exactly
    total = 0.0
    for k in range(tau_max + 1):
        total += gamma**k
    return total


def _flow_add(P: np.ndarray, pi: np.ndarray, tau: int) -> np.ndarray:
    F = pi[:, None] * markov.k_step(P, tau)
    return 0.5 * (F + F.T)


def _psi_target(P: np.ndarray, pi: np.ndarray, gamma: float, tau_max: Optional[int]) -> np.ndarray:
    M_add = markov.ir_additive(P, pi, gamma, tau_max).entries
    return pi[:, None] * M_add


def analytic_type2_targets(P, pi, gamma: float = 0.9, taus: Iterable[int] = (1,), tau_max: int = 100) -> dict:
    """Limits of the uncentered statistics keyed by statistic name."""
    P = markov.check_transition(P)
    pi = np.asarray(pi, dtype=float)
    out = {
        "sigma_hat": np.diag(pi),
        "sigma_dot_hat": 2.0 * markov.directed_laplacian(P, pi),
    }
    for tau in taus:
        out[f"omega_hat_{tau}"] = _flow_add(P, pi, tau)
    out["psi_hat"] = _psi_target(P, pi, gamma, tau_max)
    return out


def analytic_type1_targets(P, pi, gamma: float = 0.9, taus: Iterable[int] = (1,), tau_max: int = 100) -> dict:
    """Limits of the centered statistics keyed by statistic name."""
    t2 = analytic_type2_targets(P, pi, gamma, taus, tau_max)
    pi = np.asarray(pi, dtype=float)
    pp = np.outer(pi, pi)
    out = {"sigma": t2["sigma_hat"] - pp, "sigma_dot": t2["sigma_dot_hat"]}
    for tau in taus:
        out[f"omega_{tau}"] = t2[f"omega_hat_{tau}"] - pp
    out["psi"] = t2["psi_hat"] - _weight_sum(gamma, tau_max) * pp
    return out


def analytic_normalized_targets(
    P,
    pi,
    variant: str,
    type_: int,
    formulation: str,
    tau: int = 1,
    gamma: float = 0.9,
    tau_max: int = 100,
    sigma2: float = 0.0,
) -> np.ndarray:
    """Limit of the matrix whose eigenproblem a given cell solves.

    Noise of variance ``sigma2`` adds ``sigma2 * 1`` to the covariance,
    ``2 sigma2 * 1`` to the derivative covariance and ``kappa_0 sigma2 * 1``
    to the LF matrix; lagged matrices with tau >= 1 are unaffected.  The
    ``unnormalized`` formulation returns the objective matrix itself.
    """
    P = markov.check_transition(P)
    pi = np.asarray(pi, dtype=float)
    n = P.shape[0]
    I = np.eye(n)
    if type_ == 1:
        t = analytic_type1_targets(P, pi, gamma, (tau,), tau_max)
        B, keys = t["sigma"], ("sigma_dot", f"omega_{tau}", "psi")
    elif type_ == 2:
        t = analytic_type2_targets(P, pi, gamma, (tau,), tau_max)
        B, keys = t["sigma_hat"], ("sigma_dot_hat", f"omega_hat_{tau}", "psi_hat")
    else:
        raise DomainError(f"type must be 1 or 2, got {type_}")
    if variant == "sfa":
        A = t[keys[0]] + 2.0 * sigma2 * I
    elif variant == "tau":
        A = t[keys[1]]
    elif variant == "lf":
        A = t[keys[2]] + sigma2 * I
    else:
        raise DomainError(f"unknown variant {variant!r}")
    B = B + sigma2 * I
    if formulation == "unnormalized":
        return A
    if formulation == "symmetric":
        r = psd_sqrt(B, "zca")
        S = r.inverse_root @ A @ r.inverse_root.T
        return 0.5 * (S + S.T)
    if formulation == "left":
        if np.min(np.linalg.eigvalsh(B)) <= 1e-12:
            raise DefinitenessError("constraint limit is singular; use sigma2 > 0")
        return np.linalg.solve(B, A)
    raise DomainError(f"unknown formulation {formulation!r}")


@dataclass(frozen=True)
class LimitReport:
    target_name: str
    frobenius_error: float
    relative_error: float
    T: int
    tolerance: float
    passed: bool
    tau: Optional[int] = None
    gamma: Optional[float] = None
    tau_max: Optional[int] = None
    sigma2: float = 0.0
    secondary: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def default_tolerance(T: int, pi, c: float = 5.0) -> float:
    """``c / sqrt(T * pi_min)``, the sampling error scale of the rarest state, capped at 1.

    A relative error of 1 is what an all-zero estimate achieves, so looser
    tolerances would accept anything.
    """
    return min(1.0, c / math.sqrt(T * float(np.min(pi))))


def _errors(empirical: np.ndarray, target: np.ndarray) -> tuple[float, float]:
    err = float(np.linalg.norm(empirical - target))
    norm = float(np.linalg.norm(target))
    # targets that vanish up to rounding are compared in absolute terms
    return err, (err / norm if norm > 1e-12 else err)


def verify_limits(
    trajectory,
    P,
    pi=None,
    gamma: float = 0.9,
    tau_max: int = 100,
    taus: Sequence[int] = (1,),
    types: Sequence[int] = (1, 2),
    tolerance=None,
    normalized_cells: Sequence[tuple] = (),
    sigma2: float = 1e-4,
    noise_seed: int = 0,
) -> list[LimitReport]:
    """Compare empirical statistics of ``trajectory`` with their analytic limits.

    ``tolerance`` is a number, a mapping from target name to number, or
    ``None`` for :func:`default_tolerance`.  ``normalized_cells`` lists
    ``(variant, type, formulation)`` triples checked on the noisy dense
    series (noise variance ``sigma2``); keep those to small state spaces.
    """
    P = markov.check_transition(P)
    if not markov.is_ergodic(P):
        raise ErgodicityError("limit verification needs an ergodic chain")
    pi = markov.stationary_distribution(P) if pi is None else np.asarray(pi, dtype=float)
    T = len(trajectory.states)
    lag = min(max(max(taus, default=1), tau_max), T - 1)
    # short runs cannot supply every lag; compare the partial sums that exist
    tau_max = min(tau_max, lag)
    taus = tuple(t for t in taus if t <= lag)
    stats = SfaStatistics.from_states(trajectory.states, trajectory.n_states, lag)
    base_tol = default_tolerance(T, pi)

    def tol_for(name: str) -> float:
        if tolerance is None:
            return base_tol
        if isinstance(tolerance, dict):
            return float(tolerance.get(name, base_tol))
        return float(tolerance)

    reports = []

    def add(name, emp, tgt, secondary=False, **params):
        err, rel = _errors(emp, tgt)
        tol = tol_for(name)
        reports.append(LimitReport(name, err, rel, T, tol, rel < tol, secondary=secondary, **params))

    if 2 in types:
        t2 = analytic_type2_targets(P, pi, gamma, taus, tau_max)
        add("sigma_hat", stats.sigma_hat, t2["sigma_hat"])
        add("sigma_dot_hat", stats.sigma_dot, t2["sigma_dot_hat"])
        for tau in taus:
            add(f"omega_hat_{tau}", stats.omega_hat[tau], t2[f"omega_hat_{tau}"], tau=tau)
        psi_hat = stats.psi(gamma, tau_max, 2)
        add("psi_hat", psi_hat, t2["psi_hat"], gamma=gamma, tau_max=tau_max)
        add("psi_hat_infinite", psi_hat, _psi_target(P, pi, gamma, None), True, gamma=gamma, tau_max=tau_max)
    if 1 in types:
        t1 = analytic_type1_targets(P, pi, gamma, taus, tau_max)
        add("sigma", stats.sigma, t1["sigma"])
        add("sigma_dot", stats.sigma_dot, t1["sigma_dot"])
        for tau in taus:
            add(f"omega_{tau}", stats.omega[tau], t1[f"omega_{tau}"], tau=tau)
        add("psi", stats.psi(gamma, tau_max, 1), t1["psi"], gamma=gamma, tau_max=tau_max)

    if normalized_cells:
        noisy = SfaStatistics.from_series(
            add_noise(one_hot(trajectory.states, trajectory.n_states), sigma2, noise_seed), lag
        )
        for variant, type_, formulation in normalized_cells:
            tau = taus[0] if taus else 1
            B = noisy.constraint(type_)
            if variant == "sfa":
                A = noisy.sigma_dot
            elif variant == "tau":
                A = noisy.lagged(tau, type_)
            else:
                A = noisy.psi(gamma, tau_max, type_)
            if formulation == "symmetric":
                r = psd_sqrt(B, "zca")
                emp = r.inverse_root @ A @ r.inverse_root.T
            elif formulation == "left":
                emp = np.linalg.solve(B, A)
            else:
                emp = A
            tgt = analytic_normalized_targets(P, pi, variant, type_, formulation, tau, gamma, tau_max, sigma2)
            add(f"{variant}_type{type_}_{formulation}", emp, tgt, tau=tau, gamma=gamma, tau_max=tau_max, sigma2=sigma2)
    return reports


def convergence_study(
    world_P,
    T_grid: Sequence[int],
    seeds: Sequence[int],
    target: str = "sigma_hat",
    gamma: float = 0.9,
    tau_max: int = 10,
) -> dict:
    """Relative error of one target over a grid of trajectory lengths and seeds.

    Returns per-cell rows, per-T mean and standard error, and the least
    squares slope of log(mean error) against log(T).
    """
    P = markov.check_transition(world_P)
    pi = markov.stationary_distribution(P)
    taus = (int(target.rsplit("_", 1)[1]),) if target.startswith("omega") else (1,)
    rows = []
    for T in T_grid:
        for seed in seeds:
            traj = rollout(P, T, seed, pi=pi)
            reps = verify_limits(traj, P, pi, gamma, min(tau_max, T - 1), taus)
            rep = next(r for r in reps if r.target_name == target)
            rows.append({"T": int(T), "seed": int(seed), "relative_error": rep.relative_error})
    summary = []
    for T in T_grid:
        errs = np.array([r["relative_error"] for r in rows if r["T"] == T])
        se = float(errs.std(ddof=1) / math.sqrt(errs.size)) if errs.size > 1 else 0.0
        summary.append({"T": int(T), "mean_error": float(errs.mean()), "stderr": se})
    means = np.array([s["mean_error"] for s in summary])
    slope = float("nan")
    if len(T_grid) > 1 and np.all(means > 0):
        slope = float(np.polyfit(np.log(np.asarray(T_grid, dtype=float)), np.log(means), 1)[0])
    return {"target": target, "rows": rows, "summary": summary, "slope": slope}
