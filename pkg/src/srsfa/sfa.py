"""Slow feature analysis: statistics, problem assembly and solving.

Three variants are supported: classic SFA (minimize the Delta value),
tau-SFA (maximize the lag-tau correlation, CSFA for tau=1) and LFSFA
(maximize a discounted sum of lagged correlations).  Each comes in Type 1
(zero-mean outputs, centered statistics) and Type 2 (uncentered, unit second
moment) flavours and can be solved unnormalized, after symmetric
normalization or after left normalization.

Averaging denominators are fixed: ``Sigma`` and its uncentered counterpart
average over T samples, the derivative covariance over T-1 and the lag-tau
matrices over T-tau.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from . import spectral
from .errors import DefinitenessError, DimensionError, DomainError, MissingStatisticError

Variant = Literal["sfa", "tau", "lf"]
Formulation = Literal["unnormalized", "symmetric", "left"]

#: noise variance used for normalized Type 1 problems on rank-deficient data when none is given
DEFAULT_TYPE1_NOISE = 1e-6


def _series(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionError(f"time series must be 2-D (T x N), got shape {x.shape}")
    if x.shape[0] < 2:
        raise DimensionError("time series needs at least two time points")
    if not np.all(np.isfinite(x)):
        raise DomainError("time series has non-finite entries")
    return x


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def center(series) -> np.ndarray:
    x = _series(series)
    return x - x.mean(axis=0)


def time_derivative(series) -> np.ndarray:
    """Forward differences ``x(t+1) - x(t)``, length T-1."""
    return np.diff(_series(series), axis=0)


def second_moment(series) -> np.ndarray:
    x = _series(series)
    return _sym(x.T @ x) / x.shape[0]


def covariance(series) -> np.ndarray:
    c = center(series)
    return _sym(c.T @ c) / c.shape[0]


def stc_matrix(series, tau: int, centered: bool = True) -> np.ndarray:
    """Symmetrized lag-``tau`` covariance averaged over ``T - tau`` pairs."""
    x = center(series) if centered else _series(series)
    T = x.shape[0]
    if not 0 <= tau < T:
        raise DomainError(f"lag {tau} must satisfy 0 <= tau < T = {T}")
    return _sym(x[: T - tau].T @ x[tau:]) / (T - tau)


def discount_weights(gamma: float, tau_max: int) -> np.ndarray:
    """Exponential weights ``gamma**tau`` for tau = 0..tau_max."""
    return gamma ** np.arange(tau_max + 1, dtype=float)


def lf_matrix(series, gamma: float, tau_max: int, weights=None, centered: bool = True) -> np.ndarray:
    """Weighted sum of lagged covariances, ``sum_tau kappa_tau Omega_tau`` from tau = 0."""
    kappa = _resolve_weights(gamma, tau_max, weights)
    x = _series(series)
    if tau_max >= x.shape[0]:
        raise DomainError(f"tau_max {tau_max} must be smaller than T = {x.shape[0]}")
    out = np.zeros((x.shape[1], x.shape[1]))
    for tau, k in enumerate(kappa):
        if k != 0.0:
            out += k * stc_matrix(x, tau, centered)
    return out


def _resolve_weights(gamma: Optional[float], tau_max: int, weights) -> np.ndarray:
    if tau_max < 0:
        raise DomainError("tau_max must be non-negative")
    if weights is not None:
        kappa = np.asarray(weights, dtype=float)
        if kappa.shape != (tau_max + 1,):
            raise DimensionError(f"expected {tau_max + 1} weights, got {kappa.shape}")
        return kappa
    if gamma is None or not 0.0 < gamma < 1.0:
        raise DomainError(f"discount must lie in (0, 1), got {gamma}")
    return discount_weights(gamma, tau_max)


def add_noise(series, sigma2: float, seed: int) -> np.ndarray:
    """Add i.i.d. Gaussian noise of variance ``sigma2`` (Philox stream seeded by ``seed``)."""
    x = _series(series)
    if sigma2 < 0:
        raise DomainError("noise variance must be non-negative")
    if sigma2 == 0:
        return x.copy()
    rng = np.random.Generator(np.random.Philox(seed))
    return x + rng.normal(0.0, np.sqrt(sigma2), size=x.shape)


def one_hot(states, n_states: int) -> np.ndarray:
    states = np.asarray(states)
    x = np.zeros((states.shape[0], n_states))
    x[np.arange(states.shape[0]), states] = 1.0
    return x


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class SfaStatistics:
    """Empirical SFA matrices of one time series.

    ``omega_hat[tau]`` and ``omega[tau]`` hold the uncentered and centered
    lag-``tau`` matrices for every tau up to ``max_lag``; lag 0 coincides
    with ``sigma_hat`` and ``sigma``.  The derivative covariance is the same
    for centered and uncentered data because centering cancels in differences.
    """

    n_samples: int
    mean: np.ndarray
    sigma: np.ndarray
    sigma_hat: np.ndarray
    sigma_dot: np.ndarray
    omega: dict
    omega_hat: dict

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    @property
    def max_lag(self) -> int:
        return max(self.omega)

    @property
    def sigma_dot_hat(self) -> np.ndarray:
        return self.sigma_dot

    def constraint(self, type_: int) -> np.ndarray:
        return self.sigma if type_ == 1 else self.sigma_hat

    def lagged(self, tau: int, type_: int) -> np.ndarray:
        table = self.omega if type_ == 1 else self.omega_hat
        if tau not in table:
            raise MissingStatisticError(f"lag {tau} was not accumulated (max lag {self.max_lag})")
        return table[tau]

    def psi(self, gamma: Optional[float], tau_max: int, type_: int, weights=None) -> np.ndarray:
        """LF matrix from the stored lags."""
        kappa = _resolve_weights(gamma, tau_max, weights)
        out = np.zeros_like(self.sigma)
        for tau, k in enumerate(kappa):
            if k != 0.0:
                out += k * self.lagged(tau, type_)
        return out

    @classmethod
    def from_series(cls, series, max_lag: int = 1) -> "SfaStatistics":
        """Dense accumulation by outer products."""
        x = _series(series)
        T = x.shape[0]
        if not 0 <= max_lag < T:
            raise DomainError(f"max_lag {max_lag} must satisfy 0 <= max_lag < T = {T}")
        m = x.mean(axis=0)
        raw, heads, tails = {}, {}, {}
        for tau in range(max_lag + 1):
            raw[tau] = x[: T - tau].T @ x[tau:] / (T - tau)
            heads[tau] = x[: T - tau].mean(axis=0)
            tails[tau] = x[tau:].mean(axis=0)
        d = np.diff(x, axis=0)
        return cls._assemble(T, m, raw, heads, tails, _sym(d.T @ d) / (T - 1))

    @classmethod
    def from_states(cls, states, n_states: int, max_lag: int = 1) -> "SfaStatistics":
        """One-hot fast path from pair counts of ``(s_t, s_{t+tau})``."""
        s = np.asarray(states, dtype=np.int64)
        T = s.shape[0]
        if T < 2:
            raise DimensionError("time series needs at least two time points")
        if s.min() < 0 or s.max() >= n_states:
            raise DomainError("state index out of range")
        if not 0 <= max_lag < T:
            raise DomainError(f"max_lag {max_lag} must satisfy 0 <= max_lag < T = {T}")
        n = n_states
        m = np.bincount(s, minlength=n) / T
        raw, heads, tails = {}, {}, {}
        for tau in range(max_lag + 1):
            pairs = np.bincount(s[: T - tau] * n + s[tau:], minlength=n * n).reshape(n, n)
            raw[tau] = pairs / (T - tau)
            heads[tau] = np.bincount(s[: T - tau], minlength=n) / (T - tau)
            tails[tau] = np.bincount(s[tau:], minlength=n) / (T - tau)
        # (e_b - e_a)(e_b - e_a)^T summed over consecutive pairs (a, b)
        n1 = np.bincount(s[:-1] * n + s[1:], minlength=n * n).reshape(n, n).astype(float)
        sd = np.diag(n1.sum(axis=0) + n1.sum(axis=1)) - n1 - n1.T
        return cls._assemble(T, m, raw, heads, tails, sd / (T - 1))

    @classmethod
    def _assemble(cls, T, m, raw, heads, tails, sigma_dot) -> "SfaStatistics":
        omega_hat, omega = {}, {}
        mm = np.outer(m, m)
        for tau, r in raw.items():
            omega_hat[tau] = _sym(r)
            # <(x_t - m)(x_{t+tau} - m)^T> expanded over the T - tau pairs
            omega[tau] = _sym(r - np.outer(heads[tau], m) - np.outer(m, tails[tau]) + mm)
        return cls(T, m, omega[0], omega_hat[0], _sym(sigma_dot), omega, omega_hat)

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "mean": self.mean.tolist(),
            "sigma": self.sigma.tolist(),
            "sigma_hat": self.sigma_hat.tolist(),
            "sigma_dot": self.sigma_dot.tolist(),
            "omega": {str(k): v.tolist() for k, v in sorted(self.omega.items())},
            "omega_hat": {str(k): v.tolist() for k, v in sorted(self.omega_hat.items())},
        }


# ---------------------------------------------------------------------------
# problem specification and solving


@dataclass(frozen=True)
class SfaProblemSpec:
    """Selects one cell of the variant x type x formulation table.

    ``noise_variance=None`` means: add :data:`DEFAULT_TYPE1_NOISE` when a
    normalized Type 1 problem meets a singular covariance, otherwise none.
    ``use_pseudoinverse`` instead restricts such problems to the range of the
    covariance.  ``n_outputs=None`` returns the full spectrum for up to 512
    inputs and 32 outputs beyond that.
    """

    variant: Variant = "sfa"
    type_: int = 2
    formulation: Formulation = "unnormalized"
    tau: int = 1
    gamma: Optional[float] = None
    tau_max: Optional[int] = None
    weights: Optional[tuple] = None
    noise_variance: Optional[float] = None
    noise_seed: int = 0
    n_outputs: Optional[int] = None
    q_choice: spectral.QChoice = "zca"
    use_pseudoinverse: bool = False

    def __post_init__(self):
        if self.variant not in ("sfa", "tau", "lf"):
            raise DomainError(f"unknown variant {self.variant!r}")
        if self.type_ not in (1, 2):
            raise DomainError(f"type must be 1 or 2, got {self.type_}")
        if self.formulation not in ("unnormalized", "symmetric", "left"):
            raise DomainError(f"unknown formulation {self.formulation!r}")
        if self.variant == "tau" and self.tau < 1:
            raise DomainError("tau must be at least 1")
        if self.variant == "lf":
            if self.tau_max is None or self.tau_max < 1:
                raise DomainError("LFSFA needs tau_max >= 1")
            if self.weights is None and (self.gamma is None or not 0.0 < self.gamma < 1.0):
                raise DomainError("LFSFA needs a discount in (0, 1) or explicit weights")
            if self.weights is not None:
                object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
                if len(self.weights) != self.tau_max + 1:
                    raise DimensionError(f"expected {self.tau_max + 1} weights, got {len(self.weights)}")
        if self.noise_variance is not None and self.noise_variance < 0:
            raise DomainError("noise variance must be non-negative")
        if self.n_outputs is not None and self.n_outputs < 1:
            raise DomainError("n_outputs must be positive")

    @property
    def ordering(self) -> spectral.Ordering:
        return "ascending" if self.variant == "sfa" else "descending"

    @property
    def required_lag(self) -> int:
        if self.variant == "tau":
            return self.tau
        if self.variant == "lf":
            return self.tau_max
        return 1


def assemble_pencil(stats: SfaStatistics, spec: SfaProblemSpec) -> spectral.MatrixPencil:
    """Objective and constraint matrices of the requested problem."""
    if spec.variant == "sfa":
        a = stats.sigma_dot
    elif spec.variant == "tau":
        a = stats.lagged(spec.tau, spec.type_)
    else:
        a = stats.psi(spec.gamma, spec.tau_max, spec.type_, spec.weights)
    return spectral.MatrixPencil(a, stats.constraint(spec.type_))


def _is_singular(b: np.ndarray) -> bool:
    d = np.linalg.eigvalsh(b)
    return bool(d[0] <= spectral.RANK_TOL * max(d[-1], np.finfo(float).tiny))


_STRATEGY = {"unnormalized": "direct", "symmetric": "symmetric", "left": "left"}


def solve_pencil(pencil: spectral.MatrixPencil, spec: SfaProblemSpec) -> spectral.EigenSystem:
    """Solve an assembled pencil according to the formulation of ``spec``."""
    strategy = _STRATEGY[spec.formulation]
    if _is_singular(pencil.b):
        if spec.formulation != "unnormalized" and not spec.use_pseudoinverse:
            raise DefinitenessError(
                "constraint matrix is singular: add noise (noise_variance > 0), "
                "set use_pseudoinverse, or use the unnormalized formulation"
            )
        return spectral.pseudoinverse_solve(pencil, spec.ordering, strategy, spec.q_choice)
    return spectral.solve_generalized(pencil, spec.ordering, strategy, spec.q_choice)


@dataclass
class _Data:
    """Either a dense series or a state sequence; outputs are computed lazily from it."""

    dense: Optional[np.ndarray] = None
    states: Optional[np.ndarray] = None
    n_states: Optional[int] = None

    @property
    def T(self) -> int:
        return len(self.states) if self.dense is None else self.dense.shape[0]

    def project(self, W: np.ndarray) -> np.ndarray:
        return W[self.states] if self.dense is None else self.dense @ W

    def statistics(self, max_lag: int) -> SfaStatistics:
        if self.dense is None:
            return SfaStatistics.from_states(self.states, self.n_states, max_lag)
        return SfaStatistics.from_series(self.dense, max_lag)


def _as_data(data) -> _Data:
    if hasattr(data, "states") and hasattr(data, "n_states"):
        return _Data(states=np.asarray(data.states, dtype=np.int64), n_states=int(data.n_states))
    return _Data(dense=_series(data))


@dataclass
class SfaSolution:
    """Weights, eigenvalues and output statistics of a solved problem.

    Outputs are produced on demand by :meth:`outputs` so a long trajectory
    does not have to be materialized per output.
    """

    weights: np.ndarray
    eigenvalues: np.ndarray
    spec: SfaProblemSpec
    stats: SfaStatistics
    noise_variance: float = 0.0
    _data: Optional[_Data] = field(default=None, repr=False)

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[1]

    def outputs(self, which=None) -> np.ndarray:
        """T x J output signals (``w^T c(t)`` for Type 1, ``w^T x(t)`` for Type 2)."""
        if self._data is None:
            raise MissingStatisticError("solution was built without its input data")
        W = self.weights if which is None else self.weights[:, which]
        y = self._data.project(W)
        if self.spec.type_ == 1:
            y = y - self.stats.mean @ W
        return y

    def delta(self) -> np.ndarray:
        return _quotients(self.weights, self.stats.sigma_dot, self.stats.constraint(self.spec.type_))

    def c_tau(self, tau: int) -> np.ndarray:
        t = self.spec.type_
        return _quotients(self.weights, self.stats.lagged(tau, t), self.stats.constraint(t))

    def f_gamma(self, gamma: float, tau_max: int, weights=None) -> np.ndarray:
        t = self.spec.type_
        return _quotients(self.weights, self.stats.psi(gamma, tau_max, t, weights), self.stats.constraint(t))

    def per_output_stats(self, taus: Sequence[int] = (1,), gammas: Sequence[float] = (), tau_max: int = 100) -> dict:
        """Delta, requested C_tau and F_gamma for every output."""
        out = {"delta": self.delta()}
        for tau in taus:
            out[f"C{tau}"] = self.c_tau(tau)
        for g in gammas:
            out[f"F{g:g}"] = self.f_gamma(g, min(tau_max, self.stats.max_lag))
        return out

    def to_dict(self) -> dict:
        return {
            "spec": {k: v for k, v in self.spec.__dict__.items()},
            "eigenvalues": self.eigenvalues.tolist(),
            "weights": self.weights.tolist(),
            "noise_variance": self.noise_variance,
        }


def _quotients(W: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->j", W, A @ W) / np.einsum("ij,ij->j", W, B @ W)


def _default_outputs(n: int, available: int) -> int:
    return available if n <= 512 else min(32, available)


def solve(data, spec: SfaProblemSpec, max_lag: Optional[int] = None) -> SfaSolution:
    """Compute statistics of ``data`` and solve the problem selected by ``spec``.

    ``data`` is a T x N array or any object with ``states`` and ``n_states``
    (a one-hot trajectory, handled by the pair-count fast path unless noise
    has to be added).  ``max_lag`` extends the accumulated lags beyond what
    the problem itself needs, e.g. to report C_2 and C_3 afterwards.
    """
    d = _as_data(data)
    lag = max(spec.required_lag, max_lag or 0)
    lag = min(lag, d.T - 1)
    if spec.required_lag > d.T - 1:
        raise DomainError(f"lag {spec.required_lag} needs more than {d.T} samples")

    sigma2 = spec.noise_variance or 0.0
    stats = d.statistics(lag) if sigma2 == 0 else None
    if (
        stats is not None
        and spec.noise_variance is None
        and spec.type_ == 1
        and spec.formulation != "unnormalized"
        and not spec.use_pseudoinverse
        and _is_singular(stats.sigma)
    ):
        sigma2 = DEFAULT_TYPE1_NOISE
    if sigma2 > 0:
        dense = d.dense if d.dense is not None else one_hot(d.states, d.n_states)
        d = _Data(dense=add_noise(dense, sigma2, spec.noise_seed))
        stats = d.statistics(lag)

    system = solve_pencil(assemble_pencil(stats, spec), spec)
    m = spec.n_outputs or _default_outputs(stats.n_features, len(system))
    m = min(m, len(system))
    return SfaSolution(system.eigenvectors[:, :m], system.eigenvalues[:m], spec, stats, sigma2, d)


# ---------------------------------------------------------------------------
# per-output measures


def delta_value(output) -> float:
    """Mean squared one-step difference of a scalar signal."""
    y = np.asarray(output, dtype=float).ravel()
    if y.size < 2:
        raise DimensionError("need at least two samples")
    return float(np.mean(np.diff(y) ** 2))


def correlation_value(output, tau: int) -> float:
    """``<y(t) y(t+tau)>`` over the T - tau available pairs."""
    y = np.asarray(output, dtype=float).ravel()
    if not 0 <= tau < y.size:
        raise DomainError(f"lag {tau} out of range for length {y.size}")
    return float(np.mean(y[: y.size - tau] * y[tau:]))


def c_tau(w, stats: SfaStatistics, tau: int, type_: int = 2) -> float:
    """Rayleigh quotient ``w^T Omega_tau w / w^T Sigma w``."""
    w = np.asarray(w, dtype=float)[:, None]
    return float(_quotients(w, stats.lagged(tau, type_), stats.constraint(type_))[0])


def f_gamma(w, stats: SfaStatistics, gamma: float, tau_max: int, type_: int = 2, weights=None) -> float:
    """Rayleigh quotient ``w^T Psi w / w^T Sigma w``."""
    w = np.asarray(w, dtype=float)[:, None]
    return float(_quotients(w, stats.psi(gamma, tau_max, type_, weights), stats.constraint(type_))[0])


def whiten(series, q_choice: spectral.QChoice = "zca"):
    """Center and whiten; returns ``(z, transform)`` with ``z = c @ transform.T``."""
    c = center(series)
    root = spectral.psd_sqrt(_sym(c.T @ c) / c.shape[0], q_choice)
    return c @ root.inverse_root.T, root.inverse_root
