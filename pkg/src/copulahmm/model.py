"""Model specification, parameter containers and the working-parameter transform.

Observed variable 0 is the number of shots, variable 1 the number of ball
touches. States are indexed from 0 in all array-valued APIs.

Transition probabilities follow a multinomial logit link: for row ``i`` the
linear predictor is fixed at 0 on the diagonal and equals
``beta0[i, j] + beta[i, j] @ x`` off the diagonal. ``Gamma_t`` computed from
the covariates of time ``t`` governs the move from ``s_{t-1}`` to ``s_t``.

Working vector layout (unconstrained, length :func:`num_params`)::

    log lambda      N x 2, row-major over (state, variable)
    log nu          N x 2
    theta           N, family-specific transform (absent for independence)
    delta logits    N - 1, states 1..N-1 against state 0
    coefficients    for each ordered pair i != j (row-major): p + 1 values
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cmp import CmpParams, mean as cmp_mean
from .copula import CopulaSpec, Family, bivariate_pmf, check_theta, pmf_grid

__all__ = [
    "NU_FLOOR",
    "ModelSpec",
    "ModelParams",
    "transition_matrix",
    "transition_matrices",
    "state_joint_pmf",
    "emission_grids",
    "emission_probs",
    "pack",
    "unpack",
    "num_params",
    "intercepts_from_tpm",
]

#: nu = 0 is represented by this value in working space
NU_FLOOR = 1e-8


@dataclass(frozen=True)
class ModelSpec:
    """Structure of a model: state count, copula family and covariates.

    ``standardization`` holds one ``(mean, sd)`` pair per covariate; raw
    covariate values are mapped to ``(x - mean) / sd`` before entering the
    transition linear predictor.
    """

    n_states: int
    copula: Family = Family.INDEPENDENCE
    covariate_names: tuple[str, ...] = ()
    standardization: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if int(self.n_states) != self.n_states or self.n_states < 1:
            raise ValueError(f"n_states must be a positive integer, got {self.n_states!r}")
        object.__setattr__(self, "n_states", int(self.n_states))
        object.__setattr__(self, "copula", Family.parse(self.copula))
        names = tuple(str(n) for n in self.covariate_names)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate covariate names: {names}")
        object.__setattr__(self, "covariate_names", names)
        stats = self.standardization
        if stats is None:
            stats = tuple((0.0, 1.0) for _ in names)
        stats = tuple((float(m), float(s)) for m, s in stats)
        if len(stats) != len(names):
            raise ValueError("standardization needs one (mean, sd) pair per covariate")
        for name, (_, sd) in zip(names, stats):
            if not (sd > 0 and math.isfinite(sd)):
                raise ValueError(f"standardization sd for {name!r} must be positive, got {sd}")
        object.__setattr__(self, "standardization", stats)

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_names)

    def standardize(self, raw) -> np.ndarray:
        """Scale raw covariate values (last axis ordered as ``covariate_names``)."""
        raw = np.asarray(raw, dtype=float)
        if raw.shape[-1:] != (self.n_covariates,):
            raise ValueError(
                f"expected {self.n_covariates} covariates {self.covariate_names}, "
                f"got trailing shape {raw.shape[-1:]}"
            )
        if self.n_covariates == 0:
            return raw
        loc = np.array([m for m, _ in self.standardization])
        scale = np.array([s for _, s in self.standardization])
        return (raw - loc) / scale

    def covariate_vector(self, values: dict[str, float]) -> np.ndarray:
        """Standardized covariate vector from a ``{name: raw value}`` mapping."""
        missing = [n for n in self.covariate_names if n not in values]
        if missing:
            raise ValueError(f"missing covariate values for {missing}")
        return self.standardize([float(values[n]) for n in self.covariate_names])


def _frozen(a, shape, name) -> np.ndarray:
    out = np.array(a, dtype=float)
    if out.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {out.shape}")
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Natural parameters of a fitted or hypothesised model.

    Attributes
    ----------
    spec : ModelSpec
    lam, nu : ndarray, shape (N, 2)
        CMP parameters per state and variable.
    theta : ndarray, shape (N,)
        Copula parameter per state; ignored (conventionally 0) for independence.
    delta : ndarray, shape (N,)
        Initial state distribution.
    coeffs : ndarray, shape (N, N, p + 1)
        Transition coefficients ``(beta0, beta1, ..., betap)`` for each ordered
        pair; diagonal blocks are forced to zero.
    """

    spec: ModelSpec
    lam: np.ndarray
    nu: np.ndarray
    theta: np.ndarray = field(default=None)
    delta: np.ndarray = field(default=None)
    coeffs: np.ndarray = field(default=None)

    def __post_init__(self):
        n, p = self.spec.n_states, self.spec.n_covariates
        theta = np.zeros(n) if self.theta is None else self.theta
        delta = np.full(n, 1.0 / n) if self.delta is None else self.delta
        coeffs = np.zeros((n, n, p + 1)) if self.coeffs is None else self.coeffs
        lam = _frozen(self.lam, (n, 2), "lam")
        nu = _frozen(self.nu, (n, 2), "nu")
        theta = _frozen(theta, (n,), "theta")
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.shape != (n, n, p + 1):
            raise ValueError(f"coeffs must have shape {(n, n, p + 1)}, got {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("transition coefficients must be finite")
        coeffs[np.arange(n), np.arange(n), :] = 0.0
        coeffs.flags.writeable = False
        delta = _frozen(delta, (n,), "delta")
        if np.any(delta < 0) or abs(delta.sum() - 1.0) > 1e-9:
            raise ValueError(f"delta must be a probability vector, got {delta}")
        for i in range(n):
            for k in range(2):
                CmpParams(lam[i, k], nu[i, k])
            check_theta(self.spec.copula, theta[i])
        for name, value in (("lam", lam), ("nu", nu), ("theta", theta),
                            ("delta", delta), ("coeffs", coeffs)):
            object.__setattr__(self, name, value)

    @property
    def n_states(self) -> int:
        return self.spec.n_states

    def marginal(self, state: int, variable: int) -> CmpParams:
        return CmpParams(self.lam[state, variable], self.nu[state, variable])

    def copula(self, state: int) -> CopulaSpec:
        return CopulaSpec(self.spec.copula, self.theta[state])

    def means(self, d: int = 100) -> np.ndarray:
        """Truncated CMP means, shape (N, 2)."""
        return np.array([[cmp_mean(self.marginal(i, k), d) for k in range(2)]
                         for i in range(self.n_states)])

    def permuted(self, order) -> "ModelParams":
        """Relabel states so that new state ``k`` is old state ``order[k]``."""
        order = np.asarray(order, dtype=int)
        if sorted(order.tolist()) != list(range(self.n_states)):
            raise ValueError(f"{order} is not a permutation of the states")
        return ModelParams(
            self.spec,
            self.lam[order],
            self.nu[order],
            self.theta[order],
            self.delta[order],
            self.coeffs[np.ix_(order, order)],
        )

    def with_spec(self, spec: ModelSpec) -> "ModelParams":
        return ModelParams(spec, self.lam, self.nu, self.theta, self.delta, self.coeffs)


def transition_matrices(params: ModelParams, x) -> np.ndarray:
    """Transition matrices for a batch of standardized covariate rows.

    ``x`` has shape ``(..., p)``; the result has shape ``(..., N, N)``.
    """
    p = params.spec.n_covariates
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (p,):
        raise ValueError(f"expected {p} covariates, got trailing shape {x.shape[-1:]}")
    eta = params.coeffs[..., 0] + np.einsum("ijl,...l->...ij", params.coeffs[..., 1:], x)
    eta -= eta.max(axis=-1, keepdims=True)
    g = np.exp(eta)
    g /= g.sum(axis=-1, keepdims=True)
    return g


def transition_matrix(params: ModelParams, covariates=None) -> np.ndarray:
    """N x N transition matrix at one standardized covariate vector."""
    if covariates is None:
        covariates = np.zeros(params.spec.n_covariates)
    covariates = np.asarray(covariates, dtype=float)
    if covariates.ndim != 1:
        raise ValueError("covariates must be a vector")
    return transition_matrices(params, covariates)


def state_joint_pmf(params: ModelParams, state: int, y) -> float:
    """Joint probability of the count pair ``y`` given hidden state ``state``."""
    if not 0 <= state < params.n_states:
        raise IndexError(f"state {state} out of range for {params.n_states} states")
    y1, y2 = y
    return bivariate_pmf(params.copula(state), params.marginal(state, 0),
                         params.marginal(state, 1), y1, y2)


def emission_grids(params: ModelParams, kmax1: int, kmax2: int) -> np.ndarray:
    """State-dependent joint pmf tables, shape ``(N, kmax1 + 1, kmax2 + 1)``."""
    return np.stack([
        pmf_grid(params.copula(i), params.marginal(i, 0), params.marginal(i, 1), kmax1, kmax2)
        for i in range(params.n_states)
    ])


def emission_probs(params: ModelParams, y) -> np.ndarray:
    """``f(y_t | s_t = i)`` for count pairs ``y`` of shape (T, 2); returns (T, N)."""
    y = np.asarray(y, dtype=np.int64)
    grids = emission_grids(params, int(y[:, 0].max(initial=0)), int(y[:, 1].max(initial=0)))
    return grids[:, y[:, 0], y[:, 1]].T


def num_params(spec: ModelSpec) -> int:
    """Number of free parameters (also the working-vector length)."""
    n, p = spec.n_states, spec.n_covariates
    n_theta = 0 if spec.copula is Family.INDEPENDENCE else n
    return 4 * n + n_theta + (n - 1) + n * (n - 1) * (p + 1)


def _theta_to_working(family: Family, theta: np.ndarray) -> np.ndarray:
    if family is Family.CLAYTON:
        if np.any(theta <= -1):
            raise ValueError("Clayton theta must be > -1 to be packed")
        return np.log1p(theta)
    if family is Family.AMH:
        if np.any(theta <= -1):
            raise ValueError("AMH theta must be > -1 to be packed")
        return np.arctanh(theta)
    return theta.copy()


def _theta_from_working(family: Family, w: np.ndarray) -> np.ndarray:
    if family is Family.CLAYTON:
        return np.expm1(w)
    if family is Family.AMH:
        # keep strictly inside [-1, 1) even when tanh rounds to +-1
        return np.clip(np.tanh(w), -1.0, np.nextafter(1.0, 0.0))
    return w.copy()


def pack(params: ModelParams) -> np.ndarray:
    """Map natural parameters to the unconstrained working vector."""
    spec = params.spec
    n = spec.n_states
    if np.any(params.delta <= 0):
        raise ValueError("delta must be strictly positive to be packed")
    off = ~np.eye(n, dtype=bool)
    parts = [
        np.log(params.lam).ravel(),
        np.log(np.maximum(params.nu, NU_FLOOR)).ravel(),
    ]
    if spec.copula is not Family.INDEPENDENCE:
        parts.append(_theta_to_working(spec.copula, params.theta))
    parts.append(np.log(params.delta[1:] / params.delta[0]))
    parts.append(params.coeffs[off].ravel())
    return np.concatenate(parts)


def unpack(spec: ModelSpec, w) -> ModelParams:
    """Inverse of :func:`pack`."""
    w = np.asarray(w, dtype=float)
    if w.shape != (num_params(spec),):
        raise ValueError(f"working vector must have length {num_params(spec)}, got {w.shape}")
    n, p = spec.n_states, spec.n_covariates
    pos = 0

    def take(k):
        nonlocal pos
        out = w[pos:pos + k]
        pos += k
        return out

    lam = np.exp(take(2 * n)).reshape(n, 2)
    nu = np.maximum(np.exp(take(2 * n)), NU_FLOOR).reshape(n, 2)
    if spec.copula is Family.INDEPENDENCE:
        theta = np.zeros(n)
    else:
        theta = _theta_from_working(spec.copula, take(n))
    logits = np.concatenate(([0.0], take(n - 1)))
    logits -= logits.max()
    delta = np.exp(logits)
    delta /= delta.sum()
    coeffs = np.zeros((n, n, p + 1))
    coeffs[~np.eye(n, dtype=bool)] = take(n * (n - 1) * (p + 1)).reshape(-1, p + 1)
    return ModelParams(spec, lam, nu, theta, delta, coeffs)


def intercepts_from_tpm(tpm) -> np.ndarray:
    """Intercept-only coefficient array reproducing a strictly positive t.p.m.

    Returns shape ``(N, N, 1)`` with ``beta0[i, j] = log(gamma_ij / gamma_ii)``.
    """
    tpm = np.asarray(tpm, dtype=float)
    if np.any(tpm <= 0):
        raise ValueError("all transition probabilities must be positive")
    beta = np.log(tpm / np.diag(tpm)[:, None])
    return beta[:, :, None]
