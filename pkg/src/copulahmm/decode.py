"""Global state decoding and stationary analysis at frozen covariates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure
from .likelihood import MatchSeries, SeriesBatch
from .model import ModelParams, transition_matrix

__all__ = [
    "DecodedSequence",
    "viterbi",
    "stationary_distribution",
    "covariate_profile",
]


@dataclass(frozen=True, eq=False)
class DecodedSequence:
    match_id: str
    states: np.ndarray
    log_joint: float


def viterbi(params: ModelParams, match: MatchSeries) -> DecodedSequence:
    """Most likely hidden state path of one match.

    Works in log space; ties are broken toward the lower state index both in
    the final argmax and during backtracking. ``states`` are 0-based.
    """
    batch = SeriesBatch([match])
    batch.check(params.spec)
    with np.errstate(divide="ignore"):
        log_e = np.log(batch.emissions(params))
        log_g = np.log(batch.transitions(params))
    empty = np.flatnonzero(~np.isfinite(log_e.max(axis=1)))
    if empty.size:
        raise NumericalFailure(
            f"all emission probabilities vanish for match {match.match_id!r} "
            f"at time index {int(empty[0])}"
        )
    T, n = log_e.shape
    with np.errstate(divide="ignore"):
        score = np.log(params.delta) + log_e[0]
    back = np.zeros((T, n), dtype=np.int64)
    for t in range(1, T):
        g = log_g[0] if log_g.shape[0] == 1 else log_g[t]
        cand = score[:, None] + g
        back[t] = np.argmax(cand, axis=0)
        score = cand[back[t], np.arange(n)] + log_e[t]
    states = np.empty(T, dtype=np.int64)
    states[-1] = int(np.argmax(score))
    for t in range(T - 1, 0, -1):
        states[t - 1] = back[t, states[t]]
    return DecodedSequence(match.match_id, states, float(score[states[-1]]))


def stationary_distribution(tpm) -> np.ndarray:
    """Solve ``delta @ tpm = delta`` with ``sum(delta) = 1``.

    Uses the linear system ``delta (I - tpm + U) = 1`` with ``U`` the all-ones
    matrix, followed by one step of iterative refinement.

    Raises
    ------
    ValueError
        If ``tpm`` is not a stochastic matrix or the system is singular
        (the chain has no unique stationary distribution).
    """
    g = np.asarray(tpm, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"transition matrix must be square, got shape {g.shape}")
    if np.any(g < 0) or not np.allclose(g.sum(axis=1), 1.0, atol=1e-10):
        raise ValueError("transition matrix rows must be nonnegative and sum to 1")
    n = g.shape[0]
    a = np.eye(n) - g + 1.0
    if np.linalg.cond(a) > 1e13:
        raise ValueError("transition matrix is reducible or degenerate: no unique stationary distribution")
    b = np.ones(n)
    delta = np.linalg.solve(a.T, b)
    delta += np.linalg.solve(a.T, b - a.T @ delta)
    return delta / delta.sum()


def covariate_profile(model, sweep: str, values, fixed: dict[str, float] | None = None) -> np.ndarray:
    """Stationary distributions of ``Gamma(x)`` while one covariate is swept.

    Parameters
    ----------
    model : ModelParams or FitResult
    sweep : str
        Name of the covariate to vary; values are in raw (unstandardized) units.
    values : sequence of float
    fixed : dict
        Raw values for every other covariate of the model.

    Returns
    -------
    ndarray, shape (len(values), N)
    """
    params = getattr(model, "params", model)
    spec = params.spec
    if sweep not in spec.covariate_names:
        raise ValueError(f"covariate {sweep!r} is not part of the model {spec.covariate_names}")
    fixed = dict(fixed or {})
    fixed.pop(sweep, None)
    rows = []
    for v in values:
        x = spec.covariate_vector({**fixed, sweep: v})
        rows.append(stationary_distribution(transition_matrix(params, x)))
    return np.array(rows)
