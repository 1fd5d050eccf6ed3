"""Forward-algorithm likelihood for one or many independent matches."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numba import njit

from .errors import NumericalFailure
from .model import ModelParams, ModelSpec, emission_grids, num_params, transition_matrices

__all__ = [
    "MatchSeries",
    "SeriesBatch",
    "log_forward",
    "log_likelihood",
    "information_criteria",
]


@dataclass(frozen=True, eq=False)
class MatchSeries:
    """Bivariate count series of one match.

    Attributes
    ----------
    match_id : str
    y : ndarray of int, shape (T, 2)
        Shots and ball touches per minute.
    x : ndarray of float, shape (T, p)
        Standardized covariates; row ``t`` drives the transition into ``s_t``.
    """

    match_id: str
    y: np.ndarray
    x: np.ndarray = None

    def __post_init__(self):
        y = np.array(self.y)
        if y.ndim != 2 or y.shape[1] != 2 or y.shape[0] < 1:
            raise ValueError(f"match {self.match_id!r}: y must have shape (T, 2) with T >= 1")
        if not np.issubdtype(y.dtype, np.integer):
            if np.any(y != np.round(y)):
                raise ValueError(f"match {self.match_id!r}: counts must be integers")
        y = y.astype(np.int64)
        if np.any(y < 0):
            raise ValueError(f"match {self.match_id!r}: counts must be nonnegative")
        x = np.zeros((len(y), 0)) if self.x is None else np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != len(y):
            raise ValueError(f"match {self.match_id!r}: x has {x.shape[0]} rows, y has {len(y)}")
        y.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "match_id", str(self.match_id))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def T(self) -> int:
        return len(self.y)


def _as_matches(data) -> list[MatchSeries]:
    if isinstance(data, MatchSeries):
        return [data]
    matches = getattr(data, "matches", data)
    return list(matches)


@njit(cache=True)
def _forward_kernel(delta, emis, gammas, starts, lengths):
    """Scaled forward pass over concatenated series.

    ``gammas`` is (1, N, N) for a homogeneous chain, else (n_obs, N, N).
    Returns per-match log-likelihoods and the first row index whose forward
    mass vanished (-1 if none).
    """
    n = delta.shape[0]
    homogeneous = gammas.shape[0] == 1
    out = np.zeros(starts.shape[0])
    alpha = np.empty(n)
    nxt = np.empty(n)
    for m in range(starts.shape[0]):
        r0 = starts[m]
        total = 0.0
        for t in range(lengths[m]):
            r = r0 + t
            if t == 0:
                for j in range(n):
                    nxt[j] = delta[j] * emis[r, j]
            else:
                g = 0 if homogeneous else r
                for j in range(n):
                    acc = 0.0
                    for i in range(n):
                        acc += alpha[i] * gammas[g, i, j]
                    nxt[j] = acc * emis[r, j]
            scale = 0.0
            for j in range(n):
                scale += nxt[j]
            if not (scale > 0.0) or not np.isfinite(scale):
                return out, r
            for j in range(n):
                alpha[j] = nxt[j] / scale
            total += np.log(scale)
        out[m] = total
    return out, -1


class SeriesBatch:
    """Matches concatenated once so repeated likelihood evaluations stay cheap."""

    def __init__(self, matches: Iterable[MatchSeries]):
        matches = _as_matches(matches)
        if not matches:
            raise ValueError("dataset contains no matches")
        p = {m.x.shape[1] for m in matches}
        if len(p) != 1:
            raise ValueError(f"matches disagree on the number of covariates: {sorted(p)}")
        self.matches = matches
        self.n_covariates = p.pop()
        self.lengths = np.array([m.T for m in matches], dtype=np.int64)
        self.starts = np.concatenate(([0], np.cumsum(self.lengths)[:-1])).astype(np.int64)
        self.n_obs = int(self.lengths.sum())
        self.y = np.concatenate([m.y for m in matches])
        self.x = np.concatenate([m.x for m in matches])
        self.kmax = self.y.max(axis=0)

    def check(self, spec: ModelSpec) -> None:
        if spec.n_covariates != self.n_covariates:
            raise ValueError(
                f"model expects {spec.n_covariates} covariates, data carries {self.n_covariates}"
            )

    def emissions(self, params: ModelParams) -> np.ndarray:
        """State-dependent joint pmf of every observation, shape (n_obs, N)."""
        grids = emission_grids(params, int(self.kmax[0]), int(self.kmax[1]))
        return np.ascontiguousarray(grids[:, self.y[:, 0], self.y[:, 1]].T)

    def transitions(self, params: ModelParams) -> np.ndarray:
        """(1, N, N) when homogeneous, else one matrix per observation row."""
        if self.n_covariates == 0:
            return transition_matrices(params, np.zeros(0))[None]
        return transition_matrices(params, self.x)

    def locate(self, row: int) -> tuple[str, int]:
        m = int(np.searchsorted(self.starts, row, side="right") - 1)
        return self.matches[m].match_id, int(row - self.starts[m])

    def match_logliks(self, params: ModelParams) -> np.ndarray:
        """Log-likelihood of each match, shape (M,)."""
        self.check(params.spec)
        ll, bad = _forward_kernel(
            np.ascontiguousarray(params.delta), self.emissions(params),
            np.ascontiguousarray(self.transitions(params)), self.starts, self.lengths,
        )
        if bad >= 0:
            match_id, t = self.locate(bad)
            raise NumericalFailure(
                f"forward probabilities vanish for match {match_id!r} at time index {t}"
            )
        return ll

    def loglik(self, params: ModelParams) -> float:
        return float(self.match_logliks(params).sum())


def log_forward(params: ModelParams, match: MatchSeries) -> float:
    """Log-likelihood of a single match (scaled forward recursion, O(T N^2))."""
    return SeriesBatch([match]).loglik(params)


def log_likelihood(params: ModelParams, data) -> float:
    """Sum of per-match log-likelihoods.

    ``data`` may be a sequence of :class:`MatchSeries`, a dataset exposing
    ``.matches``, or a prebuilt :class:`SeriesBatch`.
    """
    batch = data if isinstance(data, SeriesBatch) else SeriesBatch(data)
    return batch.loglik(params)


def information_criteria(loglik: float, spec: ModelSpec | int, n_obs: int) -> tuple[float, float]:
    """``(AIC, BIC)``; ``spec`` may also be given directly as a parameter count."""
    if n_obs < 1:
        raise ValueError("n_obs must be >= 1")
    k = spec if isinstance(spec, (int, np.integer)) else num_params(spec)
    return -2.0 * loglik + 2.0 * k, -2.0 * loglik + k * math.log(n_obs)
