"""Synthetic matches drawn from a fitted or hypothesised model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cmp import support_bound
from .copula import pmf_grid
from .errors import NumericalFailure
from .likelihood import MatchSeries
from .model import ModelParams, transition_matrix

__all__ = [
    "FootballCovariates",
    "SimulatedMatch",
    "StateSampler",
    "simulate_match",
    "simulate_matches",
]

#: emission tables are truncated where each marginal tail drops below this
TAIL_MASS = 1e-10
#: largest count per variable a simulation table may need
MAX_SUPPORT = 5_000


@dataclass(frozen=True, eq=False)
class SimulatedMatch(MatchSeries):
    """A :class:`MatchSeries` that also records its hidden states and raw covariates."""

    states: np.ndarray = None
    raw: dict = None


class FootballCovariates:
    """Simple generative model for the in-game covariates.

    Market value and the home flag are constants. The score difference moves
    with goals: each shot of the modelled team becomes a goal with probability
    ``goal_prob``, and the opponent scores at a constant per-minute rate.
    Covariates at minute ``t`` only see counts observed before ``t``.
    """

    def __init__(self, market_value: float = 200.0, home: int = 1,
                 goal_prob: float = 0.1, opp_goal_rate: float = 0.012):
        self.market_value = float(market_value)
        self.home = int(home)
        self.goal_prob = goal_prob
        self.opp_goal_rate = opp_goal_rate
        self._score = 0

    def reset(self, rng: np.random.Generator) -> None:
        self._score = 0

    def __call__(self, t: int, prev_y, rng: np.random.Generator) -> dict[str, float]:
        if prev_y is not None:
            self._score += int(rng.binomial(int(prev_y[0]), self.goal_prob))
            self._score -= int(rng.poisson(self.opp_goal_rate))
        return {
            "opp_market_value": self.market_value,
            "score_diff": float(self._score),
            "home": float(self.home),
            "minute": float(t + 1),
        }


class StateSampler:
    """Conditional inverse-cdf sampler for one state's bivariate pmf."""

    def __init__(self, params: ModelParams, state: int, tail: float = TAIL_MASS):
        m1, m2 = params.marginal(state, 0), params.marginal(state, 1)
        k1, k2 = support_bound(m1, tail), support_bound(m2, tail)
        if max(k1, k2) > MAX_SUPPORT:
            raise NumericalFailure(
                f"state {state}: support needed for tail mass {tail} exceeds {MAX_SUPPORT}"
            )
        grid = pmf_grid(params.copula(state), m1, m2, k1, k2)
        self.row_cum = np.cumsum(grid.sum(axis=1))
        self.cond_cum = np.cumsum(grid, axis=1)

    def draw(self, rng: np.random.Generator) -> tuple[int, int]:
        u1, u2 = rng.random(2)
        y1 = int(np.searchsorted(self.row_cum, u1 * self.row_cum[-1], side="right"))
        y1 = min(y1, len(self.row_cum) - 1)
        row = self.cond_cum[y1]
        y2 = int(np.searchsorted(row, u2 * row[-1], side="right"))
        return y1, min(y2, len(row) - 1)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def simulate_match(params: ModelParams, T: int, covariates=None, seed=None,
                   match_id: str = "sim", samplers=None) -> SimulatedMatch:
    """Draw one match of length ``T``.

    ``s_1 ~ delta``; for ``t >= 2`` the state moves according to the
    transition matrix at the covariates of minute ``t``; counts are drawn
    from the state's bivariate pmf.

    Parameters
    ----------
    covariates : callable, optional
        ``covariates(t, prev_y, rng) -> {name: raw value}`` with an optional
        ``reset(rng)`` method. Defaults to :class:`FootballCovariates`.
    seed : int or numpy Generator
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = _rng(seed)
    spec = params.spec
    gen = FootballCovariates() if covariates is None else covariates
    if hasattr(gen, "reset"):
        gen.reset(rng)
    if samplers is None:
        samplers = [StateSampler(params, i) for i in range(spec.n_states)]
    static_tpm = transition_matrix(params) if spec.n_covariates == 0 else None
    states = np.empty(T, dtype=np.int64)
    y = np.empty((T, 2), dtype=np.int64)
    raw_rows = []
    prev = None
    for t in range(T):
        values = gen(t, prev, rng)
        raw_rows.append(values)
        if t == 0:
            s = int(rng.choice(spec.n_states, p=params.delta))
        else:
            if static_tpm is None:
                tpm = transition_matrix(params, spec.covariate_vector(values))
            else:
                tpm = static_tpm
            s = int(rng.choice(spec.n_states, p=tpm[states[t - 1]]))
        states[t] = s
        y[t] = samplers[s].draw(rng)
        prev = y[t]
    raw = {k: np.array([r[k] for r in raw_rows]) for k in raw_rows[0]}
    x = spec.standardize(np.column_stack([raw[n] for n in spec.covariate_names])
                         if spec.n_covariates else np.zeros((T, 0)))
    return SimulatedMatch(match_id, y, x, states=states, raw=raw)


def simulate_matches(params: ModelParams, n_matches: int, T, covariates=None,
                     seed=None) -> list[SimulatedMatch]:
    """Draw ``n_matches`` independent matches; ``T`` is an int or one length per match."""
    rng = _rng(seed)
    lengths = [T] * n_matches if np.ndim(T) == 0 else list(T)
    if len(lengths) != n_matches:
        raise ValueError("need one length per match")
    samplers = [StateSampler(params, i) for i in range(params.n_states)]
    return [
        simulate_match(params, int(lengths[m]), covariates, rng, match_id=f"sim{m + 1:03d}",
                       samplers=samplers)
        for m in range(n_matches)
    ]
