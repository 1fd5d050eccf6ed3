"""Conway-Maxwell-Poisson (CMP) count distribution.

The pmf is ``lambda**x / ((x!)**nu * Z(lambda, nu))`` with the normalizing
constant ``Z`` evaluated by a truncated series in log space. ``nu = 1`` gives
the Poisson, ``nu = 0`` with ``lambda < 1`` the geometric distribution and
``nu -> inf`` a Bernoulli with success probability ``lambda / (1 + lambda)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import NumericalFailure

__all__ = [
    "CmpParams",
    "CmpConvergenceError",
    "normalizing_constant",
    "log_normalizing_constant",
    "log_pmf",
    "pmf",
    "pmf_table",
    "cdf",
    "cdf_table",
    "mean",
    "support_bound",
]

#: relative size of the last included term at which the series for Z stops
Z_RELATIVE_TOL = 1e-12
#: hard cap on the number of series terms
Z_MAX_TERMS = 10_000

_LOG_TOL = math.log(Z_RELATIVE_TOL)


class CmpConvergenceError(NumericalFailure):
    """The series for the normalizing constant did not converge within the term cap."""


@dataclass(frozen=True)
class CmpParams:
    """Parameters of one CMP marginal.

    Parameters
    ----------
    lam : float
        Rate-like parameter, strictly positive.
    nu : float
        Dispersion, nonnegative. ``nu < 1`` is overdispersed relative to the
        Poisson, ``nu > 1`` underdispersed.
    """

    lam: float
    nu: float

    def __post_init__(self):
        lam, nu = float(self.lam), float(self.nu)
        if not (math.isfinite(lam) and lam > 0):
            raise ValueError(f"CMP lambda must be finite and > 0, got {self.lam!r}")
        if not (nu >= 0 and not math.isnan(nu)):
            raise ValueError(f"CMP nu must be >= 0, got {self.nu!r}")
        if nu == 0 and lam >= 1:
            raise ValueError(
                f"CMP with nu=0 requires lambda < 1 (got lambda={lam}); "
                "the normalizing constant diverges"
            )
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "nu", nu)


def _log_terms(lam: float, nu: float, k: np.ndarray) -> np.ndarray:
    return k * math.log(lam) - nu * gammaln(k + 1.0)


@lru_cache(maxsize=4096)
def _log_z(lam: float, nu: float) -> float:
    running = -np.inf
    start = 0
    chunk = 128
    while start < Z_MAX_TERMS:
        stop = min(start + chunk, Z_MAX_TERMS)
        k = np.arange(start, stop, dtype=float)
        logt = _log_terms(lam, nu, k)
        # running log-sum including each term
        acc = np.logaddexp.accumulate(np.concatenate(([running], logt)))[1:]
        done = np.flatnonzero(logt - acc < _LOG_TOL)
        if done.size:
            return float(acc[done[0]])
        running = float(acc[-1])
        if not math.isfinite(running):
            break
        start = stop
        chunk *= 2
    raise CmpConvergenceError(
        f"Z(lambda={lam}, nu={nu}) did not converge within {Z_MAX_TERMS} terms"
    )


def log_normalizing_constant(p: CmpParams) -> float:
    """Return ``log Z(lambda, nu)``.

    Terms ``k = 0, 1, 2, ...`` are accumulated in log space until the current
    term falls below ``1e-12`` times the running sum (current term included).
    Raises :class:`CmpConvergenceError` when 10,000 terms do not suffice.
    """
    return _log_z(p.lam, p.nu)


def normalizing_constant(p: CmpParams) -> float:
    """Return ``Z(lambda, nu)``; see :func:`log_normalizing_constant`."""
    return math.exp(_log_z(p.lam, p.nu))


def log_pmf(p: CmpParams, x):
    """Log probability of ``x`` (scalar or array of nonnegative integers)."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("CMP support is the nonnegative integers")
    out = _log_terms(p.lam, p.nu, xa) - _log_z(p.lam, p.nu)
    return float(out) if out.ndim == 0 else out


def pmf(p: CmpParams, x):
    """Probability mass at ``x`` (scalar or array)."""
    out = np.exp(log_pmf(p, x))
    return float(out) if np.ndim(out) == 0 else out


def pmf_table(p: CmpParams, kmax: int) -> np.ndarray:
    """pmf values for ``k = 0, ..., kmax``."""
    k = np.arange(kmax + 1, dtype=float)
    return np.exp(_log_terms(p.lam, p.nu, k) - _log_z(p.lam, p.nu))


def cdf_table(p: CmpParams, kmax: int) -> np.ndarray:
    """cdf values for ``k = -1, 0, ..., kmax`` (length ``kmax + 2``).

    The leading entry is the exact zero at ``k = -1``; values are clipped to
    at most one.
    """
    out = np.empty(kmax + 2)
    out[0] = 0.0
    np.cumsum(pmf_table(p, kmax), out=out[1:])
    np.minimum(out, 1.0, out=out)
    return out


def cdf(p: CmpParams, x):
    """``P(X <= x)`` for integer ``x`` (scalar or array); exactly 0 for ``x < 0``."""
    xa = np.asarray(x)
    if xa.size == 0:
        return np.zeros(xa.shape)
    if np.any(xa != np.floor(xa)):
        raise ValueError("cdf is evaluated at integer arguments only")
    xi = xa.astype(np.int64)
    kmax = max(int(xi.max()), 0)
    table = cdf_table(p, kmax)
    out = table[np.clip(xi, -1, kmax) + 1]
    return float(out) if out.ndim == 0 else out


def mean(p: CmpParams, d: int = 100) -> float:
    """Truncated first moment ``sum_{k=0}^{d} k * pmf(k)``.

    No correction is made for the mass beyond ``d``; with the default
    ``d = 100`` this is negligible for the parameter ranges seen in practice.
    """
    if d < 1:
        raise ValueError("truncation point d must be >= 1")
    k = np.arange(d + 1, dtype=float)
    return float(np.sum(k * pmf_table(p, d)))


def support_bound(p: CmpParams, tail: float = 1e-10, kmax: int = 100_000) -> int:
    """Smallest ``K`` with ``P(X > K) < tail``.

    Raises :class:`CmpConvergenceError` if no such ``K <= kmax`` exists.
    """
    size = 64
    while True:
        size = min(size, kmax)
        table = cdf_table(p, size)[1:]
        hit = np.flatnonzero(1.0 - table < tail)
        if hit.size:
            return int(hit[0])
        if size >= kmax:
            raise CmpConvergenceError(
                f"tail mass of CMP(lambda={p.lam}, nu={p.nu}) exceeds {tail} beyond {kmax}"
            )
        size *= 4
