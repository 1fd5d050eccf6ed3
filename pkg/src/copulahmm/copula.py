"""Archimedean copulas and the discrete bivariate pmf they induce on CMP margins.

For discrete margins the joint pmf is the rectangle measure of the copula
evaluated at the marginal cdfs::

    f(y1, y2) = C(F1(y1), F2(y2)) - C(F1(y1-1), F2(y2))
              - C(F1(y1), F2(y2-1)) + C(F1(y1-1), F2(y2-1))

with ``F(-1) = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .cmp import CmpParams, cdf_table, pmf_table
from .errors import NumericalFailure

__all__ = [
    "Family",
    "CopulaSpec",
    "CopulaNumericalError",
    "INDEPENDENCE_THRESHOLD",
    "PMF_NEGATIVITY_TOL",
    "copula_cdf",
    "bivariate_pmf",
    "pmf_grid",
    "rectangle_masses",
]

#: |theta| below which Frank and Clayton are evaluated as the product copula
INDEPENDENCE_THRESHOLD = 1e-8
#: most negative rectangle mass accepted as roundoff before clamping
PMF_NEGATIVITY_TOL = -1e-12


class Family(str, Enum):
    INDEPENDENCE = "independence"
    FRANK = "frank"
    CLAYTON = "clayton"
    AMH = "amh"

    @classmethod
    def parse(cls, value: "Family | str") -> "Family":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(f.value for f in cls)
            raise ValueError(f"unknown copula family {value!r} (expected one of {choices})") from None


class CopulaNumericalError(NumericalFailure):
    """A rectangle mass came out clearly negative."""


def check_theta(family: Family, theta: float) -> None:
    """Raise ``ValueError`` if ``theta`` is outside the family's parameter domain."""
    if family is Family.INDEPENDENCE:
        return
    if not math.isfinite(theta):
        raise ValueError(f"{family.value} copula parameter must be finite, got {theta}")
    if family is Family.CLAYTON and theta < -1:
        raise ValueError(f"Clayton copula requires theta >= -1, got {theta}")
    if family is Family.AMH and not (-1 <= theta < 1):
        raise ValueError(f"AMH copula requires -1 <= theta < 1, got {theta}")


@dataclass(frozen=True)
class CopulaSpec:
    """Copula family plus its dependence parameter (ignored for independence)."""

    family: Family
    theta: float = 0.0

    def __post_init__(self):
        family = Family.parse(self.family)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "theta", float(self.theta))
        check_theta(family, self.theta)

    @property
    def is_independent(self) -> bool:
        if self.family is Family.INDEPENDENCE:
            return True
        if self.family in (Family.FRANK, Family.CLAYTON):
            return abs(self.theta) < INDEPENDENCE_THRESHOLD
        return self.theta == 0.0


def _frank(theta, u1, u2):
    # expm1/log1p keep the small-|theta| regime free of cancellation
    out = -np.log1p(np.expm1(-theta * u1) * np.expm1(-theta * u2) / np.expm1(-theta)) / theta
    if theta > 0:
        # for strong positive dependence the log1p argument approaches -1 near
        # (1, 1); there c - a - b + ab with a = exp(-theta u1) etc. is accurate
        a, b, c = np.exp(-theta * u1), np.exp(-theta * u2), math.exp(-theta)
        tail = (a <= 0.5) & (b <= 0.5)
        if np.any(tail):
            num = np.where(tail, a + b - a * b - c, 1.0)
            out = np.where(tail, -(np.log(num) - math.log1p(-c)) / theta, out)
    return out


def _clayton(theta, u1, u2):
    s = np.expm1(-theta * np.log(u1)) + np.expm1(-theta * np.log(u2))
    if theta > 0:
        return np.exp(-np.log1p(s) / theta)
    # theta < 0: the max{., 0} branch
    safe = np.where(s > -1.0, s, 0.0)
    return np.where(s > -1.0, np.exp(-np.log1p(safe) / theta), 0.0)


def _amh(theta, u1, u2):
    return u1 * u2 / (1.0 - theta * (1.0 - u1) * (1.0 - u2))


def _raw_cdf(family: Family, theta: float, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    if family is Family.INDEPENDENCE or (
        family in (Family.FRANK, Family.CLAYTON) and abs(theta) < INDEPENDENCE_THRESHOLD
    ):
        out = u1 * u2
    elif family is Family.FRANK:
        out = _frank(theta, u1, u2)
    elif family is Family.CLAYTON:
        out = _clayton(theta, u1, u2)
    else:
        out = _amh(theta, u1, u2)
    out = np.where(u1 == 1.0, u2, out)
    out = np.where(u2 == 1.0, u1, out)
    return np.where((u1 == 0.0) | (u2 == 0.0), 0.0, out)


def copula_cdf(c: CopulaSpec, u1, u2):
    """Evaluate ``C(u1, u2)``; broadcasts over array arguments.

    ``C(u, 0) = C(0, u) = 0`` and ``C(u, 1) = C(1, u) = u`` hold exactly.
    """
    a = np.asarray(u1, dtype=float)
    b = np.asarray(u2, dtype=float)
    if np.any((a < 0) | (a > 1) | (b < 0) | (b > 1)):
        raise ValueError("copula arguments must lie in [0, 1]")
    a, b = np.broadcast_arrays(a, b)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = _raw_cdf(c.family, c.theta, a, b)
    return float(out) if out.ndim == 0 else out


def rectangle_masses(c: CopulaSpec, m1: CmpParams, m2: CmpParams,
                     kmax1: int, kmax2: int) -> np.ndarray:
    """Inclusion-exclusion masses on ``{0..kmax1} x {0..kmax2}`` without clamping.

    Independence (including the small-|theta| limit of Frank and Clayton) is
    evaluated as the outer product of the marginal pmfs.
    """
    if c.is_independent:
        return np.outer(pmf_table(m1, kmax1), pmf_table(m2, kmax2))
    f1 = cdf_table(m1, kmax1)
    f2 = cdf_table(m2, kmax2)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        big = _raw_cdf(c.family, c.theta, f1[:, None], f2[None, :])
    return big[1:, 1:] - big[:-1, 1:] - big[1:, :-1] + big[:-1, :-1]


def pmf_grid(c: CopulaSpec, m1: CmpParams, m2: CmpParams, kmax1: int, kmax2: int) -> np.ndarray:
    """Joint pmf on ``{0..kmax1} x {0..kmax2}`` as a ``(kmax1+1, kmax2+1)`` array.

    Rectangle masses within rounding of zero are clamped into ``[0, 1]``.

    Raises
    ------
    CopulaNumericalError
        If any rectangle mass is below ``PMF_NEGATIVITY_TOL``.
    """
    grid = rectangle_masses(c, m1, m2, kmax1, kmax2)
    bad = ~(grid >= PMF_NEGATIVITY_TOL)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise CopulaNumericalError(
            f"{c.family.value} copula (theta={c.theta}) gives pmf {grid[i, j]!r} "
            f"at (y1, y2) = ({i}, {j})"
        )
    return np.clip(grid, 0.0, 1.0)


def bivariate_pmf(c: CopulaSpec, m1: CmpParams, m2: CmpParams, y1, y2):
    """Joint pmf of the count pair ``(y1, y2)``; broadcasts over arrays."""
    a = np.asarray(y1)
    b = np.asarray(y2)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("counts must be nonnegative")
    a, b = np.broadcast_arrays(a.astype(np.int64), b.astype(np.int64))
    grid = pmf_grid(c, m1, m2, int(a.max(initial=0)), int(b.max(initial=0)))
    out = grid[a, b]
    return float(out) if out.ndim == 0 else out
