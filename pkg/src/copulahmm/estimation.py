"""Direct numerical maximum likelihood with random multi-start.

The negative log-likelihood is minimized over the unconstrained working
vector (see :mod:`copulahmm.model`) with BFGS on central-difference
gradients; Nelder-Mead polishes the result when BFGS stops abnormally.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .copula import Family
from .errors import FitError, NumericalFailure, StartRejected
from .likelihood import SeriesBatch, information_criteria
from .model import ModelParams, ModelSpec, num_params, pack, transition_matrices, unpack

__all__ = [
    "OptimizerSettings",
    "StartRanges",
    "FitResult",
    "TransitionCurves",
    "objective",
    "fit",
    "multi_start_fit",
    "order_states",
    "numerical_hessian",
    "covariance_from_hessian",
    "covariance_estimate",
    "transition_curve_ci",
]

logger = logging.getLogger(__name__)

#: objective value reported where the likelihood cannot be evaluated
PENALTY = 1e12


@dataclass(frozen=True)
class OptimizerSettings:
    gtol: float = 1e-5
    xtol: float = 1e-9
    maxiter: int = 2000
    bfgs_restarts: int = 3
    fallback: bool = True


@dataclass(frozen=True)
class StartRanges:
    """Uniform ranges from which random starting values are drawn."""

    lam_shots: tuple[float, float] = (0.05, 0.5)
    lam_touches: tuple[float, float] = (0.5, 5.0)
    nu: tuple[float, float] = (0.05, 1.5)
    theta: dict = field(default_factory=lambda: {
        "frank": (-3.0, 3.0), "clayton": (-0.5, 3.0), "amh": (-0.9, 0.9),
    })
    intercept: tuple[float, float] = (-3.0, -1.0)
    slope: tuple[float, float] = (-0.5, 0.5)
    delta_logit: tuple[float, float] = (-1.0, 1.0)

    def draw(self, spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
        """One random working vector for ``spec``."""
        n, p = spec.n_states, spec.n_covariates
        lam = np.column_stack([rng.uniform(*self.lam_shots, n), rng.uniform(*self.lam_touches, n)])
        nu = rng.uniform(*self.nu, (n, 2))
        if spec.copula is Family.INDEPENDENCE:
            theta = np.zeros(n)
        else:
            theta = rng.uniform(*self.theta[spec.copula.value], n)
        logits = np.concatenate(([0.0], rng.uniform(*self.delta_logit, n - 1)))
        delta = np.exp(logits) / np.exp(logits).sum()
        coeffs = np.zeros((n, n, p + 1))
        off = ~np.eye(n, dtype=bool)
        k = int(off.sum())
        coeffs[off, 0] = rng.uniform(*self.intercept, k)
        if p:
            coeffs[off, 1:] = rng.uniform(*self.slope, (k, p))
        return pack(ModelParams(spec, lam, nu, theta, delta, coeffs))


@dataclass(frozen=True, eq=False)
class FitResult:
    spec: ModelSpec
    params: ModelParams
    loglik: float
    aic: float
    bic: float
    n_obs: int
    working: np.ndarray
    working_cov: np.ndarray | None = None
    n_starts: int = 1
    best_start_index: int = 0
    converged: bool = False
    n_iter: int = 0
    message: str = ""
    start_logliks: tuple = ()

    @property
    def n_params(self) -> int:
        return num_params(self.spec)


class _Objective:
    """Negative log-likelihood on the working scale with a finite penalty outside the domain."""

    def __init__(self, spec: ModelSpec, data):
        self.spec = spec
        self.batch = data if isinstance(data, SeriesBatch) else SeriesBatch(data)
        self.batch.check(spec)

    def exact(self, w) -> float:
        return -self.batch.loglik(unpack(self.spec, w))

    def __call__(self, w) -> float:
        try:
            with np.errstate(all="ignore"):
                val = self.exact(w)
        except (NumericalFailure, ValueError, FloatingPointError):
            return PENALTY
        return val if math.isfinite(val) else PENALTY


def objective(spec: ModelSpec, data):
    """Callable ``w -> -loglik(unpack(spec, w))`` used by :func:`fit`."""
    return _Objective(spec, data)


def _central_gradient(f, w) -> np.ndarray:
    h = np.cbrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(w))
    grad = np.empty_like(w)
    for i in range(len(w)):
        e = np.zeros_like(w)
        e[i] = h[i]
        grad[i] = (f(w + e) - f(w - e)) / (2 * h[i])
    return grad


def fit(spec: ModelSpec, data, start, settings: OptimizerSettings | None = None,
        covariance: bool = False) -> FitResult:
    """Maximize the likelihood from a single working-scale starting point.

    Raises
    ------
    StartRejected
        If the objective is not finite at ``start``.
    FitError
        If the optimizer ends at a point where the likelihood cannot be evaluated.
    """
    settings = settings or OptimizerSettings()
    obj = _Objective(spec, data)
    start = np.asarray(start, dtype=float)
    if start.shape != (num_params(spec),):
        raise ValueError(f"start must have length {num_params(spec)}, got {start.shape}")
    try:
        f0 = obj.exact(start)
    except (NumericalFailure, ValueError) as exc:
        raise StartRejected(f"objective not finite at start: {exc}") from exc
    if not math.isfinite(f0):
        raise StartRejected("objective not finite at start")

    # per-observation scale keeps the first quasi-Newton steps O(1); the
    # gradient tolerance applies on this scale
    scale = 1.0 / obj.batch.n_obs

    def scaled(w):
        return obj(w) * scale

    w, fun, nit, messages = start, f0 * scale, 0, []
    converged = False
    for _ in range(1 + settings.bfgs_restarts):
        res = optimize.minimize(
            scaled, w, method="BFGS", jac="3-point",
            options={"gtol": settings.gtol, "xrtol": settings.xtol,
                     "maxiter": max(settings.maxiter - nit, 1)},
        )
        nit += int(res.nit)
        messages.append(f"BFGS: {res.message}")
        improved = fun - res.fun
        if res.fun <= fun:
            w, fun = res.x, float(res.fun)
        if res.success:
            converged = True
            break
        # restart from the stalled point with a fresh Hessian approximation
        # while that still helps
        if res.status != 2 or improved <= settings.xtol or nit >= settings.maxiter:
            break
    if not converged and settings.fallback:
        nm = optimize.minimize(
            scaled, w, method="Nelder-Mead",
            options={"xatol": settings.xtol, "fatol": 1e-12, "maxiter": settings.maxiter,
                     "adaptive": True},
        )
        nit += int(nm.nit)
        messages.append(f"Nelder-Mead: {nm.message}")
        if nm.fun <= fun:
            w, fun = nm.x, float(nm.fun)
        converged = bool(np.max(np.abs(_central_gradient(scaled, w))) <= settings.gtol)
    message = "; ".join(messages)
    fun /= scale
    if fun >= PENALTY:
        raise FitError(f"optimizer ended outside the evaluable region: {message}")
    params = unpack(spec, w)
    loglik = -obj.exact(w)
    aic, bic = information_criteria(loglik, spec, obj.batch.n_obs)
    result = FitResult(spec, params, loglik, aic, bic, obj.batch.n_obs, w.copy(),
                       converged=converged, n_iter=nit, message=message)
    if covariance:
        result = replace(result, working_cov=_try_covariance(result, obj.batch))
    return result


def _try_covariance(res: FitResult, batch):
    # the optimum can sit next to a region where the likelihood cannot be
    # evaluated (e.g. a CMP whose series diverges); keep the fit, drop the SEs
    try:
        return covariance_estimate(res, batch)
    except NumericalFailure as exc:
        warnings.warn(f"covariance not available: {exc}", RuntimeWarning, stacklevel=3)
        return None


def multi_start_fit(spec: ModelSpec, data, n_starts: int = 50, seed: int = 0,
                    ranges: StartRanges | None = None, settings: OptimizerSettings | None = None,
                    covariance: bool = True, starts=None) -> FitResult:
    """Fit from ``n_starts`` random starting points and keep the best likelihood.

    Starting points are drawn up front from ``ranges`` with
    ``numpy.random.default_rng(seed)``, so the result is fully determined by
    the inputs. Ties go to the lowest start index. Explicit ``starts`` (a
    sequence of working vectors) replace the random draws.
    """
    if n_starts < 1 and starts is None:
        raise ValueError("n_starts must be >= 1")
    ranges = ranges or StartRanges()
    batch = data if isinstance(data, SeriesBatch) else SeriesBatch(data)
    if starts is None:
        rng = np.random.default_rng(seed)
        starts = [ranges.draw(spec, rng) for _ in range(n_starts)]
    best, failures, logliks = None, [], []
    for k, w0 in enumerate(starts):
        try:
            res = fit(spec, batch, w0, settings)
        except (FitError, NumericalFailure) as exc:
            failures.append(f"start {k}: {exc}")
            logliks.append(float("nan"))
            logger.debug("start %d failed: %s", k, exc)
            continue
        logliks.append(res.loglik)
        logger.info("start %d: loglik %.4f (converged=%s)", k, res.loglik, res.converged)
        if best is None or res.loglik > best[1].loglik:
            best = (k, res)
    if best is None:
        raise FitError("all starts failed:\n" + "\n".join(failures))
    k, res = best
    res = replace(res, n_starts=len(starts), best_start_index=k, start_logliks=tuple(logliks))
    if covariance:
        res = replace(res, working_cov=_try_covariance(res, batch))
    return res


def order_states(fit_result: FitResult, order=None) -> FitResult:
    """Relabel the states of a fit, by default in ascending order of the touches mean.

    The working vector is re-packed and its covariance (if any) is mapped
    through the Jacobian of the relabelling, which is linear on the working
    scale apart from the delta logits' change of reference state.
    """
    spec = fit_result.spec
    if order is None:
        order = np.argsort(fit_result.params.means()[:, 1], kind="stable")
    order = np.asarray(order, dtype=int)
    if np.array_equal(order, np.arange(spec.n_states)):
        return fit_result

    def relabel(w):
        return pack(unpack(spec, w).permuted(order))

    params = fit_result.params.permuted(order)
    working = pack(params)
    cov = fit_result.working_cov
    if cov is not None:
        w0 = np.asarray(fit_result.working, dtype=float)
        jac = np.empty((len(w0), len(w0)))
        for i in range(len(w0)):
            e = np.zeros_like(w0)
            e[i] = 1e-6
            jac[:, i] = (relabel(w0 + e) - relabel(w0 - e)) / 2e-6
        cov = jac @ cov @ jac.T
        cov = 0.5 * (cov + cov.T)
    return replace(fit_result, params=params, working=working, working_cov=cov)


def numerical_hessian(f, w, rel_step: float = 1e-4, min_step: float = 1e-6) -> np.ndarray:
    """Central-difference Hessian of scalar ``f`` at ``w``.

    Step for coordinate ``i`` is ``max(rel_step * |w_i|, min_step)``.
    """
    w = np.asarray(w, dtype=float)
    d = len(w)
    h = np.maximum(rel_step * np.abs(w), min_step)
    f0 = f(w)
    hess = np.empty((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        hess[i, i] = (f(w + ei) - 2.0 * f0 + f(w - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(d)
            ej[j] = h[j]
            val = (f(w + ei + ej) - f(w + ei - ej) - f(w - ei + ej) + f(w - ei - ej)) / (4 * h[i] * h[j])
            hess[i, j] = hess[j, i] = val
    return hess


def covariance_from_hessian(hess) -> np.ndarray:
    """Invert an observed-information matrix into a symmetric PSD covariance.

    A pseudo-inverse is used when the condition number exceeds 1e12, and
    negative eigenvalues of an indefinite Hessian are truncated to zero; both
    situations emit a ``RuntimeWarning``.
    """
    hess = 0.5 * (np.asarray(hess, dtype=float) + np.asarray(hess, dtype=float).T)
    if np.linalg.cond(hess) > 1e12:
        warnings.warn("Hessian is ill-conditioned; using the pseudo-inverse", RuntimeWarning,
                      stacklevel=2)
        cov = np.linalg.pinv(hess, hermitian=True)
    else:
        cov = np.linalg.inv(hess)
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    if np.any(vals < 0):
        warnings.warn("Hessian is not positive definite; negative variance directions truncated",
                      RuntimeWarning, stacklevel=2)
        cov = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
        cov = 0.5 * (cov + cov.T)
    return cov


def covariance_estimate(fit_result: FitResult, data) -> np.ndarray:
    """Approximate covariance of the working-parameter estimator (inverse observed information)."""
    obj = _Objective(fit_result.spec, data)
    return covariance_from_hessian(numerical_hessian(obj.exact, fit_result.working))


@dataclass(frozen=True, eq=False)
class TransitionCurves:
    """Transition probabilities along a covariate grid, each of shape (G, N, N)."""

    sweep: str
    grid: np.ndarray
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def transition_curve_ci(fit_result: FitResult, sweep: str, grid, fixed: dict | None = None,
                        n_draws: int = 1000, seed: int = 0, level: float = 0.95,
                        cov=None) -> TransitionCurves:
    """Pointwise Monte Carlo confidence bands for ``gamma_ij`` along one covariate.

    Working vectors are drawn from the normal approximation of the estimator
    (mean at the fit, covariance ``cov`` or ``fit_result.working_cov``), mapped
    to transition matrices at each grid point, and summarized by percentile
    intervals. Covariate values are in raw units.
    """
    spec = fit_result.spec
    if sweep not in spec.covariate_names:
        raise ValueError(f"covariate {sweep!r} is not part of the model {spec.covariate_names}")
    cov = fit_result.working_cov if cov is None else np.asarray(cov, dtype=float)
    if cov is None:
        raise ValueError("no working covariance available; run covariance_estimate first")
    cov = 0.5 * (cov + cov.T)
    vals = np.linalg.eigvalsh(cov)
    if np.any(vals < -1e-10 * max(1.0, float(np.max(np.abs(vals))))):
        raise ValueError("covariance matrix is not positive semidefinite; "
                         "regularize it (e.g. via covariance_from_hessian's pseudo-inverse)")
    fixed = dict(fixed or {})
    fixed.pop(sweep, None)
    grid = np.asarray(grid, dtype=float)
    x = np.stack([spec.covariate_vector({**fixed, sweep: v}) for v in grid])
    point = transition_matrices(fit_result.params, x)
    rng = np.random.default_rng(seed)
    draws = rng.multivariate_normal(fit_result.working, cov, size=n_draws, method="eigh")
    sims = np.stack([transition_matrices(unpack(spec, w), x) for w in draws])
    alpha = (1.0 - level) / 2.0
    lower, upper = np.quantile(sims, [alpha, 1.0 - alpha], axis=0)
    return TransitionCurves(sweep, grid, point, np.clip(lower, 0, 1), np.clip(upper, 0, 1))
