# ---
# jupyter:
#   jupytext:
#     formats: ipynb,py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Simulate matches, fit a hidden Markov model, decode the states
#
# Three latent regimes with different intensity of play emit a pair of counts
# per minute. We simulate a season from known parameters and check what a
# multi-start fit recovers.

# %%
import numpy as np

from copulahmm import (
    ModelParams,
    ModelSpec,
    SeriesBatch,
    intercepts_from_tpm,
    multi_start_fit,
    order_states,
    simulate_matches,
    stationary_distribution,
    transition_matrix,
    viterbi,
)

np.set_printoptions(precision=3, suppress=True)

# %%
spec = ModelSpec(3, "clayton")
truth = ModelParams(
    spec,
    lam=[[0.2, 0.7], [0.12, 1.1], [0.13, 2.1]],
    nu=[[0.6, 0.05], [0.05, 0.15], [0.05, 0.35]],
    theta=[1.5, 0.5, -0.05],
    coeffs=intercepts_from_tpm([[0.60, 0.05, 0.35], [0.02, 0.96, 0.02], [0.20, 0.02, 0.78]]),
)
print("true means (shots, touches):\n", truth.means())
print("stationary:", stationary_distribution(transition_matrix(truth)))

# %%
matches = simulate_matches(truth, 12, 95, seed=1)
data = SeriesBatch(matches)
print(data.n_obs, "observations, true log-likelihood", round(data.loglik(truth), 2))

# %% [markdown]
# Random starts are drawn from default ranges. Ten starts keep the demo
# quick; real runs use more. States are relabelled afterwards so that state 1
# has the fewest touches.

# %%
res = order_states(multi_start_fit(spec, data, n_starts=10, seed=0))
print("loglik", round(res.loglik, 2), "AIC", round(res.aic, 1), "BIC", round(res.bic, 1))
print("start log-likelihoods:", np.round(res.start_logliks, 2))
print("fitted means:\n", res.params.means())
print("fitted theta:", res.params.theta)
print("fitted transitions:\n", transition_matrix(res.params))

# %% [markdown]
# `nan` marks starts that were rejected: with a large touches `lam` and a
# small `nu` the CMP series does not converge, so the likelihood cannot be
# evaluated there. The remaining starts land on several local optima, which
# is why many starts are needed. State 1 here mixes the two quieter true
# regimes, a common outcome when their emission distributions overlap.

# %% [markdown]
# Viterbi paths for the first match, against the simulated truth. The API is
# 0-based.

# %%
m = matches[0]
dec = viterbi(res.params, m)
print("agreement:", np.mean(dec.states == m.states))
print("true   ", m.states[:40])
print("decoded", dec.states[:40])

# %% [markdown]
# Standard errors on the working scale come from the numerical Hessian.

# %%
se = np.sqrt(np.diag(res.working_cov))
print("SE of log lambda:\n", se[:6].reshape(3, 2))
