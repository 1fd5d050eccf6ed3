# ---
# jupyter:
#   jupytext:
#     formats: ipynb,py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Counts with flexible dispersion, joined by a copula
#
# A Conway-Maxwell-Poisson (CMP) variable has two parameters. `lam` plays the
# role of a rate and `nu` controls dispersion: `nu = 1` is the Poisson, smaller
# values spread the mass out and larger values concentrate it.

# %%
import numpy as np

from copulahmm import CmpParams, CopulaSpec, copula_cdf, mean, pmf_grid, pmf_table
from copulahmm.cmp import cdf_table

np.set_printoptions(precision=4, suppress=True)

# %%
for nu in (0.5, 1.0, 2.0):
    p = CmpParams(3.0, nu)
    probs = pmf_table(p, 60)
    k = np.arange(61)
    m = probs @ k
    var = probs @ (k - m) ** 2
    print(f"nu={nu:3.1f}  mean={m:6.3f}  var/mean={var / m:5.3f}")

# %% [markdown]
# With `nu = 0` and `lam < 1` the CMP is geometric. The mean uses a truncated
# series, here at 100 terms.

# %%
g = CmpParams(0.6, 0.0)
print(mean(g), 0.6 / 0.4)

# %% [markdown]
# ## Copulas on the unit square
#
# Frank and Clayton cover both signs of dependence. Ali-Mikhail-Haq only
# reaches moderate correlation. Each family collapses to `u * v` as theta
# goes to zero.

# %%
u = np.array([0.2, 0.5, 0.8])
for fam, theta in [("frank", 4.0), ("frank", -4.0), ("clayton", 2.0), ("amh", 0.9),
                   ("clayton", 1e-10)]:
    print(f"{fam:8s} {theta:+g}", copula_cdf(CopulaSpec(fam, theta), u, u), "vs", u * u)

# %% [markdown]
# ## Joint pmf of two dependent counts
#
# The joint probability of a pair of counts is the copula mass of the
# rectangle between neighbouring cdf values. Correlation shows up directly in
# the grid.

# %%
shots, touches = CmpParams(0.2, 0.6), CmpParams(1.1, 0.15)
for theta in (-0.9, 0.0, 4.0):
    grid = pmf_grid(CopulaSpec("clayton", theta), shots, touches, 40, 200)
    a, b = np.arange(41)[:, None], np.arange(201)[None, :]
    ea, eb = (grid * a).sum(), (grid * b).sum()
    cov = (grid * (a - ea) * (b - eb)).sum()
    print(f"theta={theta:+.1f}  total={grid.sum():.6f}  cov(shots, touches)={cov:+.4f}")

# %% [markdown]
# The marginals of the grid reproduce the CMP pmfs, whatever the copula.

# %%
grid = pmf_grid(CopulaSpec("frank", 6.0), shots, touches, 40, 200)
print(np.abs(grid.sum(axis=1) - pmf_table(shots, 40)).max())
print(np.abs(np.cumsum(grid.sum(axis=0)) - cdf_table(touches, 200)[1:]).max())
