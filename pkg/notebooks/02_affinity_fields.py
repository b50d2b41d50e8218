# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Affinity fields of local and SLnL blocks
#
# The affinity field of an output cell is the set of input cells that can
# change it. A local block (three convolutions plus a residual) sees a k x k
# window. Adding non-local branches makes every cell visible. Here both
# fields are measured by perturbing the input one cell at a time.

# %%
import numpy as np

from slnl.blocks import (LocalBlockParams, NonLocalParams, SLnLBlockParams, affinity, affinity_field,
                         empirical_affinity_field, local_block, nonlocal_forward, slnl_block)
from slnl.oracles import pairwise_nonlocal

rng = np.random.default_rng(1)
t_dim, n_dim = 6, 5
x = rng.normal(size=(4, t_dim, n_dim))
local = LocalBlockParams.init(4, 16, 3, rng)
slnl = SLnLBlockParams.init(4, 16, 3, rng)


def show(field):
    for i in range(t_dim):
        print("  " + " ".join("#" if (i, j) in field else "." for j in range(n_dim)))


# %%
for target in ((2, 2), (0, 0)):
    print("local block, target", target)
    show(empirical_affinity_field(lambda v: local_block(v, local, "eval"), x, target))
    print("SLnL block, target", target)
    show(empirical_affinity_field(lambda v: slnl_block(v, slnl, "eval"), x, target))

# %% [markdown]
# The measured sets equal the structural ones from `affinity_field`. At a
# corner the zero padding clips the 3 x 3 window to 4 cells.

# %%
target = (0, 0)
measured = empirical_affinity_field(lambda v: local_block(v, local, "eval"), x, target)
print(measured == affinity_field("local", 3, t_dim, n_dim, target), len(measured))

# %% [markdown]
# ## The non-local operation against a brute-force sum
#
# Each output position is an affinity-weighted average of embedded features
# over all positions, with a softmax over sources. The pairwise oracle does
# the O(M^2) double loop directly.

# %%
m, p, q = 12, 3, 4
feats = rng.normal(size=(m, p))
nl = NonLocalParams.init(p, q, 2, "spatiotemporal", rng)
fast = nonlocal_forward(feats, nl).data
slow, weights = pairwise_nonlocal(feats, nl.w_g.data, nl.w_phi.data, nl.w_psi.data, nl.w_w.data)
print("max deviation:", np.abs(fast - slow).max())
print("row sums:", np.round(affinity(feats, nl).data.sum(axis=1), 12)[:4], "...")
