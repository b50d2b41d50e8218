# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Soft-margin focal loss
#
# The soft-margin term `log(e^m + (1 - e^m) p)` falls from `m` at `p = 0` to
# zero at `p = 1`. Added to cross entropy it equals cross entropy after
# lowering the true-class score by `m`. Added to focal loss it keeps the
# focal down-weighting of easy samples.

# %%
import numpy as np

from slnl.cli import loss_curve_rows
from slnl.losses import cross_entropy, focal_loss, sm_term, smce, smce_from_logits, smfl

# %%
names, rows = loss_curve_rows(11)
print("  ".join(f"{n:>11s}" for n in names))
for row in rows:
    print("  ".join(f"{v:11.4f}" for v in row))

# %% [markdown]
# ## The logit-shift identity
#
# Softmax cross entropy with the true score lowered by `m` matches
# SMCE evaluated at the unshifted probability.

# %%
rng = np.random.default_rng(2)
worst = 0.0
for _ in range(2000):
    z = rng.normal(0, 2, rng.integers(2, 8))
    t = int(rng.integers(z.size))
    p = np.exp(z - z.max())
    p /= p.sum()
    worst = max(worst, abs(smce_from_logits(z, t, 0.4) - smce(p[t], 0.4)))
print("largest disagreement over 2000 draws:", worst)

# %% [markdown]
# ## Reductions
#
# Setting the margin or the focusing parameter to zero recovers the
# simpler losses exactly.

# %%
p = np.linspace(0.01, 1, 50)
print(np.array_equal(smfl(p, 0, 0), cross_entropy(p)),
      np.array_equal(smfl(p, 2, 0), focal_loss(p, 2)),
      np.array_equal(smfl(p, 0, 0.4), smce(p, 0.4)))
print("sm_term range at m=0.4:", sm_term(p, 0.4).min(), sm_term(p, 0.4).max())
