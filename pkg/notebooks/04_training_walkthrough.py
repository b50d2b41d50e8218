# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Training the two-stream model on synthetic actions
#
# The synthetic set has four classes. Two differ only in oscillation
# frequency and two only in the relative phase of two distant joints. A
# small model is trained for a few epochs, then scored and probed for
# score-gap margins.

# %%
import time

import numpy as np

from slnl.data import default_splits
from slnl.model import ModelConfig, init_params, parameters
from slnl.train import TrainConfig, evaluate, margin_statistics, train

train_set, test_set = default_splits(seed=42, samples_per_class=60, test_samples_per_class=20)
print(len(train_set), "training and", len(test_set), "test sequences, shape", train_set[0].shape)

# %%
cfg = ModelConfig(seed=0)
n_params = sum(p.data.size for p in parameters(init_params(cfg)))
print(f"{n_params} trainable parameters; {cfg.m1} SLnL + {cfg.m2} local blocks, attention {cfg.attention}")

# %%
start = time.perf_counter()
res = train(train_set, cfg, TrainConfig(epochs=4, seed=0), val_set=test_set,
            callback=lambda m: print(f"epoch {m.epoch}  loss {m.train_loss:.3f}  val_acc {m.val_accuracy:.3f}"))
print(f"{time.perf_counter() - start:.0f}s")

# %%
acc, confusion = evaluate(res.params, cfg, test_set)
print("test accuracy", acc)
print(confusion)

# %% [markdown]
# ## Score gaps
#
# The gap of a sample is its true-class score minus the best other score
# from the concatenated-feature classifier. At `m = 0` the fraction with a
# non-negative gap is the accuracy.

# %%
stats = margin_statistics(res.params, cfg, test_set, 0.4)
print("fraction with gap >= 0.4:", stats.fraction)
print("gap quartiles:", np.round(np.percentile(stats.gaps, [25, 50, 75]), 2))
