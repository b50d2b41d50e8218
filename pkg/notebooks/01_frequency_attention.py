# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Frequency attention on skeleton feature maps
#
# A feature map of shape (C, T, N) is moved into the 2-D frequency domain,
# reweighted by learned sigmoid masks, and moved back. This notebook builds
# a two-tone signal, removes one tone with a hand-made mask, and then looks
# at what an untrained mask network does.

# %%
import numpy as np

from slnl.attention import FreqAttentionParams, attention_weights, frequency_attention, rfa_forward
from slnl.fourier import amplitude, dft2, idft2

rng = np.random.default_rng(0)

# %% [markdown]
# ## Cosine and sine components
#
# `dft2` returns the real part (cosine component) and the imaginary part
# (sine component) of an unnormalized 2-D DFT over the last two axes.

# %%
t_dim, n_dim = 16, 4
t = np.arange(t_dim)[:, None] * np.ones((1, n_dim))
slow = np.cos(2 * np.pi * 2 * t / t_dim)
fast = 0.6 * np.cos(2 * np.pi * 5 * t / t_dim)
x = (slow + fast)[None]

spec = dft2(x)
amp = amplitude(spec).data[0]
print("amplitude per temporal bin (joint frequency 0):")
print(np.round(amp[:, 0], 2))

# %% [markdown]
# The peaks sit at bins 2 and 5 (plus their mirror images at 14 and 11).
# The round trip is exact to rounding:

# %%
print("round-trip error:", np.abs(idft2(spec).data - x).max())

# %% [markdown]
# ## Masking one tone
#
# With forced masks the residual variant computes `x + idft(mask * F(x))`.
# A mask that is 1 everywhere except at the fast tone's bins gives
# `x + (x - fast)`, so subtracting `x` isolates what the mask kept.

# %%
mask = np.ones((t_dim, n_dim))
mask[[5, t_dim - 5], :] = 0.0
fa = FreqAttentionParams.init("rfa", t_dim, n_dim, rng=rng)
out = rfa_forward(x, fa, forced_masks=(mask, mask)).data
kept = out - x
print("max |kept - slow tone|:", np.abs(kept[0] - slow).max())

# %% [markdown]
# ## Untrained masks
#
# A fresh mask network averages the spectrum over channels, squeezes it
# through a bottleneck of width ceil(TN / ratio), and applies a sigmoid.
# Every weight lies in (0, 1) and is shared by all channels.

# %%
feat = rng.normal(size=(8, t_dim, n_dim))
w = attention_weights(dft2(feat).f_cos, fa.cos).data
print("mask range:", w.min().round(3), w.max().round(3), "shape", w.shape)

# %% [markdown]
# ## Variants
#
# `none` passes the input through. `afa` masks the amplitude and keeps the
# phase. `sfa` shares one mask net between the cosine and sine parts. `dfa`
# uses two nets with no residual, and `rfa` adds the residual path.

# %%
for variant in ("none", "afa", "sfa", "dfa", "rfa"):
    p = FreqAttentionParams.init(variant, t_dim, n_dim, rng=rng)
    y = frequency_attention(feat, p).data
    print(f"{variant:>4s}  relative change {np.linalg.norm(y - feat) / np.linalg.norm(feat):.3f}")
