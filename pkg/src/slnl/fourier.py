"""2-D DFT over the last two axes, split into cosine and sinusoidal parts.

Convention: the forward transform is unnormalized,

    f_cos[u, v] + j f_sin[u, v] = sum_{t, n} x[t, n] exp(-2 pi j (u t / T + v n / N)),

and the inverse carries the 1 / (T N) factor. Both are computed with numpy's
FFT and have exact adjoints on the tape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, Tensor, _record, as_tensor

__all__ = ["FreqComponents", "amplitude", "dft2", "idft2", "phase", "spectra"]


@dataclass(eq=False)
class FreqComponents:
    f_cos: Tensor
    f_sin: Tensor

    def __post_init__(self):
        if self.f_cos.shape != self.f_sin.shape:
            raise ShapeError(
                f"cosine/sinusoidal shapes differ: {self.f_cos.shape} vs {self.f_sin.shape}")

    @property
    def shape(self):
        return self.f_cos.shape


def dft2(x) -> FreqComponents:
    x = as_tensor(x)
    if x.ndim < 2 or x.size == 0:
        raise ShapeError(f"dft2 needs a non-empty array with at least 2 axes, got {x.shape}")
    spec = np.fft.fft2(x.data)

    def vjp(g_cos, g_sin):
        return (np.fft.fft2(g_cos - 1j * g_sin).real,)

    f_cos, f_sin = _record("dft2", (spec.real.copy(), spec.imag.copy()), (x,), vjp)
    return FreqComponents(f_cos, f_sin)


def idft2(f: FreqComponents, return_residue: bool = False):
    """Real part of the inverse transform.

    With ``return_residue`` the largest discarded imaginary magnitude is
    returned as well; it is ~0 when the components came from a real signal.
    """
    if f.f_cos.shape != f.f_sin.shape:
        raise ShapeError("cosine/sinusoidal shapes differ")
    fc, fs = f.f_cos, f.f_sin
    t, n = fc.shape[-2:]
    full = np.fft.ifft2(fc.data + 1j * fs.data)

    def vjp(g):
        h = np.fft.fft2(g) / (t * n)
        return h.real, h.imag

    out = _record("idft2", full.real.copy(), (fc, fs), vjp)
    if return_residue:
        residue = float(np.abs(full.imag).max()) if full.size else 0.0
        return out, residue
    return out


def amplitude(f: FreqComponents) -> Tensor:
    """Frequency spectrum sqrt(f_cos^2 + f_sin^2)."""
    c, s = f.f_cos.data, f.f_sin.data
    amp = np.hypot(c, s)
    safe = np.where(amp > 0, amp, 1.0)

    def vjp(g):
        scale = np.where(amp > 0, g / safe, 0.0)
        return scale * c, scale * s

    return _record("amplitude", amp, (f.f_cos, f.f_sin), vjp)


def phase(f: FreqComponents) -> Tensor:
    """Phase spectrum atan2(-f_sin, f_cos); zero where the amplitude vanishes."""
    c, s = f.f_cos.data, f.f_sin.data
    sq = c * c + s * s
    nonzero = sq > 0
    out = np.where(nonzero, np.arctan2(-s, c), 0.0)
    safe = np.where(nonzero, sq, 1.0)

    def vjp(g):
        scale = np.where(nonzero, g / safe, 0.0)
        return scale * s, -scale * c

    return _record("phase", out, (f.f_cos, f.f_sin), vjp)


def spectra(f: FreqComponents) -> tuple[Tensor, Tensor]:
    return amplitude(f), phase(f)
