"""Central finite-difference gradient checking against the tape."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, gradients

STEP = 1e-5
ATOL = 1e-6
RTOL = 1e-4


@dataclass
class GradCheckResult:
    checked: int = 0
    failures: list[tuple[str, tuple[int, ...], float, float]] = field(default_factory=list)
    worst_excess: float = -np.inf  # max of |a-b| - (atol + rtol|b|)
    max_abs_error: float = 0.0

    @property
    def ok(self) -> bool:
        return self.checked > 0 and not self.failures


def check_gradients(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    n_samples: int | None = None,
    rng=None,
    step: float = STEP,
    atol: float = ATOL,
    rtol: float = RTOL,
    names: Sequence[str] | None = None,
) -> GradCheckResult:
    """Compare tape gradients of scalar ``fn()`` with central differences.

    ``n_samples`` coordinates are drawn uniformly over all entries of
    ``tensors`` (every entry when ``None``). ``fn`` must read the tensors'
    current ``data`` each call.
    """
    rng = np.random.default_rng(rng)
    names = list(names) if names is not None else [f"t{i}" for i in range(len(tensors))]
    analytic = gradients(fn, tensors)

    sizes = np.array([t.size for t in tensors])
    total = int(sizes.sum())
    if n_samples is None or n_samples >= total:
        flat = np.arange(total)
    else:
        flat = np.sort(rng.choice(total, size=n_samples, replace=False))
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    result = GradCheckResult()
    for k in flat:
        ti = int(np.searchsorted(offsets, k, side="right") - 1)
        t = tensors[ti]
        idx = np.unravel_index(int(k - offsets[ti]), t.shape)
        orig = t.data[idx]
        t.data[idx] = orig + step
        up = float(fn().data)
        t.data[idx] = orig - step
        down = float(fn().data)
        t.data[idx] = orig
        numeric = (up - down) / (2 * step)
        a = float(analytic[ti][idx])
        err = abs(a - numeric)
        excess = err - (atol + rtol * abs(numeric))
        result.checked += 1
        result.max_abs_error = max(result.max_abs_error, err)
        result.worst_excess = max(result.worst_excess, excess)
        if excess > 0:
            result.failures.append((names[ti], tuple(int(i) for i in idx), a, numeric))
    return result
