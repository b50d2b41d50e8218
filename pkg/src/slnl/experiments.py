"""Ablation plans and the paired-run harness behind ``slnl ablate``.

Each plan varies one component of the desk model and holds the rest fixed:

* ``loss``: the four loss settings on a local-blocks-only model without
  frequency attention.
* ``fa``: every frequency-attention variant on the local-only model.
* ``slnl``: how many of the blocks are SLnL blocks, with rFA and SMFL.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .attention import VARIANTS
from .data import SyntheticSpec, default_classes, generate
from .losses import LossConfig
from .model import ModelConfig
from .train import TrainConfig, evaluate, margin_statistics, train

LOSS_SETTINGS = (
    LossConfig.make("CE"),
    LossConfig.make("FL", 2.0),
    LossConfig.make("SMCE", margin=0.4),
    LossConfig.make("SMFL", 2.0, 0.4),
)


@dataclass(frozen=True)
class Cell:
    label: str
    cfg: ModelConfig


@dataclass
class CellResult:
    label: str
    seed: int
    accuracy: float
    margin_fraction: float
    train_loss: float
    epochs: int
    seconds: float


def _local_only(base: ModelConfig) -> ModelConfig:
    return base.replace(m1=0, m2=len(base.channels))


def loss_plan(base: ModelConfig) -> list[Cell]:
    local = _local_only(base).replace(attention="none")
    return [Cell(lc.label, local.replace(loss=lc)) for lc in LOSS_SETTINGS]


def fa_plan(base: ModelConfig) -> list[Cell]:
    local = _local_only(base)
    return [Cell(v, local.replace(attention=v)) for v in VARIANTS]


def slnl_plan(base: ModelConfig) -> list[Cell]:
    n = len(base.channels)
    return [Cell(f"M1={m1},M2={n - m1}", base.replace(m1=m1, m2=n - m1)) for m1 in range(n + 1)]


PLANS = {"loss": loss_plan, "fa": fa_plan, "slnl": slnl_plan}


def frequency_pair_splits(seed: int, noise: float = 1.0, samples_per_class: int = 100,
                          test_samples_per_class: int = 50):
    """Two classes whose only difference is oscillation frequency, with enough
    noise that the pair is not solved in the first epoch."""
    spec = SyntheticSpec(classes=default_classes()[:2], noise=noise,
                         samples_per_class=samples_per_class, seed=seed)
    return generate(spec, 0), generate(replace(spec, samples_per_class=test_samples_per_class), 1)


def run_cell(cell: Cell, train_set, test_set, train_cfg: TrainConfig, margin: float = 0.4,
             seed: int | None = None) -> tuple[CellResult, object]:
    """Train one cell and score it on ``test_set``; returns the result and the
    trained parameters."""
    cfg = cell.cfg if seed is None else cell.cfg.replace(seed=seed)
    tcfg = train_cfg if seed is None else replace(train_cfg, seed=seed)
    start = time.perf_counter()
    res = train(train_set, cfg, tcfg)
    acc, _ = evaluate(res.params, cfg, test_set)
    frac = margin_statistics(res.params, cfg, test_set, margin).fraction
    out = CellResult(cell.label, cfg.seed, acc, frac, res.history[-1].train_loss,
                     len(res.history), time.perf_counter() - start)
    return out, res.params


def run_ablation(plan: str, base: ModelConfig, train_set, test_set, train_cfg: TrainConfig,
                 seeds=(0,), callback=None) -> list[CellResult]:
    if plan not in PLANS:
        raise ValueError(f"unknown plan {plan!r}; choose from {sorted(PLANS)}")
    results = []
    for seed in seeds:
        for cell in PLANS[plan](base):
            result, _ = run_cell(cell, train_set, test_set, train_cfg, seed=seed)
            results.append(result)
            if callback is not None:
                callback(result)
    return results


def summarize(results: list[CellResult]) -> dict[str, float]:
    """Mean test accuracy per cell label, in first-seen order."""
    groups: dict[str, list[float]] = {}
    for r in results:
        groups.setdefault(r.label, []).append(r.accuracy)
    return {k: float(np.mean(v)) for k, v in groups.items()}
