"""Oracle and property checks run by ``slnl verify``.

Each suite returns a list of :class:`Check` records. Gradient cases live in
:data:`GRADIENT_CASES` as ``name -> builder``; a builder returns
``(fn, tensors)`` for :func:`slnl.gradcheck.check_gradients`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import oracles
from .attention import FreqAttentionParams, afa_forward, rfa_forward
from .blocks import (LocalBlockParams, NonLocalParams, SLnLBlockParams, affinity, local_block,
                     nonlocal_forward, nonlocal_map, slnl_block)
from .fourier import FreqComponents, dft2, idft2
from .gradcheck import ATOL, check_gradients
from .layers import BatchNormParams, batchnorm, conv2d, dense, maxpool2
from .losses import (LossConfig, cross_entropy, focal_loss, loss_op, sm_term, smce, smce_from_logits,
                     smfl)
from .model import ModelConfig, init_params, model_logits, parameters
from .tensor import Tensor, softmax
from .transform import TransformParams, transform_forward


@dataclass
class Check:
    name: str
    tolerance: float
    observed: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<40s} observed={self.observed:.3e}  tol={self.tolerance:.1e}"


def _below(name, observed, tol) -> Check:
    return Check(name, tol, float(observed), bool(observed < tol))


# --- DFT -----------------------------------------------------------------------


def dft_suite(n_shapes: int = 50, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    roundtrip = parseval = oracle = linear = residue = 0.0
    for _ in range(n_shapes):
        shape = (int(rng.integers(1, 4)), int(rng.integers(1, 17)), int(rng.integers(1, 17)))
        x = rng.uniform(-1, 1, shape)
        y = rng.uniform(-1, 1, shape)
        f = dft2(x)
        back, res = idft2(f, return_residue=True)
        roundtrip = max(roundtrip, np.abs(back.data - x).max())
        residue = max(residue, res)
        energy = (x ** 2).sum()
        spec_energy = (f.f_cos.data ** 2 + f.f_sin.data ** 2).sum() / (shape[1] * shape[2])
        parseval = max(parseval, abs(energy - spec_energy) / energy)
        ref_cos, ref_sin = oracles.direct_dft2(x)
        oracle = max(oracle, np.abs(f.f_cos.data - ref_cos).max(), np.abs(f.f_sin.data - ref_sin).max())
        a, b = rng.normal(size=2)
        mix = dft2(a * x + b * y)
        fy = dft2(y)
        linear = max(linear,
                     np.abs(mix.f_cos.data - (a * f.f_cos.data + b * fy.f_cos.data)).max(),
                     np.abs(mix.f_sin.data - (a * f.f_sin.data + b * fy.f_sin.data)).max())
    return [
        _below("dft.round_trip", roundtrip, 1e-10),
        _below("dft.parseval_relative", parseval, 1e-9),
        _below("dft.direct_sum_oracle", oracle, 1e-9),
        _below("dft.linearity", linear, 1e-9),
        _below("dft.imaginary_residue", residue, 1e-9),
    ]


# --- non-local -----------------------------------------------------------------


def _random_nonlocal(rng, m, p, q, embed, scale=1.0):
    params = NonLocalParams(
        Tensor(rng.normal(0, scale, (q, p))), Tensor(rng.normal(0, scale, (embed, p))),
        Tensor(rng.normal(0, scale, (embed, p))), Tensor(rng.normal(0, scale, (q, q))))
    return rng.normal(size=(m, p)), params


def nonlocal_suite(n_instances: int = 100, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    oracle_err = rowsum_err = shift_err = 0.0
    for _ in range(n_instances):
        m, p, q, e = (int(rng.integers(1, 33)), int(rng.integers(1, 6)),
                      int(rng.integers(1, 6)), int(rng.integers(1, 4)))
        x, params = _random_nonlocal(rng, m, p, q, e)
        y = nonlocal_forward(x, params).data
        ref_y, ref_w = oracles.pairwise_nonlocal(x, params.w_g.data, params.w_phi.data,
                                                 params.w_psi.data, params.w_w.data)
        weights = affinity(x, params).data
        oracle_err = max(oracle_err, np.abs(y - ref_y).max(), np.abs(weights - ref_w).max())
        rowsum_err = max(rowsum_err, np.abs(weights.sum(axis=-1) - 1).max())
        # softmax is invariant to a per-row additive shift of its logits
        logits = (x @ params.w_phi.data.T) @ (x @ params.w_psi.data.T).T
        shifted = softmax(Tensor(logits + rng.normal(size=(m, 1)))).data
        shift_err = max(shift_err, np.abs(shifted - weights).max())

    x = rng.normal(size=(2, 3, 5, 4))
    block = SLnLBlockParams.init(3, 4, 3, rng)
    for nl in (block.temporal, block.spatial, block.spatiotemporal):
        nl.w_w.data[:] = 0.0
    same = np.array_equal(slnl_block(x, block, "eval").data, local_block(x, block.local, "eval").data)
    return [
        _below("nonlocal.pairwise_oracle", oracle_err, 1e-12),
        _below("nonlocal.affinity_row_sums", rowsum_err, 1e-12),
        _below("nonlocal.logit_shift_invariance", shift_err, 1e-12),
        Check("nonlocal.slnl_gated_equals_local", 0.0, 0.0 if same else 1.0, same),
    ]


# --- losses --------------------------------------------------------------------


def losses_suite(n_trials: int = 10_000, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_trials):
        c = int(rng.integers(2, 11))
        z = rng.normal(0, 2, c)
        t = int(rng.integers(c))
        m = float(rng.uniform(0, 1))
        p = np.exp(z - z.max())
        p_t = (p / p.sum())[t]
        worst = max(worst, abs(smce_from_logits(z, t, m) - smce(p_t, m)))

    grid = np.linspace(0, 1, 1000)
    margins = (0.0, 0.2, 0.4, 0.6, 1.0)
    lattice = all(
        np.array_equal(smfl(grid, 0, 0), cross_entropy(grid))
        and np.array_equal(smfl(grid, g, 0), focal_loss(grid, g))
        and np.array_equal(smfl(grid, 0, m), smce(grid, m))
        for g in (0.5, 1.0, 2.0, 3.0) for m in margins)
    bound_excess = max(max(-sm_term(grid, m).min(), (sm_term(grid, m) - m).max()) for m in margins) + 0.0
    inner = np.linspace(1e-6, 1 - 1e-6, 1000)
    monotone = all(np.all(np.diff(smfl(inner, g, m)) < 0) for g in (0, 2) for m in (0, 0.4))
    return [
        _below("losses.logit_shift_identity", worst, 1e-12),
        Check("losses.reduction_lattice", 0.0, 0.0 if lattice else 1.0, lattice),
        Check("losses.sm_term_bounds", 0.0, float(bound_excess), bool(bound_excess <= 0.0)),
        Check("losses.strictly_decreasing", 0.0, 0.0 if monotone else 1.0, monotone),
    ]


# --- gradients -----------------------------------------------------------------


def _t(rng, *shape, scale=1.0):
    return Tensor(rng.normal(0, scale, shape), requires_grad=True)


def _case_conv2d(rng):
    x, w, b = _t(rng, 2, 3, 5, 4), _t(rng, 4, 3, 3, 3), _t(rng, 4)
    probe = rng.normal(size=(2, 4, 5, 4))
    return (lambda: (conv2d(x, w, b) * conv2d(x, w, b) * probe).sum()), [x, w, b]


def _case_dense(rng):
    x, w, b = _t(rng, 5, 6), _t(rng, 3, 6), _t(rng, 3)
    return (lambda: (dense(x, w, b) * dense(x, w, b)).sum()), [x, w, b]


def _batchnorm_case(mode):
    def build(rng):
        x = _t(rng, 4, 3, 3, 2)
        bn = BatchNormParams.init(3)
        bn.gamma.data = rng.normal(size=3)
        bn.beta.data = rng.normal(size=3)
        bn.running_var.data = rng.uniform(0.5, 2.0, 3)
        probe = rng.normal(size=x.shape)
        return (lambda: (batchnorm(x, bn, mode) * probe).sum()), [x, bn.gamma, bn.beta]
    return build


def _case_maxpool(rng):
    x = _t(rng, 2, 2, 5, 4)
    probe = rng.normal(size=(2, 2, 2, 2))
    return (lambda: (maxpool2(x) * probe).sum()), [x]


def _case_dft_pair(rng):
    x = _t(rng, 2, 4, 5)
    mask_c, mask_s = rng.uniform(size=(2, 4, 5)), rng.uniform(size=(2, 4, 5))
    probe = rng.normal(size=(2, 4, 5))

    def fn():
        f = dft2(x)
        return (idft2(FreqComponents(f.f_cos * mask_c, f.f_sin * mask_s)) * probe).sum() + f.f_cos.sum()

    return fn, [x]


def _attention_case(variant):
    def build(rng):
        x = _t(rng, 2, 3, 4, 4)
        params = FreqAttentionParams.init(variant, 4, 4, ratio=4, rng=rng)
        probe = rng.normal(size=x.shape)
        fwd = afa_forward if variant == "afa" else rfa_forward
        tensors = [x] + [t for net in {id(params.cos): params.cos, id(params.sin): params.sin}.values()
                         for t in (net.w_reduce, net.b_reduce, net.w_expand, net.b_expand)]
        return (lambda: (fwd(x, params) * probe).sum()), tensors
    return build


def _case_nonlocal(rng):
    x = _t(rng, 2, 3, 4, 3)
    nl = NonLocalParams.init(3, 2, 2, "spatiotemporal", rng)
    for w in (nl.w_g, nl.w_phi, nl.w_psi, nl.w_w):
        w.data *= 2
    probe = rng.normal(size=(2, 2, 4, 3))
    return (lambda: (nonlocal_map(x, nl) * probe).sum()), [x, nl.w_g, nl.w_phi, nl.w_psi, nl.w_w]


def _block_tensors(block):
    from .model import named_tensors
    return [t for _, t in named_tensors(block) if t.requires_grad]


def _case_local_block(rng):
    x = _t(rng, 2, 3, 4, 3)
    block = LocalBlockParams.init(3, 4, 3, rng)
    probe = rng.normal(size=(2, 4, 4, 3))
    return (lambda: (local_block(x, block, "train") * probe).sum()), [x] + _block_tensors(block)


def _case_slnl_block(rng):
    x = _t(rng, 2, 3, 4, 3)
    block = SLnLBlockParams.init(3, 4, 3, rng)
    probe = rng.normal(size=(2, 4, 4, 3))
    return (lambda: (slnl_block(x, block, "train") * probe).sum()), [x] + _block_tensors(block)


def _case_transform(rng):
    x = _t(rng, 2, 3, 4, 5)
    params = TransformParams.init(3, 5, 6, 2, rng, noise=0.5)
    probe = rng.normal(size=(2, 6, 4, 6))
    return (lambda: (transform_forward(x, params) * probe).sum()), \
        [x, params.joint_weight, params.joint_bias, params.coord_weight]


def _loss_case(cfg):
    def build(rng):
        z = _t(rng, 6, 5)
        labels = rng.integers(0, 5, 6)
        return (lambda: loss_op(softmax(z), labels, cfg)), [z]
    return build


def toy_model_case(rng, n_classes: int = 2):
    cfg = ModelConfig(d=2, n_joints=4, n_aug=4, t_frames=4, k_systems=2, n_classes=n_classes,
                      channels=(4, 4, 4, 4), m1=2, m2=2)
    params = init_params(cfg, seed=int(rng.integers(1 << 31)))
    x = _t(rng, 3, 2, 4, 4)
    labels = np.arange(3) % n_classes
    drop_seed = int(rng.integers(1 << 31))

    def fn():
        zs = model_logits(x, cfg, params, "train", np.random.default_rng(drop_seed))
        losses = [loss_op(softmax(z), labels, cfg.loss) for z in zs]
        return losses[0] + losses[1] + losses[2]

    return fn, parameters(params) + [x]


GRADIENT_CASES: dict[str, Callable] = {
    "conv2d": _case_conv2d,
    "dense": _case_dense,
    "batchnorm_train": _batchnorm_case("train"),
    "batchnorm_eval": _batchnorm_case("eval"),
    "maxpool2": _case_maxpool,
    "dft2_idft2": _case_dft_pair,
    "attention_rfa": _attention_case("rfa"),
    "attention_dfa": _attention_case("dfa"),
    "attention_sfa": _attention_case("sfa"),
    "attention_afa": _attention_case("afa"),
    "nonlocal": _case_nonlocal,
    "local_block": _case_local_block,
    "slnl_block": _case_slnl_block,
    "transform": _case_transform,
    "loss_ce": _loss_case(LossConfig.make("CE")),
    "loss_fl": _loss_case(LossConfig.make("FL", 2.0)),
    "loss_smce": _loss_case(LossConfig.make("SMCE", margin=0.4)),
    "loss_smfl": _loss_case(LossConfig.make("SMFL", 2.0, 0.4)),
    "toy_model": toy_model_case,
}


def gradients_suite(n_samples: int = 200, seed: int = 0) -> list[Check]:
    checks = []
    for name, build in GRADIENT_CASES.items():
        rng = np.random.default_rng([seed, len(checks)])
        fn, tensors = build(rng)
        res = check_gradients(fn, tensors, n_samples=n_samples, rng=rng)
        checks.append(Check(f"gradients.{name}", ATOL, res.max_abs_error, res.ok))
    return checks


SUITES: dict[str, Callable[[], list[Check]]] = {
    "dft": dft_suite,
    "nonlocal": nonlocal_suite,
    "losses": losses_suite,
    "gradients": gradients_suite,
}


def run(suite: str = "all") -> list[Check]:
    names = list(SUITES) if suite == "all" else [suite]
    return [check for name in names for check in SUITES[name]()]
