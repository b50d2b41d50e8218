"""Skeleton action recognition in numpy: frequency attention on DFT
components, synchronous local/non-local blocks, soft-margin focal loss, and
a tape-based autodiff core to train them."""

from .attention import FreqAttentionParams, afa_forward, attention_weights, frequency_attention, rfa_forward
from .blocks import (LocalBlockParams, NonLocalParams, SLnLBlockParams, affinity_field, local_block,
                     nonlocal_1d, nonlocal_2d, nonlocal_forward, slnl_block)
from .data import SkeletonSequence, SyntheticSpec, generate, load_dataset, preprocess, save_dataset
from .fourier import FreqComponents, dft2, idft2, spectra
from .layers import batchnorm, conv2d, dense, dropout, global_avg_pool, maxpool2
from .losses import LossConfig, focal_loss, mode_loss, sm_term, smce, smce_from_logits, smfl, total_loss
from .model import ModelConfig, init_params, model_forward
from .tensor import ContractError, ShapeError, Tape, Tensor, relu, sigmoid, softmax
from .train import TrainConfig, evaluate, margin_statistics, predict, train
from .transform import TransformParams, coordinate_transform, skeleton_transform, transform_forward

__version__ = "0.1.0"
