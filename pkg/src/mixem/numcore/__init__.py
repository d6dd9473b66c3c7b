"""Tensor arithmetic with reverse-mode differentiation and a gradient checker."""

from .tensor import Tape, TapeNode, Tensor, as_tensor, backward
from . import ops
from .ops import (
    add,
    add_const,
    add_rowvec,
    colmean,
    colmul,
    column,
    cosine_similarity,
    exp,
    l2_normalize,
    log,
    logsumexp,
    matmul,
    mean,
    mul,
    neg,
    normalize,
    relu,
    reshape,
    rowmax,
    rownorm,
    rowsum,
    scale,
    softmax,
    square,
    sub,
    sub_rowvec,
    sum,
    take_flat,
    take_rows,
    tanh,
    transpose,
    xlogx,
)
from .gradcheck import GradientCheckReport, gradient_check

__all__ = [
    "Tape",
    "TapeNode",
    "Tensor",
    "as_tensor",
    "backward",
    "ops",
    "add",
    "add_const",
    "add_rowvec",
    "colmean",
    "colmul",
    "column",
    "cosine_similarity",
    "exp",
    "l2_normalize",
    "log",
    "logsumexp",
    "matmul",
    "mean",
    "mul",
    "neg",
    "normalize",
    "relu",
    "reshape",
    "rowmax",
    "rownorm",
    "rowsum",
    "scale",
    "softmax",
    "square",
    "sub",
    "sub_rowvec",
    "sum",
    "take_flat",
    "take_rows",
    "tanh",
    "transpose",
    "xlogx",
    "GradientCheckReport",
    "gradient_check",
]
