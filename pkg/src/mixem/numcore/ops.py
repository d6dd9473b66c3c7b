"""Differentiable primitives over `Tensor`.

Each primitive validates its operands, computes the forward value in
float64, and (when any operand is tracked) records a TapeNode whose
adjoint closure maps the output gradient to operand gradients.  Shapes
are deliberately restricted to what the training math needs: scalars,
vectors, and matrices, with row/column broadcasting only where an
explicit primitive provides it.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, DomainError
from .tensor import TapeNode, Tensor, as_tensor


def _make(op_name, out_data, inputs, adjoint) -> Tensor:
    out = Tensor(out_data)
    if any(t.node is not None or t.requires_grad for t in inputs):
        out.node = TapeNode(op_name, out, inputs, adjoint)
    return out


def _require_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ContractError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _require_matrix(a: Tensor, op: str) -> None:
    if a.ndim != 2:
        raise ContractError(f"{op}: expected a matrix, got shape {a.shape}")


# ---------------------------------------------------------------------------
# elementwise arithmetic

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape(a, b, "add")
    return _make("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape(a, b, "sub")
    return _make("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape(a, b, "mul")
    return _make("mul", a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make("neg", -a.data, (a,), lambda g: (-g,))


def scale(a, c: float) -> Tensor:
    """Multiply by a constant scalar."""
    a = as_tensor(a)
    c = float(c)
    return _make("scale", a.data * c, (a,), lambda g: (g * c,))


def add_const(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _make("add_const", a.data + c, (a,), lambda g: (g,))


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _require_matrix(a, "matmul")
    _require_matrix(b, "matmul")
    if a.shape[1] != b.shape[0]:
        raise ContractError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    return _make(
        "matmul", a.data @ b.data, (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def transpose(a) -> Tensor:
    a = as_tensor(a)
    _require_matrix(a, "transpose")
    return _make("transpose", a.data.T.copy(), (a,), lambda g: (g.T,))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != a.size:
        raise ContractError(f"reshape: cannot view {a.shape} as {shape}")
    old = a.shape
    return _make("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def add_rowvec(mat, vec) -> Tensor:
    """(n,m) + (m,) broadcast over rows; the bias-add of a linear layer."""
    mat, vec = as_tensor(mat), as_tensor(vec)
    _require_matrix(mat, "add_rowvec")
    if vec.shape != (mat.shape[1],):
        raise ContractError(f"add_rowvec: {mat.shape} + {vec.shape}")
    return _make(
        "add_rowvec", mat.data + vec.data[None, :], (mat, vec),
        lambda g: (g, g.sum(axis=0)),
    )


def sub_rowvec(mat, vec) -> Tensor:
    mat, vec = as_tensor(mat), as_tensor(vec)
    _require_matrix(mat, "sub_rowvec")
    if vec.shape != (mat.shape[1],):
        raise ContractError(f"sub_rowvec: {mat.shape} - {vec.shape}")
    return _make(
        "sub_rowvec", mat.data - vec.data[None, :], (mat, vec),
        lambda g: (g, -g.sum(axis=0)),
    )


def colmul(vec, mat) -> Tensor:
    """Scale row i of (n,m) `mat` by `vec[i]`; mixes component embeddings."""
    vec, mat = as_tensor(vec), as_tensor(mat)
    _require_matrix(mat, "colmul")
    if vec.shape != (mat.shape[0],):
        raise ContractError(f"colmul: {vec.shape} * {mat.shape}")
    return _make(
        "colmul", mat.data * vec.data[:, None], (vec, mat),
        lambda g: ((g * mat.data).sum(axis=1), g * vec.data[:, None]),
    )


# ---------------------------------------------------------------------------
# reductions

def sum(a) -> Tensor:  # noqa: A001 - mirrors numpy's naming
    a = as_tensor(a)
    shape = a.shape
    return _make("sum", np.sum(a.data), (a,), lambda g: (np.full(shape, float(g)),))


def rowsum(mat) -> Tensor:
    """Per-row sums of a matrix, (n,m) -> (n,)."""
    mat = as_tensor(mat)
    _require_matrix(mat, "rowsum")
    m = mat.shape[1]
    return _make(
        "rowsum", mat.data.sum(axis=1), (mat,),
        lambda g: (np.repeat(g[:, None], m, axis=1),),
    )


def colmean(mat) -> Tensor:
    """Per-column means of a matrix, (n,m) -> (m,); the batch marginal."""
    mat = as_tensor(mat)
    _require_matrix(mat, "colmean")
    n = mat.shape[0]
    return _make(
        "colmean", mat.data.mean(axis=0), (mat,),
        lambda g: (np.broadcast_to(g / n, (n, g.shape[0])).copy(),),
    )


def rowmax(a) -> Tensor:
    """Max over the last axis; gradient flows to the first argmax only.

    Ties break toward the lowest index, matching the dominant-component
    convention.
    """
    a = as_tensor(a)
    if a.ndim not in (1, 2):
        raise ContractError(f"rowmax: expected vector or matrix, got {a.shape}")
    idx = np.argmax(a.data, axis=-1)
    out = np.max(a.data, axis=-1)

    def adjoint(g):
        z = np.zeros_like(a.data)
        if a.ndim == 1:
            z[idx] = g
        else:
            z[np.arange(a.shape[0]), idx] = g
        return (z,)

    return _make("rowmax", out, (a,), adjoint)


def rownorm(mat) -> Tensor:
    """Per-row Euclidean norms, (n,m) -> (n,); zero rows get zero gradient."""
    mat = as_tensor(mat)
    _require_matrix(mat, "rownorm")
    norms = np.sqrt(np.sum(mat.data**2, axis=1))

    def adjoint(g):
        safe = np.where(norms > 0.0, norms, 1.0)
        u = mat.data / safe[:, None]
        u[norms == 0.0] = 0.0
        return (g[:, None] * u,)

    return _make("rownorm", norms, (mat,), adjoint)


# ---------------------------------------------------------------------------
# gather / scatter

def take_flat(a, indices) -> Tensor:
    """Gather by flat (row-major) constant indices; output keeps the index shape."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= a.size):
        raise ContractError("take_flat: index out of range")
    flat = a.data.reshape(-1)
    shape = a.shape

    def adjoint(g):
        z = np.zeros(int(np.prod(shape)) if shape else 1, dtype=np.float64)
        np.add.at(z, idx, g)
        return (z.reshape(shape),)

    return _make("take_flat", flat[idx], (a,), adjoint)


def take_rows(mat, rows) -> Tensor:
    """Gather a subset of rows by constant indices."""
    mat = as_tensor(mat)
    _require_matrix(mat, "take_rows")
    idx = np.asarray(rows, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= mat.shape[0]):
        raise ContractError("take_rows: row index out of range")

    def adjoint(g):
        z = np.zeros_like(mat.data)
        np.add.at(z, idx, g)
        return (z,)

    return _make("take_rows", mat.data[idx], (mat,), adjoint)


def column(mat, j: int) -> Tensor:
    """Extract column j of a matrix as a vector."""
    mat = as_tensor(mat)
    _require_matrix(mat, "column")
    j = int(j)
    if not 0 <= j < mat.shape[1]:
        raise ContractError(f"column: index {j} out of range for {mat.shape}")

    def adjoint(g):
        z = np.zeros_like(mat.data)
        z[:, j] = g
        return (z,)

    return _make("column", mat.data[:, j].copy(), (mat,), adjoint)


# ---------------------------------------------------------------------------
# nonlinearities

def relu(a) -> Tensor:
    a = as_tensor(a)
    return _make("relu", np.maximum(a.data, 0.0), (a,), lambda g: (g * (a.data > 0.0),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.data)
    return _make("tanh", t, (a,), lambda g: (g * (1.0 - t * t),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    if not np.all(np.isfinite(out)):
        raise DomainError("exp overflowed; inputs outside the supported domain")
    return _make("exp", out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0.0):
        raise DomainError("log requires strictly positive inputs")
    return _make("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _make("square", a.data**2, (a,), lambda g: (2.0 * a.data * g,))


def xlogx(a) -> Tensor:
    """x*log(x) with the entropy convention 0*log(0) = 0; domain x >= 0."""
    a = as_tensor(a)
    if np.any(a.data < 0.0):
        raise DomainError("xlogx requires non-negative inputs")
    pos = a.data > 0.0
    safe = np.where(pos, a.data, 1.0)
    logs = np.log(safe)
    return _make(
        "xlogx", np.where(pos, a.data * logs, 0.0), (a,),
        lambda g: (np.where(pos, (logs + 1.0) * g, 0.0),),
    )


# ---------------------------------------------------------------------------
# softmax family (max-subtraction throughout)

def softmax(a) -> Tensor:
    """Softmax over the last axis of a vector or matrix.

    Shifts by the row max before exponentiating so arbitrarily large
    logits stay finite.
    """
    a = as_tensor(a)
    if a.ndim not in (1, 2):
        raise ContractError(f"softmax: expected vector or matrix, got {a.shape}")
    if not np.all(np.isfinite(a.data)):
        raise DomainError("softmax requires finite logits")
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)

    def adjoint(g):
        inner = (g * p).sum(axis=-1, keepdims=True)
        return (p * (g - inner),)

    return _make("softmax", p, (a,), adjoint)


def logsumexp(a) -> Tensor:
    """log(sum(exp(.))) over the last axis, fused for overflow safety."""
    a = as_tensor(a)
    if a.ndim not in (1, 2):
        raise ContractError(f"logsumexp: expected vector or matrix, got {a.shape}")
    if not np.all(np.isfinite(a.data)):
        raise DomainError("logsumexp requires finite inputs")
    m = a.data.max(axis=-1)
    shifted = a.data - np.expand_dims(m, -1)
    e = np.exp(shifted)
    out = m + np.log(e.sum(axis=-1))

    def adjoint(g):
        p = e / e.sum(axis=-1, keepdims=True)
        return (p * np.expand_dims(g, -1),)

    return _make("logsumexp", out, (a,), adjoint)


def normalize(mat, eps: float = 1e-12) -> Tensor:
    """Scale every row of (n,m) to unit Euclidean norm.

    Raises DomainError when any row norm is at or below `eps`; callers
    that want the flagged-degeneracy behavior use `l2_normalize`.
    """
    mat = as_tensor(mat)
    _require_matrix(mat, "normalize")
    norms = np.sqrt(np.sum(mat.data**2, axis=1))
    bad = norms <= eps
    if np.any(bad):
        raise DomainError(f"normalize: degenerate row {int(np.argmax(bad))} (norm <= {eps})")
    u = mat.data / norms[:, None]

    def adjoint(g):
        inner = (g * u).sum(axis=1, keepdims=True)
        return ((g - u * inner) / norms[:, None],)

    return _make("normalize", u, (mat,), adjoint)


# ---------------------------------------------------------------------------
# composites

def l2_normalize(v, eps: float = 1e-12) -> tuple[Tensor, bool]:
    """Unit-normalize a vector, flagging (not raising) degeneracy.

    Returns `(unit, degenerate)`; a vector with norm <= eps comes back
    as a zero vector with `degenerate=True` and no gradient path.
    """
    v = as_tensor(v)
    if v.ndim != 1:
        raise ContractError(f"l2_normalize: expected a vector, got {v.shape}")
    norm = float(np.sqrt(np.sum(v.data**2)))
    if norm <= eps:
        return Tensor(np.zeros_like(v.data)), True
    unit = reshape(normalize(reshape(v, (1, v.size)), eps), (v.size,))
    return unit, False


def cosine_similarity(u, v) -> Tensor:
    """Cosine of the angle between two non-degenerate vectors."""
    u, v = as_tensor(u), as_tensor(v)
    if u.ndim != 1 or v.ndim != 1:
        raise ContractError("cosine_similarity expects vectors")
    _require_same_shape(u, v, "cosine_similarity")
    nu = normalize(reshape(u, (1, u.size)))
    nv = normalize(reshape(v, (1, v.size)))
    return sum(mul(nu, nv))


def mean(a) -> Tensor:
    a = as_tensor(a)
    return scale(sum(a), 1.0 / a.size)


# ---------------------------------------------------------------------------
# operator sugar on Tensor

def _coerce_other(other):
    return other if isinstance(other, Tensor) else None


def _tensor_add(self, other):
    t = _coerce_other(other)
    return add(self, t) if t is not None else add_const(self, other)


def _tensor_sub(self, other):
    t = _coerce_other(other)
    return sub(self, t) if t is not None else add_const(self, -other)


def _tensor_rsub(self, other):
    return add_const(neg(self), other)


def _tensor_mul(self, other):
    t = _coerce_other(other)
    return mul(self, t) if t is not None else scale(self, other)


def _tensor_div(self, other):
    if isinstance(other, Tensor):
        raise ContractError("tensor/tensor division is not a primitive; divide by a scalar")
    return scale(self, 1.0 / float(other))


Tensor.__add__ = _tensor_add
Tensor.__radd__ = _tensor_add
Tensor.__sub__ = _tensor_sub
Tensor.__rsub__ = _tensor_rsub
Tensor.__mul__ = _tensor_mul
Tensor.__rmul__ = _tensor_mul
Tensor.__truediv__ = _tensor_div
Tensor.__neg__ = neg
Tensor.__matmul__ = matmul
