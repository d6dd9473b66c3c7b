"""Encoder and projection heads.

The encoder is an MLP over feature vectors producing representations
`h`.  Two heads can sit on top: a single non-linear projection (the
plain contrastive baseline) or a bank of M parallel projections
`g_1..g_M` plus a gating projection `g_p` whose softmax output mixes
the per-component embeddings into one embedding per sample.

Checkpoints use a documented binary layout (magic ``MIXEM1``) and
round-trip bit-exactly; see `save_checkpoint`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import numcore as nc
from .errors import ContractError, DomainError, FormatError
from .numcore import Tensor

CHECKPOINT_MAGIC = b"MIXEM1"

_ACTIVATIONS = {
    "relu": nc.relu,
    "tanh": nc.tanh,
    "identity": lambda t: t,
}


@dataclass(frozen=True)
class EncoderConfig:
    """MLP encoder layout: input -> hidden_dims -> representation_dim.

    Activations apply between layers; the final layer is linear.
    """

    input_dim: int
    hidden_dims: tuple[int, ...] = (64,)
    representation_dim: int = 32
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.representation_dim)
        if any(d < 1 for d in dims):
            raise ContractError(f"all encoder dims must be >= 1, got {dims}")
        if self.activation not in _ACTIVATIONS:
            raise ContractError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class MixtureHeadConfig:
    """Shape of the mixture head: M parallel projections plus a gate.

    M=1 is allowed so the one-component head can be compared against the
    single-projection baseline; mixture training proper uses M >= 2.
    """

    num_components: int
    embedding_dim: int = 32
    hidden_dim: int = 64

    def __post_init__(self):
        if self.num_components < 1:
            raise ContractError("num_components must be >= 1")
        if self.embedding_dim < 2:
            raise ContractError("embedding_dim must be >= 2")
        if self.hidden_dim < 1:
            raise ContractError("hidden_dim must be >= 1")


@dataclass
class MixtureOutput:
    """Batch output of the mixture head (one row per sample).

    Invariants: each row of `coefficients` sums to 1; `combined` equals
    sum_m coefficients[:, m] * component_embeddings[m] by construction;
    `dominant[i]` is the argmax coefficient index, ties to the lowest
    index.
    """

    coefficients: Tensor
    component_embeddings: list[Tensor]
    combined: Tensor
    dominant: np.ndarray

    def validate(self, tol: float = 1e-12) -> None:
        p = self.coefficients.data
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > tol:
            raise ContractError("mixture coefficients do not sum to 1")
        recomposed = np.zeros_like(self.combined.data)
        for m, e in enumerate(self.component_embeddings):
            recomposed += p[:, m][:, None] * e.data
        if np.max(np.abs(recomposed - self.combined.data)) > tol:
            raise ContractError("combined embedding does not match sum of components")
        if np.any(self.dominant != np.argmax(p, axis=1)):
            raise ContractError("dominant indices are not the coefficient argmax")


class Linear:
    """Dense layer with uniform fan-in initialization."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, name: str):
        bound = 1.0 / np.sqrt(in_dim)
        self.weight = Tensor(rng.uniform(-bound, bound, (in_dim, out_dim)), requires_grad=True)
        self.bias = Tensor(rng.uniform(-bound, bound, out_dim), requires_grad=True)
        self.name = name

    def __call__(self, x: Tensor) -> Tensor:
        return nc.add_rowvec(nc.matmul(x, self.weight), self.bias)

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]


def _as_batch(x) -> tuple[Tensor, bool]:
    t = nc.as_tensor(x)
    if t.ndim == 1:
        return nc.reshape(t, (1, t.size)), True
    if t.ndim == 2:
        return t, False
    raise ContractError(f"expected a vector or matrix of features, got shape {t.shape}")


class Encoder:
    """MLP mapping input features to representations h."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        self.config = config
        self.layers: list[Linear] = []
        dims = (config.input_dim, *config.hidden_dims, config.representation_dim)
        for i in range(len(dims) - 1):
            self.layers.append(Linear(dims[i], dims[i + 1], rng, f"encoder.{i}"))
        self._act = _ACTIVATIONS[config.activation]

    def encode(self, x) -> Tensor:
        """Representations for a feature matrix (n, input_dim) or one vector."""
        t, single = _as_batch(x)
        if t.shape[1] != self.config.input_dim:
            raise ContractError(
                f"encode: expected {self.config.input_dim} features, got {t.shape[1]}"
            )
        if not np.all(np.isfinite(t.data)):
            raise DomainError("encode: non-finite input features")
        h = t
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < len(self.layers) - 1:
                h = self._act(h)
        return nc.reshape(h, (h.shape[1],)) if single else h

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [p for layer in self.layers for p in layer.parameters()]


class _TwoLayer:
    """Hidden layer + ReLU + output layer; the non-linear projection g."""

    def __init__(self, in_dim, hidden, out_dim, rng, name):
        self.first = Linear(in_dim, hidden, rng, f"{name}.0")
        self.second = Linear(hidden, out_dim, rng, f"{name}.1")

    def __call__(self, h: Tensor) -> Tensor:
        return self.second(nc.relu(self.first(h)))

    def parameters(self):
        return self.first.parameters() + self.second.parameters()


class SimCLRHead:
    """Single non-linear projection from representation to embedding."""

    def __init__(self, representation_dim: int, config: MixtureHeadConfig, rng: np.random.Generator):
        if representation_dim < config.embedding_dim:
            raise ContractError("representation_dim must be >= embedding_dim")
        self.config = config
        self.representation_dim = representation_dim
        self.projection = _TwoLayer(
            representation_dim, config.hidden_dim, config.embedding_dim, rng, "head.g"
        )

    def forward(self, h) -> Tensor:
        t, single = _as_batch(h)
        if t.shape[1] != self.representation_dim:
            raise ContractError(f"head: expected width {self.representation_dim}, got {t.shape[1]}")
        z = self.projection(t)
        return nc.reshape(z, (z.shape[1],)) if single else z

    def parameters(self) -> list[tuple[str, Tensor]]:
        return self.projection.parameters()


class MixtureHead:
    """M parallel projections mixed by a gating softmax.

    For each sample the gate produces coefficients p over the M
    component embeddings, and the combined embedding is their convex
    combination, so gradient reaches every component scaled by its
    coefficient and reaches the gate through the mixing weights.
    """

    def __init__(self, representation_dim: int, config: MixtureHeadConfig, rng: np.random.Generator):
        if representation_dim < config.embedding_dim:
            raise ContractError("representation_dim must be >= embedding_dim")
        self.config = config
        self.representation_dim = representation_dim
        self.components = [
            _TwoLayer(representation_dim, config.hidden_dim, config.embedding_dim, rng, f"head.g{m}")
            for m in range(config.num_components)
        ]
        self.gate = _TwoLayer(
            representation_dim, config.hidden_dim, config.num_components, rng, "head.gate"
        )

    def forward(self, h) -> MixtureOutput:
        t, single = _as_batch(h)
        if single:
            raise ContractError("mixture head expects a batch matrix of representations")
        if t.shape[1] != self.representation_dim:
            raise ContractError(f"head: expected width {self.representation_dim}, got {t.shape[1]}")
        logits = self.gate(t)
        p = nc.softmax(logits)
        embeddings = [g(t) for g in self.components]
        combined = nc.colmul(nc.column(p, 0), embeddings[0])
        for m in range(1, len(embeddings)):
            combined = nc.add(combined, nc.colmul(nc.column(p, m), embeddings[m]))
        dominant = np.argmax(p.data, axis=1)
        return MixtureOutput(p, embeddings, combined, dominant)

    def parameters(self) -> list[tuple[str, Tensor]]:
        params = [p for g in self.components for p in g.parameters()]
        return params + self.gate.parameters()


def dominant_component(logits: np.ndarray) -> np.ndarray:
    """Argmax over gate logits, ties to the lowest index.

    Any strictly increasing transform applied uniformly to the logits
    (including the softmax itself) leaves this selection unchanged.
    """
    return np.argmax(np.asarray(logits), axis=-1)


# ---------------------------------------------------------------------------
# checkpoints

def _head_kind(head) -> str:
    if isinstance(head, MixtureHead):
        return "mixture"
    if isinstance(head, SimCLRHead):
        return "simclr"
    raise ContractError(f"unknown head type {type(head).__name__}")


def save_checkpoint(path, encoder: Encoder, head) -> None:
    """Write ``MIXEM1`` + config block + parameters in declaration order.

    Layout: 6-byte magic, u32 length + UTF-8 JSON config, u32 parameter
    count, then per parameter: u32 name length, name bytes, u32 ndim,
    u32 dims, raw float64 little-endian values.  All integers are
    little-endian; the float payload round-trips bit-exactly.
    """
    meta = {
        "encoder": {
            "input_dim": encoder.config.input_dim,
            "hidden_dims": list(encoder.config.hidden_dims),
            "representation_dim": encoder.config.representation_dim,
            "activation": encoder.config.activation,
        },
        "head_kind": _head_kind(head),
        "head": {
            "num_components": head.config.num_components,
            "embedding_dim": head.config.embedding_dim,
            "hidden_dim": head.config.hidden_dim,
        },
    }
    params = encoder.parameters() + head.parameters()
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", len(blob)), blob, struct.pack("<I", len(params))]
    for name, tensor in params:
        name_b = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<I", tensor.ndim))
        chunks.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        chunks.append(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def read(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"checkpoint truncated while reading {what}", offset=self.pos)
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.read(4, what))[0]


def load_checkpoint(path) -> tuple[Encoder, "MixtureHead | SimCLRHead", dict]:
    """Rebuild encoder and head from a ``MIXEM1`` file, bit-exactly."""
    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf)
    magic = r.read(len(CHECKPOINT_MAGIC), "magic")
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"bad checkpoint magic {magic!r}", offset=0)
    blob = r.read(r.u32("config length"), "config block")
    try:
        meta = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable config block: {exc}", offset=len(CHECKPOINT_MAGIC) + 4) from exc

    enc_cfg = EncoderConfig(
        input_dim=meta["encoder"]["input_dim"],
        hidden_dims=tuple(meta["encoder"]["hidden_dims"]),
        representation_dim=meta["encoder"]["representation_dim"],
        activation=meta["encoder"]["activation"],
    )
    head_cfg = MixtureHeadConfig(**meta["head"])
    rng = np.random.default_rng(0)  # placeholder values, overwritten below
    encoder = Encoder(enc_cfg, rng)
    if meta["head_kind"] == "mixture":
        head = MixtureHead(enc_cfg.representation_dim, head_cfg, rng)
    elif meta["head_kind"] == "simclr":
        head = SimCLRHead(enc_cfg.representation_dim, head_cfg, rng)
    else:
        raise FormatError(f"unknown head kind {meta['head_kind']!r}")

    params = encoder.parameters() + head.parameters()
    count = r.u32("parameter count")
    if count != len(params):
        raise FormatError(f"expected {len(params)} parameters, file has {count}", offset=r.pos - 4)
    for name, tensor in params:
        stored = r.read(r.u32("name length"), "name").decode("utf-8")
        if stored != name:
            raise FormatError(f"parameter order mismatch: {stored!r} != {name!r}", offset=r.pos)
        ndim = r.u32("ndim")
        shape = struct.unpack(f"<{ndim}I", r.read(4 * ndim, "shape"))
        if tuple(shape) != tensor.shape:
            raise FormatError(f"shape mismatch for {name}: {shape} != {tensor.shape}", offset=r.pos)
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        raw = r.read(nbytes, f"values of {name}")
        tensor.data = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    if r.pos != len(buf):
        raise FormatError("trailing bytes after checkpoint payload", offset=r.pos)
    return encoder, head, meta
