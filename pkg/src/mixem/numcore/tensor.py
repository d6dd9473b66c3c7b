"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every differentiable primitive records a `TapeNode` on its output while
the forward pass runs (eager record-then-reverse).  `backward` collects
the nodes reachable from a scalar root into a `Tape` -- an ordered
record of the primitives in forward topological order -- and replays
their adjoint rules in reverse, accumulating gradients into the
`requires_grad` leaves.  A tape lives for exactly one backward pass, so
nothing persists between optimization steps.

Tensors are treated as immutable once used in a forward pass; only
optimizers mutate `.data` in place, between tapes.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError


class TapeNode:
    """One recorded primitive: its output, operands, and adjoint rule.

    `adjoint(grad_out)` returns one gradient array per input (or None
    for inputs that do not receive gradient).
    """

    __slots__ = ("op", "output", "inputs", "adjoint")

    def __init__(self, op, output, inputs, adjoint):
        self.op = op
        self.output = output
        self.inputs = inputs
        self.adjoint = adjoint

    def __repr__(self):
        return f"TapeNode({self.op})"


class Tensor:
    """A dense float64 array plus gradient bookkeeping.

    `requires_grad` marks a leaf whose gradient should be populated by
    `backward`.  Tensors produced by primitives carry a `node` linking
    them to the tape; they are tracked but their gradients are
    transient.
    """

    __slots__ = ("data", "requires_grad", "grad", "node")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node: TapeNode | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_tracked(self) -> bool:
        return self.requires_grad or self.node is not None

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """A view of the same data with no tape history."""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({np.array2string(self.data, precision=6)}{flag})"

    # Arithmetic dunders are attached by mixem.numcore.ops to avoid a
    # circular import; importing mixem.numcore wires them up.


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Ordered record of the primitives reachable from a root tensor.

    `records` lists TapeNodes in forward topological order (operands
    always precede the ops that consume them), so replaying adjoints in
    reverse order yields gradients for every tracked leaf.
    """

    def __init__(self, records: list[TapeNode]):
        self.records = records

    def __len__(self):
        return len(self.records)

    @classmethod
    def trace(cls, root: Tensor) -> "Tape":
        """Collect the nodes below `root` in forward topological order."""
        records: list[TapeNode] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            tensor, ready = stack.pop()
            node = tensor.node
            if node is None:
                continue
            if ready:
                records.append(node)
                continue
            nid = id(node)
            if nid in visited:
                continue
            visited.add(nid)
            stack.append((tensor, True))
            for parent in node.inputs:
                stack.append((parent, False))
        return cls(records)

    def run_backward(self, root: Tensor) -> None:
        """Seed d(root)/d(root) = 1 and accumulate into leaf `.grad`s."""
        if root.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {root.shape}")
        grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        leaves: dict[int, Tensor] = {}
        if root.requires_grad and root.node is None:
            leaves[id(root)] = root
        for node in reversed(self.records):
            grad_out = grads.pop(id(node.output), None)
            if grad_out is None:
                continue
            parts = node.adjoint(grad_out)
            for parent, part in zip(node.inputs, parts):
                if part is None:
                    continue
                if parent.node is None:
                    if not parent.requires_grad:
                        continue
                    leaves[id(parent)] = parent
                acc = grads.get(id(parent))
                grads[id(parent)] = part if acc is None else acc + part
        for tid, leaf in leaves.items():
            g = grads.get(tid)
            if g is None:
                continue
            g = np.asarray(g, dtype=np.float64).reshape(leaf.data.shape)
            leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def backward(loss: Tensor) -> None:
    """Populate `.grad` on every tracked leaf that `loss` depends on.

    Repeated calls accumulate, mirroring the usual convention; call
    `zero_grad` on the leaves (or discard the tape) between steps.
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backward expects a Tensor")
    if loss.node is None and not loss.requires_grad:
        raise ContractError("loss was not produced from tracked leaves on the current tape")
    Tape.trace(loss).run_backward(loss)
