"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import ContractError, DomainError
from .tensor import Tensor, backward


@dataclass
class GradientCheckReport:
    """Outcome of comparing analytic gradients against central differences.

    `worst_param` / `worst_coord` identify the single worst coordinate;
    `per_param` maps each parameter name to its own max relative error.
    """

    max_rel_error: float
    worst_param: str
    worst_coord: int
    analytic: float
    numeric: float
    step: float
    tolerance: float
    per_param: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def summary(self) -> str:
        status = "ok" if self.passed else "FAIL"
        return (
            f"gradient check {status}: max rel error {self.max_rel_error:.3e} "
            f"at {self.worst_param}[{self.worst_coord}] "
            f"(analytic {self.analytic:.6e}, numeric {self.numeric:.6e}, "
            f"step {self.step:g}, tol {self.tolerance:g})"
        )


def _rel_error(a: float, n: float) -> float:
    # Absolute floor of 1.0 keeps near-zero gradients from blowing up the
    # ratio on finite-difference noise.
    return abs(a - n) / max(1.0, abs(a), abs(n))


def gradient_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-6,
    tol: float = 1e-4,
    names: Sequence[str] | None = None,
) -> GradientCheckReport:
    """Compare the analytic gradient of `f()` to central differences.

    `f` must rebuild its value from `params` on every call (a closure
    over the parameter tensors), so perturbing `params[i].data` changes
    the result.  Gradients already on the params are cleared first.
    """
    if not 0.0 < step <= 1e-3:
        raise ContractError(f"step must be in (0, 1e-3], got {step}")
    params = list(params)
    if names is None:
        names = [f"param{i}" for i in range(len(params))]
    if len(names) != len(params):
        raise ContractError("names and params length mismatch")

    for p in params:
        p.zero_grad()
    out = f()
    if not isinstance(out, Tensor) or out.size != 1:
        raise ContractError("gradient_check expects f to return a scalar Tensor")
    backward(out)
    analytic = [
        p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params
    ]

    def eval_f() -> float:
        v = float(f().data.reshape(()))
        if not np.isfinite(v):
            raise DomainError("f is non-finite at a perturbed point")
        return v

    worst = (-1.0, "", -1, 0.0, 0.0)
    per_param: dict[str, float] = {}
    for p, a, name in zip(params, analytic, names):
        flat = p.data.reshape(-1)
        a_flat = a.reshape(-1)
        p_worst = 0.0
        for c in range(flat.size):
            orig = flat[c]
            flat[c] = orig + step
            hi = eval_f()
            flat[c] = orig - step
            lo = eval_f()
            flat[c] = orig
            numeric = (hi - lo) / (2.0 * step)
            err = _rel_error(a_flat[c], numeric)
            p_worst = max(p_worst, err)
            if err > worst[0]:
                worst = (err, name, c, float(a_flat[c]), numeric)
        per_param[name] = p_worst

    return GradientCheckReport(
        max_rel_error=worst[0],
        worst_param=worst[1],
        worst_coord=worst[2],
        analytic=worst[3],
        numeric=worst[4],
        step=step,
        tolerance=tol,
        per_param=per_param,
    )
