"""Central finite-difference verification of tape gradients."""

import logging
from typing import Callable, Optional, Sequence

import numpy as np

from ..util.exceptions import NumericError
from .tensor import Tape, Tensor, backward

RELATIVE_FLOOR = 1e-8


def relative_error(analytic: float, numeric: float) -> float:
    """|a - n| / max(|a|, |n|, 1e-8)."""
    denominator = max(abs(analytic), abs(numeric), RELATIVE_FLOOR)
    return abs(analytic - numeric) / denominator


def _evaluate(f, params) -> float:
    value = f(params)
    value = value.item() if isinstance(value, Tensor) else float(value)
    if not np.isfinite(value):  # plain floats bypass the Tensor check
        raise NumericError("grad_check: f returned a non-finite value")
    return value


def grad_check(
    f: Callable[[Sequence[Tensor]], Tensor],
    params: Sequence[Tensor],
    epsilon: float = 1e-5,
    coordinates: Optional[int] = None,
    seed: int = 0,
    numeric_f: Optional[Callable[[Sequence[Tensor]], Tensor]] = None,
) -> float:
    """
    Compare backward() against central differences and return the max relative error.

    f must be deterministic and build its result only from the tensors it is
    given. With ``coordinates`` set, at most that many coordinates per
    parameter are checked, chosen by a seeded permutation. ``numeric_f``, when
    given, is the function differenced numerically; it must equal f at the
    base point and hold stop-gradient inputs at their base values.
    """
    if not 0.0 < epsilon <= 1e-2:
        raise NumericError(f"grad_check epsilon must lie in (0, 1e-2], got {epsilon}")

    with Tape() as tape:
        watched = [tape.watch(p) for p in params]
        root = f(watched)
    if not isinstance(root, Tensor) or root.size != 1:
        raise NumericError("grad_check: f must return a scalar Tensor")
    if tape.tracks(root):
        analytic = backward(tape, root)
    else:
        # root does not depend on any parameter
        analytic = {p.ref: Tensor(np.zeros(p.shape)) for p in watched}

    numeric_f = numeric_f or f
    rng = np.random.default_rng(seed)
    worst = 0.0
    for index, param in enumerate(watched):
        flat_grad = analytic[param.ref].data.reshape(-1)
        positions = np.arange(param.size)
        if coordinates is not None and param.size > coordinates:
            positions = np.sort(rng.permutation(param.size)[:coordinates])
        for position in positions:
            values = []
            for sign in (1.0, -1.0):
                data = param.numpy().reshape(-1)
                data[position] += sign * epsilon
                shifted = list(watched)
                shifted[index] = Tensor(data.reshape(param.shape))
                values.append(_evaluate(numeric_f, shifted))
            numeric = (values[0] - values[1]) / (2.0 * epsilon)
            worst = max(worst, relative_error(float(flat_grad[position]), numeric))
    logging.debug(f"grad_check max relative error {worst:.3e}")
    return worst
