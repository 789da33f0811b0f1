"""
Dense float64 tensors with reverse-mode gradients over a fixed primitive set.

Every primitive computes its forward value with numpy and, when a tape is
active and one of its inputs is tracked on that tape, records a closure that
maps the output gradient to input gradients. ``backward`` replays the tape in
reverse, visiting each entry once.
"""

import itertools
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import attr
import numpy as np

from ..util.exceptions import NumericError, ShapeError

LOG_FLOOR = 1e-12
LAYER_NORM_EPS = 1e-5
GELU_C = math.sqrt(2.0 / math.pi)

_refs = itertools.count()
_active_tapes: List["Tape"] = []


class Tensor:
    """Immutable dense array of 64-bit floats with a unique reference id."""

    __slots__ = ("data", "ref")

    def __init__(self, data, op="tensor"):
        """Copy data into a read-only float64 array; reject NaN and Inf."""
        array = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(array)):
            raise NumericError(f"Non-finite value produced by {op}")
        array.flags.writeable = False
        self.data = array
        self.ref = next(_refs)

    @property
    def shape(self) -> Tuple[int, ...]:
        """Shape of the underlying array."""
        return self.data.shape

    @property
    def ndim(self) -> int:
        """Number of dimensions."""
        return self.data.ndim

    @property
    def size(self) -> int:
        """Number of entries."""
        return self.data.size

    def item(self) -> float:
        """Return the value of a single-entry tensor as a float."""
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Return a writable copy of the data."""
        return np.array(self.data)

    def __repr__(self):
        """Show shape and reference id."""
        return f"Tensor(shape={self.shape}, ref={self.ref})"


@attr.s(auto_attribs=True, frozen=True)
class TapeEntry:
    """One recorded primitive application."""

    op: str
    inputs: Tuple[int, ...]
    input_shapes: Tuple[Tuple[int, ...], ...]
    output: int
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tape:
    """
    Ordered record of primitive applications.

    Used as a context manager; a tape may be entered more than once and keeps
    appending entries. Leaves are registered with ``watch``.
    """

    def __init__(self):
        """Start with an empty record."""
        self.entries: List[TapeEntry] = []
        self.leaves: Dict[int, Tensor] = {}
        self._tracked = set()
        self.visits = 0

    def __enter__(self):
        """Make this tape the active one."""
        _active_tapes.append(self)
        return self

    def __exit__(self, *exc):
        """Deactivate this tape."""
        _active_tapes.remove(self)
        return False

    def watch(self, tensor: Tensor) -> Tensor:
        """Register a leaf whose gradient is wanted."""
        self.leaves[tensor.ref] = tensor
        self._tracked.add(tensor.ref)
        return tensor

    def tracks(self, tensor: Tensor) -> bool:
        """Return True if the tensor is a leaf or was produced on this tape."""
        return tensor.ref in self._tracked

    def record(self, op, inputs, output, backward):
        """Append an entry for output = op(inputs)."""
        self.entries.append(
            TapeEntry(
                op=op,
                inputs=tuple(t.ref for t in inputs),
                input_shapes=tuple(t.shape for t in inputs),
                output=output.ref,
                backward=backward,
            )
        )
        self._tracked.add(output.ref)


def current_tape() -> Optional[Tape]:
    """Return the innermost active tape, if any."""
    return _active_tapes[-1] if _active_tapes else None


def constant(data) -> Tensor:
    """Wrap data in an untracked tensor."""
    return Tensor(data)


def detach(tensor: Tensor) -> Tensor:
    """Stop-gradient: an untracked tensor holding the same values."""
    return Tensor(tensor.data, op="detach")


def _emit(op, inputs, value, backward) -> Tensor:
    out = Tensor(value, op=op)
    tape = current_tape()
    if tape is not None and any(tape.tracks(t) for t in inputs):
        tape.record(op, inputs, out, backward)
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(op, a: Tensor, b: Tensor):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy semantics (1-d promotion, batched leading dims)."""
    inner_b = b.shape[0] if b.ndim == 1 else (b.shape[-2] if b.ndim > 1 else None)
    if a.ndim == 0 or b.ndim == 0 or a.shape[-1] != inner_b:
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        value = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape)

    a2 = a.data[np.newaxis, :] if a.ndim == 1 else a.data
    b2 = b.data[:, np.newaxis] if b.ndim == 1 else b.data
    out_shape = np.matmul(a2, b2).shape

    def backward(grad):
        grad2 = grad.reshape(out_shape)
        grad_a = np.matmul(grad2, np.swapaxes(b2, -1, -2))
        grad_b = np.matmul(np.swapaxes(a2, -1, -2), grad2)
        return (
            _unbroadcast(grad_a, a2.shape).reshape(a.shape),
            _unbroadcast(grad_b, b2.shape).reshape(b.shape),
        )

    return _emit("matmul", (a, b), value, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum with broadcasting."""
    _broadcast_shape("add", a, b)

    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return _emit("add", (a, b), a.data + b.data, backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with broadcasting."""
    _broadcast_shape("mul", a, b)

    def backward(grad):
        return (
            _unbroadcast(grad * b.data, a.shape),
            _unbroadcast(grad * a.data, b.shape),
        )

    return _emit("mul", (a, b), a.data * b.data, backward)


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a python scalar."""
    factor = float(factor)

    def backward(grad):
        return (grad * factor,)

    return _emit("scale", (a,), a.data * factor, backward)


def softmax(a: Tensor) -> Tensor:
    """Numerically stable softmax over the last axis."""
    if a.ndim == 0:
        raise ShapeError("softmax", a.shape)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    value = exps / exps.sum(axis=-1, keepdims=True)

    def backward(grad):
        return (value * (grad - (grad * value).sum(axis=-1, keepdims=True)),)

    return _emit("softmax", (a,), value, backward)


def log(a: Tensor) -> Tensor:
    """Natural log with inputs clamped at LOG_FLOOR."""
    clamped = np.maximum(a.data, LOG_FLOOR)

    def backward(grad):
        return (np.where(a.data >= LOG_FLOOR, grad / clamped, 0.0),)

    return _emit("log", (a,), np.log(clamped), backward)


def mean(a: Tensor, axis: Optional[int] = None) -> Tensor:
    """Mean over all entries or one axis."""
    count = a.size if axis is None else a.shape[axis]
    if count == 0:
        raise ShapeError("mean", a.shape)

    def backward(grad):
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, a.shape) / count,)

    return _emit("mean", (a,), a.data.mean(axis=axis), backward)


def sum(a: Tensor, axis: Optional[int] = None) -> Tensor:  # noqa: A001
    """Sum over all entries or one axis."""

    def backward(grad):
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return (np.array(np.broadcast_to(grad, a.shape)),)

    return _emit("sum", (a,), a.data.sum(axis=axis), backward)


def gelu(a: Tensor) -> Tensor:
    """GELU, tanh form."""
    x = a.data
    inner = GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    value = 0.5 * x * (1.0 + t)

    def backward(grad):
        d_inner = GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
        return (grad * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * d_inner),)

    return _emit("gelu", (a,), value, backward)


def embedding(table: Tensor, ids) -> Tensor:
    """Gather rows of a 2-d table by integer ids of any shape."""
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2 or (ids.size and (ids.min() < 0 or ids.max() >= table.shape[0])):
        raise ShapeError("embedding", table.shape, ids.shape)

    def backward(grad):
        grad_table = np.zeros(table.shape)
        np.add.at(grad_table, ids.reshape(-1), grad.reshape(-1, table.shape[1]))
        return (grad_table,)

    return _emit("embedding", (table,), table.data[ids], backward)


def layer_norm(a: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize over the last axis to zero mean and unit variance (no affine)."""
    centered = a.data - a.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv_std

    def backward(grad):
        grad_mean = grad.mean(axis=-1, keepdims=True)
        proj = (grad * normed).mean(axis=-1, keepdims=True)
        return (inv_std * (grad - grad_mean - normed * proj),)

    return _emit("layer_norm", (a,), normed, backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along an axis."""
    try:
        value = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *(t.shape for t in tensors))
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(grad):
        return tuple(np.split(grad, bounds, axis=axis))

    return _emit("concat", tuple(tensors), value, backward)


def slice(a: Tensor, index) -> Tensor:  # noqa: A001
    """Basic (non-fancy) indexing."""
    try:
        value = a.data[index]
    except IndexError:
        raise ShapeError("slice", a.shape)

    def backward(grad):
        grad_a = np.zeros(a.shape)
        grad_a[index] = grad
        return (grad_a,)

    return _emit("slice", (a,), value, backward)


def reshape(a: Tensor, shape) -> Tensor:
    """Change the shape, keeping row-major order."""
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    try:
        value = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, shape)

    def backward(grad):
        return (grad.reshape(a.shape),)

    return _emit("reshape", (a,), value, backward)


def transpose(a: Tensor, axes=None) -> Tensor:
    """Permute axes; defaults to reversing them."""
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError("transpose", a.shape, axes)
    inverse = tuple(np.argsort(axes))

    def backward(grad):
        return (np.transpose(grad, inverse),)

    return _emit("transpose", (a,), np.transpose(a.data, axes), backward)


PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "scale": scale,
    "softmax": softmax,
    "log": log,
    "mean": mean,
    "sum": sum,
    "gelu": gelu,
    "embedding": embedding,
    "layer_norm": layer_norm,
    "concat": concat,
    "slice": slice,
    "reshape": reshape,
    "transpose": transpose,
}


def backward(tape: Tape, root: Tensor) -> Dict[int, Tensor]:
    """
    Propagate d(root)/d(leaf) for every leaf watched on the tape.

    Leaves the root does not depend on get zero gradients of matching shape.
    """
    if root.size != 1:
        raise NumericError(f"backward needs a scalar root, got shape {root.shape}")
    if not tape.tracks(root):
        raise NumericError("backward root was not produced on this tape")

    grads: Dict[int, np.ndarray] = {root.ref: np.ones(root.shape)}
    tape.visits = 0
    for entry in reversed(tape.entries):
        tape.visits += 1
        # consumers of an output are recorded after it, so its gradient is complete
        grad = grads.get(entry.output)
        if grad is None:
            continue
        for ref, input_grad in zip(entry.inputs, entry.backward(grad)):
            if input_grad is None or ref not in tape._tracked:
                continue
            if ref in grads:
                grads[ref] = grads[ref] + input_grad
            else:
                grads[ref] = input_grad

    return {
        ref: Tensor(grads.get(ref, np.zeros(leaf.shape)), op="backward")
        for ref, leaf in tape.leaves.items()
    }


def gradients(tape: Tape, root: Tensor, tensors: Sequence[Tensor]) -> List[np.ndarray]:
    """Return gradients of root with respect to the given watched tensors."""
    grads = backward(tape, root)
    return [grads[t.ref].data for t in tensors]
