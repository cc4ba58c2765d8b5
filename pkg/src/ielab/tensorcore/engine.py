"""Dense float64 tensors with reverse-mode differentiation on an explicit tape.

The tape records one node per executed operation, in execution order, so a
single reverse sweep visits parents after children. Activating a tape (as a
context manager) makes every op executed inside record itself; with no active
tape the same ops run as plain numpy forward computations.
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Optional

import numpy as np


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


class NumericError(ValueError):
    """Non-finite values where the contract requires finite input."""


class TapeError(RuntimeError):
    """Tape misuse: nested activation, double backward, unrecorded loss."""


class Tensor:
    """Dense n-dimensional float64 value, optionally tracked on a tape.

    `data` is always a C-contiguous (row-major) float64 array. `node_id` is
    the tensor's index on the tape it was last registered on, if any.
    """

    __slots__ = ("data", "requires_grad", "node_id", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim and not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)  # keeps 0-d shapes intact
        if any(d < 1 for d in arr.shape):
            raise ShapeError(f"tensor dimensions must be >= 1, got {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.node_id: Optional[int] = None
        self._tape: Optional["Tape"] = None

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        """Fast path for op outputs: arr must be fresh, contiguous float64."""
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = False
        t.node_id = None
        t._tape = None
        return t

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), self.requires_grad)

    def __repr__(self):
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{grad})"


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


class _Node:
    __slots__ = ("parents", "backward_fn")

    def __init__(self, parents: tuple, backward_fn: Optional[Callable]):
        self.parents = parents
        self.backward_fn = backward_fn


_ACTIVE = threading.local()  # one active tape per thread


def active_tape() -> Optional["Tape"]:
    return getattr(_ACTIVE, "tape", None)


class Tape:
    """Ordered record of operations for one forward pass.

    Node parents always precede the node itself (execution order); a tape
    supports exactly one backward sweep per recording.
    """

    __slots__ = ("nodes", "leaves", "consumed")

    def __init__(self):
        self.nodes: list[_Node] = []
        self.leaves: dict[int, Tensor] = {}
        self.consumed = False

    def __enter__(self) -> "Tape":
        if getattr(_ACTIVE, "tape", None) is not None:
            raise TapeError("another tape is already active on this thread")
        _ACTIVE.tape = self
        return self

    def __exit__(self, *exc):
        _ACTIVE.tape = None
        return False

    def watch(self, *tensors: Tensor) -> None:
        """Pre-register leaves so backward reports them even when unused."""
        for t in tensors:
            self.tracked_id(t)

    def tracked_id(self, t: Tensor) -> int:
        """Node id of `t` on this tape; registers requires_grad leaves lazily.

        Returns -1 for constants that do not participate in differentiation.
        """
        if t._tape is self and t.node_id is not None:
            return t.node_id
        if t.requires_grad:
            nid = len(self.nodes)
            self.nodes.append(_Node((), None))
            self.leaves[nid] = t
            t._tape = self
            t.node_id = nid
            return nid
        return -1

    def push(self, out: Tensor, parent_ids: tuple, backward_fn: Callable) -> None:
        nid = len(self.nodes)
        self.nodes.append(_Node(parent_ids, backward_fn))
        out._tape = self
        out.node_id = nid


def backward(loss: Tensor, tape: Tape) -> dict[int, Tensor]:
    """Reverse sweep from a scalar loss; one sweep per recording.

    Returns {node_id: gradient Tensor} for every requires_grad leaf the tape
    saw; leaves unreachable from the loss get zero gradients.
    """
    if loss.data.ndim != 0:
        raise TapeError(f"loss must be scalar, got shape {loss.data.shape}")
    if loss._tape is not tape or loss.node_id is None:
        raise TapeError("loss was not recorded on this tape")
    if tape.consumed:
        raise TapeError("tape already consumed; re-record before backward")
    tape.consumed = True

    grads: dict[int, np.ndarray] = {loss.node_id: np.ones((), dtype=np.float64)}
    for nid in range(loss.node_id, -1, -1):
        g = grads.pop(nid, None)
        if g is None:
            continue
        node = tape.nodes[nid]
        if nid in tape.leaves:
            grads[nid] = g  # keep leaf gradients for the result map
            continue
        if node.backward_fn is None:
            continue
        for pid, pg in zip(node.parents, node.backward_fn(g)):
            if pid < 0 or pg is None:
                continue
            acc = grads.get(pid)
            if acc is None:
                grads[pid] = pg
            else:
                acc += pg

    result: dict[int, Tensor] = {}
    for nid, leaf in tape.leaves.items():
        g = grads.get(nid)
        if g is None:
            g = np.zeros_like(leaf.data)
        result[nid] = Tensor(np.broadcast_to(g, leaf.data.shape).copy()
                             if g.shape != leaf.data.shape else g)
    tape.nodes = []  # release saved activations
    return result


def as_array(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


GELU_TANH_COEFF = math.sqrt(2.0 / math.pi)  # tanh-form approximation constant
