"""Tape-based reverse-mode automatic differentiation.

A `Graph` records every primitive op in creation order. Because inputs must exist
before an op that consumes them is recorded, creation order is a topological order and
`Graph.backward` can replay the tape in reverse without sorting. All values are 64-bit
and frozen (read-only) once recorded, so a backward pass can never alter them.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from fpt_utils.errors import UsageError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def _freeze(value) -> np.ndarray:
    array = np.asarray(value, dtype=np.float64).view()
    array.flags.writeable = False
    return array


@dataclass
class Node:
    node_id: int
    op: str
    inputs: Tuple[int, ...]
    value: np.ndarray
    requires_grad: bool
    backward_fn: Optional[BackwardFn] = None

    @property
    def is_leaf(self) -> bool:
        return not self.inputs


class GradientResult:
    """Gradients of one backward pass, keyed by the node id of each leaf that was
    created with `requires_grad=True`."""

    def __init__(self, grads: Dict[int, np.ndarray]):
        self.grads = grads

    def __getitem__(self, key: Union[int, "Tensor"]) -> np.ndarray:
        node_id = key.node_id if isinstance(key, Tensor) else key
        if node_id not in self.grads:
            raise UsageError(f"node {node_id} is not a leaf that requires gradients")
        return self.grads[node_id]

    def __contains__(self, key: Union[int, "Tensor"]) -> bool:
        node_id = key.node_id if isinstance(key, Tensor) else key
        return node_id in self.grads

    def __len__(self) -> int:
        return len(self.grads)


class Graph:
    """One computation. Graphs are single-threaded; build a new graph per forward pass
    and per thread."""

    def __init__(self):
        self.nodes: List[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, value, requires_grad: bool = False, name: str = "leaf") -> "Tensor":
        node = Node(len(self.nodes), name, (), _freeze(value), requires_grad)
        self.nodes.append(node)
        return Tensor(self, node.node_id)

    def constant(self, value) -> "Tensor":
        return self.leaf(value, requires_grad=False, name="constant")

    def record(
        self,
        op: str,
        inputs: Sequence["Tensor"],
        value,
        backward_fn: BackwardFn,
    ) -> "Tensor":
        for tensor in inputs:
            if tensor.graph is not self:
                raise UsageError(f"op '{op}' mixes tensors from different graphs")
        requires_grad = any(self.nodes[t.node_id].requires_grad for t in inputs)
        node = Node(
            len(self.nodes),
            op,
            tuple(t.node_id for t in inputs),
            _freeze(value),
            requires_grad,
            backward_fn if requires_grad else None,
        )
        self.nodes.append(node)
        return Tensor(self, node.node_id)

    def backward(self, loss: "Tensor") -> GradientResult:
        """Returns d(loss)/d(leaf) for every leaf created with `requires_grad=True`.

        Raises:
            UsageError: if `loss` is not a single-element tensor of this graph.
        """
        if loss.graph is not self:
            raise UsageError("loss belongs to a different graph")
        loss_node = self.nodes[loss.node_id]
        if loss_node.value.size != 1:
            raise UsageError(
                f"backward needs a scalar loss, got shape {loss_node.value.shape}"
            )

        grads: Dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss_node.value)}
        for node in reversed(self.nodes[: loss.node_id + 1]):
            grad = grads.get(node.node_id)
            if grad is None or node.backward_fn is None:
                continue
            input_grads = node.backward_fn(grad)
            for input_id, input_grad in zip(node.inputs, input_grads):
                if input_grad is None or not self.nodes[input_id].requires_grad:
                    continue
                if input_id in grads:
                    grads[input_id] = grads[input_id] + input_grad
                else:
                    grads[input_id] = input_grad

        leaf_grads = {}
        for node in self.nodes:
            if node.is_leaf and node.requires_grad:
                grad = grads.get(node.node_id)
                if grad is None:
                    grad = np.zeros_like(node.value)
                leaf_grads[node.node_id] = np.array(grad, dtype=np.float64).reshape(
                    node.value.shape
                )
        return GradientResult(leaf_grads)


class Tensor:
    """Handle to one node of a graph."""

    __slots__ = ("graph", "node_id")

    def __init__(self, graph: Graph, node_id: int):
        self.graph = graph
        self.node_id = node_id

    @property
    def node(self) -> Node:
        return self.graph.nodes[self.node_id]

    @property
    def value(self) -> np.ndarray:
        return self.node.value

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.node.value.shape

    @property
    def ndim(self) -> int:
        return self.node.value.ndim

    @property
    def requires_grad(self) -> bool:
        return self.node.requires_grad

    def numpy(self) -> np.ndarray:
        return np.array(self.node.value)

    def item(self) -> float:
        return float(self.node.value.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(op={self.node.op!r}, shape={self.shape})"

    # Arithmetic sugar; the implementations live in ops to keep this class thin
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops

        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops

        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops

        return ops.div(self, other)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)

    def __neg__(self):
        from . import ops

        return ops.neg(self)
