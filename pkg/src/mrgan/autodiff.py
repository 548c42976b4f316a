"""Minimal dense-tensor engine with reverse-mode differentiation.

Tensors wrap float64 numpy arrays. Every op records a vector-Jacobian
closure that is itself built from engine ops, so gradients are ordinary
graph nodes and differentiating through a backward pass (needed for the
gradient penalty) works with no special casing.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Parameter",
    "Adam",
    "DimensionError",
    "constant",
    "add",
    "sub",
    "mul",
    "scale",
    "add_scalar",
    "neg",
    "matmul",
    "transpose",
    "affine",
    "activation",
    "leaky_relu",
    "relu",
    "tanh",
    "power",
    "sum_all",
    "mean_all",
    "sum_axis",
    "broadcast_to",
    "reshape",
    "pool",
    "block_pool",
    "gather_rows",
    "concat",
    "slice_rows",
    "slice_cols",
    "grad",
    "grad_check",
]


class DimensionError(ValueError):
    """Raised when tensor shapes do not line up for an operation."""


def _as_f64(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return np.ascontiguousarray(arr)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_f64(data)
        self.requires_grad = requires_grad
        self.grad: Tensor | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Accumulate gradients of this scalar into every reachable leaf."""
        grads = _backprop(self)
        for node, g in grads.items():
            if node._vjp is None and node.requires_grad:
                if node.grad is None:
                    node.grad = Tensor(g.data.copy())
                else:
                    node.grad.data += g.data

    # small operator sugar, used throughout the model code
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """A named leaf tensor updated by the optimizer."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def constant(data) -> Tensor:
    return Tensor(data)


def _make(data: np.ndarray, parents, vjp) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad or p._vjp is not None for p in parents):
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


# ---------------------------------------------------------------------------
# primitive ops


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"add: shapes {a.data.shape} vs {b.data.shape}")
    return _make(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, neg(b))


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _make(a.data * s, (a,), lambda g: (scale(g, s),))


def add_scalar(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _make(a.data + s, (a,), lambda g: (g,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"mul: shapes {a.data.shape} vs {b.data.shape}")
    return _make(a.data * b.data, (a, b), lambda g: (mul(g, b), mul(g, a)))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul: shapes {a.data.shape} vs {b.data.shape}")
    return _make(
        a.data @ b.data,
        (a, b),
        lambda g: (matmul(g, transpose(b)), matmul(transpose(a), g)),
    )


def transpose(a: Tensor) -> Tensor:
    return _make(np.ascontiguousarray(a.data.T), (a,), lambda g: (transpose(g),))


def power(a: Tensor, p: float) -> Tensor:
    p = float(p)
    out = np.power(a.data, p)
    return _make(out, (a,), lambda g: (mul(g, scale(power(a, p - 1.0), p)),))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    mask = np.where(a.data > 0.0, 1.0, slope)
    return _make(a.data * mask, (a,), lambda g: (mul(g, constant(mask)),))


def relu(a: Tensor) -> Tensor:
    mask = (a.data > 0.0).astype(np.float64)
    return _make(a.data * mask, (a,), lambda g: (mul(g, constant(mask)),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = _make(y, (a,), None)

    def vjp(g):
        return (mul(g, sub(constant(np.ones_like(y)), mul(out, out))),)

    out._vjp = vjp if out._parents else None
    return out


_ACTIVATIONS = ("leaky_relu", "tanh", "identity")


def activation(a: Tensor, kind: str, slope: float = 0.2) -> Tensor:
    """Elementwise nonlinearity; `kind` is one of leaky_relu / tanh / identity."""
    if kind == "leaky_relu":
        if not 0.0 < slope < 1.0:
            raise ValueError(f"leaky_relu slope must be in (0,1), got {slope}")
        return leaky_relu(a, slope)
    if kind == "tanh":
        return tanh(a)
    if kind == "identity":
        return a
    raise ValueError(f"unknown activation {kind!r}, expected one of {_ACTIVATIONS}")


def sum_all(a: Tensor) -> Tensor:
    shape = a.data.shape

    def vjp(g):
        return (broadcast_to(g, shape),)

    return _make(np.asarray(a.data.sum()), (a,), vjp)


def mean_all(a: Tensor) -> Tensor:
    return scale(sum_all(a), 1.0 / a.data.size)


def sum_axis(a: Tensor, axis: int) -> Tensor:
    """Sum along one axis, keeping it as size 1."""
    shape = a.data.shape

    def vjp(g):
        return (broadcast_to(g, shape),)

    return _make(a.data.sum(axis=axis, keepdims=True), (a,), vjp)


def broadcast_to(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    src = a.data.shape
    if len(src) < len(shape):
        src = (1,) * (len(shape) - len(src)) + src
    axes = tuple(i for i, (s, t) in enumerate(zip(src, shape)) if s == 1 and t != 1)

    def vjp(g):
        out = g
        for ax in axes:
            out = sum_axis(out, ax)
        if out.data.shape != a.data.shape:
            out = reshape(out, a.data.shape)
        return (out,)

    return _make(np.broadcast_to(a.data.reshape(src), shape).copy(), (a,), vjp)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    old = a.data.shape
    return _make(a.data.reshape(shape).copy(), (a,), lambda g: (reshape(g, old),))


def _scatter_rows(g: Tensor, idx: np.ndarray, nrows: int) -> Tensor:
    out = np.zeros((nrows,) + g.data.shape[1:])
    np.add.at(out, idx, g.data)
    return _make(out, (g,), lambda h: (gather_rows(h, idx),))


def gather_rows(a: Tensor, idx) -> Tensor:
    """out[i] = a[idx[i]]; scatter-add on the way back."""
    idx = np.asarray(idx, dtype=np.intp)
    nrows = a.data.shape[0]
    return _make(a.data[idx], (a,), lambda g: (_scatter_rows(g, idx, nrows),))


def pool(a: Tensor, mode: str = "max") -> Tensor:
    """Per-feature extremum over the point axis of a P x F tensor -> 1 x F.

    The gradient routes to the first extremal element per column.
    """
    return block_pool(a, a.data.shape[0], mode=mode)


def block_pool(a: Tensor, block: int, mode: str = "max") -> Tensor:
    """Pool contiguous row blocks of size `block`: (P, F) -> (P/block, F)."""
    if mode not in ("max", "min"):
        raise ValueError(f"pool mode must be 'max' or 'min', got {mode!r}")
    p, f = a.data.shape
    if p == 0:
        raise DimensionError("pool over an empty point axis")
    if p % block != 0:
        raise DimensionError(f"point count {p} not divisible by block {block}")
    nb = p // block
    view = a.data.reshape(nb, block, f)
    argfun = np.argmax if mode == "max" else np.argmin
    arg = argfun(view, axis=1)  # (nb, f), first index on ties
    rows = arg + (np.arange(nb)[:, None] * block)  # absolute row per (block, col)
    cols = np.broadcast_to(np.arange(f), (nb, f))
    out = a.data[rows, cols]

    def vjp(g):
        # gather/scatter closed pair for double backward
        def scatter_op(h):
            buf = np.zeros((p, f))
            np.add.at(buf, (rows.ravel(), cols.ravel()), h.data.ravel())
            return _make(buf, (h,), lambda k: (gather_op(k),))

        def gather_op(k):
            return _make(k.data[rows, cols], (k,), lambda m: (scatter_op(m),))

        return (scatter_op(g),)

    return _make(out, (a,), vjp)


def concat(parts, axis: int = 0) -> Tensor:
    parts = list(parts)
    sizes = [p.data.shape[axis] for p in parts]
    offs = np.cumsum([0] + sizes)
    data = np.concatenate([p.data for p in parts], axis=axis)

    def vjp(g):
        slicer = slice_rows if axis == 0 else slice_cols
        return tuple(slicer(g, offs[i], offs[i + 1]) for i in range(len(parts)))

    return _make(data, parts, vjp)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    p = a.data.shape[0]

    def vjp(g):
        def pad(h):
            buf = np.zeros((p,) + h.data.shape[1:])
            buf[start:stop] = h.data
            return _make(buf, (h,), lambda k: (slice_rows(k, start, stop),))

        return (pad(g),)

    return _make(a.data[start:stop].copy(), (a,), vjp)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    f = a.data.shape[1]

    def vjp(g):
        def pad(h):
            buf = np.zeros(h.data.shape[:1] + (f,) + h.data.shape[2:])
            buf[:, start:stop] = h.data
            return _make(buf, (h,), lambda k: (slice_cols(k, start, stop),))

        return (pad(g),)

    return _make(a.data[:, start:stop].copy(), (a,), vjp)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with b broadcast over rows."""
    y = matmul(x, w)
    return add(y, broadcast_to(b, y.data.shape))


# ---------------------------------------------------------------------------
# backward machinery


def _toposort(root: Tensor):
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    return order


def _backprop(output: Tensor) -> dict:
    """Gradients of a scalar output keyed by graph node (identity)."""
    if output.data.size != 1:
        raise DimensionError(f"backward requires a scalar output, got shape {output.data.shape}")
    order = _toposort(output)
    grads: dict[int, Tensor] = {id(output): constant(np.ones_like(output.data))}
    nodes: dict[int, Tensor] = {id(output): output}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node._vjp is None:
            continue
        parent_grads = node._vjp(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None:
                continue
            if id(p) in grads:
                grads[id(p)] = add(grads[id(p)], pg)
            else:
                grads[id(p)] = pg
            nodes[id(p)] = p
    return {nodes[k]: v for k, v in grads.items()}


def grad(output: Tensor, inputs) -> list[Tensor]:
    """Gradients of a scalar w.r.t. `inputs`, without touching .grad fields.

    The returned tensors are themselves graph nodes, so a second backward
    pass through them (gradient penalty) is well-defined.
    """
    grads = _backprop(output)
    out = []
    for x in inputs:
        g = grads.get(x)
        out.append(g if g is not None else constant(np.zeros_like(x.data)))
    return out


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Bias-corrected Adam over a list of Parameters."""

    def __init__(self, params, lr=1e-4, beta1=0.0, beta2=0.99, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad.data if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / (1.0 - b1**self.t)
            v_hat = self.v[i] / (1.0 - b2**self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


# ---------------------------------------------------------------------------
# verification


def grad_check(f, x: Tensor, eps: float = 1e-5) -> float:
    """Max relative error of reverse-mode vs central-difference gradients.

    `f` maps a Tensor to a scalar Tensor and must be re-evaluable.
    """
    x.requires_grad = True
    out = f(x)
    if not np.isfinite(out.data).all():
        raise FloatingPointError("grad_check: f(x) is not finite")
    (analytic,) = grad(out, [x])
    a = analytic.data
    n = np.zeros_like(x.data)
    flat = x.data.ravel()
    nflat = n.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x).data
        flat[i] = orig - eps
        lo = f(x).data
        flat[i] = orig
        if not (np.isfinite(hi).all() and np.isfinite(lo).all()):
            raise FloatingPointError("grad_check: f not finite near x")
        nflat[i] = (hi - lo).item() / (2.0 * eps)
    denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
    return float(np.max(np.abs(a - n) / denom))
