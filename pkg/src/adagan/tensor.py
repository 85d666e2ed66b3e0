"""Dense float64 tensors with reverse-mode differentiation.

Every operation records a node whose vector-Jacobian product is itself
expressed through the ops in this module, so a backward pass run with
``create_graph=True`` produces gradients that can be differentiated once
more (needed for gradient penalties). Tensors are immutable once created
except for ``.grad`` accumulation; callers zero grads explicitly.

Layout convention for images is NHWC; convolution weights are stored as
(kh, kw, in_channels, out_channels).
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class NonFiniteError(ArithmeticError):
    """A tensor value became NaN or infinite."""


_recording = True


@contextmanager
def no_record():
    """Disable graph recording inside the with-block (results are leaves)."""
    global _recording
    prev = _recording
    _recording = False
    try:
        yield
    finally:
        _recording = prev


def recording_enabled() -> bool:
    return _recording


class Tensor:
    """n-dimensional float64 array plus an optional differentiation record."""

    __slots__ = ("data", "requires_grad", "grad", "_inputs", "_vjp")

    def __init__(self, data, requires_grad: bool = False, _check: bool = True):
        arr = np.asarray(data, dtype=np.float64)
        if _check and not np.all(np.isfinite(arr)):
            raise NonFiniteError("tensor holds non-finite values")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Tensor | None = None
        self._inputs: tuple[Tensor, ...] = ()
        self._vjp = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, _check=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, create_graph: bool = False) -> None:
        backward(self, create_graph=create_graph)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def constant(data) -> Tensor:
    """Leaf tensor that never takes gradients (no finite check skipped)."""
    return Tensor(data, requires_grad=False)


def _node(out_data, inputs, vjp, check=False) -> Tensor:
    # op outputs skip the finite scan: leaves are validated on entry and
    # the training loop checks its losses, so a scan per node buys nothing
    rg = _recording and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=rg, _check=check)
    if rg:
        out._inputs = tuple(inputs)
        out._vjp = vjp
    return out


def _unbroadcast(g: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Sum g down to `shape`, inverting numpy broadcasting."""
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    if lead:
        g = sum_axes(g, tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = sum_axes(g, axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def vjp(g, needs):
        ga = _unbroadcast(g, a.shape) if needs[0] else None
        gb = _unbroadcast(g, b.shape) if needs[1] else None
        return ga, gb

    return _node(out, (a, b), vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def vjp(g, needs):
        ga = _unbroadcast(mul(g, b), a.shape) if needs[0] else None
        gb = _unbroadcast(mul(g, a), b.shape) if needs[1] else None
        return ga, gb

    return _node(out, (a, b), vjp)


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)

    def vjp(g, needs):
        return (scale(g, c),)

    return _node(x.data * c, (x,), vjp)


def add_const(x: Tensor, c) -> Tensor:
    c = np.asarray(c, dtype=np.float64)
    out = x.data + c
    if out.shape != x.shape:
        raise ShapeError("add_const may not broadcast x up")

    def vjp(g, needs):
        return (g,)

    return _node(out, (x,), vjp)


def mul_const(x: Tensor, c) -> Tensor:
    c = np.asarray(c, dtype=np.float64)
    out = x.data * c
    if out.shape != x.shape:
        raise ShapeError("mul_const may not broadcast x up")

    def vjp(g, needs):
        return (mul_const(g, c),)

    return _node(out, (x,), vjp)


def pow_const(x: Tensor, p: float) -> Tensor:
    p = float(p)
    out = x.data ** p

    def vjp(g, needs):
        return (mul(g, scale(pow_const(x, p - 1.0), p)),)

    return _node(out, (x,), vjp)


def sqrt(x: Tensor) -> Tensor:
    return pow_const(x, 0.5)


def rsqrt(x: Tensor) -> Tensor:
    return pow_const(x, -0.5)


def square(x: Tensor) -> Tensor:
    return mul(x, x)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def vjp(g, needs):
        ga = matmul(g, transpose(b)) if needs[0] else None
        gb = matmul(transpose(a), g) if needs[1] else None
        return ga, gb

    return _node(out, (a, b), vjp)


def transpose(x: Tensor, axes: tuple[int, ...] | None = None) -> Tensor:
    if axes is None:
        axes = tuple(range(x.ndim))[::-1]
    inv = tuple(np.argsort(axes))

    def vjp(g, needs):
        return (transpose(g, inv),)

    # a strided view is enough: downstream ops never mutate inputs and
    # BLAS consumes transposed operands natively
    return _node(x.data.transpose(axes), (x,), vjp, check=False)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def vjp(g, needs):
        return (reshape(g, x.shape),)

    return _node(x.data.reshape(shape), (x,), vjp, check=False)


def broadcast_to(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def vjp(g, needs):
        return (_unbroadcast(g, x.shape),)

    return _node(np.broadcast_to(x.data, shape), (x,), vjp, check=False)


def sum_axes(x: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    if axes is not None:
        axes = tuple(sorted(a % x.ndim for a in axes))
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def vjp(g, needs):
        if axes is None:
            return (broadcast_to(reshape(g, (1,) * x.ndim), x.shape),)
        if not keepdims:
            kshape = tuple(1 if i in axes else n for i, n in enumerate(x.shape))
            g = reshape(g, kshape)
        return (broadcast_to(g, x.shape),)

    return _node(out, (x,), vjp)


def tsum(x: Tensor) -> Tensor:
    return sum_axes(x, None)


def mean(x: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    if axes is None:
        n = x.size
    else:
        n = int(np.prod([x.shape[a % x.ndim] for a in axes]))
    return scale(sum_axes(x, axes, keepdims), 1.0 / n)


def l2_norm(x: Tensor, axes=None) -> Tensor:
    return sqrt(sum_axes(square(x), axes))


# ---------------------------------------------------------------------------
# nonlinearities


def leaky_relu(x: Tensor, alpha: float = 0.2) -> Tensor:
    mask = np.where(x.data > 0, 1.0, float(alpha))
    out = x.data * mask

    def vjp(g, needs):
        return (mul_const(g, mask),)

    return _node(out, (x,), vjp)


def tanh(x: Tensor) -> Tensor:
    out = _node(np.tanh(x.data), (x,), None)

    def vjp(g, needs):
        return (mul(g, add_const(scale(square(out), -1.0), 1.0)),)

    out._vjp = vjp if out.requires_grad else None
    return out


def sigmoid(x: Tensor) -> Tensor:
    out_data = np.empty_like(x.data)
    pos = x.data >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    e = np.exp(x.data[~pos])
    out_data[~pos] = e / (1.0 + e)
    out = _node(out_data, (x,), None)

    def vjp(g, needs):
        return (mul(g, mul(out, add_const(scale(out, -1.0), 1.0))),)

    out._vjp = vjp if out.requires_grad else None
    return out


def softplus(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0) + np.log1p(np.exp(-np.abs(x.data)))

    def vjp(g, needs):
        return (mul(g, sigmoid(x)),)

    return _node(out, (x,), vjp)


# ---------------------------------------------------------------------------
# shape/movement ops (NHWC images)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    axis = axis % tensors[0].ndim
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    def vjp(g, needs):
        return tuple(
            slice_axis(g, axis, int(offsets[i]), sizes[i]) if needs[i] else None
            for i in range(len(tensors))
        )

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tensors, vjp, check=False)


def slice_axis(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    axis = axis % x.ndim
    idx = tuple(
        slice(start, start + length) if i == axis else slice(None) for i in range(x.ndim)
    )

    def vjp(g, needs):
        return (embed_axis(g, axis, start, x.shape[axis]),)

    return _node(x.data[idx], (x,), vjp, check=False)


def embed_axis(x: Tensor, axis: int, start: int, total: int) -> Tensor:
    axis = axis % x.ndim
    shape = list(x.shape)
    length = shape[axis]
    shape[axis] = total
    out = np.zeros(shape, dtype=np.float64)
    idx = tuple(
        slice(start, start + length) if i == axis else slice(None) for i in range(x.ndim)
    )
    out[idx] = x.data

    def vjp(g, needs):
        return (slice_axis(g, axis, start, length),)

    return _node(out, (x,), vjp, check=False)


def pad2d(x: Tensor, p: int) -> Tensor:
    if x.ndim != 4:
        raise ShapeError("pad2d expects NHWC")
    out = np.zeros(
        (x.shape[0], x.shape[1] + 2 * p, x.shape[2] + 2 * p, x.shape[3]), dtype=np.float64
    )
    out[:, p : p + x.shape[1], p : p + x.shape[2], :] = x.data

    def vjp(g, needs):
        return (crop2d(g, p),)

    return _node(out, (x,), vjp, check=False)


def crop2d(x: Tensor, p: int) -> Tensor:
    def vjp(g, needs):
        return (pad2d(g, p),)

    return _node(x.data[:, p:-p, p:-p, :], (x,), vjp, check=False)


def im2col(xp: Tensor, k: int, out_h: int, out_w: int) -> Tensor:
    """Gather k*k patches of padded NHWC input into rows (N*oh*ow, k*k*C)."""
    n, _, _, c = xp.shape
    cols = np.empty((n, out_h, out_w, k, k, c), dtype=np.float64)
    for ky in range(k):
        for kx in range(k):
            cols[:, :, :, ky, kx, :] = xp.data[:, ky : ky + out_h, kx : kx + out_w, :]

    def vjp(g, needs):
        return (col2im(g, xp.shape, k, out_h, out_w),)

    return _node(cols.reshape(n * out_h * out_w, k * k * c), (xp,), vjp, check=False)


def col2im(cols: Tensor, xp_shape, k: int, out_h: int, out_w: int) -> Tensor:
    """Adjoint of im2col: scatter-add patch rows back onto the padded image."""
    n, _, _, c = xp_shape
    g = cols.data.reshape(n, out_h, out_w, k, k, c)
    out = np.zeros(xp_shape, dtype=np.float64)
    for ky in range(k):
        for kx in range(k):
            out[:, ky : ky + out_h, kx : kx + out_w, :] += g[:, :, :, ky, kx, :]

    def vjp(gg, needs):
        return (im2col(gg, k, out_h, out_w),)

    return _node(out, (cols,), vjp, check=False)


def conv2d(x: Tensor, w: Tensor) -> Tensor:
    """2-D convolution, stride 1, zero padding preserving spatial size.

    x: (N, H, W, Cin); w: (kh, kw, Cin, Cout) with kh == kw odd.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError("conv2d expects NHWC input and (k,k,Cin,Cout) weights")
    k = w.shape[0]
    if w.shape[1] != k or k % 2 != 1:
        raise ShapeError("conv2d kernel must be square with odd size")
    if x.shape[3] != w.shape[2]:
        raise ShapeError(f"conv2d channels {x.shape[3]} vs weight {w.shape[2]}")
    n, h, wd, _ = x.shape
    cout = w.shape[3]
    w2 = reshape(w, (k * k * w.shape[2], cout))
    if k == 1:
        y = matmul(reshape(x, (n * h * wd, x.shape[3])), w2)
    else:
        cols = im2col(pad2d(x, k // 2), k, h, wd)
        y = matmul(cols, w2)
    return reshape(y, (n, h, wd, cout))


def upsample2x_nearest(x: Tensor) -> Tensor:
    n, h, w, c = x.shape
    out = np.broadcast_to(
        x.data[:, :, None, :, None, :], (n, h, 2, w, 2, c)
    ).reshape(n, 2 * h, 2 * w, c)

    def vjp(g, needs):
        return (_down2sum(g),)

    return _node(np.ascontiguousarray(out), (x,), vjp, check=False)


def _down2sum(x: Tensor) -> Tensor:
    d = x.data
    # pairwise order keeps down(up(x)) exact in floating point
    out = (d[:, 0::2, 0::2, :] + d[:, 0::2, 1::2, :]) + (
        d[:, 1::2, 0::2, :] + d[:, 1::2, 1::2, :]
    )

    def vjp(g, needs):
        return (upsample2x_nearest(g),)

    return _node(out, (x,), vjp)


def downsample2x_mean(x: Tensor) -> Tensor:
    if x.shape[1] % 2 or x.shape[2] % 2:
        raise ShapeError("downsample2x_mean needs even spatial dims")
    return scale(_down2sum(x), 0.25)


def flip_w(x: Tensor) -> Tensor:
    """Mirror the W axis of an NHWC tensor."""

    def vjp(g, needs):
        return (flip_w(g),)

    return _node(x.data[:, :, ::-1, :], (x,), vjp, check=False)


def rot90k(x: Tensor, k: int) -> Tensor:
    """Rotate NHWC images by k quarter turns counter-clockwise."""
    k = k % 4

    def vjp(g, needs):
        return (rot90k(g, 4 - k),)

    return _node(np.rot90(x.data, k, axes=(1, 2)), (x,), vjp, check=False)


def translate2d(x: Tensor, dys, dxs) -> Tensor:
    """Integer-shift each image by (dys[n], dxs[n]) with zero fill."""
    dys = np.asarray(dys, dtype=np.int64)
    dxs = np.asarray(dxs, dtype=np.int64)
    n, h, w, _ = x.shape
    out = np.zeros_like(x.data)
    for i in range(n):
        dy, dx = int(dys[i]), int(dxs[i])
        ys = slice(max(dy, 0), min(h + dy, h))
        xs = slice(max(dx, 0), min(w + dx, w))
        ys_src = slice(max(-dy, 0), min(h - dy, h))
        xs_src = slice(max(-dx, 0), min(w - dx, w))
        out[i, ys, xs, :] = x.data[i, ys_src, xs_src, :]

    def vjp(g, needs):
        return (translate2d(g, -dys, -dxs),)

    return _node(out, (x,), vjp, check=False)


def bias_add(x: Tensor, b: Tensor) -> Tensor:
    """Add a per-channel bias along the last axis."""
    if b.ndim != 1 or b.shape[0] != x.shape[-1]:
        raise ShapeError("bias length must match last axis")
    return add(x, b)


# ---------------------------------------------------------------------------
# backward engine


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for inp in node._inputs:
            if id(inp) not in seen and inp.requires_grad:
                stack.append((inp, False))
    return order


def _run_backward(root, seed, create_graph, write_grad, sources):
    topo = _toposort(root)
    src_ids = {id(s): i for i, s in enumerate(sources or ())}
    # Effective requires-grad, honoring flags toggled after recording:
    # an interior node matters only if some leaf below it still wants a
    # gradient. Dead branches (e.g. a frozen sub-network's weights) are
    # skipped entirely instead of computing gradients nobody reads.
    eff: dict[int, bool] = {}
    for node in topo:  # leaves precede consumers
        if node._vjp is None:
            eff[id(node)] = node.requires_grad or id(node) in src_ids
        else:
            eff[id(node)] = id(node) in src_ids or any(
                eff.get(id(t), False) for t in node._inputs
            )
    grads: dict[int, Tensor] = {id(root): seed}
    collected: list[Tensor | None] = [None] * len(src_ids)

    def step():
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None or not eff.get(id(node), False):
                continue
            if write_grad and node.requires_grad and node._vjp is None:
                node.grad = g if node.grad is None else add(node.grad, g)
            if id(node) in src_ids:
                collected[src_ids[id(node)]] = g
            if node._vjp is None:
                continue
            needs = tuple(eff.get(id(t), False) for t in node._inputs)
            for inp, ig in zip(node._inputs, node._vjp(g, needs)):
                if ig is None:
                    continue
                prev = grads.get(id(inp))
                grads[id(inp)] = ig if prev is None else add(prev, ig)

    if create_graph:
        step()
    else:
        with no_record():
            step()
    return collected


def backward(root: Tensor, create_graph: bool = False) -> None:
    """Accumulate d(root)/d(ancestor) into .grad of every recorded ancestor.

    root must be a scalar (size 1). Gradients add across calls; zero them
    explicitly between steps.
    """
    if root.size != 1:
        raise ShapeError("backward root must be a scalar")
    if not root.requires_grad:
        raise ValueError("root does not require grad (nothing recorded)")
    seed = Tensor(np.ones(root.shape), _check=False)
    _run_backward(root, seed, create_graph, write_grad=True, sources=None)


def grad_of(root: Tensor, sources, create_graph: bool = False) -> list[Tensor]:
    """Gradients of scalar root w.r.t. `sources`, without touching .grad."""
    if root.size != 1:
        raise ShapeError("grad_of root must be a scalar")
    sources = list(sources)
    seed = Tensor(np.ones(root.shape), _check=False)
    got = _run_backward(root, seed, create_graph, write_grad=False, sources=sources)
    out = []
    for s, g in zip(sources, got):
        out.append(g if g is not None else Tensor(np.zeros(s.shape), _check=False))
    return out


# ---------------------------------------------------------------------------
# name-based dispatch (uniform entry point over the core op set)

_OP_TABLE = {
    "add": add,
    "mul": mul,
    "matmul": matmul,
    "conv2d": conv2d,
    "upsample2x_nearest": upsample2x_nearest,
    "downsample2x_mean": downsample2x_mean,
    "leaky_relu": leaky_relu,
    "bias_add": bias_add,
    "sum": tsum,
    "mean": mean,
    "scale": scale,
    "concat": concat,
    "slice": slice_axis,
    "l2_norm": l2_norm,
}


def tensor_op_suite(inputs, op: str, **kwargs) -> Tensor:
    """Apply one of the named core ops to `inputs` (a sequence of Tensors)."""
    try:
        fn = _OP_TABLE[op]
    except KeyError:
        raise ValueError(f"unknown op {op!r}") from None
    if op == "concat":
        return fn(list(inputs), **kwargs)
    return fn(*inputs, **kwargs)
