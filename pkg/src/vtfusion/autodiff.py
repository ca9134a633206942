"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tensor` wraps a numpy array plus an optional gradient buffer.
Operations build a dynamic graph (define-by-run); ``backward`` on a scalar
result walks the graph once in reverse topological order and accumulates
gradients into every participating tensor with ``requires_grad=True``.
Gradients accumulate across repeated backward calls; callers reset them
between optimizer steps via :func:`zero_grads` or ``Tensor.zero_grad``.

All values are float64. Tensors that do not require grad never receive a
grad buffer, and operations whose inputs are all grad-free record nothing.
"""

from __future__ import annotations

import struct
from collections import OrderedDict

import numpy as np

from .exceptions import ContractError, FormatError, ShapeError, VersionError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def backward(self):
        backward(self)

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _make(data, parents, backward_fn):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def backward(loss):
    """Populate grads of every requires-grad tensor reachable from ``loss``.

    ``loss`` must hold exactly one element. Repeated calls accumulate.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward requires a scalar, got shape {loss.data.shape}")
    if loss.grad is None:
        loss.grad = np.zeros_like(loss.data)
    loss.grad += np.ones_like(loss.data)
    if not loss.requires_grad:
        return

    # Iterative post-order over the recorded graph (deep per-sample graphs
    # would blow the recursion limit).
    order = []
    seen = {id(loss)}
    stack = [(loss, iter(loss._parents))]
    while stack:
        node, it = stack[-1]
        advanced = False
        for parent in it:
            if id(parent) not in seen and parent.requires_grad:
                seen.add(id(parent))
                stack.append((parent, iter(parent._parents)))
                advanced = True
                break
        if not advanced:
            order.append(node)
            stack.pop()

    for node in reversed(order):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)


def zero_grads(tensors):
    for t in tensors:
        t.grad = None


# -- elementwise arithmetic ---------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), bwd)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data - b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), bwd)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), bwd)


def neg(a):
    a = as_tensor(a)

    def bwd(g):
        _accumulate(a, -g)

    return _make(-a.data, (a,), bwd)


def relu(a):
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def bwd(g):
        _accumulate(a, g * (a.data > 0.0))

    return _make(data, (a,), bwd)


def sigmoid(a):
    a = as_tensor(a)
    x = a.data
    data = np.empty_like(x)
    pos = x >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    data[~pos] = ex / (1.0 + ex)

    def bwd(g):
        _accumulate(a, g * data * (1.0 - data))

    return _make(data, (a,), bwd)


def log(a):
    a = as_tensor(a)
    if np.any(a.data <= 0.0):
        raise ContractError("log requires strictly positive input; clamp first")

    def bwd(g):
        _accumulate(a, g / a.data)

    return _make(np.log(a.data), (a,), bwd)


def exp(a):
    a = as_tensor(a)
    data = np.exp(a.data)

    def bwd(g):
        _accumulate(a, g * data)

    return _make(data, (a,), bwd)


def sqrt(a):
    a = as_tensor(a)
    data = np.sqrt(a.data)

    def bwd(g):
        # clamp keeps the zero-distance corner finite; inactive above 1e-150
        _accumulate(a, g * 0.5 / np.maximum(data, 1e-150))

    return _make(data, (a,), bwd)


def pow_scalar(a, p):
    """Elementwise a**p for a scalar exponent p."""
    a = as_tensor(a)
    p = float(p)
    data = a.data ** p

    def bwd(g):
        _accumulate(a, g * p * a.data ** (p - 1.0))

    return _make(data, (a,), bwd)


def exp_base(base, a):
    """Elementwise base**a for a positive scalar base (e.g. 0.5**loss)."""
    a = as_tensor(a)
    base = float(base)
    if base <= 0.0:
        raise ContractError(f"exp_base requires base > 0, got {base}")
    data = base ** a.data
    ln_base = np.log(base)

    def bwd(g):
        _accumulate(a, g * data * ln_base)

    return _make(data, (a,), bwd)


def clamp_min(a, lo):
    a = as_tensor(a)
    lo = float(lo)
    data = np.maximum(a.data, lo)

    def bwd(g):
        _accumulate(a, g * (a.data > lo))

    return _make(data, (a,), bwd)


# -- linear algebra ------------------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.data.shape} x {b.data.shape}")
    data = a.data @ b.data

    def bwd(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _make(data, (a, b), bwd)


# -- shape manipulation --------------------------------------------------

def reshape(a, shape):
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def bwd(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _make(data, (a,), bwd)


def transpose(a, axes=None):
    a = as_tensor(a)
    data = np.transpose(a.data, axes)
    if axes is None:
        inv = None
    else:
        inv = np.argsort(axes)

    def bwd(g):
        _accumulate(a, np.transpose(g, inv))

    return _make(data, (a,), bwd)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of an empty sequence")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(idx)])

    return _make(data, tuple(tensors), bwd)


def gather_rows(a, idx):
    """Select rows of ``a`` by integer index; duplicates accumulate on backward."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)
    data = a.data[idx]

    def bwd(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            np.add.at(buf, idx, g)
            _accumulate(a, buf)

    return _make(data, (a,), bwd)


# -- reductions -----------------------------------------------------------

def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape).copy())

    return _make(data, (a,), bwd)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if a.data.size == 0:
        raise ShapeError("mean of an empty tensor")
    n = a.data.size if axis is None else a.data.shape[axis]
    if n == 0:
        raise ShapeError("mean over an empty axis")
    data = a.data.mean(axis=axis, keepdims=keepdims)
    inv_n = 1.0 / n

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g * inv_n, a.data.shape).copy())

    return _make(data, (a,), bwd)


def max_(a, axis=None, keepdims=False):
    """Max reduction; gradient routes to the first-occurring maximum."""
    a = as_tensor(a)
    if a.data.size == 0:
        raise ShapeError("max of an empty tensor")
    data = a.data.max(axis=axis, keepdims=keepdims)
    arg = a.data.argmax(axis=axis)

    def bwd(g):
        buf = np.zeros_like(a.data)
        if axis is None:
            buf.flat[arg] = np.sum(g)
        else:
            ge = g if keepdims else np.expand_dims(g, axis)
            np.put_along_axis(buf, np.expand_dims(arg, axis), ge, axis)
        _accumulate(a, buf)

    return _make(data, (a,), bwd)


# -- image and pose kernels -----------------------------------------------

def conv2d(x, kernels, stride=1, padding=0):
    """Cross-correlate a (c_in, h, w) image with (c_out, c_in, kh, kw) kernels."""
    x, kernels = as_tensor(x), as_tensor(kernels)
    if x.data.ndim != 3 or kernels.data.ndim != 4:
        raise ShapeError(
            f"conv2d expects (c_in,h,w) and (c_out,c_in,kh,kw), got {x.data.shape} and {kernels.data.shape}"
        )
    c_in, h, w = x.data.shape
    c_out, kc, kh, kw = kernels.data.shape
    if kc != c_in:
        raise ShapeError(f"conv2d channel mismatch: input has {c_in}, kernels expect {kc}")
    s, p = int(stride), int(padding)
    ho = (h + 2 * p - kh) // s + 1
    wo = (w + 2 * p - kw) // s + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d output would be empty for input {x.data.shape}, kernel {kh}x{kw}")

    xp = np.pad(x.data, ((0, 0), (p, p), (p, p))) if p else x.data
    out = np.zeros((c_out, ho, wo))
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, i : i + s * ho : s, j : j + s * wo : s]
            out += np.tensordot(kernels.data[:, :, i, j], patch, axes=([1], [0]))

    def bwd(g):
        if kernels.requires_grad:
            dk = np.zeros_like(kernels.data)
            for i in range(kh):
                for j in range(kw):
                    patch = xp[:, i : i + s * ho : s, j : j + s * wo : s]
                    dk[:, :, i, j] = np.tensordot(g, patch, axes=([1, 2], [1, 2]))
            _accumulate(kernels, dk)
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, i : i + s * ho : s, j : j + s * wo : s] += np.tensordot(
                        kernels.data[:, :, i, j].T, g, axes=([1], [0])
                    )
            _accumulate(x, dxp[:, p : p + h, p : p + w] if p else dxp)

    return _make(out, (x, kernels), bwd)


def row_normalize(a):
    """Scale each row of (N, D) to unit Euclidean length."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"row_normalize expects 2-D input, got {a.data.shape}")
    # the epsilon is below float64 resolution for any realistic row norm
    r = np.sqrt((a.data * a.data).sum(axis=1, keepdims=True) + 1e-300)
    data = a.data / r

    def bwd(g):
        dot = (g * data).sum(axis=1, keepdims=True)
        _accumulate(a, (g - dot * data) / r)

    return _make(data, (a,), bwd)


def quat_rotate(q, points):
    """Rotate constant points (M, 3) by unit quaternions (N, 4) -> (N, M, 3).

    Quaternion rows are (w, x, y, z) and must already be unit length
    (compose with :func:`row_normalize`).
    """
    q = as_tensor(q)
    if q.data.ndim != 2 or q.data.shape[1] != 4:
        raise ShapeError(f"quat_rotate expects (N,4) quaternions, got {q.data.shape}")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ShapeError(f"quat_rotate expects (M,3) points, got {pts.shape}")

    w = q.data[:, :1]  # (N,1)
    v = q.data[:, 1:]  # (N,3)
    x = pts[None, :, :]  # (1,M,3)
    t = 2.0 * np.cross(v[:, None, :], x)  # (N,M,3)
    data = x + w[:, :, None] * t + np.cross(v[:, None, :], t)

    def bwd(g):
        dw = np.einsum("nmk,nmk->n", g, t)
        gv = 2.0 * w[:, :, None] * np.cross(x, g)
        gv += 2.0 * np.cross(x, np.cross(g, np.broadcast_to(v[:, None, :], g.shape)))
        gv += np.cross(t, g)
        dq = np.empty_like(q.data)
        dq[:, 0] = dw
        dq[:, 1:] = gv.sum(axis=1)
        _accumulate(q, dq)

    return _make(data, (q,), bwd)


# -- parameter checkpoints -------------------------------------------------

CHECKPOINT_MAGIC = b"VTF1"


def save_checkpoint(path, params):
    """Write named parameters as a flat little-endian binary file.

    Layout: magic ``VTF1``; then per parameter: u32 name byte length, UTF-8
    name, u32 rank, u32 dims, raw float64 values. Round-trips bit exactly.
    """
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        for name, value in params.items():
            arr = value.data if isinstance(value, Tensor) else np.asarray(value, dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f8", copy=False).tobytes())


def load_checkpoint(path):
    """Read a checkpoint written by :func:`save_checkpoint`.

    Returns an ordered name -> float64 ndarray mapping. Truncated or
    malformed files raise :class:`FormatError` with the failing offset.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:3] == CHECKPOINT_MAGIC[:3] and blob[:4] != CHECKPOINT_MAGIC:
        raise VersionError(f"unsupported checkpoint version {blob[:4]!r}", offset=0)
    if blob[:4] != CHECKPOINT_MAGIC:
        raise FormatError("missing checkpoint magic", offset=0)

    params = OrderedDict()
    pos = 4
    total = len(blob)

    def take(n, what):
        nonlocal pos
        if pos + n > total:
            raise FormatError(f"truncated checkpoint while reading {what}", offset=pos)
        chunk = blob[pos : pos + n]
        pos += n
        return chunk

    while pos < total:
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = take(name_len, "name").decode("utf-8")
        (rank,) = struct.unpack("<I", take(4, "rank"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        count = int(np.prod(dims)) if rank else 1
        raw = take(8 * count, f"values of {name!r}")
        params[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).astype(np.float64)
    return params


# -- finite-difference verification ----------------------------------------

def max_relative_error(analytic, numeric):
    """Worst elementwise |a-b| / max(|a|, |b|, 1)."""
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def numeric_gradient(f, x, step=1e-5):
    """Central-difference gradient of scalar-valued ``f()`` w.r.t. array ``x``.

    ``f`` must recompute its value from the current contents of ``x``;
    the array is perturbed in place and restored.
    """
    x = np.asarray(x)
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = f()
        flat[i] = orig - step
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def check_gradients(build_loss, params, step=1e-5):
    """Compare autodiff grads to central differences for named parameters.

    ``build_loss`` runs a fresh forward pass and returns a scalar Tensor;
    ``params`` maps names to the leaf tensors it reads. Returns a name ->
    max relative error mapping.
    """
    for t in params.values():
        t.zero_grad()
    loss = build_loss()
    backward(loss)
    analytic = {k: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)) for k, t in params.items()}

    def value():
        return build_loss().item()

    errors = {}
    for name, t in params.items():
        numeric = numeric_gradient(value, t.data, step=step)
        errors[name] = max_relative_error(analytic[name], numeric)
    return errors
