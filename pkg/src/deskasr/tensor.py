"""Dense tensors with reverse-mode automatic differentiation on numpy arrays.

Every operation builds the graph eagerly: the forward value is computed at
construction time and a backward closure is attached, micrograd-style but
shaped for batched array math (broadcasting, matmul, conv2d, pooling,
embedding lookup, log-softmax). Calling ``backward()`` on a scalar result
walks the graph once in reverse topological order and accumulates ``grad``
on every reachable tensor with ``requires_grad``.

Numerics run in a configurable default dtype (float64 unless changed);
finite-difference checking via :func:`gradcheck` assumes float64.
"""

from __future__ import annotations

import numpy as np

_DEFAULT_DTYPE = np.float64

# Additive mask value for "never attend here"; large enough that exp()
# underflows to exactly 0 after max-subtraction, finite so 0*mask stays 0.
NEG_INF = -1e30

_grad_enabled = True


def set_default_dtype(dtype):
    """Set the dtype new tensors are created with ("float64" or "float32")."""
    global _DEFAULT_DTYPE
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dt.type


def default_dtype():
    return _DEFAULT_DTYPE


class no_grad:
    """Context manager disabling graph construction (inference fast path)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def grad_enabled():
    return _grad_enabled


class ShapeError(ValueError):
    """Inconsistent operand shapes; message names the offending op."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_prev", "_backward")

    def __init__(self, data, requires_grad=False, name=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._prev = ()
        self._backward = None

    # -- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(()))

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data.copy())

    def __repr__(self):
        req = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{req})"

    # -- gradient plumbing ---------------------------------------------
    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Reverse-mode sweep from a scalar loss; populates ``grad`` fields."""
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar loss, got shape {self.data.shape}"
            )
        # Iterative topological order (graphs get deeper than the default
        # recursion limit for long sequences).
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._prev:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar --------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor):
            raise TypeError("tensor/tensor division not supported; use mul")
        return mul(self, 1.0 / scalar)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return narrow(self, key)

    def reshape(self, *shape):
        return reshape(self, *shape)

    def transpose(self, *axes):
        return transpose(self, *axes)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    """Wrap an op result; attaches the closure only when grads can flow."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._prev = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- arithmetic ----------------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs ndim>=2 operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            ga = g @ b.data.swapaxes(-1, -2)
            a._accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = a.data.swapaxes(-1, -2) @ g
            b._accumulate(_unbroadcast(gb, b.data.shape))

    return _make(data, (a, b), backward)


# -- elementwise nonlinearities -------------------------------------------


def tanh(x):
    x = as_tensor(x)
    data = np.tanh(x.data)

    def backward(g):
        x._accumulate(g * (1.0 - data * data))

    return _make(data, (x,), backward)


def sigmoid(x):
    x = as_tensor(x)
    data = np.empty_like(x.data)
    pos = x.data >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    data[~pos] = ex / (1.0 + ex)

    def backward(g):
        x._accumulate(g * data * (1.0 - data))

    return _make(data, (x,), backward)


def relu(x):
    x = as_tensor(x)
    data = np.maximum(x.data, 0.0)

    def backward(g):
        x._accumulate(g * (x.data > 0))

    return _make(data, (x,), backward)


def exp(x):
    x = as_tensor(x)
    data = np.exp(x.data)

    def backward(g):
        x._accumulate(g * data)

    return _make(data, (x,), backward)


def log(x):
    x = as_tensor(x)
    data = np.log(x.data)

    def backward(g):
        x._accumulate(g / x.data)

    return _make(data, (x,), backward)


# -- softmax family --------------------------------------------------------


def log_softmax(x, axis=-1):
    """Log-probabilities along ``axis``; max-shifted for stability."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse

    def backward(g):
        x._accumulate(g - np.exp(data) * g.sum(axis=axis, keepdims=True))

    return _make(data, (x,), backward)


def softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * data).sum(axis=axis, keepdims=True)
        x._accumulate(data * (g - inner))

    return _make(data, (x,), backward)


# -- shape ops ---------------------------------------------------------------


def reshape(x, *shape):
    x = as_tensor(x)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    data = x.data.reshape(shape)
    src_shape = x.data.shape

    def backward(g):
        x._accumulate(g.reshape(src_shape))

    return _make(data, (x,), backward)


def transpose(x, *axes):
    x = as_tensor(x)
    if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
        axes = tuple(axes[0])
    if not axes:
        axes = tuple(reversed(range(x.ndim)))
    data = x.data.transpose(axes)
    inverse = np.argsort(axes)

    def backward(g):
        x._accumulate(g.transpose(inverse))

    return _make(data, (x,), backward)


def narrow(x, key):
    """Basic slicing/int indexing (each output element maps to one input)."""
    x = as_tensor(x)
    data = x.data[key]

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[key] += g
        x._accumulate(gx)

    return _make(data, (x,), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    base = list(tensors[0].shape)
    for t in tensors[1:]:
        other = list(t.shape)
        if len(other) != len(base) or any(
            i != axis and other[i] != base[i] for i in range(len(base))
        ):
            raise ShapeError(
                f"concat shapes incompatible along axis {axis}: "
                f"{[t.shape for t in tensors]}"
            )
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    return _make(data, tuple(tensors), backward)


def reduce_sum(x, axis=None, keepdims=False):
    x = as_tensor(x)
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            x._accumulate(np.broadcast_to(g, x.data.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.data.shape).copy())

    return _make(data, (x,), backward)


def reduce_mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    if axis is None:
        n = x.data.size
    elif isinstance(axis, tuple):
        n = int(np.prod([x.data.shape[a] for a in axis]))
    else:
        n = x.data.shape[axis]
    return mul(reduce_sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


# -- lookup / gather ----------------------------------------------------------


def embedding(weight, idx):
    """Row lookup ``weight[idx]``; idx is an integer array."""
    weight = as_tensor(weight)
    idx = np.asarray(idx)
    if idx.size and (idx.min() < 0 or idx.max() >= weight.shape[0]):
        raise IndexError(
            f"embedding index out of range [0, {weight.shape[0]}): "
            f"{int(idx.min())}..{int(idx.max())}"
        )
    data = weight.data[idx]

    def backward(g):
        gw = np.zeros_like(weight.data)
        np.add.at(gw, idx, g)
        weight._accumulate(gw)

    return _make(data, (weight,), backward)


def take_last(x, idx):
    """Pick one entry along the last axis per leading position."""
    x = as_tensor(x)
    idx = np.asarray(idx)
    if idx.shape != x.shape[:-1]:
        raise ShapeError(f"take_last index shape {idx.shape} vs input {x.shape}")
    data = np.take_along_axis(x.data, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        gx = np.zeros_like(x.data)
        flat = gx.reshape(-1, gx.shape[-1])
        np.add.at(flat, (np.arange(flat.shape[0]), idx.reshape(-1)), g.reshape(-1))
        x._accumulate(gx)

    return _make(data, (x,), backward)


# -- convolution / pooling -----------------------------------------------------


def conv2d(x, weight, bias=None, pad=(0, 0)):
    """2-D convolution, stride 1, zero padding ``pad=(ph, pw)``.

    x: (B, C, H, W), weight: (O, C, kh, kw), bias: (O,) or None.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if bias is not None:
        bias = as_tensor(bias)
    B, C, H, W = x.shape
    O, C2, kh, kw = weight.shape
    if C != C2:
        raise ShapeError(f"conv2d channels differ: input {x.shape} kernel {weight.shape}")
    ph, pw = pad
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    Ho, Wo = H + 2 * ph - kh + 1, W + 2 * pw - kw + 1
    if Ho <= 0 or Wo <= 0:
        raise ShapeError(f"conv2d output empty for input {x.shape} kernel {weight.shape}")
    # im2col: (B, Ho*Wo, C*kh*kw)
    s = xp.strides
    cols = np.lib.stride_tricks.as_strided(
        xp,
        shape=(B, Ho, Wo, C, kh, kw),
        strides=(s[0], s[2], s[3], s[1], s[2], s[3]),
    ).reshape(B, Ho * Wo, C * kh * kw)
    cols = np.ascontiguousarray(cols)
    wmat = weight.data.reshape(O, -1)
    out = cols @ wmat.T  # (B, Ho*Wo, O)
    if bias is not None:
        out = out + bias.data
    data = out.transpose(0, 2, 1).reshape(B, O, Ho, Wo)
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gout = g.reshape(B, O, Ho * Wo).transpose(0, 2, 1)  # (B, Ho*Wo, O)
        if bias is not None and bias.requires_grad:
            bias._accumulate(gout.sum(axis=(0, 1)))
        if weight.requires_grad:
            gw = np.einsum("bno,bnk->ok", gout, cols)
            weight._accumulate(gw.reshape(weight.data.shape))
        if x.requires_grad:
            gcols = gout @ wmat  # (B, Ho*Wo, C*kh*kw)
            gcols = gcols.reshape(B, Ho, Wo, C, kh, kw)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i : i + Ho, j : j + Wo] += gcols[:, :, :, :, i, j].transpose(
                        0, 3, 1, 2
                    )
            if ph or pw:
                gxp = gxp[:, :, ph : ph + H, pw : pw + W]
            x._accumulate(gxp)

    return _make(data, parents, backward)


def max_pool2x2(x):
    """2x2 max pooling, stride 2, ceil mode (odd edges padded with -inf)."""
    x = as_tensor(x)
    B, C, H, W = x.shape
    Ho, Wo = (H + 1) // 2, (W + 1) // 2
    xp = x.data
    if H % 2 or W % 2:
        xp = np.pad(
            xp,
            ((0, 0), (0, 0), (0, Ho * 2 - H), (0, Wo * 2 - W)),
            constant_values=-np.inf,
        )
    windows = xp.reshape(B, C, Ho, 2, Wo, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
        B, C, Ho, Wo, 4
    )
    arg = windows.argmax(axis=-1)  # first max wins ties: deterministic
    data = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gw = np.zeros_like(windows)
        np.put_along_axis(gw, arg[..., None], g[..., None], axis=-1)
        gxp = gw.reshape(B, C, Ho, Wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
            B, C, Ho * 2, Wo * 2
        )
        x._accumulate(gxp[:, :, :H, :W])

    return _make(data, (x,), backward)


def dropout(x, p, rng, training):
    """Inverted dropout with a mask drawn from ``rng``; identity in eval."""
    if not training or p <= 0.0:
        return as_tensor(x)
    x = as_tensor(x)
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return mul(x, Tensor(mask))


# -- finite differences ---------------------------------------------------------


class GradCheckError(RuntimeError):
    """Non-finite value met during finite-difference checking."""


def gradcheck(func, params, step=1e-5):
    """Max relative error between analytic and central-difference gradients.

    ``func`` evaluates the scalar loss from the current parameter values
    (deterministic: dropout disabled); ``params`` maps names to tensors.
    Relative error per entry is |a - n| / max(|a|, |n|, 1e-8).
    """
    if _DEFAULT_DTYPE is not np.float64:
        raise RuntimeError("gradcheck requires float64 default dtype")
    for p in params.values():
        p.zero_grad()
    out = func()
    if out.size != 1:
        raise ValueError("gradcheck target must be scalar")
    out.backward()
    analytic = {}
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise GradCheckError(f"non-finite analytic gradient at {name}")
        analytic[name] = g.copy()

    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        ga = analytic[name].reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            fp = func().item()
            flat[i] = keep - step
            fm = func().item()
            flat[i] = keep
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise GradCheckError(f"non-finite loss perturbing {name}[{i}]")
            num = (fp - fm) / (2.0 * step)
            err = abs(ga[i] - num) / max(abs(ga[i]), abs(num), 1e-8)
            if err > worst:
                worst = err
    return worst
