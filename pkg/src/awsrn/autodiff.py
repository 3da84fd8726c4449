"""Dense 4-D tensors with taped reverse-mode differentiation.

Every value is a (batch, channels, height, width) array, row-major in
that axis order. Forward kernels are pure numpy and deterministic; an
operation is recorded only while a :class:`Tape` is active on the
current thread, so inference pays no bookkeeping cost. Gradients
accumulate into parameter buffers across backward calls until they are
explicitly zeroed.

Vector-shaped parameters (biases, weight-norm gains) live in the 4-D
container as (C, 1, 1, 1); scalars as (1, 1, 1, 1); convolution kernels
reinterpret the axes as (c_out, c_in, k, k).
"""

from __future__ import annotations

import threading
import weakref
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ShapeError

_FLOAT_DTYPES = (np.float32, np.float64)

_local = threading.local()


def _active_tape() -> "Tape | None":
    return getattr(_local, "tape", None)


class Tensor:
    """A rank-4 array plus an optional gradient buffer."""

    __slots__ = ("data", "grad", "is_param", "_tape")

    def __init__(self, data, dtype=None):
        arr = np.ascontiguousarray(data, dtype=dtype)
        if arr.ndim != 4:
            raise ShapeError(f"tensor must be 4-D (N, C, H, W), got shape {arr.shape}")
        if arr.dtype.type not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.is_param = False
        self._tape: "weakref.ref[Tape] | None" = None

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @classmethod
    def zeros(cls, shape, dtype=np.float32) -> "Tensor":
        return cls(np.zeros(shape, dtype=dtype))

    @classmethod
    def full(cls, shape, value, dtype=np.float32) -> "Tensor":
        return cls(np.full(shape, value, dtype=dtype))

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype})"


class Parameter:
    """A named leaf tensor. Gradients accumulate in ``value.grad``."""

    __slots__ = ("name", "value", "trainable")

    def __init__(self, name: str, data, trainable: bool = True, dtype=None):
        self.name = name
        self.value = data if isinstance(data, Tensor) else Tensor(data, dtype=dtype)
        self.value.is_param = True
        self.trainable = trainable

    @property
    def data(self) -> np.ndarray:
        return self.value.data

    @property
    def grad(self) -> np.ndarray | None:
        return self.value.grad

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.value.grad = None

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def _as_tensor(x) -> Tensor:
    return x.value if isinstance(x, Parameter) else x


def _check_dtypes(*tensors: Tensor) -> None:
    dtypes = {t.data.dtype for t in tensors}
    if len(dtypes) > 1:
        raise ValueError(f"mixed dtypes in one operation: {sorted(map(str, dtypes))}")


# One tape entry: the op output plus a closure mapping the output
# gradient to (input tensor, input gradient) pairs.
PullFn = Callable[[np.ndarray], Iterable[tuple[Tensor, np.ndarray]]]


class Tape:
    """Records operations on the current thread for reverse replay.

    One tape serves exactly one thread; nesting tapes is rejected.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, PullFn]] = []

    def __enter__(self) -> "Tape":
        if _active_tape() is not None:
            raise RuntimeError("a Tape is already active on this thread")
        _local.tape = self
        return self

    def __exit__(self, *exc) -> None:
        _local.tape = None

    def _record(self, out: Tensor, pull: PullFn) -> None:
        # Weak back-reference: records hold their output tensors, so a
        # strong edge here would cycle and big buffers would wait on gc.
        out._tape = weakref.ref(self)
        self._records.append((out, pull))

    def __len__(self) -> int:
        return len(self._records)

    def backward(self, root: Tensor) -> None:
        """Accumulate d(root)/d(param) into every reachable parameter.

        Repeated calls add up; callers zero parameter grads between
        steps. Intermediate gradients are transient to this call.
        """
        if root.shape != (1, 1, 1, 1):
            raise ShapeError(f"backward root must be scalar (1,1,1,1), got {root.shape}")
        if root._tape is None or root._tape() is not self:
            raise ValueError("backward root was not produced on this tape")

        table: dict[int, np.ndarray] = {id(root): np.ones((1, 1, 1, 1), dtype=root.data.dtype)}
        leaves: dict[int, Tensor] = {}
        # Record order is a topological order, so one reverse sweep sees
        # every consumer of a tensor before its producer.
        for out, pull in reversed(self._records):
            g_out = table.pop(id(out), None)
            if g_out is None:
                continue
            for t, g_in in pull(g_out):
                key = id(t)
                if key in table:
                    table[key] = table[key] + g_in
                else:
                    table[key] = g_in
                    if t.is_param:
                        leaves[key] = t
        for key, t in leaves.items():
            g = table[key]
            t.grad = g.copy() if t.grad is None else t.grad + g


def _record(out: Tensor, pull: PullFn) -> Tensor:
    tape = _active_tape()
    if tape is not None:
        tape._record(out, pull)
    return out


# ---------------------------------------------------------------------------
# forward kernels + gradients
# ---------------------------------------------------------------------------


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Unfold padded kxk neighborhoods: (N,C,H,W) -> (N, C*k*k, H*W)."""
    n, c, h, w = x.shape
    p = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    cols = np.empty((n, c, k, k, h, w), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i : i + h, j : j + w]
    return cols.reshape(n, c * k * k, h * w)


def _col2im(cols: np.ndarray, shape: tuple[int, int, int, int], k: int) -> np.ndarray:
    """Scatter-add of _im2col: (N, C*k*k, H*W) -> (N,C,H,W)."""
    n, c, h, w = shape
    p = (k - 1) // 2
    g = cols.reshape(n, c, k, k, h, w)
    out = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i : i + h, j : j + w] += g[:, :, i, j]
    return out[:, :, p : p + h, p : p + w]


def conv2d(x, weight, bias) -> Tensor:
    """Same-size 2-D cross-correlation with zero padding, stride 1.

    ``weight`` is (c_out, c_in, k, k) with odd k; ``bias`` is
    (c_out, 1, 1, 1) and is added per output channel.
    """
    xt, wt, bt = _as_tensor(x), _as_tensor(weight), _as_tensor(bias)
    _check_dtypes(xt, wt, bt)
    n, c, h, w = xt.shape
    c_out, c_in, kh, kw = wt.shape
    if kh != kw or kh % 2 == 0:
        raise ShapeError(f"kernel must be square with odd size, got weight shape {wt.shape}")
    if c_in != c:
        raise ShapeError(f"channel mismatch: input shape {xt.shape} vs weight shape {wt.shape}")
    if bt.shape != (c_out, 1, 1, 1):
        raise ShapeError(f"bias shape {bt.shape} does not match {c_out} output channels")

    cols = _im2col(xt.data, kh)  # (N, C*k*k, H*W)
    wmat = wt.data.reshape(c_out, c_in * kh * kw)
    y = np.matmul(wmat, cols).reshape(n, c_out, h, w)
    y += bt.data.reshape(1, c_out, 1, 1)
    out = Tensor(y)

    if _active_tape() is not None:

        def pull(g: np.ndarray):
            gmat = g.reshape(n, c_out, h * w)
            g_b = g.sum(axis=(0, 2, 3)).reshape(c_out, 1, 1, 1)
            g_w = np.matmul(gmat, cols.transpose(0, 2, 1)).sum(axis=0)
            g_cols = np.matmul(wmat.T, gmat)
            g_x = _col2im(g_cols, xt.shape, kh)
            return [(xt, g_x), (wt, g_w.reshape(wt.shape)), (bt, g_b)]

        _record(out, pull)
    return out


def relu(x) -> Tensor:
    xt = _as_tensor(x)
    out = Tensor(np.maximum(xt.data, 0))
    if _active_tape() is not None:
        mask = xt.data > 0  # subgradient 0 at the kink

        def pull(g: np.ndarray):
            return [(xt, g * mask)]

        _record(out, pull)
    return out


def pixel_shuffle(x, s: int) -> Tensor:
    """Rearrange (N, C*s*s, H, W) into (N, C, H*s, W*s).

    out[n, c, h*s+i, w*s+j] = in[n, c*s*s + i*s + j, h, w].
    """
    xt = _as_tensor(x)
    n, c, h, w = xt.shape
    if s < 1 or c % (s * s) != 0:
        raise ShapeError(f"channels {c} not divisible by shuffle factor {s}^2")
    c_out = c // (s * s)
    y = (
        xt.data.reshape(n, c_out, s, s, h, w)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(n, c_out, h * s, w * s)
    )
    out = Tensor(np.ascontiguousarray(y))

    if _active_tape() is not None:

        def pull(g: np.ndarray):
            g_x = (
                g.reshape(n, c_out, h, s, w, s)
                .transpose(0, 1, 3, 5, 2, 4)
                .reshape(n, c, h, w)
            )
            return [(xt, np.ascontiguousarray(g_x))]

        _record(out, pull)
    return out


def pixel_unshuffle_index(c_out: int, s: int, h: int, w: int):
    """Inverse index map of pixel_shuffle, for round-trip checks."""

    def inverse(y: np.ndarray) -> np.ndarray:
        n = y.shape[0]
        return (
            y.reshape(n, c_out, h, s, w, s)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(n, c_out * s * s, h, w)
        )

    return inverse


def concat_channels(inputs: Sequence) -> Tensor:
    """Concatenate along the channel axis, preserving input order."""
    ts = [_as_tensor(x) for x in inputs]
    if not ts:
        raise ShapeError("concat_channels needs at least one input")
    _check_dtypes(*ts)
    base = ts[0].shape
    for t in ts[1:]:
        if t.shape[0] != base[0] or t.shape[2:] != base[2:]:
            raise ShapeError(f"batch/spatial mismatch in concat: {base} vs {t.shape}")
    out = Tensor(np.concatenate([t.data for t in ts], axis=1))

    if _active_tape() is not None:
        offsets = np.cumsum([0] + [t.shape[1] for t in ts])

        def pull(g: np.ndarray):
            return [(t, g[:, offsets[i] : offsets[i + 1]]) for i, t in enumerate(ts)]

        _record(out, pull)
    return out


def add(a, b) -> Tensor:
    at, bt = _as_tensor(a), _as_tensor(b)
    _check_dtypes(at, bt)
    if at.shape != bt.shape:
        raise ShapeError(f"shape mismatch in add: {at.shape} vs {bt.shape}")
    out = Tensor(at.data + bt.data)
    if _active_tape() is not None:

        def pull(g: np.ndarray):
            return [(at, g), (bt, g)]

        _record(out, pull)
    return out


def _check_scalar(t: Tensor, role: str) -> None:
    if t.shape != (1, 1, 1, 1):
        raise ShapeError(f"{role} must be a scalar (1,1,1,1) tensor, got {t.shape}")


def scale(x, weight) -> Tensor:
    """Multiply a tensor by a scalar parameter."""
    xt, wt = _as_tensor(x), _as_tensor(weight)
    _check_dtypes(xt, wt)
    _check_scalar(wt, "scale weight")
    out = Tensor(xt.data * wt.data.reshape(()))
    if _active_tape() is not None:

        def pull(g: np.ndarray):
            g_w = np.sum(g * xt.data, dtype=g.dtype).reshape(1, 1, 1, 1)
            return [(xt, g * wt.data.reshape(())), (wt, g_w)]

        _record(out, pull)
    return out


def weighted_add(a, b, weight_a, weight_b) -> Tensor:
    """weight_a * a + weight_b * b with scalar branch weights."""
    at, bt = _as_tensor(a), _as_tensor(b)
    wa, wb = _as_tensor(weight_a), _as_tensor(weight_b)
    _check_dtypes(at, bt, wa, wb)
    if at.shape != bt.shape:
        raise ShapeError(f"shape mismatch in weighted_add: {at.shape} vs {bt.shape}")
    _check_scalar(wa, "weight_a")
    _check_scalar(wb, "weight_b")
    la = wa.data.reshape(())
    lb = wb.data.reshape(())
    out = Tensor(la * at.data + lb * bt.data)

    if _active_tape() is not None:

        def pull(g: np.ndarray):
            g_wa = np.sum(g * at.data, dtype=g.dtype).reshape(1, 1, 1, 1)
            g_wb = np.sum(g * bt.data, dtype=g.dtype).reshape(1, 1, 1, 1)
            return [(at, g * la), (bt, g * lb), (wa, g_wa), (wb, g_wb)]

        _record(out, pull)
    return out


def weight_norm_apply(v, g) -> Tensor:
    """Effective kernel w[o] = g[o] * v[o] / ||v[o]||_2 per output channel.

    ``v`` is a (c_out, c_in, k, k) direction tensor, ``g`` a
    (c_out, 1, 1, 1) gain. Zero-norm filters are rejected.
    """
    vt, gt = _as_tensor(v), _as_tensor(g)
    _check_dtypes(vt, gt)
    c_out = vt.shape[0]
    if gt.shape != (c_out, 1, 1, 1):
        raise ShapeError(f"gain shape {gt.shape} does not match {c_out} output channels")
    norms = np.sqrt(np.sum(vt.data * vt.data, axis=(1, 2, 3), keepdims=True))
    if np.any(norms == 0):
        raise ValueError("weight normalization hit a zero-norm filter")
    out = Tensor(gt.data / norms * vt.data)

    if _active_tape() is not None:

        def pull(grad: np.ndarray):
            dot = np.sum(grad * vt.data, axis=(1, 2, 3), keepdims=True)
            g_g = dot / norms
            g_v = (gt.data / norms) * grad - (gt.data * dot / norms**3) * vt.data
            return [(vt, g_v), (gt, g_g)]

        _record(out, pull)
    return out


def mean_abs_error(pred, target) -> Tensor:
    """Mean |pred - target| over all elements, as a scalar tensor.

    Subgradient is sign(pred - target)/count with sign(0) = 0.
    """
    pt, tt = _as_tensor(pred), _as_tensor(target)
    _check_dtypes(pt, tt)
    if pt.shape != tt.shape:
        raise ShapeError(f"shape mismatch in mean_abs_error: {pt.shape} vs {tt.shape}")
    diff = pt.data - tt.data
    out = Tensor(np.abs(diff).mean(dtype=pt.data.dtype).reshape(1, 1, 1, 1))

    if _active_tape() is not None:

        def pull(g: np.ndarray):
            s = g.reshape(()) * np.sign(diff) / diff.size
            return [(pt, s.astype(pt.data.dtype)), (tt, -s.astype(pt.data.dtype))]

        _record(out, pull)
    return out
