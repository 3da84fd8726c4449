import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def smooth_image(h: int, w: int, seed: int = 0):
    """Low-frequency synthetic photo stand-in."""
    from awsrn.data import Image

    gen = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    arr = np.zeros((h, w, 3))
    for c in range(3):
        fy, fx = gen.uniform(0.5, 2.0, size=2)
        ph = gen.uniform(0, 2 * np.pi)
        arr[:, :, c] = 0.5 + 0.4 * np.sin(
            2 * np.pi * (fy * yy / h + fx * xx / w) + ph
        )
    return Image(np.rint(arr * 255).astype(np.uint8))


def fd_gradient(f, array: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f() wrt every entry of array.

    Mutates the array entry-wise and restores it; f must read the array
    by reference.
    """
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        f_plus = f()
        flat[i] = keep - eps
        f_minus = f()
        flat[i] = keep
        gflat[i] = (f_plus - f_minus) / (2 * eps)
    return grad


def conv2d_ref(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Direct same-padded cross-correlation, one kernel tap at a time."""
    n, c_in, h, wd = x.shape
    c_out, _, k, _ = w.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((n, c_out, h, wd), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            patch = xp[:, :, i : i + h, j : j + wd]
            out += np.einsum("nchw,oc->nohw", patch, w[:, :, i, j])
    return out + b.reshape(1, c_out, 1, 1)


def weight_norm_ref(v: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Per-filter renormalized weights: g[o] * v[o] / ||v[o]||."""
    norms = np.sqrt(np.sum(v * v, axis=(1, 2, 3), keepdims=True))
    return g.reshape(-1, 1, 1, 1) * v / norms


def pixel_shuffle_ref(x: np.ndarray, s: int) -> np.ndarray:
    n, c, h, w = x.shape
    out = x.reshape(n, c // (s * s), s, s, h, w)
    out = out.transpose(0, 1, 4, 2, 5, 3)
    return out.reshape(n, c // (s * s), h * s, w * s)


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """Worst-case elementwise relative error with a small denominator floor."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.abs(a) + np.abs(b), 1e-6)
    return float(np.max(np.abs(a - b) / denom))
