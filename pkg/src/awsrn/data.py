"""Image I/O, color conversion, bicubic resampling, and patch sampling.

Images are 8-bit, row-major (height, width, channels) with 1 or 3
channels. Low-resolution training inputs are synthesized from HR
images by bicubic downscaling, whole-image first; patches are cropped
afterwards so borders see real context rather than padding.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .autodiff import Tensor
from .errors import DataError, ShapeError
from .model import VALID_SCALES


class Image:
    """8-bit image; samples shaped (height, width, channels)."""

    __slots__ = ("samples",)

    def __init__(self, samples: np.ndarray):
        samples = np.asarray(samples)
        if samples.dtype != np.uint8:
            raise DataError(f"image samples must be uint8, got {samples.dtype}")
        if samples.ndim == 2:
            samples = samples[:, :, None]
        if samples.ndim != 3 or samples.shape[2] not in (1, 3):
            raise DataError(f"expected (h, w, 1|3) samples, got shape {samples.shape}")
        self.samples = np.ascontiguousarray(samples)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]

    def __repr__(self) -> str:
        return f"Image({self.width}x{self.height}x{self.channels})"


def load_png(path) -> Image:
    """Read an image file; non-RGB content is converted to RGB."""
    try:
        with PILImage.open(path) as im:
            if im.mode in ("I", "I;16", "I;16B", "I;16L", "I;16N", "F"):
                raise DataError(f"unsupported bit depth in {path} (mode {im.mode})")
            if im.mode != "RGB":
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except DataError:
        raise
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    return Image(arr)


def save_png(image: Image, path) -> None:
    arr = image.samples[:, :, 0] if image.channels == 1 else image.samples
    try:
        PILImage.fromarray(arr).save(path, format="PNG")
    except OSError as exc:
        raise DataError(f"cannot write image {path}: {exc}") from exc


def rgb_to_y(image: Image) -> np.ndarray:
    """Luminance plane in [16, 235] for 8-bit RGB input.

    Grayscale images pass through as float unchanged: they are already
    a single luminance plane.
    """
    arr = image.samples.astype(np.float64)
    if image.channels == 1:
        return arr[:, :, 0]
    r, g, b = arr[:, :, 0], arr[:, :, 1], arr[:, :, 2]
    return 16.0 + (65.481 * r + 128.553 * g + 24.966 * b) / 255.0


def _cubic(x: np.ndarray) -> np.ndarray:
    """Cubic convolution kernel with a = -0.5."""
    ax = np.abs(x)
    near = 1.5 * ax**3 - 2.5 * ax**2 + 1.0
    far = -0.5 * ax**3 + 2.5 * ax**2 - 4.0 * ax + 2.0
    return np.where(ax <= 1.0, near, np.where(ax < 2.0, far, 0.0))


def _axis_taps(in_n: int, out_n: int, factor: float):
    """Per-output-site tap indices (clamped) and kernel weights."""
    dst = np.arange(out_n, dtype=np.float64)
    src = (dst + 0.5) / factor - 0.5
    base = np.floor(src).astype(np.int64)
    idx = base[:, None] + np.arange(-1, 3)
    weights = _cubic(src[:, None] - idx)
    return np.clip(idx, 0, in_n - 1), weights


def _resample_axis(arr: np.ndarray, axis: int, factor: float) -> np.ndarray:
    in_n = arr.shape[axis]
    out_n = int(round(in_n * factor))
    if out_n < 1:
        raise DataError(f"resize factor {factor} collapses size {in_n} to zero")
    idx, weights = _axis_taps(in_n, out_n, factor)
    moved = np.moveaxis(arr, axis, 0)
    out = np.einsum("ot,ot...->o...", weights, moved[idx])
    return np.moveaxis(out, 0, axis)


def bicubic_resize(obj, factor: float):
    """Separable cubic-convolution resampling, same kind out as in.

    Half-pixel center alignment, edge-clamped taps. Image input is
    quantized back to 8 bits; Tensor input stays floating point with
    no clamping.
    """
    if factor <= 0:
        raise DataError(f"resize factor must be positive, got {factor}")
    if isinstance(obj, Image):
        arr = obj.samples.astype(np.float64)
        arr = _resample_axis(arr, 0, factor)
        arr = _resample_axis(arr, 1, factor)
        return Image(np.clip(np.rint(arr), 0, 255).astype(np.uint8))
    if isinstance(obj, Tensor):
        arr = _resample_axis(obj.data, 2, factor)
        arr = _resample_axis(arr, 3, factor)
        return Tensor(np.ascontiguousarray(arr, dtype=obj.data.dtype))
    raise TypeError(f"expected Image or Tensor, got {type(obj).__name__}")


def make_pair(hr: Image, s: int) -> tuple[Image, Image]:
    """Crop HR to a multiple of s, then degrade by bicubic 1/s."""
    if s not in VALID_SCALES:
        raise DataError(f"scale must be one of {VALID_SCALES}, got {s}")
    h = (hr.height // s) * s
    w = (hr.width // s) * s
    if h == 0 or w == 0:
        raise DataError(f"image {hr.width}x{hr.height} is smaller than scale {s}")
    hr_cropped = Image(hr.samples[:h, :w])
    lr = bicubic_resize(hr_cropped, 1.0 / s)
    return lr, hr_cropped


@dataclass(frozen=True)
class PairedImage:
    image_id: str
    lr: Image
    hr: Image
    scale: int

    def __post_init__(self):
        if self.hr.height != self.lr.height * self.scale or (
            self.hr.width != self.lr.width * self.scale
        ):
            raise DataError(
                f"pair {self.image_id!r}: hr {self.hr.width}x{self.hr.height} is not "
                f"{self.scale}x the lr {self.lr.width}x{self.lr.height}"
            )
        if self.hr.channels != self.lr.channels:
            raise DataError(f"pair {self.image_id!r}: channel mismatch")


@dataclass(frozen=True)
class PatchProvenance:
    image_id: str
    y: int
    x: int
    augmentation: int


@dataclass
class PatchBatch:
    lr: Tensor
    hr: Tensor
    provenance: list[PatchProvenance]


def apply_dihedral(arr: np.ndarray, code: int) -> np.ndarray:
    """One of the 8 square symmetries on an (h, w, c) array.

    Low two bits count 90-degree rotations; bit 2 adds a horizontal flip.
    """
    if not 0 <= code < 8:
        raise DataError(f"augmentation code must be in [0, 8), got {code}")
    out = np.rot90(arr, code & 3, axes=(0, 1))
    if code & 4:
        out = out[:, ::-1]
    return np.ascontiguousarray(out)


def sample_batch(
    pairs: Sequence[PairedImage],
    rng: np.random.Generator,
    p: int = 48,
    batch: int = 16,
    dtype=np.float32,
) -> PatchBatch:
    """Draw aligned LR/HR patch pairs: uniform image, offset, and symmetry.

    Per patch the generator is consumed in a fixed order (image, row,
    column, augmentation), so a seeded generator reproduces the batch.
    """
    if not pairs:
        raise DataError("no image pairs to sample from")
    s = pairs[0].scale
    if any(q.scale != s for q in pairs):
        raise DataError("mixed scales in one sampling pool")
    for q in pairs:
        if q.lr.height < p or q.lr.width < p:
            raise DataError(
                f"pair {q.image_id!r}: lr {q.lr.width}x{q.lr.height} is smaller "
                f"than the {p}x{p} patch"
            )
    lr_out = np.empty((batch, 3, p, p), dtype=dtype)
    hr_out = np.empty((batch, 3, s * p, s * p), dtype=dtype)
    provenance = []
    inv = 1.0 / 255.0
    for b in range(batch):
        q = pairs[int(rng.integers(len(pairs)))]
        y = int(rng.integers(q.lr.height - p + 1))
        x = int(rng.integers(q.lr.width - p + 1))
        code = int(rng.integers(8))
        lr_patch = apply_dihedral(q.lr.samples[y : y + p, x : x + p], code)
        hr_patch = apply_dihedral(
            q.hr.samples[s * y : s * (y + p), s * x : s * (x + p)], code
        )
        lr_out[b] = lr_patch.transpose(2, 0, 1) * inv
        hr_out[b] = hr_patch.transpose(2, 0, 1) * inv
        provenance.append(PatchProvenance(q.image_id, y, x, code))
    return PatchBatch(Tensor(lr_out), Tensor(hr_out), provenance)


def image_to_tensor(image: Image, dtype=np.float32) -> Tensor:
    """(1, c, h, w) tensor scaled to [0, 1]."""
    arr = image.samples.astype(dtype) / 255.0
    return Tensor(np.ascontiguousarray(arr.transpose(2, 0, 1)[None]))


def tensor_to_image(t: Tensor) -> Image:
    """Quantize a single [0, 1] image tensor back to 8 bits."""
    if t.shape[0] != 1:
        raise ShapeError(f"expected a single-image tensor, got batch {t.shape[0]}")
    arr = np.clip(t.data[0], 0.0, 1.0) * 255.0
    return Image(np.rint(arr).astype(np.uint8).transpose(1, 2, 0))


def read_manifest(path) -> list[Path]:
    """One image path per line, relative paths anchored at the manifest."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        entry = Path(line)
        out.append(entry if entry.is_absolute() else path.parent / entry)
    return out


def load_pairs(source, scale: int) -> list[PairedImage]:
    """Build LR/HR pairs from a directory of PNGs or a manifest file."""
    src = Path(source)
    if src.is_dir():
        paths = sorted(src.glob("*.png"))
    elif src.is_file():
        paths = read_manifest(src)
    else:
        raise DataError(f"dataset source {src} does not exist")
    if not paths:
        raise DataError(f"no images found under {src}")
    pairs = []
    for p in paths:
        hr = load_png(p)
        lr, hr_cropped = make_pair(hr, scale)
        pairs.append(PairedImage(p.stem, lr, hr_cropped, scale))
    return pairs
