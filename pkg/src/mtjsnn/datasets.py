"""Dataset ingestion: IDX containers and a hermetic synthetic generator."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class ImageDataset:
    """Normalized images (values in [0, 1]) with integer class labels."""

    images: np.ndarray   # (n, rows*cols)
    labels: np.ndarray   # (n,)
    shape: tuple = (28, 28)
    source: str = "memory"

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataFormatError("image/label count mismatch")

    def __len__(self):
        return len(self.images)

    def filter_classes(self, classes) -> "ImageDataset":
        mask = np.isin(self.labels, list(classes))
        return ImageDataset(self.images[mask], self.labels[mask],
                            self.shape, self.source)

    def limit(self, n: int | None) -> "ImageDataset":
        if n is None or n >= len(self):
            return self
        return ImageDataset(self.images[:n], self.labels[:n], self.shape, self.source)


def _open_maybe_gzip(path):
    with open(path, "rb") as f:
        head = f.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(f, n, path):
    data = f.read(n)
    if len(data) != n:
        raise DataFormatError(f"truncated IDX payload in {path}")
    return data


def load_idx(path_images, path_labels, filter_classes=(0, 1),
             limit: int | None = 100) -> ImageDataset:
    """Load an MNIST-format IDX image/label pair.

    Big-endian container: images carry magic 0x00000803 and three
    dimension words, labels carry 0x00000801 and one.  Gzipped files are
    detected transparently.  The result is filtered to ``filter_classes``
    (default digits 0 and 1) and capped at ``limit`` images.
    """
    with _open_maybe_gzip(path_images) as f:
        magic, n_img, rows, cols = struct.unpack(">IIII", _read_exact(f, 16, path_images))
        if magic != IDX_IMAGES_MAGIC:
            raise DataFormatError(
                f"bad image magic 0x{magic:08x} in {path_images} (want 0x{IDX_IMAGES_MAGIC:08x})")
        raw = _read_exact(f, n_img * rows * cols, path_images)
    images = np.frombuffer(raw, dtype=np.uint8).reshape(n_img, rows * cols)

    with _open_maybe_gzip(path_labels) as f:
        magic, n_lab = struct.unpack(">II", _read_exact(f, 8, path_labels))
        if magic != IDX_LABELS_MAGIC:
            raise DataFormatError(
                f"bad label magic 0x{magic:08x} in {path_labels} (want 0x{IDX_LABELS_MAGIC:08x})")
        labels = np.frombuffer(_read_exact(f, n_lab, path_labels), dtype=np.uint8)

    if n_img != n_lab:
        raise DataFormatError(f"{n_img} images but {n_lab} labels")

    ds = ImageDataset(images.astype(float) / 255.0, labels.astype(np.int64),
                      shape=(rows, cols), source=str(path_images))
    if filter_classes is not None:
        ds = ds.filter_classes(filter_classes)
    return ds.limit(limit)


def _ring_bar_image(cls: int, rng: np.random.Generator) -> np.ndarray:
    """One jittered 28x28 archetype: class 0 is a ring, class 1 a vertical bar.

    The two archetypes have similar ink totals (~100 px) so both classes
    drive comparable crossbar currents, and low mutual pixel overlap.
    """
    img = np.zeros((28, 28))
    dy = int(rng.integers(-2, 3))
    dx = int(rng.integers(-2, 3))
    if cls == 0:
        yy, xx = np.mgrid[0:28, 0:28]
        r = np.hypot(yy - 14 - dy, xx - 14 - dx)
        img[(r >= 7.0) & (r <= 9.0)] = 1.0
    else:
        img[max(2 + dy, 0):min(27 + dy, 28), max(12 + dx, 0):min(16 + dx, 28)] = 1.0
    img *= 0.75 + 0.25 * rng.random((28, 28))
    return img.ravel()


def synth_dataset(n_per_class: int, seed: int = 0) -> ImageDataset:
    """Two-class synthetic digits (ring vs bar), classes interleaved.

    Per-image jitter: +-2 px translation and uniform pixel-intensity
    modulation in [0.75, 1].  Deterministic for a given seed.
    """
    if n_per_class <= 0:
        raise ValueError("n_per_class must be positive")
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for _ in range(n_per_class):
        for cls in (0, 1):
            images.append(_ring_bar_image(cls, rng))
            labels.append(cls)
    return ImageDataset(np.array(images), np.array(labels, dtype=np.int64),
                        source=f"synth(seed={seed})")
